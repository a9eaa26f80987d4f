//! Validation-scale non-Markovian quantum jumps: the class ensemble, the
//! master-equation oracle and the Dyson-resummed class propagators.

mod dyson;
mod ensemble;
mod master;
mod system;

pub use dyson::{
    bare_propagator, dressed_propagator, dressed_propagator_multi, dressed_product, enumerate_loop_sum,
    loop_probability, outcome_probability, LoopSum,
};
pub use ensemble::{evolve_ensemble, BackAction, EnsembleConfig, EnsembleRun, Jump, MemoryKernel, TrajectoryClass};
pub use master::{master_equation_evolve, master_equation_trajectory, TRACE_TOLERANCE};
pub use system::{normal_jump, reverse_jump_probability, JumpChannel, OpenSystem, StateVector, DEFAULT_DIM_CAP};

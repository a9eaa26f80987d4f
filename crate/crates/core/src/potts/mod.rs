//! Inhomogeneous S_Q Potts model of the replicated circuit and its samplers.

mod chain;
mod lattice;
mod sampler;

pub use chain::{integrated_autocorrelation, run_chain, Algorithm, ChainSamples, McConfig};
pub use lattice::{partner, LatticeSpec, ReplicaLattice};
pub use sampler::{metropolis_step, wolff_step, ClusterMove, Workspace};

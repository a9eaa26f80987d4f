//! Permutation-group machinery and the weights of the circuit-to-Potts mapping.

mod perm;
mod weights;

pub use perm::{Permutation, SymmetricGroup, MAX_REPLICAS};
pub use weights::{
    bond_energy, measurement_weight, plaquette_weight, weingarten, BondEnergyTable, WeightTable,
    WeingartenTable, DEFAULT_CLAMP,
};

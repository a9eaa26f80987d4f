#![no_std]
//! Numerical core for non-Markovian quantum jumps and the replica Potts model
//! of measured random circuits.
//!
//! Everything here is pure computation over `alloc`; file formats, the CLI and
//! thread pools live in the companion `backflow` crate.

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod error;
pub mod linalg;
pub mod rate;
pub mod potts;
pub mod replica;
pub mod trajectories;

pub use error::{Error, Result};

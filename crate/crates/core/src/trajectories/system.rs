//! State vectors, jump channels and the open system they live in.

use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::linalg::{inner, norm_sqr, normalize, CMatrix, C64};
use crate::rate::RateSchedule;

/// Default cap on the Hilbert-space dimension d^L.
pub const DEFAULT_DIM_CAP: usize = 4096;

/// Pure state of `sites` qudits of local dimension `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<C64>,
    d: usize,
    sites: usize,
}

impl StateVector {
    /// Normalizes `amplitudes`; rejects zero vectors and wrong lengths.
    pub fn new(d: usize, sites: usize, mut amplitudes: Vec<C64>) -> Result<Self> {
        let dim = checked_dim(d, sites, DEFAULT_DIM_CAP)?;
        if amplitudes.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: amplitudes.len() });
        }
        if normalize(&mut amplitudes) == 0.0 {
            return Err(Error::InvalidParameter("state vector has zero norm"));
        }
        Ok(Self { amplitudes, d, sites })
    }

    /// Computational basis state with the given local levels, site 0 first.
    pub fn basis(d: usize, levels: &[usize]) -> Result<Self> {
        let dim = checked_dim(d, levels.len(), DEFAULT_DIM_CAP)?;
        let mut index = 0;
        for &l in levels {
            if l >= d {
                return Err(Error::InvalidParameter("basis level exceeds local dimension"));
            }
            index = index * d + l;
        }
        let mut amps = alloc::vec![C64::zero(); dim];
        amps[index] = C64::new(1.0, 0.0);
        Ok(Self { amplitudes: amps, d, sites: levels.len() })
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn density_matrix(&self) -> CMatrix {
        CMatrix::outer(&self.amplitudes, &self.amplitudes)
    }

    /// |⟨self|other⟩|²
    pub fn fidelity(&self, other: &Self) -> f64 {
        inner(&self.amplitudes, &other.amplitudes).norm_sqr()
    }
}

pub(crate) fn checked_dim(d: usize, sites: usize, cap: usize) -> Result<usize> {
    if d < 2 {
        return Err(Error::InvalidParameter("local dimension must be at least 2"));
    }
    let mut dim: usize = 1;
    for _ in 0..sites {
        dim = dim.checked_mul(d).filter(|&x| x <= cap).ok_or(Error::DimensionTooLarge(usize::MAX))?;
    }
    Ok(dim)
}

/// A decay channel: jump operator embedded in the full space, the site it
/// acts on, and the index of the rate schedule that drives it.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpChannel {
    pub name: String,
    pub site: usize,
    pub schedule: usize,
    operator: CMatrix,
    number: CMatrix,
}

impl JumpChannel {
    /// Embeds the local operator `local` at `site` of a `sites`-qudit register.
    pub fn local(name: &str, local: &CMatrix, site: usize, sites: usize, schedule: usize) -> Result<Self> {
        if site >= sites {
            return Err(Error::InvalidParameter("channel site out of range"));
        }
        checked_dim(local.dim(), sites, DEFAULT_DIM_CAP)?;
        Ok(Self::full(name, CMatrix::embed(local, site, sites), site, schedule))
    }

    /// Channel from an operator already acting on the full space.
    pub fn full(name: &str, operator: CMatrix, site: usize, schedule: usize) -> Self {
        let number = &operator.dagger() * &operator;
        Self { name: String::from(name), site, schedule, operator, number }
    }

    pub fn operator(&self) -> &CMatrix {
        &self.operator
    }

    /// a†a
    pub fn number(&self) -> &CMatrix {
        &self.number
    }

    /// ⟨ψ|a†a|ψ⟩
    pub fn expectation(&self, psi: &[C64]) -> f64 {
        inner(psi, &self.number.apply(psi)).re.max(0.0)
    }
}

/// Hamiltonian plus decay channels.
#[derive(Debug, Clone, PartialEq)]
pub struct OpenSystem {
    pub hamiltonian: CMatrix,
    pub channels: Vec<JumpChannel>,
}

impl OpenSystem {
    pub fn new(hamiltonian: CMatrix, channels: Vec<JumpChannel>) -> Result<Self> {
        let dim = hamiltonian.dim();
        if dim > DEFAULT_DIM_CAP {
            return Err(Error::DimensionTooLarge(dim));
        }
        for ch in &channels {
            if ch.operator.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: ch.operator.dim() });
            }
        }
        Ok(Self { hamiltonian, channels })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    /// Checks that every channel's schedule exists and covers `steps`.
    pub fn check_schedules(&self, schedules: &[RateSchedule], steps: usize) -> Result<()> {
        for ch in &self.channels {
            let s = schedules.get(ch.schedule).ok_or(Error::InvalidParameter("channel refers to a missing schedule"))?;
            if s.len() < steps {
                return Err(Error::ScheduleTooShort { len: s.len(), needed: steps });
            }
        }
        let dt = schedules.first().map(|s| s.dt());
        if schedules.iter().any(|s| Some(s.dt()) != dt) {
            return Err(Error::InvalidParameter("all schedules must share one time step"));
        }
        Ok(())
    }
}

/// Normal jump: a|ψ⟩/‖a|ψ⟩‖ with probability p⁺ = weight·⟨a†a⟩, where
/// `weight` = Δ(t)δt. `None` when the channel annihilates the state.
pub fn normal_jump(psi: &[C64], channel: &JumpChannel, weight: f64) -> Option<(Vec<C64>, f64)> {
    if weight < 0.0 {
        return None;
    }
    let mut out = channel.operator.apply(psi);
    let n2 = norm_sqr(&out);
    if n2 <= 1e-300 {
        return None;
    }
    normalize(&mut out);
    Some((out, weight * n2))
}

/// Reverse-jump probability of Eq. MB_NMQJprob:
/// N_target / Σ_sources N · |Δ|δt · ⟨a†a⟩_target. Zero without sources.
/// The value does not depend on which source class asks.
pub fn reverse_jump_probability(target_weight: f64, source_weights: &[f64], magnitude: f64, target_expectation: f64) -> f64 {
    let total: f64 = source_weights.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    target_weight / total * magnitude.abs() * target_expectation
}

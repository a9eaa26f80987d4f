//! Thermalization and sampling loops.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::lattice::ReplicaLattice;
use super::sampler::{metropolis_step, wolff_step, Workspace};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Wolff,
    /// One step is a sweep of `sites` single-site updates.
    Metropolis,
    /// One Wolff update followed by one Metropolis sweep.
    Hybrid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub n_therm: usize,
    pub stride: usize,
    pub n_measurements: usize,
    pub seed: u64,
    pub algorithm: Algorithm,
}

impl Default for McConfig {
    fn default() -> Self {
        Self { n_therm: 25_000, stride: 50, n_measurements: 200, seed: 0, algorithm: Algorithm::Wolff }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_therm == 0 || self.stride == 0 || self.n_measurements == 0 {
            return Err(Error::InvalidParameter("Monte Carlo counts must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainSamples {
    pub energy: Vec<f64>,
    pub boundary_energy: Vec<f64>,
    /// Mean per-site energy, row-major from the bottom row.
    pub local_energy: Vec<f64>,
    /// Mean misaligned-bond fraction per layer.
    pub misaligned: Vec<f64>,
    /// Largest misaligned-bond fraction seen per layer.
    pub misaligned_max: Vec<f64>,
    pub acceptance: f64,
    pub mean_cluster: f64,
    /// Integrated autocorrelation time of the energy series, in samples.
    pub tau_int: f64,
}

impl ChainSamples {
    pub fn mean_energy(&self) -> f64 {
        mean(&self.energy)
    }

    pub fn mean_boundary_energy(&self) -> f64 {
        mean(&self.boundary_energy)
    }

    /// Standard error of the mean energy, inflated by 2τ_int.
    pub fn energy_error(&self) -> f64 {
        error_of_mean(&self.energy, self.tau_int)
    }

    pub fn boundary_error(&self) -> f64 {
        error_of_mean(&self.boundary_energy, integrated_autocorrelation(&self.boundary_energy))
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn error_of_mean(xs: &[f64], tau: f64) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
    num_traits::Float::sqrt(var * (2.0 * tau).max(1.0) / n as f64)
}

/// Integrated autocorrelation time τ = ½ + Σ ρ(t) with Sokal's automatic
/// window (stop once t ≥ 5τ). Returns 0.5 for uncorrelated or constant data.
pub fn integrated_autocorrelation(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 4 {
        return 0.5;
    }
    let m = mean(xs);
    let c0 = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n as f64;
    if c0 <= 0.0 {
        return 0.5;
    }
    let mut tau = 0.5;
    for t in 1..n / 2 {
        let ct = xs[..n - t].iter().zip(&xs[t..]).map(|(a, b)| (a - m) * (b - m)).sum::<f64>() / n as f64;
        tau += ct / c0;
        if t as f64 >= 5.0 * tau {
            break;
        }
    }
    tau.max(0.5)
}

fn step(lattice: &mut ReplicaLattice, ws: &mut Workspace, rng: &mut ChaCha8Rng, alg: Algorithm, stats: &mut (u64, u64, u64)) {
    match alg {
        Algorithm::Wolff => {
            let mv = wolff_step(lattice, ws, rng);
            stats.0 += mv.accepted as u64;
            stats.1 += 1;
            stats.2 += mv.size as u64;
        }
        Algorithm::Metropolis => {
            for _ in 0..lattice.sites() {
                stats.0 += metropolis_step(lattice, rng) as u64;
                stats.1 += 1;
                stats.2 += 1;
            }
        }
        Algorithm::Hybrid => {
            let mv = wolff_step(lattice, ws, rng);
            stats.0 += mv.accepted as u64;
            stats.1 += 1;
            stats.2 += mv.size as u64;
            for _ in 0..lattice.sites() {
                metropolis_step(lattice, rng);
            }
        }
    }
}

/// Thermalize for `n_therm` steps, then record `n_measurements` samples
/// `stride` steps apart. The lattice is left in its final state.
pub fn run_chain(lattice: &mut ReplicaLattice, config: &McConfig) -> Result<ChainSamples> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut ws = Workspace::new(lattice);
    let mut stats = (0u64, 0u64, 0u64);
    for _ in 0..config.n_therm {
        step(lattice, &mut ws, &mut rng, config.algorithm, &mut stats);
    }
    stats = (0, 0, 0);
    let (n, ly) = (lattice.sites(), lattice.ly());
    let mut energy = Vec::with_capacity(config.n_measurements);
    let mut boundary_energy = Vec::with_capacity(config.n_measurements);
    let mut local = alloc::vec![0.0; n];
    let mut misaligned = alloc::vec![0.0; ly];
    let mut misaligned_max = alloc::vec![0.0f64; ly];
    for _ in 0..config.n_measurements {
        for _ in 0..config.stride {
            step(lattice, &mut ws, &mut rng, config.algorithm, &mut stats);
        }
        energy.push(lattice.total_energy());
        boundary_energy.push(lattice.boundary_energy());
        for (acc, e) in local.iter_mut().zip(lattice.local_energy()) {
            *acc += e;
        }
        for (i, f) in lattice.misaligned_fraction().into_iter().enumerate() {
            misaligned[i] += f;
            misaligned_max[i] = misaligned_max[i].max(f);
        }
    }
    let inv = 1.0 / config.n_measurements as f64;
    local.iter_mut().for_each(|v| *v *= inv);
    misaligned.iter_mut().for_each(|v| *v *= inv);
    let tau_int = integrated_autocorrelation(&energy);
    Ok(ChainSamples {
        energy,
        boundary_energy,
        local_energy: local,
        misaligned,
        misaligned_max,
        acceptance: stats.0 as f64 / stats.1.max(1) as f64,
        mean_cluster: stats.2 as f64 / stats.1.max(1) as f64,
        tau_int,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potts::lattice::LatticeSpec;
    use crate::rate::RateSchedule;

    #[test]
    fn autocorrelation_of_white_noise_is_half() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs: Vec<f64> = (0..20000).map(|_| rng.random::<f64>()).collect();
        let tau = integrated_autocorrelation(&xs);
        assert!((tau - 0.5).abs() < 0.1, "{tau}");
    }

    #[test]
    fn autocorrelation_of_ar1() {
        use rand::Rng;
        // x_t = a x_{t-1} + noise has τ = (1 + a) / (2 (1 - a)).
        let a = 0.8;
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut x = 0.0;
        let xs: Vec<f64> = (0..200_000)
            .map(|_| {
                x = a * x + rng.random::<f64>() - 0.5;
                x
            })
            .collect();
        let tau = integrated_autocorrelation(&xs);
        assert!((tau - 4.5).abs() < 0.5, "{tau}");
    }

    #[test]
    fn identical_seeds_give_identical_series() {
        let spec = LatticeSpec::new(8, 6, 4);
        let sched = RateSchedule::uniform(0.5, 0.25, 6);
        let cfg = McConfig { n_therm: 100, stride: 3, n_measurements: 20, seed: 77, algorithm: Algorithm::Wolff };
        let a = run_chain(&mut ReplicaLattice::build(&spec, &sched).unwrap(), &cfg).unwrap();
        let b = run_chain(&mut ReplicaLattice::build(&spec, &sched).unwrap(), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_counts_rejected() {
        let cfg = McConfig { n_measurements: 0, ..McConfig::default() };
        assert!(cfg.validate().is_err());
    }
}

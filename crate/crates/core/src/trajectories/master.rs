//! Fourth-order integrator for the time-local master equation.

use alloc::vec::Vec;

use num_traits::Float;

use super::system::OpenSystem;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::rate::RateSchedule;

/// Largest tolerated |tr ρ − 1| before the run is rejected.
pub const TRACE_TOLERANCE: f64 = 1e-6;

/// ρ̇ = −i[H, ρ] + Σ_s Δ_s (a ρ a† − ½{a†a, ρ})
fn rhs(system: &OpenSystem, rates: &[f64], rho: &CMatrix) -> CMatrix {
    let mut out = system.hamiltonian.commutator(rho).scale(C64::new(0.0, -1.0));
    for (ch, &rate) in system.channels.iter().zip(rates) {
        if rate == 0.0 {
            continue;
        }
        let a = ch.operator();
        let jump = &(a * rho) * &a.dagger();
        let anti = ch.number().anticommutator(rho).scale_re(0.5);
        out = &out + &(&jump - &anti).scale_re(rate);
    }
    out
}

fn rk4(system: &OpenSystem, rates: &[f64], rho: &CMatrix, h: f64) -> CMatrix {
    let k1 = rhs(system, rates, rho);
    let k2 = rhs(system, rates, &(rho + &k1.scale_re(0.5 * h)));
    let k3 = rhs(system, rates, &(rho + &k2.scale_re(0.5 * h)));
    let k4 = rhs(system, rates, &(rho + &k3.scale_re(h)));
    let sum = &(&k1 + &k2.scale_re(2.0)) + &(&k3.scale_re(2.0) + &k4);
    rho + &sum.scale_re(h / 6.0)
}

/// Integrates over `steps` schedule steps with `substeps` RK4 steps each,
/// holding the rate Δ_i = p_i/δt constant on [t_i, t_{i+1}). Returns ρ at
/// t_0, …, t_steps.
pub fn master_equation_trajectory(
    rho0: &CMatrix,
    system: &OpenSystem,
    schedules: &[RateSchedule],
    steps: usize,
    substeps: usize,
) -> Result<Vec<CMatrix>> {
    if rho0.dim() != system.dim() {
        return Err(Error::DimensionMismatch { expected: system.dim(), found: rho0.dim() });
    }
    if substeps == 0 {
        return Err(Error::InvalidParameter("substeps must be positive"));
    }
    system.check_schedules(schedules, steps)?;
    let dt = schedules.first().map_or(1.0, |s| s.dt());
    let h = dt / substeps as f64;
    let trace0 = rho0.trace().re;
    let mut out = Vec::with_capacity(steps + 1);
    let mut rho = rho0.clone();
    out.push(rho.clone());
    let mut rates = alloc::vec![0.0; system.channels.len()];
    for i in 0..steps {
        for (r, ch) in rates.iter_mut().zip(&system.channels) {
            *r = schedules[ch.schedule].rate(i);
        }
        for _ in 0..substeps {
            rho = rk4(system, &rates, &rho, h);
        }
        let drift = Float::abs(rho.trace().re - trace0);
        if drift > TRACE_TOLERANCE {
            return Err(Error::TraceDrift { drift });
        }
        out.push(rho.clone());
    }
    Ok(out)
}

/// ρ(t_final) from [`master_equation_trajectory`]; `t_final` is rounded to
/// the nearest grid point.
pub fn master_equation_evolve(
    rho0: &CMatrix,
    system: &OpenSystem,
    schedules: &[RateSchedule],
    t_final: f64,
    substeps: usize,
) -> Result<CMatrix> {
    let dt = schedules.first().ok_or(Error::InvalidParameter("at least one schedule is required"))?.dt();
    if !(t_final >= 0.0) {
        return Err(Error::InvalidParameter("final time must be nonnegative"));
    }
    let steps = Float::round(t_final / dt) as usize;
    let mut traj = master_equation_trajectory(rho0, system, schedules, steps, substeps)?;
    Ok(traj.pop().expect("trajectory holds the initial state"))
}

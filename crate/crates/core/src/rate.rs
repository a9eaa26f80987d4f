//! Time-dependent decay rates and their per-layer discretization.
//!
//! A [`RateProfile`] is a continuous rate Δ(t). Sampling it on a grid of
//! step `dt` yields a [`RateSchedule`] of signed per-step weights p_i; steps
//! with p_i < 0 are the non-Markovian (information back-flow) steps.

use alloc::vec::Vec;
use core::ops::Range;

use num_traits::Float;

use crate::error::{Error, Result};

/// Continuous decay rate Δ(t).
#[derive(Debug, Clone, PartialEq)]
pub enum RateProfile {
    /// Δ(t) = `rate` for all t ≥ 0.
    Constant { rate: f64 },
    /// Time-convolutionless rate of a Lorentzian bath:
    /// Δ(t) = Δ0 [Γ/ω + e^{−Γt} (sin ωt − (Γ/ω) cos ωt)].
    Lorentzian { amplitude: f64, bandwidth: f64, detuning: f64 },
    /// Piecewise-linear interpolation through (time, rate) pairs sorted by time.
    Tabulated { points: Vec<(f64, f64)> },
}

/// Sign of the first local minimum of a Lorentzian rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinimumSign {
    Negative,
    Nonnegative,
}

/// Location and value of the first minimum of a Lorentzian rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstMinimum {
    pub time: f64,
    pub rate: f64,
    pub sign: MinimumSign,
}

impl RateProfile {
    pub fn constant(rate: f64) -> Self {
        RateProfile::Constant { rate }
    }

    pub fn lorentzian(amplitude: f64, bandwidth: f64, detuning: f64) -> Result<Self> {
        if !(bandwidth > 0.0) || !(detuning > 0.0) {
            return Err(Error::InvalidParameter("lorentzian profile needs bandwidth > 0 and detuning > 0"));
        }
        Ok(RateProfile::Lorentzian { amplitude, bandwidth, detuning })
    }

    /// Lorentzian profile in units of the detuning (ω = 1) with Γ/ω = `ratio`.
    pub fn lorentzian_ratio(amplitude: f64, ratio: f64) -> Result<Self> {
        Self::lorentzian(amplitude, ratio, 1.0)
    }

    pub fn tabulated(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter("tabulated profile needs at least one point"));
        }
        if points.iter().any(|(t, r)| !t.is_finite() || !r.is_finite()) {
            return Err(Error::InvalidParameter("tabulated profile contains non-finite values"));
        }
        points.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidParameter("tabulated profile has duplicate times"));
        }
        Ok(RateProfile::Tabulated { points })
    }

    /// Δ(t) for t ≥ 0.
    pub fn evaluate(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::InvalidParameter("rate queried at negative time"));
        }
        Ok(match self {
            RateProfile::Constant { rate } => *rate,
            RateProfile::Lorentzian { amplitude, bandwidth, detuning } => {
                let r = bandwidth / detuning;
                let wt = detuning * t;
                amplitude * (r + Float::exp(-bandwidth * t) * (Float::sin(wt) - r * Float::cos(wt)))
            }
            RateProfile::Tabulated { points } => {
                let (start, end) = (points[0].0, points[points.len() - 1].0);
                if t < start || t > end {
                    return Err(Error::OutOfRange { t, start, end });
                }
                let idx = points.partition_point(|p| p.0 <= t);
                if idx == points.len() {
                    points[points.len() - 1].1
                } else {
                    let (t0, r0) = points[idx - 1];
                    let (t1, r1) = points[idx];
                    r0 + (r1 - r0) * (t - t0) / (t1 - t0)
                }
            }
        })
    }

    /// Late-time value of the rate, used to normalize discretizations.
    pub fn asymptote(&self) -> f64 {
        match self {
            RateProfile::Constant { rate } => *rate,
            RateProfile::Lorentzian { amplitude, bandwidth, detuning } => amplitude * bandwidth / detuning,
            RateProfile::Tabulated { points } => points[points.len() - 1].1,
        }
    }

    /// Locates the first local minimum of a Lorentzian rate and reports its sign.
    ///
    /// The minimum is bracketed on ωt ∈ [π, 2π] where dΔ/dt changes sign from
    /// negative to positive, and refined by bisection on the derivative.
    pub fn first_minimum(&self) -> Result<FirstMinimum> {
        let RateProfile::Lorentzian { amplitude, bandwidth, detuning } = *self else {
            return Err(Error::NotLorentzian);
        };
        let r = bandwidth / detuning;
        // dΔ/dt up to the positive factor Δ0 e^{-Γt}.
        let slope = |t: f64| {
            let wt = detuning * t;
            -bandwidth * (Float::sin(wt) - r * Float::cos(wt)) + detuning * (Float::cos(wt) + r * Float::sin(wt))
        };
        let pi = core::f64::consts::PI;
        let (mut lo, mut hi) = (pi / detuning, 2.0 * pi / detuning);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if slope(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-14 * hi {
                break;
            }
        }
        let time = 0.5 * (lo + hi);
        let rate = self.evaluate(time)?;
        let sign = if rate * amplitude.signum() < 0.0 { MinimumSign::Negative } else { MinimumSign::Nonnegative };
        Ok(FirstMinimum { time, rate, sign })
    }

    pub fn first_minimum_sign(&self) -> Result<MinimumSign> {
        self.first_minimum().map(|m| m.sign)
    }

    /// Time intervals in [0, t_max] on which Δ(t) < 0, endpoints refined by
    /// bisection to 1e-10 relative tolerance after a scan with step `scan`.
    pub fn negative_intervals(&self, t_max: f64, scan: f64) -> Result<Vec<(f64, f64)>> {
        if !(scan > 0.0) || !(t_max >= 0.0) {
            return Err(Error::InvalidParameter("negative_intervals needs scan > 0 and t_max >= 0"));
        }
        let mut out = Vec::new();
        let mut start: Option<f64> = None;
        let n = Float::ceil(t_max / scan) as usize;
        let mut prev_t = 0.0;
        let mut prev_neg = self.evaluate(0.0)? < 0.0;
        if prev_neg {
            start = Some(0.0);
        }
        for k in 1..=n {
            let t = (k as f64 * scan).min(t_max);
            let neg = self.evaluate(t)? < 0.0;
            if neg != prev_neg {
                let root = self.bisect_sign_change(prev_t, t)?;
                if neg {
                    start = Some(root);
                } else if let Some(s) = start.take() {
                    out.push((s, root));
                }
            }
            prev_t = t;
            prev_neg = neg;
        }
        if let Some(s) = start {
            out.push((s, t_max));
        }
        Ok(out)
    }

    fn bisect_sign_change(&self, mut lo: f64, mut hi: f64) -> Result<f64> {
        let lo_neg = self.evaluate(lo)? < 0.0;
        while hi - lo > 1e-10 * hi.abs().max(1e-300) {
            let mid = 0.5 * (lo + hi);
            if (self.evaluate(mid)? < 0.0) == lo_neg {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Per-layer weights normalized so that p_i → `target_p` at late times:
    /// p_i = target_p · Δ(i·dt) / Δ(∞).
    pub fn discretize(&self, dt: f64, layers: usize, target_p: f64) -> Result<RateSchedule> {
        if !(dt > 0.0) || layers == 0 || !(0.0..=1.0).contains(&target_p) {
            return Err(Error::InvalidParameter("discretize needs dt > 0, layers >= 1 and 0 <= target_p <= 1"));
        }
        let p = match self {
            RateProfile::Constant { .. } => alloc::vec![target_p; layers],
            RateProfile::Lorentzian { bandwidth, detuning, .. } => {
                let r = bandwidth / detuning;
                (0..layers)
                    .map(|i| {
                        let t = i as f64 * dt;
                        let wt = detuning * t;
                        target_p * (1.0 + Float::exp(-bandwidth * t) * (Float::sin(wt) / r - Float::cos(wt)))
                    })
                    .collect()
            }
            RateProfile::Tabulated { .. } => {
                let asym = self.asymptote();
                if asym == 0.0 {
                    return Err(Error::InvalidParameter("tabulated profile has zero late-time rate"));
                }
                (0..layers)
                    .map(|i| self.evaluate(i as f64 * dt).map(|r| target_p * r / asym))
                    .collect::<Result<Vec<_>>>()?
            }
        };
        Ok(RateSchedule::new(dt, p))
    }

    /// Physical per-step weights p_i = Δ(i·dt)·dt.
    pub fn sample(&self, dt: f64, steps: usize) -> Result<RateSchedule> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter("sample needs dt > 0"));
        }
        let p = (0..steps).map(|i| self.evaluate(i as f64 * dt).map(|r| r * dt)).collect::<Result<Vec<_>>>()?;
        Ok(RateSchedule::new(dt, p))
    }
}

/// Signed per-step jump weights p_i on a uniform grid t_i = i·dt.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSchedule {
    dt: f64,
    p: Vec<f64>,
    markovian: Vec<bool>,
}

impl RateSchedule {
    pub fn new(dt: f64, p: Vec<f64>) -> Self {
        let markovian = p.iter().map(|&x| x >= 0.0).collect();
        Self { dt, p, markovian }
    }

    /// Schedule with the same weight on every step.
    pub fn uniform(dt: f64, p: f64, steps: usize) -> Self {
        Self::new(dt, alloc::vec![p; steps])
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.p
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.p[i]
    }

    pub fn sign_mask(&self) -> &[bool] {
        &self.markovian
    }

    pub fn is_markovian(&self, i: usize) -> bool {
        self.markovian[i]
    }

    /// max(p_i, 0)
    pub fn positive_part(&self, i: usize) -> f64 {
        self.p[i].max(0.0)
    }

    /// |min(p_i, 0)|
    pub fn negative_part(&self, i: usize) -> f64 {
        (-self.p[i]).max(0.0)
    }

    /// Piecewise-constant rate on [t_i, t_{i+1}).
    pub fn rate(&self, i: usize) -> f64 {
        self.p[i] / self.dt
    }

    /// Rate at continuous time `t`, holding each step's value over its interval.
    pub fn rate_at(&self, t: f64) -> f64 {
        let i = Float::floor(t / self.dt + 1e-12) as usize;
        self.rate(i.min(self.p.len() - 1))
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    /// Maximal runs of non-Markovian steps as half-open index ranges.
    pub fn negative_layers(&self) -> Vec<Range<usize>> {
        let mut out = Vec::new();
        let mut start = None;
        for (i, &m) in self.markovian.iter().enumerate() {
            match (m, start) {
                (false, None) => start = Some(i),
                (true, Some(s)) => {
                    out.push(s..i);
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            out.push(s..self.p.len());
        }
        out
    }

    pub fn max_weight(&self) -> f64 {
        self.p.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

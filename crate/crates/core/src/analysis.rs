//! Slope fits of F_A(l_A) and transition detection.

use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{Error, Result};

/// One (p, l_A) cell of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub p: f64,
    pub l_a: usize,
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepResult {
    pub lx: usize,
    pub ly: usize,
    pub q: usize,
    pub cells: Vec<SweepCell>,
}

/// A fitted slope with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slope {
    pub value: f64,
    pub stderr: f64,
}

impl SweepResult {
    pub fn push(&mut self, cell: SweepCell) -> Result<()> {
        if cell.n_samples == 0 || !(cell.stderr >= 0.0) {
            return Err(Error::InvalidParameter("sweep cells need samples and a nonnegative error"));
        }
        self.cells.push(cell);
        Ok(())
    }

    /// Distinct p values in first-seen order.
    pub fn p_values(&self) -> Vec<f64> {
        let mut ps: Vec<f64> = Vec::new();
        for c in &self.cells {
            if !ps.contains(&c.p) {
                ps.push(c.p);
            }
        }
        ps
    }

    /// Cells at `p`, sorted by l_A.
    pub fn curve(&self, p: f64) -> Vec<SweepCell> {
        let mut cs: Vec<SweepCell> = self.cells.iter().filter(|c| c.p == p).copied().collect();
        cs.sort_by_key(|c| c.l_a);
        cs
    }

    /// dF_A/dl_A at fixed p.
    pub fn slope_fit(&self, p: f64) -> Result<Slope> {
        let cs = self.curve(p);
        let x: Vec<f64> = cs.iter().map(|c| c.l_a as f64).collect();
        let y: Vec<f64> = cs.iter().map(|c| c.mean).collect();
        let s: Vec<f64> = cs.iter().map(|c| c.stderr).collect();
        linear_fit(&x, &y, &s)
    }

    /// Slope of F_A / ⟨F_A⟩_{l_A} at fixed p.
    pub fn normalized_slope(&self, p: f64) -> Result<Slope> {
        let cs = self.curve(p);
        if cs.is_empty() {
            return Err(Error::InsufficientPoints { needed: 3, found: 0 });
        }
        let avg = cs.iter().map(|c| c.mean).sum::<f64>() / cs.len() as f64;
        if avg == 0.0 {
            return Err(Error::ZeroMean);
        }
        let x: Vec<f64> = cs.iter().map(|c| c.l_a as f64).collect();
        let y: Vec<f64> = cs.iter().map(|c| c.mean / avg).collect();
        let s: Vec<f64> = cs.iter().map(|c| c.stderr / avg.abs()).collect();
        linear_fit(&x, &y, &s)
    }
}

/// Weighted least-squares slope of y against x with per-point errors σ.
/// Falls back to ordinary least squares, with the residual-based error, when
/// any σ is zero.
pub fn linear_fit(x: &[f64], y: &[f64], sigma: &[f64]) -> Result<Slope> {
    let n = x.len();
    assert!(y.len() == n && sigma.len() == n, "fit inputs must have equal length");
    let mut distinct: Vec<f64> = x.to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::InsufficientPoints { needed: 3, found: distinct.len() });
    }
    let weighted = sigma.iter().all(|&s| s > 0.0);
    let w: Vec<f64> = if weighted { sigma.iter().map(|s| 1.0 / (s * s)).collect() } else { alloc::vec![1.0; n] };
    let sw: f64 = w.iter().sum();
    let xm = w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() / sw;
    let ym = w.iter().zip(y).map(|(w, y)| w * y).sum::<f64>() / sw;
    let sxx: f64 = w.iter().zip(x).map(|(w, x)| w * (x - xm) * (x - xm)).sum();
    let sxy: f64 = w.iter().zip(x).zip(y).map(|((w, x), y)| w * (x - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let stderr = if weighted {
        Float::sqrt(1.0 / sxx)
    } else {
        let rss: f64 = x.iter().zip(y).map(|(x, y)| {
            let r = y - ym - slope * (x - xm);
            r * r
        }).sum();
        Float::sqrt(rss / (n - 2) as f64 / sxx)
    };
    Ok(Slope { value: slope, stderr })
}

/// Location of a drop in a slope-vs-p series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub p_c: f64,
    pub half_width: f64,
}

/// Midpoint of the first grid interval after the maximum where the slope
/// falls below `threshold` times the maximum slope.
pub fn detect_transition(p: &[f64], slopes: &[f64], threshold: f64) -> Result<Transition> {
    assert_eq!(p.len(), slopes.len(), "grid and slopes must have equal length");
    if p.len() < 2 {
        return Err(Error::InsufficientPoints { needed: 2, found: p.len() });
    }
    let (imax, max) = slopes
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, v)| if v > bv { (i, v) } else { (bi, bv) });
    if !(max > 0.0) {
        return Err(Error::NoTransition);
    }
    for i in imax + 1..p.len() {
        if slopes[i] < threshold * max {
            return Ok(Transition { p_c: 0.5 * (p[i - 1] + p[i]), half_width: 0.5 * (p[i] - p[i - 1]).abs() });
        }
    }
    Err(Error::NoTransition)
}

/// Location of the largest relative drop of a positive series between
/// consecutive grid points, restricted to `p < p_max`.
pub fn largest_relative_drop(p: &[f64], values: &[f64], p_max: f64) -> Option<Transition> {
    let mut best: Option<(usize, f64)> = None;
    for i in 1..p.len() {
        if p[i] >= p_max || !(values[i - 1] > 0.0) {
            continue;
        }
        let drop = (values[i - 1] - values[i]) / values[i - 1];
        if best.is_none_or(|(_, b)| drop > b) {
            best = Some((i, drop));
        }
    }
    best.filter(|&(_, d)| d > 0.0)
        .map(|(i, _)| Transition { p_c: 0.5 * (p[i - 1] + p[i]), half_width: 0.5 * (p[i] - p[i - 1]).abs() })
}

//! Class propagators on the discrete slot grid of a single decay channel.
//!
//! Slot i carries the signed weight p_i = Δ(t_i)δt. A propagator over
//! [start, end) covers slots start..end. Class records are the ascending
//! slots of their unrestored normal jumps, and `trace(record, i)` supplies
//! ⟨a†a⟩ of that class at slot i.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use num_traits::Float;

use crate::rate::RateSchedule;

/// Markovian no-jump probability Π (1 − p⁺_i ⟨a†a⟩_i).
pub fn bare_propagator(schedule: &RateSchedule, start: usize, end: usize, trace: impl Fn(usize) -> f64) -> f64 {
    (start..end).map(|i| 1.0 - schedule.positive_part(i) * trace(i)).product()
}

/// Dressed propagator exp(−Σ p_i ⟨a†a⟩_i) with the signed weights.
pub fn dressed_propagator(schedule: &RateSchedule, start: usize, end: usize, trace: impl Fn(usize) -> f64) -> f64 {
    Float::exp(-(start..end).map(|i| schedule.weight(i) * trace(i)).sum::<f64>())
}

/// Dressed propagator in product form Π (1 − p_i ⟨a†a⟩_i): the exact
/// fixed point of the discrete Dyson equation.
pub fn dressed_product(schedule: &RateSchedule, start: usize, end: usize, trace: impl Fn(usize) -> f64) -> f64 {
    (start..end).map(|i| 1.0 - schedule.weight(i) * trace(i)).product()
}

/// Multi-channel dressed propagator exp(−Σ_i Σ_s p_{s,i} ⟨a_s†a_s⟩_i), one
/// schedule per channel; `trace(s, i)` gives channel s at slot i.
pub fn dressed_propagator_multi(
    schedules: &[RateSchedule],
    start: usize,
    end: usize,
    trace: impl Fn(usize, usize) -> f64,
) -> f64 {
    let mut exponent = 0.0;
    for i in start..end {
        for (s, sched) in schedules.iter().enumerate() {
            exponent += sched.weight(i) * trace(s, i);
        }
    }
    Float::exp(-exponent)
}

fn extend(record: &[usize], slot: usize) -> Vec<usize> {
    let mut r = record.to_vec();
    r.push(slot);
    r
}

/// Loop weight Σ⁺_α(t1, t2): normal jump at t1, dressed stay in (α, t1),
/// reverse jump at t2 with the population ratio of Eq. pMAlphaSigmaP
/// conditioned on α at `start`. Zero unless p_{t1} ≥ 0 > p_{t2}.
pub fn loop_probability(
    schedule: &RateSchedule,
    record: &[usize],
    start: usize,
    t1: usize,
    t2: usize,
    trace: &dyn Fn(&[usize], usize) -> f64,
) -> f64 {
    if !(start <= t1 && t1 < t2) || schedule.weight(t1) < 0.0 || schedule.weight(t2) >= 0.0 {
        return 0.0;
    }
    let own = |i: usize| trace(record, i);
    let stay = |tau: usize| {
        let child = extend(record, tau);
        dressed_product(schedule, tau + 1, t2, |i| trace(&child, i))
    };
    let sources: f64 = (start..t2)
        .filter(|&tau| schedule.weight(tau) >= 0.0)
        .map(|tau| dressed_product(schedule, start, tau, own) * schedule.weight(tau) * own(tau) * stay(tau))
        .sum();
    if sources <= 0.0 {
        return 0.0;
    }
    let ratio = dressed_product(schedule, start, t2, own) / sources;
    let p_plus = schedule.weight(t1) * own(t1);
    let p_minus = ratio * -schedule.weight(t2) * own(t2);
    p_plus * stay(t1) * p_minus
}

/// Successive truncations of the loop expansion, P^(0) = bare first.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopSum {
    pub orders: Vec<f64>,
}

impl LoopSum {
    pub fn value(&self) -> f64 {
        *self.orders.last().expect("at least the bare order")
    }

    /// Change made by the last order.
    pub fn last_increment(&self) -> f64 {
        match self.orders.len() {
            0 | 1 => 0.0,
            n => self.orders[n - 1] - self.orders[n - 2],
        }
    }
}

struct Oracle<'a> {
    schedule: &'a RateSchedule,
    end: usize,
    trace: &'a dyn Fn(&[usize], usize) -> f64,
    memo: BTreeMap<(Vec<usize>, usize, usize), Vec<f64>>,
}

impl Oracle<'_> {
    /// P^(k)_record(start, e) for e = start..=end, by explicit nested sums
    /// over normal-jump slot t1 and reverse-jump slot t2.
    fn series(&mut self, record: &[usize], start: usize, k: usize) -> Vec<f64> {
        let key = (record.to_vec(), start, k);
        if let Some(v) = self.memo.get(&key) {
            return v.clone();
        }
        let s = self.schedule;
        let end = self.end;
        let e: Vec<f64> = (start..end).map(|i| (self.trace)(record, i)).collect();
        let bare_factor = |i: usize| 1.0 - s.positive_part(i) * e[i - start];
        let bare_between = |a: usize, b: usize| (a..b).map(bare_factor).product::<f64>();
        let mut out: Vec<f64> = (start..=end).map(|b| bare_between(start, b)).collect();
        if k > 0 {
            let prev = self.series(record, start, k - 1);
            let last_nm = (start..end).rev().find(|&i| s.weight(i) < 0.0);
            let mut children: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
            if let Some(last_nm) = last_nm {
                for tau in start..last_nm {
                    if s.weight(tau) > 0.0 && e[tau - start] > 0.0 {
                        let child = extend(record, tau);
                        children.insert(tau, self.series(&child, tau + 1, k - 1));
                    }
                }
            }
            // Loop weight arriving at each reverse-jump slot t2.
            let mut arriving = alloc::vec![0.0; end - start];
            for t2 in start..end {
                if s.weight(t2) >= 0.0 {
                    continue;
                }
                let source = |t1: usize| -> f64 {
                    children.get(&t1).map_or(0.0, |c| prev[t1 - start] * s.weight(t1) * e[t1 - start] * c[t2 - t1 - 1])
                };
                let denominator: f64 = (start..t2).map(source).sum();
                if denominator <= 0.0 {
                    continue;
                }
                let p_minus = prev[t2 - start] / denominator * -s.weight(t2) * e[t2 - start];
                arriving[t2 - start] = (start..t2).map(|t1| source(t1) * p_minus).sum();
            }
            for b in start..=end {
                let mut total = out[b - start];
                for t2 in start..b {
                    if arriving[t2 - start] != 0.0 {
                        total += arriving[t2 - start] * bare_between(t2 + 1, b);
                    }
                }
                out[b - start] = total;
            }
        }
        self.memo.insert(key, out.clone());
        out
    }
}

/// Brute-force Dyson series for P_record(start, end) truncated at
/// `max_loops` nested loops; stops early once an order changes nothing.
pub fn enumerate_loop_sum(
    schedule: &RateSchedule,
    record: &[usize],
    start: usize,
    end: usize,
    trace: &dyn Fn(&[usize], usize) -> f64,
    max_loops: usize,
) -> LoopSum {
    assert!(start <= end && end <= schedule.len(), "window must lie inside the schedule");
    let mut oracle = Oracle { schedule, end, trace, memo: BTreeMap::new() };
    let mut orders = Vec::new();
    for k in 0..=max_loops {
        let v = oracle.series(record, start, k)[end - start];
        let done = orders.last().is_some_and(|&prev: &f64| Float::abs(v - prev) <= 1e-15 * Float::abs(v));
        orders.push(v);
        if done {
            break;
        }
    }
    LoopSum { orders }
}

/// Probability of ending in class (base, jumps…) at `end` having been in
/// `base` at `start`: dressed (product-form) propagators between jumps times
/// p⁺⟨a†a⟩ at each jump. Zero if a jump sits in a non-Markovian slot or the
/// jumps are not strictly increasing inside [start, end).
pub fn outcome_probability(
    schedule: &RateSchedule,
    base: &[usize],
    jumps: &[usize],
    start: usize,
    end: usize,
    trace: &dyn Fn(&[usize], usize) -> f64,
) -> f64 {
    let mut record = base.to_vec();
    let mut cursor = start;
    let mut prob = 1.0;
    for &j in jumps {
        if j < cursor || j >= end || schedule.weight(j) < 0.0 {
            return 0.0;
        }
        let current = record.clone();
        prob *= dressed_product(schedule, cursor, j, |i| trace(&current, i));
        prob *= schedule.weight(j) * trace(&current, j);
        record.push(j);
        cursor = j + 1;
    }
    prob * dressed_product(schedule, cursor, end, |i| trace(&record, i))
}

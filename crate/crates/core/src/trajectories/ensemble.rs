//! Weighted NMQJ ensemble over trajectory classes.
//!
//! Each member carries the id of its class; a class is the record of its
//! unrestored normal jumps and owns one state vector. Class weights are
//! member fractions.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use num_traits::{Float, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::system::{OpenSystem, StateVector};
use crate::error::{Error, Result};
use crate::linalg::{normalize, CMatrix, C64};
use crate::rate::RateSchedule;

/// A normal jump at grid step `step` through channel `channel`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Jump {
    pub step: usize,
    pub channel: usize,
}

/// What no-jump members feel between jumps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackAction {
    /// Only the unitary acts (kicked picture; exact when Σ_s a_s†a_s ∝ 1).
    Unitary,
    /// Normalized 1 − ½ Σ_s p_s a_s†a_s before the unitary, with signed p_s.
    NoJump,
}

/// Optional memory kernel K(t_source, t) weighting reverse-jump sources.
pub type MemoryKernel = fn(f64, f64) -> f64;

#[derive(Debug, Clone)]
pub struct EnsembleConfig {
    pub n_samples: usize,
    pub seed: u64,
    pub back_action: BackAction,
    pub kernel: Option<MemoryKernel>,
}

impl EnsembleConfig {
    pub fn new(n_samples: usize, seed: u64) -> Self {
        Self { n_samples, seed, back_action: BackAction::NoJump, kernel: None }
    }
}

/// Summary row of a trajectory class.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryClass {
    pub id: usize,
    pub jumps: Vec<Jump>,
    pub weight: f64,
    /// Binomial standard error of `weight`.
    pub stderr: f64,
}

#[derive(Debug, Clone)]
struct Node {
    parent: Option<u32>,
    jump: Option<Jump>,
    state: Vec<C64>,
    /// First step at which the class takes jump decisions.
    created: usize,
    /// ⟨a_s†a_s⟩ per step from `created`, channel-major within a step.
    expectations: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct EnsembleRun {
    nodes: Vec<Node>,
    children: BTreeMap<(u32, Jump), u32>,
    counts: Vec<u32>,
    n_samples: usize,
    channels: usize,
    dim: usize,
    rho: Vec<CMatrix>,
    capped_steps: usize,
}

#[derive(Clone, Copy)]
enum Event {
    Normal(usize),
    Reverse,
}

/// Runs the NMQJ ensemble for `steps` grid steps from `psi0`.
pub fn evolve_ensemble(
    psi0: &StateVector,
    system: &OpenSystem,
    schedules: &[RateSchedule],
    steps: usize,
    config: &EnsembleConfig,
) -> Result<EnsembleRun> {
    if config.n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be positive"));
    }
    if psi0.dim() != system.dim() {
        return Err(Error::DimensionMismatch { expected: system.dim(), found: psi0.dim() });
    }
    system.check_schedules(schedules, steps)?;
    let dt = schedules.first().map_or(1.0, |s| s.dt());
    let dim = system.dim();
    let nch = system.channels.len();
    let unitary = CMatrix::unitary_propagator(&system.hamiltonian, dt);
    let n = config.n_samples;
    let w = 1.0 / n as f64;

    let mut run = EnsembleRun {
        nodes: alloc::vec![Node {
            parent: None,
            jump: None,
            state: psi0.amplitudes().to_vec(),
            created: 0,
            expectations: Vec::new(),
        }],
        children: BTreeMap::new(),
        counts: alloc::vec![n as u32],
        n_samples: n,
        channels: nch,
        dim,
        rho: Vec::with_capacity(steps + 1),
        capped_steps: 0,
    };
    run.rho.push(run.density_matrix());

    let mut members = alloc::vec![0u32; n];
    let mut rngs: Vec<ChaCha8Rng> = (0..n)
        .map(|m| {
            let mut r = ChaCha8Rng::seed_from_u64(config.seed);
            r.set_stream(m as u64);
            r
        })
        .collect();
    let mut needed: Vec<u32> = alloc::vec![0];

    for i in 0..steps {
        let t = i as f64 * dt;
        let p: Vec<f64> = system.channels.iter().map(|ch| schedules[ch.schedule].weight(i)).collect();

        // Expectations for every class that is alive or may be restored.
        let mut expect: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
        for &c in &needed {
            let node = &mut run.nodes[c as usize];
            let e: Vec<f64> = system.channels.iter().map(|ch| ch.expectation(&node.state)).collect();
            node.expectations.extend_from_slice(&e);
            expect.insert(c, e);
        }

        // Source populations for reverse jumps, keyed by (parent, channel).
        let kernel = |ts: usize| config.kernel.map_or(1.0, |k| k(ts as f64 * dt, t));
        let mut sources: BTreeMap<(u32, usize), f64> = BTreeMap::new();
        for &c in &needed {
            let node = &run.nodes[c as usize];
            if let (Some(parent), Some(j)) = (node.parent, node.jump) {
                if run.counts[c as usize] > 0 {
                    *sources.entry((parent, j.channel)).or_insert(0.0) += run.counts[c as usize] as f64 * w * kernel(j.step);
                }
            }
        }

        // Event tables per live class.
        let mut events: BTreeMap<u32, Vec<(Event, f64)>> = BTreeMap::new();
        for &c in &needed {
            if run.counts[c as usize] == 0 {
                continue;
            }
            let node = &run.nodes[c as usize];
            let e = &expect[&c];
            let mut list = Vec::new();
            for s in 0..nch {
                if p[s] >= 0.0 {
                    let prob = p[s] * e[s];
                    if prob > 0.0 {
                        list.push((Event::Normal(s), prob));
                    }
                } else if let (Some(parent), Some(j)) = (node.parent, node.jump) {
                    if j.channel == s {
                        let target = run.counts[parent as usize] as f64 * w * kernel(j.step);
                        let prob = target / sources[&(parent, s)] * -p[s] * expect[&parent][s];
                        if prob > 0.0 {
                            list.push((Event::Reverse, prob));
                        }
                    }
                }
            }
            let total: f64 = list.iter().map(|(_, q)| q).sum();
            if total > 1.0 {
                run.capped_steps += 1;
                list.iter_mut().for_each(|(_, q)| *q /= total);
            }
            if !list.is_empty() {
                events.insert(c, list);
            }
        }

        // Members draw their events.
        let mut fresh: BTreeMap<(u32, usize), u32> = BTreeMap::new();
        for (class, rng) in members.iter_mut().zip(rngs.iter_mut()) {
            let Some(list) = events.get(class) else { continue };
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for &(ev, q) in list {
                acc += q;
                if u < acc {
                    let from = *class;
                    *class = match ev {
                        Event::Reverse => run.nodes[from as usize].parent.expect("reverse jumps need a parent"),
                        Event::Normal(s) => *fresh.entry((from, s)).or_insert_with(|| {
                            let ch = &system.channels[s];
                            let mut state = ch.operator().apply(&run.nodes[from as usize].state);
                            normalize(&mut state);
                            run.nodes.push(Node {
                                parent: Some(from),
                                jump: Some(Jump { step: i, channel: s }),
                                state,
                                created: i + 1,
                                expectations: Vec::new(),
                            });
                            run.counts.push(0);
                            let id = (run.nodes.len() - 1) as u32;
                            run.children.insert((from, Jump { step: i, channel: s }), id);
                            id
                        }),
                    };
                    run.counts[from as usize] -= 1;
                    run.counts[*class as usize] += 1;
                    break;
                }
            }
        }

        // Deterministic evolution of every class that can still matter.
        let step_op = match config.back_action {
            BackAction::Unitary => unitary.clone(),
            BackAction::NoJump => {
                let mut k0 = CMatrix::identity(dim);
                for (ch, &ps) in system.channels.iter().zip(&p) {
                    k0 = &k0 - &ch.number().scale_re(0.5 * ps);
                }
                &unitary * &k0
            }
        };
        for &c in &needed {
            let node = &mut run.nodes[c as usize];
            let mut next = step_op.apply(&node.state);
            normalize(&mut next);
            node.state = next;
        }
        for &id in fresh.values() {
            let node = &mut run.nodes[id as usize];
            node.state = unitary.apply(&node.state);
        }
        needed = run.needed_classes();
        run.release_unneeded(&needed);
        run.rho.push(run.density_matrix());
    }
    Ok(run)
}

impl EnsembleRun {
    /// Alive classes and all their ancestors, ascending.
    fn needed_classes(&self) -> Vec<u32> {
        let mut mark = alloc::vec![false; self.nodes.len()];
        for (c, &count) in self.counts.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let mut cur = Some(c as u32);
            while let Some(x) = cur {
                if mark[x as usize] {
                    break;
                }
                mark[x as usize] = true;
                cur = self.nodes[x as usize].parent;
            }
        }
        mark.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i as u32).collect()
    }

    fn release_unneeded(&mut self, needed: &[u32]) {
        let mut keep = alloc::vec![false; self.nodes.len()];
        for &c in needed {
            keep[c as usize] = true;
        }
        for (node, keep) in self.nodes.iter_mut().zip(keep) {
            if !keep && !node.state.is_empty() {
                node.state = Vec::new();
            }
        }
    }

    fn density_matrix(&self) -> CMatrix {
        let dim = self.dim;
        let mut rho = CMatrix::zeros(dim);
        let w = 1.0 / self.n_samples as f64;
        for (node, &count) in self.nodes.iter().zip(&self.counts) {
            if count == 0 {
                continue;
            }
            let f = count as f64 * w;
            for a in 0..dim {
                let va = node.state[a] * f;
                if va.is_zero() {
                    continue;
                }
                for b in 0..dim {
                    rho[(a, b)] += va * node.state[b].conj();
                }
            }
        }
        rho
    }

    /// ρ̂ at t_0, …, t_steps.
    pub fn rho_history(&self) -> &[CMatrix] {
        &self.rho
    }

    pub fn rho_final(&self) -> &CMatrix {
        self.rho.last().expect("history holds the initial state")
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    /// Number of (class, step) pairs whose event probabilities summed past 1.
    pub fn capped_steps(&self) -> usize {
        self.capped_steps
    }

    pub fn class_count(&self) -> usize {
        self.nodes.len()
    }

    /// Jump record of class `id`, oldest jump first.
    pub fn record(&self, id: usize) -> Vec<Jump> {
        let mut out = Vec::new();
        let mut cur = id;
        while let Some(j) = self.nodes[cur].jump {
            out.push(j);
            cur = self.nodes[cur].parent.expect("jumped classes have parents") as usize;
        }
        out.reverse();
        out
    }

    /// Class id for a jump record, if that class ever existed.
    pub fn find(&self, record: &[Jump]) -> Option<usize> {
        let mut cur = 0u32;
        for j in record {
            cur = *self.children.get(&(cur, *j))?;
        }
        Some(cur as usize)
    }

    pub fn weight(&self, id: usize) -> f64 {
        self.counts[id] as f64 / self.n_samples as f64
    }

    /// Final state of an alive class.
    pub fn state(&self, id: usize) -> Option<&[C64]> {
        let s = &self.nodes[id].state;
        (self.counts[id] > 0 && !s.is_empty()).then_some(&s[..])
    }

    /// ⟨a†a⟩ of class `id` through `channel` at the start of `step`, if the
    /// class was tracked then.
    pub fn expectation(&self, id: usize, step: usize, channel: usize) -> Option<f64> {
        let node = &self.nodes[id];
        let k = step.checked_sub(node.created)?;
        node.expectations.get(k * self.channels + channel).copied()
    }

    /// Alive classes at the final time, by decreasing weight.
    pub fn classes(&self) -> Vec<TrajectoryClass> {
        let n = self.n_samples as f64;
        let mut out: Vec<TrajectoryClass> = (0..self.nodes.len())
            .filter(|&c| self.counts[c] > 0)
            .map(|c| {
                let f = self.weight(c);
                TrajectoryClass { id: c, jumps: self.record(c), weight: f, stderr: Float::sqrt(f * (1.0 - f) / n) }
            })
            .collect();
        out.sort_by(|a, b| b.weight.partial_cmp(&a.weight).unwrap().then(a.id.cmp(&b.id)));
        out
    }

    /// Reverse-jump probability a source class would see at `step` through
    /// `channel`, evaluated from final weights; exposes the source-time
    /// independence of Eq. MB_NMQJprob.
    pub fn reverse_probability(&self, source: usize, channel: usize, magnitude: f64, target_expectation: f64) -> f64 {
        let Some(parent) = self.nodes[source].parent else { return 0.0 };
        let siblings: Vec<f64> = self
            .children
            .iter()
            .filter(|((p, j), _)| *p == parent && j.channel == channel)
            .map(|(_, &c)| self.weight(c as usize))
            .collect();
        super::system::reverse_jump_probability(self.weight(parent as usize), &siblings, magnitude, target_expectation)
    }
}

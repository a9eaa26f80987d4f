//! Statistical weights of the replicated circuit: Weingarten functions,
//! measurement weights W_p, plaquette weights J_p and large-d bond energies.

use alloc::vec::Vec;

use num_traits::Float;

use super::perm::{Permutation, SymmetricGroup};
use crate::error::{Error, Result};

/// Default ceiling for bond energies whose Boltzmann weight vanishes.
pub const DEFAULT_CLAMP: f64 = 50.0;

/// Weingarten function Wg_D on all of S_Q, obtained by inverting the Gram
/// matrix M(σ, τ) = D^{|σ⁻¹τ|}. Build once and reuse.
#[derive(Debug, Clone)]
pub struct WeingartenTable {
    group: SymmetricGroup,
    dim: f64,
    values: Vec<f64>,
}

impl WeingartenTable {
    pub fn new(group: &SymmetricGroup, dim: f64) -> Result<Self> {
        let q = group.q();
        if !(dim >= q as f64) {
            return Err(Error::SingularGram { dim, q });
        }
        let n = group.order();
        let mut gram = alloc::vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                let rel = group.relative(a as u8, b as u8);
                gram[a * n + b] = Float::powi(dim, group.cycle_count(rel) as i32);
            }
        }
        let inverse = invert(&gram, n).ok_or(Error::SingularGram { dim, q })?;
        // M⁻¹(σ, τ) = Wg(σ⁻¹τ); read the identity row.
        let id = SymmetricGroup::IDENTITY as usize;
        let values = (0..n).map(|g| inverse[id * n + g]).collect();
        Ok(Self { group: group.clone(), dim, values })
    }

    pub fn dim(&self) -> f64 {
        self.dim
    }

    pub fn group(&self) -> &SymmetricGroup {
        &self.group
    }

    pub fn value(&self, label: u8) -> f64 {
        self.values[label as usize]
    }

    pub fn get(&self, g: &Permutation) -> Option<f64> {
        self.group.label(g).map(|l| self.value(l))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Wg_D(g). Builds a fresh table; prefer [`WeingartenTable`] for repeated use.
pub fn weingarten(g: &Permutation, dim: f64) -> Result<f64> {
    let group = SymmetricGroup::new(g.q())?;
    let table = WeingartenTable::new(&group, dim)?;
    Ok(table.get(g).expect("element of its own group"))
}

/// Gauss–Jordan inversion with partial pivoting.
fn invert(m: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut a = m.to_vec();
    let mut inv = alloc::vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    let scale = m.iter().fold(0.0f64, |s, x| s.max(x.abs()));
    for col in 0..n {
        let pivot = (col..n).max_by(|&r, &s| a[r * n + col].abs().partial_cmp(&a[s * n + col].abs()).unwrap())?;
        if a[pivot * n + col].abs() <= 1e-13 * scale {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(pivot * n + k, col * n + k);
                inv.swap(pivot * n + k, col * n + k);
            }
        }
        let d = a[col * n + col];
        for k in 0..n {
            a[col * n + k] /= d;
            inv[col * n + k] /= d;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[r * n + col];
            if f == 0.0 {
                continue;
            }
            for k in 0..n {
                a[r * n + k] -= f * a[col * n + k];
                inv[r * n + k] -= f * inv[col * n + k];
            }
        }
    }
    Some(inv)
}

/// Measurement-averaged replica weight for the continuous random-projector set:
/// (1 − p) d^{|g|} + p d^Q for p ≥ 0, and (1 − p) d^{|g|} for p < 0.
pub fn measurement_weight(g: &Permutation, p: f64, d: f64) -> f64 {
    measurement_weight_cycles(g.cycle_count(), g.q(), p, d)
}

fn measurement_weight_cycles(cycles: usize, q: usize, p: f64, d: f64) -> f64 {
    let base = (1.0 - p) * Float::powi(d, cycles as i32);
    if p >= 0.0 {
        base + p * Float::powi(d, q as i32)
    } else {
        base
    }
}

/// Plaquette weight J_p(g_i, g_j; g_k) = Σ_l W_{p_i}(g_i⁻¹g_l) W_{p_j}(g_j⁻¹g_l) Wg_{d²}(g_l⁻¹g_k),
/// summed exactly over S_Q.
pub fn plaquette_weight(
    gi: &Permutation,
    gj: &Permutation,
    gk: &Permutation,
    p_i: f64,
    p_j: f64,
    d: f64,
    wg: &WeingartenTable,
) -> Result<f64> {
    let group = wg.group();
    let q = group.q();
    for g in [gi, gj, gk] {
        if g.q() != q {
            return Err(Error::ReplicaMismatch(g.q(), q));
        }
    }
    if (wg.dim() - d * d).abs() > 1e-9 * wg.dim() {
        return Err(Error::InvalidParameter("Weingarten table must be built for D = d^2"));
    }
    let (li, lj, lk) = (group.label(gi).unwrap(), group.label(gj).unwrap(), group.label(gk).unwrap());
    let mut total = 0.0;
    for l in 0..group.order() as u8 {
        let wi = measurement_weight_cycles(group.cycle_count(group.relative(li, l)), q, p_i, d);
        let wj = measurement_weight_cycles(group.cycle_count(group.relative(lj, l)), q, p_j, d);
        total += wi * wj * wg.value(group.relative(l, lk));
    }
    Ok(total)
}

/// Large-d bond energy E(g) = −ln[(1 − p)(δ_g + δ′_g/d) + θ_p p], where δ_g
/// marks the identity and δ′_g a transposition. `d = None` is the strict
/// d → ∞ limit. Non-positive arguments and energies above `clamp` return `clamp`.
pub fn bond_energy(g: &Permutation, p: f64, d: Option<f64>, clamp: f64) -> f64 {
    bond_energy_kind(kind_of(g), p, d, clamp)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Identity,
    Transposition,
    Other,
}

fn kind_of(g: &Permutation) -> Kind {
    if g.is_identity() {
        Kind::Identity
    } else if g.is_transposition() {
        Kind::Transposition
    } else {
        Kind::Other
    }
}

fn bond_energy_kind(kind: Kind, p: f64, d: Option<f64>, clamp: f64) -> f64 {
    let overlap = match kind {
        Kind::Identity => 1.0,
        Kind::Transposition => d.map_or(0.0, |d| 1.0 / d),
        Kind::Other => 0.0,
    };
    let theta = if p >= 0.0 { p } else { 0.0 };
    let arg = (1.0 - p) * overlap + theta;
    if !(arg > 0.0) {
        return clamp;
    }
    let e = -Float::ln(arg);
    if e > clamp {
        clamp
    } else {
        e
    }
}

/// Per-layer bond energies E_i(g) for every group element g.
#[derive(Debug, Clone)]
pub struct BondEnergyTable {
    order: usize,
    energies: Vec<f64>,
    weights: Vec<f64>,
    clamp: f64,
}

impl BondEnergyTable {
    pub fn new(group: &SymmetricGroup, weights: &[f64], d: Option<f64>, clamp: f64) -> Self {
        let order = group.order();
        let kinds: Vec<Kind> = group.elements().iter().map(kind_of).collect();
        let mut energies = Vec::with_capacity(order * weights.len());
        for &p in weights {
            energies.extend(kinds.iter().map(|&k| bond_energy_kind(k, p, d, clamp)));
        }
        Self { order, energies, weights: weights.to_vec(), clamp }
    }

    pub fn layers(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, layer: usize) -> f64 {
        self.weights[layer]
    }

    pub fn clamp(&self) -> f64 {
        self.clamp
    }

    /// Energy of a bond in `layer` whose relative permutation has label `rel`.
    #[inline]
    pub fn energy(&self, layer: usize, rel: u8) -> f64 {
        self.energies[layer * self.order + rel as usize]
    }

    pub fn layer(&self, layer: usize) -> &[f64] {
        &self.energies[layer * self.order..(layer + 1) * self.order]
    }
}

/// A weight per group element, for audit tables keyed by cycle type.
#[derive(Debug, Clone)]
pub struct WeightTable {
    pub q: usize,
    pub d: f64,
    pub entries: Vec<(Permutation, f64)>,
}

impl WeightTable {
    pub fn measurement(group: &SymmetricGroup, p: f64, d: f64) -> Self {
        let entries = group.elements().iter().map(|g| (*g, measurement_weight(g, p, d))).collect();
        Self { q: group.q(), d, entries }
    }

    pub fn weingarten(table: &WeingartenTable) -> Self {
        let group = table.group();
        let entries = group.elements().iter().zip(table.values()).map(|(g, &w)| (*g, w)).collect();
        Self { q: group.q(), d: table.dim(), entries }
    }

    pub fn bond_energy(group: &SymmetricGroup, p: f64, d: Option<f64>, clamp: f64) -> Self {
        let entries = group.elements().iter().map(|g| (*g, bond_energy(g, p, d, clamp))).collect();
        Self { q: group.q(), d: d.unwrap_or(f64::INFINITY), entries }
    }

    /// One representative per cycle type: (cycle type, class size, value).
    pub fn by_cycle_type(&self) -> Vec<(Vec<usize>, usize, f64)> {
        let mut out: Vec<(Vec<usize>, usize, f64)> = Vec::new();
        for (g, w) in &self.entries {
            let ct = g.cycle_type();
            match out.iter_mut().find(|(c, _, _)| *c == ct) {
                Some(entry) => entry.1 += 1,
                None => out.push((ct, 1, *w)),
            }
        }
        out
    }
}

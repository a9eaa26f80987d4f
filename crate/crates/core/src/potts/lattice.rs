//! Brick-wall lattice of S_Q spins with a fixed top boundary.
//!
//! Row 0 is the earliest time layer. A spin at (x, y + 1) couples to the two
//! spins of layer y that share its gate: (x, y) and (partner(x, y), y). The
//! fixed boundary row sits above layer `ly - 1` with the same pairing.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rate::RateSchedule;
use crate::replica::{BondEnergyTable, Permutation, SymmetricGroup, DEFAULT_CLAMP};

/// Geometry and weight parameters of a replica lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSpec {
    pub lx: usize,
    pub ly: usize,
    pub q: usize,
    pub l_a: usize,
    /// Local dimension; `None` is the d → ∞ limit.
    pub d: Option<f64>,
    pub clamp: f64,
}

impl LatticeSpec {
    pub fn new(lx: usize, ly: usize, l_a: usize) -> Self {
        Self { lx, ly, q: 3, l_a, d: None, clamp: DEFAULT_CLAMP }
    }
}

/// Neighbour slot: bulk site index, or `bulk + x` for boundary column x.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Link {
    pub(crate) target: u32,
    pub(crate) layer: u32,
}

#[derive(Debug, Clone)]
pub struct ReplicaLattice {
    lx: usize,
    ly: usize,
    l_a: usize,
    group: SymmetricGroup,
    energies: BondEnergyTable,
    spins: Vec<u8>,
    boundary: Vec<u8>,
    links: Vec<[Link; 4]>,
}

/// Column paired with `x` by the gate layer of parity `layer`.
#[inline]
pub fn partner(x: usize, layer: usize, lx: usize) -> usize {
    if (x + layer) % 2 == 0 {
        (x + 1) % lx
    } else {
        (x + lx - 1) % lx
    }
}

impl ReplicaLattice {
    pub fn build(spec: &LatticeSpec, schedule: &RateSchedule) -> Result<Self> {
        let LatticeSpec { lx, ly, q, l_a, d, clamp } = *spec;
        if lx == 0 || lx % 2 != 0 {
            return Err(Error::OddWidth(lx));
        }
        if ly == 0 {
            return Err(Error::InvalidParameter("lattice depth must be positive"));
        }
        if l_a > lx {
            return Err(Error::PartitionTooLarge { l_a, width: lx });
        }
        if schedule.len() < ly {
            return Err(Error::ScheduleTooShort { len: schedule.len(), needed: ly });
        }
        let group = SymmetricGroup::new(q)?;
        let mut boundary = alloc::vec![SymmetricGroup::IDENTITY; lx];
        if l_a > 0 {
            let swap = Permutation::from_cycles(q, &[&[0, 1]])
                .map_err(|_| Error::InvalidParameter("a nonzero partition needs Q >= 2"))?;
            let label = group.label(&swap).expect("transposition in group");
            let start = (lx - l_a) / 2;
            boundary[start..start + l_a].fill(label);
        }
        let energies = BondEnergyTable::new(&group, &schedule.weights()[..ly], d, clamp);
        let n = lx * ly;
        let mut links = alloc::vec![[Link::default(); 4]; n];
        for y in 0..ly {
            for x in 0..lx {
                let slot = &mut links[y * lx + x];
                if y > 0 {
                    let below = y - 1;
                    slot[0] = Link { target: (below * lx + x) as u32, layer: below as u32 };
                    slot[1] = Link { target: (below * lx + partner(x, below, lx)) as u32, layer: below as u32 };
                } else {
                    // Free bottom row: mark unused slots with an out-of-range target.
                    slot[0] = Link { target: u32::MAX, layer: 0 };
                    slot[1] = Link { target: u32::MAX, layer: 0 };
                }
                let base = if y + 1 < ly { ((y + 1) * lx) as u32 } else { n as u32 };
                slot[2] = Link { target: base + x as u32, layer: y as u32 };
                slot[3] = Link { target: base + partner(x, y, lx) as u32, layer: y as u32 };
            }
        }
        Ok(Self { lx, ly, l_a, group, energies, spins: alloc::vec![SymmetricGroup::IDENTITY; n], boundary, links })
    }

    pub fn lx(&self) -> usize {
        self.lx
    }

    pub fn ly(&self) -> usize {
        self.ly
    }

    pub fn l_a(&self) -> usize {
        self.l_a
    }

    pub fn sites(&self) -> usize {
        self.spins.len()
    }

    pub fn group(&self) -> &SymmetricGroup {
        &self.group
    }

    pub fn energies(&self) -> &BondEnergyTable {
        &self.energies
    }

    pub fn spins(&self) -> &[u8] {
        &self.spins
    }

    pub fn boundary(&self) -> &[u8] {
        &self.boundary
    }

    pub fn spin(&self, x: usize, y: usize) -> u8 {
        self.spins[y * self.lx + x]
    }

    pub fn set_spin(&mut self, x: usize, y: usize, label: u8) {
        assert!((label as usize) < self.group.order(), "spin label out of range");
        self.spins[y * self.lx + x] = label;
    }

    pub fn set_spins(&mut self, spins: &[u8]) {
        assert_eq!(spins.len(), self.spins.len());
        assert!(spins.iter().all(|&s| (s as usize) < self.group.order()));
        self.spins.copy_from_slice(spins);
    }

    pub fn bond_count(&self) -> usize {
        2 * self.lx * (self.ly - 1) + 2 * self.lx
    }

    #[inline]
    pub(crate) fn links(&self, site: usize) -> &[Link; 4] {
        &self.links[site]
    }

    #[inline]
    pub(crate) fn spins_mut(&mut self) -> &mut [u8] {
        &mut self.spins
    }

    pub(crate) fn left_multiply(&mut self, sites: &[u32], tau: u8) {
        for &s in sites {
            let s = s as usize;
            self.spins[s] = self.group.mul(tau, self.spins[s]);
        }
    }

    /// Spin at a link target; `None` for the missing links of the bottom row.
    #[inline]
    pub(crate) fn target_spin(&self, target: u32) -> Option<u8> {
        let t = target as usize;
        let n = self.spins.len();
        if t < n {
            Some(self.spins[t])
        } else if target == u32::MAX {
            None
        } else {
            Some(self.boundary[t - n])
        }
    }

    #[inline]
    pub(crate) fn bond(&self, layer: u32, a: u8, b: u8) -> f64 {
        self.energies.energy(layer as usize, self.group.relative(a, b))
    }

    /// Calls `f(lower_site, upper_target, layer)` once per bond.
    fn for_each_bond(&self, mut f: impl FnMut(usize, u32, u32)) {
        for (site, slots) in self.links.iter().enumerate() {
            for link in &slots[2..] {
                f(site, link.target, link.layer);
            }
        }
    }

    pub fn total_energy(&self) -> f64 {
        let mut e = 0.0;
        self.for_each_bond(|s, t, l| e += self.bond(l, self.spins[s], self.target_spin(t).unwrap()));
        e
    }

    /// Energy of the bonds to the fixed boundary row.
    pub fn boundary_energy(&self) -> f64 {
        let top = (self.ly - 1) * self.lx;
        let mut e = 0.0;
        for site in top..self.spins.len() {
            for link in &self.links[site][2..] {
                e += self.bond(link.layer, self.spins[site], self.target_spin(link.target).unwrap());
            }
        }
        e
    }

    /// Per-site energy, row-major from the bottom row: bulk bonds are split
    /// between their two sites, boundary bonds go to the bulk site.
    pub fn local_energy(&self) -> Vec<f64> {
        let n = self.spins.len();
        let mut out = alloc::vec![0.0; n];
        self.for_each_bond(|s, t, l| {
            let e = self.bond(l, self.spins[s], self.target_spin(t).unwrap());
            if (t as usize) < n {
                out[s] += 0.5 * e;
                out[t as usize] += 0.5 * e;
            } else {
                out[s] += e;
            }
        });
        out
    }

    /// Fraction of misaligned bonds per layer, a bond belonging to the layer
    /// of its lower site.
    pub fn misaligned_fraction(&self) -> Vec<f64> {
        let mut counts = alloc::vec![0usize; self.ly];
        self.for_each_bond(|s, t, l| {
            if self.spins[s] != self.target_spin(t).unwrap() {
                counts[l as usize] += 1;
            }
        });
        let per_layer = (2 * self.lx) as f64;
        counts.into_iter().map(|c| c as f64 / per_layer).collect()
    }

    /// Energy change of setting `site` to `label`, all incident bonds included.
    pub fn site_delta(&self, site: usize, label: u8) -> f64 {
        let old = self.spins[site];
        let mut de = 0.0;
        for link in self.links[site].iter() {
            if let Some(other) = self.target_spin(link.target) {
                de += self.bond(link.layer, label, other) - self.bond(link.layer, old, other);
            }
        }
        de
    }
}

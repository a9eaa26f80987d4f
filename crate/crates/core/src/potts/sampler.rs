//! Wolff cluster and single-site Metropolis updates.

use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;

use super::lattice::ReplicaLattice;

/// Outcome of one Wolff update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterMove {
    pub size: usize,
    pub boundary_delta: f64,
    pub accepted: bool,
}

/// Reusable scratch space for cluster growth.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    mark: Vec<u32>,
    epoch: u32,
    stack: Vec<u32>,
    cluster: Vec<u32>,
    involutions: Vec<u8>,
}

impl Workspace {
    pub fn new(lattice: &ReplicaLattice) -> Self {
        Self {
            mark: alloc::vec![0; lattice.sites()],
            epoch: 0,
            stack: Vec::new(),
            cluster: Vec::new(),
            involutions: lattice.group().involutions(),
        }
    }

    fn next_epoch(&mut self) -> u32 {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.mark.fill(0);
            self.epoch = 1;
        }
        self.epoch
    }
}

/// One Wolff update: grow a cluster under a random involution τ acting by
/// left multiplication, then flip it with probability min(1, e^{−ΔE_b}).
pub fn wolff_step<R: Rng + ?Sized>(lattice: &mut ReplicaLattice, ws: &mut Workspace, rng: &mut R) -> ClusterMove {
    if ws.involutions.is_empty() {
        return ClusterMove { size: 0, boundary_delta: 0.0, accepted: false };
    }
    let n = lattice.sites();
    let epoch = ws.next_epoch();
    let tau = ws.involutions[rng.random_range(0..ws.involutions.len())];
    let seed = rng.random_range(0..n) as u32;

    ws.stack.clear();
    ws.cluster.clear();
    ws.mark[seed as usize] = epoch;
    ws.stack.push(seed);
    let mut boundary_delta = 0.0;
    let spins = lattice.spins();
    while let Some(site) = ws.stack.pop() {
        ws.cluster.push(site);
        let old = spins[site as usize];
        let new = lattice.group().mul(tau, old);
        for link in lattice.links(site as usize) {
            let t = link.target as usize;
            if link.target == u32::MAX {
                continue;
            }
            if t >= n {
                let b = lattice.target_spin(link.target).unwrap();
                boundary_delta += lattice.bond(link.layer, new, b) - lattice.bond(link.layer, old, b);
                continue;
            }
            if ws.mark[t] == epoch {
                continue;
            }
            let other = spins[t];
            let de = lattice.bond(link.layer, new, other) - lattice.bond(link.layer, old, other);
            if de > 0.0 && rng.random::<f64>() < 1.0 - Float::exp(-de) {
                ws.mark[t] = epoch;
                ws.stack.push(link.target);
            }
        }
    }
    let accepted = boundary_delta <= 0.0 || rng.random::<f64>() < Float::exp(-boundary_delta);
    if accepted {
        lattice.left_multiply(&ws.cluster, tau);
    }
    ClusterMove { size: ws.cluster.len(), boundary_delta, accepted }
}

/// Single-site Metropolis update with a uniform proposal over all labels.
pub fn metropolis_step<R: Rng + ?Sized>(lattice: &mut ReplicaLattice, rng: &mut R) -> bool {
    let site = rng.random_range(0..lattice.sites());
    let label = rng.random_range(0..lattice.group().order()) as u8;
    let de = lattice.site_delta(site, label);
    let accept = de <= 0.0 || rng.random::<f64>() < Float::exp(-de);
    if accept {
        lattice.spins_mut()[site] = label;
    }
    accept
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potts::lattice::LatticeSpec;
    use crate::rate::RateSchedule;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn boundary_is_never_touched() {
        let mut lat = ReplicaLattice::build(&LatticeSpec::new(8, 6, 4), &RateSchedule::uniform(0.5, 0.3, 6)).unwrap();
        let before = lat.boundary().to_vec();
        let mut ws = Workspace::new(&lat);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2000 {
            wolff_step(&mut lat, &mut ws, &mut rng);
            metropolis_step(&mut lat, &mut rng);
        }
        assert_eq!(lat.boundary(), &before[..]);
    }

    #[test]
    fn identity_boundary_flip_costs_energy() {
        // Two layers: every gate component reaches the top row, so every
        // proposal from the aligned state pays at the identity boundary.
        let mut lat = ReplicaLattice::build(&LatticeSpec::new(4, 2, 0), &RateSchedule::uniform(0.5, 0.05, 2)).unwrap();
        let mut ws = Workspace::new(&lat);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut rejected = 0;
        for _ in 0..200 {
            let spins = lat.spins().to_vec();
            let mv = wolff_step(&mut lat, &mut ws, &mut rng);
            lat.set_spins(&spins);
            assert!(mv.boundary_delta > 0.0);
            rejected += !mv.accepted as usize;
        }
        assert!(rejected > 190);
    }

    #[test]
    fn metropolis_identity_proposal_always_accepted() {
        let mut lat = ReplicaLattice::build(&LatticeSpec::new(4, 3, 0), &RateSchedule::uniform(0.5, 0.01, 3)).unwrap();
        assert_eq!(lat.site_delta(5, 0), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let spins = lat.spins().to_vec();
            let site_labels_before = spins.clone();
            let accepted = metropolis_step(&mut lat, &mut rng);
            if !accepted {
                assert_eq!(lat.spins(), &site_labels_before[..]);
            }
        }
    }
}

use backflow_core::linalg::{trace_distance, CMatrix, C64};
use backflow_core::rate::{RateProfile, RateSchedule};
use backflow_core::trajectories::*;
use backflow_core::Error;
use proptest::prelude::*;

fn sigma_minus() -> CMatrix {
    // |1> is excited, |0> is ground.
    CMatrix::from_real(2, &[0.0, 1.0, 0.0, 0.0])
}

fn sigma_x() -> CMatrix {
    CMatrix::from_real(2, &[0.0, 1.0, 1.0, 0.0])
}

fn projector(level: usize) -> CMatrix {
    let mut m = CMatrix::zeros(2);
    m[(level, level)] = C64::new(1.0, 0.0);
    m
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn qubit_decay(h: CMatrix) -> OpenSystem {
    OpenSystem::new(h, vec![JumpChannel::local("sm", &sigma_minus(), 0, 1, 0).unwrap()]).unwrap()
}

fn excited_population(rho: &CMatrix) -> f64 {
    rho[(1, 1)].re
}

#[test]
fn normal_jump_from_excited_state() {
    let ch = JumpChannel::local("sm", &sigma_minus(), 0, 1, 0).unwrap();
    let e = StateVector::basis(2, &[1]).unwrap();
    let (state, p) = normal_jump(e.amplitudes(), &ch, 0.1).unwrap();
    assert!((p - 0.1).abs() < 1e-15);
    assert!((state[0] - c(1.0)).norm() < 1e-15 && state[1].norm() < 1e-15);
}

#[test]
fn normal_jump_on_ground_state_is_ineligible() {
    let ch = JumpChannel::local("sm", &sigma_minus(), 0, 1, 0).unwrap();
    let g = StateVector::basis(2, &[0]).unwrap();
    assert!(normal_jump(g.amplitudes(), &ch, 0.1).is_none());
    assert_eq!(ch.expectation(g.amplitudes()), 0.0);
}

#[test]
fn normal_jump_disentangles_bell_pair() {
    let ch = JumpChannel::local("sm2", &sigma_minus(), 1, 2, 0).unwrap();
    // (|10> + |01>)/sqrt2
    let bell = StateVector::new(2, 2, vec![c(0.0), c(1.0), c(1.0), c(0.0)]).unwrap();
    let (state, p) = normal_jump(bell.amplitudes(), &ch, 0.2).unwrap();
    assert!((p - 0.1).abs() < 1e-15);
    let down_down = StateVector::basis(2, &[0, 0]).unwrap();
    let after = StateVector::new(2, 2, state).unwrap();
    assert!((after.fidelity(&down_down) - 1.0).abs() < 1e-14);
}

#[test]
fn reverse_probability_examples() {
    assert!((reverse_jump_probability(0.3, &[0.3], -0.05, 0.8) - 0.04).abs() < 1e-15);
    let a = reverse_jump_probability(0.6, &[0.2, 0.2], 0.05, 0.5);
    assert!((a - 0.6 / 0.4 * 0.05 * 0.5).abs() < 1e-15);
    assert_eq!(reverse_jump_probability(0.6, &[], 0.05, 0.5), 0.0);
}

#[test]
fn state_vector_rejects_bad_input() {
    assert!(matches!(StateVector::new(2, 1, vec![c(0.0), c(0.0)]), Err(Error::InvalidParameter(_))));
    assert!(matches!(StateVector::new(2, 2, vec![c(1.0)]), Err(Error::DimensionMismatch { .. })));
    assert!(StateVector::basis(2, &[0; 13]).is_err());
    assert!(StateVector::basis(2, &[2]).is_err());
}

#[test]
fn master_equation_constant_decay() {
    let sys = qubit_decay(CMatrix::zeros(2));
    let rate = 0.7;
    let sched = RateSchedule::uniform(0.1, rate * 0.1, 30);
    let rho0 = StateVector::basis(2, &[1]).unwrap().density_matrix();
    let traj = master_equation_trajectory(&rho0, &sys, &[sched], 30, 4).unwrap();
    for (i, rho) in traj.iter().enumerate() {
        let expect = (-rate * 0.1 * i as f64).exp();
        assert!((excited_population(rho) - expect).abs() < 1e-9, "step {i}");
        assert!((rho.trace().re - 1.0).abs() < 1e-12);
    }
}

#[test]
fn master_equation_population_rises_during_backflow() {
    let sys = qubit_decay(CMatrix::zeros(2));
    let sched = RateProfile::lorentzian_ratio(0.5, 0.2).unwrap().sample(0.05, 200).unwrap();
    let rho0 = StateVector::basis(2, &[1]).unwrap().density_matrix();
    let traj = master_equation_trajectory(&rho0, &sys, &[sched.clone()], 200, 2).unwrap();
    let pop: Vec<f64> = traj.iter().map(excited_population).collect();
    let window = sched.negative_layers()[0].clone();
    assert!(pop[window.end] > pop[window.start] + 1e-4);
    for i in window.clone() {
        assert!(pop[i + 1] >= pop[i]);
    }
    assert!(pop[window.start] < pop[0]);
}

#[test]
fn master_equation_closed_two_qubits_stays_pure() {
    let h = sigma_x().kron(&sigma_x());
    let ch = JumpChannel::local("sm", &sigma_minus(), 0, 2, 0).unwrap();
    let sys = OpenSystem::new(h.clone(), vec![ch]).unwrap();
    let sched = RateSchedule::uniform(0.1, 0.0, 20);
    let psi = StateVector::basis(2, &[1, 0]).unwrap();
    let rho = master_equation_evolve(&psi.density_matrix(), &sys, &[sched], 2.0, 20).unwrap();
    let purity = (&rho * &rho).trace().re;
    assert!((purity - 1.0).abs() < 1e-8);
    let exact = CMatrix::unitary_propagator(&h, 2.0).apply(psi.amplitudes());
    let target = CMatrix::outer(&exact, &exact);
    assert!(rho.max_abs_diff(&target) < 1e-9);
}

#[test]
fn master_equation_rejects_mismatch_and_short_schedule() {
    let sys = qubit_decay(CMatrix::zeros(2));
    let sched = RateSchedule::uniform(0.1, 0.01, 5);
    let rho4 = CMatrix::identity(4);
    assert!(matches!(
        master_equation_trajectory(&rho4, &sys, &[sched.clone()], 5, 1),
        Err(Error::DimensionMismatch { .. })
    ));
    let rho = CMatrix::identity(2).scale_re(0.5);
    assert!(matches!(master_equation_trajectory(&rho, &sys, &[sched], 6, 1), Err(Error::ScheduleTooShort { .. })));
}

#[test]
fn ensemble_without_decay_is_unitary() {
    let h = sigma_x().kron(&sigma_x()).scale_re(0.8);
    let ch = JumpChannel::local("sm", &sigma_minus(), 1, 2, 0).unwrap();
    let sys = OpenSystem::new(h.clone(), vec![ch]).unwrap();
    let steps = 12;
    let sched = RateSchedule::uniform(0.25, 0.0, steps);
    let psi = StateVector::basis(2, &[1, 1]).unwrap();
    let run = evolve_ensemble(&psi, &sys, &[sched], steps, &EnsembleConfig::new(50, 3)).unwrap();
    assert_eq!(run.classes().len(), 1);
    assert!(run.classes()[0].jumps.is_empty());
    let u = CMatrix::unitary_propagator(&h, 0.25);
    let mut v = psi.amplitudes().to_vec();
    for _ in 0..steps {
        v = u.apply(&v);
    }
    assert!(run.rho_final().max_abs_diff(&CMatrix::outer(&v, &v)) < 1e-12);
}

#[test]
fn ensemble_no_jump_class_follows_binomial_law() {
    let sys = qubit_decay(CMatrix::zeros(2));
    let (p, steps, n) = (0.05, 20, 40_000);
    let sched = RateSchedule::uniform(0.5, p, steps);
    let psi = StateVector::basis(2, &[1]).unwrap();
    let run = evolve_ensemble(&psi, &sys, &[sched], steps, &EnsembleConfig::new(n, 5)).unwrap();
    let expect = (1.0f64 - p).powi(steps as i32);
    let f = run.weight(0);
    let se = (expect * (1.0 - expect) / n as f64).sqrt();
    assert!((f - expect).abs() < 4.0 * se, "f {f} expected {expect}");
    // Each one-jump class (k) has weight (1-p)^k p.
    for k in [0usize, 5, 10] {
        let id = run.find(&[Jump { step: k, channel: 0 }]).unwrap();
        let q = (1.0f64 - p).powi(k as i32) * p;
        let se = (q * (1.0 - q) / n as f64).sqrt();
        assert!((run.weight(id) - q).abs() < 4.0 * se);
    }
}

#[test]
fn ensemble_tracks_master_equation_through_backflow() {
    let sys = qubit_decay(CMatrix::zeros(2));
    let steps = 40;
    let sched = RateProfile::lorentzian_ratio(0.5, 0.2).unwrap().sample(0.25, steps).unwrap();
    let psi = StateVector::basis(2, &[1]).unwrap();
    let run = evolve_ensemble(&psi, &sys, &[sched.clone()], steps, &EnsembleConfig::new(20_000, 9)).unwrap();
    let me = master_equation_trajectory(&psi.density_matrix(), &sys, &[sched], steps, 8).unwrap();
    let worst = run.rho_history().iter().zip(&me).map(|(a, b)| trace_distance(a, b)).fold(0.0, f64::max);
    assert!(worst < 2e-2, "worst trace distance {worst}");
}

#[test]
fn ensemble_error_shrinks_with_samples() {
    let sys = qubit_decay(CMatrix::zeros(2));
    let steps = 16;
    let sched = RateSchedule::uniform(0.5, 0.04, steps);
    let psi = StateVector::basis(2, &[1]).unwrap();
    // Exact law of the discrete jump process: no-jump weight (1 - p)^n.
    let stay = 0.96f64.powi(steps as i32);
    let exact = CMatrix::from_real(2, &[1.0 - stay, 0.0, 0.0, stay]);
    let mean_error = |n: usize| -> f64 {
        (0..8u64)
            .map(|seed| {
                let run = evolve_ensemble(&psi, &sys, &[sched.clone()], steps, &EnsembleConfig::new(n, seed)).unwrap();
                trace_distance(run.rho_final(), &exact)
            })
            .sum::<f64>()
            / 8.0
    };
    let small = mean_error(500);
    let large = mean_error(32_000);
    // sqrt(64) = 8; allow generous slack for the averaged estimate.
    assert!(small / large > 3.0, "small {small} large {large}");
}

#[test]
fn ensemble_is_seed_deterministic() {
    let sys = qubit_decay(sigma_x().scale_re(0.4));
    let sched = RateProfile::lorentzian_ratio(0.4, 0.2).unwrap().sample(0.5, 14).unwrap();
    let psi = StateVector::basis(2, &[1]).unwrap();
    let cfg = EnsembleConfig::new(2000, 77);
    let a = evolve_ensemble(&psi, &sys, &[sched.clone()], 14, &cfg).unwrap();
    let b = evolve_ensemble(&psi, &sys, &[sched.clone()], 14, &cfg).unwrap();
    assert_eq!(a.classes(), b.classes());
    for class in a.classes() {
        assert_eq!(a.state(class.id), b.state(class.id));
    }
    let other = evolve_ensemble(&psi, &sys, &[sched], 14, &EnsembleConfig::new(2000, 78)).unwrap();
    assert_ne!(a.classes(), other.classes());
}

#[test]
fn class_weights_sum_to_one() {
    let sys = qubit_decay(sigma_x().scale_re(0.4));
    let sched = RateProfile::lorentzian_ratio(0.6, 0.2).unwrap().sample(0.5, 14).unwrap();
    let psi = StateVector::basis(2, &[1]).unwrap();
    let run = evolve_ensemble(&psi, &sys, &[sched], 14, &EnsembleConfig::new(3000, 1)).unwrap();
    let total: f64 = run.classes().iter().map(|c| c.weight).sum();
    assert!((total - 1.0).abs() < 1e-12);
    for rho in run.rho_history() {
        assert!((rho.trace().re - 1.0).abs() < 1e-10);
    }
}

#[test]
fn reverse_probability_ignores_source_time() {
    let sys = qubit_decay(sigma_x().scale_re(0.3));
    let sched = RateProfile::lorentzian_ratio(0.6, 0.2).unwrap().sample(0.5, 8).unwrap();
    let psi = StateVector::basis(2, &[1]).unwrap();
    let run = evolve_ensemble(&psi, &sys, &[sched], 8, &EnsembleConfig::new(5000, 2)).unwrap();
    let sources: Vec<usize> = run.classes().iter().filter(|c| c.jumps.len() == 1).map(|c| c.id).collect();
    assert!(sources.len() >= 3);
    let first = run.reverse_probability(sources[0], 0, -0.05, 0.7);
    assert!(first > 0.0);
    for &s in &sources[1..] {
        assert_eq!(run.reverse_probability(s, 0, -0.05, 0.7), first);
    }
    assert_eq!(run.reverse_probability(0, 0, -0.05, 0.7), 0.0);
}

#[test]
fn reverse_jump_restores_unitarily_evolved_state() {
    // Projectors summing to one: the no-jump back-action is trivial, so a
    // restored member must sit in exactly the unitarily evolved state.
    let h = sigma_x().scale_re(0.6);
    let chans = vec![
        JumpChannel::local("p0", &projector(0), 0, 1, 0).unwrap(),
        JumpChannel::local("p1", &projector(1), 0, 1, 0).unwrap(),
    ];
    let sys = OpenSystem::new(h.clone(), chans).unwrap();
    let sched = RateSchedule::new(0.5, vec![0.1, 0.1, 0.0, -0.05, -0.05, -0.05]);
    let psi = StateVector::new(2, 1, vec![c(0.8), C64::new(0.0, 0.6)]).unwrap();
    let before = evolve_ensemble(&psi, &sys, &[sched.clone()], 3, &EnsembleConfig::new(20_000, 4)).unwrap();
    let after = evolve_ensemble(&psi, &sys, &[sched], 6, &EnsembleConfig::new(20_000, 4)).unwrap();
    assert!(after.weight(0) > before.weight(0) + 0.05);
    let u = CMatrix::unitary_propagator(&h, 0.5);
    let mut v = psi.amplitudes().to_vec();
    for _ in 0..6 {
        v = u.apply(&v);
    }
    let exact = StateVector::new(2, 1, v).unwrap();
    let restored = StateVector::new(2, 1, after.state(0).unwrap().to_vec()).unwrap();
    assert!(restored.fidelity(&exact) > 1.0 - 1e-12);
}

#[test]
fn ensemble_rejects_bad_input() {
    let sys = qubit_decay(CMatrix::zeros(2));
    let sched = RateSchedule::uniform(0.5, 0.1, 4);
    let psi = StateVector::basis(2, &[1]).unwrap();
    assert!(evolve_ensemble(&psi, &sys, &[sched.clone()], 4, &EnsembleConfig::new(0, 1)).is_err());
    assert!(matches!(
        evolve_ensemble(&psi, &sys, &[sched.clone()], 5, &EnsembleConfig::new(10, 1)),
        Err(Error::ScheduleTooShort { .. })
    ));
    let two = StateVector::basis(2, &[1, 1]).unwrap();
    assert!(matches!(
        evolve_ensemble(&two, &sys, &[sched], 4, &EnsembleConfig::new(10, 1)),
        Err(Error::DimensionMismatch { .. })
    ));
}

fn random_state() -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 4)
        .prop_filter("nonzero", |v| v.iter().any(|(a, b)| a.abs() + b.abs() > 1e-3))
        .prop_map(|v| v.into_iter().map(|(a, b)| C64::new(a, b)).collect())
}

proptest! {
    #[test]
    fn jump_probabilities_close_over_a_complete_set(amps in random_state(), p in 0.0f64..1.0) {
        let psi = StateVector::new(2, 2, amps).unwrap();
        let mut total = 0.0;
        for level in 0..4 {
            let mut proj = CMatrix::zeros(4);
            proj[(level, level)] = c(1.0);
            let ch = JumpChannel::full("proj", proj, 0, 0);
            total += normal_jump(psi.amplitudes(), &ch, p).map_or(0.0, |(_, q)| q);
        }
        prop_assert!((total - p).abs() < 1e-12);
    }

    #[test]
    fn jumped_state_is_normalized(amps in random_state(), p in 0.0f64..1.0, site in 0usize..2) {
        let psi = StateVector::new(2, 2, amps).unwrap();
        let ch = JumpChannel::local("sm", &sigma_minus(), site, 2, 0).unwrap();
        if let Some((state, q)) = normal_jump(psi.amplitudes(), &ch, p) {
            let n: f64 = state.iter().map(|x| x.norm_sqr()).sum();
            prop_assert!((n - 1.0).abs() < 1e-12);
            prop_assert!((q - p * ch.expectation(psi.amplitudes())).abs() < 1e-12);
        }
    }

    #[test]
    fn master_equation_preserves_trace_and_hermiticity(j in 0.0f64..1.5, amp in 0.0f64..0.8) {
        let sys = qubit_decay(sigma_x().scale_re(j));
        let sched = RateProfile::lorentzian_ratio(amp, 0.2).unwrap().sample(0.5, 12).unwrap();
        let rho0 = StateVector::basis(2, &[1]).unwrap().density_matrix();
        for rho in master_equation_trajectory(&rho0, &sys, &[sched], 12, 4).unwrap() {
            prop_assert!((rho.trace().re - 1.0).abs() < 1e-10);
            prop_assert!(rho.max_abs_diff(&rho.dagger()) < 1e-12);
        }
    }
}

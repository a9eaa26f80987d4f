use backflow_core::linalg::C64;
use backflow_core::replica::{weingarten, Permutation, SymmetricGroup, WeingartenTable};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// 2×2 Haar unitary from Gram–Schmidt on a complex Ginibre matrix.
fn haar2(rng: &mut ChaCha8Rng) -> [[C64; 2]; 2] {
    let mut g = || C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng));
    let (a0, a1, b0, b1) = (g(), g(), g(), g());
    let n = (a0.norm_sqr() + a1.norm_sqr()).sqrt();
    let (u0, u1) = (a0 / n, a1 / n);
    let proj = u0.conj() * b0 + u1.conj() * b1;
    let (v0, v1) = (b0 - proj * u0, b1 - proj * u1);
    let m = (v0.norm_sqr() + v1.norm_sqr()).sqrt();
    // Columns are u and v.
    [[u0, v0 / m], [u1, v1 / m]]
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn haar_moments_match_weingarten_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 1_000_000;
    let mut diag = Vec::with_capacity(n);
    let mut cross = Vec::with_capacity(n);
    for _ in 0..n {
        let u = haar2(&mut rng);
        // E|U00|²|U11|² = Wg(e); E[U00 U11 conj(U01 U10)] = Wg((01)).
        diag.push(u[0][0].norm_sqr() * u[1][1].norm_sqr());
        cross.push((u[0][0] * u[1][1] * (u[0][1] * u[1][0]).conj()).re);
    }
    let e = Permutation::identity(2);
    let swap = Permutation::from_cycles(2, &[&[0, 1]]).unwrap();
    let (m_e, se_e) = mean_and_se(&diag);
    let (m_s, se_s) = mean_and_se(&cross);
    let wg_e = weingarten(&e, 2.0).unwrap();
    let wg_s = weingarten(&swap, 2.0).unwrap();
    assert!((wg_e - 1.0 / 3.0).abs() < 1e-12 && (wg_s + 1.0 / 6.0).abs() < 1e-12);
    assert!((m_e - wg_e).abs() < 3.0 * se_e, "{m_e} vs {wg_e} (se {se_e})");
    assert!((m_s - wg_s).abs() < 3.0 * se_s, "{m_s} vs {wg_s} (se {se_s})");
}

#[test]
fn orthogonality_holds_for_small_groups() {
    for q in 1..=4 {
        let group = SymmetricGroup::new(q).unwrap();
        for dim in [4.0, 9.0, 16.0] {
            if (dim as usize) < q {
                continue;
            }
            let table = WeingartenTable::new(&group, dim).unwrap();
            for g in 0..group.order() as u8 {
                let s: f64 = (0..group.order() as u8)
                    .map(|h| {
                        let gh = group.mul(g, group.inv(h));
                        table.value(gh) * dim.powi(group.cycle_count(h) as i32)
                    })
                    .sum();
                let target = if g == SymmetricGroup::IDENTITY { 1.0 } else { 0.0 };
                assert!((s - target).abs() < 1e-10, "q {q} dim {dim} g {g}: {s}");
            }
        }
    }
}

#[test]
fn singular_gram_is_rejected() {
    let group = SymmetricGroup::new(3).unwrap();
    assert!(WeingartenTable::new(&group, 2.0).is_err());
}

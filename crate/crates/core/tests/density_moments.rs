use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sloclab::density::*;
use sloclab::moments::*;

/// Composite Simpson on `[a, b]` (infinite ends cut at m ± 12) for the raw
/// moments of `exp(−(x − m)²/2)`; an oracle independent of `tg_moments`.
fn simpson_moments(p: &TruncatedGaussianParams) -> (f64, f64, f64) {
    let lo = p.a.max(p.m - 12.0);
    let hi = p.b.min(p.m + 12.0);
    let n = 40_000;
    let h = (hi - lo) / n as f64;
    let mut s = [0.0f64; 4];
    for i in 0..=n {
        let x = lo + h * i as f64;
        let c = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        let g = c * (-0.5 * (x - p.m).powi(2)).exp();
        let y = x - p.m;
        s[0] += g;
        s[1] += g * y;
        s[2] += g * y * y;
        s[3] += g * y * y * y;
    }
    let (e1, e2, e3) = (s[1] / s[0], s[2] / s[0], s[3] / s[0]);
    let var = e2 - e1 * e1;
    (p.m + e1, var, e3 - 3.0 * e1 * e2 + 2.0 * e1.powi(3))
}

#[test]
fn truncated_gaussian_moments_match_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let m = rng.random_range(-4.0..2.0);
        let a = rng.random_range(-4.0..2.0);
        let b = if i % 5 == 0 { f64::INFINITY } else { a + rng.random_range(0.5..16.0) };
        let p = TruncatedGaussianParams::new(m, a, b).unwrap();
        let t = tg_moments(&p).unwrap();
        let (mean, var, mu3) = simpson_moments(&p);
        let sd = var.sqrt();
        let err = [(t.mean - mean).abs() / sd, (t.variance - var).abs() / var, (t.third_central - mu3).abs() / var.powf(1.5)];
        let e = err.iter().cloned().fold(0.0, f64::max);
        assert!(e < 1e-8, "{p:?}: {t:?} vs {mean} {var} {mu3}");
        worst = worst.max(e);
    }
    assert!(worst > 0.0);
}

#[test]
fn half_line_and_far_finite_end_agree() {
    for u in [-3.0, -1.0, 0.0, 0.5, 1.5, 3.0] {
        let inf = tg_moments(&TruncatedGaussianParams::new(0.0, u, f64::INFINITY).unwrap()).unwrap();
        let fin = tg_moments(&TruncatedGaussianParams::new(0.0, u, u + 30.0).unwrap()).unwrap();
        assert!((inf.mean - fin.mean).abs() < 1e-12);
        assert!((inf.variance - fin.variance).abs() < 1e-12 * inf.variance.max(1.0));
        assert!((inf.third_central - fin.third_central).abs() < 1e-12);
    }
}

#[test]
fn reflection_flips_third_moment() {
    let p = TruncatedGaussianParams::new(0.4, -1.0, 3.0).unwrap();
    let (x, y) = (tg_moments(&p).unwrap(), tg_moments(&p.reflected()).unwrap());
    assert!((x.mean + y.mean).abs() < 1e-13);
    assert!((x.variance - y.variance).abs() < 1e-13);
    assert!((x.third_central + y.third_central).abs() < 1e-13);
}

#[test]
fn discretization_converges_to_continuous_moments() {
    let p = TruncatedGaussianParams::new(-0.5, -1.0, 2.5).unwrap();
    let exact = tg_moments(&p).unwrap();
    let errs: Vec<f64> = [50usize, 100, 200, 400]
        .iter()
        .map(|&n| {
            let c = discretize_1d(&Family::TruncatedGaussian(p), p.a, p.b, n).unwrap();
            (summarize(&c).unwrap().cov[(0, 0)] - exact.variance).abs()
        })
        .collect();
    // Midpoint cells: second order.
    for w in errs.windows(2) {
        assert!(w[1] < w[0] / 3.0, "{errs:?}");
    }
}

#[test]
fn csv_round_trip_is_bit_exact() {
    let c = discretize_2d([&Family::standard_gaussian(), &Family::ExpTilted { alpha: 1.0, tilt: 0.3, quartic: 0.1 }], [(-4.0, 4.0), (-3.0, 5.0)], 17)
        .unwrap();
    let back = AtomCloud::from_csv(&c.to_csv(), c.meta.alpha).unwrap();
    assert_eq!(back.points(), c.points());
    assert_eq!(back.log_weights(), c.log_weights());
}

fn random_cloud(rng: &mut ChaCha8Rng, dim: usize, n: usize) -> AtomCloud {
    let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0f64).powi(3)).collect()).collect();
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    AtomCloud::from_points(&pts, &w, DensityMeta::custom(0.0)).unwrap()
}

fn random_psd(rng: &mut ChaCha8Rng, dim: usize) -> DMatrix<f64> {
    let b = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
    &b * b.transpose()
}

#[test]
fn pair_sampling_agrees_with_exact_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let dim = 1 + k % 3;
        let c = random_cloud(&mut rng, dim, 40);
        let (m1, m2, m3) = (random_psd(&mut rng, dim), random_psd(&mut rng, dim), random_psd(&mut rng, dim));
        let exact = t_tensor_exact(&c, &m1, &m2, &m3).unwrap();
        let mc = t_tensor_mc(&c, &m1, &m2, &m3, 20_000, 100 + k as u64).unwrap();
        let z = (mc.value - exact.value) / mc.std_error;
        worst = worst.max(z.abs());
    }
    assert!(worst < 4.5, "worst |z| = {worst}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn tensor_functional_invariants(seed in any::<u64>(), dim in 1usize..4, n in 2usize..30, s in 0.1f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = random_cloud(&mut rng, dim, n);
        let id = DMatrix::identity(dim, dim);
        let t = t_tensor_exact(&c, &id, &id, &id).unwrap().value;
        let mean = summarize(&c).unwrap().mean;
        let y: Vec<f64> = (0..n).flat_map(|i| (0..dim).map(move |k| (i, k))).map(|(i, k)| c.point(i)[k] - mean[k]).collect();
        let scale = t_iii_from_tensor(&y, dim, &c.weights());
        // Non-negative, and equal to the squared Frobenius norm of the third moment tensor.
        prop_assert!(t >= -1e-12 * scale.abs().max(1.0));
        prop_assert!((t - scale).abs() <= 1e-9 * scale.abs().max(1e-12));

        let (a, b, m) = (random_psd(&mut rng, dim), random_psd(&mut rng, dim), random_psd(&mut rng, dim));
        let base = t_tensor_exact(&c, &a, &b, &m).unwrap().value;
        let scaled = t_tensor_exact(&c, &(&a * s), &b, &m).unwrap().value;
        let perm = t_tensor_exact(&c, &m, &a, &b).unwrap().value;
        let tol = 1e-10 * base.abs().max(1e-10);
        prop_assert!((scaled - s * base).abs() <= s * tol * 10.0);
        prop_assert!((perm - base).abs() <= tol * 10.0);
        // PSD arguments give a non-negative value.
        prop_assert!(base >= -tol * 10.0);
    }

    #[test]
    fn covariance_spectral_functionals(seed in any::<u64>(), dim in 1usize..4, q in 1.0f64..6.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = random_cloud(&mut rng, dim, 12);
        let s = summarize(&c).unwrap();
        let ev = s.clamped_eigenvalues().unwrap();
        let tr_q = tr_pow(&s, q).unwrap();
        let op = op_norm(&s).unwrap();
        // ‖A‖_op^q ≤ Tr A^q ≤ n ‖A‖_op^q.
        prop_assert!(op.powf(q) <= tr_q * (1.0 + 1e-12) + 1e-300);
        prop_assert!(tr_q <= dim as f64 * op.powf(q) * (1.0 + 1e-12));
        let direct: f64 = ev.iter().map(|l| l.powf(q)).sum();
        prop_assert!((direct - tr_q).abs() <= 1e-12 * direct.max(1e-300));
        let back = s.cov_pow(1.0).unwrap();
        prop_assert!((&back - &s.cov).abs().max() <= 1e-10 * op.max(1e-12));
    }
}

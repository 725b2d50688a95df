use proptest::prelude::*;
use sloclab::density::{tg_moments, TruncatedGaussianParams};
use sloclab::gamma_search::{objective, search, SearchDomain, SearchOptions, Translated};
use sloclab::optim::golden_section;

/// Independent oracle: the supremum sits on the `b = ∞` slice; a golden-section
/// search over `u` there reproduces it.
fn slice_oracle() -> (f64, f64) {
    let r = golden_section(
        |u| -objective(&TruncatedGaussianParams { m: 0.0, a: u, b: f64::INFINITY }).unwrap(),
        -2.0,
        2.0,
        1e-10,
    );
    (r.x, -r.value)
}

#[test]
fn default_search_finds_one_sided_supremum() {
    let r = search(&SearchDomain::default(), &SearchOptions::default());
    let (u_star, g_star) = slice_oracle();
    assert!((r.gamma_hat - g_star).abs() < 1e-9, "{} vs {g_star}", r.gamma_hat);
    assert!((r.gamma_hat - 0.3685163237).abs() < 1e-8);
    assert!((r.argmax_translated.u - u_star).abs() < 1e-4, "{:?}", r.argmax_translated);
    assert!(r.argmax_translated.v.is_infinite() && r.argmax.b.is_infinite());
    assert!(r.gamma_hat >= r.grid_best);
    assert!(r.refinement_trace.windows(2).all(|w| w[1].value >= w[0].value));
    assert_eq!(r.refinement_trace.last().unwrap().value, r.gamma_hat);
    assert!(tg_moments(&r.argmax).unwrap().mean.abs() < 1e-12);
}

#[test]
fn finite_interval_ratio_increases_with_upper_end() {
    let u = 0.3374;
    let vals: Vec<f64> = [2.0, 3.0, 4.0, 5.0, 6.0, 8.0]
        .iter()
        .map(|&v| objective(&TruncatedGaussianParams { m: 0.0, a: u, b: v }).unwrap())
        .collect();
    assert!(vals.windows(2).all(|w| w[1] >= w[0]), "{vals:?}");
}

#[test]
fn finite_box_without_slice_approaches_supremum() {
    let d = SearchDomain::Translated { u_range: [-4.0, 2.0], v_range: [0.5, 6.0], include_infinite: false };
    let r = search(&d, &SearchOptions::default());
    assert!(r.argmax_translated.v > 5.99 && r.argmax_translated.v.is_finite(), "{:?}", r.argmax_translated);
    assert!(r.gamma_hat < 0.3685163237319336 && r.gamma_hat > 0.3684);
}

#[test]
fn reported_gauge_matches_translation() {
    let t = Translated { u: 0.34, v: 5.34 };
    let p = t.centered();
    assert!(((p.a - p.m) - t.u).abs() < 1e-12 && ((p.b - p.m) - t.v).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn symmetric_intervals_have_zero_ratio(b in 0.05f64..12.0) {
        let v = objective(&TruncatedGaussianParams { m: 0.0, a: -b, b }).unwrap();
        prop_assert!(v < 1e-24, "{v}");
    }

    #[test]
    fn ratio_is_translation_invariant(m in -3.0f64..3.0, u in -4.0f64..2.0, w in 0.5f64..10.0, shift in -20.0f64..20.0, inf in any::<bool>()) {
        let v = if inf { f64::INFINITY } else { u + w };
        let p = TruncatedGaussianParams { m, a: m + u, b: m + v };
        let q = TruncatedGaussianParams { m: m + shift, a: m + u + shift, b: m + v + shift };
        let (x, y) = (objective(&p).unwrap(), objective(&q).unwrap());
        prop_assert!((x - y).abs() <= 1e-9 * x.max(1e-3), "{x} {y}");
    }

    #[test]
    fn reflection_preserves_ratio(u in -4.0f64..2.0, w in 0.5f64..10.0) {
        let p = TruncatedGaussianParams { m: 0.0, a: u, b: u + w };
        let r = TruncatedGaussianParams { m: 0.0, a: -(u + w), b: -u };
        let (x, y) = (objective(&p).unwrap(), objective(&r).unwrap());
        prop_assert!((x - y).abs() <= 1e-9 * x.max(1e-3));
    }

    #[test]
    fn ratio_never_exceeds_supremum(u in -6.0f64..4.0, w in 0.05f64..20.0) {
        let v = objective(&TruncatedGaussianParams { m: 0.0, a: u, b: u + w }).unwrap();
        prop_assert!(v <= 0.3685163237319336 + 1e-12, "{v}");
    }
}

use sloclab::density::{discretize_1d, tg_moments, CloudSpec, Family, TruncatedGaussianParams};
use sloclab::inequalities::*;
use sloclab::moments::{summarize, t_tensor_exact};

use nalgebra::DMatrix;
use proptest::prelude::*;

fn half_normal_grid() -> sloclab::AtomCloud {
    let p = TruncatedGaussianParams { m: 0.0, a: 0.0, b: 8.0 };
    discretize_1d(&Family::TruncatedGaussian(p), 0.0, 8.0, 400).unwrap()
}

#[test]
fn tiii_gaussian_and_half_normal() {
    let g = discretize_1d(&Family::standard_gaussian(), -6.0, 6.0, 201).unwrap();
    let r = check_tiii(&g).unwrap();
    assert!(r.observed.abs() < 1e-15);
    assert!((r.claimed_bound - 2.0 * 2f64.sqrt()).abs() < 2e-2);
    assert_eq!(r.verdict, Verdict::Pass);

    let h = check_tiii(&half_normal_grid()).unwrap();
    assert!((h.observed - 0.218013f64.powi(2)).abs() < 2e-4, "{}", h.observed);
    assert!((h.claimed_bound - 2.0 * 2f64.sqrt() * 0.363380f64.powi(2)).abs() < 1e-3);
    assert_eq!(h.verdict, Verdict::Pass);
}

#[test]
fn tiii_margin_on_skew_extremal_family() {
    // Near the skewness extremum the ratio T/(Tr A²) is about 0.37, far from 2√2.
    let p = TruncatedGaussianParams { m: -1.03, a: -0.69, b: 4.31 };
    let cloud = discretize_1d(&Family::TruncatedGaussian(p), p.a, p.b, 2000).unwrap();
    let r = check_tiii(&cloud).unwrap();
    let var = tg_moments(&p).unwrap().variance;
    let expected = (2.0 * 2f64.sqrt() - 0.368) * var * var;
    assert!((r.margin - expected).abs() < 2e-3 * var * var, "{} vs {expected}", r.margin);
}

#[test]
fn taii_1d_matches_direct_pair_sum() {
    let cloud = half_normal_grid();
    let r = check_taii(&cloud, 3.0).unwrap();
    let w = cloud.weights();
    let mean: f64 = (0..cloud.len()).map(|i| w[i] * cloud.point(i)[0]).sum();
    let var: f64 = (0..cloud.len()).map(|i| w[i] * (cloud.point(i)[0] - mean).powi(2)).sum();
    let mut direct = 0.0;
    for i in 0..cloud.len() {
        for j in 0..cloud.len() {
            let (x, y) = (cloud.point(i)[0] - mean, cloud.point(j)[0] - mean);
            direct += w[i] * w[j] * (var * x * y) * (x * y) * (x * y);
        }
    }
    assert!((r.observed - direct).abs() < 1e-13);
    assert_eq!(r.verdict, Verdict::Pass);
    let sym = discretize_1d(&Family::standard_gaussian(), -6.0, 6.0, 201).unwrap();
    assert!(check_taii(&sym, 3.5).unwrap().observed.abs() < 1e-15);
}

#[test]
fn conditional_forms_agree_at_tight_zeta() {
    let cloud = half_normal_grid();
    let probe = check_tiii_conditional(&cloud, 3.0, 1.0).unwrap();
    let zeta = probe.extras["zeta_tight"];
    let r = check_tiii_conditional(&cloud, 3.0, zeta).unwrap();
    assert_eq!(r.verdict, Verdict::Pass);
    let alt = r.extras["alternative_claimed"];
    assert!((alt - r.claimed_bound).abs() < 1e-12 * r.claimed_bound);
    // A much larger ζ breaks the hypothesis.
    assert_eq!(check_tiii_conditional(&cloud, 3.0, 10.0 * zeta).unwrap().verdict, Verdict::NotApplicable);
}

#[test]
fn default_corpus_all_pass() {
    let corpus = default_corpus(20240611);
    assert_eq!(corpus.instances.len(), 60);
    let reports = run_corpus(&corpus, &default_checks(), 7).unwrap();
    let summary = summarize_reports(&reports);
    let failures: Vec<_> = reports.iter().filter(|r| r.verdict == Verdict::Fail).collect();
    assert!(failures.is_empty(), "{failures:#?}");
    assert_eq!(reports.iter().filter(|r| r.lemma_id == "half_poincare").count(), 200);
    // The ζ = 10, q = 3 hypothesis holds somewhere in the corpus.
    assert!(reports.iter().any(|r| r.lemma_id == "tiii_conditional(q=3,zeta=10)" && r.verdict == Verdict::Pass));
    let worst = summary.worst_ratio["tiii"];
    assert!(worst < 0.38 / (2.0 * 2f64.sqrt()), "{worst}");
}

#[test]
fn corpus_reports_reproduce_and_sort() {
    let mut corpus = default_corpus(3);
    corpus.instances.truncate(4);
    let reports = run_corpus(&corpus, &default_checks(), 1).unwrap();
    for r in reports.iter().step_by(7) {
        assert_eq!(&reproduce(&r.instance_descriptor).unwrap().verdict, &r.verdict);
        assert_eq!(reproduce(&r.instance_descriptor).unwrap().observed.to_bits(), r.observed.to_bits());
    }
    let keys: Vec<_> = reports.iter().map(|r| (&r.instance_key, &r.lemma_id, &r.instance_descriptor)).collect();
    assert!(keys.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn empty_and_alpha_zero_corpora() {
    let empty = CorpusSpec { name: "empty".into(), instances: vec![] };
    assert!(run_corpus(&empty, &default_checks(), 0).unwrap().is_empty());
    let flat = CorpusSpec {
        name: "flat".into(),
        instances: vec![CorpusInstance {
            key: "u".into(),
            cloud: CloudSpec::single(Family::UniformInterval { lo: -1.0, hi: 2.0 }, 100),
        }],
    };
    let checks = vec![CheckKind::Tiii, CheckKind::Taii { q_values: vec![3.0] }];
    let reports = run_corpus(&flat, &checks, 0).unwrap();
    assert_eq!(reports.len(), 2);
    assert!(reports.iter().all(|r| r.verdict == Verdict::NotApplicable));
}

#[test]
fn failing_instances_dump_as_csv() {
    // A non-log-concave two-bump cloud tagged with α = 1 violates the bound.
    let bumps = sloclab::AtomCloud::from_points(
        &[vec![-3.0], vec![0.0], vec![6.0]],
        &[0.6, 0.1, 0.3],
        sloclab::DensityMeta::custom(1.0),
    )
    .unwrap();
    let r = check_tiii(&bumps).unwrap();
    assert_eq!(r.verdict, Verdict::Fail);
    let mut with_spec = r.clone();
    with_spec.instance_key = "bad".into();
    // Without a cloud spec there is nothing to dump.
    assert!(failing_clouds(&[with_spec]).unwrap().is_empty());
}

#[test]
fn xq_hess_sweep_zero_slack() {
    let reports = run_corpus(
        &CorpusSpec { name: "none".into(), instances: vec![] },
        &[CheckKind::XqHess { n_samples: 10_000 }],
        11,
    )
    .unwrap();
    assert_eq!(reports.len(), 10_000);
    assert!(reports.iter().all(|r| r.slack == 0.0 && r.verdict == Verdict::Pass));
}

#[test]
fn one_dimensional_t_identity_on_corpus() {
    let corpus = default_corpus(20240611);
    let eye = DMatrix::identity(1, 1);
    for inst in corpus.instances.iter().filter(|i| i.key.starts_with("tg1d")) {
        let cloud = inst.cloud.build().unwrap();
        let s = summarize(&cloud).unwrap();
        let w = cloud.weights();
        let m3: f64 = (0..cloud.len()).map(|i| w[i] * (cloud.point(i)[0] - s.mean[0]).powi(3)).sum();
        let t = t_tensor_exact(&cloud, &eye, &eye, &eye).unwrap().value;
        assert!((t - m3 * m3).abs() <= 1e-12 * (m3 * m3), "{}: {t} vs {}", inst.key, m3 * m3);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]
    #[test]
    fn xq_hess_never_fails(a in -5.0f64..5.0, b in -5.0f64..5.0, q in 3.0f64..8.0) {
        prop_assume!(a != b);
        let r = check_xq_hess(a.min(b), a.max(b), q).unwrap();
        prop_assert_eq!(r.verdict, Verdict::Pass);
    }
}

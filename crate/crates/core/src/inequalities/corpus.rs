//! Corpora of densities and Cartesian check runs over them.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{describe, run_on_cloud, CheckSpec, InequalityError, InequalityReport, TestFunction, Verdict};
use crate::density::{tg_moments, AxisSpec, CloudSpec, Family, GridSpec, TruncatedGaussianParams, DEFAULT_GRID_SDS};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusInstance {
    pub key: String,
    pub cloud: CloudSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub name: String,
    pub instances: Vec<CorpusInstance>,
}

/// A family of checks, expanded into concrete [`CheckSpec`]s per instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CheckKind {
    Tiii,
    Taii { q_values: Vec<f64> },
    TiiiConditional { q_values: Vec<f64>, zeta_values: Vec<f64> },
    /// `n_functions` random projected cubics and quartics in total, dealt
    /// round-robin over the instances.
    HalfPoincare { n_functions: usize },
    /// Random scalar instances, `(a, b) ∈ [−5, 5]²`, `q ∈ [3, 8]`; independent
    /// of the corpus.
    XqHess { n_samples: usize },
}

pub fn default_checks() -> Vec<CheckKind> {
    vec![
        CheckKind::Tiii,
        CheckKind::Taii { q_values: vec![3.0, 3.5, 4.0] },
        CheckKind::TiiiConditional { q_values: vec![3.0, 3.5, 4.0], zeta_values: vec![2.0, 10.0] },
        CheckKind::HalfPoincare { n_functions: 200 },
    ]
}

const TG_ATOMS: usize = 400;
const PRODUCT_ATOMS_PER_AXIS: usize = 61;

/// Grid of the truncated Gaussian clipped to mean ± 8 sd.
fn tg_axis(p: TruncatedGaussianParams, n: usize) -> AxisSpec {
    let mom = tg_moments(&p).expect("corpus parameters have non-degenerate mass");
    let sd = mom.variance.sqrt();
    let lo = p.a.max(mom.mean - DEFAULT_GRID_SDS * sd);
    let hi = p.b.min(mom.mean + DEFAULT_GRID_SDS * sd);
    AxisSpec { family: Family::TruncatedGaussian(p), grid: GridSpec { lo: Some(lo), hi: Some(hi), n } }
}

fn random_tg<R: Rng>(rng: &mut R, max_width: f64, allow_infinite: bool) -> TruncatedGaussianParams {
    let m = rng.random_range(-3.0..=3.0);
    let a = rng.random_range(-4.0..=2.0);
    let b = if allow_infinite { f64::INFINITY } else { a + rng.random_range(0.1..=max_width) };
    TruncatedGaussianParams { m, a, b }
}

fn random_factor<R: Rng>(rng: &mut R) -> AxisSpec {
    let n = PRODUCT_ATOMS_PER_AXIS;
    match rng.random_range(0..3u8) {
        0 => tg_axis(random_tg(rng, 6.0, false), n),
        1 => {
            let family = Family::Gaussian { mean: rng.random_range(-1.0..=1.0), alpha: rng.random_range(0.5..=2.0) };
            AxisSpec { family, grid: GridSpec { lo: None, hi: None, n } }
        }
        _ => {
            let family = Family::ExpTilted {
                alpha: rng.random_range(0.5..=2.0),
                tilt: rng.random_range(-1.5..=1.5),
                quartic: rng.random_range(0.0..=0.2),
            };
            AxisSpec { family, grid: GridSpec { lo: None, hi: None, n } }
        }
    }
}

/// 50 random one-dimensional truncated Gaussians (every fifth one
/// semi-infinite) and 10 random two-dimensional products.
///
/// Truncated Gaussians draw `m ∈ [−3, 3]`, `a ∈ [−4, 2]`, `b − a ∈ [0.1, 12]`
/// and are gridded with 400 atoms over their mean ± 8 sd, intersected with
/// `[a, b]`. Product factors are truncated Gaussians, Gaussians or tilted
/// quartic potentials on 61 atoms per axis.
pub fn default_corpus(seed: u64) -> CorpusSpec {
    let mut instances = Vec::with_capacity(60);
    for i in 0..50u64 {
        let mut r = rng::stream(seed, i);
        let p = random_tg(&mut r, 12.0, i % 5 == 4);
        instances.push(CorpusInstance { key: format!("tg1d-{i:02}"), cloud: CloudSpec::Single(tg_axis(p, TG_ATOMS)) });
    }
    for i in 0..10u64 {
        let mut r = rng::stream(seed, 1000 + i);
        let product = vec![random_factor(&mut r), random_factor(&mut r)];
        instances.push(CorpusInstance { key: format!("prod2d-{i:02}"), cloud: CloudSpec::Product { product } });
    }
    CorpusSpec { name: "default".into(), instances }
}

fn cloud_dim(spec: &CloudSpec) -> usize {
    match spec {
        CloudSpec::Single(_) => 1,
        CloudSpec::Product { product } => product.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedCheck {
    pub instance_key: String,
    pub cloud: Option<CloudSpec>,
    pub check: CheckSpec,
}

/// Expand check families into concrete checks; random test functions and
/// scalar instances come from substreams of `seed`.
pub fn plan_corpus(corpus: &CorpusSpec, checks: &[CheckKind], seed: u64) -> Vec<PlannedCheck> {
    let mut plan = Vec::new();
    let n_inst = corpus.instances.len();
    for kind in checks {
        match kind {
            CheckKind::Tiii | CheckKind::Taii { .. } | CheckKind::TiiiConditional { .. } => {
                let specs: Vec<CheckSpec> = match kind {
                    CheckKind::Tiii => vec![CheckSpec::Tiii],
                    CheckKind::Taii { q_values } => q_values.iter().map(|&q| CheckSpec::Taii { q }).collect(),
                    CheckKind::TiiiConditional { q_values, zeta_values } => q_values
                        .iter()
                        .flat_map(|&q| zeta_values.iter().map(move |&zeta| CheckSpec::TiiiConditional { q, zeta }))
                        .collect(),
                    _ => unreachable!(),
                };
                for inst in &corpus.instances {
                    for check in &specs {
                        plan.push(PlannedCheck {
                            instance_key: inst.key.clone(),
                            cloud: Some(inst.cloud.clone()),
                            check: check.clone(),
                        });
                    }
                }
            }
            CheckKind::HalfPoincare { n_functions } => {
                if n_inst == 0 {
                    continue;
                }
                for j in 0..*n_functions {
                    let inst = &corpus.instances[j % n_inst];
                    let mut r = rng::stream(seed, 2_000_000 + j as u64);
                    let degree = 3 + j % 2;
                    let f = TestFunction::random(cloud_dim(&inst.cloud), degree, &mut r);
                    plan.push(PlannedCheck {
                        instance_key: inst.key.clone(),
                        cloud: Some(inst.cloud.clone()),
                        check: CheckSpec::HalfPoincare { f },
                    });
                }
            }
            CheckKind::XqHess { n_samples } => {
                let mut r = rng::stream(seed, 3_000_000);
                for _ in 0..*n_samples {
                    let (x, y): (f64, f64) = loop {
                        let x = r.random_range(-5.0..=5.0);
                        let y = r.random_range(-5.0..=5.0);
                        if x != y {
                            break (x, y);
                        }
                    };
                    let q = r.random_range(3.0..=8.0);
                    plan.push(PlannedCheck {
                        instance_key: "scalar".into(),
                        cloud: None,
                        check: CheckSpec::XqHess { a: x.min(y), b: x.max(y), q },
                    });
                }
            }
        }
    }
    plan
}

/// Run every planned check; clouds are built once per instance and instances
/// run in parallel. Reports are sorted by `(instance_key, lemma_id,
/// instance_descriptor)`.
pub fn run_corpus(
    corpus: &CorpusSpec,
    checks: &[CheckKind],
    seed: u64,
) -> Result<Vec<InequalityReport>, InequalityError> {
    let plan = plan_corpus(corpus, checks, seed);
    let mut by_instance: BTreeMap<&str, Vec<&PlannedCheck>> = BTreeMap::new();
    for p in &plan {
        by_instance.entry(&p.instance_key).or_default().push(p);
    }
    let groups: Vec<Vec<&PlannedCheck>> = by_instance.into_values().collect();
    let chunks: Vec<Vec<InequalityReport>> = groups
        .par_iter()
        .map(|group| {
            let cloud = match &group[0].cloud {
                Some(spec) => Some(spec.build()?),
                None => None,
            };
            group
                .iter()
                .map(|p| {
                    let mut r = run_on_cloud(cloud.as_ref(), &p.check)?;
                    r.instance_key = p.instance_key.clone();
                    r.instance_descriptor = describe(p.cloud.as_ref(), &p.check);
                    Ok(r)
                })
                .collect::<Result<Vec<_>, InequalityError>>()
        })
        .collect::<Result<_, _>>()?;
    let mut reports: Vec<InequalityReport> = chunks.into_iter().flatten().collect();
    reports.sort_by(|x, y| {
        (&x.instance_key, &x.lemma_id, &x.instance_descriptor).cmp(&(&y.instance_key, &y.lemma_id, &y.instance_descriptor))
    });
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub n_instances: usize,
    pub n_reports: usize,
    pub n_pass: usize,
    pub n_fail: usize,
    pub n_not_applicable: usize,
    /// Largest `observed / claimed` per check family.
    pub worst_ratio: BTreeMap<String, f64>,
    /// Smallest `margin + slack` per check family.
    pub min_margin_plus_slack: BTreeMap<String, f64>,
}

fn family_of(lemma_id: &str) -> String {
    lemma_id.split('(').next().unwrap_or(lemma_id).to_string()
}

pub fn summarize_reports(reports: &[InequalityReport]) -> CorpusSummary {
    let count = |v: Verdict| reports.iter().filter(|r| r.verdict == v).count();
    let mut worst_ratio = BTreeMap::new();
    let mut min_margin = BTreeMap::new();
    for r in reports {
        if r.verdict == Verdict::NotApplicable {
            continue;
        }
        let fam = family_of(&r.lemma_id);
        if let Some(ratio) = r.ratio() {
            let e = worst_ratio.entry(fam.clone()).or_insert(f64::NEG_INFINITY);
            *e = f64::max(*e, ratio);
        }
        let e = min_margin.entry(fam).or_insert(f64::INFINITY);
        *e = f64::min(*e, r.margin + r.slack);
    }
    let instances: BTreeSet<&str> = reports.iter().map(|r| r.instance_key.as_str()).collect();
    CorpusSummary {
        n_instances: instances.len(),
        n_reports: reports.len(),
        n_pass: count(Verdict::Pass),
        n_fail: count(Verdict::Fail),
        n_not_applicable: count(Verdict::NotApplicable),
        worst_ratio,
        min_margin_plus_slack: min_margin,
    }
}

/// CSV dumps `(instance_key, csv)` of the clouds behind failing reports,
/// one per instance.
pub fn failing_clouds(reports: &[InequalityReport]) -> Result<Vec<(String, String)>, InequalityError> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for r in reports.iter().filter(|r| r.verdict == Verdict::Fail) {
        if !seen.insert(r.instance_key.clone()) {
            continue;
        }
        let inst: super::Instance = serde_json::from_str(&r.instance_descriptor)
            .map_err(|e| InequalityError::Descriptor(e.to_string()))?;
        if let Some(spec) = inst.cloud {
            out.push((r.instance_key.clone(), spec.build()?.to_csv()));
        }
    }
    Ok(out)
}

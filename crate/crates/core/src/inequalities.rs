//! Verifiers for moment-tensor and Poincaré-type inequalities on atom clouds.
//!
//! Each check returns an [`InequalityReport`] with the signed margin
//! `claimed − observed`. Checks whose hypothesis is a property of the
//! continuous generating family (strong log-concavity) add a discretization
//! slack `K·h²·scale`, `K = 10`, `h` the grid spacing and
//! `scale = max(1, |claimed|)`.

mod corpus;

pub use corpus::{
    default_corpus, default_checks, failing_clouds, plan_corpus, run_corpus, summarize_reports, CheckKind,
    CorpusInstance, CorpusSpec, CorpusSummary, PlannedCheck,
};

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::{AtomCloud, CloudSpec, DensityError};
use crate::moments::{summarize, t_tensor_exact, tr_pow, MomentsError};

/// Constant in the discretization slack `K·h²·scale`.
pub const SLACK_K: f64 = 10.0;

#[derive(Debug, Error, PartialEq)]
pub enum InequalityError {
    #[error("invalid check parameters: {0}")]
    Params(String),
    #[error("test function projection failed: {0}")]
    Projection(String),
    #[error("malformed instance descriptor: {0}")]
    Descriptor(String),
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Moments(#[from] MomentsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

/// A check with all of its parameters; together with a cloud spec it fully
/// determines a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum CheckSpec {
    Tiii,
    Taii { q: f64 },
    TiiiConditional { q: f64, zeta: f64 },
    HalfPoincare { f: TestFunction },
    XqHess { a: f64, b: f64, q: f64 },
}

impl CheckSpec {
    pub fn lemma_id(&self) -> String {
        match self {
            CheckSpec::Tiii => "tiii".into(),
            CheckSpec::Taii { q } => format!("taii(q={q})"),
            CheckSpec::TiiiConditional { q, zeta } => format!("tiii_conditional(q={q},zeta={zeta})"),
            CheckSpec::HalfPoincare { .. } => "half_poincare".into(),
            CheckSpec::XqHess { .. } => "xq_hess".into(),
        }
    }
}

/// What a report was computed from: `cloud` is absent for scalar checks and
/// for clouds that did not come from a spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub cloud: Option<CloudSpec>,
    #[serde(flatten)]
    pub check: CheckSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub lemma_id: String,
    /// Corpus key of the instance, empty outside corpus runs.
    pub instance_key: String,
    /// JSON [`Instance`]; [`reproduce`] recomputes the report from it.
    pub instance_descriptor: String,
    pub claimed_bound: f64,
    pub observed: f64,
    pub margin: f64,
    pub slack: f64,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    /// Auxiliary quantities (alternative bound forms, hypothesis values).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extras: BTreeMap<String, f64>,
}

impl InequalityReport {
    fn new(check: &CheckSpec, claimed: f64, observed: f64, slack: f64) -> Self {
        let margin = claimed - observed;
        Self {
            lemma_id: check.lemma_id(),
            instance_key: String::new(),
            instance_descriptor: describe(None, check),
            claimed_bound: claimed,
            observed,
            margin,
            slack,
            verdict: if margin >= -slack { Verdict::Pass } else { Verdict::Fail },
            note: None,
            extras: BTreeMap::new(),
        }
    }

    fn not_applicable(check: &CheckSpec, reason: &str) -> Self {
        Self {
            lemma_id: check.lemma_id(),
            instance_key: String::new(),
            instance_descriptor: describe(None, check),
            claimed_bound: f64::NAN,
            observed: f64::NAN,
            margin: f64::NAN,
            slack: 0.0,
            verdict: Verdict::NotApplicable,
            note: Some(reason.to_string()),
            extras: BTreeMap::new(),
        }
    }

    /// `observed / claimed`, where meaningful.
    pub fn ratio(&self) -> Option<f64> {
        (self.verdict != Verdict::NotApplicable && self.claimed_bound > 0.0)
            .then(|| self.observed / self.claimed_bound)
    }
}

fn describe(cloud: Option<&CloudSpec>, check: &CheckSpec) -> String {
    serde_json::to_string(&Instance { cloud: cloud.cloned(), check: check.clone() }).expect("instance serializes")
}

fn scale(claimed: f64) -> f64 {
    claimed.abs().max(1.0)
}

fn discretization_slack(cloud: &AtomCloud, claimed: f64) -> f64 {
    cloud.meta.grid_spacing.map_or(0.0, |h| SLACK_K * h * h * scale(claimed))
}

fn eye(n: usize) -> DMatrix<f64> {
    DMatrix::identity(n, n)
}

const NEEDS_ALPHA: &str = "alpha = 0: the generating family is not strongly log-concave";

/// `T(I, I, I) ≤ (2√2/α) Tr A²`.
pub fn check_tiii(cloud: &AtomCloud) -> Result<InequalityReport, InequalityError> {
    let check = CheckSpec::Tiii;
    let alpha = cloud.meta.alpha;
    if alpha <= 0.0 {
        return Ok(InequalityReport::not_applicable(&check, NEEDS_ALPHA));
    }
    let s = summarize(cloud)?;
    let n = cloud.dim();
    let observed = t_tensor_exact(cloud, &eye(n), &eye(n), &eye(n))?.value;
    let claimed = 2.0 * SQRT_2 / alpha * tr_pow(&s, 2.0)?;
    Ok(InequalityReport::new(&check, claimed, observed, discretization_slack(cloud, claimed)))
}

/// `T(A^{q−2}, I, I) ≤ (2/α) Tr A^q`, `q ≥ 3`.
pub fn check_taii(cloud: &AtomCloud, q: f64) -> Result<InequalityReport, InequalityError> {
    if !(q >= 3.0 && q.is_finite()) {
        return Err(InequalityError::Params(format!("taii needs q >= 3, got {q}")));
    }
    let check = CheckSpec::Taii { q };
    let alpha = cloud.meta.alpha;
    if alpha <= 0.0 {
        return Ok(InequalityReport::not_applicable(&check, NEEDS_ALPHA));
    }
    let s = summarize(cloud)?;
    let n = cloud.dim();
    let observed = t_tensor_exact(cloud, &s.cov_pow(q - 2.0)?, &eye(n), &eye(n))?.value;
    let claimed = 2.0 / alpha * tr_pow(&s, q)?;
    Ok(InequalityReport::new(&check, claimed, observed, discretization_slack(cloud, claimed)))
}

/// Exponent `c = 1/(2(q² − 2))` of the conditional bound.
pub fn conditional_exponent(q: f64) -> f64 {
    1.0 / (2.0 * (q * q - 2.0))
}

/// Given `Tr A^q ≤ α^{−(q−2)} ζ^{−1} Tr A²`, checks
/// `T(I, I, I) ≤ 12/(α ζ^c) · Tr A²` with `c = 1/(2(q² − 2))`.
///
/// The equivalent form `(12/α³)(α^q Tr A^q)^c (α² Tr A²)^{1−c}` is reported in
/// `extras["alternative_claimed"]`; the two coincide when ζ equals
/// `extras["zeta_tight"] = α^{−(q−2)} Tr A² / Tr A^q`.
pub fn check_tiii_conditional(cloud: &AtomCloud, q: f64, zeta: f64) -> Result<InequalityReport, InequalityError> {
    if !(3.0..=8.0).contains(&q) {
        return Err(InequalityError::Params(format!("conditional check needs 3 <= q <= 8, got {q}")));
    }
    if !(zeta > 0.0 && zeta.is_finite()) {
        return Err(InequalityError::Params(format!("zeta must be > 0, got {zeta}")));
    }
    let check = CheckSpec::TiiiConditional { q, zeta };
    let alpha = cloud.meta.alpha;
    if alpha <= 0.0 {
        return Ok(InequalityReport::not_applicable(&check, NEEDS_ALPHA));
    }
    let s = summarize(cloud)?;
    let tr2 = tr_pow(&s, 2.0)?;
    let trq = tr_pow(&s, q)?;
    let hypothesis_bound = alpha.powf(-(q - 2.0)) / zeta * tr2;
    let c = conditional_exponent(q);
    let zeta_tight = alpha.powf(-(q - 2.0)) * tr2 / trq;
    let mut extras = BTreeMap::from([
        ("c".to_string(), c),
        ("tr_a_q".to_string(), trq),
        ("hypothesis_bound".to_string(), hypothesis_bound),
        ("zeta_tight".to_string(), zeta_tight),
    ]);
    if trq > hypothesis_bound {
        let mut r = InequalityReport::not_applicable(&check, "hypothesis Tr A^q <= alpha^-(q-2) zeta^-1 Tr A^2 fails");
        r.extras = extras;
        return Ok(r);
    }
    let n = cloud.dim();
    let observed = t_tensor_exact(cloud, &eye(n), &eye(n), &eye(n))?.value;
    let claimed = 12.0 / (alpha * zeta.powf(c)) * tr2;
    let alternative = 12.0 / alpha.powi(3) * (alpha.powf(q) * trq).powf(c) * (alpha * alpha * tr2).powf(1.0 - c);
    extras.insert("alternative_claimed".into(), alternative);
    let mut r = InequalityReport::new(&check, claimed, observed, discretization_slack(cloud, claimed));
    r.extras = extras;
    Ok(r)
}

/// Separable polynomial `f(x) = c₀ + Σ_k Σ_{d=1}^{4} coefficients[k][d−1] x_k^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub constant: f64,
    /// One row of four coefficients (degrees 1 to 4) per coordinate.
    pub coefficients: Vec<[f64; 4]>,
}

impl TestFunction {
    pub fn zero(dim: usize) -> Self {
        Self { constant: 0.0, coefficients: vec![[0.0; 4]; dim] }
    }

    /// Random coefficients in `[−1, 1]` up to `degree` (1 to 4).
    pub fn random<R: Rng>(dim: usize, degree: usize, rng: &mut R) -> Self {
        let coefficients = (0..dim)
            .map(|_| {
                let mut row = [0.0; 4];
                for c in row.iter_mut().take(degree.min(4)) {
                    *c = rng.random_range(-1.0..=1.0);
                }
                row
            })
            .collect();
        Self { constant: 0.0, coefficients }
    }

    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let mut v = self.constant;
        for (row, &xk) in self.coefficients.iter().zip(x) {
            v += xk * (row[0] + xk * (row[1] + xk * (row[2] + xk * row[3])));
        }
        v
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.coefficients
            .iter()
            .zip(x)
            .map(|(row, &xk)| row[0] + xk * (2.0 * row[1] + xk * (3.0 * row[2] + xk * 4.0 * row[3])))
            .collect()
    }

    /// Shift the linear coefficients so `E ∇f = 0` (each partial derivative
    /// depends on its own coordinate only, and the degree-1 term moves it by a
    /// constant), then the constant so `E f = 0`.
    pub fn projected(&self, cloud: &AtomCloud) -> Result<Self, InequalityError> {
        if self.dim() != cloud.dim() {
            return Err(InequalityError::Params(format!(
                "test function has dimension {}, cloud {}",
                self.dim(),
                cloud.dim()
            )));
        }
        let w = cloud.weights();
        let mut f = self.clone();
        let mut mean_grad = vec![0.0; f.dim()];
        for (i, &wi) in w.iter().enumerate() {
            for (m, g) in mean_grad.iter_mut().zip(f.gradient(cloud.point(i))) {
                *m += wi * g;
            }
        }
        for (row, m) in f.coefficients.iter_mut().zip(&mean_grad) {
            row[0] -= m;
        }
        let mean: f64 = w.iter().enumerate().map(|(i, wi)| wi * f.value(cloud.point(i))).sum();
        f.constant -= mean;
        if !f.constant.is_finite() || f.coefficients.iter().flatten().any(|c| !c.is_finite()) {
            return Err(InequalityError::Projection("non-finite coefficients".into()));
        }
        Ok(f)
    }
}

/// `∫f² ≤ (1/(2α)) ∫‖∇f‖²` for `f` with `∫f = ∫∇f = 0`; `f` is projected first.
pub fn check_half_poincare(cloud: &AtomCloud, f: &TestFunction) -> Result<InequalityReport, InequalityError> {
    let check = CheckSpec::HalfPoincare { f: f.clone() };
    let alpha = cloud.meta.alpha;
    if alpha <= 0.0 {
        return Ok(InequalityReport::not_applicable(&check, NEEDS_ALPHA));
    }
    let g = f.projected(cloud)?;
    let w = cloud.weights();
    let mut observed = 0.0;
    let mut energy = 0.0;
    for (i, &wi) in w.iter().enumerate() {
        let x = cloud.point(i);
        observed += wi * g.value(x).powi(2);
        energy += wi * g.gradient(x).iter().map(|d| d * d).sum::<f64>();
    }
    let claimed = energy / (2.0 * alpha);
    Ok(InequalityReport::new(&check, claimed, observed, discretization_slack(cloud, claimed)))
}

/// `φ'(b) − φ'(a)` for `φ(x) = (x⁺)^q`, without cancellation when `a ≈ b > 0`.
fn xq_derivative_gap(a: f64, b: f64, q: f64) -> f64 {
    if b <= 0.0 {
        0.0
    } else if a <= 0.0 {
        q * b.powf(q - 1.0)
    } else {
        q * a.powf(q - 1.0) * ((q - 1.0) * ((b - a) / a).ln_1p()).exp_m1()
    }
}

/// `(φ'(b) − φ'(a))/(b − a) ≤ (φ''(a) + φ''(b))/2` for `φ(x) = (x⁺)^q`, `q ≥ 3`.
/// Exact scalar inequality: zero slack.
pub fn check_xq_hess(a: f64, b: f64, q: f64) -> Result<InequalityReport, InequalityError> {
    if !(a < b && a.is_finite() && b.is_finite()) {
        return Err(InequalityError::Params(format!("need finite a < b, got a={a}, b={b}")));
    }
    if !(q >= 3.0 && q.is_finite()) {
        return Err(InequalityError::Params(format!("need q >= 3, got {q}")));
    }
    let second = |x: f64| if x > 0.0 { q * (q - 1.0) * x.powf(q - 2.0) } else { 0.0 };
    let observed = xq_derivative_gap(a, b, q) / (b - a);
    let claimed = 0.5 * (second(a) + second(b));
    Ok(InequalityReport::new(&CheckSpec::XqHess { a, b, q }, claimed, observed, 0.0))
}

/// Run `check` on the cloud built from `cloud_spec`, recording both in the
/// descriptor.
pub fn run_check(cloud_spec: Option<&CloudSpec>, check: &CheckSpec) -> Result<InequalityReport, InequalityError> {
    let cloud = match (cloud_spec, check) {
        (_, CheckSpec::XqHess { .. }) => None,
        (Some(spec), _) => Some(spec.build()?),
        (None, _) => return Err(InequalityError::Descriptor("cloud check without a cloud".into())),
    };
    let mut report = run_on_cloud(cloud.as_ref(), check)?;
    report.instance_descriptor = describe(cloud_spec, check);
    Ok(report)
}

fn run_on_cloud(cloud: Option<&AtomCloud>, check: &CheckSpec) -> Result<InequalityReport, InequalityError> {
    let cloud = || cloud.ok_or_else(|| InequalityError::Descriptor("missing cloud".into()));
    match check {
        CheckSpec::Tiii => check_tiii(cloud()?),
        CheckSpec::Taii { q } => check_taii(cloud()?, *q),
        CheckSpec::TiiiConditional { q, zeta } => check_tiii_conditional(cloud()?, *q, *zeta),
        CheckSpec::HalfPoincare { f } => check_half_poincare(cloud()?, f),
        CheckSpec::XqHess { a, b, q } => check_xq_hess(*a, *b, *q),
    }
}

/// Recompute a report from its `instance_descriptor` alone.
pub fn reproduce(descriptor: &str) -> Result<InequalityReport, InequalityError> {
    let inst: Instance =
        serde_json::from_str(descriptor).map_err(|e| InequalityError::Descriptor(e.to_string()))?;
    run_check(inst.cloud.as_ref(), &inst.check)
}

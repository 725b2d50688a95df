//! Log-concave density families and their finite atom-cloud discretizations.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::{extended_f64, fmt_f64, parse_f64};
use crate::quad::{integrate, QuadOptions};

/// Tolerance on `Σ exp(log_weight) = 1` after normalization.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Finite stand-in used for an infinite truncation endpoint when gridding.
pub const TAIL_SENTINEL: f64 = 10.0;

/// Default half-width of a family's grid, in standard deviations.
pub const DEFAULT_GRID_SDS: f64 = 8.0;

/// Mass below which a truncated Gaussian is treated as having no support.
pub const MIN_TRUNCATED_MASS: f64 = 1e-300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DensityError {
    #[error("invalid family parameters: {0}")]
    InvalidParams(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("density is not finite and positive at x = {0:?}")]
    NonFinite(Vec<f64>),
    #[error("degenerate support: normalization mass {0:e} is below 1e-300")]
    DegenerateSupport(f64),
    #[error("unsupported dimension {0} (1 to 3 supported)")]
    Dimension(usize),
    #[error("invalid atom cloud: {0}")]
    InvalidCloud(String),
    #[error("cloud CSV: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyTag {
    Gaussian,
    TruncatedGaussian,
    UniformInterval,
    ExpTilted,
    Custom,
}

impl fmt::Display for FamilyTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FamilyTag::Gaussian => "gaussian",
            FamilyTag::TruncatedGaussian => "truncated_gaussian",
            FamilyTag::UniformInterval => "uniform_interval",
            FamilyTag::ExpTilted => "exp_tilted",
            FamilyTag::Custom => "custom",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMeta {
    pub family: FamilyTag,
    /// Strong log-concavity parameter of the generating continuous family.
    pub alpha: f64,
    /// Largest per-axis grid spacing, for grid discretizations.
    pub grid_spacing: Option<f64>,
}

impl DensityMeta {
    pub fn custom(alpha: f64) -> Self {
        Self { family: FamilyTag::Custom, alpha, grid_spacing: None }
    }
}

/// `exp(-(x - m)²/2) · 1[a, b]`; either endpoint may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedGaussianParams {
    pub m: f64,
    #[serde(with = "extended_f64")]
    pub a: f64,
    #[serde(with = "extended_f64")]
    pub b: f64,
}

impl TruncatedGaussianParams {
    pub fn new(m: f64, a: f64, b: f64) -> Result<Self, DensityError> {
        let p = Self { m, a, b };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), DensityError> {
        if !self.m.is_finite() || self.a.is_nan() || self.b.is_nan() || !(self.a < self.b) {
            return Err(DensityError::InvalidParams(format!(
                "truncated gaussian needs finite m and a < b, got m={}, a={}, b={}",
                self.m, self.a, self.b
            )));
        }
        if self.a == f64::INFINITY || self.b == f64::NEG_INFINITY {
            return Err(DensityError::InvalidParams("empty truncation interval".into()));
        }
        Ok(())
    }

    /// Endpoints relative to the mode, `(a − m, b − m)`.
    pub fn standardized(&self) -> (f64, f64) {
        (self.a - self.m, self.b - self.m)
    }

    /// Mirror image under `x ↦ −x`.
    pub fn reflected(&self) -> Self {
        Self { m: -self.m, a: -self.b, b: -self.a }
    }
}

/// One-dimensional log-concave families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum Family {
    /// `exp(−α (x − mean)² / 2)`.
    Gaussian {
        #[serde(default)]
        mean: f64,
        #[serde(default = "one")]
        alpha: f64,
    },
    TruncatedGaussian(TruncatedGaussianParams),
    UniformInterval { lo: f64, hi: f64 },
    /// `exp(tilt·x − α x²/2 − quartic·x⁴)`, α-strongly log-concave and
    /// asymmetric whenever `tilt ≠ 0` and `quartic > 0`.
    ExpTilted { alpha: f64, tilt: f64, quartic: f64 },
}

fn one() -> f64 {
    1.0
}

impl Family {
    pub fn standard_gaussian() -> Self {
        Family::Gaussian { mean: 0.0, alpha: 1.0 }
    }

    pub fn tag(&self) -> FamilyTag {
        match self {
            Family::Gaussian { .. } => FamilyTag::Gaussian,
            Family::TruncatedGaussian(_) => FamilyTag::TruncatedGaussian,
            Family::UniformInterval { .. } => FamilyTag::UniformInterval,
            Family::ExpTilted { .. } => FamilyTag::ExpTilted,
        }
    }

    pub fn validate(&self) -> Result<(), DensityError> {
        let bad = |msg: String| Err(DensityError::InvalidParams(msg));
        match *self {
            Family::Gaussian { mean, alpha } => {
                if !mean.is_finite() || !(alpha > 0.0 && alpha.is_finite()) {
                    return bad(format!("gaussian needs finite mean and alpha > 0 (mean={mean}, alpha={alpha})"));
                }
            }
            Family::TruncatedGaussian(p) => p.validate()?,
            Family::UniformInterval { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return bad(format!("uniform interval needs finite lo < hi (lo={lo}, hi={hi})"));
                }
            }
            Family::ExpTilted { alpha, tilt, quartic } => {
                if !(alpha >= 0.0 && quartic >= 0.0 && tilt.is_finite() && alpha.is_finite() && quartic.is_finite())
                    || (alpha == 0.0 && quartic == 0.0)
                {
                    return bad(format!(
                        "exp_tilted needs alpha >= 0, quartic >= 0, not both zero (alpha={alpha}, quartic={quartic})"
                    ));
                }
            }
        }
        Ok(())
    }

    /// Strong log-concavity parameter of the continuous family.
    pub fn alpha(&self) -> f64 {
        match *self {
            Family::Gaussian { alpha, .. } => alpha,
            Family::TruncatedGaussian(_) => 1.0,
            Family::UniformInterval { .. } => 0.0,
            Family::ExpTilted { alpha, .. } => alpha,
        }
    }

    /// Unnormalized log density; `-∞` outside the support.
    pub fn log_density(&self, x: f64) -> f64 {
        match *self {
            Family::Gaussian { mean, alpha } => -0.5 * alpha * (x - mean).powi(2),
            Family::TruncatedGaussian(p) => {
                if x < p.a || x > p.b {
                    f64::NEG_INFINITY
                } else {
                    -0.5 * (x - p.m).powi(2)
                }
            }
            Family::UniformInterval { lo, hi } => {
                if x < lo || x > hi {
                    f64::NEG_INFINITY
                } else {
                    0.0
                }
            }
            Family::ExpTilted { alpha, tilt, quartic } => tilt * x - 0.5 * alpha * x * x - quartic * x.powi(4),
        }
    }

    /// Grid bounds: the support clipped to ±8 standard deviations around the
    /// center, with infinite truncation endpoints replaced by `m ± 10`.
    pub fn default_bounds(&self) -> (f64, f64) {
        match *self {
            Family::Gaussian { mean, alpha } => {
                let sd = alpha.sqrt().recip();
                (mean - DEFAULT_GRID_SDS * sd, mean + DEFAULT_GRID_SDS * sd)
            }
            Family::TruncatedGaussian(p) => {
                let lo = if p.a.is_finite() { p.a } else { p.m - TAIL_SENTINEL };
                let hi = if p.b.is_finite() { p.b } else { p.m + TAIL_SENTINEL };
                (lo.max(p.m - TAIL_SENTINEL).min(p.b), hi.min(p.m + TAIL_SENTINEL).max(p.a))
            }
            Family::UniformInterval { lo, hi } => (lo, hi),
            Family::ExpTilted { alpha, tilt, quartic } => {
                // Mode of the potential, then a width from its curvature there.
                let mode = exp_tilted_mode(alpha, tilt, quartic);
                let curvature = alpha + 12.0 * quartic * mode * mode;
                let sd = curvature.sqrt().recip();
                (mode - DEFAULT_GRID_SDS * sd, mode + DEFAULT_GRID_SDS * sd)
            }
        }
    }
}

fn exp_tilted_mode(alpha: f64, tilt: f64, quartic: f64) -> f64 {
    // Solve tilt − α x − 4 quartic x³ = 0 by Newton from the Gaussian mode.
    let mut x = if alpha > 0.0 { tilt / alpha } else { (tilt / (4.0 * quartic)).cbrt() };
    for _ in 0..100 {
        let g = tilt - alpha * x - 4.0 * quartic * x.powi(3);
        let dg = -alpha - 12.0 * quartic * x * x;
        let step = g / dg;
        x -= step;
        if step.abs() < 1e-15 * (1.0 + x.abs()) {
            break;
        }
    }
    x
}

/// Weighted finite point set in ℝⁿ; weights are kept as normalized logs.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomCloud {
    dim: usize,
    points: Vec<f64>,
    log_weights: Vec<f64>,
    pub meta: DensityMeta,
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

impl AtomCloud {
    /// Build from row-major `points` (length `N·dim`) and unnormalized log weights.
    pub fn new(dim: usize, points: Vec<f64>, log_weights: Vec<f64>, meta: DensityMeta) -> Result<Self, DensityError> {
        if dim == 0 {
            return Err(DensityError::InvalidCloud("dimension must be at least 1".into()));
        }
        if points.len() != dim * log_weights.len() {
            return Err(DensityError::InvalidCloud(format!(
                "{} coordinates do not match {} atoms in dimension {dim}",
                points.len(),
                log_weights.len()
            )));
        }
        if log_weights.len() < 2 {
            return Err(DensityError::InvalidCloud("need at least 2 atoms".into()));
        }
        if let Some(i) = points.iter().position(|x| !x.is_finite()) {
            return Err(DensityError::NonFinite(points[i / dim * dim..i / dim * dim + dim].to_vec()));
        }
        if log_weights.iter().any(|w| w.is_nan() || *w == f64::INFINITY) {
            return Err(DensityError::InvalidCloud("log weights must be finite or -inf".into()));
        }
        if !(meta.alpha >= 0.0) {
            return Err(DensityError::InvalidParams(format!("alpha must be >= 0, got {}", meta.alpha)));
        }
        if matches!(meta.grid_spacing, Some(h) if !(h > 0.0)) {
            return Err(DensityError::InvalidGrid("grid spacing must be > 0".into()));
        }
        let mut cloud = Self { dim, points, log_weights, meta };
        cloud.normalize()?;
        Ok(cloud)
    }

    pub fn from_points(points: &[Vec<f64>], weights: &[f64], meta: DensityMeta) -> Result<Self, DensityError> {
        let dim = points.first().map_or(0, Vec::len);
        if points.iter().any(|p| p.len() != dim) {
            return Err(DensityError::InvalidCloud("points have mixed dimensions".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(DensityError::InvalidCloud("weights must be non-negative".into()));
        }
        let flat = points.iter().flatten().copied().collect();
        Self::new(dim, flat, weights.iter().map(|w| w.ln()).collect(), meta)
    }

    fn normalize(&mut self) -> Result<(), DensityError> {
        let lse = log_sum_exp(&self.log_weights);
        if !lse.is_finite() {
            return Err(DensityError::InvalidCloud("total mass is zero or infinite".into()));
        }
        for w in &mut self.log_weights {
            *w -= lse;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// Row-major coordinates, `len() * dim()` values.
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|w| w.exp()).collect()
    }

    /// Same atoms with new (unnormalized) log weights.
    pub fn reweighted(&self, log_weights: Vec<f64>) -> Result<Self, DensityError> {
        Self::new(self.dim, self.points.clone(), log_weights, self.meta.clone())
    }

    /// Write as CSV with columns `x_1..x_n,log_weight`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (1..=self.dim).map(|k| format!("x_{k}")).collect();
        out.push_str(&header.join(","));
        out.push_str(",log_weight\n");
        for i in 0..self.len() {
            for x in self.point(i) {
                out.push_str(&fmt_f64(*x));
                out.push(',');
            }
            out.push_str(&fmt_f64(self.log_weights[i]));
            out.push('\n');
        }
        out
    }

    /// Parse the CSV written by [`AtomCloud::to_csv`]; lines starting with `#`
    /// are comments. The loaded cloud is tagged `custom` with the given α.
    pub fn from_csv(text: &str, alpha: f64) -> Result<Self, DensityError> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| DensityError::Csv("missing header".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.len() < 2 || cols.last() != Some(&"log_weight") {
            return Err(DensityError::Csv(format!("unexpected header {header:?}")));
        }
        let dim = cols.len() - 1;
        for (k, c) in cols[..dim].iter().enumerate() {
            if *c != format!("x_{}", k + 1) {
                return Err(DensityError::Csv(format!("unexpected column {c:?}")));
            }
        }
        let mut points = Vec::new();
        let mut log_weights = Vec::new();
        for (row, line) in lines.enumerate() {
            let vals = line
                .split(',')
                .map(|t| parse_f64(t).map_err(|e| DensityError::Csv(format!("row {}: {e}", row + 1))))
                .collect::<Result<Vec<f64>, _>>()?;
            if vals.len() != dim + 1 {
                return Err(DensityError::Csv(format!("row {} has {} fields", row + 1, vals.len())));
            }
            points.extend_from_slice(&vals[..dim]);
            log_weights.push(vals[dim]);
        }
        Self::new(dim, points, log_weights, DensityMeta::custom(alpha))
    }
}

/// `n` cell centers of a uniform partition of `[lo, hi]`, and its spacing.
fn cell_centers(lo: f64, hi: f64, n: usize) -> Result<(Vec<f64>, f64), DensityError> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(DensityError::InvalidGrid(format!("need finite lo < hi, got [{lo}, {hi}]")));
    }
    if n < 2 {
        return Err(DensityError::InvalidGrid(format!("need at least 2 atoms per axis, got {n}")));
    }
    let h = (hi - lo) / n as f64;
    Ok(((0..n).map(|i| lo + (i as f64 + 0.5) * h).collect(), h))
}

/// Discretize a 1-D family on `n_atoms` cell centers of `[lo, hi]`, weight
/// `density(x) · spacing`, then normalize.
pub fn discretize_1d(family: &Family, lo: f64, hi: f64, n_atoms: usize) -> Result<AtomCloud, DensityError> {
    discretize_product(&[(family.clone(), lo, hi, n_atoms)])
}

/// Tensor-grid discretization of the product of two 1-D families.
pub fn discretize_2d(
    factors: [&Family; 2],
    bounds: [(f64, f64); 2],
    n_per_axis: usize,
) -> Result<AtomCloud, DensityError> {
    discretize_product(&[
        (factors[0].clone(), bounds[0].0, bounds[0].1, n_per_axis),
        (factors[1].clone(), bounds[1].0, bounds[1].1, n_per_axis),
    ])
}

/// Tensor-grid discretization of a product density in 1 to 3 dimensions.
/// Each axis is `(family, lo, hi, n)`; α of the product is the minimum α.
pub fn discretize_product(axes: &[(Family, f64, f64, usize)]) -> Result<AtomCloud, DensityError> {
    let dim = axes.len();
    if !(1..=3).contains(&dim) {
        return Err(DensityError::Dimension(dim));
    }
    let mut grids = Vec::with_capacity(dim);
    let mut spacing = 0.0_f64;
    for (family, lo, hi, n) in axes {
        family.validate()?;
        let (centers, h) = cell_centers(*lo, *hi, *n)?;
        spacing = spacing.max(h);
        let logs: Vec<f64> = centers.iter().map(|&x| family.log_density(x) + h.ln()).collect();
        if let Some(i) = logs.iter().position(|l| !l.is_finite()) {
            return Err(DensityError::NonFinite(vec![centers[i]]));
        }
        grids.push((centers, logs));
    }
    let total: usize = grids.iter().map(|g| g.0.len()).product();
    let mut points = Vec::with_capacity(total * dim);
    let mut log_weights = Vec::with_capacity(total);
    let mut idx = vec![0usize; dim];
    for _ in 0..total {
        let mut lw = 0.0;
        for (k, &i) in idx.iter().enumerate() {
            points.push(grids[k].0[i]);
            lw += grids[k].1[i];
        }
        log_weights.push(lw);
        // Odometer increment, last axis fastest.
        for k in (0..dim).rev() {
            idx[k] += 1;
            if idx[k] < grids[k].0.len() {
                break;
            }
            idx[k] = 0;
        }
    }
    let family = if dim == 1 { axes[0].0.tag() } else { FamilyTag::Custom };
    let alpha = axes.iter().map(|a| a.0.alpha()).fold(f64::INFINITY, f64::min);
    AtomCloud::new(dim, points, log_weights, DensityMeta { family, alpha, grid_spacing: Some(spacing) })
}

/// Grid for one axis of a [`CloudSpec`]; missing bounds default to the
/// family's [`Family::default_bounds`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    #[serde(flatten)]
    pub family: Family,
    pub grid: GridSpec,
}

impl AxisSpec {
    fn resolve(&self) -> (Family, f64, f64, usize) {
        let (dlo, dhi) = self.family.default_bounds();
        (self.family.clone(), self.grid.lo.unwrap_or(dlo), self.grid.hi.unwrap_or(dhi), self.grid.n)
    }
}

/// JSON description of a discretized density: either a single family
/// `{"family": ..., "params": {...}, "grid": {"lo", "hi", "n"}}` or a product
/// `{"product": [<axis>, ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CloudSpec {
    Product { product: Vec<AxisSpec> },
    Single(AxisSpec),
}

impl CloudSpec {
    pub fn single(family: Family, n: usize) -> Self {
        CloudSpec::Single(AxisSpec { family, grid: GridSpec { lo: None, hi: None, n } })
    }

    pub fn build(&self) -> Result<AtomCloud, DensityError> {
        match self {
            CloudSpec::Single(axis) => discretize_product(&[axis.resolve()]),
            CloudSpec::Product { product } => {
                let axes: Vec<_> = product.iter().map(AxisSpec::resolve).collect();
                discretize_product(&axes)
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("cloud spec serializes")
    }
}

/// Mean, variance and third central moment of a truncated unit Gaussian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TgMoments {
    pub mean: f64,
    pub variance: f64,
    pub third_central: f64,
    /// Standard-normal probability of `[a − m, b − m]`.
    pub mass: f64,
}

fn std_normal_pdf(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
    }
}

/// Upper tail `P[Z > x]`.
fn std_normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// `P[lo ≤ Z ≤ hi]` without cancellation in either tail.
fn std_normal_mass(lo: f64, hi: f64) -> f64 {
    if lo >= 0.0 {
        std_normal_sf(lo) - std_normal_sf(hi)
    } else if hi <= 0.0 {
        std_normal_sf(-hi) - std_normal_sf(-lo)
    } else {
        1.0 - std_normal_sf(hi) - std_normal_sf(-lo)
    }
}

/// Moments of `exp(−(x − m)²/2)·1[a, b]`, infinite endpoints allowed.
///
/// Uses the integration-by-parts recursion for `D_k = E[(X − c)^k]` of a
/// standard normal restricted to `[α, β]`:
///
/// `D_{k+1} = k D_{k−1} − c D_k − ((β − c)^k φ(β) − (α − c)^k φ(α)) / Z`,
///
/// centred at `c` ≈ the mean (found by a first pass) so that the central
/// moments come out without large cancellations. The boundary terms are
/// `O(1/Z)` while the central moments of a short interval are `O(width^k)`,
/// so finite intervals are integrated directly instead.
pub fn tg_moments(p: &TruncatedGaussianParams) -> Result<TgMoments, DensityError> {
    p.validate()?;
    let (lo, hi) = p.standardized();
    if lo.is_finite() && hi.is_finite() {
        let mut m = finite_moments(lo, hi)?;
        m.mean += p.m;
        return Ok(m);
    }
    let mass = std_normal_mass(lo, hi);
    if !(mass >= MIN_TRUNCATED_MASS) {
        return Err(DensityError::DegenerateSupport(mass));
    }
    let (pdf_lo, pdf_hi) = (std_normal_pdf(lo), std_normal_pdf(hi));
    // (x − c)^k φ(x) with the convention ∞^k · 0 = 0.
    let boundary = |x: f64, pdf: f64, c: f64, k: i32| if pdf == 0.0 { 0.0 } else { (x - c).powi(k) * pdf };
    let shifted = |c: f64| -> [f64; 4] {
        let mut d = [1.0, 0.0, 0.0, 0.0];
        for k in 0..3 {
            let prev = if k == 0 { 0.0 } else { d[k - 1] };
            let edge = (boundary(hi, pdf_hi, c, k as i32) - boundary(lo, pdf_lo, c, k as i32)) / mass;
            d[k + 1] = k as f64 * prev - c * d[k] - edge;
        }
        d
    };
    let guess = match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (true, false) => lo.max(0.0),
        (false, true) => hi.min(0.0),
        (false, false) => 0.0,
    };
    let center = guess + shifted(guess)[1];
    let d = shifted(center);
    let shift = d[1];
    let variance = (d[2] - shift * shift).max(0.0);
    let third_central = d[3] - 3.0 * shift * d[2] + 2.0 * shift.powi(3);
    Ok(TgMoments { mean: p.m + center + shift, variance, third_central, mass })
}

/// Standard normal on finite `[lo, hi]` by adaptive quadrature, two passes.
fn finite_moments(lo: f64, hi: f64) -> Result<TgMoments, DensityError> {
    // Density relative to its maximum on the interval, and clipped where it
    // is below e^{-800}.
    let peak = 0.0f64.clamp(lo, hi);
    let (lo_c, hi_c) = (lo.max(peak - 40.0), hi.min(peak + 40.0));
    let g = |x: f64| (-0.5 * (x - peak) * (x + peak)).exp();
    let mid = 0.5 * (lo_c + hi_c);
    let half = 0.5 * (hi_c - lo_c);
    let quad = |f: &dyn Fn(f64) -> f64, scale: f64| {
        let opts = QuadOptions { abs_tol: 1e-15 * scale, rel_tol: 1e-13, ..QuadOptions::default() };
        integrate(f, lo_c, hi_c, opts)
            .map(|r| r.value)
            .map_err(|e| DensityError::InvalidParams(format!("truncated Gaussian quadrature: {e}")))
    };
    let z = quad(&g, half)?;
    let mass = z * std_normal_pdf(peak);
    if !(mass >= MIN_TRUNCATED_MASS) {
        return Err(DensityError::DegenerateSupport(mass));
    }
    let mean = mid + quad(&|x| (x - mid) * g(x), half * z)? / z;
    let variance = quad(&|x| (x - mean).powi(2) * g(x), half.powi(2) * z)? / z;
    let third_central = quad(&|x| (x - mean).powi(3) * g(x), half.powi(3) * z)? / z;
    Ok(TgMoments { mean, variance, third_central, mass })
}

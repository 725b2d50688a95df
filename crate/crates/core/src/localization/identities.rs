//! Ensemble statistics and statistical tests of the localization identities.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Process, StateSnapshot, Trajectory};
use crate::linalg::SortedEigen;

/// Pass threshold on `|z|` for the derivative identities.
pub const IDENTITY_Z: f64 = 3.0;
/// Pass threshold on `|z|` for the per-atom martingale test.
pub const MARTINGALE_Z: f64 = 4.0;
/// Pass threshold on `|z|` for entrywise covariance decay.
pub const COV_DECAY_Z: f64 = 4.0;
/// Atoms whose weight has effective sample size (over paths) below this are
/// too heavy-tailed for a normal-approximation z-test and are reported as
/// unresolved instead of tested.
pub const MARTINGALE_MIN_ESS: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStat {
    pub t: f64,
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    // Identical samples (every path at t = 0) must give their value and a zero
    // error exactly, not the roundoff of summing them.
    if xs.iter().all(|x| *x == xs[0]) {
        return (xs[0], 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Snapshot `k` of every path that reached it, in path order.
fn column(trajectories: &[Trajectory], k: usize) -> Vec<&StateSnapshot> {
    trajectories.iter().filter_map(|t| t.snapshots.get(k)).collect()
}

fn n_snapshots(trajectories: &[Trajectory]) -> usize {
    trajectories.iter().map(|t| t.snapshots.len()).max().unwrap_or(0)
}

/// Ensemble mean and standard error of a per-snapshot scalar.
pub fn ensemble_scalar(trajectories: &[Trajectory], f: impl Fn(&StateSnapshot) -> f64) -> Vec<EnsembleStat> {
    (0..n_snapshots(trajectories))
        .map(|k| {
            let col = column(trajectories, k);
            let vals: Vec<f64> = col.iter().map(|s| f(s)).collect();
            let (mean, std_error) = mean_se(&vals);
            EnsembleStat { t: col[0].t, mean, std_error, n: vals.len() }
        })
        .collect()
}

/// Entrywise ensemble mean and standard error of `A_t`, row-major.
pub fn ensemble_cov(trajectories: &[Trajectory]) -> Vec<(f64, Vec<f64>, Vec<f64>)> {
    (0..n_snapshots(trajectories))
        .map(|k| {
            let col = column(trajectories, k);
            let len = col[0].cov.len();
            let mut mean = Vec::with_capacity(len);
            let mut se = Vec::with_capacity(len);
            for e in 0..len {
                let vals: Vec<f64> = col.iter().map(|s| s.cov[e]).collect();
                let (m, s) = mean_se(&vals);
                mean.push(m);
                se.push(s);
            }
            (col[0].t, mean, se)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub identity: String,
    pub window: [f64; 2],
    pub n_paths: usize,
    pub n_intervals: usize,
    /// Ensemble `E f(t1) − E f(t0)`.
    pub lhs_increment: f64,
    /// Quadrature of the ensemble predicted slope over the window.
    pub rhs_integral: f64,
    /// Mean over paths of the per-path residual (increment minus quadrature).
    pub mean_residual: f64,
    pub std_error: f64,
    /// Estimated quadrature error: |three-point interpolatory − midpoint| on
    /// the ensemble curve, summed over intervals.
    pub discretization_error: f64,
    pub z: f64,
    pub pass: bool,
}

fn z_score(residual: f64, se: f64, disc: f64) -> f64 {
    let denom = (se * se + disc * disc).sqrt();
    if denom > 0.0 {
        residual / denom
    } else if residual == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(residual)
    }
}

/// Interpolatory quadrature on three (possibly uneven) nodes.
fn three_point(t: [f64; 3], g: [f64; 3]) -> f64 {
    let (h0, h1) = (t[1] - t[0], t[2] - t[1]);
    let h = h0 + h1;
    h / 6.0 * ((2.0 - h1 / h0) * g[0] + h * h / (h0 * h1) * g[1] + (2.0 - h0 / h1) * g[2])
}

/// Tests `E f(t) − E f(t0) = ∫ E g` over the snapshots inside `window`.
///
/// Consecutive snapshot triples `(t_k, t_{k+1}, t_{k+2})` contribute the
/// per-path residual `f(t_{k+2}) − f(t_k) − (t_{k+2} − t_k) g(t_{k+1})`; a
/// leftover pair uses the trapezoid rule. The z-score divides the mean
/// residual by the combined statistical and quadrature error.
fn integral_identity(
    name: &str,
    trajectories: &[Trajectory],
    window: (f64, f64),
    f: impl Fn(&StateSnapshot) -> f64,
    g: impl Fn(&StateSnapshot) -> f64,
) -> IdentityReport {
    let eps = 1e-9 * window.1.abs().max(1.0);
    let complete: Vec<&Trajectory> = {
        let k = n_snapshots(trajectories);
        trajectories.iter().filter(|t| t.snapshots.len() == k).collect()
    };
    let times: Vec<f64> = complete.first().map(|t| t.snapshots.iter().map(|s| s.t).collect()).unwrap_or_default();
    let idx: Vec<usize> =
        (0..times.len()).filter(|&k| times[k] >= window.0 - eps && times[k] <= window.1 + eps).collect();
    let mut report = IdentityReport {
        identity: name.to_string(),
        window: [window.0, window.1],
        n_paths: complete.len(),
        n_intervals: 0,
        lhs_increment: 0.0,
        rhs_integral: 0.0,
        mean_residual: 0.0,
        std_error: 0.0,
        discretization_error: 0.0,
        z: 0.0,
        pass: false,
    };
    if idx.len() < 2 || complete.is_empty() {
        report.z = f64::NAN;
        return report;
    }

    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut i = 0;
    while i + 2 < idx.len() {
        groups.push(vec![idx[i], idx[i + 1], idx[i + 2]]);
        i += 2;
    }
    if i + 1 < idx.len() {
        groups.push(vec![idx[i], idx[i + 1]]);
    }
    report.n_intervals = groups.len();

    let residuals: Vec<f64> = complete
        .iter()
        .map(|tr| {
            let s = &tr.snapshots;
            groups
                .iter()
                .map(|gr| match gr.as_slice() {
                    [a, m, b] => f(&s[*b]) - f(&s[*a]) - (s[*b].t - s[*a].t) * g(&s[*m]),
                    [a, b] => f(&s[*b]) - f(&s[*a]) - 0.5 * (s[*b].t - s[*a].t) * (g(&s[*a]) + g(&s[*b])),
                    _ => unreachable!(),
                })
                .sum()
        })
        .collect();
    let (mean_residual, std_error) = mean_se(&residuals);

    let mean_f = |k: usize| complete.iter().map(|t| f(&t.snapshots[k])).sum::<f64>() / complete.len() as f64;
    let mean_g = |k: usize| complete.iter().map(|t| g(&t.snapshots[k])).sum::<f64>() / complete.len() as f64;
    let mut rhs = 0.0;
    let mut disc = 0.0;
    for gr in &groups {
        match gr.as_slice() {
            [a, m, b] => {
                let mid = (times[*b] - times[*a]) * mean_g(*m);
                let simpson = three_point([times[*a], times[*m], times[*b]], [mean_g(*a), mean_g(*m), mean_g(*b)]);
                rhs += mid;
                disc += (simpson - mid).abs();
            }
            [a, b] => rhs += 0.5 * (times[*b] - times[*a]) * (mean_g(*a) + mean_g(*b)),
            _ => unreachable!(),
        }
    }
    report.lhs_increment = mean_f(*idx.last().unwrap()) - mean_f(idx[0]);
    report.rhs_integral = rhs;
    report.mean_residual = mean_residual;
    report.std_error = std_error;
    report.discretization_error = disc;
    report.z = z_score(mean_residual, std_error, disc);
    report.pass = report.z.abs() <= IDENTITY_Z;
    report
}

/// `d/dt E‖a_t‖² = E Tr A_t²` (LV) or `= E Tr A_t` (Eldan, where `da = A^{1/2} dW`).
pub fn check_mean_energy_identity(trajectories: &[Trajectory], window: (f64, f64), process: Process) -> IdentityReport {
    match process {
        Process::Lv => integral_identity("mean_energy_lv", trajectories, window, |s| s.mean_norm_sq, |s| s.tr_a2),
        Process::Eldan => {
            integral_identity("mean_energy_eldan", trajectories, window, |s| s.mean_norm_sq, |s| s.tr_a)
        }
    }
}

/// LV: `d/dt E Tr A_t² = E(−2 Tr A_t³ + T_t(I, I, I))`.
pub fn check_tr2_derivative_identity(trajectories: &[Trajectory], window: (f64, f64)) -> IdentityReport {
    integral_identity("tr_a2_derivative_lv", trajectories, window, |s| s.tr_a2, |s| -2.0 * s.tr_a3 + s.t_iii)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleSnapshot {
    pub t: f64,
    pub n_tested: usize,
    pub n_unresolved: usize,
    pub max_abs_z: f64,
    pub worst_atom: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleReport {
    pub snapshots: Vec<MartingaleSnapshot>,
    pub threshold: f64,
    pub min_ess: f64,
    pub pass: bool,
}

/// Per-atom test of `E w_i(t) = w_i(0)`; needs recorded log-weights.
pub fn check_weight_martingale(trajectories: &[Trajectory], initial_log_weights: &[f64]) -> MartingaleReport {
    let w0: Vec<f64> = initial_log_weights.iter().map(|l| l.exp()).collect();
    let mut snapshots = Vec::new();
    for k in 0..n_snapshots(trajectories) {
        let col = column(trajectories, k);
        let p = col.len() as f64;
        let mut snap = MartingaleSnapshot { t: col[0].t, n_tested: 0, n_unresolved: 0, max_abs_z: 0.0, worst_atom: None };
        for (i, &target) in w0.iter().enumerate() {
            let ws: Vec<f64> = col.iter().map(|s| s.log_weights[i].exp()).collect();
            let sum: f64 = ws.iter().sum();
            let sum_sq: f64 = ws.iter().map(|w| w * w).sum();
            let ess = if sum_sq > 0.0 { sum * sum / sum_sq } else { 0.0 };
            let (mean, se) = mean_se(&ws);
            // All paths agreeing exactly (e.g. at t = 0) is a resolved zero.
            let degenerate = se == 0.0 && mean == target;
            if ess < MARTINGALE_MIN_ESS.min(p) && !degenerate {
                snap.n_unresolved += 1;
                continue;
            }
            snap.n_tested += 1;
            let z = z_score(mean - target, se, 0.0).abs();
            if z > snap.max_abs_z || snap.worst_atom.is_none() {
                snap.max_abs_z = snap.max_abs_z.max(z);
                snap.worst_atom = Some(i);
            }
        }
        snapshots.push(snap);
    }
    let pass = snapshots.iter().all(|s| s.max_abs_z <= MARTINGALE_Z);
    MartingaleReport { snapshots, threshold: MARTINGALE_Z, min_ess: MARTINGALE_MIN_ESS, pass }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovDecayEntry {
    pub observed: f64,
    pub expected: f64,
    pub std_error: f64,
    pub discretization_error: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovDecayPoint {
    pub t: f64,
    pub entries: Vec<CovDecayEntry>,
    pub max_abs_z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovDecayReport {
    pub points: Vec<CovDecayPoint>,
    pub threshold: f64,
    pub pass: bool,
}

/// Eldan: `E A_t = e^{−t} A_0` entrywise.
///
/// With `fine` — the same ensemble at `dt/2` on the same Brownian paths — the
/// first-order time-discretization error of `coarse` is estimated as
/// `2·|E A(dt) − E A(dt/2)|` and added in quadrature to the standard error.
pub fn check_cov_decay(coarse: &[Trajectory], fine: Option<&[Trajectory]>, a0: &[f64]) -> CovDecayReport {
    let c = ensemble_cov(coarse);
    let f = fine.map(ensemble_cov);
    let points: Vec<CovDecayPoint> = c
        .iter()
        .enumerate()
        .map(|(k, (t, mean, se))| {
            let entries: Vec<CovDecayEntry> = (0..mean.len())
                .map(|e| {
                    let expected = (-t).exp() * a0[e];
                    let disc = f.as_ref().map_or(0.0, |f| 2.0 * (mean[e] - f[k].1[e]).abs());
                    CovDecayEntry {
                        observed: mean[e],
                        expected,
                        std_error: se[e],
                        discretization_error: disc,
                        z: z_score(mean[e] - expected, se[e], disc),
                    }
                })
                .collect();
            let max_abs_z = entries.iter().map(|e| e.z.abs()).fold(0.0, f64::max);
            CovDecayPoint { t: *t, entries, max_abs_z }
        })
        .collect();
    let pass = points.iter().all(|p| p.max_abs_z <= COV_DECAY_Z);
    CovDecayReport { points, threshold: COV_DECAY_Z, pass }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneStep {
    pub t0: f64,
    pub t1: f64,
    /// Largest eigenvalue of `E A_{t1} − E A_{t0}`.
    pub max_eigen_increase: f64,
    /// Three times the Frobenius norm of the entrywise standard errors of the
    /// paired difference.
    pub tolerance: f64,
    pub pass: bool,
}

/// LV: `E A_t` is non-increasing in the PSD order across snapshots.
pub fn check_cov_psd_decreasing(trajectories: &[Trajectory]) -> Vec<MonotoneStep> {
    let complete: Vec<&Trajectory> = {
        let k = n_snapshots(trajectories);
        trajectories.iter().filter(|t| t.snapshots.len() == k).collect()
    };
    let Some(first) = complete.first() else { return Vec::new() };
    let len = first.snapshots[0].cov.len();
    let dim = (len as f64).sqrt().round() as usize;
    (1..first.snapshots.len())
        .map(|k| {
            let mut mean = DMatrix::zeros(dim, dim);
            let mut se_sq = 0.0;
            for e in 0..len {
                let diffs: Vec<f64> =
                    complete.iter().map(|t| t.snapshots[k].cov[e] - t.snapshots[k - 1].cov[e]).collect();
                let (m, s) = mean_se(&diffs);
                mean[(e / dim, e % dim)] = m;
                se_sq += s * s;
            }
            let max_eigen_increase = SortedEigen::new(&mean).values[0];
            let tolerance = 3.0 * se_sq.sqrt();
            MonotoneStep {
                t0: first.snapshots[k - 1].t,
                t1: first.snapshots[k].t,
                max_eigen_increase,
                tolerance,
                pass: max_eigen_increase <= tolerance,
            }
        })
        .collect()
}

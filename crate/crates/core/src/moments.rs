//! Means, covariances, spectral functionals and the tensor functional
//! `T(M1, M2, M3) = E_{x,y} Π_k (x − a)ᵀ M_k (y − a)` on atom clouds.

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use twofloat::TwoFloat;

use crate::density::AtomCloud;
use crate::linalg::{check_symmetric, LinalgError, SortedEigen};
use crate::rng;

/// Eigenvalues in `[−PSD_TOL, 0)` are round-off and clamp to zero.
pub const PSD_TOL: f64 = 1e-10;

/// Minimum number of pairs for the Monte Carlo tensor estimator.
pub const MIN_MC_PAIRS: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum MomentsError {
    #[error("covariance is not PSD: eigenvalue {0:e} < -1e-10")]
    NotPsd(f64),
    #[error("non-finite moment in input")]
    NonFinite,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("need at least {MIN_MC_PAIRS} pairs, got {0}")]
    TooFewPairs(usize),
    #[error("q must be >= 1, got {0}")]
    BadExponent(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone)]
pub struct CovarianceSummary {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// Descending.
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl CovarianceSummary {
    pub fn from_mean_cov(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self, MomentsError> {
        if mean.iter().chain(cov.iter()).any(|x| !x.is_finite()) {
            return Err(MomentsError::NonFinite);
        }
        if cov.nrows() != mean.len() {
            return Err(MomentsError::Dimension { expected: mean.len(), got: cov.nrows() });
        }
        let cov = (&cov + cov.transpose()) * 0.5;
        let eig = SortedEigen::new(&cov);
        Ok(Self { mean, cov, eigenvalues: eig.values, eigenvectors: eig.vectors })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Eigenvalues with round-off negatives clamped to 0.
    pub fn clamped_eigenvalues(&self) -> Result<Vec<f64>, MomentsError> {
        clamp_eigenvalues(&self.eigenvalues)
    }

    /// `A^s` formed spectrally (clamped eigenvalues).
    pub fn cov_pow(&self, s: f64) -> Result<DMatrix<f64>, MomentsError> {
        let vals = self.clamped_eigenvalues()?;
        let eig = SortedEigen { values: vals, vectors: self.eigenvectors.clone() };
        Ok(eig.map(|l| if l == 0.0 && s <= 0.0 { 0.0 } else { l.powf(s) }))
    }

    pub fn mean_norm_sq(&self) -> f64 {
        self.mean.norm_squared()
    }
}

pub fn clamp_eigenvalues(values: &[f64]) -> Result<Vec<f64>, MomentsError> {
    values
        .iter()
        .map(|&l| {
            if l >= 0.0 {
                Ok(l)
            } else if l >= -PSD_TOL {
                Ok(0.0)
            } else {
                Err(MomentsError::NotPsd(l))
            }
        })
        .collect()
}

/// Weighted mean and covariance of row-major `points` (`weights` sum to 1).
pub fn weighted_mean_cov(points: &[f64], dim: usize, weights: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let mut mean = DVector::zeros(dim);
    for (x, &w) in points.chunks_exact(dim).zip(weights) {
        for k in 0..dim {
            mean[k] += w * x[k];
        }
    }
    let mut cov = DMatrix::zeros(dim, dim);
    let mut y = vec![0.0; dim];
    for (x, &w) in points.chunks_exact(dim).zip(weights) {
        for k in 0..dim {
            y[k] = x[k] - mean[k];
        }
        for r in 0..dim {
            for s in 0..=r {
                cov[(r, s)] += w * y[r] * y[s];
            }
        }
    }
    for r in 0..dim {
        for s in 0..r {
            cov[(s, r)] = cov[(r, s)];
        }
    }
    (mean, cov)
}

pub fn summarize(cloud: &AtomCloud) -> Result<CovarianceSummary, MomentsError> {
    let (mean, cov) = weighted_mean_cov(cloud.points(), cloud.dim(), &cloud.weights());
    CovarianceSummary::from_mean_cov(mean, cov)
}

fn check_q(q: f64) -> Result<(), MomentsError> {
    if q >= 1.0 && q.is_finite() {
        Ok(())
    } else {
        Err(MomentsError::BadExponent(q))
    }
}

/// `Tr A^q = Σ λ_i^q`.
pub fn tr_pow(summary: &CovarianceSummary, q: f64) -> Result<f64, MomentsError> {
    check_q(q)?;
    Ok(summary.clamped_eigenvalues()?.iter().map(|l| l.powf(q)).sum())
}

/// `Tr ((A − bI)⁺)^q = Σ max(λ_i − b, 0)^q`.
pub fn plus_part_pow(summary: &CovarianceSummary, q: f64, b: f64) -> Result<f64, MomentsError> {
    check_q(q)?;
    Ok(summary.clamped_eigenvalues()?.iter().map(|l| (l - b).max(0.0).powf(q)).sum())
}

/// Largest eigenvalue of the covariance.
pub fn op_norm(summary: &CovarianceSummary) -> Result<f64, MomentsError> {
    Ok(summary.clamped_eigenvalues()?.first().copied().unwrap_or(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TensorEstimate {
    pub value: f64,
    /// Zero for exact evaluation.
    pub std_error: f64,
    pub n_pairs: u64,
}

fn check_matrices(dim: usize, ms: [&DMatrix<f64>; 3]) -> Result<(), MomentsError> {
    for m in ms {
        if m.nrows() != dim || m.ncols() != dim {
            return Err(MomentsError::Dimension { expected: dim, got: m.nrows().max(m.ncols()) });
        }
        check_symmetric(m, 1e-10)?;
    }
    Ok(())
}

fn is_identity(m: &DMatrix<f64>) -> bool {
    m.iter().enumerate().all(|(k, &x)| x == if k % (m.nrows() + 1) == 0 { 1.0 } else { 0.0 })
}

/// Centered coordinates `x_i − a`, row-major.
fn centered(cloud: &AtomCloud, weights: &[f64]) -> Vec<f64> {
    let dim = cloud.dim();
    let (mean, _) = weighted_mean_cov(cloud.points(), dim, weights);
    let mut y = cloud.points().to_vec();
    for yi in y.chunks_exact_mut(dim) {
        for k in 0..dim {
            yi[k] -= mean[k];
        }
    }
    y
}

/// Exact double sum over atom pairs.
pub fn t_tensor_exact(
    cloud: &AtomCloud,
    m1: &DMatrix<f64>,
    m2: &DMatrix<f64>,
    m3: &DMatrix<f64>,
) -> Result<TensorEstimate, MomentsError> {
    let dim = cloud.dim();
    check_matrices(dim, [m1, m2, m3])?;
    let w = cloud.weights();
    let n = cloud.len();
    let value = if [m1, m2, m3].iter().all(|m| is_identity(m)) {
        t_iii_pairs(cloud.points(), dim, &w)
    } else {
        let y = centered(cloud, &w);
        // Pre-apply each M_k to every centered atom.
        let apply = |m: &DMatrix<f64>| -> Vec<f64> {
            y.chunks_exact(dim)
                .flat_map(|yi| (0..dim).map(move |r| (0..dim).map(|s| m[(r, s)] * yi[s]).sum::<f64>()))
                .collect()
        };
        let (u1, u2, u3) = (apply(m1), apply(m2), apply(m3));
        let dot = |u: &[f64], i: usize, j: usize| -> f64 {
            (0..dim).map(|k| u[i * dim + k] * y[j * dim + k]).sum()
        };
        let mut total = Neumaier::default();
        for i in 0..n {
            let mut row = Neumaier::default();
            for j in 0..n {
                row.add(w[j] * dot(&u1, i, j) * dot(&u2, i, j) * dot(&u3, i, j));
            }
            total.add(w[i] * row.sum());
        }
        total.sum()
    };
    Ok(TensorEstimate { value, std_error: 0.0, n_pairs: (n as u64) * (n as u64) })
}

/// `T(I, I, I) = Σ_ij w_i w_j ⟨x_i − a, x_j − a⟩³` from raw points.
///
/// Centering and accumulation are both double-double: for nearly symmetric
/// measures the result sits many orders of magnitude below the individual
/// terms, and an f64 mean alone shifts it by `3 δ Var` — up to ~1e-8 relative.
pub fn t_iii_pairs(points: &[f64], dim: usize, w: &[f64]) -> f64 {
    let zero = TwoFloat::from(0.0);
    let mut mean = vec![zero; dim];
    for (x, &wi) in points.chunks_exact(dim).zip(w) {
        for k in 0..dim {
            mean[k] += TwoFloat::new_mul(x[k], wi);
        }
    }
    let y: Vec<TwoFloat> = points.chunks_exact(dim).flat_map(|x| x.iter().zip(&mean).map(|(v, m)| *v - *m)).collect();
    let mut total = zero;
    for (yi, &wi) in y.chunks_exact(dim).zip(w) {
        let mut row = zero;
        for (yj, &wj) in y.chunks_exact(dim).zip(w) {
            let mut g = zero;
            for (a, b) in yi.iter().zip(yj) {
                g += *a * *b;
            }
            row += g * g * g * wj;
        }
        total += row * wi;
    }
    f64::from(total)
}

/// Compensated summation; the pair sums cancel heavily for nearly symmetric
/// measures, where plain accumulation loses the small result.
#[derive(Default)]
struct Neumaier {
    sum: f64,
    carry: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn sum(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Third central moment tensor `S_abc = E y_a y_b y_c`, flattened `a·n² + b·n + c`.
pub fn third_moment_tensor(y: &[f64], dim: usize, w: &[f64]) -> Vec<f64> {
    let mut s = vec![0.0; dim * dim * dim];
    for (yi, &wi) in y.chunks_exact(dim).zip(w) {
        for a in 0..dim {
            for b in 0..dim {
                for c in 0..dim {
                    s[(a * dim + b) * dim + c] += wi * yi[a] * yi[b] * yi[c];
                }
            }
        }
    }
    s
}

/// `T(I, I, I) = ‖S‖²_F` via the third-moment tensor, O(N n³).
pub fn t_iii_from_tensor(y: &[f64], dim: usize, w: &[f64]) -> f64 {
    third_moment_tensor(y, dim, w).iter().map(|x| x * x).sum()
}

/// Pair-sampling estimate of `T(M1, M2, M3)`: `n_pairs` independent draws of
/// `(x, y) ~ μ⊗μ` with replacement, jackknife standard error.
pub fn t_tensor_mc(
    cloud: &AtomCloud,
    m1: &DMatrix<f64>,
    m2: &DMatrix<f64>,
    m3: &DMatrix<f64>,
    n_pairs: usize,
    seed: u64,
) -> Result<TensorEstimate, MomentsError> {
    if n_pairs < MIN_MC_PAIRS {
        return Err(MomentsError::TooFewPairs(n_pairs));
    }
    let dim = cloud.dim();
    check_matrices(dim, [m1, m2, m3])?;
    let w = cloud.weights();
    let y = centered(cloud, &w);
    let sampler = WeightedIndex::new(&w).map_err(|_| MomentsError::NonFinite)?;
    let mut rng = rng::from_seed(seed);
    let form = |m: &DMatrix<f64>, i: usize, j: usize| -> f64 {
        let (yi, yj) = (&y[i * dim..(i + 1) * dim], &y[j * dim..(j + 1) * dim]);
        (0..dim).map(|r| yi[r] * (0..dim).map(|s| m[(r, s)] * yj[s]).sum::<f64>()).sum()
    };
    let samples: Vec<f64> = (0..n_pairs)
        .map(|_| {
            let i = sampler.sample(&mut rng);
            let j = sampler.sample(&mut rng);
            form(m1, i, j) * form(m2, i, j) * form(m3, i, j)
        })
        .collect();
    let nf = n_pairs as f64;
    let total: f64 = samples.iter().sum();
    let value = total / nf;
    // Jackknife over leave-one-out means.
    let loo_var: f64 = samples
        .iter()
        .map(|s| {
            let loo = (total - s) / (nf - 1.0);
            (loo - value).powi(2)
        })
        .sum::<f64>()
        * (nf - 1.0)
        / nf;
    Ok(TensorEstimate { value, std_error: loo_var.sqrt(), n_pairs: n_pairs as u64 })
}

impl TensorEstimate {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("tensor estimate serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{discretize_1d, DensityMeta, Family};

    fn two_atom() -> AtomCloud {
        AtomCloud::from_points(&[vec![-1.0], vec![2.0]], &[2.0 / 3.0, 1.0 / 3.0], DensityMeta::custom(0.0)).unwrap()
    }

    fn eye(n: usize) -> DMatrix<f64> {
        DMatrix::identity(n, n)
    }

    #[test]
    fn two_atom_hand_values() {
        let c = two_atom();
        let s = summarize(&c).unwrap();
        assert!(s.mean[0].abs() < 1e-15);
        assert!((s.cov[(0, 0)] - 2.0).abs() < 1e-14);
        assert!((tr_pow(&s, 2.0).unwrap() - 4.0).abs() < 1e-13);
        let t = t_tensor_exact(&c, &eye(1), &eye(1), &eye(1)).unwrap();
        assert!((t.value - 4.0).abs() < 1e-13);
        assert_eq!((t.std_error, t.n_pairs), (0.0, 4));
    }

    fn diag(vals: &[f64]) -> CovarianceSummary {
        let n = vals.len();
        CovarianceSummary::from_mean_cov(DVector::zeros(n), DMatrix::from_diagonal(&DVector::from_row_slice(vals)))
            .unwrap()
    }

    #[test]
    fn spectral_functionals() {
        assert_eq!(tr_pow(&diag(&[1.0, 1.0, 1.0]), 2.0).unwrap(), 3.0);
        assert!((tr_pow(&diag(&[2.0, 1.0]), 3.0).unwrap() - 9.0).abs() < 1e-14);
        assert!((plus_part_pow(&diag(&[2.0, 1.0]), 3.0, 1.0).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(plus_part_pow(&diag(&[0.5, 0.2]), 2.0, 1.0).unwrap(), 0.0);
        assert!((plus_part_pow(&diag(&[3.0, 1.5, 0.5]), 2.0, 1.0).unwrap() - 4.25).abs() < 1e-14);
        assert!((op_norm(&diag(&[0.5, 3.0, 1.5])).unwrap() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn psd_clamp_and_violation() {
        let s = diag(&[1.0, -5e-11]);
        assert_eq!(s.clamped_eigenvalues().unwrap(), vec![1.0, 0.0]);
        assert!(matches!(tr_pow(&diag(&[1.0, -1e-6]), 2.0), Err(MomentsError::NotPsd(_))));
        assert!(matches!(tr_pow(&diag(&[1.0]), 0.5), Err(MomentsError::BadExponent(_))));
    }

    #[test]
    fn gaussian_grid_covariance_and_symmetry() {
        let c = discretize_1d(&Family::standard_gaussian(), -6.0, 6.0, 201).unwrap();
        let s = summarize(&c).unwrap();
        assert!(s.mean[0].abs() < 1e-12);
        assert!((s.cov[(0, 0)] - 1.0).abs() < 5e-3);
        let t = t_tensor_exact(&c, &eye(1), &eye(1), &eye(1)).unwrap();
        assert!(t.value.abs() < 1e-15, "{}", t.value);
    }

    #[test]
    fn dimension_mismatch() {
        let c = two_atom();
        assert!(matches!(t_tensor_exact(&c, &eye(2), &eye(1), &eye(1)), Err(MomentsError::Dimension { .. })));
        assert!(matches!(t_tensor_mc(&c, &eye(1), &eye(1), &eye(1), 10, 0), Err(MomentsError::TooFewPairs(10))));
    }

    #[test]
    fn mc_is_deterministic() {
        let c = discretize_1d(&Family::Gaussian { mean: 0.0, alpha: 1.0 }, -1.0, 4.0, 50).unwrap();
        let a = t_tensor_mc(&c, &eye(1), &eye(1), &eye(1), 1000, 9).unwrap();
        let b = t_tensor_mc(&c, &eye(1), &eye(1), &eye(1), 1000, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_json(), b.to_json());
    }
}

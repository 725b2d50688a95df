//! Numerical laboratory for stochastic localization on log-concave densities.
//!
//! The crate is organised bottom-up:
//!
//! - [`density`] builds finite atom clouds from closed-form log-concave families
//!   and computes truncated-Gaussian moments analytically.
//! - [`moments`] computes means, covariances, spectral functionals and the
//!   third-order tensor functional `T(M1, M2, M3)` on atom clouds.
//! - [`localization`] simulates the Eldan and Lee–Vempala processes over
//!   ensembles of Brownian paths and tests their martingale and derivative
//!   identities statistically.
//! - [`inequalities`] evaluates moment-tensor and Poincaré-type inequalities on
//!   corpora of densities and reports signed margins.
//! - [`gamma_search`] maximizes the one-dimensional skewness ratio over
//!   truncated unit Gaussians.
//! - [`exponents`] evaluates and optimizes the thin-shell exponent formulas and
//!   the integral bound chain behind them.
//!
//! Supporting numerics live in [`linalg`], [`quad`], [`optim`] and [`rng`].

pub mod density;
pub mod exponents;
pub mod gamma_search;
pub mod inequalities;
pub mod io;
pub mod linalg;
pub mod localization;
pub mod moments;
pub mod optim;
pub mod quad;
pub mod rng;

pub use density::{AtomCloud, DensityError, DensityMeta, Family, FamilyTag, TruncatedGaussianParams};
pub use moments::{CovarianceSummary, MomentsError, TensorEstimate};

//! Eldan and Lee–Vempala stochastic localization on atom clouds.
//!
//! Both processes multiply the density by a random exponential tilt,
//! `dp_t(x) = p_t(x) ⟨x − a_t, dW_t⟩` (LV) or with the drive whitened by
//! `A_t^{-1/2}` (Eldan). On an atom cloud this is an SDE for the log-weights,
//! integrated by Euler–Maruyama with per-step renormalization.

mod growth;
mod identities;
mod sim;

pub use growth::{trend_growth, GrowthPoint, GrowthReport, QualitativeCurve};
pub use identities::{
    check_cov_decay, check_cov_psd_decreasing, check_mean_energy_identity, check_tr2_derivative_identity,
    check_weight_martingale, ensemble_cov, ensemble_scalar, CovDecayReport, EnsembleStat, IdentityReport,
    MartingaleReport, MonotoneStep, COV_DECAY_Z, IDENTITY_Z, MARTINGALE_MIN_ESS, MARTINGALE_Z,
};
pub use sim::{run, simulate, simulate_lv_tilt, simulate_pair_halved, trajectories_to_csv};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::DensityError;
use crate::moments::MomentsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Process {
    Eldan,
    Lv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LvMode {
    #[default]
    WeightSde,
    ExactTilt,
}

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("atoms do not affinely span the space (smallest covariance eigenvalue {0:e})")]
    NotSpanning(f64),
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Moments(#[from] MomentsError),
}

fn default_eigen_floor() -> f64 {
    1e-8
}
fn default_substeps() -> u32 {
    1
}
fn default_record_weights() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub process: Process,
    pub dt: f64,
    pub t_end: f64,
    pub n_paths: usize,
    pub master_seed: u64,
    pub snapshot_times: Vec<f64>,
    /// Floor on the eigenvalues of `A_t` before forming `A_t^{-1/2}` (Eldan).
    #[serde(default = "default_eigen_floor")]
    pub eigen_floor: f64,
    #[serde(default)]
    pub lv_mode: LvMode,
    /// Each Brownian increment is the sum of this many independent normal
    /// draws of variance `dt / substeps`. Running `(dt, 2)` and `(dt/2, 1)`
    /// from the same seed therefore follows the same Brownian path at two
    /// step sizes.
    #[serde(default = "default_substeps")]
    pub brownian_substeps: u32,
    /// Keep per-atom log-weights in every snapshot.
    #[serde(default = "default_record_weights")]
    pub record_weights: bool,
}

impl SimConfig {
    pub fn new(process: Process, dt: f64, t_end: f64, n_paths: usize, master_seed: u64, snapshot_times: Vec<f64>) -> Self {
        Self {
            process,
            dt,
            t_end,
            n_paths,
            master_seed,
            snapshot_times,
            eigen_floor: default_eigen_floor(),
            lv_mode: LvMode::WeightSde,
            brownian_substeps: 1,
            record_weights: true,
        }
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    /// Step index at which each snapshot is taken.
    pub fn snapshot_steps(&self) -> Vec<usize> {
        self.snapshot_times.iter().map(|t| (t / self.dt).round() as usize).collect()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be > 0, got {}", self.dt));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be > 0, got {}", self.t_end));
        }
        if self.n_paths == 0 {
            return bad("n_paths must be >= 1".into());
        }
        if self.brownian_substeps == 0 {
            return bad("brownian_substeps must be >= 1".into());
        }
        if !(self.eigen_floor >= 0.0) {
            return bad("eigen_floor must be >= 0".into());
        }
        if self.snapshot_times.is_empty() {
            return bad("need at least one snapshot time".into());
        }
        let steps = self.t_end / self.dt;
        if (steps - steps.round()).abs() > 1e-6 {
            return bad(format!("t_end = {} is not a whole number of steps of dt = {}", self.t_end, self.dt));
        }
        for (k, &t) in self.snapshot_times.iter().enumerate() {
            if !(t >= 0.0 && t <= self.t_end * (1.0 + 1e-12)) {
                return bad(format!("snapshot time {t} outside [0, t_end]"));
            }
            let s = t / self.dt;
            if (s - s.round()).abs() > 1e-6 {
                return bad(format!("snapshot time {t} is not on the dt = {} step grid", self.dt));
            }
            if k > 0 {
                let gap = t - self.snapshot_times[k - 1];
                if gap <= 0.0 {
                    return bad("snapshot times must be strictly increasing".into());
                }
                if self.dt > gap * (1.0 + 1e-9) {
                    return bad(format!("dt = {} exceeds snapshot gap {gap}", self.dt));
                }
            }
        }
        Ok(())
    }

    /// Evenly spaced snapshot times `0, t_end/k, …, t_end`.
    pub fn uniform_snapshots(t_end: f64, k: usize) -> Vec<f64> {
        (0..=k).map(|i| t_end * i as f64 / k as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub t: f64,
    pub mean: Vec<f64>,
    /// Row-major `n × n`.
    pub cov: Vec<f64>,
    /// Empty unless the config records weights.
    pub log_weights: Vec<f64>,
    pub tr_a: f64,
    pub tr_a2: f64,
    pub tr_a3: f64,
    pub op_norm: f64,
    /// `T(I, I, I)` of the current measure, exact.
    pub t_iii: f64,
    pub mean_norm_sq: f64,
    /// Largest `‖A_s‖_op` over every step `s ≤ t`.
    pub running_max_op_norm: f64,
    /// Eigenvalues of `A_t`, descending, clamped at 0.
    pub eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub path_index: u64,
    pub path_seed: u64,
    pub snapshots: Vec<StateSnapshot>,
    /// Reason the path stopped before `t_end`, if it did.
    pub terminated_early: Option<String>,
}

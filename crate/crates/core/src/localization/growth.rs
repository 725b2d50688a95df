//! Growth trends of `Tr A_t^q` along an ensemble.
//!
//! Only the envelope `E Tr A_t^q ≤ (1 + t/α)^{q(q−1)} Tr A_0^q` has explicit
//! constants and is checked. The other curves carry unspecified universal
//! constants (set to 1 here) and are exported for shape inspection only.

use serde::{Deserialize, Serialize};

use super::identities::{ensemble_scalar, EnsembleStat};
use super::{SimError, Trajectory};

/// Operator-norm level for the exceedance curve.
pub const OP_NORM_LEVEL: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthPoint {
    pub t: f64,
    pub tr_q: EnsembleStat,
    /// `E Tr ((A_t − I)⁺)^q`.
    pub plus_part_q: EnsembleStat,
    /// `(1 + t/α)^{q(q−1)} Tr A_0^q`; infinite when α = 0.
    pub envelope: f64,
    /// Observed mean within the envelope plus three standard errors.
    pub within_envelope: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualitativeCurve {
    pub name: String,
    pub note: String,
    /// `(t, observed, reference shape)`.
    pub points: Vec<(f64, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub q: f64,
    pub alpha: f64,
    pub tr_a0_q: f64,
    pub points: Vec<GrowthPoint>,
    pub envelope_pass: bool,
    pub qualitative: Vec<QualitativeCurve>,
    /// Exceedance frequency of `‖A_s‖_op ≥ 2` for some step `s ≤ T` never
    /// decreases as `T` grows.
    pub exceedance_monotone: bool,
}

const UNSPECIFIED: &str = "unspecified constant set to 1; qualitative shape only, no verdict";

pub fn trend_growth(
    trajectories: &[Trajectory],
    q: f64,
    alpha: f64,
    initial_eigenvalues: &[f64],
) -> Result<GrowthReport, SimError> {
    if !(2.0..=8.0).contains(&q) {
        return Err(SimError::Config(format!("growth exponent q must lie in [2, 8], got {q}")));
    }
    let dim = initial_eigenvalues.len() as f64;
    let tr_a0_q: f64 = initial_eigenvalues.iter().map(|l| l.max(0.0).powf(q)).sum();
    let tr_q = ensemble_scalar(trajectories, |s| s.eigenvalues.iter().map(|l| l.powf(q)).sum());
    let plus = ensemble_scalar(trajectories, |s| s.eigenvalues.iter().map(|l| (l - 1.0).max(0.0).powf(q)).sum());
    let exceed = ensemble_scalar(trajectories, |s| f64::from(u8::from(s.running_max_op_norm >= OP_NORM_LEVEL)));

    let points: Vec<GrowthPoint> = tr_q
        .iter()
        .zip(&plus)
        .map(|(tq, pp)| {
            let envelope = if alpha > 0.0 {
                (1.0 + tq.t / alpha).powf(q * (q - 1.0)) * tr_a0_q
            } else {
                f64::INFINITY
            };
            GrowthPoint {
                t: tq.t,
                tr_q: *tq,
                plus_part_q: *pp,
                envelope,
                within_envelope: tq.mean <= envelope + 3.0 * tq.std_error,
            }
        })
        .collect();

    let qualitative = vec![
        QualitativeCurve {
            name: "plus_part_growth".into(),
            note: format!("E Tr((A_t - I)+)^q vs 1 + (q t)^(q/2) n; {UNSPECIFIED}"),
            points: plus.iter().map(|p| (p.t, p.mean, 1.0 + (q * p.t).powf(q / 2.0) * dim)).collect(),
        },
        QualitativeCurve {
            name: "tr_q_dimension_scale".into(),
            note: format!("E Tr A_t^q vs n; {UNSPECIFIED}"),
            points: tr_q.iter().map(|p| (p.t, p.mean, dim)).collect(),
        },
        QualitativeCurve {
            name: "op_norm_exceedance".into(),
            note: format!("P[sup_(s<=T) |A_s|_op >= 2] vs exp(-1/T); {UNSPECIFIED}"),
            points: exceed
                .iter()
                .map(|p| (p.t, p.mean, if p.t > 0.0 { (-1.0 / p.t).exp() } else { 0.0 }))
                .collect(),
        },
    ];
    let exceedance_monotone = exceed.windows(2).all(|w| w[1].mean >= w[0].mean);
    let envelope_pass = points.iter().all(|p| p.within_envelope);
    Ok(GrowthReport { q, alpha, tr_a0_q, points, envelope_pass, qualitative, exceedance_monotone })
}

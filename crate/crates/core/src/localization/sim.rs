use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{LvMode, Process, SimConfig, SimError, StateSnapshot, Trajectory};
use crate::density::{log_sum_exp, AtomCloud};
use crate::io::fmt_f64;
use crate::linalg::SortedEigen;
use crate::moments::{clamp_eigenvalues, t_iii_from_tensor, weighted_mean_cov};
use crate::rng;

#[derive(Clone, Copy, PartialEq)]
enum Scheme {
    WeightSde,
    Tilt,
}

struct Moments {
    mean: Vec<f64>,
    cov: DMatrix<f64>,
    eig: SortedEigen,
}

fn moments_of(points: &[f64], dim: usize, w: &[f64]) -> Moments {
    let (mean, cov) = weighted_mean_cov(points, dim, w);
    let eig = SortedEigen::new(&cov);
    Moments { mean: mean.iter().copied().collect(), cov, eig }
}

fn normalize(log_w: &mut [f64], w: &mut [f64]) {
    let lse = log_sum_exp(log_w);
    for (lw, wi) in log_w.iter_mut().zip(w.iter_mut()) {
        *lw -= lse;
        *wi = lw.exp();
    }
}

fn take_snapshot(
    t: f64,
    points: &[f64],
    dim: usize,
    log_w: &[f64],
    w: &[f64],
    m: &Moments,
    running_max: f64,
    record_weights: bool,
) -> Result<StateSnapshot, SimError> {
    let eigenvalues = clamp_eigenvalues(&m.eig.values)?;
    let mut y = points.to_vec();
    for yi in y.chunks_exact_mut(dim) {
        for k in 0..dim {
            yi[k] -= m.mean[k];
        }
    }
    Ok(StateSnapshot {
        t,
        mean: m.mean.clone(),
        cov: m.cov.transpose().iter().copied().collect(),
        log_weights: if record_weights { log_w.to_vec() } else { Vec::new() },
        tr_a: eigenvalues.iter().sum(),
        tr_a2: eigenvalues.iter().map(|l| l * l).sum(),
        tr_a3: eigenvalues.iter().map(|l| l * l * l).sum(),
        op_norm: eigenvalues[0],
        t_iii: t_iii_from_tensor(&y, dim, w),
        mean_norm_sq: m.mean.iter().map(|x| x * x).sum(),
        running_max_op_norm: running_max,
        eigenvalues,
    })
}

fn run_path(cloud: &AtomCloud, cfg: &SimConfig, path: u64, scheme: Scheme) -> Result<Trajectory, SimError> {
    let dim = cloud.dim();
    let points = cloud.points();
    let n = cloud.len();
    let path_seed = rng::derive_seed(cfg.master_seed, path);
    let mut rng = rng::from_seed(path_seed);

    let log_w0 = cloud.log_weights().to_vec();
    let mut log_w = log_w0.clone();
    let mut w = cloud.weights();
    let mut tilt = vec![0.0; dim];
    let sq_norms: Vec<f64> = points.chunks_exact(dim).map(|x| x.iter().map(|v| v * v).sum()).collect();

    let snap_steps = cfg.snapshot_steps();
    let mut next = 0;
    let mut snapshots = Vec::with_capacity(snap_steps.len());
    let mut m = moments_of(points, dim, &w);
    let mut running_max = m.eig.values[0];
    let collapse = 10.0 * cfg.eigen_floor;

    while next < snap_steps.len() && snap_steps[next] == 0 {
        snapshots.push(take_snapshot(0.0, points, dim, &log_w, &w, &m, running_max, cfg.record_weights)?);
        next += 1;
    }

    let sub_sd = (cfg.dt / cfg.brownian_substeps as f64).sqrt();
    let mut dw = vec![0.0; dim];
    let mut z = vec![0.0; dim];
    let mut y = vec![0.0; dim];
    let mut terminated_early = None;

    for step in 0..cfg.n_steps() {
        let t = step as f64 * cfg.dt;
        dw.iter_mut().for_each(|v| *v = 0.0);
        for _ in 0..cfg.brownian_substeps {
            for v in dw.iter_mut() {
                let g: f64 = StandardNormal.sample(&mut rng);
                *v += sub_sd * g;
            }
        }

        match (cfg.process, scheme) {
            (Process::Eldan, _) => {
                let floor = cfg.eigen_floor;
                let whiten = m.eig.map(|l| l.max(floor).sqrt().recip());
                for i in 0..n {
                    let x = &points[i * dim..(i + 1) * dim];
                    for k in 0..dim {
                        y[k] = x[k] - m.mean[k];
                    }
                    for r in 0..dim {
                        z[r] = (0..dim).map(|s| whiten[(r, s)] * y[s]).sum();
                    }
                    let drive: f64 = z.iter().zip(&dw).map(|(a, b)| a * b).sum();
                    let energy: f64 = z.iter().map(|v| v * v).sum();
                    log_w[i] += drive - 0.5 * energy * cfg.dt;
                }
            }
            (Process::Lv, Scheme::WeightSde) => {
                for i in 0..n {
                    let x = &points[i * dim..(i + 1) * dim];
                    let mut drive = 0.0;
                    let mut energy = 0.0;
                    for k in 0..dim {
                        let d = x[k] - m.mean[k];
                        drive += d * dw[k];
                        energy += d * d;
                    }
                    log_w[i] += drive - 0.5 * energy * cfg.dt;
                }
            }
            (Process::Lv, Scheme::Tilt) => {
                // p_t ∝ exp(cᵀx − t‖x‖²/2) p_0 with dc = dW + a_t dt.
                for k in 0..dim {
                    tilt[k] += dw[k] + m.mean[k] * cfg.dt;
                }
                let t_next = (step + 1) as f64 * cfg.dt;
                for i in 0..n {
                    let x = &points[i * dim..(i + 1) * dim];
                    let lin: f64 = x.iter().zip(&tilt).map(|(a, b)| a * b).sum();
                    log_w[i] = log_w0[i] + lin - 0.5 * t_next * sq_norms[i];
                }
            }
        }
        normalize(&mut log_w, &mut w);
        m = moments_of(points, dim, &w);
        running_max = running_max.max(m.eig.values[0]);

        while next < snap_steps.len() && snap_steps[next] == step + 1 {
            let ts = (step + 1) as f64 * cfg.dt;
            snapshots.push(take_snapshot(ts, points, dim, &log_w, &w, &m, running_max, cfg.record_weights)?);
            next += 1;
        }
        if cfg.process == Process::Eldan && m.eig.values[0] < collapse {
            terminated_early = Some(format!(
                "covariance collapse at t = {}: op norm {:e} < 10 * eigen_floor",
                t + cfg.dt,
                m.eig.values[0]
            ));
            break;
        }
    }
    Ok(Trajectory { path_index: path, path_seed, snapshots, terminated_early })
}

fn check_cloud(cloud: &AtomCloud, cfg: &SimConfig) -> Result<(), SimError> {
    cfg.validate()?;
    if cfg.process == Process::Eldan {
        let m = moments_of(cloud.points(), cloud.dim(), &cloud.weights());
        let smallest = *m.eig.values.last().expect("dimension >= 1");
        if smallest <= 10.0 * cfg.eigen_floor.max(1e-300) {
            return Err(SimError::NotSpanning(smallest));
        }
    }
    Ok(())
}

fn ensemble(cloud: &AtomCloud, cfg: &SimConfig, scheme: Scheme) -> Result<Vec<Trajectory>, SimError> {
    check_cloud(cloud, cfg)?;
    // Paths run in any order; `collect` keeps them in path-index order.
    (0..cfg.n_paths as u64).into_par_iter().map(|p| run_path(cloud, cfg, p, scheme)).collect()
}

/// Euler–Maruyama on the log-weights for `cfg.process`, one trajectory per path.
pub fn simulate(cloud: &AtomCloud, cfg: &SimConfig) -> Result<Vec<Trajectory>, SimError> {
    ensemble(cloud, cfg, Scheme::WeightSde)
}

/// LV process through its closed-form tilt `exp(c_tᵀx − t‖x‖²/2)`, with the
/// tilt vector driven by `dc_t = dW_t + a_t dt`.
///
/// The Itô derivation: `d log p_t(x) = (x − a)ᵀdW − ½‖x − a‖²dt`, and the
/// `x`-dependent part is `xᵀ(dW + a dt) − ½‖x‖²dt`.
pub fn simulate_lv_tilt(cloud: &AtomCloud, cfg: &SimConfig) -> Result<Vec<Trajectory>, SimError> {
    if cfg.process != Process::Lv {
        return Err(SimError::Config("the tilt simulator only runs the LV process".into()));
    }
    ensemble(cloud, cfg, Scheme::Tilt)
}

/// Dispatch on `cfg.lv_mode`.
pub fn run(cloud: &AtomCloud, cfg: &SimConfig) -> Result<Vec<Trajectory>, SimError> {
    match (cfg.process, cfg.lv_mode) {
        (Process::Lv, LvMode::ExactTilt) => simulate_lv_tilt(cloud, cfg),
        _ => simulate(cloud, cfg),
    }
}

/// The same ensemble at step `dt` and `dt/2`, driven by identical Brownian
/// paths. The difference of the two estimates the time-discretization error.
pub fn simulate_pair_halved(
    cloud: &AtomCloud,
    cfg: &SimConfig,
) -> Result<(Vec<Trajectory>, Vec<Trajectory>), SimError> {
    let mut coarse = cfg.clone();
    coarse.brownian_substeps = 2 * cfg.brownian_substeps;
    let mut fine = cfg.clone();
    fine.dt = cfg.dt / 2.0;
    Ok((run(cloud, &coarse)?, run(cloud, &fine)?))
}

/// Snapshot summary CSV: `path,t,tr_a2,tr_a3,op_norm,t_iii,mean_norm_sq`.
pub fn trajectories_to_csv(trajectories: &[Trajectory]) -> String {
    let mut out = String::from("path,t,tr_a2,tr_a3,op_norm,t_iii,mean_norm_sq\n");
    for tr in trajectories {
        for s in &tr.snapshots {
            let fields = [s.t, s.tr_a2, s.tr_a3, s.op_norm, s.t_iii, s.mean_norm_sq].map(fmt_f64);
            out.push_str(&format!("{},{}\n", tr.path_index, fields.join(",")));
        }
    }
    out
}

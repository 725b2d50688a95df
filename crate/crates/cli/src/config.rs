//! JSON run configuration. Every section is optional; missing fields take
//! the defaults below, unknown fields are rejected.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sloclab::density::{CloudSpec, Family};
use sloclab::exponents::{ChainOptions, ExponentInputs, GapMode, GAMMA_DEFAULT};
use sloclab::gamma_search::{RefineOptions, SearchDomain, SearchOptions};
use sloclab::inequalities::{default_checks, CheckKind, CorpusSpec};
use sloclab::localization::{LvMode, Process, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    #[default]
    Json,
    Both,
}

impl Format {
    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }
    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub format: Format,
    /// Overridden by `--out`; not part of the configuration hash.
    #[serde(skip_serializing)]
    pub output_dir: Option<PathBuf>,
    pub simulate: SimulateConfig,
    pub verify: VerifyConfig,
    pub gamma_search: GammaConfig,
    pub exponents: ExponentsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub cloud: CloudSpec,
    pub process: Process,
    pub dt: f64,
    pub t_end: f64,
    pub n_paths: usize,
    pub snapshot_times: Vec<f64>,
    pub eigen_floor: f64,
    pub lv_mode: LvMode,
    /// Re-run at `dt/2` on the same Brownian paths to bound the time
    /// discretization error of the covariance-decay check (Eldan only).
    pub halving: bool,
    /// Moment order of the growth envelope (LV only).
    pub growth_q: f64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            cloud: CloudSpec::single(Family::standard_gaussian(), 201),
            process: Process::Eldan,
            dt: 1e-3,
            t_end: 1.0,
            n_paths: 2000,
            snapshot_times: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            eigen_floor: 1e-8,
            lv_mode: LvMode::WeightSde,
            halving: true,
            growth_q: 3.0,
        }
    }
}

impl SimulateConfig {
    pub fn sim_config(&self, seed: u64) -> SimConfig {
        let mut c = SimConfig::new(self.process, self.dt, self.t_end, self.n_paths, seed, self.snapshot_times.clone());
        c.eigen_floor = self.eigen_floor;
        c.lv_mode = self.lv_mode;
        c
    }
}

/// `"default"` or an inline corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CorpusSource {
    Named(String),
    Inline(CorpusSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub corpus: CorpusSource,
    pub checks: Vec<CheckKind>,
}

pub const XQ_SAMPLES: usize = 10_000;

impl Default for VerifyConfig {
    fn default() -> Self {
        let mut checks = default_checks();
        checks.push(CheckKind::XqHess { n_samples: XQ_SAMPLES });
        Self { corpus: CorpusSource::Named("default".into()), checks }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GammaConfig {
    pub domain: SearchDomain,
    pub grid_resolution: usize,
    pub n_starts: usize,
    pub refine: RefineOptions,
}

impl Default for GammaConfig {
    fn default() -> Self {
        let o = SearchOptions::default();
        Self { domain: SearchDomain::default(), grid_resolution: o.grid_resolution, n_starts: o.n_starts, refine: o.refine }
    }
}

impl GammaConfig {
    pub fn options(&self, seed: u64) -> SearchOptions {
        SearchOptions { grid_resolution: self.grid_resolution, n_starts: self.n_starts, refine: self.refine, seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExponentsConfig {
    pub gamma: f64,
    pub mode: GapMode,
    pub q_range: [f64; 2],
    pub chain: ChainConfig,
}

impl Default for ExponentsConfig {
    fn default() -> Self {
        Self { gamma: GAMMA_DEFAULT, mode: GapMode::WithGap, q_range: [3.0, 4.0], chain: ChainConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainConfig {
    /// `gamma` and `gap_mode` are taken from the enclosing section.
    pub inputs: ExponentInputs,
    pub constant_c: f64,
    pub options: ChainOptions,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self { inputs: ExponentInputs::default(), constant_c: 1.0, options: ChainOptions::default() }
    }
}

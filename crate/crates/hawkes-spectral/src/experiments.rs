//! Deterministic scenario runners behind the `experiment` subcommand.
//!
//! Each runner replays one of the simulation studies at a configurable
//! scale: univariate error sweeps over the horizon or the noise level,
//! the compensation effect when the decay is held fixed, the bivariate
//! interaction and support studies, and the randomized spike-and-slab
//! support screen. Results come back as typed rows plus ready-to-write
//! CSV tables. All randomness derives from the config seed, so identical
//! configs produce byte-identical tables; wall-clock numbers live only in
//! the JSON manifest.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::{
    mean_intensity, simulate_noisy, spectral_radius, EventSeries, NoisyHawkesParams,
    SimulationConfig,
};
use crate::rng::substream;
use crate::stats::{mean, pearson, sample_sd};
use crate::support::{
    detect_support_with, partition, three_step_fit_partitioned, Correction, SupportReport,
    SupportRule, ThreeStepConfig,
};
use crate::whittle::{
    fit, FitConfig, FitResult, FrequencyPolicy, ModelSpec, NULL_ALPHA_THRESHOLD,
};

/// Baseline univariate truth shared by every univariate study.
pub const UNI_MU: f64 = 1.0;
pub const UNI_ALPHA: f64 = 0.5;
pub const UNI_BETA: f64 = 1.0;

/// Noise level of the horizon sweep.
pub const HORIZON_SWEEP_LAMBDA0: f64 = 1.6;
/// Noise level of the compensation study.
pub const COMPENSATION_LAMBDA0: f64 = 1.2;

/// Bivariate baseline: rates, decays and noise shared by both scenarios
/// and the interaction sweep.
pub const BI_MU: [f64; 2] = [1.0, 1.0];
pub const BI_BETA: [f64; 2] = [1.0, 1.3];
pub const BI_LAMBDA0: f64 = 0.5;

pub const SCENARIO_ONE_ALPHA: [[f64; 2]; 2] = [[0.5, 0.0], [0.4, 0.0]];
pub const SCENARIO_TWO_ALPHA: [[f64; 2]; 2] = [[0.5, 0.0], [0.4, 0.4]];

// ---------------------------------------------------------------------------
// Experiment identifiers and configuration
// ---------------------------------------------------------------------------

/// The named studies the runner knows how to reproduce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    /// Relative error of the four partially-known univariate models as the
    /// horizon grows.
    UniHorizon,
    /// Same models at the maximal horizon while the noise-to-signal ratio
    /// sweeps a grid.
    UniNoise,
    /// Per-trial estimates with the decay fixed, exposing the mean-intensity
    /// compensation between the remaining coordinates.
    UniCompensation,
    /// Bivariate studies: interaction-strength sweep, reduced-versus-full
    /// comparison with support screening, and the partitioned variant.
    BiScenarios,
    /// Randomized support recovery over spike-and-slab interaction graphs.
    SpikeSlab,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 5] = [
        ExperimentId::UniHorizon,
        ExperimentId::UniNoise,
        ExperimentId::UniCompensation,
        ExperimentId::BiScenarios,
        ExperimentId::SpikeSlab,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::UniHorizon => "uni-horizon",
            ExperimentId::UniNoise => "uni-noise",
            ExperimentId::UniCompensation => "uni-compensation",
            ExperimentId::BiScenarios => "bi-scenarios",
            ExperimentId::SpikeSlab => "spike-slab",
        }
    }

    /// Top-level substream tag, so different experiments sharing a seed
    /// still draw independent randomness.
    fn tag(self) -> u64 {
        match self {
            ExperimentId::UniHorizon => 1,
            ExperimentId::UniNoise => 2,
            ExperimentId::UniCompensation => 3,
            ExperimentId::BiScenarios => 4,
            ExperimentId::SpikeSlab => 5,
        }
    }
}

impl std::fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| {
                let known: Vec<&str> = ExperimentId::ALL.iter().map(|i| i.name()).collect();
                Error::InvalidConfig(format!(
                    "unknown experiment '{s}'; known ids: {}",
                    known.join(", ")
                ))
            })
    }
}

/// Declarative description of one experiment run. Deserializes from TOML;
/// every field has a desk-scale default so a config file only needs to
/// mention what it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Which study to run; see [`ExperimentId`] for the known names.
    pub experiment: String,
    pub seed: u64,
    /// Trials per grid cell (replications for the spike-and-slab study).
    pub trials: usize,
    pub m_policy: FrequencyPolicy,
    /// Optimizer restarts per fit.
    pub restarts: usize,
    /// Optimizer iteration cap per restart.
    pub max_iters: usize,
    /// Where tables and the manifest land; `None` keeps results in memory.
    pub out: Option<PathBuf>,
    /// Horizon grid of the univariate sweep.
    pub horizons: Vec<f64>,
    /// Noise-to-signal grid: lambda0 = ratio * m_H.
    pub noise_ratios: Vec<f64>,
    /// Horizon used by the noise sweep.
    pub noise_horizon: f64,
    pub compensation_horizon: f64,
    /// Cross-interaction grid of the bivariate sweep.
    pub alpha21_levels: Vec<f64>,
    /// Horizon grid of the bivariate sweep.
    pub bivariate_horizons: Vec<f64>,
    /// Which interaction scenarios (1 and/or 2) to run.
    pub scenarios: Vec<u8>,
    /// Horizon of the reduced-versus-full comparison.
    pub scenario_horizon: f64,
    /// Single-realization window for the partitioned variant.
    pub partition_horizon: f64,
    pub partition_windows: usize,
    /// Subwindows per spike-and-slab replication.
    pub spike_windows: usize,
    /// Expected event count per spike-and-slab realization; sets the
    /// horizon through the mean total rate.
    pub events_target: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentId::UniHorizon.name().into(),
            seed: 1,
            trials: 20,
            m_policy: FrequencyPolicy::N,
            restarts: 5,
            max_iters: 500,
            out: None,
            horizons: vec![250.0, 500.0, 1000.0, 2000.0, 4000.0, 8000.0],
            noise_ratios: vec![0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0],
            noise_horizon: 8000.0,
            compensation_horizon: 8000.0,
            alpha21_levels: vec![0.2, 0.4, 0.6, 0.8],
            bivariate_horizons: vec![1000.0, 2000.0, 3000.0],
            scenarios: vec![1, 2],
            scenario_horizon: 3000.0,
            partition_horizon: 6000.0,
            partition_windows: 20,
            spike_windows: 10,
            events_target: 5000.0,
        }
    }
}

impl ExperimentConfig {
    /// Desk-scale defaults for a given study.
    pub fn for_id(id: ExperimentId) -> Self {
        let mut cfg = Self::default();
        cfg.experiment = id.name().into();
        if id == ExperimentId::SpikeSlab {
            cfg.trials = 30;
        }
        cfg
    }

    pub fn id(&self) -> Result<ExperimentId> {
        self.experiment.parse()
    }

    pub fn validate(&self) -> Result<()> {
        let id = self.id()?;
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        let positive_grid = |name: &str, grid: &[f64]| -> Result<()> {
            if grid.is_empty() {
                return Err(Error::InvalidConfig(format!("{name} grid is empty")));
            }
            if grid.iter().any(|&v| !v.is_finite() || v <= 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} grid must be positive and finite"
                )));
            }
            Ok(())
        };
        match id {
            ExperimentId::UniHorizon => positive_grid("horizons", &self.horizons)?,
            ExperimentId::UniNoise => {
                positive_grid("noise_ratios", &self.noise_ratios)?;
                positive_grid("noise_horizon", &[self.noise_horizon])?;
            }
            ExperimentId::UniCompensation => {
                positive_grid("compensation_horizon", &[self.compensation_horizon])?
            }
            ExperimentId::BiScenarios => {
                positive_grid("alpha21_levels", &self.alpha21_levels)?;
                if self.alpha21_levels.iter().any(|&a| a >= 1.0) {
                    return Err(Error::InvalidConfig(
                        "alpha21 levels must stay below 1 for stationarity".into(),
                    ));
                }
                positive_grid("bivariate_horizons", &self.bivariate_horizons)?;
                positive_grid("scenario_horizon", &[self.scenario_horizon])?;
                positive_grid("partition_horizon", &[self.partition_horizon])?;
                if self.scenarios.is_empty() {
                    return Err(Error::InvalidConfig("scenarios grid is empty".into()));
                }
                if self.scenarios.iter().any(|&s| s != 1 && s != 2) {
                    return Err(Error::InvalidConfig("scenarios must be 1 or 2".into()));
                }
                if self.partition_windows < 2 {
                    return Err(Error::InvalidConfig(
                        "partition_windows must be at least 2".into(),
                    ));
                }
            }
            ExperimentId::SpikeSlab => {
                if self.spike_windows < 2 {
                    return Err(Error::InvalidConfig(
                        "spike_windows must be at least 2".into(),
                    ));
                }
                positive_grid("events_target", &[self.events_target])?;
            }
        }
        Ok(())
    }

    fn fit_config(&self, seed: u64) -> FitConfig {
        FitConfig {
            restarts: self.restarts,
            seed,
            m_policy: self.m_policy,
            max_iters: self.max_iters,
            ..FitConfig::default()
        }
    }
}

// ---------------------------------------------------------------------------
// Seeding and table plumbing
// ---------------------------------------------------------------------------

/// One u64 drawn from a named substream; rows record it so any single
/// trial can be replayed in isolation.
fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    substream(seed, path).next_u64()
}

/// Splits a trial seed into independent simulation and fit seeds, keeping
/// the optimizer starts decorrelated from the data.
fn sim_fit_seeds(trial_seed: u64) -> (u64, u64) {
    (derive_seed(trial_seed, &[0]), derive_seed(trial_seed, &[1]))
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt_text(e: &Option<String>) -> String {
    e.clone().unwrap_or_default()
}

/// Renders rows to CSV with the usual quoting rules.
fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for row in rows {
        w.write_record(&row).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("flush in-memory csv")).expect("csv is utf-8")
}

/// A named CSV table ready to be written to disk.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub csv: String,
}

impl Table {
    fn new(name: &str, csv: String) -> Self {
        Self { name: name.into(), csv }
    }
}

/// Mean seconds per fit for one grid cell; manifest-only so the CSV tables
/// stay byte-stable.
#[derive(Debug, Clone, Serialize)]
pub struct CellTiming {
    pub cell: String,
    pub fits: usize,
    pub mean_fit_seconds: f64,
}

/// Run metadata written next to the tables.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub experiment: String,
    pub package: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub total_seconds: f64,
    pub failed_trials: usize,
    pub timing: Vec<CellTiming>,
}

/// Everything one experiment run produced.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub manifest: RunManifest,
    pub tables: Vec<Table>,
}

impl ExperimentOutput {
    /// Writes `<experiment>_<table>.csv` files plus `<experiment>_manifest.json`
    /// under `dir`, creating it if needed. Returns the written paths.
    pub fn write_to_dir(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for table in &self.tables {
            let path = dir.join(format!("{}_{}.csv", self.manifest.experiment, table.name));
            std::fs::write(&path, &table.csv)?;
            written.push(path);
        }
        let path = dir.join(format!("{}_manifest.json", self.manifest.experiment));
        let mut body = serde_json::to_string_pretty(&self.manifest)?;
        body.push('\n');
        std::fs::write(&path, body)?;
        written.push(path);
        Ok(written)
    }
}

// ---------------------------------------------------------------------------
// Univariate sweeps
// ---------------------------------------------------------------------------

/// The four partially-known univariate models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UniModel {
    QMu,
    QAlpha,
    QBeta,
    QLambda0,
}

impl UniModel {
    pub const ALL: [UniModel; 4] =
        [UniModel::QMu, UniModel::QAlpha, UniModel::QBeta, UniModel::QLambda0];

    pub fn label(self) -> &'static str {
        match self {
            UniModel::QMu => "q_mu",
            UniModel::QAlpha => "q_alpha",
            UniModel::QBeta => "q_beta",
            UniModel::QLambda0 => "q_lambda0",
        }
    }

    /// Spec with the known coordinate pinned to the generating value.
    pub fn spec(self, truth: &NoisyHawkesParams) -> ModelSpec {
        match self {
            UniModel::QMu => ModelSpec::q_mu(truth.mu[0]),
            UniModel::QAlpha => ModelSpec::q_alpha(truth.alpha[0][0]),
            UniModel::QBeta => ModelSpec::q_beta(truth.beta[0]),
            UniModel::QLambda0 => ModelSpec::q_lambda0(truth.lambda0),
        }
    }
}

/// Whether a univariate sweep walks the horizon or the noise ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepAxis {
    Horizon,
    Noise,
}

impl SweepAxis {
    fn column(self) -> &'static str {
        match self {
            SweepAxis::Horizon => "t",
            SweepAxis::Noise => "noise_ratio",
        }
    }
}

/// One univariate fit. Estimate columns carry the full parameter vector;
/// the pinned coordinate equals the truth bit-for-bit.
#[derive(Debug, Clone, Serialize)]
pub struct UniTrialRow {
    pub model: &'static str,
    pub cell: f64,
    pub trial: usize,
    pub seed: u64,
    pub n_events: usize,
    pub mu_hat: f64,
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub lambda0_hat: f64,
    /// Euclidean error of the free coordinates over their true norm.
    pub rel_error: f64,
    pub fit_seconds: f64,
    pub error: Option<String>,
}

/// Per-cell aggregate over trials.
#[derive(Debug, Clone, Serialize)]
pub struct UniCellRow {
    pub model: &'static str,
    pub cell: f64,
    pub trials: usize,
    pub failed: usize,
    pub mean_rel_error: f64,
    pub sd_rel_error: f64,
    pub mean_fit_seconds: f64,
    /// True when at least one trial failed, so the means cover a subset.
    pub partial: bool,
}

/// Output of [`run_univariate_sweep`].
#[derive(Debug, Clone, Serialize)]
pub struct UnivariateSweep {
    pub axis: SweepAxis,
    pub trials: Vec<UniTrialRow>,
    pub cells: Vec<UniCellRow>,
}

impl UnivariateSweep {
    pub fn trials_csv(&self) -> String {
        let header = [
            "model",
            self.axis.column(),
            "trial",
            "seed",
            "n_events",
            "mu_hat",
            "alpha_hat",
            "beta_hat",
            "lambda0_hat",
            "rel_error",
            "error",
        ];
        csv_table(
            &header,
            self.trials.iter().map(|r| {
                vec![
                    r.model.to_string(),
                    num(r.cell),
                    r.trial.to_string(),
                    r.seed.to_string(),
                    r.n_events.to_string(),
                    num(r.mu_hat),
                    num(r.alpha_hat),
                    num(r.beta_hat),
                    num(r.lambda0_hat),
                    num(r.rel_error),
                    opt_text(&r.error),
                ]
            }),
        )
    }

    pub fn cells_csv(&self) -> String {
        let header = [
            "model",
            self.axis.column(),
            "trials",
            "failed",
            "mean_rel_error",
            "sd_rel_error",
            "partial",
        ];
        csv_table(
            &header,
            self.cells.iter().map(|c| {
                vec![
                    c.model.to_string(),
                    num(c.cell),
                    c.trials.to_string(),
                    c.failed.to_string(),
                    num(c.mean_rel_error),
                    num(c.sd_rel_error),
                    c.partial.to_string(),
                ]
            }),
        )
    }

    /// Cell lookup for assertions and summaries.
    pub fn cell(&self, model: UniModel, cell: f64) -> Option<&UniCellRow> {
        self.cells.iter().find(|c| c.model == model.label() && c.cell == cell)
    }
}

/// Free-coordinate relative error, normalized by the norm of the true
/// free coordinates.
fn relative_error(spec: &ModelSpec, estimate: &NoisyHawkesParams, truth: &NoisyHawkesParams) -> Result<f64> {
    let xs = spec.pack(estimate)?;
    let ts = spec.pack(truth)?;
    let diff: f64 = xs.iter().zip(&ts).map(|(x, t)| (x - t) * (x - t)).sum();
    let norm: f64 = ts.iter().map(|t| t * t).sum();
    if norm == 0.0 {
        return Err(Error::InvalidInput("true free coordinates are all zero".into()));
    }
    Ok((diff / norm).sqrt())
}

struct FitOutcome {
    theta: NoisyHawkesParams,
    rel_error: f64,
    seconds: f64,
    error: Option<String>,
}

/// Simulates, fits and scores one trial; failures come back as rows with
/// NaN estimates and the error message attached.
fn run_fit_trial(
    truth: &NoisyHawkesParams,
    spec: &ModelSpec,
    horizon: f64,
    trial_seed: u64,
    cfg: &ExperimentConfig,
) -> Result<(EventSeries, FitOutcome)> {
    let (sim_seed, fit_seed) = sim_fit_seeds(trial_seed);
    let events = simulate_noisy(truth, &SimulationConfig::new(horizon, sim_seed))?;
    let start = Instant::now();
    let fitted = fit(spec, &events, &cfg.fit_config(fit_seed));
    let seconds = start.elapsed().as_secs_f64();
    let outcome = match fitted {
        Ok(res) => {
            let rel = relative_error(spec, &res.theta, truth)?;
            FitOutcome { theta: res.theta, rel_error: rel, seconds, error: None }
        }
        Err(e) => FitOutcome {
            theta: nan_params(truth.dim()),
            rel_error: f64::NAN,
            seconds,
            error: Some(e.to_string()),
        },
    };
    Ok((events, outcome))
}

/// Placeholder estimates for failed trials.
fn nan_params(dim: usize) -> NoisyHawkesParams {
    NoisyHawkesParams {
        mu: vec![f64::NAN; dim],
        alpha: vec![vec![f64::NAN; dim]; dim],
        beta: vec![f64::NAN; dim],
        lambda0: f64::NAN,
    }
}

/// Univariate error sweep over the horizon grid (id `uni-horizon`) or the
/// noise-ratio grid (id `uni-noise`), for each of the four partially-known
/// models.
pub fn run_univariate_sweep(cfg: &ExperimentConfig) -> Result<UnivariateSweep> {
    cfg.validate()?;
    let id = cfg.id()?;
    let axis = match id {
        ExperimentId::UniHorizon => SweepAxis::Horizon,
        ExperimentId::UniNoise => SweepAxis::Noise,
        other => {
            return Err(Error::InvalidConfig(format!(
                "run_univariate_sweep expects uni-horizon or uni-noise, got {other}"
            )))
        }
    };
    // Cell layout: (axis value, horizon, noise level).
    let m_h = UNI_MU / (1.0 - UNI_ALPHA);
    let grid: Vec<(f64, f64, f64)> = match axis {
        SweepAxis::Horizon => cfg
            .horizons
            .iter()
            .map(|&t| (t, t, HORIZON_SWEEP_LAMBDA0))
            .collect(),
        SweepAxis::Noise => cfg
            .noise_ratios
            .iter()
            .map(|&r| (r, cfg.noise_horizon, r * m_h))
            .collect(),
    };

    let mut jobs = Vec::new();
    for (mi, model) in UniModel::ALL.into_iter().enumerate() {
        for (ci, &(cell, horizon, lambda0)) in grid.iter().enumerate() {
            for trial in 0..cfg.trials {
                let seed =
                    derive_seed(cfg.seed, &[id.tag(), mi as u64, ci as u64, trial as u64]);
                jobs.push((model, cell, horizon, lambda0, trial, seed));
            }
        }
    }

    let trials: Vec<UniTrialRow> = jobs
        .par_iter()
        .map(|&(model, cell, horizon, lambda0, trial, seed)| -> Result<UniTrialRow> {
            let truth = NoisyHawkesParams::univariate(UNI_MU, UNI_ALPHA, UNI_BETA, lambda0)?;
            let spec = model.spec(&truth);
            let (events, out) = run_fit_trial(&truth, &spec, horizon, seed, cfg)?;
            Ok(UniTrialRow {
                model: model.label(),
                cell,
                trial,
                seed,
                n_events: events.total_count(),
                mu_hat: out.theta.mu[0],
                alpha_hat: out.theta.alpha[0][0],
                beta_hat: out.theta.beta[0],
                lambda0_hat: out.theta.lambda0,
                rel_error: out.rel_error,
                fit_seconds: out.seconds,
                error: out.error,
            })
        })
        .collect::<Result<_>>()?;

    let mut cells = Vec::new();
    for model in UniModel::ALL {
        for &(cell, _, _) in &grid {
            let in_cell: Vec<&UniTrialRow> = trials
                .iter()
                .filter(|r| r.model == model.label() && r.cell == cell)
                .collect();
            let ok: Vec<f64> =
                in_cell.iter().filter(|r| r.error.is_none()).map(|r| r.rel_error).collect();
            let failed = in_cell.len() - ok.len();
            cells.push(UniCellRow {
                model: model.label(),
                cell,
                trials: in_cell.len(),
                failed,
                mean_rel_error: mean(&ok),
                sd_rel_error: sample_sd(&ok),
                mean_fit_seconds: mean(
                    &in_cell.iter().map(|r| r.fit_seconds).collect::<Vec<_>>(),
                ),
                partial: failed > 0,
            });
        }
    }
    Ok(UnivariateSweep { axis, trials, cells })
}

// ---------------------------------------------------------------------------
// Compensation study
// ---------------------------------------------------------------------------

/// One fit with the decay pinned. `m_hat` is the implied mean intensity
/// `lambda0_hat + mu_hat / (1 - alpha_hat)`.
#[derive(Debug, Clone, Serialize)]
pub struct CompensationRow {
    pub trial: usize,
    pub seed: u64,
    pub n_events: usize,
    pub mu_hat: f64,
    pub alpha_hat: f64,
    pub lambda0_hat: f64,
    pub m_hat: f64,
    pub fit_seconds: f64,
    pub error: Option<String>,
}

/// Output of [`run_compensation_study`]; rows sorted by `mu_hat` so the
/// compensation pattern reads off the table directly.
#[derive(Debug, Clone, Serialize)]
pub struct CompensationStudy {
    pub rows: Vec<CompensationRow>,
    pub corr_mu_alpha: f64,
    pub corr_mu_lambda0: f64,
    /// Mean of |m_hat - m| / m over successful trials.
    pub mean_m_rel_error: f64,
    /// True mean intensity of the generating process.
    pub true_m: f64,
    pub failed: usize,
}

impl CompensationStudy {
    pub fn trials_csv(&self) -> String {
        csv_table(
            &[
                "trial",
                "seed",
                "n_events",
                "mu_hat",
                "alpha_hat",
                "lambda0_hat",
                "m_hat",
                "error",
            ],
            self.rows.iter().map(|r| {
                vec![
                    r.trial.to_string(),
                    r.seed.to_string(),
                    r.n_events.to_string(),
                    num(r.mu_hat),
                    num(r.alpha_hat),
                    num(r.lambda0_hat),
                    num(r.m_hat),
                    opt_text(&r.error),
                ]
            }),
        )
    }

    pub fn summary_csv(&self) -> String {
        csv_table(
            &[
                "trials",
                "failed",
                "corr_mu_alpha",
                "corr_mu_lambda0",
                "mean_m_rel_error",
                "true_m",
            ],
            [vec![
                self.rows.len().to_string(),
                self.failed.to_string(),
                num(self.corr_mu_alpha),
                num(self.corr_mu_lambda0),
                num(self.mean_m_rel_error),
                num(self.true_m),
            ]],
        )
    }
}

/// Fits the decay-pinned model repeatedly and tabulates the compensation
/// between the level, the branching ratio and the noise (id
/// `uni-compensation`).
pub fn run_compensation_study(cfg: &ExperimentConfig) -> Result<CompensationStudy> {
    cfg.validate()?;
    let id = cfg.id()?;
    if id != ExperimentId::UniCompensation {
        return Err(Error::InvalidConfig(format!(
            "run_compensation_study expects uni-compensation, got {id}"
        )));
    }
    let truth = NoisyHawkesParams::univariate(UNI_MU, UNI_ALPHA, UNI_BETA, COMPENSATION_LAMBDA0)?;
    let spec = UniModel::QBeta.spec(&truth);
    let true_m = truth.lambda0 + truth.mu[0] / (1.0 - truth.alpha[0][0]);

    let mut rows: Vec<CompensationRow> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| -> Result<CompensationRow> {
            let seed = derive_seed(cfg.seed, &[id.tag(), trial as u64]);
            let (events, out) =
                run_fit_trial(&truth, &spec, cfg.compensation_horizon, seed, cfg)?;
            let m_hat = out.theta.lambda0 + out.theta.mu[0] / (1.0 - out.theta.alpha[0][0]);
            Ok(CompensationRow {
                trial,
                seed,
                n_events: events.total_count(),
                mu_hat: out.theta.mu[0],
                alpha_hat: out.theta.alpha[0][0],
                lambda0_hat: out.theta.lambda0,
                m_hat,
                fit_seconds: out.seconds,
                error: out.error,
            })
        })
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.mu_hat.total_cmp(&b.mu_hat));

    let ok: Vec<&CompensationRow> = rows.iter().filter(|r| r.error.is_none()).collect();
    let failed = rows.len() - ok.len();
    let mus: Vec<f64> = ok.iter().map(|r| r.mu_hat).collect();
    let alphas: Vec<f64> = ok.iter().map(|r| r.alpha_hat).collect();
    let noises: Vec<f64> = ok.iter().map(|r| r.lambda0_hat).collect();
    let m_errs: Vec<f64> = ok.iter().map(|r| (r.m_hat - true_m).abs() / true_m).collect();
    Ok(CompensationStudy {
        corr_mu_alpha: pearson(&mus, &alphas),
        corr_mu_lambda0: pearson(&mus, &noises),
        mean_m_rel_error: mean(&m_errs),
        true_m,
        failed,
        rows,
    })
}

// ---------------------------------------------------------------------------
// Bivariate studies
// ---------------------------------------------------------------------------

pub fn scenario_alpha(scenario: u8) -> Result<[[f64; 2]; 2]> {
    match scenario {
        1 => Ok(SCENARIO_ONE_ALPHA),
        2 => Ok(SCENARIO_TWO_ALPHA),
        other => Err(Error::InvalidConfig(format!("unknown scenario {other}"))),
    }
}

fn scenario_truth(scenario: u8) -> Result<NoisyHawkesParams> {
    NoisyHawkesParams::bivariate(BI_MU, scenario_alpha(scenario)?, BI_BETA, BI_LAMBDA0)
}

fn scenario_mask(scenario: u8) -> Result<[[bool; 2]; 2]> {
    let alpha = scenario_alpha(scenario)?;
    Ok([
        [alpha[0][0] > 0.0, alpha[0][1] > 0.0],
        [alpha[1][0] > 0.0, alpha[1][1] > 0.0],
    ])
}

/// One fit in the interaction-strength sweep; the free coordinates are
/// `mu_1, mu_2, alpha_21, beta_2, lambda0`.
#[derive(Debug, Clone, Serialize)]
pub struct InteractionTrialRow {
    pub alpha21: f64,
    pub horizon: f64,
    pub trial: usize,
    pub seed: u64,
    pub n_events: usize,
    pub mu1_hat: f64,
    pub mu2_hat: f64,
    pub alpha21_hat: f64,
    pub beta2_hat: f64,
    pub lambda0_hat: f64,
    pub rel_error: f64,
    pub fit_seconds: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InteractionCellRow {
    pub alpha21: f64,
    pub horizon: f64,
    pub trials: usize,
    pub failed: usize,
    pub mean_rel_error: f64,
    pub sd_rel_error: f64,
    pub mean_fit_seconds: f64,
    pub partial: bool,
}

/// One fit in the reduced-versus-full comparison. `model` is `full` or
/// `reduced`; estimate columns carry all nine coordinates.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioTrialRow {
    pub scenario: u8,
    pub model: &'static str,
    pub trial: usize,
    pub seed: u64,
    pub n_events: usize,
    pub mu1_hat: f64,
    pub mu2_hat: f64,
    pub alpha11_hat: f64,
    pub alpha12_hat: f64,
    pub alpha21_hat: f64,
    pub alpha22_hat: f64,
    pub beta1_hat: f64,
    pub beta2_hat: f64,
    pub lambda0_hat: f64,
    pub rel_error: f64,
    pub fit_seconds: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioCellRow {
    pub scenario: u8,
    pub model: &'static str,
    pub trials: usize,
    pub failed: usize,
    pub mean_rel_error: f64,
    pub sd_rel_error: f64,
    pub mean_fit_seconds: f64,
    pub partial: bool,
}

/// Support screen for one scenario, either over the independent trial
/// fits (`replicates`) or over a partitioned single realization
/// (`partitioned`).
#[derive(Debug, Clone, Serialize)]
pub struct SupportTable {
    pub scenario: u8,
    pub source: &'static str,
    pub report: Option<SupportReport>,
    /// Reduced-model re-estimate on the undivided series, when the
    /// partitioned pipeline performed one.
    pub refit: Option<NoisyHawkesParams>,
    pub notes: Vec<String>,
}

/// Output of [`run_bivariate_scenarios`].
#[derive(Debug, Clone, Serialize)]
pub struct BivariateStudy {
    pub interaction_trials: Vec<InteractionTrialRow>,
    pub interaction_cells: Vec<InteractionCellRow>,
    pub scenario_trials: Vec<ScenarioTrialRow>,
    pub scenario_cells: Vec<ScenarioCellRow>,
    pub support: Vec<SupportTable>,
}

impl BivariateStudy {
    pub fn interaction_trials_csv(&self) -> String {
        csv_table(
            &[
                "alpha21",
                "t",
                "trial",
                "seed",
                "n_events",
                "mu1_hat",
                "mu2_hat",
                "alpha21_hat",
                "beta2_hat",
                "lambda0_hat",
                "rel_error",
                "error",
            ],
            self.interaction_trials.iter().map(|r| {
                vec![
                    num(r.alpha21),
                    num(r.horizon),
                    r.trial.to_string(),
                    r.seed.to_string(),
                    r.n_events.to_string(),
                    num(r.mu1_hat),
                    num(r.mu2_hat),
                    num(r.alpha21_hat),
                    num(r.beta2_hat),
                    num(r.lambda0_hat),
                    num(r.rel_error),
                    opt_text(&r.error),
                ]
            }),
        )
    }

    pub fn interaction_cells_csv(&self) -> String {
        csv_table(
            &[
                "alpha21",
                "t",
                "trials",
                "failed",
                "mean_rel_error",
                "sd_rel_error",
                "partial",
            ],
            self.interaction_cells.iter().map(|c| {
                vec![
                    num(c.alpha21),
                    num(c.horizon),
                    c.trials.to_string(),
                    c.failed.to_string(),
                    num(c.mean_rel_error),
                    num(c.sd_rel_error),
                    c.partial.to_string(),
                ]
            }),
        )
    }

    pub fn scenario_trials_csv(&self) -> String {
        csv_table(
            &[
                "scenario",
                "model",
                "trial",
                "seed",
                "n_events",
                "mu1_hat",
                "mu2_hat",
                "alpha11_hat",
                "alpha12_hat",
                "alpha21_hat",
                "alpha22_hat",
                "beta1_hat",
                "beta2_hat",
                "lambda0_hat",
                "rel_error",
                "error",
            ],
            self.scenario_trials.iter().map(|r| {
                vec![
                    r.scenario.to_string(),
                    r.model.to_string(),
                    r.trial.to_string(),
                    r.seed.to_string(),
                    r.n_events.to_string(),
                    num(r.mu1_hat),
                    num(r.mu2_hat),
                    num(r.alpha11_hat),
                    num(r.alpha12_hat),
                    num(r.alpha21_hat),
                    num(r.alpha22_hat),
                    num(r.beta1_hat),
                    num(r.beta2_hat),
                    num(r.lambda0_hat),
                    num(r.rel_error),
                    opt_text(&r.error),
                ]
            }),
        )
    }

    pub fn scenario_cells_csv(&self) -> String {
        csv_table(
            &[
                "scenario",
                "model",
                "trials",
                "failed",
                "mean_rel_error",
                "sd_rel_error",
                "partial",
            ],
            self.scenario_cells.iter().map(|c| {
                vec![
                    c.scenario.to_string(),
                    c.model.to_string(),
                    c.trials.to_string(),
                    c.failed.to_string(),
                    num(c.mean_rel_error),
                    num(c.sd_rel_error),
                    c.partial.to_string(),
                ]
            }),
        )
    }

    /// Quantile / null-proportion screen per interaction entry, one block
    /// per (scenario, source).
    pub fn support_csv(&self) -> String {
        let mut rows = Vec::new();
        for table in &self.support {
            if let Some(report) = &table.report {
                for i in 0..report.dim() {
                    for j in 0..report.dim() {
                        rows.push(vec![
                            table.scenario.to_string(),
                            table.source.to_string(),
                            format!("alpha_{}{}", i + 1, j + 1),
                            num(report.quantiles[i][j]),
                            num(report.null_props[i][j]),
                            report.support_mask[i][j].to_string(),
                        ]);
                    }
                }
            } else {
                rows.push(vec![
                    table.scenario.to_string(),
                    table.source.to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    table.notes.join("; "),
                ]);
            }
        }
        csv_table(
            &["scenario", "source", "entry", "quantile", "null_proportion", "in_support"],
            rows,
        )
    }

    /// Partitioned-pipeline refits, one row per scenario that produced one.
    pub fn refits_csv(&self) -> String {
        let mut rows = Vec::new();
        for table in &self.support {
            if let Some(theta) = &table.refit {
                rows.push(vec![
                    table.scenario.to_string(),
                    table.source.to_string(),
                    num(theta.mu[0]),
                    num(theta.mu[1]),
                    num(theta.alpha[0][0]),
                    num(theta.alpha[0][1]),
                    num(theta.alpha[1][0]),
                    num(theta.alpha[1][1]),
                    num(theta.beta[0]),
                    num(theta.beta[1]),
                    num(theta.lambda0),
                ]);
            }
        }
        csv_table(
            &[
                "scenario",
                "source",
                "mu1_hat",
                "mu2_hat",
                "alpha11_hat",
                "alpha12_hat",
                "alpha21_hat",
                "alpha22_hat",
                "beta1_hat",
                "beta2_hat",
                "lambda0_hat",
            ],
            rows,
        )
    }
}

/// The three bivariate studies under id `bi-scenarios`: the
/// interaction-strength sweep in the one-cross-interaction reduced model,
/// the reduced-versus-full comparison with its replicate support screen,
/// and the partitioned single-realization variant.
pub fn run_bivariate_scenarios(cfg: &ExperimentConfig) -> Result<BivariateStudy> {
    cfg.validate()?;
    let id = cfg.id()?;
    if id != ExperimentId::BiScenarios {
        return Err(Error::InvalidConfig(format!(
            "run_bivariate_scenarios expects bi-scenarios, got {id}"
        )));
    }
    let tag = id.tag();

    // Part one: sweep the strength of the single cross-interaction.
    let sweep_spec = ModelSpec::bivariate_with_support([[false, false], [true, false]]);
    let mut jobs = Vec::new();
    for (ai, &a21) in cfg.alpha21_levels.iter().enumerate() {
        for (ti, &horizon) in cfg.bivariate_horizons.iter().enumerate() {
            for trial in 0..cfg.trials {
                let seed =
                    derive_seed(cfg.seed, &[tag, 0, ai as u64, ti as u64, trial as u64]);
                jobs.push((a21, horizon, trial, seed));
            }
        }
    }
    let interaction_trials: Vec<InteractionTrialRow> = jobs
        .par_iter()
        .map(|&(a21, horizon, trial, seed)| -> Result<InteractionTrialRow> {
            let truth =
                NoisyHawkesParams::bivariate(BI_MU, [[0.0, 0.0], [a21, 0.0]], BI_BETA, BI_LAMBDA0)?;
            let (events, out) = run_fit_trial(&truth, &sweep_spec, horizon, seed, cfg)?;
            Ok(InteractionTrialRow {
                alpha21: a21,
                horizon,
                trial,
                seed,
                n_events: events.total_count(),
                mu1_hat: out.theta.mu[0],
                mu2_hat: out.theta.mu[1],
                alpha21_hat: out.theta.alpha[1][0],
                beta2_hat: out.theta.beta[1],
                lambda0_hat: out.theta.lambda0,
                rel_error: out.rel_error,
                fit_seconds: out.seconds,
                error: out.error,
            })
        })
        .collect::<Result<_>>()?;

    let mut interaction_cells = Vec::new();
    for &a21 in &cfg.alpha21_levels {
        for &horizon in &cfg.bivariate_horizons {
            let in_cell: Vec<&InteractionTrialRow> = interaction_trials
                .iter()
                .filter(|r| r.alpha21 == a21 && r.horizon == horizon)
                .collect();
            let ok: Vec<f64> =
                in_cell.iter().filter(|r| r.error.is_none()).map(|r| r.rel_error).collect();
            let failed = in_cell.len() - ok.len();
            interaction_cells.push(InteractionCellRow {
                alpha21: a21,
                horizon,
                trials: in_cell.len(),
                failed,
                mean_rel_error: mean(&ok),
                sd_rel_error: sample_sd(&ok),
                mean_fit_seconds: mean(
                    &in_cell.iter().map(|r| r.fit_seconds).collect::<Vec<_>>(),
                ),
                partial: failed > 0,
            });
        }
    }

    // Part two: reduced versus full model on the two interaction scenarios,
    // fitting both models on the same realization.
    let full_spec = ModelSpec::bivariate_full();
    let mut jobs = Vec::new();
    for &scenario in &cfg.scenarios {
        for trial in 0..cfg.trials {
            let seed = derive_seed(cfg.seed, &[tag, 1, scenario as u64, trial as u64]);
            jobs.push((scenario, trial, seed));
        }
    }
    let scenario_pairs: Vec<(ScenarioTrialRow, ScenarioTrialRow, Option<FitResult>)> = jobs
        .par_iter()
        .map(|&(scenario, trial, seed)| {
            let truth = scenario_truth(scenario)?;
            let reduced_spec = ModelSpec::bivariate_with_support(scenario_mask(scenario)?);
            let sim_seed = derive_seed(seed, &[0]);
            let full_seed = derive_seed(seed, &[1]);
            let reduced_seed = derive_seed(seed, &[2]);
            let events =
                simulate_noisy(&truth, &SimulationConfig::new(cfg.scenario_horizon, sim_seed))?;
            let n_events = events.total_count();

            let fit_one = |spec: &ModelSpec,
                               label: &'static str,
                               fit_seed: u64|
             -> Result<(ScenarioTrialRow, Option<FitResult>)> {
                let start = Instant::now();
                let fitted = fit(spec, &events, &cfg.fit_config(fit_seed));
                let seconds = start.elapsed().as_secs_f64();
                let (theta, rel, err, keep) = match fitted {
                    Ok(res) => {
                        let rel = relative_error(spec, &res.theta, &truth)?;
                        (res.theta.clone(), rel, None, Some(res))
                    }
                    Err(e) => (nan_params(2), f64::NAN, Some(e.to_string()), None),
                };
                Ok((
                    ScenarioTrialRow {
                        scenario,
                        model: label,
                        trial,
                        seed,
                        n_events,
                        mu1_hat: theta.mu[0],
                        mu2_hat: theta.mu[1],
                        alpha11_hat: theta.alpha[0][0],
                        alpha12_hat: theta.alpha[0][1],
                        alpha21_hat: theta.alpha[1][0],
                        alpha22_hat: theta.alpha[1][1],
                        beta1_hat: theta.beta[0],
                        beta2_hat: theta.beta[1],
                        lambda0_hat: theta.lambda0,
                        rel_error: rel,
                        fit_seconds: seconds,
                        error: err,
                    },
                    keep,
                ))
            };

            let (full_row, full_fit) = fit_one(&full_spec, "full", full_seed)?;
            let (reduced_row, _) = fit_one(&reduced_spec, "reduced", reduced_seed)?;
            Ok((full_row, reduced_row, full_fit))
        })
        .collect::<Result<_>>()?;

    let mut scenario_trials = Vec::new();
    let mut full_fits: Vec<(u8, FitResult)> = Vec::new();
    for (full_row, reduced_row, full_fit) in scenario_pairs {
        if let Some(res) = full_fit {
            full_fits.push((full_row.scenario, res));
        }
        scenario_trials.push(full_row);
        scenario_trials.push(reduced_row);
    }
    // Group rows by scenario, full before reduced, trials in order.
    scenario_trials.sort_by_key(|r| (r.scenario, r.model == "reduced", r.trial));

    let mut scenario_cells = Vec::new();
    for &scenario in &cfg.scenarios {
        for model in ["full", "reduced"] {
            let in_cell: Vec<&ScenarioTrialRow> = scenario_trials
                .iter()
                .filter(|r| r.scenario == scenario && r.model == model)
                .collect();
            let ok: Vec<f64> =
                in_cell.iter().filter(|r| r.error.is_none()).map(|r| r.rel_error).collect();
            let failed = in_cell.len() - ok.len();
            scenario_cells.push(ScenarioCellRow {
                scenario,
                model: if model == "full" { "full" } else { "reduced" },
                trials: in_cell.len(),
                failed,
                mean_rel_error: mean(&ok),
                sd_rel_error: sample_sd(&ok),
                mean_fit_seconds: mean(
                    &in_cell.iter().map(|r| r.fit_seconds).collect::<Vec<_>>(),
                ),
                partial: failed > 0,
            });
        }
    }

    // Support screens: the low quantile and null share of each interaction
    // estimate, over the replicate full fits and over a partitioned single
    // realization.
    let mut support = Vec::new();
    for &scenario in &cfg.scenarios {
        let fits: Vec<FitResult> = full_fits
            .iter()
            .filter(|(s, _)| *s == scenario)
            .map(|(_, f)| f.clone())
            .collect();
        let (report, notes) = match detect_support_with(
            &fits,
            SupportRule::Quantile { level: 0.05 },
            Correction::None,
            NULL_ALPHA_THRESHOLD,
        ) {
            Ok(rep) => (Some(rep), Vec::new()),
            Err(e) => (None, vec![e.to_string()]),
        };
        support.push(SupportTable { scenario, source: "replicates", report, refit: None, notes });
    }
    for &scenario in &cfg.scenarios {
        let truth = scenario_truth(scenario)?;
        let sim_seed = derive_seed(cfg.seed, &[tag, 2, scenario as u64, 0]);
        let fit_seed = derive_seed(cfg.seed, &[tag, 2, scenario as u64, 1]);
        let events =
            simulate_noisy(&truth, &SimulationConfig::new(cfg.partition_horizon, sim_seed))?;
        let step_cfg = ThreeStepConfig {
            fit: cfg.fit_config(fit_seed),
            rule: SupportRule::Quantile { level: 0.05 },
            correction: Correction::None,
            null_threshold: None,
        };
        match three_step_fit_partitioned(&events, cfg.partition_windows, &full_spec, &step_cfg) {
            Ok(outcome) => support.push(SupportTable {
                scenario,
                source: "partitioned",
                report: Some(outcome.report),
                refit: outcome.reduced.map(|r| r.theta),
                notes: outcome.warnings.iter().map(|w| format!("{w:?}")).collect(),
            }),
            Err(e) => support.push(SupportTable {
                scenario,
                source: "partitioned",
                report: None,
                refit: None,
                notes: vec![e.to_string()],
            }),
        }
    }

    Ok(BivariateStudy {
        interaction_trials,
        interaction_cells,
        scenario_trials,
        scenario_cells,
        support,
    })
}

// ---------------------------------------------------------------------------
// Spike-and-slab support screen
// ---------------------------------------------------------------------------

/// Draws one admissible truth from the randomized generator: shifted
/// exponential decays and noise, base rates filtered to comparable sizes,
/// and interaction entries that are zero with probability 1/3 (plus a 0.1
/// floor), redrawn until the branching matrix is safely subcritical.
pub fn sample_spike_slab_truth(rng: &mut impl Rng) -> NoisyHawkesParams {
    let exp_half = Exp::new(0.5).expect("rate 1/2 is valid");
    let beta = [exp_half.sample(rng) + 0.5, exp_half.sample(rng) + 0.5];
    let lambda0 = exp_half.sample(rng) + 0.1;
    let mu = loop {
        let m1: f64 = exp_half.sample(rng);
        let m2: f64 = exp_half.sample(rng);
        let ratio = m1 / m2;
        if ratio > 0.5 && ratio < 2.0 {
            break [m1, m2];
        }
    };
    let alpha = loop {
        let mut a = [[0.0; 2]; 2];
        for row in &mut a {
            for entry in row.iter_mut() {
                let active = rng.random::<f64>() < 2.0 / 3.0;
                let draw = if active { exp_half.sample(rng) } else { 0.0 };
                *entry = if draw < 0.1 { 0.0 } else { draw };
            }
        }
        let rows: Vec<Vec<f64>> = a.iter().map(|r| r.to_vec()).collect();
        if spectral_radius(&rows).expect("2x2 matrix") <= 0.95 {
            break a;
        }
    };
    NoisyHawkesParams::bivariate(mu, alpha, beta, lambda0)
        .expect("generator only emits admissible parameters")
}

/// Row-major 0/1 encoding of an interaction mask, `1` meaning in-support.
pub fn mask_code(mask: &[Vec<bool>]) -> String {
    mask.iter()
        .flat_map(|row| row.iter().map(|&b| if b { '1' } else { '0' }))
        .collect()
}

/// One spike-and-slab replication: the drawn truth, the detected mask and
/// whether it matched exactly.
#[derive(Debug, Clone, Serialize)]
pub struct SpikeSlabRow {
    pub rep: usize,
    pub seed: u64,
    pub truth: NoisyHawkesParams,
    pub horizon: f64,
    pub n_events: usize,
    /// Subsample fits that converged and entered the screen.
    pub n_subsamples: usize,
    pub true_mask: String,
    pub est_mask: String,
    pub exact_match: Option<bool>,
    pub fit_seconds: f64,
    pub error: Option<String>,
}

/// Accuracy over the replications whose noise level stays below
/// `lambda_max`, mirroring the accuracy-versus-noise curve.
#[derive(Debug, Clone, Serialize)]
pub struct AccuracyPoint {
    pub lambda_max: f64,
    pub considered: usize,
    /// Share of successful replications the threshold keeps.
    pub proportion: f64,
    pub accuracy: f64,
}

/// Output of [`run_spike_slab_study`].
#[derive(Debug, Clone, Serialize)]
pub struct SpikeSlabStudy {
    pub rows: Vec<SpikeSlabRow>,
    pub curve: Vec<AccuracyPoint>,
    pub overall_accuracy: f64,
    pub failed: usize,
}

impl SpikeSlabStudy {
    pub fn rows_csv(&self) -> String {
        csv_table(
            &[
                "rep",
                "seed",
                "mu1",
                "mu2",
                "alpha11",
                "alpha12",
                "alpha21",
                "alpha22",
                "beta1",
                "beta2",
                "lambda0",
                "horizon",
                "n_events",
                "n_subsamples",
                "true_mask",
                "est_mask",
                "exact_match",
                "error",
            ],
            self.rows.iter().map(|r| {
                vec![
                    r.rep.to_string(),
                    r.seed.to_string(),
                    num(r.truth.mu[0]),
                    num(r.truth.mu[1]),
                    num(r.truth.alpha[0][0]),
                    num(r.truth.alpha[0][1]),
                    num(r.truth.alpha[1][0]),
                    num(r.truth.alpha[1][1]),
                    num(r.truth.beta[0]),
                    num(r.truth.beta[1]),
                    num(r.truth.lambda0),
                    num(r.horizon),
                    r.n_events.to_string(),
                    r.n_subsamples.to_string(),
                    r.true_mask.clone(),
                    r.est_mask.clone(),
                    r.exact_match.map(|b| b.to_string()).unwrap_or_default(),
                    opt_text(&r.error),
                ]
            }),
        )
    }

    pub fn curve_csv(&self) -> String {
        csv_table(
            &["lambda_max", "considered", "proportion", "accuracy"],
            self.curve.iter().map(|p| {
                vec![
                    num(p.lambda_max),
                    p.considered.to_string(),
                    num(p.proportion),
                    num(p.accuracy),
                ]
            }),
        )
    }

    pub fn summary_csv(&self) -> String {
        csv_table(
            &["reps", "failed", "overall_accuracy"],
            [vec![
                self.rows.len().to_string(),
                self.failed.to_string(),
                num(self.overall_accuracy),
            ]],
        )
    }

    /// Accuracy restricted to successful replications with noise below
    /// `lambda_max`; `None` when nothing qualifies.
    pub fn accuracy_below(&self, lambda_max: f64) -> Option<(usize, f64)> {
        let kept: Vec<&SpikeSlabRow> = self
            .rows
            .iter()
            .filter(|r| r.error.is_none() && r.truth.lambda0 < lambda_max)
            .collect();
        if kept.is_empty() {
            return None;
        }
        let hits = kept.iter().filter(|r| r.exact_match == Some(true)).count();
        Some((kept.len(), hits as f64 / kept.len() as f64))
    }
}

/// Randomized support screen (id `spike-slab`): draw a truth, simulate one
/// realization sized by `events_target`, fit the full model on each
/// subwindow and call an interaction null when at least 30% of the
/// subsample estimates vanish. Accuracy is exact recovery of the 2x2 mask.
pub fn run_spike_slab_study(cfg: &ExperimentConfig) -> Result<SpikeSlabStudy> {
    cfg.validate()?;
    let id = cfg.id()?;
    if id != ExperimentId::SpikeSlab {
        return Err(Error::InvalidConfig(format!(
            "run_spike_slab_study expects spike-slab, got {id}"
        )));
    }
    let full_spec = ModelSpec::bivariate_full();

    let rows: Vec<SpikeSlabRow> = (0..cfg.trials)
        .into_par_iter()
        .map(|rep| -> Result<SpikeSlabRow> {
            let seed = derive_seed(cfg.seed, &[id.tag(), rep as u64]);
            let truth = sample_spike_slab_truth(&mut substream(seed, &[0]));
            let true_mask: Vec<Vec<bool>> = truth
                .alpha
                .iter()
                .map(|row| row.iter().map(|&a| a > 0.0).collect())
                .collect();
            let total_rate: f64 = mean_intensity(&truth)?.iter().sum();
            let horizon = cfg.events_target / total_rate;

            let sim_cfg = SimulationConfig::new(horizon, derive_seed(seed, &[1]));
            let events = simulate_noisy(&truth, &sim_cfg)?;
            let n_events = events.total_count();
            let parts = partition(&events, cfg.spike_windows)?;

            let start = Instant::now();
            let mut fits = Vec::new();
            let mut notes = Vec::new();
            for (w, part) in parts.iter().enumerate() {
                if part.total_count() == 0 {
                    notes.push(format!("subwindow {w} is empty"));
                    continue;
                }
                match fit(&full_spec, part, &cfg.fit_config(derive_seed(seed, &[2, w as u64]))) {
                    Ok(res) => fits.push(res),
                    Err(e) => notes.push(format!("subwindow {w}: {e}")),
                }
            }
            let seconds = start.elapsed().as_secs_f64();

            let screened = detect_support_with(
                &fits,
                SupportRule::NullProportion { min_null: 0.3 },
                Correction::None,
                NULL_ALPHA_THRESHOLD,
            );
            let row = match screened {
                Ok(report) => {
                    let exact = report.support_mask == true_mask;
                    SpikeSlabRow {
                        rep,
                        seed,
                        truth: truth.clone(),
                        horizon,
                        n_events,
                        n_subsamples: fits.len(),
                        true_mask: mask_code(&true_mask),
                        est_mask: mask_code(&report.support_mask),
                        exact_match: Some(exact),
                        fit_seconds: seconds,
                        error: None,
                    }
                }
                Err(e) => {
                    notes.push(e.to_string());
                    SpikeSlabRow {
                        rep,
                        seed,
                        truth: truth.clone(),
                        horizon,
                        n_events,
                        n_subsamples: fits.len(),
                        true_mask: mask_code(&true_mask),
                        est_mask: String::new(),
                        exact_match: None,
                        fit_seconds: seconds,
                        error: Some(notes.join("; ")),
                    }
                }
            };
            Ok(row)
        })
        .collect::<Result<_>>()?;

    let ok: Vec<&SpikeSlabRow> = rows.iter().filter(|r| r.error.is_none()).collect();
    let failed = rows.len() - ok.len();
    let hits = ok.iter().filter(|r| r.exact_match == Some(true)).count();
    let overall_accuracy =
        if ok.is_empty() { f64::NAN } else { hits as f64 / ok.len() as f64 };

    // Running accuracy at each observed noise level, smallest first.
    let mut levels: Vec<f64> = ok.iter().map(|r| r.truth.lambda0).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let mut curve = Vec::new();
    for level in levels {
        let kept: Vec<&&SpikeSlabRow> =
            ok.iter().filter(|r| r.truth.lambda0 <= level).collect();
        let kept_hits = kept.iter().filter(|r| r.exact_match == Some(true)).count();
        curve.push(AccuracyPoint {
            lambda_max: level,
            considered: kept.len(),
            proportion: kept.len() as f64 / ok.len() as f64,
            accuracy: kept_hits as f64 / kept.len() as f64,
        });
    }

    Ok(SpikeSlabStudy { rows, curve, overall_accuracy, failed })
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

/// Runs the experiment named by the config and gathers its tables and
/// manifest. Writing to disk is left to [`ExperimentOutput::write_to_dir`].
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let started = Instant::now();
    let id = cfg.id()?;
    let (tables, timing, failed) = match id {
        ExperimentId::UniHorizon | ExperimentId::UniNoise => {
            let sweep = run_univariate_sweep(cfg)?;
            let timing = sweep
                .cells
                .iter()
                .map(|c| CellTiming {
                    cell: format!("{} {}={}", c.model, sweep.axis.column(), c.cell),
                    fits: c.trials,
                    mean_fit_seconds: c.mean_fit_seconds,
                })
                .collect();
            let failed = sweep.cells.iter().map(|c| c.failed).sum();
            let tables = vec![
                Table::new("trials", sweep.trials_csv()),
                Table::new("cells", sweep.cells_csv()),
            ];
            (tables, timing, failed)
        }
        ExperimentId::UniCompensation => {
            let study = run_compensation_study(cfg)?;
            let timing = vec![CellTiming {
                cell: "q_beta".into(),
                fits: study.rows.len(),
                mean_fit_seconds: mean(
                    &study.rows.iter().map(|r| r.fit_seconds).collect::<Vec<_>>(),
                ),
            }];
            let failed = study.failed;
            let tables = vec![
                Table::new("trials", study.trials_csv()),
                Table::new("summary", study.summary_csv()),
            ];
            (tables, timing, failed)
        }
        ExperimentId::BiScenarios => {
            let study = run_bivariate_scenarios(cfg)?;
            let mut timing: Vec<CellTiming> = study
                .interaction_cells
                .iter()
                .map(|c| CellTiming {
                    cell: format!("alpha21={} t={}", c.alpha21, c.horizon),
                    fits: c.trials,
                    mean_fit_seconds: c.mean_fit_seconds,
                })
                .collect();
            timing.extend(study.scenario_cells.iter().map(|c| CellTiming {
                cell: format!("scenario {} {}", c.scenario, c.model),
                fits: c.trials,
                mean_fit_seconds: c.mean_fit_seconds,
            }));
            let failed = study.interaction_cells.iter().map(|c| c.failed).sum::<usize>()
                + study.scenario_cells.iter().map(|c| c.failed).sum::<usize>();
            let tables = vec![
                Table::new("interaction_trials", study.interaction_trials_csv()),
                Table::new("interaction_cells", study.interaction_cells_csv()),
                Table::new("scenario_trials", study.scenario_trials_csv()),
                Table::new("scenario_cells", study.scenario_cells_csv()),
                Table::new("support", study.support_csv()),
                Table::new("refits", study.refits_csv()),
            ];
            (tables, timing, failed)
        }
        ExperimentId::SpikeSlab => {
            let study = run_spike_slab_study(cfg)?;
            let timing = vec![CellTiming {
                cell: "replications".into(),
                fits: study.rows.iter().map(|r| r.n_subsamples).sum(),
                mean_fit_seconds: mean(
                    &study.rows.iter().map(|r| r.fit_seconds).collect::<Vec<_>>(),
                ),
            }];
            let failed = study.failed;
            let tables = vec![
                Table::new("rows", study.rows_csv()),
                Table::new("curve", study.curve_csv()),
                Table::new("summary", study.summary_csv()),
            ];
            (tables, timing, failed)
        }
    };
    let manifest = RunManifest {
        experiment: id.name().into(),
        package: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        total_seconds: started.elapsed().as_secs_f64(),
        failed_trials: failed,
        timing,
    };
    Ok(ExperimentOutput { manifest, tables })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn config_rejects_bad_ids_and_grids() {
        let mut cfg = ExperimentConfig::default();
        cfg.experiment = "uni-everything".into();
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::for_id(ExperimentId::UniHorizon);
        cfg.horizons.clear();
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::for_id(ExperimentId::UniNoise);
        cfg.trials = 0;
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::for_id(ExperimentId::BiScenarios);
        cfg.scenarios = vec![3];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = ExperimentConfig::for_id(ExperimentId::SpikeSlab);
        let text = toml::to_string(&cfg).unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);

        // A sparse file only mentions what it changes.
        let sparse: ExperimentConfig =
            toml::from_str("experiment = \"uni-noise\"\ntrials = 3\n").unwrap();
        assert_eq!(sparse.id().unwrap(), ExperimentId::UniNoise);
        assert_eq!(sparse.trials, 3);
        assert_eq!(sparse.seed, ExperimentConfig::default().seed);
        assert!(toml::from_str::<ExperimentConfig>("trails = 3\n").is_err());
    }

    #[test]
    fn free_coordinate_norm_for_q_mu_matches_hand_value() {
        // Q_mu leaves (alpha, beta, lambda0) free, so the normalizing
        // constant at (1, 0.5, 1, 1.6) is sqrt(0.25 + 1 + 2.56).
        let truth = NoisyHawkesParams::univariate(1.0, 0.5, 1.0, 1.6).unwrap();
        let spec = UniModel::QMu.spec(&truth);
        let packed = spec.pack(&truth).unwrap();
        let norm: f64 = packed.iter().map(|t| t * t).sum::<f64>().sqrt();
        assert!((norm - 3.81_f64.sqrt()).abs() < 1e-12);

        // A perturbation of one free coordinate scores against that norm.
        let mut off = truth.clone();
        off.beta[0] = 1.5;
        let rel = relative_error(&spec, &off, &truth).unwrap();
        assert!((rel - 0.5 / 3.81_f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn spike_slab_generator_honors_floors_and_filters() {
        let mut rng = stream_rng(7, 0);
        for _ in 0..200 {
            let truth = sample_spike_slab_truth(&mut rng);
            assert!(truth.beta.iter().all(|&b| b >= 0.5));
            assert!(truth.lambda0 >= 0.1);
            let ratio = truth.mu[0] / truth.mu[1];
            assert!(ratio > 0.5 && ratio < 2.0);
            for row in &truth.alpha {
                for &a in row {
                    assert!(a == 0.0 || a >= 0.1, "interaction {a} below the floor");
                }
            }
            let rows: Vec<Vec<f64>> = truth.alpha.clone();
            assert!(spectral_radius(&rows).unwrap() <= 0.95);
        }
    }

    #[test]
    fn mask_code_reads_row_major() {
        let mask = vec![vec![true, false], vec![false, true]];
        assert_eq!(mask_code(&mask), "1001");
    }

    #[test]
    fn single_cell_sweep_is_deterministic_and_accounted() {
        let mut cfg = ExperimentConfig::for_id(ExperimentId::UniHorizon);
        cfg.trials = 1;
        cfg.horizons = vec![120.0];
        cfg.restarts = 2;
        cfg.seed = 11;
        let first = run_univariate_sweep(&cfg).unwrap();
        let second = run_univariate_sweep(&cfg).unwrap();
        assert_eq!(first.trials_csv(), second.trials_csv());
        assert_eq!(first.cells_csv(), second.cells_csv());
        assert_eq!(first.trials.len(), 4);
        for cell in &first.cells {
            assert_eq!(cell.trials, 1);
            let failed_rows = first
                .trials
                .iter()
                .filter(|r| r.model == cell.model && r.error.is_some())
                .count();
            assert_eq!(cell.failed, failed_rows);
        }
    }

    #[test]
    fn exhausted_optimizer_marks_cells_partial() {
        let mut cfg = ExperimentConfig::for_id(ExperimentId::UniHorizon);
        cfg.trials = 2;
        cfg.horizons = vec![120.0];
        cfg.restarts = 1;
        cfg.max_iters = 0;
        let sweep = run_univariate_sweep(&cfg).unwrap();
        for cell in &sweep.cells {
            assert_eq!(cell.failed, 2);
            assert!(cell.partial);
            assert_eq!(cell.trials, 2);
        }
        for row in &sweep.trials {
            assert!(row.error.is_some());
            assert!(row.rel_error.is_nan());
        }
    }
}

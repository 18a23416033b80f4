//! Thin command-line front end over the `hawkes-spectral` library:
//! simulate event data, compute periodograms, run Whittle fits, print
//! equivalence witnesses, detect interaction supports, and reproduce the
//! named studies. Exit codes: 0 on success, 2 for input or configuration
//! mistakes, 3 for numerical failures.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Deserialize;

use hawkes_spectral::error::{Error, Result};
use hawkes_spectral::experiments::{run_experiment, ExperimentConfig, ExperimentId};
use hawkes_spectral::identifiability::{
    biv_equivalent_diag, biv_equivalent_row, biv_tau_range_diag, biv_tau_range_row, probe_grid,
    spectral_discrepancy, uni_equivalent, uni_tau_range, TauRange,
};
use hawkes_spectral::process::{read_events_csv, write_events_csv};
use hawkes_spectral::spectral::write_periodogram_csv;
use hawkes_spectral::support::{
    three_step_fit_partitioned, Correction, SupportRule, ThreeStepConfig, ThreeStepOutcome,
};
use hawkes_spectral::whittle::{fit, FitConfig, FrequencyPolicy, GradientMode, ModelSpec};
use hawkes_spectral::{
    periodogram, simulate_noisy, NoisyHawkesParams, PeriodogramMethod, SimulationConfig,
};

#[derive(Parser)]
#[command(
    name = "hawkes-spectral",
    version,
    about = "Simulation and spectral inference for noisy Hawkes processes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Seed override for anything random.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// TOML config for the chosen subcommand; flags override its keys.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Output file, or directory for `experiment`. Most subcommands print
    /// to stdout without it.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Frequency-count policy: n, nlogn, or an explicit integer.
    #[arg(long = "M-policy", global = true, value_name = "POLICY")]
    m_policy: Option<String>,

    /// Model spec file (TOML, or JSON by extension) for fit and support.
    #[arg(long, global = true, value_name = "SPEC")]
    model: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a noisy Hawkes process and write an events CSV.
    Simulate,
    /// Periodogram of an events CSV on the canonical frequency grid.
    Periodogram {
        /// Events CSV produced by `simulate` (or in the same layout).
        events: PathBuf,
    },
    /// Maximize the spectral log-likelihood of a model on an events CSV.
    Fit {
        events: PathBuf,
    },
    /// Equivalence-class witnesses around a parameter point: parameter
    /// vectors with identical spectra, one per noise-shift tau.
    Equivalence,
    /// Partition a long record, screen the interaction support, refit.
    Support {
        events: PathBuf,
    },
    /// Reproduce a named study at configurable scale.
    Experiment {
        /// One of: uni-horizon, uni-noise, uni-compensation, bi-scenarios,
        /// spike-slab.
        id: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Error::InvalidConfig("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Simulate => simulate_cmd(&cli),
        Command::Periodogram { events } => periodogram_cmd(&cli, events),
        Command::Fit { events } => fit_cmd(&cli, events),
        Command::Equivalence => equivalence_cmd(&cli),
        Command::Support { events } => support_cmd(&cli, events),
        Command::Experiment { id } => experiment_cmd(&cli, id),
    }
}

// ---------------------------------------------------------------------------
// Config plumbing
// ---------------------------------------------------------------------------

/// Parses the --config file into a subcommand's config type, or falls back
/// to the default when no file was given.
fn load_config<T: Default + for<'de> Deserialize<'de>>(cli: &Cli) -> Result<T> {
    match &cli.config {
        None => Ok(T::default()),
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            toml::from_str(&text)
                .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
        }
    }
}

fn parse_policy(cli: &Cli) -> Result<Option<FrequencyPolicy>> {
    cli.m_policy
        .as_deref()
        .map(|s| {
            s.parse::<FrequencyPolicy>()
                .map_err(|e| Error::InvalidConfig(format!("--M-policy: {e}")))
        })
        .transpose()
}

/// Loads a model spec from --model (TOML, or JSON when the extension says
/// so), or derives the full model for the data's dimension.
fn load_model_spec(cli: &Cli, dim: usize) -> Result<ModelSpec> {
    let spec = match &cli.model {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let is_json = path.extension().is_some_and(|e| e == "json");
            let spec: ModelSpec = if is_json {
                serde_json::from_str(&text)?
            } else {
                toml::from_str(&text)
                    .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?
            };
            spec
        }
        None => match dim {
            1 => ModelSpec::univariate_full(),
            2 => ModelSpec::bivariate_full(),
            d => ModelSpec::with_support(&vec![vec![true; d]; d])?,
        },
    };
    spec.validate()?;
    Ok(spec)
}

/// Emits `body` to --out or stdout.
fn deliver(cli: &Cli, body: &str) -> Result<()> {
    match &cli.out {
        Some(path) => {
            std::fs::write(path, body)?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
        None => {
            std::io::stdout().write_all(body.as_bytes())?;
            Ok(())
        }
    }
}

fn to_json_pretty<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut body = serde_json::to_string_pretty(value)?;
    body.push('\n');
    Ok(body)
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SimulateFile {
    t: f64,
    burn_in: f64,
    seed: u64,
    params: NoisyHawkesParams,
}

impl Default for SimulateFile {
    fn default() -> Self {
        Self {
            t: 1000.0,
            burn_in: 100.0,
            seed: 0,
            params: NoisyHawkesParams::univariate(1.0, 0.5, 1.0, 0.6)
                .expect("default parameters are admissible"),
        }
    }
}

fn simulate_cmd(cli: &Cli) -> Result<()> {
    let file: SimulateFile = load_config(cli)?;
    file.params.validate()?;
    let mut sim = SimulationConfig::new(file.t, cli.seed.unwrap_or(file.seed));
    sim.burn_in = file.burn_in;
    let events = simulate_noisy(&file.params, &sim)?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("events.csv"));
    let written = write_events_csv(&events, &out)?;
    eprintln!(
        "wrote {} ({} events on [0, {}])",
        written.display(),
        events.total_count(),
        file.t
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// periodogram
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PeriodogramFile {
    m_policy: FrequencyPolicy,
}

impl Default for PeriodogramFile {
    fn default() -> Self {
        Self { m_policy: FrequencyPolicy::N }
    }
}

fn periodogram_cmd(cli: &Cli, events_path: &Path) -> Result<()> {
    let file: PeriodogramFile = load_config(cli)?;
    let policy = parse_policy(cli)?.unwrap_or(file.m_policy);
    let events = read_events_csv(events_path)?;
    let m = hawkes_spectral::whittle::frequency_count(policy, &events)?;
    let pg = periodogram(&events, m, PeriodogramMethod::Auto)?;
    let out = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("periodogram.csv"));
    write_periodogram_csv(&pg, &out)?;
    eprintln!("wrote {} ({} frequencies, dim {})", out.display(), pg.m, pg.dim);
    Ok(())
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FitFile {
    seed: u64,
    restarts: usize,
    max_iters: usize,
    m_policy: FrequencyPolicy,
    gradient: GradientMode,
    /// Keep the per-restart traces in the JSON output.
    traces: bool,
}

impl Default for FitFile {
    fn default() -> Self {
        let base = FitConfig::default();
        Self {
            seed: base.seed,
            restarts: base.restarts,
            max_iters: base.max_iters,
            m_policy: base.m_policy,
            gradient: base.gradient,
            traces: false,
        }
    }
}

impl FitFile {
    fn fit_config(&self, cli: &Cli) -> Result<FitConfig> {
        Ok(FitConfig {
            restarts: self.restarts,
            seed: cli.seed.unwrap_or(self.seed),
            m_policy: parse_policy(cli)?.unwrap_or(self.m_policy),
            gradient: self.gradient,
            max_iters: self.max_iters,
            ..FitConfig::default()
        })
    }
}

fn fit_cmd(cli: &Cli, events_path: &Path) -> Result<()> {
    let file: FitFile = load_config(cli)?;
    let events = read_events_csv(events_path)?;
    let spec = load_model_spec(cli, events.dim())?;
    let cfg = file.fit_config(cli)?;
    let mut result = fit(&spec, &events, &cfg)?;
    if !file.traces {
        result = result.strip_traces();
    }
    deliver(cli, &to_json_pretty(&result)?)
}

// ---------------------------------------------------------------------------
// equivalence
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct EquivalenceFile {
    params: NoisyHawkesParams,
    /// Explicit noise shifts; when empty an interior grid is used.
    taus: Vec<f64>,
    grid: usize,
}

impl Default for EquivalenceFile {
    fn default() -> Self {
        Self {
            params: NoisyHawkesParams::univariate(1.0, 0.5, 1.0, 0.6)
                .expect("default parameters are admissible"),
            taus: Vec::new(),
            grid: 9,
        }
    }
}

/// Picks the equivalence family the interaction pattern belongs to.
fn equivalence_family(
    theta: &NoisyHawkesParams,
) -> Result<(&'static str, TauRange, fn(&NoisyHawkesParams, f64) -> Result<NoisyHawkesParams>)> {
    match theta.dim() {
        1 => Ok(("univariate", uni_tau_range(theta)?, uni_equivalent)),
        2 => {
            let off_diag_zero = theta.alpha[0][1] == 0.0 && theta.alpha[1][0] == 0.0;
            if off_diag_zero {
                Ok(("bivariate-diagonal", biv_tau_range_diag(theta)?, biv_equivalent_diag))
            } else {
                Ok(("bivariate-row", biv_tau_range_row(theta)?, biv_equivalent_row))
            }
        }
        d => Err(Error::InvalidInput(format!(
            "no equivalence family implemented for dimension {d}"
        ))),
    }
}

fn equivalence_cmd(cli: &Cli) -> Result<()> {
    let file: EquivalenceFile = load_config(cli)?;
    file.params.validate()?;
    let (family, range, map) = equivalence_family(&file.params)?;
    let taus = if file.taus.is_empty() {
        range.interior_grid(file.grid.max(1))
    } else {
        file.taus.clone()
    };
    let grid = probe_grid();
    let d = file.params.dim();

    let mut body = String::new();
    let mut header = vec!["family".to_string(), "tau".to_string()];
    for i in 1..=d {
        header.push(format!("mu{i}"));
    }
    for i in 1..=d {
        for j in 1..=d {
            header.push(format!("alpha{i}{j}"));
        }
    }
    for i in 1..=d {
        header.push(format!("beta{i}"));
    }
    header.push("lambda0".into());
    header.push("max_spectral_gap".into());
    body.push_str(&header.join(","));
    body.push('\n');
    for tau in taus {
        let other = map(&file.params, tau)?;
        let gap = spectral_discrepancy(&file.params, &other, &grid)?;
        let mut row = vec![family.to_string(), format!("{tau}")];
        row.extend(other.mu.iter().map(|v| format!("{v}")));
        row.extend(other.alpha.iter().flatten().map(|v| format!("{v}")));
        row.extend(other.beta.iter().map(|v| format!("{v}")));
        row.push(format!("{}", other.lambda0));
        row.push(format!("{gap}"));
        body.push_str(&row.join(","));
        body.push('\n');
    }
    eprintln!(
        "family {family}: tau in ({}, {}) excluding 0",
        range.lo, range.hi
    );
    deliver(cli, &body)
}

// ---------------------------------------------------------------------------
// support
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SupportFile {
    windows: usize,
    rule: SupportRule,
    correction: Correction,
    null_threshold: Option<f64>,
    seed: u64,
    restarts: usize,
    max_iters: usize,
    m_policy: FrequencyPolicy,
}

impl Default for SupportFile {
    fn default() -> Self {
        let base = FitConfig::default();
        Self {
            windows: 10,
            rule: SupportRule::default(),
            correction: Correction::default(),
            null_threshold: None,
            seed: base.seed,
            restarts: base.restarts,
            max_iters: base.max_iters,
            m_policy: base.m_policy,
        }
    }
}

fn support_cmd(cli: &Cli, events_path: &Path) -> Result<()> {
    let file: SupportFile = load_config(cli)?;
    let events = read_events_csv(events_path)?;
    let spec = load_model_spec(cli, events.dim())?;
    let cfg = ThreeStepConfig {
        fit: FitConfig {
            restarts: file.restarts,
            seed: cli.seed.unwrap_or(file.seed),
            m_policy: parse_policy(cli)?.unwrap_or(file.m_policy),
            max_iters: file.max_iters,
            ..FitConfig::default()
        },
        rule: file.rule,
        correction: file.correction,
        null_threshold: file.null_threshold,
    };
    let outcome = three_step_fit_partitioned(&events, file.windows, &spec, &cfg)?;
    let compact = ThreeStepOutcome {
        subsample_fits: outcome
            .subsample_fits
            .iter()
            .map(|f| f.clone().strip_traces())
            .collect(),
        reduced: outcome.reduced.clone().map(|f| f.strip_traces()),
        ..outcome
    };
    deliver(cli, &to_json_pretty(&compact)?)
}

// ---------------------------------------------------------------------------
// experiment
// ---------------------------------------------------------------------------

fn experiment_cmd(cli: &Cli, id: &str) -> Result<()> {
    let id: ExperimentId = id.parse()?;
    let mut cfg: ExperimentConfig = match &cli.config {
        None => ExperimentConfig::for_id(id),
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let mut from_file: ExperimentConfig = toml::from_str(&text)
                .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
            // The positional id wins over the file's `experiment` key only
            // when the file kept the default.
            if from_file.experiment == ExperimentConfig::default().experiment
                && id != ExperimentId::UniHorizon
            {
                from_file.experiment = id.name().into();
            }
            if from_file.id()? != id {
                return Err(Error::InvalidConfig(format!(
                    "config file runs {}, but the command line asked for {id}",
                    from_file.experiment
                )));
            }
            from_file
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(policy) = parse_policy(cli)? {
        cfg.m_policy = policy;
    }
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("results"));

    let output = run_experiment(&cfg)?;
    let written = output.write_to_dir(&dir)?;
    for path in &written {
        eprintln!("wrote {}", path.display());
    }
    eprintln!(
        "{}: {} tables, {} failed trials, {:.1}s",
        output.manifest.experiment,
        output.tables.len(),
        output.manifest.failed_trials,
        output.manifest.total_seconds
    );
    Ok(())
}

//! The `qb` command line.
//!
//! Subcommands: `gen` writes synthetic posterior draws, `barycenter` and
//! `pivot` summarize a sample file, `compare` runs both on shared draws over
//! a grid of sample counts, and `mra` runs the multi-reference alignment
//! pipeline over a grid of noise levels. Exit codes: 0 success, 2 invalid
//! input or configuration, 3 I/O failure.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod format;

pub use format::{ResultRecord, SampleFile};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "qb", version, about = "Label-switching-invariant posterior summaries")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write synthetic posterior draws (or MRA observations) as CSV.
    Gen(GenArgs),
    /// Barycenter of the draws in a sample file.
    Barycenter(BarycenterArgs),
    /// Pivotal reordering of the draws in a sample file.
    Pivot(PivotArgs),
    /// Run methods side by side on shared draws over a grid of sample counts.
    Compare(CompareArgs),
    /// Multi-reference alignment: generate, sample, reconstruct, score.
    Mra(MraArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub iters: Option<String>,
    /// sym, cyc or none
    #[arg(long)]
    pub group: Option<String>,
}

impl Common {
    fn flags(&self) -> Vec<(&'static str, Option<String>)> {
        vec![
            ("seed", self.seed.clone()),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
            ("iters", self.iters.clone()),
            ("group", self.group.clone()),
        ]
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub common: Common,
    /// gmm5, ellipse, line or mra
    #[arg(long)]
    pub scenario: Option<String>,
    /// Number of draws (observations for mra).
    #[arg(long)]
    pub n: Option<String>,
    /// Number of components for the line scenario.
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long)]
    pub jitter_mean: Option<String>,
    #[arg(long)]
    pub jitter_cov: Option<String>,
    #[arg(long)]
    pub snr: Option<String>,
    #[arg(long)]
    pub sigma: Option<String>,
    /// Comma-separated MRA template.
    #[arg(long)]
    pub template: Option<String>,
}

#[derive(Debug, Args)]
pub struct BarycenterArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Scenario name or sample file whose first row is the truth.
    #[arg(long)]
    pub truth: Option<String>,
    #[arg(long)]
    pub eval_samples: Option<String>,
    #[arg(long)]
    pub trace_every: Option<String>,
    #[arg(long)]
    pub step_scale: Option<String>,
    #[arg(long)]
    pub step_offset: Option<String>,
    #[arg(long)]
    pub tail_average: Option<String>,
}

#[derive(Debug, Args)]
pub struct PivotArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub truth: Option<String>,
    /// map, boundary or a row index
    #[arg(long)]
    pub pivot: Option<String>,
    /// Also write the relabeled draws to this CSV.
    #[arg(long)]
    pub relabeled: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: Common,
    /// ellipse or gmm5
    #[arg(long)]
    pub scenario: Option<String>,
    /// Comma-separated subset of sgd, pivot.
    #[arg(long)]
    pub methods: Option<String>,
    /// Comma-separated sample counts.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub pivot: Option<String>,
    #[arg(long)]
    pub jitter_mean: Option<String>,
    #[arg(long)]
    pub jitter_cov: Option<String>,
}

#[derive(Debug, Args)]
pub struct MraArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub snr_grid: Option<String>,
    #[arg(long)]
    pub sigma_grid: Option<String>,
    #[arg(long)]
    pub template: Option<String>,
    #[arg(long)]
    pub observations: Option<String>,
    #[arg(long)]
    pub sweeps: Option<String>,
    #[arg(long)]
    pub burn_in: Option<String>,
}

fn path_flag(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Gen(_) => "gen",
            Command::Barycenter(_) => "barycenter",
            Command::Pivot(_) => "pivot",
            Command::Compare(_) => "compare",
            Command::Mra(_) => "mra",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Gen(a) => &a.common,
            Command::Barycenter(a) => &a.common,
            Command::Pivot(a) => &a.common,
            Command::Compare(a) => &a.common,
            Command::Mra(a) => &a.common,
        }
    }

    /// Flag values keyed by config key.
    pub fn flags(&self) -> Vec<(&'static str, Option<String>)> {
        let mut f = self.common().flags();
        match self {
            Command::Gen(a) => f.extend([
                ("scenario", a.scenario.clone()),
                ("n", a.n.clone()),
                ("k", a.k.clone()),
                ("jitter_mean", a.jitter_mean.clone()),
                ("jitter_cov", a.jitter_cov.clone()),
                ("snr", a.snr.clone()),
                ("sigma", a.sigma.clone()),
                ("template", a.template.clone()),
            ]),
            Command::Barycenter(a) => f.extend([
                ("input", path_flag(&a.input)),
                ("truth", a.truth.clone()),
                ("eval_samples", a.eval_samples.clone()),
                ("trace_every", a.trace_every.clone()),
                ("step_scale", a.step_scale.clone()),
                ("step_offset", a.step_offset.clone()),
                ("tail_average", a.tail_average.clone()),
            ]),
            Command::Pivot(a) => f.extend([
                ("input", path_flag(&a.input)),
                ("truth", a.truth.clone()),
                ("pivot", a.pivot.clone()),
                ("relabeled", path_flag(&a.relabeled)),
            ]),
            Command::Compare(a) => f.extend([
                ("scenario", a.scenario.clone()),
                ("methods", a.methods.clone()),
                ("grid", a.grid.clone()),
                ("pivot", a.pivot.clone()),
                ("jitter_mean", a.jitter_mean.clone()),
                ("jitter_cov", a.jitter_cov.clone()),
            ]),
            Command::Mra(a) => f.extend([
                ("snr_grid", a.snr_grid.clone()),
                ("sigma_grid", a.sigma_grid.clone()),
                ("template", a.template.clone()),
                ("observations", a.observations.clone()),
                ("sweeps", a.sweeps.clone()),
                ("burn_in", a.burn_in.clone()),
            ]),
        }
        f
    }
}

/// Resolves the configuration and runs the command, writing its output.
/// Returns the result record for commands that produce one.
pub fn execute(cli: &Cli) -> Result<Option<ResultRecord>, CliError> {
    let cmd = &cli.command;
    let file = match &cmd.common().config {
        Some(p) => config::load_config(p)?,
        None => config::RunConfig::new(),
    };
    let name = cmd.name();
    let cfg = config::resolve(name, commands::defaults(name), &file, &cmd.flags())?;
    commands::dispatch(name, cfg)
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("QB_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Runs `qb` with the given arguments (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

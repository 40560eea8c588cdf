//! Command-line front end: `simulate`, `curve`, `extract` and `generate`.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::features::{extract_features, partition_dataset, write_dataset};
use crate::model::{accuracy_curve, FeatureMatrix};
use crate::oracle::Submission;
use crate::sim::{render_trace, run_simulation, SimulationTrace};
use crate::synth;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "crowdspam",
    version,
    about = "Staked crowdsourcing simulator for web-spam detection"
)]
pub struct Cli {
    /// TOML run configuration; defaults apply to every missing field.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed (partition, simulation draws, curve subsampling).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the staking simulation and write trace files.
    Simulate,
    /// Write accuracy versus training-sample size to curve.csv.
    Curve {
        /// Comma-separated sample sizes.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
    },
    /// Print the feature vector of one URL.
    Extract { url: String },
    /// Regenerate the synthetic dataset and its whois fixture.
    Generate {
        #[arg(long, default_value_t = synth::DEFAULT_ROWS)]
        rows: usize,
        #[arg(long, default_value_t = synth::DEFAULT_SEED)]
        data_seed: u64,
    },
}

/// A failed pipeline stage.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub message: String,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} stage failed: {}", self.stage, self.message)
    }
}

impl std::error::Error for StageError {}

fn stage<E: fmt::Display>(stage: &'static str) -> impl FnOnce(E) -> StageError {
    move |e| StageError {
        stage,
        message: e.to_string(),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if code == EXIT_OK {
                write!(stdout, "{rendered}")
            } else {
                write!(stderr, "{rendered}")
            };
            return code;
        }
    };
    match dispatch(&cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_RUNTIME
        }
    }
}

pub fn resolve_config(cli: &Cli) -> Result<RunConfig, StageError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(stage("config"))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    Ok(config)
}

fn dispatch(cli: &Cli, stdout: &mut dyn Write) -> Result<(), StageError> {
    match &cli.command {
        Command::Simulate => cmd_simulate(&resolve_config(cli)?, stdout),
        Command::Curve { sizes } => {
            let mut config = resolve_config(cli)?;
            if let Some(sizes) = sizes {
                config.curve_sizes = sizes.clone();
            }
            cmd_curve(&config, stdout)
        }
        Command::Extract { url } => cmd_extract(&resolve_config(cli)?, url, stdout),
        Command::Generate { rows, data_seed } => {
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("data"));
            cmd_generate(*rows, *data_seed, &out, stdout)
        }
    }
}

fn validate(config: &RunConfig) -> Result<(), StageError> {
    use crate::config::ConfigError;
    config.validate().map_err(|e| {
        let stage = match e {
            ConfigError::MissingDataset { .. } => "dataset",
            ConfigError::MissingWhois { .. } => "whois",
            _ => "config",
        };
        StageError {
            stage,
            message: e.to_string(),
        }
    })
}

fn write_outputs(out_dir: &Path, files: &[(&str, String)]) -> Result<(), StageError> {
    fs::create_dir_all(out_dir).map_err(stage("output"))?;
    for (name, contents) in files {
        fs::write(out_dir.join(name), contents).map_err(stage("output"))?;
    }
    Ok(())
}

/// load → partition → base model → simulation, without touching the output directory.
pub fn simulate_trace(config: &RunConfig) -> Result<SimulationTrace, StageError> {
    validate(config)?;
    let (rows, _dropped) = config.load_rows().map_err(stage("dataset"))?;
    let whois = config.whois().map_err(stage("whois"))?;
    let partition = partition_dataset(
        &rows,
        config.partition.base_fraction,
        config.partition.good_fraction,
        config.seed,
    )
    .map_err(stage("partition"))?;
    let mut trace =
        run_simulation(&partition, &config.actors, &config.sim_config(), whois).map_err(stage("simulation"))?;
    trace.config_echo = config.to_toml();
    Ok(trace)
}

/// Runs the simulation and writes the trace files.
pub fn cmd_simulate(config: &RunConfig, stdout: &mut dyn Write) -> Result<(), StageError> {
    let trace = simulate_trace(config)?;
    let files = render_trace(&trace);
    write_outputs(&config.out_dir, &files)?;

    let last = trace.snapshots.last();
    let _ = writeln!(
        stdout,
        "final_accuracy={} contract_balance={} submissions={} out={}",
        last.map_or(trace.initial_accuracy, |s| s.accuracy),
        last.map_or(config.ledger.creator_deposit, |s| s.contract_balance),
        trace.per_round.len(),
        config.out_dir.display()
    );
    Ok(())
}

/// Accuracy at each configured sample size, written to `curve.csv`.
pub fn cmd_curve(config: &RunConfig, stdout: &mut dyn Write) -> Result<(), StageError> {
    validate(config)?;
    let (rows, _) = config.load_rows().map_err(stage("dataset"))?;
    let whois = config.whois().map_err(stage("whois"))?;
    let submission = Submission::extract(&rows, whois.as_ref()).map_err(stage("dataset"))?;
    let matrix = FeatureMatrix::new(submission.rows().collect());
    let curve = accuracy_curve(&matrix, &config.curve_sizes, &config.train, config.seed).map_err(stage("curve"))?;

    let mut csv = String::from("size,accuracy\n");
    for (size, accuracy) in &curve {
        csv.push_str(&format!("{size},{accuracy}\n"));
    }
    write_outputs(&config.out_dir, &[("curve.csv", csv)])?;
    let best = curve.iter().map(|(_, a)| *a).fold(f64::NAN, f64::max);
    let _ = writeln!(
        stdout,
        "points={} max_accuracy={} out={}",
        curve.len(),
        best,
        config.out_dir.join("curve.csv").display()
    );
    Ok(())
}

pub fn cmd_extract(config: &RunConfig, url: &str, stdout: &mut dyn Write) -> Result<(), StageError> {
    let whois = config.whois().map_err(stage("whois"))?;
    let features = extract_features(url, whois.as_ref()).map_err(stage("extract"))?;
    let _ = writeln!(stdout, "{features}");
    Ok(())
}

pub fn cmd_generate(rows: usize, seed: u64, out: &Path, stdout: &mut dyn Write) -> Result<(), StageError> {
    let generated = synth::generate(rows, seed);
    let files = [
        ("desk.csv", write_dataset(&synth::labeled_urls(&generated))),
        ("whois.csv", synth::whois_fixture(&generated).to_csv()),
    ];
    write_outputs(out, &files)?;
    let _ = writeln!(stdout, "rows={rows} seed={seed} out={}", out.display());
    Ok(())
}

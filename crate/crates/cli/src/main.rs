//! `interlerp`: train conditional GANs and judges, run interpolation sweeps
//! and plot the results.

mod commands;
mod config;
mod data;
mod error;
mod record;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::DatasetKind;

#[derive(Parser, Debug)]
#[command(name = "interlerp", version, about = "Conditional GAN label interpolation experiments")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// Overrides the seed of the configuration section the command uses.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON run configuration (takes precedence over --preset).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Replace existing outputs instead of refusing.
    #[arg(long, global = true)]
    pub overwrite: bool,
    /// Only print errors.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    /// Append-only JSON-lines log of invocations.
    #[arg(long, global = true, env = "INTERLERP_RUNS_LOG", default_value = "runs.log")]
    pub runs_log: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Task {
    Classifier,
    Va,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepKindArg {
    Confidence,
    Va,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fetch a dataset and record its checksums.
    Download {
        /// fashion-mnist or cifar-10
        name: String,
        /// Destination directory (default: $INTERLERP_DATA_DIR/<name>, or --out).
        #[arg(long)]
        dest: Option<PathBuf>,
    },
    /// Train a conditional GAN.
    TrainGan {
        #[arg(long)]
        preset: Option<String>,
        /// Dataset directory.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Force the dataset format instead of detecting it.
        #[arg(long, value_enum)]
        kind: Option<DatasetKind>,
        /// Override the batch budget (smoke runs).
        #[arg(long)]
        batches: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Train a classifier or valence/arousal judge.
    TrainJudge {
        #[arg(long, value_enum)]
        task: Task,
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_enum)]
        kind: Option<DatasetKind>,
        /// Override the epoch cap.
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Interpolation sweep scored by a judge.
    Sweep {
        #[arg(value_enum)]
        kind: SweepKindArg,
        /// Generator checkpoint directory.
        #[arg(long)]
        gan: PathBuf,
        /// Judge checkpoint directory.
        #[arg(long, visible_alias = "regressor", visible_alias = "classifier")]
        judge: PathBuf,
        #[arg(long)]
        preset: Option<String>,
        /// `all` or comma-separated `source:target` pairs (names or indices).
        #[arg(long)]
        pairs: Option<String>,
        /// Noise vectors per trajectory.
        #[arg(long = "n")]
        n_samples: Option<usize>,
        /// Step size e.
        #[arg(long)]
        step: Option<f64>,
        /// Neutral class of a VA sweep.
        #[arg(long)]
        neutral: Option<String>,
        /// Also write PNGs for the first K samples of every trajectory.
        #[arg(long, value_name = "K")]
        save_images: Option<usize>,
    },
    /// Plot sweep CSVs and summarise their monotonicity.
    Report {
        /// Sweep CSV files.
        #[arg(long = "input", required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        /// Draw every class in confidence plots.
        #[arg(long)]
        all_classes: bool,
    },
    /// Render the synthetic face dataset.
    SynthFaces {
        #[arg(long)]
        preset: Option<String>,
        /// Number of faces.
        #[arg(long)]
        n: Option<usize>,
        /// Image side in pixels.
        #[arg(long)]
        size: Option<usize>,
    },
    /// Check a run configuration without running anything.
    ValidateConfig {
        /// Config file (defaults to --config).
        path: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Download { .. } => "download",
            Command::TrainGan { .. } => "train-gan",
            Command::TrainJudge { .. } => "train-judge",
            Command::Sweep { .. } => "sweep",
            Command::Report { .. } => "report",
            Command::SynthFaces { .. } => "synth-faces",
            Command::ValidateConfig { .. } => "validate-config",
        }
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            if code != 0 {
                let log = std::env::var_os("INTERLERP_RUNS_LOG").map(PathBuf::from).unwrap_or_else(|| "runs.log".into());
                let mut ctx = record::Ctx::detached(log);
                ctx.finish("unparsed", &argv, code);
            }
            return ExitCode::from(code);
        }
    };

    let level = if cli.global.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).format_target(false).init();

    let mut ctx = record::Ctx::new(cli.global.clone());
    let name = cli.command.name();
    let code = match commands::run(cli.command, &mut ctx) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ctx.finish(name, &argv, code);
    ExitCode::from(code)
}

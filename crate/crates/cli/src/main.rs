use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use credcomm::config::RunConfig;
use credcomm::pipeline::{self, StageReport};
use credcomm::synth::SynthSpec;
use credcomm::{Error, ErrorKind};

/// Community detection and link-credibility profiling for follower networks.
#[derive(Parser)]
#[command(name = "credcomm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the run seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with known ground truth.
    Synth {
        /// Synth spec (TOML); built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for the generated files.
        #[arg(long, default_value = "synth")]
        out: PathBuf,
    },
    /// Detect size-constrained communities in the follower graph.
    Detect(Common),
    /// Assign every tweet its link category.
    Categorize(Common),
    /// Train the credibility classifiers and score pages.
    Score(Common),
    /// Compute per-community measures and visualisations.
    Characterize {
        #[command(flatten)]
        common: Common,
        /// Measure to visualise; repeatable.
        #[arg(long = "measure")]
        measures: Vec<String>,
    },
}

fn load_config(c: &Common) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::load(&c.config)?;
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &c.out {
        cfg.out_dir = std::path::absolute(out).map_err(|e| Error::io(out, e))?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<StageReport, Error> {
    match cli.command {
        Command::Synth { config, seed, out } => {
            let mut spec = match config {
                Some(p) => SynthSpec::load(p)?,
                None => SynthSpec::default(),
            };
            if let Some(s) = seed {
                spec.seed = s;
            }
            pipeline::run_synth(&spec, &out)
        }
        Command::Detect(c) => pipeline::run_detect(&load_config(&c)?),
        Command::Categorize(c) => pipeline::run_categorize(&load_config(&c)?),
        Command::Score(c) => pipeline::run_score(&load_config(&c)?),
        Command::Characterize { common, measures } => {
            pipeline::run_characterize(&load_config(&common)?, &measures)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(report) => {
            println!("{}", report.summary.trim_end());
            println!(
                "manifest: {}",
                report.dir.join(pipeline::MANIFEST_FILE).display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e.kind() {
                ErrorKind::Input => ExitCode::from(2),
                ErrorKind::Invariant => ExitCode::from(3),
            }
        }
    }
}

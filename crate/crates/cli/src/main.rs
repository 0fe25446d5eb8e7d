//! `sleepstage`: stage-by-stage driver. Every subcommand reads the artifacts
//! of earlier stages from the output directory and writes its own there,
//! appending a line to `run_manifest.jsonl`.

mod commands;
mod error;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sleepstage::feature_registry::Profile;
use sleepstage::pipeline::PipelineConfig;

use commands::SubjectSet;
use error::CliError;
use run::{sha256_hex, Run};

#[derive(Parser)]
#[command(
    name = "sleepstage",
    version,
    about = "Sleep staging from ECG and respiratory effort"
)]
struct Cli {
    /// TOML configuration; unset keys keep their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Working directory for all artifacts.
    #[arg(long, global = true, default_value = "sleepstage-out")]
    out: PathBuf,
    /// Overrides `seed` and `train.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for per-subject parallelism.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Feature manifest: single or two-channel.
    #[arg(long, global = true)]
    profile: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic subjects (EDF + hypnograms + metadata).
    Synth {
        #[arg(long)]
        subjects: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Validate a metadata file and the recordings it names.
    Ingest {
        #[arg(long)]
        metadata: PathBuf,
    },
    /// R-peaks, RR intervals and cleaned breathing per subject.
    Preprocess {
        #[arg(long)]
        metadata: Option<PathBuf>,
    },
    /// Per-epoch feature matrices.
    Extract,
    /// Apply the AHI and sleep-architecture selection rules.
    Cohort {
        #[arg(long)]
        metadata: Option<PathBuf>,
    },
    /// Subject-disjoint train/test split.
    Split,
    /// Fit normalization and the BLSTM on the training subjects.
    Train,
    /// Write predicted hypnograms.
    Predict {
        #[arg(long, value_enum, default_value = "test")]
        set: SubjectSet,
    },
    /// Accuracy, kappa, confusion matrix and per-subject table.
    Evaluate {
        #[arg(long, value_enum, default_value = "test")]
        set: SubjectSet,
    },
    /// Permutation importance of every feature.
    Importance {
        #[arg(long, value_enum, default_value = "test")]
        set: SubjectSet,
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        #[arg(long, default_value_t = 20)]
        top: usize,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Synth { .. } => "synth",
            Command::Ingest { .. } => "ingest",
            Command::Preprocess { .. } => "preprocess",
            Command::Extract => "extract",
            Command::Cohort { .. } => "cohort",
            Command::Split => "split",
            Command::Train => "train",
            Command::Predict { .. } => "predict",
            Command::Evaluate { .. } => "evaluate",
            Command::Importance { .. } => "importance",
        }
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let mut cfg: PipelineConfig = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.train.seed = seed;
    }
    if let Some(p) = &cli.profile {
        cfg.profile = p.parse::<Profile>().map_err(CliError::Config)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let cfg = load_config(&cli)?;
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::Config("--workers must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let config_hash = sha256_hex(serde_json::to_string(&cfg).expect("config serializes").as_bytes());
    let run = Run::new(cli.out.clone(), cli.command.name(), config_hash, cfg.seed);
    match &cli.command {
        Command::Synth { subjects, epochs } => commands::synth(&cfg, &run, *subjects, *epochs)?,
        Command::Ingest { metadata } => commands::ingest(&cfg, &run, metadata)?,
        Command::Preprocess { metadata } => commands::preprocess(&cfg, &run, metadata.as_deref())?,
        Command::Extract => commands::extract(&cfg, &run)?,
        Command::Cohort { metadata } => commands::cohort(&cfg, &run, metadata.as_deref())?,
        Command::Split => commands::split(&cfg, &run)?,
        Command::Train => commands::train_model(&cfg, &run)?,
        Command::Predict { set } => commands::predict_set(&cfg, &run, *set)?,
        Command::Evaluate { set } => commands::evaluate(&cfg, &run, *set)?,
        Command::Importance { set, repeats, top } => commands::importance(&cfg, &run, *set, *repeats, *top)?,
    }
    run.finish()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

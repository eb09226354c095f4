use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tutor_eval::config::{BackendKind, RunConfig};
use tutor_eval::pipeline::{self, Outcome, Which, EXIT_INPUT};
use tutor_eval::report::RunSummary;

#[derive(Parser)]
#[command(name = "tutor-eval", version, about = "Evaluate AI-tutor feedback on programming assignments")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out_dir`).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true, value_parser = ["fixture", "remote"])]
    backend: Option<String>,
    /// Seed for `synth` (overrides `synth.seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Concurrent judge requests (overrides `judge.parallelism`).
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and link the corpus, report counts and problems.
    Validate,
    /// Label feedback with the judge model.
    Annotate {
        #[arg(long, default_value = "both")]
        which: Which,
    },
    /// Compute metrics, tests and models and write the report.
    Evaluate,
    /// Write a synthetic corpus with planted rates.
    Synth,
    /// Cohen's kappa between two label files.
    Agreement { file_a: PathBuf, file_b: PathBuf },
}

fn load_config(cli: &Cli) -> Result<RunConfig, String> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(|e| e.to_string())?,
        None => {
            let mut cfg = RunConfig::default();
            cfg.resolve_paths(&PathBuf::from("."));
            cfg.apply_env(|k| std::env::var(k).ok());
            cfg
        }
    };
    if let Some(dir) = &cli.out_dir {
        cfg.out_dir = dir.clone();
    }
    if let Some(b) = &cli.backend {
        cfg.judge.backend = b.parse::<BackendKind>().map_err(|e| e.to_string())?;
    }
    if let Some(seed) = cli.seed {
        cfg.synth.seed = seed;
    }
    if let Some(p) = cli.parallelism {
        cfg.judge.parallelism = p;
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Validate => "validate",
        Command::Annotate { .. } => "annotate",
        Command::Evaluate => "evaluate",
        Command::Synth => "synth",
        Command::Agreement { .. } => "agreement",
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match load_config(&cli) {
        Ok(cfg) => match &cli.command {
            Command::Validate => pipeline::cmd_validate(&cfg),
            Command::Annotate { which } => pipeline::cmd_annotate(&cfg, *which),
            Command::Evaluate => pipeline::cmd_evaluate(&cfg),
            Command::Synth => pipeline::cmd_synth(&cfg),
            Command::Agreement { file_a, file_b } => pipeline::cmd_agreement(&cfg, file_a, file_b),
        },
        Err(e) => {
            let mut summary = RunSummary::new(command_name(&cli.command));
            summary.exit_code = EXIT_INPUT;
            summary.errors.push(e);
            let out = cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
            if let Err(w) = summary.write(&out) {
                eprintln!("cannot write {}: {w}", out.display());
            }
            Outcome { exit_code: EXIT_INPUT, summary }
        }
    };
    for w in &outcome.summary.warnings {
        eprintln!("warning [{}]: {}", w.code, w.message);
    }
    for e in &outcome.summary.errors {
        eprintln!("error: {e}");
    }
    ExitCode::from(outcome.exit_code as u8)
}

//! `sif`: train targets, score samples, fit and evaluate membership attacks,
//! and run the exact-oracle checks.

mod commands;
mod config;
mod error;
mod oracle;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sif_core::influence::ScorerKind;

use commands::{Subset, DEFAULT_BINS};
use config::{Experiment, ExperimentConfig};
use error::CliError;

#[derive(Parser)]
#[command(name = "sif", version, about = "Self-influence membership inference experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Seed override: the training seed for `train`, the scorer seed otherwise.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TargetArgs {
    /// Target checkpoint; defaults to `<out>/checkpoint.sifc`.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Scorer; defaults to the config's.
    #[arg(long, value_parser = parse_scorer)]
    scorer: Option<ScorerKind>,
}

#[derive(Subcommand)]
enum Command {
    /// Train the target model and write its checkpoint and metrics.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Score a subset of the split into a resumable CSV.
    Score {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        target: TargetArgs,
        #[arg(long, value_enum, default_value = "all")]
        subset: Subset,
        /// Score only the first N samples of the subset (by id).
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Fit the threshold attack, evaluate it against the baselines.
    Attack {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        target: TargetArgs,
        #[arg(long, default_value_t = DEFAULT_BINS)]
        bins: usize,
    },
    /// Check gradients, inverse-HVPs and influence against exact oracles.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long, hide = true)]
        corrupt_gradient: bool,
    },
    /// Re-render the comparison table and score histogram.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_scorer)]
        scorer: Option<ScorerKind>,
        #[arg(long, default_value_t = DEFAULT_BINS)]
        bins: usize,
    },
}

fn parse_scorer(s: &str) -> Result<ScorerKind, String> {
    s.parse().map_err(|e: sif_core::Error| e.to_string())
}

fn prepare(common: &Common, train_seed: bool) -> Result<(Experiment, PathBuf), CliError> {
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(out) = &common.out {
        cfg.out = Some(out.clone());
    }
    if let Some(seed) = common.seed {
        if train_seed {
            cfg.train.seed = Some(seed);
        } else {
            cfg.scorer.seed = Some(seed);
        }
    }
    let exp = Experiment::prepare(cfg)?;
    let out = exp.out_dir();
    std::fs::create_dir_all(&out)?;
    Ok((exp, out))
}

fn with_scorer(exp: &mut Experiment, scorer: Option<ScorerKind>) -> ScorerKind {
    let kind = scorer.unwrap_or_else(|| exp.config.scorer.kind.expect("resolved"));
    if exp.config.scorer.kind != Some(kind) {
        let seed = exp.config.scorer.seed;
        exp.config.scorer = config::ScorerSettings {
            kind: Some(kind),
            seed,
            ..Default::default()
        };
        let (dim, classes) = (exp.dataset.input_shape().iter().product(), exp.dataset.num_classes());
        exp.config.resolve(dim, classes);
    }
    kind
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train { common } => {
            let (exp, out) = prepare(&common, true)?;
            let m = commands::train(&exp, &out)?;
            println!(
                "train acc {:.4}  test acc {:.4}  best epoch {}  -> {}",
                m.train_accuracy,
                m.test_accuracy,
                m.best_epoch,
                commands::default_checkpoint(&out).display()
            );
        }
        Command::Score {
            common,
            target,
            subset,
            limit,
        } => {
            let (mut exp, out) = prepare(&common, false)?;
            let kind = with_scorer(&mut exp, target.scorer);
            let path = target.checkpoint.unwrap_or_else(|| commands::default_checkpoint(&out));
            let ckpt = commands::load_checkpoint(&exp, &path)?;
            let written = commands::score(&exp, &ckpt, kind, subset, limit, &out)?;
            println!("{}", written.display());
        }
        Command::Attack { common, target, bins } => {
            let (mut exp, out) = prepare(&common, false)?;
            let kind = with_scorer(&mut exp, target.scorer);
            let path = target.checkpoint.unwrap_or_else(|| commands::default_checkpoint(&out));
            let ckpt = commands::load_checkpoint(&exp, &path)?;
            let report = commands::attack(&exp, &ckpt, kind, bins, &out)?;
            print!("{}", report.to_table());
        }
        Command::Oracle {
            common,
            corrupt_gradient,
        } => {
            let (exp, out) = prepare(&common, false)?;
            commands::write_resolved(&exp, &out)?;
            let seed = exp.config.scorer.seed.expect("resolved");
            let report = oracle::run(&exp, seed, corrupt_gradient, &out)?;
            for c in &report.checks {
                println!(
                    "{:<40} {:>12.4e} {} {:<8e} {}",
                    c.name,
                    c.measured,
                    c.comparison,
                    c.tolerance,
                    if c.pass { "pass" } else { "FAIL" }
                );
            }
            if !report.pass {
                let failed: Vec<&str> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
                return Err(CliError::Oracle(failed.join(", ")));
            }
        }
        Command::Report { common, scorer, bins } => {
            let (mut exp, out) = prepare(&common, false)?;
            let kind = with_scorer(&mut exp, scorer);
            print!("{}", commands::report(&out, kind, bins)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

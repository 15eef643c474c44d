use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use idiomshot::SplitKind;
use idiomshot_cli::{
    cmd_ensemble, cmd_eval, cmd_predict, cmd_stats, cmd_train, cmd_validate_splits, exit_code, RunConfig,
};

#[derive(Parser)]
#[command(name = "idiomshot", version, about = "Zero-shot and one-shot idiomaticity detection")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration value, e.g. `--set train.epochs=20`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Shorthand for `--set train.seed=N`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Shorthand for `--set out_dir=DIR`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print split statistics as JSON.
    Stats {
        #[arg(long, default_value = "dev")]
        split: SplitKind,
        /// Corpus file; defaults to the configured file for the split.
        path: Option<PathBuf>,
    },
    /// Check zero-shot disjointness and one-shot support coverage.
    ValidateSplits,
    /// Train the model selected by `mode`.
    Train,
    /// Write predictions for the evaluation split.
    Predict,
    /// Score predictions against gold labels.
    Eval,
    /// Train the ensemble members and predict by majority vote.
    Ensemble,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut overrides = cli.overrides;
    if let Some(seed) = cli.seed {
        overrides.push(format!("train.seed={seed}"));
    }
    if let Some(out) = cli.out {
        overrides.push(format!("out_dir={}", toml::Value::String(out.display().to_string())));
    }
    let result = RunConfig::load(cli.config.as_deref(), &overrides).and_then(|config| match cli.command {
        Command::Stats { split, path } => cmd_stats(&config, split, path.as_deref()),
        Command::ValidateSplits => cmd_validate_splits(&config),
        Command::Train => cmd_train(&config),
        Command::Predict => cmd_predict(&config),
        Command::Eval => cmd_eval(&config),
        Command::Ensemble => cmd_ensemble(&config),
    });
    match result {
        Ok(summary) => {
            print!("{}", summary.stdout);
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            for p in &summary.written {
                eprintln!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

//! `subgoal`: benchmark generation, prediction, feedback training,
//! evaluation and prompt-size sweeps, driven by one TOML config.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration error.

mod commands;
mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ConfigError, RunConfig};

#[derive(Parser)]
#[command(name = "subgoal", version, about = "Few-shot subgoal planning toolkit")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(short, long, global = true, default_value = "subgoal.toml")]
    config: PathBuf,
    /// Override a config value, e.g. `--set decode.beam_size=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Ranking criterion: forward, reverse or wmi.
    #[arg(long, global = true)]
    criterion: Option<String>,
    /// Weight of the reverse score under `wmi`.
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Trained ranker for `eval`.
    #[arg(long, global = true)]
    params: Option<PathBuf>,
    /// Write artifacts here instead of under `output.dir`.
    #[arg(long, global = true)]
    run_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Generate scenes and tasks for every split.
    GenerateBenchmark,
    /// Decode ranked hypotheses for the configured splits.
    Predict,
    /// Collect execution feedback on the train split and fit the ranker.
    FeedbackTrain,
    /// Roll out predicted, re-ranked and oracle plans and report metrics.
    Eval,
    /// Recall against the number of prompt examples per task type.
    Sweep,
}

impl Cli {
    fn overrides(&self) -> anyhow::Result<Vec<(String, String)>> {
        let mut out = Vec::new();
        for o in &self.overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("--set expects KEY=VALUE, got `{o}`")))?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        if let Some(c) = &self.criterion {
            out.push(("rank.criterion".into(), format!("{c:?}")));
        }
        if let Some(l) = self.lambda {
            out.push(("rank.lambda".into(), format!("{l:?}")));
        }
        if let Some(p) = &self.params {
            let abs = std::path::absolute(p).map_err(|e| ConfigError(format!("--params: {e}")))?;
            out.push(("eval.params".into(), format!("{:?}", abs.display().to_string())));
        }
        Ok(out)
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let cfg = RunConfig::load(&cli.config, &cli.overrides()?)?;
    let rd = cli.run_dir.as_deref();
    let (dir, summary) = match cli.command {
        Command::GenerateBenchmark => commands::generate(&cfg, rd)?,
        Command::Predict => commands::predict(&cfg, rd)?,
        Command::FeedbackTrain => commands::feedback_train(&cfg, rd)?,
        Command::Eval => commands::eval(&cfg, rd)?,
        Command::Sweep => commands::sweep(&cfg, rd)?,
    };
    let path = dir.finish(summary.clone())?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    println!("run directory: {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use bwb_cli::{emit_report, run_experiments, Experiment, ExperimentConfig, Format, Result, Scale};
use clap::{Args, Parser, Subcommand};

/// Bayesian Wasserstein barycenter experiments.
#[derive(Parser)]
#[command(name = "bwb", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// JSON configuration; overrides --scale.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
    /// Worker threads; all cores when absent.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value = "desk")]
    scale: Scale,
    #[arg(long, global = true, value_enum, default_value = "both")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Posterior concentration around the true model.
    Consistency,
    /// Empirical barycenters against the true model.
    Barycenter,
    /// Barycenter against the model average.
    CompareBma,
    /// Batch stochastic gradient descent.
    Sgd,
    /// Every experiment on shared data and chains.
    All,
}

fn run(cli: Cli) -> Result<bool> {
    let c = cli.common;
    if let Some(t) = c.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            log::warn!("thread pool already initialised: {e}");
        }
    }
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::for_scale(c.scale),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let experiments: Vec<Experiment> = match cli.command {
        Command::Consistency => vec![Experiment::Consistency],
        Command::Barycenter => vec![Experiment::Barycenter],
        Command::CompareBma => vec![Experiment::CompareBma],
        Command::Sgd => vec![Experiment::Sgd],
        Command::All => Experiment::ALL.to_vec(),
    };
    let mut flagged = 0;
    for report in run_experiments(&cfg, &experiments)? {
        for p in emit_report(&report, c.format, &c.out)? {
            println!("{}", p.display());
        }
        if report.flagged > 0 {
            log::warn!("{}: {} cells did not converge", report.experiment, report.flagged);
        }
        flagged += report.flagged;
    }
    Ok(flagged == 0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

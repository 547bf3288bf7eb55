use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wavegh::config::{load_config, GhSection, ScenarioConfig};
use wavegh::report::StudyOutcome;
use wavegh::studies::{self, Study};
use wavegh::HarnessError;

#[derive(Parser)]
#[command(name = "wavegh", version, about = "Domain-perturbation experiments for damped wave attractors")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Cmd {
    /// Attractor distance along the perturbation schedule.
    Continuity(Common),
    /// Dynamical GH certificates for schedule members against the reference.
    Stability(Common),
    /// Energy envelope, Lipschitz envelope and conjugated-flow checks.
    Estimates(Common),
    /// Single trajectory with operator, eigenvalue and energy output.
    Solve(Common),
    /// GH bounds between two metric files (CSV distance matrix or sample JSON).
    Gh {
        #[command(flatten)]
        common: Common,
        x: PathBuf,
        y: PathBuf,
    },
    /// Validates a scenario file and prints its normalized form.
    Validate { path: PathBuf },
}

fn load(common: &Common) -> Result<ScenarioConfig, HarnessError> {
    let path = common.config.as_ref().ok_or_else(|| {
        HarnessError::Config(vec![wavegh::config::Diagnostic {
            key: String::new(),
            line: None,
            message: "--config is required".into(),
        }])
    })?;
    let mut cfg = load_config(path).map_err(HarnessError::Config)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn print(outcome: &StudyOutcome) {
    for v in &outcome.verdicts {
        println!("{}", v.line());
    }
    if outcome.verdicts.is_empty() {
        println!("{}", serde_json::to_string_pretty(&outcome.summary).unwrap_or_default());
    }
}

fn run(cli: Cli) -> Result<bool, HarnessError> {
    let (study, common) = match cli.cmd {
        Cmd::Continuity(c) => (Study::Continuity, c),
        Cmd::Stability(c) => (Study::Stability, c),
        Cmd::Estimates(c) => (Study::Estimates, c),
        Cmd::Solve(c) => (Study::Solve, c),
        Cmd::Gh { common, x, y } => {
            let (gh, seed) = match &common.config {
                Some(_) => {
                    let cfg = load(&common)?;
                    (cfg.gh, cfg.seed)
                }
                None => (GhSection::default(), common.seed.unwrap_or(0)),
            };
            let outcome = studies::run_gh(&x, &y, &gh, seed, &common.out, common.threads)?;
            print(&outcome);
            return Ok(true);
        }
        Cmd::Validate { path } => {
            let cfg = load_config(&path).map_err(HarnessError::Config)?;
            print!("{}", cfg.to_toml());
            return Ok(true);
        }
    };
    let cfg = load(&common)?;
    let outcome = studies::run(study, &cfg, &common.out, common.threads)?;
    print(&outcome);
    Ok(outcome.passed())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

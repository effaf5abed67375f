use clap::Parser;
use cqed_undo::config::{parse_config, Experiment};
use cqed_undo::experiments::run_experiment;
use std::path::PathBuf;
use std::process::ExitCode;

/// Simulates measurement-induced dephasing of a dispersively read-out qubit
/// and its undoing from the measurement record.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    /// fields, trajectory, ensemble, bandwidth-sweep, efficiency-sweep,
    /// protocol or verify-appendix
    experiment: Experiment,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trajectories: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    /// Output CSV path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

const CONFIG_ERROR: u8 = 1;
const NUMERICAL_ERROR: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { CONFIG_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", cli.config.display());
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    let mut cfg = match parse_config(&text, cli.experiment) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", cli.config.display());
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(n) = cli.trajectories {
        cfg.trajectories = n;
    }
    if let Some(dt) = cli.dt {
        cfg.dt = dt;
    }
    if let Some(o) = cli.out {
        cfg.output = Some(o);
    }
    if let Err(e) = cfg.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(CONFIG_ERROR);
    }
    let result = run_experiment(&cfg).and_then(|table| match &cfg.output {
        Some(path) => table.write(path),
        None => table.render().map(|s| print!("{s}")),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() {
                NUMERICAL_ERROR
            } else {
                CONFIG_ERROR
            })
        }
    }
}

//! `noimu` command-line front end.
//!
//! Every command writes into a fresh run directory (`--out`) holding a
//! `manifest.txt` with the fully resolved configuration, so that passing the
//! manifest back through `--config` repeats the run.

mod commands;
mod run_dir;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use noimu::Error;

use crate::settings::Settings;

#[derive(Debug, Parser)]
#[command(name = "noimu", version, about = "Event-camera attitude estimation laboratory")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Key-value configuration file (`key = value`, `#` comments).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed (config key `seed`, default 1)
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Run directory to create; it must not exist yet.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; 1 guarantees bit-identical reruns.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Pixel mask: full, half or quarter.
    #[arg(long, global = true)]
    pub mask: Option<String>,
    /// Centre crop such as 160x120, or `none`.
    #[arg(long, global = true)]
    pub crop: Option<String>,
    /// Network variant: vision, motor, gyro, ff or snn.
    #[arg(long, global = true)]
    pub variant: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fly excitation trajectories and record event datasets.
    GenData(commands::gen_data::GenDataArgs),
    /// Train an estimator network on one or more datasets.
    Train(commands::train::TrainArgs),
    /// Evaluate a checkpoint on datasets (RMSE and MASD per channel).
    Eval(commands::eval::EvalArgs),
    /// PCC time-shift delays of several checkpoints.
    DelayStudy(commands::delay::DelayArgs),
    /// Closed-loop flight with a chosen attitude source.
    Fly(commands::fly::FlyArgs),
    /// Optical-flow EKF on a simulated trajectory plus observability table.
    Ekf(commands::ekf::EkfArgs),
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Numeric(_) => 3,
        Error::Crash(_) => 4,
        _ => 2,
    }
}

fn run(cli: Cli) -> noimu::Result<()> {
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let settings = Settings::resolve(&cli.global)?;
    match cli.command {
        Command::GenData(a) => commands::gen_data::run(&settings, &a),
        Command::Train(a) => commands::train::run(&settings, &a),
        Command::Eval(a) => commands::eval::run(&settings, &a),
        Command::DelayStudy(a) => commands::delay::run(&settings, &a),
        Command::Fly(a) => commands::fly::run(&settings, &a),
        Command::Ekf(a) => commands::ekf::run(&settings, &a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::Numeric("x".into())), 3);
        assert_eq!(exit_code(&Error::Crash("x".into())), 4);
    }
}

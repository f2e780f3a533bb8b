use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ngproxy_cli::config::Command;
use ngproxy_cli::{run_with, Overrides};

#[derive(Parser)]
#[command(name = "ngproxy", version, about = "Bayesian proxy-weighting SVAR with skewed-t shocks")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Monte Carlo study of the four estimators.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// exogenous, weak, weak-alt or endogenous.
        #[arg(long)]
        preset: Option<String>,
        /// 1000 replications instead of the configured number.
        #[arg(long)]
        full_scale: bool,
    },
    /// Fiscal application on a quarterly dataset.
    Estimate {
        #[command(flatten)]
        common: Common,
    },
    /// Tables from the CSV files of an earlier run.
    Report {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the seed of the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (command, common, preset, full_scale) = match cli.command {
        Cmd::Simulate { common, preset, full_scale } => (Command::Simulate, common, preset, full_scale),
        Cmd::Estimate { common } => (Command::Estimate, common, None, false),
        Cmd::Report { common } => (Command::Report, common, None, false),
    };
    if let Some(n) = common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let overrides = Overrides {
        command: Some(command),
        seed: common.seed,
        out: common.out,
        preset,
        full_scale,
    };
    match run_with(common.config, &overrides) {
        Ok(files) => {
            for f in files {
                log::info!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("{}", f.to_json());
            ExitCode::from(f.exit_code() as u8)
        }
    }
}

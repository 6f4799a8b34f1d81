use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wki_cli::{execute, resolve, CliError, FlagOverrides, Pipeline};

#[derive(Parser)]
#[command(
    name = "wki",
    version,
    about = "Forward and inverse scattering for the WKI equation"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set grid.points=2048`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,
    /// Output directory.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Potential to reflection coefficient.
    Forward {
        /// Also write a(λ), b(λ) on a uniform λ grid.
        #[arg(long)]
        lambda_dump: bool,
        /// Also write the gauge fields Q, B, H, p.
        #[arg(long)]
        akns_dump: bool,
    },
    /// Finite-difference time integration of the potential.
    Evolve,
    /// Reflection coefficient to potential at each configured time.
    Inverse {
        /// Reflection CSV written by `forward`.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Forward then inverse at t = 0, with error report.
    Roundtrip {
        /// Repeat at doubled resolution and report the error ratio.
        #[arg(long)]
        convergence: bool,
    },
    /// Compare the transform route against the time integrator.
    ComparePde,
    /// Sample the closed-form one-soliton.
    Soliton,
    /// Print the fully resolved configuration as TOML.
    Config,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let mut flags = FlagOverrides {
        output: cli.common.output.clone(),
        ..Default::default()
    };
    let pipeline = match cli.command {
        Command::Forward {
            lambda_dump,
            akns_dump,
        } => {
            flags.lambda_dump = lambda_dump;
            flags.akns_dump = akns_dump;
            Pipeline::Forward
        }
        Command::Evolve => Pipeline::Evolve,
        Command::Inverse { data } => {
            flags.data = data;
            Pipeline::Inverse
        }
        Command::Roundtrip { convergence } => {
            flags.convergence = convergence;
            Pipeline::Roundtrip
        }
        Command::ComparePde => Pipeline::ComparePde,
        Command::Soliton => Pipeline::Soliton,
        Command::Config => {
            return match wki_cli::config::load(cli.common.config.as_deref(), &cli.common.sets)
                .and_then(|c| toml::to_string(&c).map_err(|e| CliError::Input(e.to_string())))
            {
                Ok(text) => {
                    print!("{text}");
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            };
        }
    };
    match resolve(
        pipeline,
        cli.common.config.as_deref(),
        &cli.common.sets,
        &flags,
    ) {
        Ok(cfg) => ExitCode::from(execute(&cfg) as u8),
        Err(e) => fail(&e),
    }
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", e.record());
    ExitCode::from(e.exit_code() as u8)
}

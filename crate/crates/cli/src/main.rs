//! `eisim`: command-line runner for the excitation-inhibition network flow.
//!
//! Every command reads a parameter file (TOML or JSON), writes CSV/JSON
//! artifacts plus `manifest.json` into the output directory and prints one
//! summary JSON object on stdout.
//!
//! Exit codes: 0 success, 1 domain failure (assumption check, singular
//! orbit, ...), 2 usage or parse error.

mod artifacts;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "eisim", version, about = "Excitation-inhibition network flow simulator and ergodic test bench")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Directory for CSV/JSON artifacts.
    #[arg(long, global = true, env = "EISIM_OUTPUT_DIR", default_value = "eisim-out")]
    pub output_dir: PathBuf,
    /// Master seed; trial k uses stream k of ChaCha8(seed).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 1 selects the sequential code path.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Run even if the parameters fail the assumption checks.
    #[arg(long, global = true)]
    pub force: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check assumptions; exit 1 if any check fails.
    Check(commands::CheckArgs),
    /// Continuous-time trajectory and activation raster.
    Simulate(commands::SimulateArgs),
    /// Activation raster only.
    Raster(commands::RasterArgs),
    /// Lyapunov spectra of the return map.
    Lyapunov(commands::LyapunovArgs),
    /// Evolve an unstable curve and record range, slope and mass statistics.
    Curve(commands::CurveArgs),
    /// Fraction of an evolved curve outside the sinks, for several ε.
    Concentration(commands::ConcentrationArgs),
    /// Fiber synchronization over a shared base orbit.
    Sync(commands::SyncArgs),
    /// Birkhoff averages of the observable catalog.
    Birkhoff(commands::BirkhoffArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = match commands::Context::new(cli.common) {
        Ok(c) => c,
        Err(f) => return f.report(),
    };
    let result = match cli.command {
        Command::Check(a) => commands::check(&ctx, a),
        Command::Simulate(a) => commands::simulate(&ctx, a),
        Command::Raster(a) => commands::raster(&ctx, a),
        Command::Lyapunov(a) => commands::lyapunov(&ctx, a),
        Command::Curve(a) => commands::curve(&ctx, a),
        Command::Concentration(a) => commands::concentration(&ctx, a),
        Command::Sync(a) => commands::sync(&ctx, a),
        Command::Birkhoff(a) => commands::birkhoff(&ctx, a),
    };
    match result {
        Ok(out) => {
            println!("{}", serde_json::to_string_pretty(&out.summary).expect("summary serializes"));
            if out.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(f) => f.report(),
    }
}

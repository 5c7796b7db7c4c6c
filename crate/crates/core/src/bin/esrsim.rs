use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use esr_core::config::RunMode;
use esr_core::run::{run, RunRequest};

/// ESR-STM two-qubit master equation simulator.
///
/// Exit codes: 0 success, 2 bad command line, 3 I/O, 4 parse, 5 validation,
/// 6 numerical abort or integrity failure, 7 calibration failure.
#[derive(Debug, Parser)]
#[command(name = "esrsim", version)]
struct Cli {
    /// propagate | sweep | compile | calibrate; defaults to the config's mode.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<RunMode>,
    /// Run configuration; defaults to the bundled reference configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Pulse file; propagate defaults to the bundled Bell-state program.
    #[arg(long)]
    pulses: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Time step, ns.
    #[arg(long)]
    dt: Option<f64>,
    /// Accepted for reproducible scripts; no random numbers are used.
    #[arg(long)]
    seedless: bool,
    /// Turn the principal-value terms on.
    #[arg(long)]
    pv: bool,
}

fn parse_mode(s: &str) -> Result<RunMode, String> {
    RunMode::from_name(s).ok_or_else(|| format!("unknown mode {s:?}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let request = RunRequest {
        mode: cli.mode,
        config: cli.config,
        pulses: cli.pulses,
        out_dir: cli.out_dir,
        dt: cli.dt,
        principal_value: cli.pv,
    };
    match run(&request) {
        Ok(report) => {
            println!("{}: {}", report.mode.name(), report.message);
            for f in &report.files {
                println!("  wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("esrsim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

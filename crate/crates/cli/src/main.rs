use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qtherm::{cmd_analyze, cmd_bloch_scan, cmd_sweep_p, cmd_verify, DEFAULT_SEED};

/// Thermodynamic cost analysis of quantum operations. Energies in kT.
#[derive(Parser)]
#[command(name = "qtherm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze one problem and emit a JSON report.
    Analyze {
        spec: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Sweep the first signal's probability over a grid.
    SweepP {
        sweep: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Scan the second pure input over a Bloch-sphere grid.
    BlochScan {
        sweep: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run the seeded self-verification suite.
    Verify {
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Negative control: corrupt the implementations' unitaries.
        #[arg(long, hide = true)]
        corrupt: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Analyze { spec, output } => cmd_analyze(spec, output.as_deref()),
        Command::SweepP { sweep, output } => cmd_sweep_p(sweep, output),
        Command::BlochScan { sweep, output } => cmd_bloch_scan(sweep, output),
        Command::Verify { seed, output, corrupt } => cmd_verify(*seed, *corrupt, output.as_deref()).map(|_| ()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qtherm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

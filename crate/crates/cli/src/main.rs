use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod error;
mod manifest;

#[derive(Parser)]
#[command(name = "mechcirc", version, about = "Scattering, noise and pump optimization for electromechanical circulators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct Common {
    /// Device configuration (TOML).
    pub config: PathBuf,
    /// Override a config value, e.g. `pumps.photons[0][1]=2e5` (0-based indices).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Directory for output files; the main table goes to stdout when omitted.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// RNG seed for optimizer starts and random checks.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Probe detuning window around the cavity resonances, in Hz.
#[derive(Args, Clone, Copy)]
pub struct Window {
    #[arg(long, default_value_t = -5000.0, allow_negative_numbers = true)]
    pub omega_min: f64,
    #[arg(long, default_value_t = 5000.0, allow_negative_numbers = true)]
    pub omega_max: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VerifyMode {
    Oracle,
    Timedomain,
    Invariants,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// S-matrix magnitude and phase versus probe detuning.
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        window: Window,
        #[arg(long, default_value_t = 501)]
        points: usize,
    },
    /// |S_ij|^2 over a grid of one pump phase and probe detuning.
    PhaseSweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        window: Window,
        /// Pump whose phase is swept, as `cavity,mode` (1-based).
        #[arg(long, default_value = "2,2")]
        phase_index: String,
        #[arg(long, default_value_t = -180.0, allow_negative_numbers = true)]
        phi_min_deg: f64,
        #[arg(long, default_value_t = 180.0, allow_negative_numbers = true)]
        phi_max_deg: f64,
        #[arg(long, default_value_t = 73)]
        phi_points: usize,
        #[arg(long, default_value_t = 101)]
        omega_points: usize,
    },
    /// Bidirectional conversion between two ports through one mechanical mode.
    Convert {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        window: Window,
        #[arg(long, default_value_t = 501)]
        points: usize,
        /// Ports `a,b` (1-based).
        #[arg(long, default_value = "1,2")]
        ports: String,
        /// Mechanical mode used by --cooperativity (1-based).
        #[arg(long, default_value_t = 1)]
        mode: usize,
        /// Replace the pumps by equal-cooperativity pumps on `mode`.
        #[arg(long)]
        cooperativity: Option<f64>,
    },
    /// Output noise spectra and added noise per path.
    Noise {
        #[command(flatten)]
        common: Common,
        /// Amplifier chain, occupancies or temperatures, and fit targets (TOML).
        env: PathBuf,
        #[command(flatten)]
        window: Window,
        #[arg(long, default_value_t = 201)]
        points: usize,
        /// Fit mechanical occupancies to the targets before computing the budget.
        #[arg(long)]
        fit: bool,
    },
    /// Search pump settings for a target; exits 4 if thresholds are not met.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// Target description (TOML).
        target: PathBuf,
    },
    /// Oracle, time-domain and invariant checks on a configuration.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = VerifyMode::All)]
        mode: VerifyMode,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let result = match cli.command {
        Command::Spectrum { common, window, points } => commands::spectrum(&common, &argv, window, points),
        Command::PhaseSweep { common, window, phase_index, phi_min_deg, phi_max_deg, phi_points, omega_points } => {
            commands::phase_sweep(&common, &argv, window, &phase_index, (phi_min_deg, phi_max_deg, phi_points), omega_points)
        }
        Command::Convert { common, window, points, ports, mode, cooperativity } => {
            commands::convert(&common, &argv, window, points, &ports, mode, cooperativity)
        }
        Command::Noise { common, env, window, points, fit } => commands::noise(&common, &argv, &env, window, points, fit),
        Command::Optimize { common, target } => commands::optimize(&common, &argv, &target),
        Command::Verify { common, mode } => commands::verify(&common, &argv, mode),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! Command-line front end: configuration, dispatch, CSV/JSON output and checkpoints.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use clap::{Parser, Subcommand};
use std::ffi::OsString;
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(name = "capeuler", version, about = "2D free-boundary incompressible Euler toolkit")]
pub struct Cli {
    /// Output directory (default ./capeuler-out).
    #[arg(long, global = true, env = "CAPEULER_OUT")]
    pub out: Option<PathBuf>,
    /// Only print errors and the final verdict.
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Seed for randomized test fields.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long = "n-theta", global = true)]
    pub n_theta: Option<usize>,
    #[arg(long = "n-r", global = true)]
    pub n_r: Option<usize>,
    /// Time step (for ops-verify: the finite-difference step of the flow oracle).
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Geometry report of the configured initial shape.
    Geom,
    /// Check every kinematic formula and boundary identity against independent oracles.
    OpsVerify {
        #[arg(long, default_value = "ellipse-shear")]
        family: String,
    },
    /// Run the surface-tension wave solver.
    Simulate {
        /// Put ρ and φ of each checkpoint in a binary f64 payload.
        #[arg(long)]
        binary: bool,
        /// Continue from a checkpoint instead of the configured initial data.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Integrate the expanding/contracting annulus ODE.
    AnnulusOde {
        #[arg(long, default_value_t = 1.0)]
        r1: f64,
        #[arg(long, default_value_t = 2.0)]
        r2: f64,
        /// Initial flux a₁ = A'(0).
        #[arg(long, default_value_t = 0.5)]
        a1: f64,
        #[arg(long = "t-end", default_value_t = 1.0)]
        t_end: f64,
        /// Gaussian swirl profile Θ(0, r₀).
        #[arg(long = "swirl-amp", default_value_t = 0.0)]
        swirl_amp: f64,
        #[arg(long = "swirl-center", default_value_t = 1.5)]
        swirl_center: f64,
        #[arg(long = "swirl-width", default_value_t = 0.2)]
        swirl_width: f64,
        #[arg(long, default_value_t = 48)]
        nodes: usize,
    },
    /// Measure drop oscillation frequencies against ε²k(k²−1)/R³.
    Dispersion {
        #[arg(long, value_delimiter = ',', default_value = "2,3,4,5,6")]
        k: Vec<usize>,
        #[arg(long, default_value_t = 1e-3)]
        amp: f64,
        #[arg(long, default_value_t = 3.0)]
        periods: f64,
    },
    /// Vanishing surface tension sweep against the ε = 0 run.
    EpsSweep {
        #[arg(long = "eps-list", value_delimiter = ',', default_value = "0.4,0.2,0.1,0.05")]
        eps_list: Vec<f64>,
    },
    /// Energies, RT margin and monitor ratios of a checkpoint or of the configured initial state.
    EnergyReport {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Print the header of a checkpoint file.
    CheckpointInfo { path: PathBuf },
}

/// Parse `argv`, run the subcommand and return the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = if cli.quiet { log::LevelFilter::Warn } else { log::LevelFilter::Info };
    let _ = env_logger::Builder::new().filter_level(level).format_target(false).format_timestamp(None).try_init();
    match commands::dispatch(&cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

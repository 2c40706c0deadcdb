use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

mod run;

use run::{IcChoice, PresetTag};
use stringlab::discretize::InterfaceMass;

#[derive(Parser)]
#[command(name = "stringlab", version, about = "Two-string point-mass feedback experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the Lyapunov certificate constants as JSON (exit 0 iff feasible).
    Certificate {
        #[command(flatten)]
        common: Common,
        /// Explicit eps1 (requires --eps2 and --delta).
        #[arg(long, requires_all = ["eps2", "delta"])]
        eps1: Option<f64>,
        #[arg(long, requires_all = ["eps1", "delta"])]
        eps2: Option<f64>,
        #[arg(long, requires_all = ["eps1", "eps2"])]
        delta: Option<f64>,
    },
    /// Eigenvalues of the discrete generator, written to spectrum.csv.
    Spectrum {
        #[command(flatten)]
        common: Common,
    },
    /// Time integration; writes energy.csv and optionally snapshots.csv.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Also write every recorded state to snapshots.csv.
        #[arg(long)]
        snapshots: bool,
    },
    /// Spectrum and simulation for several presets, plus summary.json.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated preset tags.
        #[arg(long, value_delimiter = ',', default_value = "a,b,c,d")]
        presets: Vec<stringlab::model::Preset>,
    },
}

#[derive(Args, Clone, Debug)]
pub struct Common {
    /// JSON parameter file (rho1, rho2, alpha1, alpha2, m, l1, l2, b0, b1, d1).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    pub n1: usize,
    #[arg(long, default_value_t = 30)]
    pub n2: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, default_value_t = 20.0)]
    pub t_final: f64,
    #[arg(long, default_value_t = 10)]
    pub record_every: usize,
    /// zero | paper | sine | box | file:PATH
    #[arg(long, default_value = "paper")]
    pub ic: IcChoice,
    /// Damping preset; overrides the gains of the parameter file.
    #[arg(long)]
    pub preset: Option<PresetTag>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Write Mfull, K and D in coordinate format into this directory.
    #[arg(long)]
    pub dump_matrices: Option<PathBuf>,
    /// Interface inertia treatment: averaged | lumped
    #[arg(long, default_value = "averaged")]
    pub interface: InterfaceMass,
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Certificate {
            common,
            eps1,
            eps2,
            delta,
        } => {
            let choice = match (eps1, eps2, delta) {
                (Some(a), Some(b), Some(c)) => Some((a, b, c)),
                _ => None,
            };
            run::certificate(&common, choice)
        }
        Command::Spectrum { common } => run::spectrum(&common),
        Command::Simulate { common, snapshots } => run::simulate(&common, snapshots),
        Command::Sweep { common, presets } => run::sweep(&common, &presets),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kerrcat_cli::config::{RunConfig, WignerState};
use kerrcat_cli::{run, CliError, Command};

/// Exceptional points, winding numbers and reduced dynamics of a
/// driven-dissipative Kerr-cat qubit.
#[derive(Debug, Parser)]
#[command(name = "kerrcat", version)]
struct Cli {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Fock truncation for full-space commands.
    #[arg(long, global = true)]
    dim: Option<usize>,
    /// Read κ as cyclic MHz and multiply by 2π.
    #[arg(long, global = true)]
    kappa_angular: bool,
    /// Write the effective configuration to stdout and exit.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Closed-form eigenvalues over an (ε, Δ) grid.
    Spectrum {
        /// Add numerically solved eigenvalues and compare.
        #[arg(long)]
        numeric: bool,
    },
    /// Double-root lines and the four third-order points.
    EpMap,
    /// Third-order points, closed form against Newton refinement.
    Lep3,
    /// Winding numbers of the resultant vector along contours.
    Winding {
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Full versus reduced dynamics fidelity maps.
    Fidelity,
    /// Wigner function on a phase-space grid.
    Wigner {
        #[arg(long, value_parser = parse_state)]
        state: Option<WignerState>,
    },
    /// Steady state of the full master equation.
    SteadyState {
        /// Also dump every Liouvillian eigenvalue.
        #[arg(long)]
        spectrum: bool,
    },
}

fn parse_state(s: &str) -> Result<WignerState, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| "expected steady-state, cat-plus, cat-minus or coherent".to_string())
}

fn configure(cli: &Cli) -> Result<(Command, RunConfig), CliError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        config.out = out.clone();
    }
    if let Some(w) = cli.workers {
        config.workers = w;
    }
    if let Some(d) = cli.dim {
        config.dim = d;
    }
    if cli.kappa_angular {
        config.model.kappa_angular = true;
    }
    let command = match &cli.command {
        Sub::Spectrum { numeric } => {
            config.spectrum.numeric |= numeric;
            Command::Spectrum
        }
        Sub::EpMap => Command::EpMap,
        Sub::Lep3 => Command::Lep3,
        Sub::Winding { samples } => {
            if let Some(s) = samples {
                config.winding.samples = *s;
            }
            Command::Winding
        }
        Sub::Fidelity => Command::Fidelity,
        Sub::Wigner { state } => {
            if let Some(s) = state {
                config.wigner.state = *s;
            }
            Command::Wigner
        }
        Sub::SteadyState { spectrum } => {
            config.steady_state.spectrum |= spectrum;
            Command::SteadyState
        }
    };
    Ok((command, config))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = configure(&cli).and_then(|(command, config)| {
        if cli.print_config {
            println!("{}", config.to_json());
            return Ok(None);
        }
        run(command, &config).map(Some)
    });
    match result {
        Ok(Some(summary)) => {
            println!("{}", summary.display());
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kerrcat: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use duopoly_cli::commands::{self, Report, SpectrumArgs};
use duopoly_cli::{config, configure_threads, CliError};
use duopoly_core::Rectangle;

/// Stability analysis of a delayed Cournot duopoly with tax evasion.
///
/// Exit codes: 0 success, 1 I/O failure, 2 invalid input, 3 solver failure,
/// 4 spectrum verification failure. DUOPOLY_THREADS sets the worker count.
#[derive(Parser)]
#[command(name = "duopoly", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Equilibrium, stability conditions, and verdict.
    Analyze {
        config: PathBuf,
        /// Also write the results as key=value lines.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Characteristic roots for one or more delays.
    Spectrum {
        config: PathBuf,
        /// Comma-separated delays.
        #[arg(long, allow_hyphen_values = true)]
        tau: Option<String>,
        /// Search rectangle as re_min,re_max,im_min,im_max.
        #[arg(long, allow_hyphen_values = true)]
        rect: Option<String>,
        /// Seed grid points per unit length.
        #[arg(long)]
        grid_density: Option<f64>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Integrate the delayed system from the configured initial state.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep one parameter and bracket verdict changes.
    Scan {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_list(flag: &str, text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|e| CliError::Validation(format!("--{flag}: `{s}`: {e}")))
        })
        .collect()
}

fn run(cli: Cli) -> Result<Report, CliError> {
    configure_threads()?;
    match cli.command {
        Command::Analyze { config, report } => commands::analyze(&config::load(&config)?, report.as_deref()),
        Command::Spectrum {
            config,
            tau,
            rect,
            grid_density,
            csv,
            svg,
        } => {
            let cfg = config::load(&config)?;
            let taus = tau.map(|t| parse_list("tau", &t)).transpose()?;
            let rect = match rect {
                None => None,
                Some(text) => match parse_list("rect", &text)?.as_slice() {
                    &[a, b, c, d] => Some(Rectangle::new(a, b, c, d)?),
                    _ => return Err(CliError::Validation("--rect needs four values".into())),
                },
            };
            let args = SpectrumArgs {
                taus,
                rect,
                grid_density,
                csv,
                svg,
            };
            commands::spectrum_cmd(&cfg, &args)
        }
        Command::Simulate { config, out } => commands::simulate(&config::load(&config)?, out.as_deref()),
        Command::Scan { config, out } => commands::scan_cmd(&config::load(&config)?, out.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(report) => {
            for w in &report.warnings {
                eprintln!("{w}");
            }
            print!("{}", report.stdout);
            ExitCode::from(report.exit)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use berkcal_cli::fit::{fit_rows, write_rows, FitManifest, ModelChoice, OutputFormat};
use berkcal_cli::ingest::Locale;
use berkcal_cli::simulate::{simulate_command, SimFormat, SimulateArgs};
use berkcal_cli::validate::validate_command;
use berkcal_cli::{exit_code, ChecksFailed, EXIT_OK};
use clap::{Parser, Subcommand};

/// Calibration of an unknown concentration under the usual and controlled
/// linear calibration models.
#[derive(Parser)]
#[command(name = "berkcal", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate x0 and its uncertainty from first- and second-stage CSVs.
    Fit {
        /// First-stage CSV with header `x,y`.
        #[arg(long)]
        first: PathBuf,
        /// Second-stage CSV with header `y0`.
        #[arg(long)]
        second: PathBuf,
        /// Model to fit; repeat for several. Default: all that apply.
        #[arg(long, value_enum)]
        model: Vec<ModelChoice>,
        /// Known control-error variance (required by `--model known`).
        #[arg(long)]
        sigma_delta_sq: Option<f64>,
        /// Two-sided confidence level of the interval.
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[arg(long, value_enum, default_value_t = Locale::Point)]
        locale: Locale,
        #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
        format: OutputFormat,
        /// Output file; standard output if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a Monte Carlo grid described by a TOML file.
    Simulate {
        #[arg(long)]
        grid: PathBuf,
        /// Override the replications per cell.
        #[arg(long)]
        reps: Option<usize>,
        /// Override the base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; defaults to all cores.
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long, value_enum, default_value_t = SimFormat::Csv)]
        format: SimFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in consistency checks.
    Validate {
        /// Smaller Monte Carlo samples.
        #[arg(long)]
        fast: bool,
    },
}

fn sink(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit {
            first,
            second,
            model,
            sigma_delta_sq,
            level,
            locale,
            format,
            out,
        } => {
            let manifest = FitManifest {
                first,
                second,
                models: model,
                sigma_delta_sq,
                confidence_level: level,
                locale,
                format,
                output: out,
            };
            let rows = fit_rows(&manifest)?;
            let mut w = sink(manifest.output.as_ref())?;
            write_rows(&rows, manifest.format, &mut w)?;
            w.flush()?;
        }
        Command::Simulate {
            grid,
            reps,
            seed,
            threads,
            format,
            out,
        } => {
            let args = SimulateArgs {
                grid: &grid,
                reps,
                seed,
                threads,
                format,
            };
            let mut w = sink(out.as_ref())?;
            let failed = simulate_command(&args, &mut w)?;
            w.flush()?;
            if failed > 0 {
                return Err(ChecksFailed(failed).into());
            }
        }
        Command::Validate { fast } => {
            let mut w = sink(None)?;
            let result = validate_command(fast, &mut w);
            w.flush()?;
            result?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::from(EXIT_OK as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};

use pvafd::{generate, render_report, run_manifest_file, Overrides, ReportFormat};
use pvafd_core::synthetic::PortfolioSpec;

#[derive(Parser)]
#[command(name = "pvafd", version, about = "Fault detection experiments for photovoltaic plants")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic portfolio as measurement and ticket CSVs.
    Generate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the portfolio seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run every detector of a run manifest and write the reports.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        /// Output directory; defaults to the manifest's `out`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        /// EWMA smoothing factor.
        #[arg(long)]
        lambda: Option<f64>,
        /// Control-limit width in sigma units.
        #[arg(long)]
        limit_width: Option<f64>,
        /// Seed for an in-memory synthetic portfolio.
        #[arg(long)]
        seed: Option<u64>,
        /// Average rates over plants instead of pooling day counts.
        #[arg(long = "macro")]
        macro_average: bool,
    },
    /// Re-render the tables of a finished run.
    Report {
        /// Directory holding report.json.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            manifest,
            out,
            seed,
            workers,
        } => {
            let mut spec = PortfolioSpec::load(&manifest)?;
            if let Some(s) = seed {
                spec.seed = s;
            }
            let ids = generate(&spec, &out, workers)?;
            log::info!("wrote {} plants to {}", ids.len(), out.display());
        }
        Command::Run {
            manifest,
            out,
            workers,
            lambda,
            limit_width,
            seed,
            macro_average,
        } => {
            let overrides = Overrides {
                limit_width,
                lambda,
                seed,
                macro_average,
                workers,
            };
            let output = run_manifest_file(&manifest, out.as_deref(), &overrides)?;
            log::info!(
                "{} detectors evaluated in {:.1} s",
                output.reports.len(),
                output.log.wall_ms / 1e3
            );
        }
        Command::Report { out, format } => {
            let format = match format {
                Format::Text => ReportFormat::Text,
                Format::Csv => ReportFormat::Csv,
                Format::Json => ReportFormat::Json,
            };
            render_report(&out, format, &mut std::io::stdout().lock())?;
        }
    }
    Ok(())
}

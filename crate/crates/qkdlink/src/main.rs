use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qkdlink::commands;
use qkdlink::config::{ExperimentConfig, Mode, DEFAULT_CONFIG_TOML};
use qkdlink::AppError;

#[derive(Parser)]
#[command(name = "qkdlink", version, about = "Weak-source BB84 link with a co-propagating classical channel")]
struct Cli {
    /// Experiment configuration (TOML). Built-in defaults when omitted.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for simulation and sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the model to its anchors and check closure.
    Calibrate {
        /// Report file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep the classical ROP grid and tabulate the link metrics.
    Sweep {
        #[arg(long, value_enum, default_value = "fiber")]
        mode: Mode,
        /// CSV output; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// SVG plot output.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Generate a QTAG time-tag file.
    Simulate {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        symbols: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate QBER and raw rate from a tag file.
    Analyze {
        tags: PathBuf,
        /// Run length in symbols; `montecarlo.symbols` when omitted.
        #[arg(long)]
        symbols: Option<u64>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Safe operating area of the fiber link.
    Soax {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Print the default configuration.
    DefaultConfig,
}

fn run(cli: Cli) -> Result<(), AppError> {
    let config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    match cli.command {
        Command::Calibrate { out } => {
            // the report is printed even when closure fails
            match commands::calibrate_cmd(&config, out.as_deref()) {
                Ok(o) => print!("{}", o.report),
                Err(e) => {
                    if let Ok(cal) = qkdlink::calibrate(&config) {
                        eprint!("{}", qkdlink::io::residuals_csv(&cal.residuals));
                    }
                    return Err(e);
                }
            }
        }
        Command::Sweep { mode, out, plot } => {
            let csv = commands::sweep_cmd(&config, mode, out.as_deref(), plot.as_deref())?;
            if out.is_none() {
                print!("{csv}");
            }
        }
        Command::Simulate { seed, symbols, out } => {
            let o = commands::simulate_cmd(&config, seed, symbols, Some(&out))?;
            print!("{}", o.summary);
        }
        Command::Analyze { tags, symbols, csv } => {
            let (_, summary) = commands::analyze_cmd(&config, &tags, symbols, csv.as_deref())?;
            print!("{summary}");
        }
        Command::Soax { out, csv } => {
            let (_, summary) = commands::soax_cmd(&config, out.as_deref(), csv.as_deref())?;
            print!("{summary}");
        }
        Command::DefaultConfig => print!("{DEFAULT_CONFIG_TOML}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .expect("global thread pool");
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use cim_cli::commands::{self, CurveSelector, TableKind};
use cim_cli::output::write_atomic;
use cim_cli::CliError;
use cim_core::analysis::ComplexityParams;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "cimsim", version, about = "Code-spatial index modulation BER experiments and tables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every experiment in a config and write CSVs plus manifest.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (default: available cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Override every experiment's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Parse and validate a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print a rate, energy or complexity table.
    Tables {
        #[arg(value_enum)]
        which: Which,
        /// Also write `<which>.csv` into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 252)]
        length: u64,
        #[arg(long, default_value_t = 4)]
        nt: u64,
        #[arg(long, default_value_t = 4)]
        nr: u64,
        #[arg(long, default_value_t = 4)]
        nc: u64,
        #[arg(long, default_value_t = 4)]
        m: u64,
    },
    /// Horizontal dB gap between two result curves; positive when A needs less SNR.
    Gap {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        ber_level: f64,
        #[arg(long)]
        detector_a: Option<String>,
        #[arg(long)]
        detector_b: Option<String>,
        #[arg(long)]
        experiment_a: Option<String>,
        #[arg(long)]
        experiment_b: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    Rate,
    Energy,
    Complexity,
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            out,
            workers,
            seed,
        } => {
            let workers = workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let summary = commands::run(&config, &out, workers, seed)?;
            for e in &summary.experiments {
                println!("{}: {} rows -> {}", e.name, e.rows, out.join(&e.output).display());
            }
            println!("manifest -> {}", summary.manifest.display());
        }
        Command::Validate { config } => {
            let exps = commands::validate(&config)?;
            for e in &exps {
                println!("{}: ok ({})", e.entry.name, e.spec.digest());
            }
        }
        Command::Tables {
            which,
            out,
            length,
            nt,
            nr,
            nc,
            m,
        } => {
            let kind = match which {
                Which::Rate => TableKind::Rate,
                Which::Energy => TableKind::Energy,
                Which::Complexity => TableKind::Complexity,
            };
            let params = ComplexityParams {
                length,
                num_rx: nr,
                num_tx: nt,
                num_codes: nc,
                modulation_order: m,
            };
            let t = commands::table(kind, params)?;
            print!("{}", t.text);
            if let Some(dir) = out {
                write_atomic(&dir.join(format!("{}.csv", kind.as_str())), &t.csv)?;
            }
        }
        Command::Gap {
            a,
            b,
            ber_level,
            detector_a,
            detector_b,
            experiment_a,
            experiment_b,
        } => {
            let sel_a = CurveSelector {
                detector: detector_a,
                experiment: experiment_a,
            };
            let sel_b = CurveSelector {
                detector: detector_b,
                experiment: experiment_b,
            };
            println!("{}", commands::gap(&a, &b, ber_level, &sel_a, &sel_b)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.report());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

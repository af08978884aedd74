use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use randloop::pdstats::CUTOFF_SWEEP;
use randloop::quantum::DEFAULT_DIMENSION_CAP;
use randloop_cli::commands;
use randloop_cli::error::io_err;
use randloop_cli::output::{to_json, write_json};
use randloop_cli::simulate::{simulate, SimulateOptions, SimulateOutcome};
use randloop_cli::{parse_config, CliError, CliResult, ExperimentConfig};

#[derive(Parser)]
#[command(name = "randloop", version, about = "Random loop models of quantum spin systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run Monte Carlo chains and write correlations.csv, summary.json,
    /// partitions.json and checkpoints.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `run.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: one per core).
        #[arg(long)]
        threads: Option<usize>,
        /// Overrides `output.directory`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Continue from the checkpoints in this directory.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Stop each chain after this many sweeps, keeping its checkpoint.
        #[arg(long)]
        halt_after: Option<u64>,
    },
    /// Exact diagonalization of the spin model for the configured graph.
    Exact {
        #[arg(long)]
        config: PathBuf,
        /// Refuse Hilbert spaces larger than this.
        #[arg(long, default_value_t = DEFAULT_DIMENSION_CAP)]
        cap: usize,
        /// Also write exact.json here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Infrared-bound integrals I_d, J_d and the sufficient-condition thresholds.
    Integrals {
        /// Dimensions, e.g. `2..6` (inclusive) or `3`.
        dims: String,
        /// Also compute the primed pair (d ≤ 3).
        #[arg(long)]
        primed: bool,
        #[arg(long, value_enum, default_value_t = TableFormat::Text)]
        format: TableFormat,
        /// Also write integrals.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare recorded loop partitions with Poisson–Dirichlet statistics.
    Pdtest {
        /// partitions.json files or simulate output directories.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// PD parameter; defaults to the one recorded with the partitions.
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        cutoffs: Option<Vec<f64>>,
        /// Also write pdtest.json here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Derive spin correlations, κ̂, τ/α, infrared bounds and PD statistics
    /// from the checkpoints of a simulate run.
    Analyze {
        /// A simulate output directory.
        dir: PathBuf,
        /// Where to write analysis.json (default: the run directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TableFormat {
    Text,
    Csv,
    Json,
}

fn load_config(path: &Path) -> CliResult<(ExperimentConfig, String, PathBuf)> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let cfg = parse_config(&text)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((cfg, text, base))
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate { config, seed, threads, out, resume, halt_after } => {
            if threads == Some(0) {
                return Err(CliError::Usage("--threads must be at least 1".into()));
            }
            let (cfg, text, base) = load_config(&config)?;
            let opts = SimulateOptions { seed, threads, out, resume, halt_after };
            match simulate(&cfg, &text, &base, &opts)? {
                SimulateOutcome::Finished { dir, summary } => {
                    println!("wrote {} ({} observations)", dir.display(), summary.observations);
                }
                SimulateOutcome::Halted { dir, sweeps_done } => {
                    println!(
                        "halted with sweeps {sweeps_done:?}; continue with --resume {}",
                        dir.display()
                    );
                }
            }
        }
        Command::Exact { config, cap, out } => {
            let (cfg, _, base) = load_config(&config)?;
            let report = commands::exact(&cfg, &base, cap)?;
            print!("{}", to_json(&report).expect("report serializes"));
            if let Some(dir) = out {
                ensure_dir(&dir)?;
                write_json(&dir.join("exact.json"), &report)?;
            }
        }
        Command::Integrals { dims, primed, format, out } => {
            let dims = commands::parse_dim_range(&dims).map_err(CliError::Usage)?;
            let rows = commands::integrals(&dims, primed)?;
            match format {
                TableFormat::Text => print!("{}", commands::integrals_text(&rows)),
                TableFormat::Csv => print!("{}", commands::integrals_csv(&rows)),
                TableFormat::Json => print!("{}", to_json(&rows).expect("rows serialize")),
            }
            if let Some(dir) = out {
                ensure_dir(&dir)?;
                randloop_cli::output::write_atomic(&dir.join("integrals.csv"), commands::integrals_csv(&rows).as_bytes())?;
            }
        }
        Command::Pdtest { inputs, theta, cutoffs, out } => {
            let cutoffs = cutoffs.unwrap_or_else(|| CUTOFF_SWEEP.to_vec());
            let report = commands::pdtest(&inputs, theta, &cutoffs)?;
            print!("{}", to_json(&report).expect("report serializes"));
            if let Some(dir) = out {
                ensure_dir(&dir)?;
                write_json(&dir.join("pdtest.json"), &report)?;
            }
        }
        Command::Analyze { dir, out } => {
            let analysis = commands::analyze(&dir)?;
            let target = out.unwrap_or_else(|| dir.clone());
            ensure_dir(&target)?;
            let path = target.join("analysis.json");
            write_json(&path, &analysis)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qshard::cli::{
    cmd_bench, cmd_run, cmd_shor, render_bench_table, render_period, write_report_file, RunConfig,
    TimingMode,
};

/// Distributed state-vector simulator for a gate-model quantum computer.
#[derive(Parser)]
#[command(name = "qshard", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonFlags {
    /// Virtual rank count (power of two); defaults to the program's
    /// MPIPROCESSES declaration, then 1.
    #[arg(long)]
    ranks: Option<usize>,
    /// Largest number of qubit pairs relocated by one swap command.
    #[arg(long, default_value_t = 1)]
    kmax: usize,
    /// Pieces each exchange buffer is split into on the wire.
    #[arg(long, default_value_t = 4)]
    chunks: usize,
    /// Seed for the sampling generator.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Basis states to draw from the final state.
    #[arg(long, default_value_t = 0)]
    samples: usize,
    /// Write a JSON report here as well.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Report gate work only, excluding the measurement stage from times.
    #[arg(long)]
    gates_only_timing: bool,
}

impl CommonFlags {
    fn config(&self) -> RunConfig {
        RunConfig {
            n_ranks: self.ranks,
            k_max: self.kmax,
            chunk_count: self.chunks,
            seed: self.seed,
            sample_count: self.samples,
            timing: if self.gates_only_timing {
                TimingMode::GatesOnly
            } else {
                TimingMode::WithMeasurement
            },
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Execute a .qc program file.
    Run {
        file: PathBuf,
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// Factor a composite via quantum period finding.
    Shor {
        /// Composite modulus G.
        #[arg(long)]
        g: u64,
        /// Base y with 1 < y < G.
        #[arg(long)]
        y: u64,
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// Time a built-in suite over a list of rank counts.
    Bench {
        /// One of: hadamard, qft, adder-3x11, adder-2x17, adder-5x7,
        /// adder-3x12.
        suite: String,
        /// Comma-separated rank counts, e.g. 1,2,4.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        ranks_list: Vec<usize>,
        /// Qubit count for the hadamard and qft suites.
        #[arg(long)]
        qubits: Option<usize>,
        #[command(flatten)]
        flags: CommonFlags,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qshard: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> qshard::Result<()> {
    match cli.command {
        Command::Run { file, flags } => {
            let report = cmd_run(&file, &flags.config())?;
            print!("{}", report.render());
            if let Some(path) = &flags.report {
                write_report_file(path, &report)?;
            }
        }
        Command::Shor { g, y, flags } => {
            let (report, period) = cmd_shor(g, y, &flags.config())?;
            print!("{}", report.render());
            print!("{}", render_period(g, y, &period));
            if let Some(path) = &flags.report {
                write_report_file(path, &(report, period))?;
            }
        }
        Command::Bench {
            suite,
            ranks_list,
            qubits,
            flags,
        } => {
            let reports = cmd_bench(&suite, &ranks_list, qubits, &flags.config())?;
            print!("{}", render_bench_table(&reports));
            if let Some(path) = &flags.report {
                write_report_file(path, &reports)?;
            }
        }
    }
    Ok(())
}

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vrtl_core::engine::EngineKind;

/// Error-injection instrumentation, integrity property generation and
/// model checking for parity-protected RTL.
#[derive(Parser)]
#[command(name = "vrtl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Rtl {
    /// Verilog source files
    #[arg(long, num_args = 1.., required = true)]
    rtl: Vec<PathBuf>,
    /// Top module
    #[arg(long)]
    top: String,
}

#[derive(Args, Clone)]
struct EngineArgs {
    #[arg(long, default_value = "fwd", value_parser = parse_engine)]
    engine: EngineKind,
    #[arg(long, default_value_t = 5_000_000)]
    node_limit: usize,
    /// Seconds per property; 0 disables the timeout
    #[arg(long, default_value_t = 60)]
    timeout: u64,
    /// Largest state+input bit count for the explicit engine
    #[arg(long, default_value_t = 24)]
    explicit_cap: u32,
    /// Deepest layer the explicit engine explores
    #[arg(long)]
    depth_bound: Option<usize>,
}

fn parse_engine(s: &str) -> Result<EngineKind, String> {
    s.parse()
}

#[derive(Subcommand)]
enum Command {
    /// Add error-injection ports and muxes to a leaf module
    Instrument {
        #[command(flatten)]
        design: Rtl,
        #[arg(long)]
        spec: PathBuf,
        #[arg(short = 'o', long)]
        output: PathBuf,
        /// Also emit a wrapper with the original ports and injection tied off
        #[arg(long)]
        wrapper: Option<String>,
        /// Write the area overhead report here
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Generate the detection, soundness and integrity vunits
    Propgen {
        #[arg(long)]
        spec: PathBuf,
        #[arg(short = 'o', long)]
        output: PathBuf,
        /// Split the integrity check into per-stage units
        #[arg(long)]
        cuts: Option<PathBuf>,
        /// Design, for entity widths narrower than the injected data
        #[arg(long, num_args = 1.., requires = "top")]
        rtl: Vec<PathBuf>,
        #[arg(long, requires = "rtl")]
        top: Option<String>,
    },
    /// Check every asserted property of the given vunits
    Check {
        #[command(flatten)]
        design: Rtl,
        #[arg(long, num_args = 1.., required = true)]
        vunit: Vec<PathBuf>,
        #[command(flatten)]
        engine: EngineArgs,
        /// Treat assumed internal signals as free inputs (stage checks)
        #[arg(long)]
        cut: bool,
        /// Directory for counterexample files
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Results file in addition to standard output
        #[arg(long)]
        results: Option<PathBuf>,
        /// Worker threads; 0 picks one per core
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Sequential equivalence of two modules from reset
    Equiv {
        #[command(flatten)]
        left: Rtl,
        #[arg(long, num_args = 1.., required = true)]
        rtl2: Vec<PathBuf>,
        #[arg(long)]
        top2: String,
        #[command(flatten)]
        engine: EngineArgs,
        /// Counterexample file
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Aggregate results files into a per-module table
    Report {
        #[arg(long, num_args = 0..)]
        results: Vec<PathBuf>,
        #[arg(short = 'o', long)]
        output: Option<PathBuf>,
    },
    /// Print the elaborated word-level IR
    DumpIr {
        #[command(flatten)]
        design: Rtl,
    },
    /// Cross-check all engines on seeded random transition systems
    Crossval {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        count: u64,
        #[arg(long, default_value_t = 10)]
        state_bits: u32,
        #[arg(long, default_value_t = 6)]
        input_bits: u32,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    match commands::run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(io::Fail(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

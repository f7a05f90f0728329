use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cachechan::config::{ScenarioFile, SweepSpec};
use cachechan::report::{
    disrupt_compare, sweep_rows, theory_rows, write_rows, OutputFormat, ReportError,
};
use cachechan::run_scenario;

/// Cache-eviction covert timing channel simulator.
#[derive(Parser)]
#[command(name = "cachechan", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Theoretical rows for every cache size of a sweep file.
    Theory(TableArgs),
    /// Run one scenario; writes the trace and prints a summary.
    Simulate(RunArgs),
    /// Theoretical and simulated rows for every cache size of a sweep file.
    Sweep(TableArgs),
    /// Run a disrupted scenario uncoded and repetition-coded.
    Disrupt(RunArgs),
}

#[derive(Args)]
struct TableArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output file; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Trace file (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cmd: Command) -> Result<(), ReportError> {
    match cmd {
        Command::Theory(a) => {
            let spec = SweepSpec::load(&a.config)?;
            let rows = theory_rows(&spec)?;
            emit(a.out.as_deref(), |w| write_rows(&rows, a.format, w))
        }
        Command::Sweep(a) => {
            let spec = SweepSpec::load(&a.config)?;
            let rows = sweep_rows(&spec, a.seed)?;
            emit(a.out.as_deref(), |w| write_rows(&rows, a.format, w))
        }
        Command::Simulate(a) => {
            let cfg = ScenarioFile::load(&a.config)?.to_config(a.seed)?;
            let trace = run_scenario(&cfg)?;
            if let Some(path) = &a.out {
                write_file(path, trace.to_json().as_bytes())?;
            }
            println!("{}", trace.summary());
            Ok(())
        }
        Command::Disrupt(a) => {
            let cfg = ScenarioFile::load(&a.config)?.to_config(a.seed)?;
            let cmp = disrupt_compare(&cfg)?;
            if let Some(path) = &a.out {
                write_file(path, cmp.to_json().as_bytes())?;
            }
            println!("{}", cmp.summary());
            Ok(())
        }
    }
}

fn emit(
    out: Option<&Path>,
    f: impl FnOnce(&mut dyn Write) -> Result<(), ReportError>,
) -> Result<(), ReportError> {
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            f(&mut w)?;
            w.flush()?;
        }
        None => f(&mut io::stdout().lock())?,
    }
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ReportError> {
    let mut text = bytes.to_vec();
    text.push(b'\n');
    std::fs::write(path, text)?;
    Ok(())
}

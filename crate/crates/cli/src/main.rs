//! `winstat`: win-statistic analysis, margin sweeps, simulation studies and
//! diagnostic dumps.

mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{AnalyzeArgs, CurveArgs, LogrankArgs, SimulateArgs, TermsArgs, TrueValuesArgs};
use output::Run;

#[derive(Debug, Parser)]
#[command(name = "winstat", version, about = "IPCW-adjusted win ratio, win odds and net benefit")]
struct Cli {
    /// Worker threads (0 = available parallelism). Results do not depend on it.
    #[arg(long, global = true, env = "WINSTAT_THREADS", default_value_t = 0)]
    threads: usize,
    /// Where to write the run manifest (default: next to --out, else stderr).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate win probabilities and test the win statistics on a CSV dataset.
    Analyze(AnalyzeArgs),
    /// Replicated simulation study; writes the summary table as CSV.
    Simulate(SimulateArgs),
    /// Monte-Carlo true values of a scenario.
    TrueValues(TrueValuesArgs),
    /// Censoring Kaplan-Meier curves and hazard increments per group.
    DumpCensoringCurve(CurveArgs),
    /// Kernel terms for an endpoint count and margins.
    DumpTerms(TermsArgs),
    /// Log-rank test on time to first event.
    Logrank(LogrankArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { error::EXIT_CONFIG as u8 } else { 0 });
        }
    };
    let result = winstat::parallel::with_threads(cli.threads, || {
        let (name, out) = match &cli.command {
            Command::Analyze(a) => ("analyze", a.out.clone()),
            Command::Simulate(a) => ("simulate", a.out.clone()),
            Command::TrueValues(a) => ("true-values", a.out.clone()),
            Command::DumpCensoringCurve(a) => ("dump-censoring-curve", a.out.clone()),
            Command::DumpTerms(a) => ("dump-terms", a.out.clone()),
            Command::Logrank(a) => ("logrank", a.out.clone()),
        };
        let mut run = Run::new(name, out, cli.manifest.clone());
        let code = match &cli.command {
            Command::Analyze(a) => commands::analyze(a, &mut run),
            Command::Simulate(a) => commands::simulate(a, &mut run),
            Command::TrueValues(a) => commands::true_values(a, &mut run),
            Command::DumpCensoringCurve(a) => commands::censoring_curve(a, &mut run),
            Command::DumpTerms(a) => commands::terms(a, &mut run),
            Command::Logrank(a) => commands::logrank(a, &mut run),
        }?;
        run.finish()?;
        Ok::<i32, error::CliError>(code)
    });
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("winstat: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}

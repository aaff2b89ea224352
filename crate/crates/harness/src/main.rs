use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ris_core::baselines::Scheme;

use ris_harness::audit::audit;
use ris_harness::config_file::{load, parse_scheme, SweepKind, SweepSpec};
use ris_harness::output::write_run;
use ris_harness::sweep::{run_sweep, Status};
use ris_harness::{HarnessError, Result};

/// Monte-Carlo runs of the RIS-assisted two-user beamforming solvers.
#[derive(Debug, Parser)]
#[command(name = "ris-harness", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Weighted-SINR ADMM over a lambda sweep.
    Wsinr(RunArgs),
    /// Sum-rate ADMM over a power sweep.
    Sumrate(RunArgs),
    /// Every configured scheme over the configured sweep.
    Sweep(RunArgs),
    /// The fixed-surface and no-RIS baselines of the configured sweep.
    Baseline(RunArgs),
    /// Recompute KKT residuals of a saved `run.csv`.
    Audit { run_file: PathBuf },
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Write per-iteration `trace_<trial>.csv` files.
    #[arg(long)]
    trace: bool,
    /// Comma-separated scheme tags.
    #[arg(long, value_delimiter = ',')]
    scheme: Vec<String>,
}

fn build_spec(args: &RunArgs, preset: &str, kind: Option<SweepKind>) -> Result<SweepSpec> {
    let mut spec = match &args.config {
        Some(path) => load(path)?,
        None => SweepSpec::preset(preset)?,
    };
    if let Some(kind) = kind {
        if spec.kind != kind {
            return Err(HarnessError::Config(format!(
                "this subcommand runs a {} sweep, the config asks for {}",
                kind.tag(),
                spec.kind.tag()
            )));
        }
    }
    if let Some(seed) = args.seed {
        spec.base.seed = seed;
    }
    if let Some(trials) = args.trials {
        spec.trials = trials;
    }
    if !args.scheme.is_empty() {
        spec.schemes = args.scheme.iter().map(|s| parse_scheme(s)).collect::<Result<_>>()?;
    }
    spec.validate()?;
    Ok(spec)
}

fn execute(spec: &SweepSpec, out: &Path, trace: bool) -> Result<ExitCode> {
    let outputs = run_sweep(spec)?;
    write_run(out, spec, &outputs, trace)?;
    let failed = outputs.iter().filter(|o| matches!(o.record.status, Status::Error(_))).count();
    let solved = outputs.iter().filter(|o| o.record.status.solved()).count();
    println!("{} records, {solved} solved, written to {}", outputs.len(), out.display());
    if failed > 0 {
        eprintln!("{failed} records ended in a solver error");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Wsinr(args) => {
            let mut spec = build_spec(&args, "wsinr_small", Some(SweepKind::Lambda))?;
            if args.scheme.is_empty() {
                spec.schemes = vec![Scheme::RisOptWsinr];
            }
            execute(&spec, &args.out, args.trace)
        }
        Command::Sumrate(args) => {
            let mut spec = build_spec(&args, "sumrate_paper", Some(SweepKind::Power))?;
            if args.scheme.is_empty() {
                spec.schemes = vec![Scheme::RisOptSumrate];
            }
            execute(&spec, &args.out, args.trace)
        }
        Command::Sweep(args) => {
            let spec = build_spec(&args, "wsinr_small", None)?;
            execute(&spec, &args.out, args.trace)
        }
        Command::Baseline(args) => {
            let mut spec = build_spec(&args, "wsinr_small", None)?;
            if args.scheme.is_empty() {
                spec.schemes = SweepSpec::default_schemes(spec.kind)
                    .into_iter()
                    .filter(|s| !matches!(s, Scheme::RisOptWsinr | Scheme::RisOptSumrate))
                    .collect();
            }
            execute(&spec, &args.out, args.trace)
        }
        Command::Audit { run_file } => {
            let rows = audit(&run_file)?;
            let failed: Vec<_> = rows.iter().filter(|r| !r.passed).collect();
            for r in &failed {
                println!(
                    "FAIL trial {} {} at {:e}: stationarity {:e}, constraint {:e}",
                    r.trial, r.scheme, r.value, r.stationarity, r.constraint_residual
                );
            }
            println!("audited {} records, {} failed", rows.len(), failed.len());
            Ok(if failed.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(3) })
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! Command-line harness: scenario ingestion and pipeline orchestration.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use elastodyn_core::scenario::{
    exit_code, run_homogenize, run_simulate, run_spectrum, run_sweep, Pipeline, RunReport,
    Scenario,
};

#[derive(Parser)]
#[command(
    name = "elastodyn",
    about = "Elastic wave scattering by dense clusters of resonant inclusions",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory for data files and the run report.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for assembly (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Override the Born truncation order of the scenario.
    #[arg(long)]
    born: Option<usize>,
    /// Override the dense-solver cell cap of the scenario.
    #[arg(long)]
    dense_limit: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the reference-shape spectrum and resonance data.
    Spectrum(CommonArgs),
    /// Solve one cluster scenario and emit far/scattered fields.
    Simulate(CommonArgs),
    /// Run the configured a-sweep and emit the slope table.
    Sweep(CommonArgs),
    /// Compare cluster far fields against the homogenized medium.
    Homogenize(CommonArgs),
}

fn apply_overrides(scenario: &mut Scenario, args: &CommonArgs) {
    if let Some(n) = args.born {
        scenario.run.born_order = n;
        scenario.run.mode = "born".into();
        if let Some(sweep) = scenario.sweep.as_mut() {
            sweep.born_order = n;
        }
    }
    if let Some(limit) = args.dense_limit {
        scenario.run.dense_limit = limit;
    }
}

fn execute(
    args: &CommonArgs,
    run: impl Fn(&Pipeline, &std::path::Path) -> elastodyn_core::Result<RunReport>,
) -> ExitCode {
    if args.threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(args.threads).build_global();
    }
    let mut scenario = match Scenario::from_path(&args.scenario) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("scenario error: {e}");
            return ExitCode::from(2);
        }
    };
    apply_overrides(&mut scenario, args);
    let pipeline = match Pipeline::prepare(scenario) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e) as u8);
        }
    };
    match run(&pipeline, &args.out) {
        Ok(report) => {
            println!("{}", serde_json::to_string_pretty(&report).unwrap());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Spectrum(args) => execute(args, run_spectrum),
        Command::Simulate(args) => execute(args, run_simulate),
        Command::Sweep(args) => execute(args, run_sweep),
        Command::Homogenize(args) => execute(args, run_homogenize),
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use levy_spde_lab::harness::{self, CurveFormat, ExperimentConfig, ExperimentReport, Status};
use levy_spde_lab::Result;

/// Monte Carlo verification of contraction, concentration and transport
/// bounds for stochastic reaction-diffusion equations with jumps.
#[derive(Parser)]
#[command(name = "levy-spde-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decay of the squared gap between synchronously coupled solutions.
    Contraction(RunArgs),
    /// Tails of time-averaged Lipschitz observables against the path bound.
    Concentration(RunArgs),
    /// Exponential-moment and block-tail certificates for the invariant law.
    Certificates(RunArgs),
    /// Strong error of Galerkin truncations under shared noise.
    Galerkin(RunArgs),
    /// Uniform-in-n moment bounds for the cubic model.
    Moments(RunArgs),
    /// Export rate-function curves.
    Rates(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides `run.seed` from the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for report.json and curve files.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (results do not depend on this).
    #[arg(long)]
    threads: Option<usize>,
    /// Curve file format.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

fn execute(command: &Command) -> Result<ExperimentReport> {
    let (args, run): (&RunArgs, fn(&ExperimentConfig) -> Result<ExperimentReport>) = match command {
        Command::Contraction(a) => (a, harness::run_contraction),
        Command::Concentration(a) => (a, harness::run_concentration),
        Command::Certificates(a) => (a, harness::run_transport_certificates),
        Command::Galerkin(a) => (a, harness::run_galerkin_convergence),
        Command::Moments(a) => (a, harness::run_moment_check),
        Command::Rates(a) => (a, harness::run_rates),
    };
    let mut cfg = ExperimentConfig::from_path(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.run.seed = seed;
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = args.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| levy_spde_lab::Error::Config(format!("thread pool: {e}")))?;
    let mut report = pool.install(|| run(&cfg))?;
    let format = match args.format {
        Format::Csv => CurveFormat::Csv,
        Format::Json => CurveFormat::Json,
    };
    harness::write_outputs(&mut report, &args.out, format)?;
    Ok(report)
}

fn show(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{v:.6e}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(report) => {
            for c in &report.checks {
                let tag = match c.status {
                    Status::Pass => "pass",
                    Status::Fail => "FAIL",
                    Status::Inconclusive => "inconclusive",
                    Status::Info => "info",
                };
                println!(
                    "[{tag}] {}: empirical {} ci {} bound {}",
                    c.name,
                    show(c.empirical),
                    show(c.ci_bound),
                    show(c.theoretical_bound)
                );
            }
            println!("{}: {:?} ({:.1} s)", report.experiment, report.status, report.runtime.seconds);
            ExitCode::from(report.status.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use volterra_core::experiment::{run_experiment, ExperimentConfig, ExperimentKind};

/// Experiment runners for stochastic Volterra equations with singular kernels.
#[derive(Parser, Debug)]
#[command(name = "volterra-sing", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Small-time CLT: Wasserstein distance against a.
    CltRate(RunArgs),
    /// Regularization order in ε.
    RegRate(RunArgs),
    /// Itô form against the direct scheme across grids.
    ItoEquiv(RunArgs),
    /// Moment and Hölder-ratio stability.
    Properties(RunArgs),
    /// Kernel admissibility and coefficient regularity.
    KernelAudit(RunArgs),
    /// Parse and validate a config without running it.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

const EXIT_VERDICT_FAILED: u8 = 1;
const EXIT_INPUT_ERROR: u8 = 2;

fn run(kind: ExperimentKind, args: RunArgs) -> Result<bool, String> {
    let mut config = ExperimentConfig::from_path(&args.config).map_err(|e| e.to_string())?;
    if config.experiment != kind {
        return Err(format!(
            "subcommand runs {kind} but {} describes {}",
            args.config.display(),
            config.experiment
        ));
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = args.out {
        config.output_dir = out;
    }
    if let Some(threads) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    let report = run_experiment(&config).map_err(|e| e.to_string())?;
    report
        .write_to_dir(&config.output_dir)
        .map_err(|e| e.to_string())?;
    for v in &report.verdicts {
        println!(
            "{:<4} {} (measured {}, threshold {})",
            if v.pass { "PASS" } else { "FAIL" },
            v.check,
            v.measured,
            v.threshold
        );
    }
    for note in &report.notes {
        println!("note: {note}");
    }
    println!("wrote {}", config.output_dir.display());
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::ValidateConfig { config } => {
            return match ExperimentConfig::from_path(&config).and_then(|c| {
                if c.experiment == ExperimentKind::KernelAudit {
                    c.validate()?;
                    c.kernel().map(|_| ())
                } else {
                    c.check().map(|_| ())
                }
            }) {
                Ok(()) => {
                    println!("{}: ok", config.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_INPUT_ERROR)
                }
            };
        }
        Command::CltRate(a) => (ExperimentKind::CltRate, a),
        Command::RegRate(a) => (ExperimentKind::RegularizationRate, a),
        Command::ItoEquiv(a) => (ExperimentKind::ItoEquivalence, a),
        Command::Properties(a) => (ExperimentKind::PropertySuite, a),
        Command::KernelAudit(a) => (ExperimentKind::KernelAudit, a),
    };
    match run(kind, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_VERDICT_FAILED),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INPUT_ERROR)
        }
    }
}

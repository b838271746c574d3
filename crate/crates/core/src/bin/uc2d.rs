use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use uc2d::lab::{run_experiment, ExperimentConfig, ExperimentKind};

/// Reduction pipeline and unique-continuation experiments.
#[derive(Parser)]
#[command(name = "uc2d", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Certify the reduction pipeline across resolutions.
    Pipeline(IoArgs),
    /// Contraction-norm scaling over a radii schedule.
    Contraction(IoArgs),
    /// Doubling ratios ‖u‖(2r)/‖u‖(r).
    Doubling(IoArgs),
    /// Three-spheres interpolation exponents.
    ThreeSpheres(IoArgs),
    /// Fitted vanishing order at x0.
    VanishingOrder(IoArgs),
}

#[derive(Args)]
struct IoArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `output` field.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, io) = match cli.command {
        Command::Pipeline(a) => (ExperimentKind::Pipeline, a),
        Command::Contraction(a) => (ExperimentKind::ContractionScaling, a),
        Command::Doubling(a) => (ExperimentKind::Doubling, a),
        Command::ThreeSpheres(a) => (ExperimentKind::ThreeSpheres, a),
        Command::VanishingOrder(a) => (ExperimentKind::VanishingOrder, a),
    };
    let config = match ExperimentConfig::read(&io.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("uc2d: invalid config {}: {e}", io.config.display());
            return ExitCode::from(1);
        }
    };
    let Some(out) = io.out.or_else(|| config.output.clone()) else {
        eprintln!("uc2d: no output directory (pass --out or set `output`)");
        return ExitCode::from(1);
    };
    let outputs = match run_experiment(kind, &config) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("uc2d: invalid config: {e}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = outputs.write(kind, &out) {
        eprintln!("uc2d: cannot write outputs to {}: {e}", out.display());
        return ExitCode::from(2);
    }
    if outputs.success {
        ExitCode::SUCCESS
    } else {
        eprintln!("uc2d: a stage failed; see {}", out.join("report.json").display());
        ExitCode::from(2)
    }
}

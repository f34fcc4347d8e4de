//! `dphase`: restoration runs, approximation sweeps, maximal-function
//! experiments and weight inspection from the command line.
//!
//! Exit codes: 0 on success, 1 on any error (unreadable input, invalid
//! configuration, violated hypothesis), 2 when a solver hit its iteration
//! cap (outputs are still written from the best iterate).

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Context, Status};
use config::{
    DenoiseSection, FileConfig, GammaSection, ImageKind, MaximalSection, OutputSection, Overlay,
    SolveSection, SynthSection, WeightCmdSection, WeightSection,
};
use error::Result;

#[derive(Debug, Parser)]
#[command(name = "dphase", version, about = "Double phase BV image restoration toolkit")]
struct Cli {
    /// TOML file with a section per command; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for synthetic images, noise and random initializations.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run even when a hypothesis of the theory is violated.
    #[arg(long = "override", global = true)]
    allow_override: bool,
    /// Image format of written images.
    #[arg(long, global = true, value_enum)]
    format: Option<ImageKind>,
    /// Bit depth of written images: 8 or 16.
    #[arg(long, global = true)]
    bit_depth: Option<u8>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Restore an image with the rof, double_phase or i_eps model.
    Denoise {
        #[command(flatten)]
        run: DenoiseSection,
        #[command(flatten)]
        weight: WeightSection,
        #[command(flatten)]
        solve: SolveSection,
    },
    /// Sweep ε and check the approximation of the limit energy.
    GammaSweep {
        #[command(flatten)]
        run: GammaSection,
        #[command(flatten)]
        weight: WeightSection,
        #[command(flatten)]
        solve: SolveSection,
    },
    /// Integrability of the capped fractional maximal function.
    Maximal {
        #[command(flatten)]
        run: MaximalSection,
    },
    /// Write a synthetic test image.
    Synth {
        #[command(flatten)]
        run: SynthSection,
    },
    /// Estimate an edge-adaptive weight and report its properties.
    Weight {
        #[command(flatten)]
        run: WeightCmdSection,
        #[command(flatten)]
        weight: WeightSection,
    },
}

fn run(cli: Cli) -> Result<Status> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let mut ctx = Context {
        seed: cli.seed.or(file.seed).unwrap_or(0),
        allow_override: cli.allow_override,
        output: OutputSection { format: cli.format, bit_depth: cli.bit_depth }.overlay(file.output),
        solve: file.solve,
        weight: file.weight,
    };
    match cli.command {
        Command::Denoise { run, weight, solve } => {
            ctx.weight = weight.overlay(ctx.weight);
            ctx.solve = solve.overlay(ctx.solve);
            commands::denoise::run(&ctx, &run.overlay(file.denoise))
        }
        Command::GammaSweep { run, weight, solve } => {
            ctx.weight = weight.overlay(ctx.weight);
            ctx.solve = solve.overlay(ctx.solve);
            commands::gamma::run(&ctx, &run.overlay(file.gamma))
        }
        Command::Maximal { run } => commands::maximal::run(&ctx, &run.overlay(file.maximal)),
        Command::Synth { run } => commands::synth::run(&ctx, &run.overlay(file.synth)),
        Command::Weight { run, weight } => {
            ctx.weight = weight.overlay(ctx.weight);
            commands::weight::run(&ctx, &run.overlay(file.weight_cmd))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are configuration errors; help and version succeed
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(Status::Done) => ExitCode::SUCCESS,
        Ok(Status::NotConverged) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

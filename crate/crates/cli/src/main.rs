use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use pfrecon::experiment::{self, RunContext};
use pfrecon::{parse_config, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(name = "pfrecon", version, about = "Phase-field reconstruction of insulating defects from Cauchy data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// Experiment description (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides PFRECON_OUT and the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the data seed of the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate noisy Cauchy datasets for every electrode pair.
    Generate(Common),
    /// Reconstruct the phase field from the generated datasets.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// Suppress progress output.
        #[arg(long)]
        quiet: bool,
    },
    /// Compare the adjoint gradient with state sensitivities and finite differences.
    Gradcheck(Common),
    /// Convert a phase CSV into a PGM image.
    Render {
        /// Phase field CSV.
        phase: PathBuf,
        /// Target file or directory (default: next to the CSV).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(common: &Common) -> Result<(ExperimentConfig, RunContext)> {
    let text = std::fs::read_to_string(&common.config)
        .with_context(|| format!("reading {}", common.config.display()))?;
    let config = parse_config(&text)?;
    let env_out = std::env::var_os("PFRECON_OUT").map(PathBuf::from);
    let ctx = RunContext::resolve(&config, common.out.clone(), env_out, common.seed);
    Ok((config, ctx))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Generate(common) => {
            let (config, ctx) = load(&common)?;
            for path in experiment::generate(&config, &ctx)? {
                println!("{}", path.display());
            }
            Ok(true)
        }
        Command::Reconstruct { common, quiet } => {
            let (config, ctx) = load(&common)?;
            let out = experiment::reconstruct(&config, &ctx, !quiet)?;
            let cost = out.stage_costs.last().map(|c| c.1.total()).unwrap_or(0.0);
            println!("{} iterations, final cost {cost:e}", out.history.len());
            println!("{}", ctx.out.join("recon").display());
            Ok(true)
        }
        Command::Gradcheck(common) => {
            let (config, ctx) = load(&common)?;
            let r = experiment::gradcheck(&config, &ctx)?;
            let mark = |ok: bool| if ok { "pass" } else { "FAIL" };
            let adj_ok = r.adjoint_vs_sensitivity <= experiment::ADJOINT_TOLERANCE;
            println!("eps = {:e}", r.eps);
            println!(
                "adjoint vs sensitivity: max relative gap {:.3e} (tolerance {:e}) {}",
                r.adjoint_vs_sensitivity,
                experiment::ADJOINT_TOLERANCE,
                mark(adj_ok)
            );
            for (k, e) in r.fd_errors.iter().enumerate() {
                println!(
                    "finite differences, direction {k}: relative error {e:.3e} (tolerance {:e}) {}",
                    experiment::FD_TOLERANCE,
                    mark(*e <= experiment::FD_TOLERANCE)
                );
            }
            for (h, e) in &r.h_sweep {
                println!("h = {h:e}: relative error {e:.3e}");
            }
            Ok(r.passed())
        }
        Command::Render { phase, out } => {
            let path = experiment::render(&phase, out.as_deref())?;
            println!("{}", path.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: gradient check exceeded its tolerance");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

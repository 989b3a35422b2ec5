//! The four verbs. Each one is a plain function so tests can drive them
//! without spawning the binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use pfrecon_core::datagen::{
    add_noise, build_fine_model, simulate_measurement, CauchyDataset, NoiseSpec, PairFlux,
};
use pfrecon_core::fem::{FemSpace, Gamma, SolverOptions};
use pfrecon_core::reconstruction::{
    boundary_mask, run_reconstruction, CostBreakdown, DiscreteDataset, PhaseField, ReconOutcome, ReconProblem,
};

use crate::config::ExperimentConfig;
use crate::io;

/// Where and with which seed a verb runs.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub out: PathBuf,
    pub seed: u64,
}

impl RunContext {
    /// `--out` beats `PFRECON_OUT`, which beats the config; `--seed` beats
    /// the config seed.
    pub fn resolve(config: &ExperimentConfig, out: Option<PathBuf>, env_out: Option<PathBuf>, seed: Option<u64>) -> Self {
        RunContext {
            out: out.or(env_out).unwrap_or_else(|| config.output_dir.clone()),
            seed: seed.unwrap_or(config.data.seed),
        }
    }
}

fn cost_json(c: &CostBreakdown) -> serde_json::Value {
    json!({
        "total": c.total(),
        "fidelity": c.fidelity,
        "dirichlet": c.dirichlet,
        "well": c.well,
        "gradient_term": c.gradient_term,
    })
}

fn write_manifest(path: &Path, mut value: serde_json::Value, started: Instant) -> Result<()> {
    value["wall_clock_seconds"] = json!(started.elapsed().as_secs_f64());
    let text = serde_json::to_string_pretty(&value)? + "\n";
    io::write_atomic(path, &text)?;
    Ok(())
}

/// Noisy synthetic datasets for every configured electrode pair.
pub fn generate_datasets(config: &ExperimentConfig, seed: u64) -> Result<Vec<CauchyDataset>> {
    let d = &config.data;
    let coarse = config.grid.build();
    let model = build_fine_model(&d.defects, &coarse, d.refine, d.eta, seed).context("building the fine model")?;
    d.pairs
        .par_iter()
        .enumerate()
        .map(|(k, &pair)| {
            let flux = PairFlux::new(model.grid(), pair, d.electrode_width, d.amplitude, d.profile)?;
            let clean = simulate_measurement(&model, &flux, config.gamma, d.measurement_points, &config.recon.solver)
                .with_context(|| format!("simulating electrode pair {pair}"))?;
            let noise = NoiseSpec::new(d.noise_f, d.noise_g, seed ^ k as u64)?;
            Ok(add_noise(&clean, &noise)?)
        })
        .collect()
}

fn dataset_name(k: usize, ds: &CauchyDataset) -> String {
    format!("dataset_{k}_{}.csv", ds.pair())
}

pub fn generate(config: &ExperimentConfig, ctx: &RunContext) -> Result<Vec<PathBuf>> {
    let started = Instant::now();
    let datasets = generate_datasets(config, ctx.seed)?;
    let dir = ctx.out.join("data");
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    for old in dataset_files(&dir)? {
        fs::remove_file(&old).with_context(|| format!("removing stale {}", old.display()))?;
    }
    let mut paths = Vec::new();
    for (k, ds) in datasets.iter().enumerate() {
        let path = dir.join(dataset_name(k, ds));
        io::write_dataset(ds, &path)?;
        paths.push(path);
    }
    let files: Vec<String> = datasets.iter().enumerate().map(|(k, ds)| dataset_name(k, ds)).collect();
    write_manifest(
        &dir.join("manifest.json"),
        json!({
            "verb": "generate",
            "config_hash": config.hash,
            "seed": ctx.seed,
            "noise_seeds": (0..datasets.len()).map(|k| ctx.seed ^ k as u64).collect::<Vec<_>>(),
            "noise_levels": { "f": config.data.noise_f, "g": config.data.noise_g, "normalization": "relative rms" },
            "fine_refine": config.data.refine,
            "eta": config.data.eta,
            "datasets": files,
        }),
        started,
    )?;
    Ok(paths)
}

/// Dataset files in `dir`, ordered by their index.
pub fn dataset_files(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut found: Vec<(usize, PathBuf)> = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if let Some(rest) = name.strip_prefix("dataset_").and_then(|r| r.strip_suffix(".csv")) {
            if let Some(k) = rest.split('_').next().and_then(|k| k.parse().ok()) {
                found.push((k, path));
            }
        }
    }
    found.sort();
    Ok(found.into_iter().map(|(_, p)| p).collect())
}

/// The inversion problem on the coarse grid for the given datasets.
pub fn build_problem(config: &ExperimentConfig, datasets: &[CauchyDataset], solver: SolverOptions) -> Result<ReconProblem> {
    let grid = config.grid.build();
    let space = FemSpace::new(grid.clone());
    let gamma = Gamma::new(&grid, config.gamma)?;
    let discrete = datasets
        .iter()
        .map(|ds| DiscreteDataset::from_cauchy(&space, &gamma, ds))
        .collect::<pfrecon_core::Result<Vec<_>>>()?;
    Ok(ReconProblem::new(space, gamma, discrete, solver)?)
}

pub fn initial_phase(config: &ExperimentConfig) -> Result<PhaseField> {
    let grid = config.grid.build();
    Ok(PhaseField::constant(&grid, config.initial, boundary_mask(&grid))?)
}

/// Runs the reconstruction on datasets in memory, logging progress to
/// stderr when `verbose`.
pub fn reconstruct_datasets(config: &ExperimentConfig, datasets: &[CauchyDataset], verbose: bool) -> Result<ReconOutcome> {
    let problem = build_problem(config, datasets, config.recon.solver)?;
    let initial = initial_phase(config)?;
    let outcome = run_reconstruction(&problem, &config.recon, &initial, |r| {
        if verbose && (r.iteration == 1 || r.iteration % 50 == 0) {
            eprintln!(
                "iteration {:>5}  eps {:.3e}  cost {:.6e}  step {:.3e}  reductions {}",
                r.iteration,
                r.eps,
                r.cost.total(),
                r.step,
                r.reductions
            );
        }
    })?;
    Ok(outcome)
}

pub fn reconstruct(config: &ExperimentConfig, ctx: &RunContext, verbose: bool) -> Result<ReconOutcome> {
    let started = Instant::now();
    let files = dataset_files(&ctx.out.join("data"))?;
    if files.is_empty() {
        bail!("no dataset files in {}; run `generate` first", ctx.out.join("data").display());
    }
    let datasets = files.iter().map(|p| io::read_dataset(p)).collect::<Result<Vec<_>, _>>()?;
    let outcome = reconstruct_datasets(config, &datasets, verbose)?;

    let grid = config.grid.build();
    let dir = ctx.out.join("recon");
    for (k, phase) in outcome.stage_phases.iter().enumerate() {
        io::write_phase_field(&grid, phase, &dir, &format!("phase_stage{k}"))?;
    }
    io::write_phase_field(&grid, &outcome.phase, &dir, "phase_final")?;
    io::write_atomic(&dir.join("history.csv"), &io::history_csv(&outcome.history))?;
    let final_cost = outcome.stage_costs.last().map(|c| c.1).unwrap_or_default();
    write_manifest(
        &dir.join("manifest.json"),
        json!({
            "verb": "reconstruct",
            "config_hash": config.hash,
            "seed": ctx.seed,
            "datasets": files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect::<Vec<_>>(),
            "stages": config.recon.schedule.iter().zip(&outcome.stage_iterations).zip(&outcome.stage_costs)
                .map(|((s, n), (start, end))| json!({
                    "eps": s.eps,
                    "budget": s.iterations,
                    "iterations": n,
                    "initial_cost": cost_json(start),
                    "final_cost": cost_json(end),
                }))
                .collect::<Vec<_>>(),
            "final_cost": cost_json(&final_cost),
        }),
        started,
    )?;
    Ok(outcome)
}

/// Tolerances of the gradient check.
pub const ADJOINT_TOLERANCE: f64 = 1e-8;
pub const FD_TOLERANCE: f64 = 1e-4;
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct GradcheckReport {
    pub eps: f64,
    /// Largest per-node relative gap between the adjoint gradient and the
    /// state-sensitivity derivative.
    pub adjoint_vs_sensitivity: f64,
    /// Relative gap to central differences per random direction.
    pub fd_errors: Vec<f64>,
    /// `(h, relative error)` along one direction.
    pub h_sweep: Vec<(f64, f64)>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.adjoint_vs_sensitivity <= ADJOINT_TOLERANCE && self.fd_errors.iter().all(|&e| e <= FD_TOLERANCE)
    }
}

/// Compares the adjoint gradient against the state-sensitivity route on
/// every free node and against central differences along random
/// directions, at a random phase with `ṽ ∈ (0.2, 0.8)`.
pub fn gradient_check(
    problem: &ReconProblem,
    config: &ExperimentConfig,
    eps: f64,
    seed: u64,
    directions: usize,
) -> Result<GradcheckReport> {
    let grid = problem.space().grid();
    let mask = boundary_mask(grid);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tv = mask.iter().map(|&m| if m { 0.0 } else { rng.random_range(0.2..0.8) }).collect();
    let phase = PhaseField::new(grid, tv, mask.clone())?;
    let f = config.recon.functional(eps)?;
    let (_, mut pack) = problem.reduced_cost(&phase, &f)?;
    problem.solve_adjoints(&mut pack, &f)?;
    let g = problem.assemble_gradient(&phase, &f, &pack)?;
    let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let free: Vec<usize> = (0..grid.node_count()).filter(|&j| !mask[j]).collect();
    let gaps = free
        .par_iter()
        .map(|&j| {
            let mut e = vec![0.0; grid.node_count()];
            e[j] = 1.0;
            let du = problem.directional_derivative(&phase, &f, &pack, &e)?;
            Ok((du - g[j]).abs() / g[j].abs().max(1e-3 * scale))
        })
        .collect::<pfrecon_core::Result<Vec<f64>>>()?;
    let adjoint_vs_sensitivity = gaps.into_iter().fold(0.0, f64::max);

    let shifted = |d: &[f64], h: f64| -> pfrecon_core::Result<f64> {
        let tv = phase.tilde_v().iter().zip(d).map(|(v, x)| v + h * x).collect();
        let p = PhaseField::unconstrained(grid, tv, mask.clone())?;
        Ok(problem.reduced_cost(&p, &f)?.0.total())
    };
    let direction = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        mask.iter().map(|&m| if m { 0.0 } else { rng.random_range(-1.0..1.0) }).collect()
    };
    let fd_error = |d: &[f64], h: f64| -> pfrecon_core::Result<f64> {
        let fd = (shifted(d, h)? - shifted(d, -h)?) / (2.0 * h);
        let ad: f64 = g.iter().zip(d).map(|(a, b)| a * b).sum();
        Ok((fd - ad).abs() / ad.abs())
    };
    let mut fd_errors = Vec::new();
    let mut first = None;
    for _ in 0..directions {
        let d = direction(&mut rng);
        fd_errors.push(fd_error(&d, FD_STEP)?);
        first.get_or_insert(d);
    }
    let mut h_sweep = Vec::new();
    if let Some(d) = first {
        for h in [1e-3, 1e-4, 1e-5, 1e-6, 1e-7] {
            h_sweep.push((h, fd_error(&d, h)?));
        }
    }
    Ok(GradcheckReport { eps, adjoint_vs_sensitivity, fd_errors, h_sweep })
}

/// CG tolerance for the gradient check; the adjoint and sensitivity routes
/// only agree up to the solver residual.
pub const GRADCHECK_SOLVER: SolverOptions = SolverOptions { tolerance: 1e-14, max_iter_factor: 50 };

pub fn gradcheck(config: &ExperimentConfig, ctx: &RunContext) -> Result<GradcheckReport> {
    let started = Instant::now();
    let datasets = generate_datasets(config, ctx.seed)?;
    let problem = build_problem(config, &datasets, GRADCHECK_SOLVER)?;
    let eps = config.recon.schedule[0].eps;
    let report = gradient_check(&problem, config, eps, ctx.seed, 10)?;
    write_manifest(
        &ctx.out.join("gradcheck").join("report.json"),
        json!({
            "verb": "gradcheck",
            "config_hash": config.hash,
            "seed": ctx.seed,
            "eps": eps,
            "solver_tolerance": GRADCHECK_SOLVER.tolerance,
            "adjoint_vs_sensitivity": report.adjoint_vs_sensitivity,
            "adjoint_tolerance": ADJOINT_TOLERANCE,
            "fd_step": FD_STEP,
            "fd_errors": report.fd_errors,
            "fd_tolerance": FD_TOLERANCE,
            "h_sweep": report.h_sweep,
            "passed": report.passed(),
        }),
        started,
    )?;
    Ok(report)
}

/// Converts a phase CSV into a PGM; returns the written path.
pub fn render(csv: &Path, out: Option<&Path>) -> Result<PathBuf> {
    let rows = io::read_phase_csv(csv)?;
    let target = match out {
        Some(p) if p.is_dir() => p.join(csv.with_extension("pgm").file_name().context("phase file name")?),
        Some(p) => p.to_path_buf(),
        None => csv.with_extension("pgm"),
    };
    io::write_atomic(&target, &io::pgm(&rows))?;
    Ok(target)
}

//! Experiment configuration: one TOML document drives data generation and
//! reconstruction.

use std::path::PathBuf;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use pfrecon_core::datagen::{DefectSpec, ElectrodePair, ProfileShape};
use pfrecon_core::fem::SolverOptions;
use pfrecon_core::grid::{Grid, Side, SideSet};
use pfrecon_core::potentials::PotentialKind;
use pfrecon_core::reconstruction::{geometric_schedule, ArmijoParams, ReconParams};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config syntax: {0}")]
    Syntax(String),
    #[error("config key `{key}`: {message}")]
    Domain { key: String, message: String },
}

fn domain(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Domain { key: key.to_string(), message: message.into() }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    grid: RawGrid,
    #[serde(default)]
    params: RawParams,
    data: RawData,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    nx: usize,
    ny: usize,
    #[serde(default = "one")]
    width: f64,
    #[serde(default = "one")]
    height: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    potential: Option<String>,
    a: Option<f64>,
    b: Option<f64>,
    c: Option<f64>,
    q1: Option<f64>,
    riesz_alpha: Option<f64>,
    gamma: Option<Vec<String>>,
    initial: Option<f64>,
    #[serde(default)]
    schedule: RawSchedule,
    #[serde(default)]
    armijo: RawArmijo,
    #[serde(default)]
    solver: RawSolver,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    eps_start: Option<f64>,
    eps_end: Option<f64>,
    stages: Option<usize>,
    iterations: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArmijo {
    initial_step: Option<f64>,
    backtrack: Option<f64>,
    sigma: Option<f64>,
    max_reductions: Option<usize>,
    growth: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    tolerance: Option<f64>,
    max_iter_factor: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawData {
    refine: Option<usize>,
    eta: Option<f64>,
    measurement_points: Option<usize>,
    profile: Option<String>,
    electrode_width: Option<f64>,
    amplitude: Option<f64>,
    pairs: Vec<[String; 2]>,
    seed: Option<u64>,
    #[serde(default)]
    noise: RawNoise,
    #[serde(default)]
    cracks: Vec<Vec<[f64; 2]>>,
    #[serde(default)]
    cavities: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoise {
    f: Option<f64>,
    g: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub width: f64,
    pub height: f64,
}

impl GridConfig {
    pub fn build(&self) -> Grid {
        Grid::new(self.nx, self.ny, self.width, self.height).expect("validated grid")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub refine: usize,
    pub eta: f64,
    pub measurement_points: usize,
    pub profile: ProfileShape,
    /// Electrode support as a fraction of the side length.
    pub electrode_width: f64,
    pub amplitude: f64,
    pub pairs: Vec<ElectrodePair>,
    pub seed: u64,
    /// Relative RMS noise on the flux.
    pub noise_f: f64,
    /// Relative RMS noise on the trace.
    pub noise_g: f64,
    pub defects: DefectSpec,
}

/// Fully validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    pub recon: ReconParams,
    pub gamma: SideSet,
    /// `ṽ` on the free nodes at the start.
    pub initial: f64,
    pub data: DataConfig,
    pub output_dir: PathBuf,
    /// SHA-256 of the source text, hex encoded.
    pub hash: String,
}

fn positive(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(domain(key, format!("must be positive, got {v}")))
    }
}

fn side(key: &str, s: &str) -> Result<Side, ConfigError> {
    s.parse().map_err(|_| domain(key, format!("unknown side '{s}'")))
}

/// Parses and validates a TOML experiment description, filling documented
/// defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;

    let g = &raw.grid;
    if g.nx == 0 || g.ny == 0 {
        return Err(domain("grid.nx", "grid needs at least one cell per direction"));
    }
    positive("grid.width", g.width)?;
    positive("grid.height", g.height)?;
    let grid = GridConfig { nx: g.nx, ny: g.ny, width: g.width, height: g.height };
    let diameter = grid.build().diameter();

    let p = &raw.params;
    let potential: PotentialKind = match &p.potential {
        None => PotentialKind::SingleWell,
        Some(s) => s.parse().map_err(|_| domain("params.potential", format!("unknown potential '{s}'")))?,
    };
    let mut recon = ReconParams::defaults(potential, diameter);
    if let Some(v) = p.a {
        recon.a = positive("params.a", v)?;
    }
    if let Some(v) = p.b {
        recon.b = positive("params.b", v)?;
    }
    if let Some(v) = p.c {
        recon.c = positive("params.c", v)?;
    }
    if let Some(v) = p.q1 {
        if !(v > 0.0 && v < 0.5) {
            return Err(domain("params.q1", format!("must lie in (0, 1/2), got {v}")));
        }
        recon.q1 = v;
    }
    if let Some(v) = p.riesz_alpha {
        recon.riesz_alpha = positive("params.riesz_alpha", v)?;
    }

    let defaults = &recon.schedule;
    let eps_start = p.schedule.eps_start.unwrap_or(defaults[0].eps);
    let eps_end = p.schedule.eps_end.unwrap_or(defaults[defaults.len() - 1].eps);
    let stages = p.schedule.stages.unwrap_or(defaults.len());
    let iterations = p.schedule.iterations.unwrap_or(defaults.iter().map(|s| s.iterations).sum());
    for (key, v) in [("params.schedule.eps_start", eps_start), ("params.schedule.eps_end", eps_end)] {
        if !(v > 0.0 && v <= 0.5) {
            return Err(domain(key, format!("must lie in (0, 1/2], got {v}")));
        }
    }
    if stages == 0 {
        return Err(domain("params.schedule.stages", "must be at least 1"));
    }
    if stages > 1 && eps_end >= eps_start {
        return Err(domain("params.schedule.eps_end", "must be smaller than eps_start"));
    }
    recon.schedule = geometric_schedule(eps_start, eps_end, stages, iterations);

    let a = &p.armijo;
    let d = ArmijoParams::default();
    recon.armijo = ArmijoParams {
        initial_step: a.initial_step.unwrap_or(d.initial_step),
        backtrack: a.backtrack.unwrap_or(d.backtrack),
        sigma: a.sigma.unwrap_or(d.sigma),
        max_reductions: a.max_reductions.unwrap_or(d.max_reductions),
        growth: a.growth.unwrap_or(d.growth),
    };
    recon.armijo.validate().map_err(|e| domain("params.armijo", e.to_string()))?;

    let s = SolverOptions::default();
    recon.solver = SolverOptions {
        tolerance: p.solver.tolerance.unwrap_or(s.tolerance),
        max_iter_factor: p.solver.max_iter_factor.unwrap_or(s.max_iter_factor),
    };
    if !(recon.solver.tolerance > 0.0 && recon.solver.tolerance < 1.0) {
        return Err(domain("params.solver.tolerance", "must lie in (0, 1)"));
    }
    if recon.solver.max_iter_factor == 0 {
        return Err(domain("params.solver.max_iter_factor", "must be at least 1"));
    }
    recon.validate().map_err(|e| domain("params", e.to_string()))?;

    let gamma = match &p.gamma {
        None => SideSet::ALL,
        Some(list) => {
            let mut set = SideSet::EMPTY;
            for s in list {
                set.insert(side("params.gamma", s)?);
            }
            if set.is_empty() {
                return Err(domain("params.gamma", "must name at least one side"));
            }
            set
        }
    };
    let initial = p.initial.unwrap_or(0.5);
    if !(initial > 0.0 && initial <= 1.0) {
        return Err(domain("params.initial", format!("must lie in (0, 1], got {initial}")));
    }

    let r = &raw.data;
    let refine = r.refine.unwrap_or(4);
    if refine < 4 {
        return Err(domain("data.refine", format!("must be at least 4, got {refine}")));
    }
    let eta = r.eta.unwrap_or(1e-8);
    if !(eta > 0.0 && eta <= 1e-4) {
        return Err(domain("data.eta", format!("must lie in (0, 1e-4], got {eta}")));
    }
    let measurement_points = r.measurement_points.unwrap_or(64);
    if measurement_points < 2 {
        return Err(domain("data.measurement_points", "must be at least 2"));
    }
    let profile = match &r.profile {
        None => ProfileShape::Plus,
        Some(s) => s.parse().map_err(|_| domain("data.profile", format!("unknown profile '{s}'")))?,
    };
    let electrode_width = r.electrode_width.unwrap_or(0.25);
    if !(electrode_width > 0.0 && electrode_width <= 1.0) {
        return Err(domain("data.electrode_width", format!("must lie in (0, 1], got {electrode_width}")));
    }
    let amplitude = positive("data.amplitude", r.amplitude.unwrap_or(1.0))?;
    if r.pairs.is_empty() {
        return Err(domain("data.pairs", "at least one electrode pair is required"));
    }
    let mut pairs = Vec::new();
    for [pos, neg] in &r.pairs {
        let pair = ElectrodePair::new(side("data.pairs", pos)?, side("data.pairs", neg)?)
            .map_err(|e| domain("data.pairs", e.to_string()))?;
        if !gamma.contains(pair.positive) || !gamma.contains(pair.negative) {
            return Err(domain("data.pairs", format!("pair {pair} is not supported on γ = {gamma}")));
        }
        pairs.push(pair);
    }
    let noise_f = r.noise.f.unwrap_or(0.0);
    let noise_g = r.noise.g.unwrap_or(0.0);
    for (key, v) in [("data.noise.f", noise_f), ("data.noise.g", noise_g)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(domain(key, format!("must be nonnegative, got {v}")));
        }
    }
    let defects = DefectSpec { cracks: r.cracks.clone(), cavities: r.cavities.clone() };
    defects
        .validate(grid.width, grid.height)
        .map_err(|e| domain("data", e.to_string()))?;

    let data = DataConfig {
        refine,
        eta,
        measurement_points,
        profile,
        electrode_width,
        amplitude,
        pairs,
        seed: r.seed.unwrap_or(0),
        noise_f,
        noise_g,
        defects,
    };
    let hash = Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
    Ok(ExperimentConfig {
        grid,
        recon,
        gamma,
        initial,
        data,
        output_dir: raw.output.dir.clone().unwrap_or_else(|| PathBuf::from("out")),
        hash,
    })
}

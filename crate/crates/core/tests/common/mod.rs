#![allow(dead_code)]

use pfrecon_core::fem::{EdgeFlux, FemSpace, Gamma, SolverOptions};
use pfrecon_core::grid::{Grid, Side, SideSet};
use pfrecon_core::potentials::PotentialKind;
use pfrecon_core::reconstruction::{boundary_mask, DiscreteDataset, Functional, PhaseField, ReconParams, ReconProblem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two datasets with smooth fluxes and traces that do not come from any
/// phase, so every term of the functional is active.
pub fn problem(n: usize, solver: SolverOptions) -> ReconProblem {
    let grid = Grid::new(n, n, 1.0, 1.0).unwrap();
    let space = FemSpace::new(grid.clone());
    let gamma = Gamma::new(&grid, SideSet::ALL).unwrap();
    let fluxes: [fn(Side, [f64; 2]) -> f64; 2] = [
        |s, p| match s {
            Side::Left => -1.0 - p[1],
            Side::Right => 1.0 + p[1],
            _ => 0.0,
        },
        |s, p| match s {
            Side::Bottom => -(3.0 * p[0]).cos(),
            Side::Top => 0.5 + p[0],
            _ => 0.0,
        },
    ];
    let targets: [fn([f64; 2]) -> f64; 2] = [|p| 0.8 * p[0] + 0.1 * (5.0 * p[1]).sin(), |p| p[1] * p[1] - 0.3 * p[0]];
    let datasets = fluxes
        .iter()
        .zip(targets)
        .map(|(f, g)| {
            let flux = EdgeFlux::from_fn(&grid, f);
            let values = gamma.nodes().iter().map(|&k| g(grid.nodes()[k])).collect();
            DiscreteDataset::new(&space, &gamma, flux, gamma.trace_from_values(values).unwrap()).unwrap()
        })
        .collect();
    ReconProblem::new(space, gamma, datasets, solver).unwrap()
}

pub fn functional(kind: PotentialKind, eps: f64) -> Functional {
    let mut p = ReconParams::defaults(kind, 2f64.sqrt());
    p.a = 1.3;
    p.b = 0.7;
    p.c = 0.4;
    p.functional(eps).unwrap()
}

pub fn random_phase(grid: &Grid, seed: u64, lo: f64, hi: f64) -> PhaseField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mask = boundary_mask(grid);
    let tv = mask.iter().map(|&m| if m { 0.0 } else { rng.random_range(lo..hi) }).collect();
    PhaseField::new(grid, tv, mask).unwrap()
}

pub fn random_direction(grid: &Grid, mask: &[bool], seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..grid.node_count()).map(|n| if mask[n] { 0.0 } else { rng.random_range(-1.0..1.0) }).collect()
}

pub fn tight() -> SolverOptions {
    SolverOptions { tolerance: 1e-14, max_iter_factor: 50 }
}

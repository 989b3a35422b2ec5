use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CauchyDataset, DefectSpec, NoiseSpec, PairFlux, SideSamples};
use crate::datagen::interpolate_linear;
use crate::error::{invalid, Result};
use crate::fem::{BoundaryProfile, FemSpace, Gamma, SolverOptions};
use crate::grid::{CellField, Grid, SideSet};

/// Jittered fine mesh carrying the defect conductivity.
#[derive(Debug, Clone)]
pub struct FineModel {
    space: FemSpace,
    conductivity: CellField,
    eta: f64,
}

impl FineModel {
    pub fn space(&self) -> &FemSpace {
        &self.space
    }

    pub fn grid(&self) -> &Grid {
        self.space.grid()
    }

    /// 1 in the conductor, `eta` in defect cells.
    pub fn conductivity(&self) -> &CellField {
        &self.conductivity
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Total area of the defect cells.
    pub fn defect_area(&self) -> f64 {
        (0..self.grid().cell_count())
            .filter(|&c| self.conductivity[c] != 1.0)
            .map(|c| self.grid().cell_area(c))
            .sum()
    }
}

/// Refines `coarse` by `refine`, jitters interior nodes uniformly within a
/// disk of radius a quarter of the fine spacing, and marks defect cells.
pub fn build_fine_model(spec: &DefectSpec, coarse: &Grid, refine: usize, eta: f64, seed: u64) -> Result<FineModel> {
    if refine < 4 {
        return Err(invalid(format!("refinement factor must be at least 4, got {refine}")));
    }
    if !(eta > 0.0 && eta <= 1e-4) {
        return Err(invalid(format!("defect conductivity must lie in (0, 1e-4], got {eta}")));
    }
    spec.validate(coarse.width(), coarse.height())?;
    let regular = Grid::new(coarse.nx() * refine, coarse.ny() * refine, coarse.width(), coarse.height())?;
    let (hx, hy) = regular.spacing();
    let radius = 0.25 * hx.min(hy);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fine = regular.displace_interior(|_| {
        let r = radius * rng.random::<f64>().sqrt();
        let theta = std::f64::consts::TAU * rng.random::<f64>();
        [r * theta.cos(), r * theta.sin()]
    })?;
    let conductivity: Vec<f64> = fine
        .cells()
        .iter()
        .map(|cell| {
            let t = cell.map(|n| fine.nodes()[n]);
            if spec.marks_triangle(t) {
                eta
            } else {
                1.0
            }
        })
        .collect();
    let conductivity = CellField::new(&fine, conductivity)?;
    Ok(FineModel { space: FemSpace::new(fine), conductivity, eta })
}

/// Forward solve for one electrode pair on the fine mesh, sampled at
/// `points` equispaced measurement points per γ side (ends included).
pub fn simulate_measurement(
    model: &FineModel,
    flux: &PairFlux,
    gamma: SideSet,
    points: usize,
    solver: &SolverOptions,
) -> Result<CauchyDataset> {
    if points < 2 {
        return Err(invalid("at least 2 measurement points per side are required"));
    }
    let pair = flux.pair();
    if !gamma.contains(pair.positive) || !gamma.contains(pair.negative) {
        return Err(invalid(format!("electrode pair {pair} is not supported on γ = {gamma}")));
    }
    let space = &model.space;
    let grid = space.grid();
    let load = space.assemble_profile_load(flux);
    let op = space.assemble_stiffness(&model.conductivity)?;
    let fine_gamma = Gamma::new(grid, gamma)?;
    let (u, _) = space.solve_gauged_neumann(&op, &load, &fine_gamma, solver, None)?;

    let mut samples = Vec::new();
    for side in gamma.sides() {
        let nodes = grid.side_nodes(side);
        let xs: Vec<f64> = nodes.iter().map(|&n| grid.side_coordinate(side, grid.nodes()[n])).collect();
        let ys: Vec<f64> = nodes.iter().map(|&n| u[n]).collect();
        let len = grid.side_length(side);
        let coords: Vec<f64> = (0..points).map(|k| len * k as f64 / (points - 1) as f64).collect();
        let trace = coords.iter().map(|&s| interpolate_linear(&xs, &ys, s)).collect();
        let values = coords.iter().map(|&s| flux.value(side, s)).collect();
        samples.push(SideSamples { side, coords, flux: values, trace });
    }
    let mut ds = CauchyDataset::new(pair, samples, NoiseSpec::none())?;
    ds.recenter_trace();
    ds.rebalance_flux();
    Ok(ds)
}

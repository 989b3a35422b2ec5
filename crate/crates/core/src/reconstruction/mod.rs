//! The gradient method on the reduced phase-field functional: state and
//! adjoint solves, cost and gradient assembly, Riesz lifting, the projected
//! Armijo step and the ε-continuation driver.

mod params;
mod problem;
mod solver;

pub use params::{default_schedule, geometric_schedule, ArmijoParams, Functional, ReconParams, Stage};
pub use problem::{DiscreteDataset, ReconProblem, StatePack};
pub use solver::{run_reconstruction, ReconOutcome, StepOutcome, StepState};

use crate::error::{invalid, Result};
use crate::grid::{Grid, NodalField};

/// The descent variable `ṽ` together with the nodes where it is pinned to 0.
/// The physical phase field is `v = 1 − ṽ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseField {
    tilde_v: NodalField,
    mask: Vec<bool>,
}

impl PhaseField {
    /// Validated phase: `0 ≤ ṽ ≤ 1` and `ṽ = 0` on the mask.
    pub fn new(grid: &Grid, tilde_v: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        let p = Self::unconstrained(grid, tilde_v, mask)?;
        if let Some(j) = p.tilde_v.iter().position(|&t| !(0.0..=1.0).contains(&t)) {
            return Err(invalid(format!("phase value {} at node {j} outside [0, 1]", p.tilde_v[j])));
        }
        if let Some(j) = (0..p.mask.len()).find(|&j| p.mask[j] && p.tilde_v[j] != 0.0) {
            return Err(invalid(format!("masked node {j} has nonzero phase")));
        }
        Ok(p)
    }

    /// A phase that may violate the box constraint, e.g. an untruncated
    /// line-search candidate.
    pub fn unconstrained(grid: &Grid, tilde_v: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != grid.node_count() {
            return Err(invalid("mask length does not match the grid"));
        }
        Ok(PhaseField { tilde_v: NodalField::new(grid, tilde_v)?, mask })
    }

    /// `ṽ = value` on free nodes, 0 on the mask.
    pub fn constant(grid: &Grid, value: f64, mask: Vec<bool>) -> Result<Self> {
        let tv = mask.iter().map(|&m| if m { 0.0 } else { value }).collect();
        Self::new(grid, tv, mask)
    }

    pub fn tilde_v(&self) -> &[f64] {
        &self.tilde_v
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// `v = 1 − ṽ` at the nodes.
    pub fn v(&self) -> Vec<f64> {
        self.tilde_v.iter().map(|t| 1.0 - t).collect()
    }

    /// Nodal clamp to `[0, 1]` with the mask re-imposed.
    pub fn truncated(&self) -> PhaseField {
        let tv = self
            .tilde_v
            .iter()
            .zip(&self.mask)
            .map(|(&t, &m)| if m { 0.0 } else { t.clamp(0.0, 1.0) })
            .collect();
        PhaseField { tilde_v: NodalField(tv), mask: self.mask.clone() }
    }

    pub(crate) fn with_values(&self, tilde_v: Vec<f64>) -> PhaseField {
        PhaseField { tilde_v: NodalField(tilde_v), mask: self.mask.clone() }
    }
}

/// Mask pinning every boundary node.
pub fn boundary_mask(grid: &Grid) -> Vec<bool> {
    (0..grid.node_count()).map(|n| grid.is_boundary_node(n)).collect()
}

/// The four parts of the discrete functional.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CostBreakdown {
    pub fidelity: f64,
    pub dirichlet: f64,
    pub well: f64,
    pub gradient_term: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.fidelity + self.dirichlet + self.well + self.gradient_term
    }
}

/// One outer iteration of the gradient method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    /// 1-based count over the whole run.
    pub iteration: usize,
    pub stage: usize,
    pub eps: f64,
    pub cost: CostBreakdown,
    /// Accepted step length; 0 when the line search kept the phase.
    pub step: f64,
    pub dual_norm: f64,
    pub reductions: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_validation() {
        let g = Grid::new(3, 3, 1.0, 1.0).unwrap();
        let mask = boundary_mask(&g);
        assert_eq!(mask.iter().filter(|&&m| !m).count(), 4);
        let p = PhaseField::constant(&g, 0.5, mask.clone()).unwrap();
        assert_eq!(p.v()[g.node_index(1, 1)], 0.5);
        assert_eq!(p.v()[0], 1.0);
        assert!(PhaseField::constant(&g, 1.5, mask.clone()).is_err());
        let mut tv = vec![0.0; g.node_count()];
        tv[0] = 0.2;
        assert!(PhaseField::new(&g, tv.clone(), mask.clone()).is_err());
        let raw = PhaseField::unconstrained(&g, tv, mask).unwrap();
        assert!(raw.truncated().tilde_v().iter().all(|&t| t == 0.0));
    }

    #[test]
    fn truncation_clamps() {
        let g = Grid::new(2, 2, 1.0, 1.0).unwrap();
        let mut tv = vec![0.0; 9];
        tv[4] = 1.7;
        let p = PhaseField::unconstrained(&g, tv, boundary_mask(&g)).unwrap().truncated();
        assert_eq!(p.tilde_v()[4], 1.0);
        tv = vec![0.0; 9];
        tv[4] = -0.3;
        let p = PhaseField::unconstrained(&g, tv, boundary_mask(&g)).unwrap().truncated();
        assert_eq!(p.tilde_v()[4], 0.0);
    }
}

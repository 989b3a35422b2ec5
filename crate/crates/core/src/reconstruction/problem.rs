use rayon::prelude::*;

use super::{CostBreakdown, Functional, PhaseField};
use crate::datagen::{interpolate_linear, CauchyDataset};
use crate::error::{invalid, Error, Result};
use crate::fem::{BoundaryProfile, CsrMatrix, EdgeFlux, FemSpace, Gamma, GammaTrace, SolverOptions};
use crate::grid::{CellField, NodalField, Side, SideSet};
use crate::potentials::{psi_eps, psi_eps_prime, well, well_prime};

/// One Cauchy pair on the inversion grid: assembled Neumann load and the
/// γ-mean-zero Dirichlet trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDataset {
    load: NodalField,
    target: GammaTrace,
}

impl DiscreteDataset {
    /// Builds from a flux already given on boundary edges. The flux is
    /// re-balanced to zero integral over γ and must vanish off γ; `target`
    /// is re-centred.
    pub fn new(space: &FemSpace, gamma: &Gamma, mut flux: EdgeFlux, mut target: GammaTrace) -> Result<Self> {
        let grid = space.grid();
        let mut total = 0.0;
        for (e, f) in grid.boundary_edges().iter().zip(flux.values()) {
            if gamma.sides().contains(e.side) {
                total += 0.5 * grid.edge_length(e) * (f[0] + f[1]);
            } else if f[0] != 0.0 || f[1] != 0.0 {
                return Err(invalid(format!("flux is nonzero on side {} outside γ", e.side)));
            }
        }
        let shift = total / gamma.length();
        for (e, f) in grid.boundary_edges().iter().zip(flux.values_mut()) {
            if gamma.sides().contains(e.side) {
                f[0] -= shift;
                f[1] -= shift;
            }
        }
        gamma.center(&mut target)?;
        Ok(DiscreteDataset { load: space.assemble_neumann_load(&flux), target })
    }

    /// Maps point samples onto the grid. Both data are taken as the
    /// piecewise-linear interpolants of the samples: the flux load integrates
    /// that interpolant exactly against the hat functions and is re-balanced
    /// over γ, and the target is the L² projection of the trace interpolant
    /// onto the traces on γ, which leaves `∫_γ |u − g|²` unchanged up to a
    /// constant.
    pub fn from_cauchy(space: &FemSpace, gamma: &Gamma, ds: &CauchyDataset) -> Result<Self> {
        for side in gamma.sides().sides() {
            if ds.side(side).is_none() {
                return Err(invalid(format!("dataset has no samples on side {side}, which is part of γ")));
            }
        }
        let sampled = |trace| Sampled { ds, sides: gamma.sides(), trace };
        let mut load = space.assemble_profile_load(&sampled(false));
        let unit = space.assemble_profile_load(&UnitOn(gamma.sides()));
        let shift = load.iter().sum::<f64>() / gamma.length();
        for (l, u) in load.0.iter_mut().zip(unit.iter()) {
            *l -= shift * u;
        }
        let mut target = gamma.l2_projection(&space.assemble_profile_load(&sampled(true)))?;
        gamma.center(&mut target)?;
        Ok(DiscreteDataset { load, target })
    }

    pub fn load(&self) -> &NodalField {
        &self.load
    }

    pub fn target(&self) -> &GammaTrace {
        &self.target
    }
}

/// Linear interpolant of the flux or trace samples on the γ sides, zero
/// elsewhere.
struct Sampled<'a> {
    ds: &'a CauchyDataset,
    sides: SideSet,
    trace: bool,
}

impl BoundaryProfile for Sampled<'_> {
    fn value(&self, side: Side, s: f64) -> f64 {
        match self.ds.side(side) {
            Some(p) if self.sides.contains(side) => {
                interpolate_linear(&p.coords, if self.trace { &p.trace } else { &p.flux }, s)
            }
            _ => 0.0,
        }
    }

    fn breakpoints(&self, side: Side) -> Vec<f64> {
        self.ds.side(side).map(|p| p.coords.clone()).unwrap_or_default()
    }
}

struct UnitOn(SideSet);

impl BoundaryProfile for UnitOn {
    fn value(&self, side: Side, _: f64) -> f64 {
        if self.0.contains(side) {
            1.0
        } else {
            0.0
        }
    }
}

/// States (and, once solved, adjoints) for one phase at one ε, sharing the
/// assembled coefficient and operator.
#[derive(Debug, Clone)]
pub struct StatePack {
    coefficient: CellField,
    operator: CsrMatrix,
    states: Vec<NodalField>,
    adjoints: Vec<NodalField>,
}

impl StatePack {
    pub fn coefficient(&self) -> &CellField {
        &self.coefficient
    }

    pub fn operator(&self) -> &CsrMatrix {
        &self.operator
    }

    pub fn states(&self) -> &[NodalField] {
        &self.states
    }

    /// Empty until [`ReconProblem::solve_adjoints`] has run.
    pub fn adjoints(&self) -> &[NodalField] {
        &self.adjoints
    }
}

/// Inversion grid, γ and datasets: everything the reduced functional needs
/// besides the phase and the weights.
#[derive(Debug, Clone)]
pub struct ReconProblem {
    space: FemSpace,
    gamma: Gamma,
    unit_k: CsrMatrix,
    datasets: Vec<DiscreteDataset>,
    solver: SolverOptions,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl ReconProblem {
    pub fn new(space: FemSpace, gamma: Gamma, datasets: Vec<DiscreteDataset>, solver: SolverOptions) -> Result<Self> {
        if datasets.is_empty() {
            return Err(invalid("at least one dataset is required"));
        }
        if let Some(d) = datasets.iter().find(|d| d.target.sides() != gamma.sides()) {
            return Err(invalid(format!("dataset lives on {} but γ = {}", d.target.sides(), gamma.sides())));
        }
        let unit_k = space.unit_stiffness();
        Ok(ReconProblem { space, gamma, unit_k, datasets, solver })
    }

    pub fn space(&self) -> &FemSpace {
        &self.space
    }

    pub fn gamma(&self) -> &Gamma {
        &self.gamma
    }

    pub fn datasets(&self) -> &[DiscreteDataset] {
        &self.datasets
    }

    pub fn solver(&self) -> &SolverOptions {
        &self.solver
    }

    pub fn set_solver(&mut self, solver: SolverOptions) {
        self.solver = solver;
    }

    /// Unit-coefficient stiffness `K`.
    pub fn unit_stiffness(&self) -> &CsrMatrix {
        &self.unit_k
    }

    fn clamped_v(phase: &PhaseField) -> Vec<f64> {
        phase.tilde_v().iter().map(|t| (1.0 - t).clamp(0.0, 1.0)).collect()
    }

    /// Per-cell `v_T = P0(clamp(1 − ṽ, 0, 1))`.
    fn cell_phase(&self, phase: &PhaseField) -> CellField {
        self.space.grid().p0_project(&Self::clamped_v(phase))
    }

    /// `ψ_ε(v_T)` per cell.
    pub fn coefficient(&self, phase: &PhaseField, f: &Functional) -> CellField {
        CellField(self.cell_phase(phase).iter().map(|&v| psi_eps(v, f.phase)).collect())
    }

    fn operator(&self, phase: &PhaseField, f: &Functional) -> Result<(CellField, CsrMatrix)> {
        let coefficient = self.coefficient(phase, f);
        let operator = self.space.assemble_stiffness(&coefficient)?;
        Ok((coefficient, operator))
    }

    /// State of dataset `k` alone.
    pub fn solve_state(&self, phase: &PhaseField, f: &Functional, k: usize) -> Result<NodalField> {
        let (_, op) = self.operator(phase, f)?;
        let ds = self.datasets.get(k).ok_or_else(|| invalid(format!("no dataset {k}")))?;
        Ok(self.space.solve_gauged_neumann(&op, &ds.load, &self.gamma, &self.solver, None)?.0)
    }

    /// States of all datasets against one shared operator. `guess` warm
    /// starts the solver from an earlier pack.
    pub fn solve_states(&self, phase: &PhaseField, f: &Functional, guess: Option<&StatePack>) -> Result<StatePack> {
        let (coefficient, operator) = self.operator(phase, f)?;
        let states = (0..self.datasets.len())
            .into_par_iter()
            .map(|k| {
                let g = guess.map(|p| p.states[k].values());
                self.space
                    .solve_gauged_neumann(&operator, &self.datasets[k].load, &self.gamma, &self.solver, g)
                    .map(|(u, _)| u)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(StatePack { coefficient, operator, states, adjoints: Vec::new() })
    }

    /// Adjoint for dataset `k`: `A φ = −2b A u − 2(a/ε^q1) M_γ (u − g)`.
    pub fn solve_adjoint(&self, pack: &StatePack, f: &Functional, k: usize) -> Result<NodalField> {
        let u = &pack.states[k];
        let au = pack.operator.mul(u);
        let gt = self.gamma.trace(u);
        let resid: Vec<f64> =
            gt.values().iter().zip(self.datasets[k].target.values()).map(|(a, b)| a - b).collect();
        let mg = self.gamma.apply_mass_values(&resid);
        let w = 2.0 * f.fidelity_weight();
        let rhs: Vec<f64> = au.iter().zip(&mg).map(|(a, m)| -2.0 * f.b * a - w * m).collect();
        match self.space.solve_gauged_neumann(&pack.operator, &rhs, &self.gamma, &self.solver, None) {
            Ok((phi, _)) => Ok(phi),
            Err(Error::Compatibility { sum, tolerance }) => Err(Error::Consistency(format!(
                "adjoint load of dataset {k} sums to {sum:e} (tolerance {tolerance:e})"
            ))),
            Err(e) => Err(e),
        }
    }

    pub fn solve_adjoints(&self, pack: &mut StatePack, f: &Functional) -> Result<()> {
        let p: &StatePack = pack;
        let adjoints = (0..self.datasets.len())
            .into_par_iter()
            .map(|k| self.solve_adjoint(p, f, k))
            .collect::<Result<Vec<_>>>()?;
        pack.adjoints = adjoints;
        Ok(())
    }

    /// Discrete functional for given states (one per dataset, in order).
    pub fn eval_cost(&self, phase: &PhaseField, f: &Functional, states: &[NodalField]) -> CostBreakdown {
        let coeff = self.coefficient(phase, f);
        let mut fidelity = 0.0;
        let mut dirichlet = 0.0;
        for (u, ds) in states.iter().zip(&self.datasets) {
            let r: Vec<f64> = self
                .gamma
                .trace(u)
                .values()
                .iter()
                .zip(ds.target.values())
                .map(|(a, b)| a - b)
                .collect();
            fidelity += self.gamma.inner_values(&r, &r);
            dirichlet += (0..coeff.len()).map(|c| coeff[c] * self.space.cell_form(c, u, u)).sum::<f64>();
        }
        let well_sum: f64 = phase
            .tilde_v()
            .iter()
            .zip(self.space.lumped_mass())
            .map(|(t, m)| m * well(f.potential, 1.0 - t))
            .sum();
        CostBreakdown {
            fidelity: f.fidelity_weight() * fidelity,
            dirichlet: f.b * dirichlet,
            well: f.well_weight() * well_sum,
            gradient_term: f.eps() * self.unit_k.bilinear(phase.tilde_v(), phase.tilde_v()),
        }
    }

    /// Solves the states and evaluates the reduced cost.
    pub fn reduced_cost(&self, phase: &PhaseField, f: &Functional) -> Result<(CostBreakdown, StatePack)> {
        let pack = self.solve_states(phase, f, None)?;
        Ok((self.eval_cost(phase, f, &pack.states), pack))
    }

    /// 1 where `v = 1 − ṽ` lies inside `[0, 1]`, where the clamp in the
    /// coefficient has unit slope.
    fn clamp_slope(phase: &PhaseField) -> Vec<f64> {
        phase.tilde_v().iter().map(|t| f64::from(u8::from((0.0..=1.0).contains(&(1.0 - t))))).collect()
    }

    /// Derivative of the reduced cost with respect to `ṽ`, as a dual vector.
    /// Requires adjoints in `pack`.
    pub fn assemble_gradient(&self, phase: &PhaseField, f: &Functional, pack: &StatePack) -> Result<NodalField> {
        if pack.adjoints.len() != pack.states.len() {
            return Err(invalid("adjoints have not been solved for this state pack"));
        }
        let grid = self.space.grid();
        let vt = self.cell_phase(phase);
        let slope = Self::clamp_slope(phase);
        let mut g = vec![0.0; grid.node_count()];
        for (c, cell) in grid.cells().iter().enumerate() {
            let dpsi = psi_eps_prime(vt[c], f.phase);
            if dpsi == 0.0 {
                continue;
            }
            let mut s = 0.0;
            for (u, phi) in pack.states.iter().zip(&pack.adjoints) {
                s += f.b * self.space.cell_form(c, u, u) + self.space.cell_form(c, u, phi);
            }
            let contrib = -dpsi * s / 3.0;
            for &n in cell {
                g[n] += contrib * slope[n];
            }
        }
        let kv = self.unit_k.mul(phase.tilde_v());
        let ww = f.well_weight();
        for (j, gj) in g.iter_mut().enumerate() {
            let v = 1.0 - phase.tilde_v()[j];
            *gj += ww * -well_prime(f.potential, v) * self.space.lumped_mass()[j] + 2.0 * f.eps() * kv[j];
            if phase.mask()[j] {
                *gj = 0.0;
            }
        }
        Ok(NodalField(g))
    }

    /// Per-cell `ψ'_ε(v_T) · d_T` where `d_T` is the P0 mean of the
    /// direction through the clamp.
    fn coefficient_derivative(&self, phase: &PhaseField, f: &Functional, direction: &[f64]) -> Vec<f64> {
        let slope = Self::clamp_slope(phase);
        let vt = self.cell_phase(phase);
        let d: Vec<f64> = direction.iter().zip(&slope).map(|(a, b)| a * b).collect();
        let dt = self.space.grid().p0_project(&d);
        vt.iter().zip(dt.iter()).map(|(&v, &x)| psi_eps_prime(v, f.phase) * x).collect()
    }

    /// Derivative `U` of the state of dataset `k` along `direction` (a
    /// perturbation of `ṽ`): `A U = Σ_T ψ'_ε(v_T) d_T K_T u`, γ-mean zero.
    pub fn directional_state_derivative(
        &self,
        phase: &PhaseField,
        f: &Functional,
        pack: &StatePack,
        k: usize,
        direction: &[f64],
    ) -> Result<NodalField> {
        let grid = self.space.grid();
        let w = self.coefficient_derivative(phase, f, direction);
        let u = &pack.states[k];
        let mut rhs = vec![0.0; grid.node_count()];
        let mut e = vec![0.0; grid.node_count()];
        for (c, cell) in grid.cells().iter().enumerate() {
            if w[c] == 0.0 {
                continue;
            }
            for &n in cell {
                e[n] = 1.0;
                rhs[n] += w[c] * self.space.cell_form(c, u, &e);
                e[n] = 0.0;
            }
        }
        Ok(self.space.solve_gauged_neumann(&pack.operator, &rhs, &self.gamma, &self.solver, None)?.0)
    }

    /// Directional derivative of the reduced cost computed through the state
    /// sensitivities `U` instead of adjoints.
    pub fn directional_derivative(
        &self,
        phase: &PhaseField,
        f: &Functional,
        pack: &StatePack,
        direction: &[f64],
    ) -> Result<f64> {
        let w = self.coefficient_derivative(phase, f, direction);
        let mut total = 0.0;
        for (k, (u, ds)) in pack.states.iter().zip(&self.datasets).enumerate() {
            let du = self.directional_state_derivative(phase, f, pack, k, direction)?;
            let r: Vec<f64> =
                self.gamma.trace(u).values().iter().zip(ds.target.values()).map(|(a, b)| a - b).collect();
            let tu = self.gamma.trace(&du);
            total += 2.0 * f.fidelity_weight() * self.gamma.inner_values(&r, tu.values());
            let explicit: f64 = (0..w.len()).map(|c| w[c] * self.space.cell_form(c, u, u)).sum();
            total += f.b * (2.0 * pack.operator.bilinear(u, &du) - explicit);
        }
        let ww = f.well_weight();
        for (j, &d) in direction.iter().enumerate() {
            let v = 1.0 - phase.tilde_v()[j];
            total += ww * -well_prime(f.potential, v) * self.space.lumped_mass()[j] * d;
        }
        total += 2.0 * f.eps() * self.unit_k.bilinear(phase.tilde_v(), direction);
        Ok(total)
    }

    /// Riesz representative of `dual` in the inner product
    /// `∫ u w + alpha ∫ ∇u·∇w`, pinned to zero on the mask.
    pub fn riesz_lift(&self, dual: &[f64], alpha: f64, mask: &[bool]) -> Result<NodalField> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(invalid(format!("riesz_alpha must be nonnegative, got {alpha}")));
        }
        let op = self.space.screened_operator(alpha);
        Ok(self.space.solve_pinned(&op, dual, mask, &self.solver)?.0)
    }
}

pub(crate) fn dual_pairing(g: &[f64], d: &[f64]) -> f64 {
    dot(g, d)
}

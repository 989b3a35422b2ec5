//! P1 finite elements on a [`Grid`]: weighted stiffness assembly, boundary
//! loads, lumped masses and the gauged pure-Neumann solve.

mod gamma;
mod sparse;

pub use gamma::{gamma_inner, Gamma, GammaTrace};
pub use sparse::{CsrMatrix, SolveInfo, SolverOptions};
pub(crate) use sparse::projected_pcg;

use crate::error::{invalid, Error, Result};
use crate::grid::{CellField, Grid, NodalField, Side};

/// Piecewise-linear flux density on the boundary, given by its values at
/// both endpoints of every boundary edge (aligned with
/// [`Grid::boundary_edges`]).
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeFlux {
    values: Vec<[f64; 2]>,
}

impl EdgeFlux {
    pub fn new(grid: &Grid, values: Vec<[f64; 2]>) -> Result<Self> {
        if values.len() != grid.boundary_edges().len() {
            return Err(invalid(format!(
                "edge flux has {} entries, grid has {} boundary edges",
                values.len(),
                grid.boundary_edges().len()
            )));
        }
        Ok(EdgeFlux { values })
    }

    pub fn zero(grid: &Grid) -> Self {
        EdgeFlux { values: vec![[0.0; 2]; grid.boundary_edges().len()] }
    }

    /// Samples `f(side, point)` at the edge endpoints.
    pub fn from_fn(grid: &Grid, f: impl Fn(Side, [f64; 2]) -> f64) -> Self {
        let values = grid
            .boundary_edges()
            .iter()
            .map(|e| e.nodes.map(|n| f(e.side, grid.nodes()[n])))
            .collect();
        EdgeFlux { values }
    }

    pub fn values(&self) -> &[[f64; 2]] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [[f64; 2]] {
        &mut self.values
    }
}

/// A boundary flux profile evaluated pointwise along each side.
///
/// The profile must be linear between consecutive breakpoints; jumps are
/// allowed at breakpoints.
pub trait BoundaryProfile {
    /// Value at side coordinate `s`.
    fn value(&self, side: Side, s: f64) -> f64;

    /// Side coordinates where the profile may jump or kink.
    fn breakpoints(&self, _side: Side) -> Vec<f64> {
        Vec::new()
    }
}

/// Precomputed geometry and sparsity for P1 elements on one grid.
#[derive(Debug, Clone)]
pub struct FemSpace {
    grid: Grid,
    /// Unit-coefficient element stiffness `|T| ∇λ_a·∇λ_b`.
    local: Vec<[[f64; 3]; 3]>,
    /// CSR value slot of each local entry.
    slots: Vec<[[usize; 3]; 3]>,
    pattern: CsrMatrix,
    lumped_mass: Vec<f64>,
}

impl FemSpace {
    pub fn new(grid: Grid) -> Self {
        let n = grid.node_count();
        let mut rows: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for cell in grid.cells() {
            for &a in cell {
                for &b in cell {
                    rows[a].push(b);
                }
            }
        }
        for r in &mut rows {
            r.sort_unstable();
            r.dedup();
        }
        let pattern = CsrMatrix::from_pattern(&rows);

        let mut local = Vec::with_capacity(grid.cell_count());
        let mut slots = Vec::with_capacity(grid.cell_count());
        let mut lumped_mass = vec![0.0; n];
        for (c, cell) in grid.cells().iter().enumerate() {
            let p = cell.map(|k| grid.nodes()[k]);
            let area = grid.cell_area(c);
            // ∇λ_a = rot90(p_{a+2} − p_{a+1}) / (2|T|)
            let grad = |a: usize| {
                let (q, r) = (p[(a + 1) % 3], p[(a + 2) % 3]);
                [(q[1] - r[1]) / (2.0 * area), (r[0] - q[0]) / (2.0 * area)]
            };
            let g = [grad(0), grad(1), grad(2)];
            let mut k = [[0.0; 3]; 3];
            for a in 0..3 {
                for b in (a + 1)..3 {
                    let v = area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                    k[a][b] = v;
                    k[b][a] = v;
                }
            }
            // Diagonal from the off-diagonals keeps constants in the kernel.
            for a in 0..3 {
                k[a][a] = -(k[a][(a + 1) % 3] + k[a][(a + 2) % 3]);
            }
            local.push(k);
            let mut s = [[0; 3]; 3];
            for a in 0..3 {
                for b in 0..3 {
                    s[a][b] = pattern.slot(cell[a], cell[b]).expect("pattern covers cell");
                }
                lumped_mass[cell[a]] += area / 3.0;
            }
            slots.push(s);
        }
        FemSpace { grid, local, slots, pattern, lumped_mass }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Row sums of the consistent mass matrix, `∫ λ_i`.
    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped_mass
    }

    /// `|T| ∇u·∇w` on cell `c` for P1 fields `u`, `w`.
    pub fn cell_form(&self, c: usize, u: &[f64], w: &[f64]) -> f64 {
        let cell = &self.grid.cells()[c];
        let k = &self.local[c];
        let mut acc = 0.0;
        for a in 0..3 {
            let mut row = 0.0;
            for b in 0..3 {
                row += k[a][b] * w[cell[b]];
            }
            acc += u[cell[a]] * row;
        }
        acc
    }

    /// `A_ij = Σ_T coeff_T ∫_T ∇λ_i·∇λ_j`.
    pub fn assemble_stiffness(&self, coeff: &CellField) -> Result<CsrMatrix> {
        if coeff.len() != self.grid.cell_count() {
            return Err(invalid("coefficient field does not match the grid"));
        }
        if let Some(c) = coeff.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(invalid(format!(
                "stiffness coefficient must be positive, cell {c} has {}",
                coeff[c]
            )));
        }
        Ok(self.assemble_unchecked(coeff))
    }

    fn assemble_unchecked(&self, coeff: &[f64]) -> CsrMatrix {
        let mut m = self.pattern.clone();
        m.clear();
        let vals = m.vals_mut();
        for (c, &w) in coeff.iter().enumerate() {
            let (k, s) = (&self.local[c], &self.slots[c]);
            for a in 0..3 {
                for b in 0..3 {
                    vals[s[a][b]] += w * k[a][b];
                }
            }
        }
        m
    }

    /// Unit-coefficient stiffness, the discrete `∫ ∇u·∇w`.
    pub fn unit_stiffness(&self) -> CsrMatrix {
        self.assemble_unchecked(&vec![1.0; self.grid.cell_count()])
    }

    /// `load_i = Σ_edges ∫_edge f λ_i`, exact for piecewise-linear `f`.
    pub fn assemble_neumann_load(&self, flux: &EdgeFlux) -> NodalField {
        let mut load = vec![0.0; self.grid.node_count()];
        for (e, &[f0, f1]) in self.grid.boundary_edges().iter().zip(flux.values()) {
            let len = self.grid.edge_length(e);
            load[e.nodes[0]] += len / 6.0 * (2.0 * f0 + f1);
            load[e.nodes[1]] += len / 6.0 * (f0 + 2.0 * f1);
        }
        NodalField::new(&self.grid, load).expect("finite load")
    }

    /// Load of a profile that may jump inside edges. Each edge is split at
    /// the profile's breakpoints and every piece is integrated with two-point
    /// Gauss rules, exact for linear pieces against linear hats.
    pub fn assemble_profile_load(&self, profile: &dyn BoundaryProfile) -> NodalField {
        let g = &self.grid;
        let mut load = vec![0.0; g.node_count()];
        let gauss = [0.5 - 0.5 / 3f64.sqrt(), 0.5 + 0.5 / 3f64.sqrt()];
        for side in Side::ALL {
            let breaks = profile.breakpoints(side);
            for e in g.boundary_edges().iter().filter(|e| e.side == side) {
                let [s0, s1] = e.nodes.map(|n| g.side_coordinate(side, g.nodes()[n]));
                let mut cuts = vec![s0];
                cuts.extend(breaks.iter().copied().filter(|&b| b > s0 && b < s1));
                cuts.push(s1);
                let scale = g.edge_length(e) / (s1 - s0);
                for w in cuts.windows(2) {
                    let (a, b) = (w[0], w[1]);
                    for &q in &gauss {
                        let s = a + q * (b - a);
                        let f = profile.value(side, s) * 0.5 * (b - a) * scale;
                        let t = (s - s0) / (s1 - s0);
                        load[e.nodes[0]] += f * (1.0 - t);
                        load[e.nodes[1]] += f * t;
                    }
                }
            }
        }
        NodalField::new(g, load).expect("finite load")
    }

    /// Lumped mass plus `alpha` times the unit stiffness.
    pub fn screened_operator(&self, alpha: f64) -> CsrMatrix {
        let mut m = self.unit_stiffness().linear_combination(alpha, &self.pattern, 0.0);
        m.add_to_diagonal(&self.lumped_mass);
        m
    }

    /// Solves `A u = rhs` for a singular Neumann operator (constants in the
    /// kernel) and fixes the gauge `∫_γ u = 0`.
    ///
    /// The load must be compatible: `|Σ rhs| ≤ 1e-8 ‖rhs‖₁`.
    pub fn solve_gauged_neumann(
        &self,
        op: &CsrMatrix,
        rhs: &[f64],
        gamma: &Gamma,
        opts: &SolverOptions,
        guess: Option<&[f64]>,
    ) -> Result<(NodalField, SolveInfo)> {
        let n = self.grid.node_count();
        if rhs.len() != n || op.dim() != n {
            return Err(invalid("operator/rhs dimension mismatch"));
        }
        let sum: f64 = rhs.iter().sum();
        let l1: f64 = rhs.iter().map(|v| v.abs()).sum();
        let tolerance = 1e-8 * l1;
        if sum.abs() > tolerance {
            return Err(Error::Compatibility { sum, tolerance });
        }
        let mean = sum / n as f64;
        let b: Vec<f64> = rhs.iter().map(|v| v - mean).collect();
        let inv_diag: Vec<f64> = op.diagonal().iter().map(|d| 1.0 / d).collect();
        let project = |v: &mut [f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter_mut().for_each(|x| *x -= m);
        };
        let (mut u, info) = projected_pcg(op, &inv_diag, &b, guess, project, opts)?;
        let shift = gamma.mean(&u);
        u.iter_mut().for_each(|x| *x -= shift);
        Ok((NodalField::new(&self.grid, u)?, info))
    }

    /// Solves `op x = rhs` with `x` pinned to zero on masked nodes; `op`
    /// must be positive definite on the free nodes.
    pub fn solve_pinned(
        &self,
        op: &CsrMatrix,
        rhs: &[f64],
        mask: &[bool],
        opts: &SolverOptions,
    ) -> Result<(NodalField, SolveInfo)> {
        let n = self.grid.node_count();
        if rhs.len() != n || mask.len() != n {
            return Err(invalid("mask/rhs dimension mismatch"));
        }
        let project = |v: &mut [f64]| {
            for (x, &m) in v.iter_mut().zip(mask) {
                if m {
                    *x = 0.0;
                }
            }
        };
        let mut b = rhs.to_vec();
        project(&mut b);
        let inv_diag: Vec<f64> = op.diagonal().iter().map(|d| 1.0 / d).collect();
        let (x, info) = projected_pcg(op, &inv_diag, &b, None, project, opts)?;
        Ok((NodalField::new(&self.grid, x)?, info))
    }
}

/// Free-function form of [`FemSpace::assemble_stiffness`].
pub fn assemble_stiffness(space: &FemSpace, coeff: &CellField) -> Result<CsrMatrix> {
    space.assemble_stiffness(coeff)
}

/// Free-function form of [`FemSpace::assemble_neumann_load`].
pub fn assemble_neumann_load(space: &FemSpace, flux: &EdgeFlux) -> NodalField {
    space.assemble_neumann_load(flux)
}

/// Free-function form of [`FemSpace::solve_gauged_neumann`] with default
/// solver controls.
pub fn solve_gauged_neumann(
    space: &FemSpace,
    op: &CsrMatrix,
    rhs: &NodalField,
    gamma: &Gamma,
) -> Result<NodalField> {
    space
        .solve_gauged_neumann(op, rhs, gamma, &SolverOptions::default(), None)
        .map(|(u, _)| u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SideSet;

    /// Element matrix by symbolic integration of the hat gradients on the
    /// reference right triangle with legs `h`:
    /// ∇λ0 = (−1,−1)/h, ∇λ1 = (1,0)/h, ∇λ2 = (0,1)/h, |T| = h²/2.
    fn reference_element(h: f64) -> [[f64; 3]; 3] {
        let g = [[-1.0 / h, -1.0 / h], [1.0 / h, 0.0], [0.0, 1.0 / h]];
        let area = 0.5 * h * h;
        let mut k = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                k[a][b] = area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
            }
        }
        k
    }

    #[test]
    fn right_triangle_element_matrix() {
        // The lower-right triangle of a 1x1 cell is (n00, n10, n11) with the
        // right angle at n10; reorder its local matrix to put that vertex first.
        for h in [1.0, 0.25, 3.0] {
            let g = Grid::new(1, 1, h, h).unwrap();
            let space = FemSpace::new(g);
            let k = space.local[0];
            let perm = [1, 2, 0];
            let oracle = reference_element(h);
            let expected = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
            for a in 0..3 {
                for b in 0..3 {
                    assert!((k[perm[a]][perm[b]] - oracle[a][b]).abs() < 1e-15);
                    assert!((oracle[a][b] - expected[a][b]).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn stiffness_rows_sum_to_zero_and_symmetric() {
        let g = Grid::new(5, 4, 1.3, 0.9).unwrap();
        let coeff: Vec<f64> = (0..g.cell_count()).map(|c| 0.01 + (c as f64 * 0.37).sin().abs()).collect();
        let space = FemSpace::new(g.clone());
        let a = space.assemble_stiffness(&CellField::new(&g, coeff).unwrap()).unwrap();
        for i in 0..a.dim() {
            let s: f64 = a.row(i).map(|(_, v)| v).sum();
            assert!(s.abs() < 1e-12, "row {i} sums to {s}");
            for (j, v) in a.row(i) {
                assert_eq!(v, a.get(j, i));
            }
        }
    }

    #[test]
    fn nonpositive_coefficient_rejected() {
        let g = Grid::new(2, 2, 1.0, 1.0).unwrap();
        let space = FemSpace::new(g.clone());
        let mut c = vec![1.0; g.cell_count()];
        c[3] = 0.0;
        assert!(space.assemble_stiffness(&CellField::new(&g, c).unwrap()).is_err());
    }

    #[test]
    fn dirichlet_energy_of_x_is_area() {
        for n in [1, 3, 8] {
            let g = Grid::new(n, n, 1.0, 1.0).unwrap();
            let space = FemSpace::new(g.clone());
            let x = NodalField::from_fn(&g, |p| p[0]);
            let k = space.unit_stiffness();
            assert!((k.bilinear(&x, &x) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_flux_load_on_one_side() {
        let g = Grid::new(2, 2, 1.0, 1.0).unwrap();
        let space = FemSpace::new(g.clone());
        let flux = EdgeFlux::from_fn(&g, |s, _| if s == Side::Bottom { 1.0 } else { 0.0 });
        let load = space.assemble_neumann_load(&flux);
        let bottom = g.side_nodes(Side::Bottom);
        let got: Vec<f64> = bottom.iter().map(|&n| load[n]).collect();
        assert_eq!(got, vec![0.25, 0.5, 0.25]);
        assert!((load.iter().sum::<f64>() - 1.0).abs() < 1e-15);

        let zero = space.assemble_neumann_load(&EdgeFlux::zero(&g));
        assert!(zero.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn patch_test_reproduces_linear_solution() {
        let g = Grid::new(6, 6, 1.0, 1.0).unwrap();
        let space = FemSpace::new(g.clone());
        let a = space.unit_stiffness();
        let flux = EdgeFlux::from_fn(&g, |s, _| match s {
            Side::Right => 1.0,
            Side::Left => -1.0,
            _ => 0.0,
        });
        let load = space.assemble_neumann_load(&flux);
        let gamma = Gamma::new(&g, SideSet::ALL).unwrap();
        let u = solve_gauged_neumann(&space, &a, &load, &gamma).unwrap();
        let x = NodalField::from_fn(&g, |p| p[0]);
        let shift = gamma.mean(&x);
        for (ui, xi) in u.iter().zip(x.iter()) {
            assert!((ui - (xi - shift)).abs() < 1e-10);
        }
        assert!(gamma.mean(&u).abs() < 1e-12);
    }

    #[test]
    fn incompatible_load_rejected() {
        let g = Grid::new(3, 3, 1.0, 1.0).unwrap();
        let space = FemSpace::new(g.clone());
        let mut rhs = vec![0.0; g.node_count()];
        rhs[0] = 1.0;
        let gamma = Gamma::new(&g, SideSet::ALL).unwrap();
        let err = solve_gauged_neumann(
            &space,
            &space.unit_stiffness(),
            &NodalField::new(&g, rhs).unwrap(),
            &gamma,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Compatibility { .. }));
    }

    struct Step;
    impl BoundaryProfile for Step {
        fn value(&self, side: Side, s: f64) -> f64 {
            if side == Side::Bottom && (0.3..0.55).contains(&s) {
                2.0
            } else {
                0.0
            }
        }
        fn breakpoints(&self, side: Side) -> Vec<f64> {
            if side == Side::Bottom {
                vec![0.3, 0.55]
            } else {
                vec![]
            }
        }
    }

    #[test]
    fn profile_load_integrates_jumps_exactly() {
        let g = Grid::new(4, 4, 1.0, 1.0).unwrap();
        let space = FemSpace::new(g.clone());
        let load = space.assemble_profile_load(&Step);
        assert!((load.iter().sum::<f64>() - 2.0 * 0.25).abs() < 1e-15);
        // first moment: ∫ 2x dx over [0.3, 0.55]
        let moment: f64 = load.iter().zip(g.nodes()).map(|(l, p)| l * p[0]).sum();
        assert!((moment - (0.55f64.powi(2) - 0.3f64.powi(2))).abs() < 1e-14);
    }
}

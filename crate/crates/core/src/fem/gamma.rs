//! The accessible boundary portion γ and traces living on it.

use crate::error::{invalid, Result};
use crate::grid::{Grid, SideSet};

/// γ as a union of rectangle sides, with its nodes and edges resolved on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Gamma {
    sides: SideSet,
    /// Global node ids on γ, ascending.
    nodes: Vec<usize>,
    /// Local node pair and length of every γ edge.
    edges: Vec<([usize; 2], f64)>,
    length: f64,
    node_count: usize,
}

/// Values at the nodes of a particular γ, in `Gamma::nodes` order.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaTrace {
    sides: SideSet,
    values: Vec<f64>,
}

impl GammaTrace {
    pub fn sides(&self) -> SideSet {
        self.sides
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl Gamma {
    pub fn new(grid: &Grid, sides: SideSet) -> Result<Self> {
        let edges_global = grid.boundary_side_edges(sides)?;
        let mut nodes: Vec<usize> = edges_global.iter().flat_map(|e| e.nodes).collect();
        nodes.sort_unstable();
        nodes.dedup();
        let local = |n: usize| nodes.binary_search(&n).expect("γ node");
        let edges: Vec<_> = edges_global
            .iter()
            .map(|e| ([local(e.nodes[0]), local(e.nodes[1])], grid.edge_length(e)))
            .collect();
        let length = edges.iter().map(|(_, l)| l).sum();
        Ok(Gamma { sides, nodes, edges, length, node_count: grid.node_count() })
    }

    pub fn sides(&self) -> SideSet {
        self.sides
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Restriction of a nodal vector to γ.
    pub fn trace(&self, nodal: &[f64]) -> GammaTrace {
        GammaTrace { sides: self.sides, values: self.nodes.iter().map(|&n| nodal[n]).collect() }
    }

    pub fn trace_from_values(&self, values: Vec<f64>) -> Result<GammaTrace> {
        if values.len() != self.nodes.len() {
            return Err(invalid(format!(
                "trace has {} values, γ has {} nodes",
                values.len(),
                self.nodes.len()
            )));
        }
        Ok(GammaTrace { sides: self.sides, values })
    }

    fn check(&self, t: &GammaTrace) -> Result<()> {
        if t.sides != self.sides || t.values.len() != self.nodes.len() {
            return Err(invalid(format!("trace on {} used with γ = {}", t.sides, self.sides)));
        }
        Ok(())
    }

    /// Exact `∫_γ t1 t2` for piecewise-linear traces.
    pub fn inner(&self, t1: &GammaTrace, t2: &GammaTrace) -> Result<f64> {
        self.check(t1)?;
        self.check(t2)?;
        Ok(self.inner_values(&t1.values, &t2.values))
    }

    pub(crate) fn inner_values(&self, a: &[f64], b: &[f64]) -> f64 {
        self.edges
            .iter()
            .map(|&([i, j], len)| {
                len / 6.0 * (2.0 * a[i] * b[i] + a[i] * b[j] + a[j] * b[i] + 2.0 * a[j] * b[j])
            })
            .sum()
    }

    /// Trapezoidal `∫_γ t`.
    pub(crate) fn integral_values(&self, t: &[f64]) -> f64 {
        self.edges.iter().map(|&([i, j], len)| 0.5 * len * (t[i] + t[j])).sum()
    }

    /// Length-weighted mean of a nodal vector over γ.
    pub fn mean(&self, nodal: &[f64]) -> f64 {
        let t: Vec<f64> = self.nodes.iter().map(|&n| nodal[n]).collect();
        self.integral_values(&t) / self.length
    }

    pub fn trace_mean(&self, t: &GammaTrace) -> Result<f64> {
        self.check(t)?;
        Ok(self.integral_values(&t.values) / self.length)
    }

    /// Shifts a trace so its γ-mean vanishes.
    pub fn center(&self, t: &mut GammaTrace) -> Result<()> {
        let m = self.trace_mean(t)?;
        t.values.iter_mut().for_each(|v| *v -= m);
        Ok(())
    }

    /// Boundary mass matrix of γ applied to a trace, scattered into a
    /// global nodal vector: `out_i = ∫_γ t λ_i`.
    pub fn apply_mass(&self, t: &GammaTrace) -> Result<Vec<f64>> {
        self.check(t)?;
        Ok(self.apply_mass_values(&t.values))
    }

    pub(crate) fn apply_mass_values(&self, t: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.node_count];
        for &([i, j], len) in &self.edges {
            out[self.nodes[i]] += len / 6.0 * (2.0 * t[i] + t[j]);
            out[self.nodes[j]] += len / 6.0 * (t[i] + 2.0 * t[j]);
        }
        out
    }

    /// L² projection onto the piecewise-linear traces on γ, given the
    /// moments `∫_γ g λ_i` as a global nodal vector. Entries off γ are
    /// ignored.
    pub fn l2_projection(&self, moments: &[f64]) -> Result<GammaTrace> {
        if moments.len() != self.node_count {
            return Err(invalid(format!(
                "moment vector has {} entries, grid has {} nodes",
                moments.len(),
                self.node_count
            )));
        }
        let b: Vec<f64> = self.nodes.iter().map(|&n| moments[n]).collect();
        let apply = |x: &[f64]| {
            let mut out = vec![0.0; x.len()];
            for &([i, j], len) in &self.edges {
                out[i] += len / 6.0 * (2.0 * x[i] + x[j]);
                out[j] += len / 6.0 * (x[i] + 2.0 * x[j]);
            }
            out
        };
        // The consistent 1D mass matrix has condition number at most 3 after
        // diagonal scaling, so Jacobi-preconditioned CG converges in a few
        // dozen steps.
        let mut diag = vec![0.0; b.len()];
        for &([i, j], len) in &self.edges {
            diag[i] += len / 3.0;
            diag[j] += len / 3.0;
        }
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let mut x = vec![0.0; b.len()];
        let mut r = b.clone();
        let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let stop = 1e-30 * dot(&b, &b).max(f64::MIN_POSITIVE);
        for _ in 0..10 * b.len().max(1) {
            if dot(&r, &r) <= stop {
                break;
            }
            let q = apply(&p);
            let alpha = rz / dot(&p, &q);
            x.iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
            r.iter_mut().zip(&q).for_each(|(r, q)| *r -= alpha * q);
            z = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
            let next = dot(&r, &z);
            p = z.iter().zip(&p).map(|(z, p)| z + next / rz * p).collect();
            rz = next;
        }
        Ok(GammaTrace { sides: self.sides, values: x })
    }
}

/// `∫_γ t1 t2` for two traces on the same γ.
pub fn gamma_inner(gamma: &Gamma, t1: &GammaTrace, t2: &GammaTrace) -> Result<f64> {
    gamma.inner(t1, t2)
}

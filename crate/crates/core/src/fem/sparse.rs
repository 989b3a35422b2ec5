//! Compressed sparse row storage and a Jacobi-preconditioned conjugate
//! gradient solver that works on a projected subspace.

use crate::error::{Error, Result};

/// Symmetric matrix in compressed sparse row form. Both triangles are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds an all-zero matrix from sorted per-row column lists.
    pub(crate) fn from_pattern(rows: &[Vec<usize>]) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        for r in rows {
            cols.extend_from_slice(r);
            row_ptr.push(cols.len());
        }
        let vals = vec![0.0; cols.len()];
        CsrMatrix { row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    /// Position of entry `(i, j)` in the value array.
    pub(crate) fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[range.clone()].binary_search(&j).ok().map(|k| range.start + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |k| self.vals[k])
    }

    pub(crate) fn vals_mut(&mut self) -> &mut [f64] {
        &mut self.vals
    }

    pub(crate) fn clear(&mut self) {
        self.vals.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Iterates `(col, value)` over row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[range.clone()].iter().copied().zip(self.vals[range].iter().copied())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *yi = acc;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.apply(x, &mut y);
        y
    }

    /// `xᵀ A y`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.dim())
            .map(|i| x[i] * self.row(i).map(|(j, a)| a * y[j]).sum::<f64>())
            .sum()
    }

    /// `alpha * self + beta * other` for matrices with the same pattern.
    pub fn linear_combination(&self, alpha: f64, other: &CsrMatrix, beta: f64) -> CsrMatrix {
        assert_eq!(self.cols, other.cols, "pattern mismatch");
        let mut out = self.clone();
        for (o, (&a, &b)) in out.vals.iter_mut().zip(self.vals.iter().zip(&other.vals)) {
            *o = alpha * a + beta * b;
        }
        out
    }

    pub fn add_to_diagonal(&mut self, diag: &[f64]) {
        for (i, &d) in diag.iter().enumerate() {
            let k = self.slot(i, i).expect("diagonal entry present");
            self.vals[k] += d;
        }
    }
}

/// Conjugate-gradient controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative residual target `‖b − A x‖ ≤ tolerance · ‖b‖`.
    pub tolerance: f64,
    /// Iteration cap as a multiple of the system dimension.
    pub max_iter_factor: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tolerance: 1e-10, max_iter_factor: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveInfo {
    pub iterations: usize,
    /// Final relative residual.
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned CG for `A x = b` restricted to the range of `project`.
///
/// `project` must be an orthogonal projector onto a subspace on which `A`
/// is positive definite; `b` must already lie in it. Residuals and
/// preconditioned residuals are re-projected every step so rounding never
/// leaks into the excluded directions.
pub(crate) fn projected_pcg(
    a: &CsrMatrix,
    inv_diag: &[f64],
    b: &[f64],
    guess: Option<&[f64]>,
    project: impl Fn(&mut [f64]),
    opts: &SolverOptions,
) -> Result<(Vec<f64>, SolveInfo)> {
    let n = a.dim();
    let bnorm = dot(b, b).sqrt();
    let mut x = match guess {
        Some(g) => g.to_vec(),
        None => vec![0.0; n],
    };
    project(&mut x);
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], SolveInfo { iterations: 0, residual: 0.0 }));
    }
    let target = opts.tolerance * bnorm;
    let max_iter = opts.max_iter_factor.max(1) * n.max(1);

    let mut ax = vec![0.0; n];
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut iterations = 0;

    // Outer loop restarts from the true residual whenever the recursive one
    // claims convergence but the true one disagrees.
    loop {
        a.apply(&x, &mut ax);
        for i in 0..n {
            r[i] = b[i] - ax[i];
        }
        project(&mut r);
        let mut rnorm = dot(&r, &r).sqrt();
        if rnorm <= target {
            return Ok((x, SolveInfo { iterations, residual: rnorm / bnorm }));
        }
        if iterations >= max_iter {
            return Err(Error::Convergence { iterations, residual: rnorm / bnorm });
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        project(&mut z);
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);

        while rnorm > target && iterations < max_iter {
            a.apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) || !rz.is_finite() {
                break;
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            project(&mut r);
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            project(&mut z);
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
            rnorm = dot(&r, &r).sqrt();
            iterations += 1;
        }
        if rnorm > target && iterations < max_iter {
            // Breakdown; the restart recomputes the residual from scratch.
            iterations += 1;
        }
    }
}

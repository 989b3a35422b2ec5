use crate::error::{invalid, Result};
use crate::fem::SolverOptions;
use crate::potentials::{PhaseParams, PotentialKind};

/// Backtracking controls for the projected line search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmijoParams {
    pub initial_step: f64,
    pub backtrack: f64,
    /// Sufficient-decrease slope parameter σ.
    pub sigma: f64,
    pub max_reductions: usize,
    pub growth: f64,
}

impl Default for ArmijoParams {
    fn default() -> Self {
        ArmijoParams { initial_step: 1.0, backtrack: 0.5, sigma: 1e-4, max_reductions: 5, growth: 1.2 }
    }
}

impl ArmijoParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err(invalid("armijo.initial_step must be positive"));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(invalid("armijo.backtrack must lie in (0, 1)"));
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(invalid("armijo.sigma must lie in (0, 1)"));
        }
        if self.max_reductions > 5 {
            return Err(invalid("armijo.max_reductions must not exceed 5"));
        }
        if !(self.growth >= 1.0 && self.growth.is_finite()) {
            return Err(invalid("armijo.growth must be at least 1"));
        }
        Ok(())
    }
}

/// One ε-continuation stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stage {
    pub eps: f64,
    pub iterations: usize,
}

/// Geometric ε sequence from `eps_start` to `eps_end` over `stages` stages,
/// splitting `total_iterations` as evenly as possible (earlier stages get the
/// remainder).
pub fn geometric_schedule(eps_start: f64, eps_end: f64, stages: usize, total_iterations: usize) -> Vec<Stage> {
    let stages = stages.max(1);
    (0..stages)
        .map(|k| {
            let eps = if stages == 1 {
                eps_start
            } else {
                eps_start * (eps_end / eps_start).powf(k as f64 / (stages - 1) as f64)
            };
            let iterations = total_iterations / stages + usize::from(k < total_iterations % stages);
            Stage { eps, iterations }
        })
        .collect()
}

/// Default continuation: 2e-4 down to 1e-6 (single well, 2500 iterations) or
/// 2e-6 (double well, 1000 iterations) in five stages.
pub fn default_schedule(kind: PotentialKind) -> Vec<Stage> {
    match kind {
        PotentialKind::SingleWell => geometric_schedule(2e-4, 1e-6, 5, 2500),
        PotentialKind::DoubleWell => geometric_schedule(2e-4, 2e-6, 5, 1000),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Exponent of the fidelity weight `a / ε^q1`, in `(0, 1/2)`.
    pub q1: f64,
    pub schedule: Vec<Stage>,
    /// Screening parameter of the `(M + α K)` Riesz solve.
    pub riesz_alpha: f64,
    pub armijo: ArmijoParams,
    pub potential: PotentialKind,
    pub solver: SolverOptions,
}

impl ReconParams {
    /// Documented defaults for a domain of the given diameter.
    pub fn defaults(potential: PotentialKind, domain_diameter: f64) -> Self {
        ReconParams {
            a: 1.0,
            b: 1.0,
            c: 0.5,
            q1: 0.25,
            schedule: default_schedule(potential),
            riesz_alpha: 1e-3 * domain_diameter * domain_diameter,
            armijo: ArmijoParams::default(),
            potential,
            solver: SolverOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("a", self.a), ("b", self.b), ("c", self.c)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.q1 > 0.0 && self.q1 < 0.5) {
            return Err(invalid(format!("q1 must lie in (0, 1/2), got {}", self.q1)));
        }
        if !(self.riesz_alpha > 0.0 && self.riesz_alpha.is_finite()) {
            return Err(invalid("riesz_alpha must be positive"));
        }
        if self.schedule.is_empty() {
            return Err(invalid("eps schedule must not be empty"));
        }
        for (k, s) in self.schedule.iter().enumerate() {
            PhaseParams::new(s.eps)?;
            if k > 0 && s.eps >= self.schedule[k - 1].eps {
                return Err(invalid("eps schedule must be strictly decreasing"));
            }
        }
        if !(self.solver.tolerance > 0.0) {
            return Err(invalid("solver tolerance must be positive"));
        }
        self.armijo.validate()
    }

    pub fn functional(&self, eps: f64) -> Result<Functional> {
        Ok(Functional {
            a: self.a,
            b: self.b,
            c: self.c,
            q1: self.q1,
            phase: PhaseParams::new(eps)?,
            potential: self.potential,
        })
    }
}

/// Weights of the discrete functional at one fixed ε.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Functional {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub q1: f64,
    pub phase: PhaseParams,
    pub potential: PotentialKind,
}

impl Functional {
    pub fn eps(&self) -> f64 {
        self.phase.eps()
    }

    /// `a / ε^q1`
    pub fn fidelity_weight(&self) -> f64 {
        self.a / self.eps().powf(self.q1)
    }

    /// `c² / ε`
    pub fn well_weight(&self) -> f64 {
        self.c * self.c / self.eps()
    }
}

use super::problem::dual_pairing;
use super::{ArmijoParams, CostBreakdown, Functional, IterationRecord, PhaseField, ReconParams, ReconProblem, StatePack};
use crate::error::{Error, Result};

/// Step length carried from one line search to the next.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepState {
    pub step: f64,
}

/// Result of one projected line search.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub phase: PhaseField,
    pub pack: StatePack,
    pub cost: CostBreakdown,
    /// Accepted step length, 0 when the phase was kept.
    pub step: f64,
    pub reductions: usize,
    /// `⟨G, δ⟩ ≤ 0`: no descent is possible along the direction.
    pub converged: bool,
}

impl ReconProblem {
    /// Projected Armijo search along `-direction`.
    ///
    /// Candidates are `clamp(ṽ − tδ, 0, 1)` with the mask re-imposed and are
    /// accepted on `J ≤ J₀ − σ t ⟨G, δ⟩`. A first-try success grows the
    /// stored step; a success after reductions stores the accepted step.
    /// When every reduction fails the stored step is halved and the best
    /// candidate is taken only if it lowers the cost.
    #[allow(clippy::too_many_arguments)]
    pub fn armijo_step(
        &self,
        phase: &PhaseField,
        f: &Functional,
        gradient: &[f64],
        direction: &[f64],
        before: (&CostBreakdown, &StatePack),
        armijo: &ArmijoParams,
        state: &mut StepState,
    ) -> Result<StepOutcome> {
        let (cost_before, pack_before) = before;
        let j0 = cost_before.total();
        let slope = dual_pairing(gradient, direction);
        let keep = |reductions, converged| StepOutcome {
            phase: phase.clone(),
            pack: pack_before.clone(),
            cost: *cost_before,
            step: 0.0,
            reductions,
            converged,
        };
        if !(slope > 0.0) {
            return Ok(keep(0, true));
        }
        let mut t = state.step;
        let mut best: Option<StepOutcome> = None;
        for r in 0..=armijo.max_reductions {
            let raw: Vec<f64> = phase.tilde_v().iter().zip(direction).map(|(v, d)| v - t * d).collect();
            let cand = phase.with_values(raw).truncated();
            let pack = self.solve_states(&cand, f, Some(pack_before))?;
            let cost = self.eval_cost(&cand, f, pack.states());
            let outcome = StepOutcome { phase: cand, pack, cost, step: t, reductions: r, converged: false };
            if cost.total() <= j0 - armijo.sigma * t * slope {
                state.step = if r == 0 { t * armijo.growth } else { t };
                return Ok(outcome);
            }
            if best.as_ref().map_or(true, |b| cost.total() < b.cost.total()) {
                best = Some(outcome);
            }
            if r < armijo.max_reductions {
                t *= armijo.backtrack;
            }
        }
        state.step *= 0.5;
        match best {
            Some(mut b) if b.cost.total() < j0 => {
                b.reductions = armijo.max_reductions;
                Ok(b)
            }
            _ => Ok(keep(armijo.max_reductions, false)),
        }
    }
}

/// Final phase and history of a continuation run.
#[derive(Debug, Clone)]
pub struct ReconOutcome {
    pub phase: PhaseField,
    pub history: Vec<IterationRecord>,
    /// Phase at the end of every stage.
    pub stage_phases: Vec<PhaseField>,
    /// Iterations performed per stage.
    pub stage_iterations: Vec<usize>,
    /// Cost at the start and end of every stage.
    pub stage_costs: Vec<(CostBreakdown, CostBreakdown)>,
}

/// Stage stops once the dual norm drops below this fraction of its first value.
const STAGE_TOLERANCE: f64 = 1e-10;

/// Runs the gradient method over the ε schedule. `observer` sees every
/// iteration record as it is produced.
pub fn run_reconstruction(
    problem: &ReconProblem,
    params: &ReconParams,
    initial: &PhaseField,
    mut observer: impl FnMut(&IterationRecord),
) -> Result<ReconOutcome> {
    params.validate()?;
    let grid = problem.space().grid();
    let mut phase = PhaseField::new(grid, initial.tilde_v().to_vec(), initial.mask().to_vec())?;
    let all_zero = phase.tilde_v().iter().zip(phase.mask()).all(|(&t, &m)| m || t == 0.0);
    if all_zero {
        return Err(Error::Precondition(
            "initial phase vanishes on every free node; step 0 forbids this critical point of the functional"
                .into(),
        ));
    }

    let mut history = Vec::new();
    let mut stage_phases = Vec::new();
    let mut stage_iterations = Vec::new();
    let mut stage_costs = Vec::new();
    let mut iteration = 0;
    let wrap = |iteration: usize| move |e: Error| Error::Iteration { iteration, source: Box::new(e) };

    for (s, stage) in params.schedule.iter().enumerate() {
        let f = params.functional(stage.eps)?;
        let mut pack = problem.solve_states(&phase, &f, None).map_err(wrap(iteration + 1))?;
        let mut cost = problem.eval_cost(&phase, &f, pack.states());
        let start = cost;
        let mut step = StepState { step: params.armijo.initial_step };
        let mut first_norm: Option<f64> = None;
        let mut done = 0;
        for _ in 0..stage.iterations {
            let n = iteration + 1;
            let result = (|| -> Result<Option<(StepOutcome, f64)>> {
                problem.solve_adjoints(&mut pack, &f)?;
                let g = problem.assemble_gradient(&phase, &f, &pack)?;
                let d = problem.riesz_lift(&g, params.riesz_alpha, phase.mask())?;
                let norm = dual_pairing(&g, &d).max(0.0).sqrt();
                let first = *first_norm.get_or_insert(norm);
                if norm <= STAGE_TOLERANCE * first {
                    return Ok(None);
                }
                let out = problem.armijo_step(&phase, &f, &g, &d, (&cost, &pack), &params.armijo, &mut step)?;
                Ok(Some((out, norm)))
            })()
            .map_err(wrap(n))?;
            let Some((out, norm)) = result else { break };
            if out.converged {
                break;
            }
            iteration = n;
            done += 1;
            let record = IterationRecord {
                iteration,
                stage: s,
                eps: stage.eps,
                cost: out.cost,
                step: out.step,
                dual_norm: norm,
                reductions: out.reductions,
            };
            observer(&record);
            history.push(record);
            phase = out.phase;
            pack = out.pack;
            cost = out.cost;
        }
        stage_phases.push(phase.clone());
        stage_iterations.push(done);
        stage_costs.push((start, cost));
    }
    Ok(ReconOutcome { phase, history, stage_phases, stage_iterations, stage_costs })
}

mod common;

use common::{functional, problem, random_direction, random_phase, tight};
use pfrecon_core::fem::SolverOptions;
use pfrecon_core::grid::Grid;
use pfrecon_core::potentials::{well_prime, PotentialKind};
use pfrecon_core::reconstruction::{boundary_mask, Functional, PhaseField};

fn reduced(p: &pfrecon_core::reconstruction::ReconProblem, phase: &PhaseField, f: &Functional) -> f64 {
    p.reduced_cost(phase, f).unwrap().0.total()
}

fn shifted(grid: &Grid, phase: &PhaseField, d: &[f64], h: f64) -> PhaseField {
    let tv = phase.tilde_v().iter().zip(d).map(|(v, x)| v + h * x).collect();
    PhaseField::unconstrained(grid, tv, phase.mask().to_vec()).unwrap()
}

#[test]
fn zero_phase_is_a_critical_point() {
    let p = problem(6, SolverOptions::default());
    let grid = p.space().grid();
    let phase = PhaseField::constant(grid, 0.0, boundary_mask(grid)).unwrap();
    for kind in [PotentialKind::SingleWell, PotentialKind::DoubleWell] {
        let f = functional(kind, 0.05);
        let (_, mut pack) = p.reduced_cost(&phase, &f).unwrap();
        p.solve_adjoints(&mut pack, &f).unwrap();
        let g = p.assemble_gradient(&phase, &f, &pack).unwrap();
        assert!(g.iter().all(|&x| x.abs() < 1e-14), "{kind}");
    }
}

#[test]
fn adjoint_gradient_matches_state_sensitivities_per_node() {
    let p = problem(8, tight());
    let grid = p.space().grid();
    let phase = random_phase(grid, 3, 0.2, 0.8);
    for kind in [PotentialKind::SingleWell, PotentialKind::DoubleWell] {
        let f = functional(kind, 0.05);
        let (_, mut pack) = p.reduced_cost(&phase, &f).unwrap();
        p.solve_adjoints(&mut pack, &f).unwrap();
        let g = p.assemble_gradient(&phase, &f, &pack).unwrap();
        let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for j in (0..grid.node_count()).filter(|&j| !phase.mask()[j]) {
            let mut e = vec![0.0; grid.node_count()];
            e[j] = 1.0;
            let du = p.directional_derivative(&phase, &f, &pack, &e).unwrap();
            let rel = (du - g[j]).abs() / g[j].abs().max(1e-3 * scale);
            assert!(rel <= 1e-8, "{kind} node {j}: adjoint {} vs sensitivity {du}", g[j]);
        }
    }
}

#[test]
fn gradient_matches_central_differences() {
    let p = problem(16, tight());
    let grid = p.space().grid();
    let phase = random_phase(grid, 7, 0.2, 0.8);
    for kind in [PotentialKind::SingleWell, PotentialKind::DoubleWell] {
        let f = functional(kind, 0.05);
        let (_, mut pack) = p.reduced_cost(&phase, &f).unwrap();
        p.solve_adjoints(&mut pack, &f).unwrap();
        let g = p.assemble_gradient(&phase, &f, &pack).unwrap();
        for seed in 0..10 {
            let d = random_direction(grid, phase.mask(), 100 + seed);
            let h = 1e-5;
            let fd = (reduced(&p, &shifted(grid, &phase, &d, h), &f) - reduced(&p, &shifted(grid, &phase, &d, -h), &f)) / (2.0 * h);
            let ad: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
            assert!((fd - ad).abs() <= 1e-4 * ad.abs(), "{kind} direction {seed}: fd {fd} vs {ad}");
        }
    }
}

#[test]
fn explicit_terms_only_without_data_coupling() {
    let p = problem(6, SolverOptions::default());
    let grid = p.space().grid();
    let phase = random_phase(grid, 5, 0.1, 0.9);
    let mut f = functional(PotentialKind::DoubleWell, 0.1);
    f.a = 0.0;
    f.b = 0.0;
    let (_, mut pack) = p.reduced_cost(&phase, &f).unwrap();
    p.solve_adjoints(&mut pack, &f).unwrap();
    assert!(pack.adjoints().iter().all(|phi| phi.iter().all(|&x| x == 0.0)));
    // u ≠ 0 here, but with b = 0 and φ = 0 the coupling term drops out.
    let g = p.assemble_gradient(&phase, &f, &pack).unwrap();
    let kv = p.unit_stiffness().mul(phase.tilde_v());
    for j in 0..grid.node_count() {
        let expected = if phase.mask()[j] {
            0.0
        } else {
            f.well_weight() * -well_prime(f.potential, 1.0 - phase.tilde_v()[j]) * p.space().lumped_mass()[j]
                + 2.0 * f.eps() * kv[j]
        };
        assert!((g[j] - expected).abs() <= 1e-12 * expected.abs().max(1.0), "node {j}");
    }
}

#[test]
fn state_sensitivity_matches_finite_differences() {
    let p = problem(8, tight());
    let grid = p.space().grid();
    let phase = random_phase(grid, 9, 0.2, 0.8);
    let f = functional(PotentialKind::SingleWell, 0.05);
    let (_, pack) = p.reduced_cost(&phase, &f).unwrap();
    let d = random_direction(grid, phase.mask(), 1);
    let du = p.directional_state_derivative(&phase, &f, &pack, 0, &d).unwrap();
    let norm = du.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut errors = Vec::new();
    for h in [1e-2, 1e-3] {
        let up = p.solve_state(&shifted(grid, &phase, &d, h), &f, 0).unwrap();
        let dn = p.solve_state(&shifted(grid, &phase, &d, -h), &f, 0).unwrap();
        let err: f64 = (0..grid.node_count())
            .map(|j| ((up[j] - dn[j]) / (2.0 * h) - du[j]).powi(2))
            .sum::<f64>()
            .sqrt();
        errors.push(err / norm);
    }
    assert!(errors[1] < 1e-3, "{errors:?}");
    assert!(errors[1] < errors[0]);

    let zero = vec![0.0; grid.node_count()];
    assert!(p.directional_state_derivative(&phase, &f, &pack, 0, &zero).unwrap().iter().all(|&x| x == 0.0));
    let flat = PhaseField::constant(grid, 0.0, boundary_mask(grid)).unwrap();
    let (_, flat_pack) = p.reduced_cost(&flat, &f).unwrap();
    let u0 = p.directional_state_derivative(&flat, &f, &flat_pack, 1, &d).unwrap();
    assert!(u0.iter().all(|&x| x == 0.0));
}

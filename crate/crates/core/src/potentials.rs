//! Conductivity interpolation `ψ`, its ε-regularisation `ψ_ε`, and the
//! single- and double-well potentials.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};

/// Which well potential penalises the phase field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PotentialKind {
    /// `V(t) = (t − 1)² / 4`, vanishing only at 1. Used for cracks.
    SingleWell,
    /// `W(t) = 9 t² (t − 1)²`, vanishing at 0 and 1. Used for cavities.
    DoubleWell,
}

impl PotentialKind {
    pub fn label(self) -> &'static str {
        match self {
            PotentialKind::SingleWell => "single-well",
            PotentialKind::DoubleWell => "double-well",
        }
    }
}

impl fmt::Display for PotentialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PotentialKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single-well" | "single" => Ok(PotentialKind::SingleWell),
            "double-well" | "double" => Ok(PotentialKind::DoubleWell),
            other => Err(invalid(format!("unknown potential '{other}'"))),
        }
    }
}

/// The phase-field parameter ε, restricted to `(0, 1/2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseParams {
    eps: f64,
}

impl PhaseParams {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 0.5) {
            return Err(invalid(format!("phase-field parameter must lie in (0, 1/2], got {eps}")));
        }
        Ok(PhaseParams { eps })
    }

    pub fn eps(self) -> f64 {
        self.eps
    }
}

/// `ψ(t) = 3t² − 2t³` on `[0, 1]`, 0 below and 1 above.
pub fn psi(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        t * t * (3.0 - 2.0 * t)
    }
}

pub fn psi_prime(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        6.0 * t * (1.0 - t)
    }
}

/// `ψ_ε = (1 − ε²) ψ + ε²`, bounded in `[ε², 1]`.
pub fn psi_eps(t: f64, p: PhaseParams) -> f64 {
    let e2 = p.eps * p.eps;
    (1.0 - e2) * psi(t) + e2
}

pub fn psi_eps_prime(t: f64, p: PhaseParams) -> f64 {
    (1.0 - p.eps * p.eps) * psi_prime(t)
}

pub fn well(kind: PotentialKind, t: f64) -> f64 {
    match kind {
        PotentialKind::SingleWell => 0.25 * (t - 1.0) * (t - 1.0),
        PotentialKind::DoubleWell => {
            let s = t * (t - 1.0);
            9.0 * s * s
        }
    }
}

pub fn well_prime(kind: PotentialKind, t: f64) -> f64 {
    match kind {
        PotentialKind::SingleWell => 0.5 * (t - 1.0),
        PotentialKind::DoubleWell => 18.0 * t * (t - 1.0) * (2.0 * t - 1.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn psi_values() {
        assert_eq!(psi(0.5), 0.5);
        assert_eq!(psi(-3.0), 0.0);
        assert_eq!(psi(2.0), 1.0);
        assert_eq!(psi_prime(0.5), 1.5);
        assert_eq!(psi_prime(0.0), 0.0);
        assert_eq!(psi_prime(1.0), 0.0);
    }

    #[test]
    fn psi_eps_values() {
        let p = PhaseParams::new(0.1).unwrap();
        assert!((psi_eps(0.0, p) - 0.01).abs() < 1e-17);
        for eps in [0.5, 0.1, 1e-4] {
            assert_eq!(psi_eps(1.0, PhaseParams::new(eps).unwrap()), 1.0);
        }
        for t in [-0.2, 0.1, 0.37, 0.9, 1.4] {
            assert_eq!(psi_eps_prime(t, p), (1.0 - 0.01) * psi_prime(t));
        }
    }

    #[test]
    fn phase_params_bounds() {
        assert!(PhaseParams::new(0.0).is_err());
        assert!(PhaseParams::new(0.51).is_err());
        assert!(PhaseParams::new(0.5).is_ok());
    }

    #[test]
    fn well_values() {
        use PotentialKind::*;
        assert_eq!(well(SingleWell, 1.0), 0.0);
        assert_eq!(well(SingleWell, 0.0), 0.25);
        assert_eq!(well(DoubleWell, 0.0), 0.0);
        assert_eq!(well(DoubleWell, 1.0), 0.0);
        assert_eq!(well(DoubleWell, 0.5), 9.0 / 16.0);
        assert_eq!(well_prime(DoubleWell, 0.5), 0.0);
        assert_eq!(well_prime(SingleWell, 1.0), 0.0);
    }

    #[test]
    fn well_minima_on_fine_sample() {
        use PotentialKind::*;
        for k in 0..=3000 {
            let t = -1.0 + k as f64 * 1e-3;
            let v = well(SingleWell, t);
            let w = well(DoubleWell, t);
            assert!(v >= 0.0 && w >= 0.0);
            let at_one = (t - 1.0).abs() < 1e-12;
            let at_zero = t.abs() < 1e-12;
            assert_eq!(v == 0.0, at_one, "V at {t}");
            assert_eq!(w == 0.0, at_one || at_zero, "W at {t}");
        }
        // V(t) ≥ V(0) for t ≤ 0
        assert!((0..100).all(|k| well(SingleWell, -(k as f64) * 0.05) >= 0.25));
    }

    #[test]
    fn derivatives_match_central_differences() {
        let h = 1e-6;
        let p = PhaseParams::new(0.2).unwrap();
        for k in 0..=600 {
            let t = -1.0 + k as f64 * 0.005 + 1.3e-4;
            if t.abs() <= 1e-3 || (t - 1.0).abs() <= 1e-3 {
                continue;
            }
            let fd = |f: &dyn Fn(f64) -> f64| (f(t + h) - f(t - h)) / (2.0 * h);
            assert!((fd(&psi) - psi_prime(t)).abs() < 1e-6, "ψ' at {t}");
            assert!((fd(&|s| psi_eps(s, p)) - psi_eps_prime(t, p)).abs() < 1e-6);
            for kind in [PotentialKind::SingleWell, PotentialKind::DoubleWell] {
                let d = fd(&|s| well(kind, s));
                assert!((d - well_prime(kind, t)).abs() < 1e-6, "{kind} at {t}");
            }
        }
    }

    #[test]
    fn double_well_line_integral_is_one() {
        // Composite Gauss–Legendre (5 points) on 200 panels; √W = 3 t (1 − t) on [0, 1].
        let nodes = [
            0.0,
            -0.538_469_310_105_683_1,
            0.538_469_310_105_683_1,
            -0.906_179_845_938_664,
            0.906_179_845_938_664,
        ];
        let weights = [
            0.568_888_888_888_888_9,
            0.478_628_670_499_366_5,
            0.478_628_670_499_366_5,
            0.236_926_885_056_189_1,
            0.236_926_885_056_189_1,
        ];
        let panels = 200;
        let h = 1.0 / panels as f64;
        let mut integral = 0.0;
        for k in 0..panels {
            let mid = (k as f64 + 0.5) * h;
            for (x, w) in nodes.iter().zip(weights) {
                let t = mid + 0.5 * h * x;
                integral += 0.5 * h * w * well(PotentialKind::DoubleWell, t).sqrt();
            }
        }
        assert!((2.0 * integral - 1.0).abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn psi_is_monotone_and_bounded(a in -2.0f64..3.0, b in -2.0f64..3.0, eps in 1e-6f64..0.5) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(psi(hi) >= psi(lo));
            let p = PhaseParams::new(eps).unwrap();
            let v = psi_eps(a, p);
            prop_assert!(v >= eps * eps && v <= 1.0);
        }
    }
}

//! Synthetic Cauchy data: a jittered fine mesh with insulating defects,
//! forward solves per electrode pair, sampling at measurement points and
//! seeded Gaussian noise.

mod defects;
mod flux;
mod model;
mod noise;

pub use defects::DefectSpec;
pub use flux::{plus_flux, ElectrodePair, PairFlux, ProfileShape, SideProfile};
pub use model::{build_fine_model, simulate_measurement, FineModel};
pub use noise::{add_noise, NoiseSpec};

use crate::error::{invalid, Error, Result};
use crate::grid::{Side, SideSet};

/// Samples of flux `f` and trace `g` along one side, by side coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct SideSamples {
    pub side: Side,
    pub coords: Vec<f64>,
    pub flux: Vec<f64>,
    pub trace: Vec<f64>,
}

/// One Cauchy pair on γ with its electrode pair and noise metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct CauchyDataset {
    pair: ElectrodePair,
    samples: Vec<SideSamples>,
    noise: NoiseSpec,
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}

impl CauchyDataset {
    /// Checks the sample layout; samples are put in side order. The
    /// zero-mean invariants are not enforced here, see [`Self::check_invariants`].
    pub fn new(pair: ElectrodePair, mut samples: Vec<SideSamples>, noise: NoiseSpec) -> Result<Self> {
        if samples.is_empty() {
            return Err(invalid("dataset has no sample sides"));
        }
        samples.sort_by_key(|s| s.side as u8);
        if samples.windows(2).any(|w| w[0].side == w[1].side) {
            return Err(invalid("dataset lists a side twice"));
        }
        for s in &samples {
            let n = s.coords.len();
            if n < 2 || s.flux.len() != n || s.trace.len() != n {
                return Err(invalid(format!("side {} needs at least 2 aligned samples", s.side)));
            }
            if s.coords.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(invalid(format!("side {} coordinates must increase strictly", s.side)));
            }
            if s.coords.iter().chain(&s.flux).chain(&s.trace).any(|v| !v.is_finite()) {
                return Err(invalid(format!("side {} has non-finite samples", s.side)));
            }
        }
        let ds = CauchyDataset { pair, samples, noise };
        for side in [pair.positive, pair.negative] {
            if ds.side(side).is_none() {
                return Err(invalid(format!("electrode side {side} is not part of γ")));
            }
        }
        Ok(ds)
    }

    pub fn pair(&self) -> ElectrodePair {
        self.pair
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    pub fn samples(&self) -> &[SideSamples] {
        &self.samples
    }

    pub fn sides(&self) -> SideSet {
        let list: Vec<Side> = self.samples.iter().map(|s| s.side).collect();
        SideSet::from_sides(&list)
    }

    pub fn side(&self, side: Side) -> Option<&SideSamples> {
        self.samples.iter().find(|s| s.side == side)
    }

    /// Total length covered by the samples.
    pub fn length(&self) -> f64 {
        self.samples.iter().map(|s| s.coords[s.coords.len() - 1] - s.coords[0]).sum()
    }

    /// Trapezoidal `∫_γ f`.
    pub fn flux_integral(&self) -> f64 {
        self.samples.iter().map(|s| trapezoid(&s.coords, &s.flux)).sum()
    }

    /// Trapezoidal γ-mean of `g`.
    pub fn trace_mean(&self) -> f64 {
        self.samples.iter().map(|s| trapezoid(&s.coords, &s.trace)).sum::<f64>() / self.length()
    }

    pub(crate) fn recenter_trace(&mut self) {
        let m = self.trace_mean();
        self.samples.iter_mut().flat_map(|s| s.trace.iter_mut()).for_each(|g| *g -= m);
    }

    pub(crate) fn rebalance_flux(&mut self) {
        let m = self.flux_integral() / self.length();
        self.samples.iter_mut().flat_map(|s| s.flux.iter_mut()).for_each(|f| *f -= m);
    }

    /// Verifies `∫_γ f = 0` and `mean_γ g = 0` up to `tol`, relative to the
    /// size of the data.
    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        let abs_f: f64 = self
            .samples
            .iter()
            .map(|s| trapezoid(&s.coords, &s.flux.iter().map(|v| v.abs()).collect::<Vec<_>>()))
            .sum();
        let fi = self.flux_integral();
        if fi.abs() > tol * abs_f.max(1.0) {
            return Err(Error::Consistency(format!("flux integrates to {fi:e} over γ")));
        }
        let scale = self.samples.iter().flat_map(|s| &s.trace).fold(1.0f64, |m, v| m.max(v.abs()));
        let gm = self.trace_mean();
        if gm.abs() > tol * scale {
            return Err(Error::Consistency(format!("trace has γ-mean {gm:e}")));
        }
        Ok(())
    }
}

/// Piecewise-linear interpolation through `(xs, ys)`, held constant beyond
/// the ends. `xs` must be increasing.
pub fn interpolate_linear(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let k = xs.partition_point(|&p| p <= x).clamp(1, n - 1);
    let t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
    ys[k - 1] + t * (ys[k] - ys[k - 1])
}

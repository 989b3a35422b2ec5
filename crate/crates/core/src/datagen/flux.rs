use std::fmt;

use crate::error::{invalid, Result};
use crate::fem::BoundaryProfile;
use crate::grid::{Grid, Side};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileShape {
    /// Full amplitude on the central third of the support, half on the
    /// outer thirds.
    Plus,
    Flat,
}

impl ProfileShape {
    pub fn label(self) -> &'static str {
        match self {
            ProfileShape::Plus => "plus",
            ProfileShape::Flat => "flat",
        }
    }
}

impl std::str::FromStr for ProfileShape {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plus" => Ok(ProfileShape::Plus),
            "flat" => Ok(ProfileShape::Flat),
            other => Err(invalid(format!("unknown profile shape '{other}'"))),
        }
    }
}

/// A compactly supported current density on one side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SideProfile {
    side: Side,
    start: f64,
    end: f64,
    amplitude: f64,
    shape: ProfileShape,
}

impl SideProfile {
    /// Support `[center − width/2, center + width/2]` in fractions of the
    /// side length, which must stay within the side.
    pub fn new(
        side: Side,
        side_length: f64,
        center: f64,
        width: f64,
        amplitude: f64,
        shape: ProfileShape,
    ) -> Result<Self> {
        if !(width > 0.0 && width <= 1.0) {
            return Err(invalid(format!("electrode width must lie in (0, 1], got {width}")));
        }
        let (lo, hi) = (center - 0.5 * width, center + 0.5 * width);
        if lo < -1e-12 || hi > 1.0 + 1e-12 {
            return Err(invalid(format!(
                "electrode support [{lo}, {hi}] overflows side {side}"
            )));
        }
        if !amplitude.is_finite() {
            return Err(invalid("electrode amplitude must be finite"));
        }
        Ok(SideProfile {
            side,
            start: lo.max(0.0) * side_length,
            end: hi.min(1.0) * side_length,
            amplitude,
            shape,
        })
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn value_at(&self, s: f64) -> f64 {
        if s < self.start || s > self.end {
            return 0.0;
        }
        match self.shape {
            ProfileShape::Flat => self.amplitude,
            ProfileShape::Plus => {
                let third = (self.end - self.start) / 3.0;
                if s >= self.start + third && s <= self.end - third {
                    self.amplitude
                } else {
                    0.5 * self.amplitude
                }
            }
        }
    }

    pub fn cut_points(&self) -> Vec<f64> {
        let third = (self.end - self.start) / 3.0;
        match self.shape {
            ProfileShape::Flat => vec![self.start, self.end],
            ProfileShape::Plus => vec![self.start, self.start + third, self.end - third, self.end],
        }
    }

    /// `∫ profile ds`.
    pub fn integral(&self) -> f64 {
        let len = self.end - self.start;
        match self.shape {
            ProfileShape::Flat => self.amplitude * len,
            ProfileShape::Plus => self.amplitude * len * 2.0 / 3.0,
        }
    }
}

/// Plus-shaped profile with fractions relative to the side length.
pub fn plus_flux(side: Side, side_length: f64, center: f64, width: f64, amplitude: f64) -> Result<SideProfile> {
    SideProfile::new(side, side_length, center, width, amplitude, ProfileShape::Plus)
}

/// Current injected on `positive` and withdrawn on `negative`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ElectrodePair {
    pub positive: Side,
    pub negative: Side,
}

impl ElectrodePair {
    pub fn new(positive: Side, negative: Side) -> Result<Self> {
        if positive == negative {
            return Err(invalid(format!("electrode pair uses side {positive} twice")));
        }
        Ok(ElectrodePair { positive, negative })
    }
}

impl fmt::Display for ElectrodePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.positive, self.negative)
    }
}

/// The two opposite-sign profiles of an electrode pair. The negative
/// amplitude is scaled by the side-length ratio so the net current is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairFlux {
    pair: ElectrodePair,
    positive: SideProfile,
    negative: SideProfile,
}

impl PairFlux {
    pub fn new(grid: &Grid, pair: ElectrodePair, width: f64, amplitude: f64, shape: ProfileShape) -> Result<Self> {
        let lp = grid.side_length(pair.positive);
        let ln = grid.side_length(pair.negative);
        let positive = SideProfile::new(pair.positive, lp, 0.5, width, amplitude, shape)?;
        let negative = SideProfile::new(pair.negative, ln, 0.5, width, -amplitude * lp / ln, shape)?;
        Ok(PairFlux { pair, positive, negative })
    }

    pub fn pair(&self) -> ElectrodePair {
        self.pair
    }

    /// Net current; zero up to rounding.
    pub fn integral(&self) -> f64 {
        self.positive.integral() + self.negative.integral()
    }
}

impl BoundaryProfile for PairFlux {
    fn value(&self, side: Side, s: f64) -> f64 {
        [self.positive, self.negative].iter().filter(|p| p.side == side).map(|p| p.value_at(s)).sum()
    }

    fn breakpoints(&self, side: Side) -> Vec<f64> {
        [self.positive, self.negative].iter().filter(|p| p.side == side).flat_map(|p| p.cut_points()).collect()
    }
}

impl BoundaryProfile for SideProfile {
    fn value(&self, side: Side, s: f64) -> f64 {
        if side == self.side {
            self.value_at(s)
        } else {
            0.0
        }
    }

    fn breakpoints(&self, side: Side) -> Vec<f64> {
        if side == self.side {
            self.cut_points()
        } else {
            Vec::new()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{EdgeFlux, FemSpace};

    #[test]
    fn plus_shape_values() {
        let p = plus_flux(Side::Bottom, 3.0, 0.5, 0.5, 2.0).unwrap();
        // support [0.75, 2.25], thirds at 1.25 and 1.75
        assert_eq!(p.value_at(0.5), 0.0);
        assert_eq!(p.value_at(1.0), 1.0);
        assert_eq!(p.value_at(1.5), 2.0);
        assert_eq!(p.value_at(2.0), 1.0);
        assert_eq!(p.value_at(2.5), 0.0);
        assert!((p.integral() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn overflow_rejected() {
        assert!(plus_flux(Side::Left, 1.0, 0.9, 0.3, 1.0).is_err());
        assert!(plus_flux(Side::Left, 1.0, 0.5, 0.0, 1.0).is_err());
        assert!(plus_flux(Side::Left, 1.0, 0.55, 0.3, 1.0).is_ok());
    }

    #[test]
    fn pair_balances_on_unequal_sides() {
        let g = Grid::new(8, 4, 2.0, 1.0).unwrap();
        let pair = ElectrodePair::new(Side::Left, Side::Bottom).unwrap();
        let flux = PairFlux::new(&g, pair, 0.4, 1.0, ProfileShape::Plus).unwrap();
        assert!(flux.integral().abs() < 1e-15);
        let load = FemSpace::new(g).assemble_profile_load(&flux);
        assert!(load.iter().sum::<f64>().abs() < 1e-14);
        assert!(ElectrodePair::new(Side::Top, Side::Top).is_err());
    }

    #[test]
    fn flat_full_side_matches_edge_load() {
        let g = Grid::new(2, 2, 1.0, 1.0).unwrap();
        let space = FemSpace::new(g.clone());
        let p = SideProfile::new(Side::Bottom, 1.0, 0.5, 1.0, 1.0, ProfileShape::Flat).unwrap();
        let a = space.assemble_profile_load(&p);
        let b = space.assemble_neumann_load(&EdgeFlux::from_fn(&g, |s, _| f64::from(u8::from(s == Side::Bottom))));
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-15);
        }
    }
}

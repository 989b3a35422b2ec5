use crate::error::{invalid, Error, Result};

/// Insulating defects: crack polylines and cavity polygons, all strictly
/// inside the rectangle.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DefectSpec {
    pub cracks: Vec<Vec<[f64; 2]>>,
    pub cavities: Vec<Vec<[f64; 2]>>,
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn on_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

/// Closed segments `[p1, p2]` and `[q1, q2]` share a point.
pub(crate) fn segments_intersect(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(p1, q1, q2))
        || (d2 == 0.0 && on_segment(p2, q1, q2))
        || (d3 == 0.0 && on_segment(q1, p1, p2))
        || (d4 == 0.0 && on_segment(q2, p1, p2))
}

fn point_in_triangle(p: [f64; 2], t: [[f64; 2]; 3]) -> bool {
    let s = [cross(t[0], t[1], p), cross(t[1], t[2], p), cross(t[2], t[0], p)];
    let neg = s.iter().any(|&v| v < 0.0);
    let pos = s.iter().any(|&v| v > 0.0);
    !(neg && pos)
}

/// Closed segment meets closed triangle.
pub(crate) fn segment_meets_triangle(a: [f64; 2], b: [f64; 2], t: [[f64; 2]; 3]) -> bool {
    point_in_triangle(a, t)
        || point_in_triangle(b, t)
        || (0..3).any(|k| segments_intersect(a, b, t[k], t[(k + 1) % 3]))
}

/// Even-odd ray test.
pub(crate) fn point_in_polygon(p: [f64; 2], poly: &[[f64; 2]]) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

pub(crate) fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    0.5 * (0..n).map(|i| cross([0.0, 0.0], poly[i], poly[(i + 1) % n])).sum::<f64>()
}

impl DefectSpec {
    pub fn is_empty(&self) -> bool {
        self.cracks.is_empty() && self.cavities.is_empty()
    }

    /// Shape checks plus strict clearance from the boundary of
    /// `[0, width] × [0, height]`.
    pub fn validate(&self, width: f64, height: f64) -> Result<()> {
        for (k, c) in self.cracks.iter().enumerate() {
            if c.len() < 2 {
                return Err(invalid(format!("crack {k} needs at least 2 vertices")));
            }
        }
        for (k, poly) in self.cavities.iter().enumerate() {
            if poly.len() < 3 {
                return Err(invalid(format!("cavity {k} needs at least 3 vertices")));
            }
            if !(polygon_area(poly).abs() > 0.0) {
                return Err(invalid(format!("cavity {k} has zero area")));
            }
            let n = poly.len();
            for i in 0..n {
                for j in (i + 1)..n {
                    let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                    if !adjacent
                        && segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n])
                    {
                        return Err(invalid(format!("cavity {k} is self-intersecting")));
                    }
                }
            }
        }
        let all = self.cracks.iter().chain(&self.cavities).flatten();
        for p in all {
            if !p.iter().all(|v| v.is_finite()) {
                return Err(invalid("defect vertex is not finite"));
            }
            if !(p[0] > 0.0 && p[0] < width && p[1] > 0.0 && p[1] < height) {
                return Err(Error::Clearance(format!(
                    "vertex ({}, {}) is not strictly inside the domain",
                    p[0], p[1]
                )));
            }
        }
        Ok(())
    }

    /// Whether a closed triangle counts as defect: it meets a crack, or its
    /// centroid lies in a cavity.
    pub fn marks_triangle(&self, t: [[f64; 2]; 3]) -> bool {
        let hits_crack = self
            .cracks
            .iter()
            .any(|c| c.windows(2).any(|s| segment_meets_triangle(s[0], s[1], t)));
        if hits_crack {
            return true;
        }
        let centroid = [(t[0][0] + t[1][0] + t[2][0]) / 3.0, (t[0][1] + t[1][1] + t[2][1]) / 3.0];
        self.cavities.iter().any(|poly| point_in_polygon(centroid, poly))
    }
}

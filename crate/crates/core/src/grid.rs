//! Structured triangulations of a rectangle and nodal/cell field containers.
//!
//! Nodes are numbered row-major from the bottom-left corner, node `(i, j)`
//! sitting at index `j * (nx + 1) + i`. Every rectangle cell is split along
//! its lower-left to upper-right diagonal into a lower-right and an
//! upper-left triangle, both listed counter-clockwise.

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};

/// One side of the rectangular domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Bottom, Side::Right, Side::Top, Side::Left];

    pub fn label(self) -> &'static str {
        match self {
            Side::Bottom => "bottom",
            Side::Right => "right",
            Side::Top => "top",
            Side::Left => "left",
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }

    /// Whether the side runs along the x axis.
    pub fn is_horizontal(self) -> bool {
        matches!(self, Side::Bottom | Side::Top)
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bottom" | "down" => Ok(Side::Bottom),
            "right" => Ok(Side::Right),
            "top" | "up" => Ok(Side::Top),
            "left" => Ok(Side::Left),
            other => Err(invalid(format!("unknown side label '{other}'"))),
        }
    }
}

/// A subset of the four rectangle sides.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct SideSet(u8);

impl SideSet {
    pub const EMPTY: SideSet = SideSet(0);
    pub const ALL: SideSet = SideSet(0b1111);

    pub fn from_sides(sides: &[Side]) -> Self {
        SideSet(sides.iter().fold(0, |acc, s| acc | s.bit()))
    }

    pub fn contains(self, side: Side) -> bool {
        self.0 & side.bit() != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn insert(&mut self, side: Side) {
        self.0 |= side.bit();
    }

    /// Sides in canonical order (bottom, right, top, left).
    pub fn sides(self) -> impl Iterator<Item = Side> {
        Side::ALL.into_iter().filter(move |s| self.contains(*s))
    }
}

impl fmt::Debug for SideSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.sides()).finish()
    }
}

impl fmt::Display for SideSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels: Vec<_> = self.sides().map(Side::label).collect();
        f.write_str(&labels.join("+"))
    }
}

/// A boundary edge. `nodes[0]` has the smaller side coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    width: f64,
    height: f64,
    nodes: Vec<[f64; 2]>,
    cells: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
}

impl Grid {
    /// Builds the regular triangulation of `[0, width] x [0, height]` with
    /// `nx * ny` rectangle cells.
    pub fn new(nx: usize, ny: usize, width: f64, height: f64) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(invalid(format!("cell counts must be positive, got {nx}x{ny}")));
        }
        if !(width > 0.0 && width.is_finite() && height > 0.0 && height.is_finite()) {
            return Err(invalid(format!(
                "extents must be positive and finite, got {width}x{height}"
            )));
        }
        let hx = width / nx as f64;
        let hy = height / ny as f64;
        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            // Pin the last row/column to the exact extents.
            let y = if j == ny { height } else { j as f64 * hy };
            for i in 0..=nx {
                let x = if i == nx { width } else { i as f64 * hx };
                nodes.push([x, y]);
            }
        }
        let idx = |i: usize, j: usize| j * (nx + 1) + i;
        let mut cells = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (n00, n10, n01, n11) = (idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1));
                cells.push([n00, n10, n11]);
                cells.push([n00, n11, n01]);
            }
        }
        let mut boundary_edges = Vec::with_capacity(2 * (nx + ny));
        for side in Side::ALL {
            let count = if side.is_horizontal() { nx } else { ny };
            for k in 0..count {
                let nodes = match side {
                    Side::Bottom => [idx(k, 0), idx(k + 1, 0)],
                    Side::Top => [idx(k, ny), idx(k + 1, ny)],
                    Side::Left => [idx(0, k), idx(0, k + 1)],
                    Side::Right => [idx(nx, k), idx(nx, k + 1)],
                };
                boundary_edges.push(BoundaryEdge { nodes, side });
            }
        }
        Ok(Grid { nx, ny, width, height, nodes, cells, boundary_edges })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    /// Cell spacing `(hx, hy)` of the undisplaced grid.
    pub fn spacing(&self) -> (f64, f64) {
        (self.width / self.nx as f64, self.height / self.ny as f64)
    }

    pub fn diameter(&self) -> f64 {
        self.width.hypot(self.height)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    pub fn is_boundary_node(&self, node: usize) -> bool {
        let (i, j) = (node % (self.nx + 1), node / (self.nx + 1));
        i == 0 || j == 0 || i == self.nx || j == self.ny
    }

    /// Signed area of a cell (positive for counter-clockwise ordering).
    pub fn cell_area(&self, cell: usize) -> f64 {
        let [a, b, c] = self.cells[cell].map(|n| self.nodes[n]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn cell_centroid(&self, cell: usize) -> [f64; 2] {
        let [a, b, c] = self.cells[cell].map(|n| self.nodes[n]);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn side_length(&self, side: Side) -> f64 {
        if side.is_horizontal() {
            self.width
        } else {
            self.height
        }
    }

    /// Position of a boundary point along `side`: x on bottom/top, y on left/right.
    pub fn side_coordinate(&self, side: Side, point: [f64; 2]) -> f64 {
        if side.is_horizontal() {
            point[0]
        } else {
            point[1]
        }
    }

    /// Physical point at coordinate `s` along `side`.
    pub fn side_point(&self, side: Side, s: f64) -> [f64; 2] {
        match side {
            Side::Bottom => [s, 0.0],
            Side::Top => [s, self.height],
            Side::Left => [0.0, s],
            Side::Right => [self.width, s],
        }
    }

    pub fn edge_length(&self, edge: &BoundaryEdge) -> f64 {
        let [a, b] = edge.nodes.map(|n| self.nodes[n]);
        (b[0] - a[0]).hypot(b[1] - a[1])
    }

    /// Nodes along a side ordered by increasing side coordinate, corners included.
    pub fn side_nodes(&self, side: Side) -> Vec<usize> {
        let mut out = Vec::new();
        for e in self.boundary_edges.iter().filter(|e| e.side == side) {
            if out.is_empty() {
                out.push(e.nodes[0]);
            }
            out.push(e.nodes[1]);
        }
        out
    }

    /// Edges on the requested sides, ordered by side and then by arclength.
    pub fn boundary_side_edges(&self, sides: SideSet) -> Result<Vec<BoundaryEdge>> {
        if sides.is_empty() {
            return Err(invalid("side set must not be empty"));
        }
        Ok(self
            .boundary_edges
            .iter()
            .filter(|e| sides.contains(e.side))
            .copied()
            .collect())
    }

    /// Returns a copy whose interior nodes are moved by `offset(node)`.
    ///
    /// Boundary nodes never move. Fails if any triangle loses its positive
    /// orientation.
    pub fn displace_interior(&self, mut offset: impl FnMut(usize) -> [f64; 2]) -> Result<Grid> {
        let mut out = self.clone();
        for n in 0..out.nodes.len() {
            if !self.is_boundary_node(n) {
                let d = offset(n);
                out.nodes[n][0] += d[0];
                out.nodes[n][1] += d[1];
            }
        }
        if let Some(bad) = (0..out.cell_count()).find(|&c| out.cell_area(c) <= 0.0) {
            return Err(invalid(format!("displacement inverts cell {bad}")));
        }
        Ok(out)
    }

    /// Arithmetic mean of the vertex values on every triangle, which is the
    /// exact L2 projection of a P1 function onto piecewise constants.
    pub fn p0_project(&self, field: &[f64]) -> CellField {
        debug_assert_eq!(field.len(), self.node_count());
        CellField(
            self.cells
                .iter()
                .map(|&[a, b, c]| (field[a] + field[b] + field[c]) / 3.0)
                .collect(),
        )
    }
}

/// Real values per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField(pub(crate) Vec<f64>);

impl NodalField {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(invalid(format!(
                "nodal field has {} values, grid has {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("nodal value {i} is not finite")));
        }
        Ok(NodalField(values))
    }

    pub fn zeros(grid: &Grid) -> Self {
        NodalField(vec![0.0; grid.node_count()])
    }

    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        NodalField(grid.nodes().iter().map(|&p| f(p)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for NodalField {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Real values per triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct CellField(pub(crate) Vec<f64>);

impl CellField {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(invalid(format!(
                "cell field has {} values, grid has {} cells",
                values.len(),
                grid.cell_count()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("cell value {i} is not finite")));
        }
        Ok(CellField(values))
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        CellField(vec![value; grid.cell_count()])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for CellField {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn unit_square_counts() {
        let g = Grid::new(1, 1, 1.0, 1.0).unwrap();
        assert_eq!(g.node_count(), 4);
        assert_eq!(g.cell_count(), 2);
        let area: f64 = (0..g.cell_count()).map(|c| g.cell_area(c)).sum();
        assert_eq!(area, 1.0);

        let g = Grid::new(2, 2, 1.0, 1.0).unwrap();
        assert_eq!(g.node_count(), 9);
        assert_eq!(g.cell_count(), 8);
        assert_eq!(g.boundary_edges().len(), 8);
    }

    #[test]
    fn rejects_degenerate_dimensions() {
        assert!(Grid::new(0, 1, 1.0, 1.0).is_err());
        assert!(Grid::new(1, 0, 1.0, 1.0).is_err());
        assert!(Grid::new(1, 1, 0.0, 1.0).is_err());
        assert!(Grid::new(1, 1, 1.0, -2.0).is_err());
    }

    #[test]
    fn area_and_perimeter_identities() {
        for (nx, ny, w, h) in [(3, 5, 2.0, 0.7), (16, 16, 1.0, 1.0), (7, 2, 0.3, 4.0)] {
            let g = Grid::new(nx, ny, w, h).unwrap();
            let area: f64 = (0..g.cell_count()).map(|c| g.cell_area(c)).sum();
            assert!((area - w * h).abs() <= 1e-12 * w * h);
            assert!((0..g.cell_count()).all(|c| g.cell_area(c) > 0.0));
            let perim: f64 = g.boundary_edges().iter().map(|e| g.edge_length(e)).sum();
            assert!((perim - 2.0 * (w + h)).abs() <= 1e-12 * 2.0 * (w + h));
        }
    }

    #[test]
    fn edges_are_conforming() {
        let g = Grid::new(4, 3, 1.0, 1.0).unwrap();
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for &[a, b, c] in g.cells() {
            for (p, q) in [(a, b), (b, c), (c, a)] {
                *count.entry((p.min(q), p.max(q))).or_default() += 1;
            }
        }
        let boundary: Vec<_> = g
            .boundary_edges()
            .iter()
            .map(|e| (e.nodes[0].min(e.nodes[1]), e.nodes[0].max(e.nodes[1])))
            .collect();
        for (edge, n) in &count {
            let expected = if boundary.contains(edge) { 1 } else { 2 };
            assert_eq!(*n, expected, "edge {edge:?}");
        }
        assert_eq!(boundary.len(), 2 * (4 + 3));
    }

    #[test]
    fn boundary_edges_lie_on_their_side() {
        let g = Grid::new(3, 4, 1.5, 2.0).unwrap();
        for e in g.boundary_edges() {
            for n in e.nodes {
                let [x, y] = g.nodes()[n];
                let on = match e.side {
                    Side::Bottom => y == 0.0,
                    Side::Top => y == 2.0,
                    Side::Left => x == 0.0,
                    Side::Right => x == 1.5,
                };
                assert!(on, "{e:?}");
            }
            let [a, b] = e.nodes.map(|n| g.side_coordinate(e.side, g.nodes()[n]));
            assert!(a < b);
        }
    }

    #[test]
    fn side_edge_selection() {
        let g = Grid::new(2, 2, 1.0, 1.0).unwrap();
        let bottom = g.boundary_side_edges(SideSet::from_sides(&[Side::Bottom])).unwrap();
        assert_eq!(bottom.len(), 2);
        let len: f64 = bottom.iter().map(|e| g.edge_length(e)).sum();
        assert_eq!(len, 1.0);
        assert_eq!(g.boundary_side_edges(SideSet::ALL).unwrap().len(), 8);
        assert!(g.boundary_side_edges(SideSet::EMPTY).is_err());
    }

    #[test]
    fn p0_projection_of_linear_field() {
        let g = Grid::new(1, 1, 1.0, 1.0).unwrap();
        let x = NodalField::from_fn(&g, |p| p[0]);
        let cells = g.p0_project(&x);
        for (c, &val) in cells.iter().enumerate() {
            let mean = g.cells()[c].iter().map(|&n| g.nodes()[n][0]).sum::<f64>() / 3.0;
            assert_eq!(val, mean);
        }
        let ones = NodalField::from_fn(&g, |_| 1.0);
        assert!(g.p0_project(&ones).iter().all(|&v| v == 1.0));
    }

    #[test]
    fn side_labels_round_trip() {
        for s in Side::ALL {
            assert_eq!(s.label().parse::<Side>().unwrap(), s);
        }
        assert_eq!("up".parse::<Side>().unwrap(), Side::Top);
        assert!("middle".parse::<Side>().is_err());
        let set = SideSet::from_sides(&[Side::Left, Side::Bottom]);
        assert_eq!(set.sides().collect::<Vec<_>>(), vec![Side::Bottom, Side::Left]);
    }
}

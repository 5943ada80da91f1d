//! Grid-independent description of supports and loads.
//!
//! Positions along an edge are fractions in `[0, 1]`, measured from the
//! bottom (vertical edges) or the left (horizontal edges), so one load case
//! can be placed on the optimization grid and on any refinement of it.

use crate::error::{Error, Result};
use crate::grid::GridSpec;

use super::{BoundaryConditions, DofMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X = 0,
    Y = 1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Edge {
    Left,
    Right,
    Bottom,
    Top,
}

/// Zero displacement along `axis` for every node of an edge segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Support {
    pub edge: Edge,
    pub from: f64,
    pub to: f64,
    pub axis: Axis,
}

/// Zero displacement along `axis` at the lattice node nearest to the point
/// `(x, y)`, given as fractions of the domain extents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pin {
    pub x: f64,
    pub y: f64,
    pub axis: Axis,
}

/// Uniform line load (force per unit edge length) on an edge segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Traction {
    pub edge: Edge,
    pub from: f64,
    pub to: f64,
    pub fx: f64,
    pub fy: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoadCase {
    pub supports: Vec<Support>,
    pub pins: Vec<Pin>,
    pub tractions: Vec<Traction>,
}

const FRACTION_SLACK: f64 = 1e-9;

fn inside(s: f64, from: f64, to: f64) -> bool {
    s >= from - FRACTION_SLACK && s <= to + FRACTION_SLACK
}

/// Number of cells along an edge.
fn cells_along(grid: &GridSpec, edge: Edge) -> usize {
    match edge {
        Edge::Left | Edge::Right => grid.ny(),
        Edge::Bottom | Edge::Top => grid.nx(),
    }
}

/// Lattice coordinates of the `k`-th node along an edge.
fn edge_node(grid: &GridSpec, edge: Edge, k: usize) -> (usize, usize) {
    match edge {
        Edge::Left => (0, k),
        Edge::Right => (grid.nx(), k),
        Edge::Bottom => (k, 0),
        Edge::Top => (k, grid.ny()),
    }
}

/// Cell touching the `k`-th segment of an edge.
fn edge_cell(grid: &GridSpec, edge: Edge, k: usize) -> usize {
    match edge {
        Edge::Left => grid.index(0, k),
        Edge::Right => grid.index(grid.nx() - 1, k),
        Edge::Bottom => grid.index(k, 0),
        Edge::Top => grid.index(k, grid.ny() - 1),
    }
}

impl LoadCase {
    /// Right half of a plate with a vertical crack running down from the top
    /// to mid-height along the symmetry line.
    ///
    /// The symmetry line is the left edge: rollers hold its lower half, the
    /// upper half is the free crack face. The right edge carries a uniform
    /// unit line load pulling outward, and one pin at the bottom-left corner
    /// removes vertical translation.
    pub fn cracked_plate() -> Self {
        Self {
            supports: vec![Support {
                edge: Edge::Left,
                from: 0.0,
                to: 0.5,
                axis: Axis::X,
            }],
            pins: vec![Pin {
                x: 0.0,
                y: 0.0,
                axis: Axis::Y,
            }],
            tractions: vec![Traction {
                edge: Edge::Right,
                from: 0.0,
                to: 1.0,
                fx: 1.0,
                fy: 0.0,
            }],
        }
    }

    /// Uniaxial tension: rollers on the bottom edge, horizontal pin at the
    /// bottom-left corner, uniform upward line load `q` on the top edge.
    pub fn patch_tension(q: f64) -> Self {
        Self {
            supports: vec![Support {
                edge: Edge::Bottom,
                from: 0.0,
                to: 1.0,
                axis: Axis::Y,
            }],
            pins: vec![Pin {
                x: 0.0,
                y: 0.0,
                axis: Axis::X,
            }],
            tractions: vec![Traction {
                edge: Edge::Top,
                from: 0.0,
                to: 1.0,
                fx: 0.0,
                fy: q,
            }],
        }
    }

    fn validate(&self) -> Result<()> {
        let segs = self
            .supports
            .iter()
            .map(|s| (s.from, s.to))
            .chain(self.tractions.iter().map(|t| (t.from, t.to)));
        for (from, to) in segs {
            if !(0.0 <= from && from <= to && to <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "edge segment [{from}, {to}] is not inside [0, 1]"
                )));
            }
        }
        for p in &self.pins {
            if !((0.0..=1.0).contains(&p.x) && (0.0..=1.0).contains(&p.y)) {
                return Err(Error::InvalidArgument(format!(
                    "pin at ({}, {}) is outside the domain",
                    p.x, p.y
                )));
            }
        }
        Ok(())
    }

    fn pin_node(grid: &GridSpec, p: &Pin) -> (usize, usize) {
        (
            (p.x * grid.nx() as f64).round() as usize,
            (p.y * grid.ny() as f64).round() as usize,
        )
    }

    /// Constraints and consistent nodal forces on `grid`.
    pub fn materialize(&self, grid: &GridSpec) -> Result<BoundaryConditions> {
        self.validate()?;
        let map = DofMap::new(grid);
        let mut fixed = Vec::new();
        for s in &self.supports {
            let n = cells_along(grid, s.edge);
            for k in 0..=n {
                if inside(k as f64 / n as f64, s.from, s.to) {
                    let (i, j) = edge_node(grid, s.edge, k);
                    fixed.push(map.dof(i, j, s.axis));
                }
            }
        }
        for p in &self.pins {
            let (i, j) = Self::pin_node(grid, p);
            fixed.push(map.dof(i, j, p.axis));
        }
        let mut force = vec![0.0; map.n_dofs()];
        for t in &self.tractions {
            let n = cells_along(grid, t.edge);
            let len = match t.edge {
                Edge::Left | Edge::Right => grid.hy(),
                Edge::Bottom | Edge::Top => grid.hx(),
            };
            for k in 0..n {
                if inside((k as f64 + 0.5) / n as f64, t.from, t.to) {
                    for end in [k, k + 1] {
                        let (i, j) = edge_node(grid, t.edge, end);
                        force[map.dof(i, j, Axis::X)] += 0.5 * len * t.fx;
                        force[map.dof(i, j, Axis::Y)] += 0.5 * len * t.fy;
                    }
                }
            }
        }
        BoundaryConditions::new(grid, fixed, force)
    }

    /// Cells along supported edge segments and at pins, sorted.
    pub fn support_cells(&self, grid: &GridSpec) -> Vec<usize> {
        let mut cells = Vec::new();
        for s in &self.supports {
            segment_cells(grid, s.edge, s.from, s.to, &mut cells);
        }
        for p in &self.pins {
            let (i, j) = Self::pin_node(grid, p);
            cells.push(grid.index(i.min(grid.nx() - 1), j.min(grid.ny() - 1)));
        }
        cells.sort_unstable();
        cells.dedup();
        cells
    }

    /// Cells along loaded edge segments, sorted.
    pub fn load_cells(&self, grid: &GridSpec) -> Vec<usize> {
        let mut cells = Vec::new();
        for t in &self.tractions {
            segment_cells(grid, t.edge, t.from, t.to, &mut cells);
        }
        cells.sort_unstable();
        cells.dedup();
        cells
    }

    /// One-cell boundary layer under every support and load.
    pub fn boundary_band(&self, grid: &GridSpec) -> Vec<usize> {
        let mut cells = self.support_cells(grid);
        cells.extend(self.load_cells(grid));
        cells.sort_unstable();
        cells.dedup();
        cells
    }
}

pub(crate) fn segment_cells(grid: &GridSpec, edge: Edge, from: f64, to: f64, out: &mut Vec<usize>) {
    let n = cells_along(grid, edge);
    for k in 0..n {
        if inside((k as f64 + 0.5) / n as f64, from, to) {
            out.push(edge_cell(grid, edge, k));
        }
    }
}

//! Grid A* reference planner.
//!
//! Cells are `resolution` metres square. A cell is blocked when its centre
//! is closer than the robot radius to an obstacle or wall, i.e. obstacles
//! are inflated by the robot radius. Moves are 8-connected with unit and
//! √2 costs; diagonal moves may not cut a blocked corner.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;

use crate::simworld::{Point2, World};

use super::MetricError;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub origin: Point2,
    pub resolution: f64,
    pub nx: usize,
    pub ny: usize,
    blocked: Vec<bool>,
}

pub type Cell = (usize, usize);

impl Grid {
    /// All-free grid; mark obstacles with [`Grid::set_blocked`].
    pub fn new(origin: Point2, resolution: f64, nx: usize, ny: usize) -> Result<Self, MetricError> {
        if !(resolution > 0.0) || nx == 0 || ny == 0 {
            return Err(MetricError::Resolution(resolution));
        }
        Ok(Self { origin, resolution, nx, ny, blocked: vec![false; nx * ny] })
    }

    pub fn rasterize(world: &World, resolution: f64) -> Result<Self, MetricError> {
        if !(resolution > 0.0) {
            return Err(MetricError::Resolution(resolution));
        }
        let nx = (world.bounds.width() / resolution).ceil().max(1.0) as usize;
        let ny = (world.bounds.height() / resolution).ceil().max(1.0) as usize;
        let mut g = Self::new(world.bounds.min, resolution, nx, ny)?;
        for j in 0..ny {
            for i in 0..nx {
                let c = g.center((i, j));
                g.blocked[j * nx + i] = world.clearance(c) < world.robot_radius;
            }
        }
        Ok(g)
    }

    pub fn center(&self, (i, j): Cell) -> Point2 {
        Point2::new(
            self.origin.x + (i as f64 + 0.5) * self.resolution,
            self.origin.y + (j as f64 + 0.5) * self.resolution,
        )
    }

    pub fn cell_of(&self, p: Point2) -> Option<Cell> {
        let fx = ((p.x - self.origin.x) / self.resolution).floor();
        let fy = ((p.y - self.origin.y) / self.resolution).floor();
        if fx < 0.0 || fy < 0.0 || fx >= self.nx as f64 || fy >= self.ny as f64 {
            return None;
        }
        Some((fx as usize, fy as usize))
    }

    pub fn is_blocked(&self, (i, j): Cell) -> bool {
        self.blocked[j * self.nx + i]
    }

    pub fn set_blocked(&mut self, (i, j): Cell, blocked: bool) {
        self.blocked[j * self.nx + i] = blocked;
    }

    pub fn index(&self, (i, j): Cell) -> usize {
        j * self.nx + i
    }

    /// Free neighbours of a cell with their step costs in metres.
    pub fn neighbors(&self, (i, j): Cell) -> Vec<(Cell, f64)> {
        let mut out = Vec::with_capacity(8);
        for dj in -1i64..=1 {
            for di in -1i64..=1 {
                if di == 0 && dj == 0 {
                    continue;
                }
                let (ni, nj) = (i as i64 + di, j as i64 + dj);
                if ni < 0 || nj < 0 || ni >= self.nx as i64 || nj >= self.ny as i64 {
                    continue;
                }
                let n = (ni as usize, nj as usize);
                if self.is_blocked(n) {
                    continue;
                }
                if di != 0 && dj != 0 && (self.is_blocked((ni as usize, j)) || self.is_blocked((i, nj as usize))) {
                    continue;
                }
                let cost = if di != 0 && dj != 0 { SQRT_2 } else { 1.0 };
                out.push((n, cost * self.resolution));
            }
        }
        out
    }

    /// Octile distance, admissible for 8-connected moves.
    pub fn octile(&self, a: Cell, b: Cell) -> f64 {
        let dx = a.0.abs_diff(b.0) as f64;
        let dy = a.1.abs_diff(b.1) as f64;
        (dx.max(dy) + (SQRT_2 - 1.0) * dx.min(dy)) * self.resolution
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Open {
    f: f64,
    g: f64,
    index: usize,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on f, then larger g first, then index for determinism.
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| self.g.total_cmp(&other.g))
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest 8-connected path length between two cells.
pub fn astar_cells(grid: &Grid, start: Cell, goal: Cell) -> Result<f64, MetricError> {
    if grid.is_blocked(start) || grid.is_blocked(goal) {
        return Err(MetricError::BlockedEndpoint);
    }
    let n = grid.nx * grid.ny;
    let mut best = vec![f64::INFINITY; n];
    let mut closed = vec![false; n];
    let mut heap = BinaryHeap::new();
    best[grid.index(start)] = 0.0;
    heap.push(Open { f: grid.octile(start, goal), g: 0.0, index: grid.index(start) });
    let goal_index = grid.index(goal);
    while let Some(Open { g, index, .. }) = heap.pop() {
        if index == goal_index {
            return Ok(g);
        }
        if closed[index] {
            continue;
        }
        closed[index] = true;
        let cell = (index % grid.nx, index / grid.nx);
        for (nb, cost) in grid.neighbors(cell) {
            let ni = grid.index(nb);
            let ng = g + cost;
            if !closed[ni] && ng < best[ni] {
                best[ni] = ng;
                heap.push(Open { f: ng + grid.octile(nb, goal), g: ng, index: ni });
            }
        }
    }
    Err(MetricError::Unreachable)
}

/// Reference path length from `start` to `goal` in `world` at `resolution`.
pub fn astar_reference(world: &World, start: Point2, goal: Point2, resolution: f64) -> Result<f64, MetricError> {
    let grid = Grid::rasterize(world, resolution)?;
    let s = grid.cell_of(start).ok_or(MetricError::BlockedEndpoint)?;
    let g = grid.cell_of(goal).ok_or(MetricError::BlockedEndpoint)?;
    astar_cells(&grid, s, g)
}

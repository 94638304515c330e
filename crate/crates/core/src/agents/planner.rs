//! Global path planning on the belief costmap.
//!
//! 8-connected grid. Moving between neighbours costs the step length (one
//! cell or a diagonal) times the mean of the two cells' multipliers; cells
//! with infinite cost are never entered. A* uses the Euclidean distance times
//! the smallest admissible multiplier (1.0) as its heuristic.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use super::belief::BeliefMap;
use crate::world::Cell;

/// Lower bound on any finite cell multiplier.
pub const MIN_MULTIPLIER: f64 = 1.0;

const NEIGHBOURS: [(i32, i32); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum PlanError {
    #[error("no finite-cost path exists")]
    Unreachable,
    #[error("cell ({0}, {1}) is outside the map")]
    OutOfBounds(i32, i32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    /// Cells from start to goal inclusive.
    pub path: Vec<Cell>,
    pub cost: f64,
}

/// Cost of moving between two neighbouring cells.
pub fn step_cost(belief: &BeliefMap, from: Cell, to: Cell, resolution: f64) -> f64 {
    let diagonal = from.x != to.x && from.y != to.y;
    let len = if diagonal {
        std::f64::consts::SQRT_2 * resolution
    } else {
        resolution
    };
    len * (belief.cost(from) + belief.cost(to)) / 2.0
}

/// Total cost of a path; infinite if it is not a chain of neighbours over finite cells.
pub fn path_cost(belief: &BeliefMap, path: &[Cell], resolution: f64) -> f64 {
    if path.iter().any(|&c| !belief.cost(c).is_finite()) {
        return f64::INFINITY;
    }
    path.windows(2)
        .map(|w| {
            let (dx, dy) = ((w[1].x - w[0].x).abs(), (w[1].y - w[0].y).abs());
            if dx.max(dy) != 1 {
                f64::INFINITY
            } else {
                step_cost(belief, w[0], w[1], resolution)
            }
        })
        .sum()
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    f: f64,
    h: f64,
    index: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    /// Reversed so that `BinaryHeap` pops the smallest `(f, h, index)`.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.h.total_cmp(&self.h))
            .then_with(|| other.index.cmp(&self.index))
    }
}

fn check(belief: &BeliefMap, c: Cell) -> Result<usize, PlanError> {
    belief.index(c).ok_or(PlanError::OutOfBounds(c.x, c.y))
}

/// Minimal-cost path from `start` to `goal`.
pub fn plan_path(belief: &BeliefMap, start: Cell, goal: Cell, resolution: f64) -> Result<Plan, PlanError> {
    let s = check(belief, start)?;
    let g = check(belief, goal)?;
    if !belief.cost_at(s).is_finite() || !belief.cost_at(g).is_finite() {
        return Err(PlanError::Unreachable);
    }
    if s == g {
        return Ok(Plan {
            path: vec![start],
            cost: 0.0,
        });
    }
    let w = belief.width();
    let n = w * belief.height();
    let cell_of = |i: usize| Cell::new((i % w) as i32, (i / w) as i32);
    let goal_center = (goal.x as f64, goal.y as f64);
    let heuristic = |c: Cell| {
        let (dx, dy) = (c.x as f64 - goal_center.0, c.y as f64 - goal_center.1);
        dx.hypot(dy) * resolution * MIN_MULTIPLIER
    };

    let mut dist = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[s] = 0.0;
    let h0 = heuristic(start);
    heap.push(Entry { f: h0, h: h0, index: s });

    while let Some(Entry { index, .. }) = heap.pop() {
        if closed[index] {
            continue;
        }
        closed[index] = true;
        if index == g {
            let mut path = vec![goal];
            let mut i = g;
            while i != s {
                i = parent[i];
                path.push(cell_of(i));
            }
            path.reverse();
            return Ok(Plan { path, cost: dist[g] });
        }
        let here = cell_of(index);
        for (dx, dy) in NEIGHBOURS {
            let next = Cell::new(here.x + dx, here.y + dy);
            let Some(j) = belief.index(next) else { continue };
            if closed[j] || !belief.cost_at(j).is_finite() {
                continue;
            }
            let candidate = dist[index] + step_cost(belief, here, next, resolution);
            if candidate < dist[j] {
                dist[j] = candidate;
                parent[j] = index;
                let h = heuristic(next);
                heap.push(Entry {
                    f: candidate + h,
                    h,
                    index: j,
                });
            }
        }
    }
    Err(PlanError::Unreachable)
}

/// Single-source costs from `start` to each of `targets` (infinite where
/// unreachable). Same step costs as [`plan_path`]; stops once every target
/// is settled.
pub fn costs_to(belief: &BeliefMap, start: Cell, targets: &[Cell], resolution: f64) -> Vec<f64> {
    let mut out = vec![f64::INFINITY; targets.len()];
    let Some(s) = belief.index(start) else { return out };
    if !belief.cost_at(s).is_finite() {
        return out;
    }
    let w = belief.width();
    let n = w * belief.height();
    let cell_of = |i: usize| Cell::new((i % w) as i32, (i / w) as i32);
    let target_idx: Vec<Option<usize>> = targets.iter().map(|&t| belief.index(t)).collect();
    let mut remaining = target_idx.iter().flatten().count();

    let mut dist = vec![f64::INFINITY; n];
    let mut closed = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[s] = 0.0;
    heap.push(Entry {
        f: 0.0,
        h: 0.0,
        index: s,
    });
    while let Some(Entry { index, .. }) = heap.pop() {
        if remaining == 0 {
            break;
        }
        if closed[index] {
            continue;
        }
        closed[index] = true;
        for (k, t) in target_idx.iter().enumerate() {
            if *t == Some(index) {
                out[k] = dist[index];
                remaining -= 1;
            }
        }
        let here = cell_of(index);
        for (dx, dy) in NEIGHBOURS {
            let next = Cell::new(here.x + dx, here.y + dy);
            let Some(j) = belief.index(next) else { continue };
            if closed[j] || !belief.cost_at(j).is_finite() {
                continue;
            }
            let candidate = dist[index] + step_cost(belief, here, next, resolution);
            if candidate < dist[j] {
                dist[j] = candidate;
                heap.push(Entry {
                    f: candidate,
                    h: 0.0,
                    index: j,
                });
            }
        }
    }
    out
}

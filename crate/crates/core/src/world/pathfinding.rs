//! 8-connected grid search. Costs are kept as integer counts of straight and
//! diagonal moves so that the same optimal path has a bit-identical length in
//! both directions.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;

use super::OccupancyGrid;

#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    /// Geodesic length in meters.
    pub length: f64,
    /// Cell centres of one optimal path, start cell first.
    pub waypoints: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub(crate) struct MoveCount {
    straight: u32,
    diagonal: u32,
}

impl MoveCount {
    #[inline]
    pub(crate) fn value(&self) -> f64 {
        self.straight as f64 + self.diagonal as f64 * SQRT_2
    }

    #[inline]
    fn step(self, diagonal: bool) -> Self {
        if diagonal {
            Self {
                diagonal: self.diagonal + 1,
                ..self
            }
        } else {
            Self {
                straight: self.straight + 1,
                ..self
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Open {
    f: f64,
    g: f64,
    idx: usize,
}

impl PartialEq for Open {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Open {}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Open {
    // Min-heap on f; prefer deeper nodes on ties, then lower index.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| self.g.total_cmp(&other.g))
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

const NEIGHBOURS: [(isize, isize); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
];

/// Calls `f(neighbour, is_diagonal)` for each legal move out of `idx`.
#[inline]
fn for_each_neighbour(grid: &OccupancyGrid, idx: usize, mut f: impl FnMut(usize, bool)) {
    let nav = grid.navigable_raw();
    let (c, r) = grid.cell_coords(idx);
    let (w, h) = (grid.width() as isize, grid.height() as isize);
    for (dc, dr) in NEIGHBOURS {
        let nc = c as isize + dc;
        let nr = r as isize + dr;
        if nc < 0 || nr < 0 || nc >= w || nr >= h {
            continue;
        }
        let j = nr as usize * grid.width() + nc as usize;
        if !nav[j] {
            continue;
        }
        let diagonal = dc != 0 && dr != 0;
        if diagonal {
            let side_a = r * grid.width() + nc as usize;
            let side_b = nr as usize * grid.width() + c;
            if !(nav[side_a] && nav[side_b]) {
                continue;
            }
        }
        f(j, diagonal);
    }
}

fn octile(grid: &OccupancyGrid, a: usize, b: usize) -> f64 {
    let (ac, ar) = grid.cell_coords(a);
    let (bc, br) = grid.cell_coords(b);
    let dx = ac.abs_diff(bc) as f64;
    let dz = ar.abs_diff(br) as f64;
    let (lo, hi) = if dx < dz { (dx, dz) } else { (dz, dx) };
    (hi - lo) + lo * SQRT_2
}

/// A* with the octile heuristic. Returns move counts and the cell sequence.
pub(crate) fn astar(grid: &OccupancyGrid, start: usize, goal: usize) -> Option<(MoveCount, Vec<usize>)> {
    let n = grid.width() * grid.height();
    let mut best: Vec<Option<MoveCount>> = vec![None; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut heap = BinaryHeap::new();
    best[start] = Some(MoveCount::default());
    heap.push(Open {
        f: octile(grid, start, goal),
        g: 0.0,
        idx: start,
    });
    while let Some(Open { idx, .. }) = heap.pop() {
        if closed[idx] {
            continue;
        }
        closed[idx] = true;
        let g = best[idx].expect("pushed nodes have a cost");
        if idx == goal {
            let mut cells = vec![goal];
            let mut cur = goal;
            while cur != start {
                cur = parent[cur];
                cells.push(cur);
            }
            cells.reverse();
            return Some((g, cells));
        }
        for_each_neighbour(grid, idx, |j, diagonal| {
            if closed[j] {
                return;
            }
            let cand = g.step(diagonal);
            let cv = cand.value();
            if best[j].is_none_or(|b| cv < b.value()) {
                best[j] = Some(cand);
                parent[j] = idx;
                heap.push(Open {
                    f: cv + octile(grid, j, goal),
                    g: cv,
                    idx: j,
                });
            }
        });
    }
    None
}

/// Single-source costs (in cells) to every cell, `None` where unreachable.
#[derive(Debug, Clone)]
pub struct DistanceField {
    source: usize,
    cost: Vec<Option<MoveCount>>,
}

impl DistanceField {
    pub fn source(&self) -> usize {
        self.source
    }

    /// Cost in cell units from `idx` to the source cell.
    pub fn cost(&self, idx: usize) -> Option<f64> {
        self.cost.get(idx).copied().flatten().map(|c| c.value())
    }

    /// Next cell on an optimal path from `idx` towards the source, or `None`
    /// at the source or when unreachable.
    pub fn descend(&self, grid: &OccupancyGrid, idx: usize) -> Option<usize> {
        let here = self.cost(idx)?;
        let mut best: Option<(f64, usize)> = None;
        for_each_neighbour(grid, idx, |j, diagonal| {
            if let Some(cj) = self.cost(j) {
                let step = if diagonal { SQRT_2 } else { 1.0 };
                // Only neighbours that lie on an optimal path.
                if (cj + step - here).abs() < 1e-9
                    && best.is_none_or(|(bc, bj)| cj < bc || (cj == bc && j < bj))
                {
                    best = Some((cj, j));
                }
            }
        });
        best.map(|(_, j)| j)
    }
}

pub(crate) fn distance_field(grid: &OccupancyGrid, source: usize) -> DistanceField {
    let n = grid.width() * grid.height();
    let mut cost: Vec<Option<MoveCount>> = vec![None; n];
    let mut closed = vec![false; n];
    let mut heap = BinaryHeap::new();
    cost[source] = Some(MoveCount::default());
    heap.push(Open {
        f: 0.0,
        g: 0.0,
        idx: source,
    });
    while let Some(Open { idx, .. }) = heap.pop() {
        if closed[idx] {
            continue;
        }
        closed[idx] = true;
        let g = cost[idx].expect("pushed nodes have a cost");
        for_each_neighbour(grid, idx, |j, diagonal| {
            if closed[j] {
                return;
            }
            let cand = g.step(diagonal);
            let cv = cand.value();
            if cost[j].is_none_or(|b| cv < b.value()) {
                cost[j] = Some(cand);
                heap.push(Open { f: cv, g: cv, idx: j });
            }
        });
    }
    DistanceField { source, cost }
}

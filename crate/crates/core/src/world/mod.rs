//! Navigable-space model of the virtual environment.
//!
//! Cell `(c, r)` covers `[ox + c·res, ox + (c+1)·res) × [oz + r·res, oz + (r+1)·res)`
//! so every boundary point belongs to exactly one cell (the one whose low edge
//! it sits on). Row 0 is the minimum-z row.

mod io;
mod pathfinding;

use rand::Rng;
use thiserror::Error;

use crate::geometry::Pose3;

pub use io::{load_grid, parse_grid_text, parse_pgm, write_grid_text, write_pgm};
pub use pathfinding::{DistanceField, PathResult};

pub const DEFAULT_RESOLUTION: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("point ({x}, {z}) is not navigable")]
    InvalidEndpoint { x: f64, z: f64 },
    #[error("map has no navigable cell")]
    EmptyMap,
    #[error("I/O error on {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    origin: (f64, f64),
    navigable: Vec<bool>,
    navigable_cells: Vec<usize>,
    component: Vec<u32>,
}

const NO_COMPONENT: u32 = u32::MAX;

impl OccupancyGrid {
    /// `navigable` is row-major with row 0 at minimum z.
    pub fn new(
        width: usize,
        height: usize,
        resolution: f64,
        origin: (f64, f64),
        navigable: Vec<bool>,
    ) -> Result<Self, MapError> {
        if width == 0 || height == 0 {
            return Err(MapError::InvalidGrid(format!(
                "dimensions must be at least 1x1, got {width}x{height}"
            )));
        }
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(MapError::InvalidGrid(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        if !(origin.0.is_finite() && origin.1.is_finite()) {
            return Err(MapError::InvalidGrid("origin must be finite".into()));
        }
        if navigable.len() != width * height {
            return Err(MapError::InvalidGrid(format!(
                "expected {} cells, got {}",
                width * height,
                navigable.len()
            )));
        }
        let navigable_cells = (0..navigable.len()).filter(|&i| navigable[i]).collect();
        let mut grid = Self {
            width,
            height,
            resolution,
            origin,
            navigable,
            navigable_cells,
            component: Vec::new(),
        };
        grid.component = grid.label_components();
        Ok(grid)
    }

    /// Builds a grid from rows of `.`/`#`, row 0 first (minimum z).
    pub fn from_rows(rows: &[&str], resolution: f64, origin: (f64, f64)) -> Result<Self, MapError> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        let mut cells = Vec::with_capacity(width * height);
        for (i, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(MapError::Parse {
                    line: i + 1,
                    message: format!("row has {} cells, expected {width}", row.chars().count()),
                });
            }
            for ch in row.chars() {
                cells.push(match ch {
                    '.' => true,
                    '#' => false,
                    other => {
                        return Err(MapError::Parse {
                            line: i + 1,
                            message: format!("unknown cell token {other:?}"),
                        })
                    }
                });
            }
        }
        OccupancyGrid::new(width, height, resolution, origin, cells)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    pub fn navigable_count(&self) -> usize {
        self.navigable_cells.len()
    }

    #[inline]
    pub fn index(&self, c: usize, r: usize) -> usize {
        r * self.width + c
    }

    #[inline]
    pub fn cell_coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.width, idx / self.width)
    }

    #[inline]
    pub fn is_cell_navigable(&self, c: usize, r: usize) -> bool {
        c < self.width && r < self.height && self.navigable[self.index(c, r)]
    }

    /// Containing cell under the half-open rule, or `None` outside the grid.
    #[inline]
    pub fn cell_of(&self, x: f64, z: f64) -> Option<(usize, usize)> {
        let fx = ((x - self.origin.0) / self.resolution).floor();
        let fz = ((z - self.origin.1) / self.resolution).floor();
        if !(fx >= 0.0 && fz >= 0.0) || fx >= self.width as f64 || fz >= self.height as f64 {
            return None;
        }
        Some((fx as usize, fz as usize))
    }

    pub fn cell_center(&self, c: usize, r: usize) -> (f64, f64) {
        (
            self.origin.0 + (c as f64 + 0.5) * self.resolution,
            self.origin.1 + (r as f64 + 0.5) * self.resolution,
        )
    }

    pub fn is_navigable(&self, x: f64, z: f64) -> bool {
        self.cell_of(x, z)
            .is_some_and(|(c, r)| self.navigable[self.index(c, r)])
    }

    fn navigable_index(&self, x: f64, z: f64) -> Result<usize, MapError> {
        match self.cell_of(x, z) {
            Some((c, r)) if self.navigable[self.index(c, r)] => Ok(self.index(c, r)),
            _ => Err(MapError::InvalidEndpoint { x, z }),
        }
    }

    /// Whether two navigable points lie in the same connected component.
    pub fn connected(&self, a: (f64, f64), b: (f64, f64)) -> Result<bool, MapError> {
        let ia = self.navigable_index(a.0, a.1)?;
        let ib = self.navigable_index(b.0, b.1)?;
        Ok(self.component[ia] == self.component[ib])
    }

    /// Diagonal moves need both orthogonal neighbours open, so 8-connected
    /// reachability equals 4-connected reachability.
    fn label_components(&self) -> Vec<u32> {
        let mut label = vec![NO_COMPONENT; self.navigable.len()];
        let mut next = 0u32;
        let mut stack = Vec::new();
        for &start in &self.navigable_cells {
            if label[start] != NO_COMPONENT {
                continue;
            }
            label[start] = next;
            stack.push(start);
            while let Some(i) = stack.pop() {
                let (c, r) = self.cell_coords(i);
                let mut visit = |nc: usize, nr: usize| {
                    let j = self.index(nc, nr);
                    if self.navigable[j] && label[j] == NO_COMPONENT {
                        label[j] = next;
                        stack.push(j);
                    }
                };
                if c > 0 {
                    visit(c - 1, r);
                }
                if c + 1 < self.width {
                    visit(c + 1, r);
                }
                if r > 0 {
                    visit(c, r - 1);
                }
                if r + 1 < self.height {
                    visit(c, r + 1);
                }
            }
            next += 1;
        }
        label
    }

    /// Shortest obstacle-respecting distance in meters, `None` if the
    /// endpoints are in different components. See [`shortest_path`](Self::shortest_path).
    pub fn geodesic_distance(&self, a: (f64, f64), b: (f64, f64)) -> Result<Option<f64>, MapError> {
        Ok(self.shortest_path(a, b)?.map(|p| p.length))
    }

    /// Any-angle shortest path between two navigable points.
    ///
    /// Mutually visible endpoints are joined directly. Otherwise the
    /// 8-connected cell path is string-pulled: each waypoint is dropped when
    /// its successor is visible from the previous kept point. Endpoints are
    /// processed in a fixed order so `d(a, b)` and `d(b, a)` are bit-identical.
    /// Waypoints include both endpoints, in `a → b` order.
    pub fn shortest_path(&self, a: (f64, f64), b: (f64, f64)) -> Result<Option<PathResult>, MapError> {
        let ia = self.navigable_index(a.0, a.1)?;
        let ib = self.navigable_index(b.0, b.1)?;
        if self.component[ia] != self.component[ib] {
            return Ok(None);
        }
        let swap = (a.0, a.1).partial_cmp(&(b.0, b.1)) == Some(std::cmp::Ordering::Greater);
        let (p, q, ip, iq) = if swap { (b, a, ib, ia) } else { (a, b, ia, ib) };
        let mut waypoints = if self.segment_clear(p, q) {
            vec![p, q]
        } else {
            let Some((_, cells)) = pathfinding::astar(self, ip, iq) else {
                return Ok(None);
            };
            let mut pts = Vec::with_capacity(cells.len());
            pts.push(p);
            for &i in &cells[1..cells.len() - 1] {
                let (c, r) = self.cell_coords(i);
                pts.push(self.cell_center(c, r));
            }
            pts.push(q);
            self.string_pull(&pts)
        };
        let length = waypoints
            .windows(2)
            .map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1))
            .sum();
        if swap {
            waypoints.reverse();
        }
        Ok(Some(PathResult { length, waypoints }))
    }

    /// Consecutive points of `pts` must be mutually visible.
    fn string_pull(&self, pts: &[(f64, f64)]) -> Vec<(f64, f64)> {
        let mut out = vec![pts[0]];
        let mut anchor = pts[0];
        for k in 1..pts.len() - 1 {
            if !self.segment_clear(anchor, pts[k + 1]) {
                out.push(pts[k]);
                anchor = pts[k];
            }
        }
        out.push(pts[pts.len() - 1]);
        out
    }

    /// Dijkstra field from the cell containing `target`, used by planners that
    /// query many sources against one goal.
    pub fn distance_field(&self, target: (f64, f64)) -> Result<DistanceField, MapError> {
        let idx = self.navigable_index(target.0, target.1)?;
        Ok(pathfinding::distance_field(self, idx))
    }

    /// Copy with every cell whose centre lies within `clearance` meters of a
    /// blocked cell's centre marked blocked too.
    pub fn inflated(&self, clearance: f64) -> OccupancyGrid {
        let k = (clearance / self.resolution).floor() as i64;
        if k <= 0 {
            return self.clone();
        }
        let (w, h) = (self.width as i64, self.height as i64);
        let mut cells: Vec<bool> = (0..self.width * self.height).map(|i| self.navigable[i]).collect();
        for r in 0..h {
            for c in 0..w {
                if self.navigable[(r * w + c) as usize] {
                    continue;
                }
                for dr in -k..=k {
                    for dc in -k..=k {
                        let (nc, nr) = (c + dc, r + dr);
                        if dc * dc + dr * dr <= k * k && (0..w).contains(&nc) && (0..h).contains(&nr) {
                            cells[(nr * w + nc) as usize] = false;
                        }
                    }
                }
            }
        }
        OccupancyGrid::new(self.width, self.height, self.resolution, self.origin, cells).expect("same shape as self")
    }

    /// Uniform over navigable cells, then uniform inside the chosen cell.
    pub fn sample_navigable_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(f64, f64), MapError> {
        if self.navigable_cells.is_empty() {
            return Err(MapError::EmptyMap);
        }
        let cell = self.navigable_cells[rng.random_range(0..self.navigable_cells.len())];
        let (c, r) = self.cell_coords(cell);
        let lo_x = self.origin.0 + c as f64 * self.resolution;
        let lo_z = self.origin.1 + r as f64 * self.resolution;
        loop {
            let x = lo_x + rng.random::<f64>() * self.resolution;
            let z = lo_z + rng.random::<f64>() * self.resolution;
            // Rounding can land exactly on the high edge; resample then.
            if self.cell_of(x, z) == Some((c, r)) {
                return Ok((x, z));
            }
        }
    }

    /// Advances along the heading, stopping at the last navigable sample
    /// (swept every `resolution / 4`) before a blocked cell. No sliding.
    pub fn attempt_move(&self, from: &Pose3, distance: f64) -> Pose3 {
        if distance.is_nan() || distance <= 0.0 || !self.is_navigable(from.x, from.z) {
            return *from;
        }
        let (dx, dz) = from.heading.forward();
        let step = self.resolution / 4.0;
        let n = (distance / step).ceil() as usize;
        let mut last = (from.x, from.z);
        for k in 1..=n {
            let s = if k == n { distance } else { k as f64 * step };
            let p = (from.x + s * dx, from.z + s * dz);
            if !self.is_navigable(p.0, p.1) {
                break;
            }
            last = p;
        }
        Pose3 {
            x: last.0,
            z: last.1,
            heading: from.heading,
        }
    }

    #[inline]
    fn navigable_at(&self, c: i64, r: i64) -> bool {
        c >= 0 && r >= 0 && self.is_cell_navigable(c as usize, r as usize)
    }

    /// Whether every cell the segment `a → b` passes through is navigable.
    /// A segment through a grid vertex needs both side cells open, matching
    /// the no-corner-cutting rule of the path search.
    pub fn segment_clear(&self, a: (f64, f64), b: (f64, f64)) -> bool {
        let (Some((ca, ra)), Some((cb, rb))) = (self.cell_of(a.0, a.1), self.cell_of(b.0, b.1)) else {
            return false;
        };
        if !self.is_cell_navigable(ca, ra) || !self.is_cell_navigable(cb, rb) {
            return false;
        }
        let to_grid = |p: (f64, f64)| ((p.0 - self.origin.0) / self.resolution, (p.1 - self.origin.1) / self.resolution);
        let (gx0, gz0) = to_grid(a);
        let (gx1, gz1) = to_grid(b);
        let (dx, dz) = (gx1 - gx0, gz1 - gz0);
        let (mut c, mut r) = (ca as i64, ra as i64);
        let (end_c, end_r) = (cb as i64, rb as i64);
        // Amanatides–Woo traversal in the segment parameter t ∈ [0, 1].
        let axis = |d: f64, g0: f64, cell: i64| -> (i64, f64, f64) {
            if d > 0.0 {
                (1, ((cell + 1) as f64 - g0) / d, 1.0 / d)
            } else if d < 0.0 {
                (-1, (cell as f64 - g0) / d, -1.0 / d)
            } else {
                (0, f64::INFINITY, f64::INFINITY)
            }
        };
        let (step_c, mut t_c, dt_c) = axis(dx, gx0, c);
        let (step_r, mut t_r, dt_r) = axis(dz, gz0, r);
        let budget = (end_c - c).abs() + (end_r - r).abs() + 2;
        for _ in 0..budget {
            if (c, r) == (end_c, end_r) {
                return true;
            }
            if t_c < t_r {
                c += step_c;
                t_c += dt_c;
            } else if t_r < t_c {
                r += step_r;
                t_r += dt_r;
            } else {
                if !self.navigable_at(c + step_c, r) || !self.navigable_at(c, r + step_r) {
                    return false;
                }
                c += step_c;
                r += step_r;
                t_c += dt_c;
                t_r += dt_r;
            }
            if !self.navigable_at(c, r) {
                return false;
            }
        }
        (c, r) == (end_c, end_r)
    }

    pub(crate) fn navigable_raw(&self) -> &[bool] {
        &self.navigable
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Heading;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, SQRT_2};

    fn open(w: usize, h: usize, res: f64) -> OccupancyGrid {
        OccupancyGrid::new(w, h, res, (0.0, 0.0), vec![true; w * h]).unwrap()
    }

    #[test]
    fn construction_validates() {
        assert!(OccupancyGrid::new(0, 1, 0.05, (0.0, 0.0), vec![]).is_err());
        assert!(OccupancyGrid::new(1, 1, 0.0, (0.0, 0.0), vec![true]).is_err());
        assert!(OccupancyGrid::new(2, 1, 0.05, (0.0, 0.0), vec![true]).is_err());
    }

    #[test]
    fn cell_centres_and_bounds() {
        let g = OccupancyGrid::new(3, 2, 0.5, (1.0, -1.0), vec![true; 6]).unwrap();
        assert_eq!(g.cell_center(0, 0), (1.25, -0.75));
        assert_eq!(g.cell_center(2, 1), (2.25, -0.25));
        assert!(g.is_navigable(1.25, -0.75));
        assert!(!g.is_navigable(0.99, -0.75));
        assert!(!g.is_navigable(2.5, -0.75));
        assert!(!g.is_navigable(1.25, 0.0));
        assert!(!g.is_navigable(f64::NAN, 0.0));
    }

    #[test]
    fn shared_edge_belongs_to_upper_cell() {
        // Cell 0 navigable, cell 1 blocked; the edge x = 0.5 is owned by cell 1.
        let g = OccupancyGrid::from_rows(&[".#"], 0.5, (0.0, 0.0)).unwrap();
        assert!(g.is_navigable(0.4999999, 0.25));
        assert!(!g.is_navigable(0.5, 0.25));
        let g = OccupancyGrid::from_rows(&["#."], 0.5, (0.0, 0.0)).unwrap();
        assert!(g.is_navigable(0.5, 0.25));
        assert!(!g.is_navigable(0.4999999, 0.25));
        // Low edge of the grid is inside, high edge is outside.
        assert!(g.is_navigable(0.5, 0.0));
        assert!(!g.is_navigable(1.0, 0.25));
    }

    #[test]
    fn geodesic_trivial_cases() {
        let g = open(10, 10, 0.05);
        assert_eq!(g.geodesic_distance((0.12, 0.12), (0.12, 0.12)).unwrap(), Some(0.0));
        assert!(matches!(
            g.geodesic_distance((-1.0, 0.0), (0.1, 0.1)),
            Err(MapError::InvalidEndpoint { .. })
        ));
    }

    #[test]
    fn corridor_hand_count() {
        // 12-cell corridor; centres of cells 1 and 11 are 10 cells apart.
        let g = OccupancyGrid::from_rows(&["############", "............", "############"], 0.05, (0.0, 0.0))
            .unwrap();
        let a = g.cell_center(1, 1);
        let b = g.cell_center(11, 1);
        let d = g.geodesic_distance(a, b).unwrap().unwrap();
        assert!((d - 0.5).abs() <= 1e-12, "{d}");
        let path = g.shortest_path(a, b).unwrap().unwrap();
        assert_eq!(path.waypoints, vec![a, b]);
    }

    #[test]
    fn disconnected_is_unreachable() {
        let g = OccupancyGrid::from_rows(&["..#.."], 1.0, (0.0, 0.0)).unwrap();
        assert_eq!(g.geodesic_distance((0.5, 0.5), (4.5, 0.5)).unwrap(), None);
        assert!(!g.connected((0.5, 0.5), (4.5, 0.5)).unwrap());
    }

    #[test]
    fn diagonal_moves_do_not_cut_corners() {
        // Going from (0,0) to (1,1) must detour around the blocked (1,0)/(0,1)
        // pair only when both are blocked; here one is open.
        let g = OccupancyGrid::from_rows(&[".#", ".."], 1.0, (0.0, 0.0)).unwrap();
        let d = g.geodesic_distance((0.5, 0.5), (1.5, 1.5)).unwrap().unwrap();
        assert!((d - 2.0).abs() < 1e-12);
        let g = open(2, 2, 1.0);
        let d = g.geodesic_distance((0.5, 0.5), (1.5, 1.5)).unwrap().unwrap();
        assert!((d - SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn inflation_grows_obstacles_by_whole_cells() {
        let g = OccupancyGrid::from_rows(&[".......", ".......", "...#...", ".......", "......."], 0.05, (0.0, 0.0)).unwrap();
        let padded = g.inflated(0.10);
        // Radius two cells, measured between centres.
        assert!(!padded.is_cell_navigable(1, 2) && !padded.is_cell_navigable(3, 0) && !padded.is_cell_navigable(4, 1));
        assert!(padded.is_cell_navigable(0, 2) && padded.is_cell_navigable(1, 0) && padded.is_cell_navigable(5, 0));
        assert_eq!(g.inflated(0.04).navigable_count(), g.navigable_count());
    }

    #[test]
    fn distance_field_matches_astar() {
        let g = OccupancyGrid::from_rows(
            &["........", ".######.", "......#.", "#####.#.", "........"],
            0.1,
            (0.0, 0.0),
        )
        .unwrap();
        let goal = g.cell_center(0, 0);
        let field = g.distance_field(goal).unwrap();
        for r in 0..g.height() {
            for c in 0..g.width() {
                if !g.is_cell_navigable(c, r) {
                    continue;
                }
                let p = g.cell_center(c, r);
                let d = g.geodesic_distance(p, goal).unwrap().unwrap();
                let f = field.cost(g.index(c, r)).unwrap() * g.resolution();
                // String pulling only shortens the cell path.
                assert!(d <= f + 1e-12 && d >= (p.0 - goal.0).hypot(p.1 - goal.1) - 1e-12);
            }
        }
    }

    #[test]
    fn sampling_single_cell_and_coverage() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = OccupancyGrid::from_rows(&["##", "#."], 0.5, (0.0, 0.0)).unwrap();
        for _ in 0..100 {
            let p = g.sample_navigable_point(&mut rng).unwrap();
            assert_eq!(g.cell_of(p.0, p.1), Some((1, 1)));
        }
        let g = OccupancyGrid::from_rows(&[".#."], 0.5, (0.0, 0.0)).unwrap();
        let mut seen = [false; 3];
        for _ in 0..100 {
            let p = g.sample_navigable_point(&mut rng).unwrap();
            seen[g.cell_of(p.0, p.1).unwrap().0] = true;
        }
        assert_eq!(seen, [true, false, true]);
        let blocked = OccupancyGrid::from_rows(&["#"], 0.5, (0.0, 0.0)).unwrap();
        assert_eq!(blocked.sample_navigable_point(&mut rng), Err(MapError::EmptyMap));
    }

    #[test]
    fn sampling_quadrants_are_uniform() {
        // 1e5 samples into 4 equal quadrants: each count ~ Binomial(n, 1/4),
        // σ = √(n·¼·¾) ≈ 137.
        let g = open(100, 100, 0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            let (x, z) = g.sample_navigable_point(&mut rng).unwrap();
            counts[(x >= 2.5) as usize + 2 * (z >= 2.5) as usize] += 1;
        }
        let sigma = (n as f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 / 4.0).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn visibility_and_string_pulling() {
        let g = OccupancyGrid::from_rows(&["....", ".##.", "...."], 1.0, (0.0, 0.0)).unwrap();
        assert!(g.segment_clear((0.5, 0.5), (3.5, 0.5)));
        assert!(!g.segment_clear((0.5, 1.5), (3.5, 1.5)));
        // Exactly through the vertex (1, 1), whose side cell (1, 1) is blocked.
        assert!(!g.segment_clear((0.5, 1.5), (1.5, 0.5)));
        assert!(g.segment_clear((0.5, 0.5), (3.5, 0.9)));
        let d = g.geodesic_distance((0.5, 1.5), (3.5, 1.5)).unwrap().unwrap();
        // Down, along row 0 between cell centres, and back up.
        let expected = 5.0;
        assert!((d - expected).abs() < 1e-12, "{d}");
        let back = g.geodesic_distance((3.5, 1.5), (0.5, 1.5)).unwrap().unwrap();
        assert_eq!(d.to_bits(), back.to_bits());
        let p = g.shortest_path((3.5, 1.5), (0.5, 1.5)).unwrap().unwrap();
        assert_eq!(p.waypoints.first(), Some(&(3.5, 1.5)));
        assert_eq!(p.waypoints.last(), Some(&(0.5, 1.5)));
        // Open space never exceeds the straight line.
        let o = open(30, 30, 0.05);
        let (a, b) = ((0.031, 0.0465), (0.0304, 0.0545));
        assert_eq!(o.geodesic_distance(a, b).unwrap(), Some((a.0 - b.0).hypot(a.1 - b.1)));
    }

    #[test]
    fn move_in_open_space_is_exact() {
        let g = open(40, 40, 0.05);
        let start = Pose3::new(1.0, 1.0, Heading::from_angle(0.7).unwrap()).unwrap();
        let end = g.attempt_move(&start, 0.25);
        assert!((start.distance_to(end.x, end.z) - 0.25).abs() < 1e-12);
        assert_eq!(end.heading, start.heading);
        assert_eq!(g.attempt_move(&start, 0.0), start);
    }

    #[test]
    fn move_stops_at_wall() {
        // Corridor along x; agent faces −X (θ = 90°) towards a wall at x < 0.05.
        let g = OccupancyGrid::from_rows(&["#.."], 0.05, (0.0, 0.0)).unwrap();
        let start = Pose3::from_xz_theta(0.125, 0.025, FRAC_PI_2).unwrap();
        let end = g.attempt_move(&start, 0.25);
        let moved = start.distance_to(end.x, end.z);
        // Samples every 0.0125 m: the last navigable one is within one
        // sample of the wall face at x = 0.05.
        assert!(moved < 0.25);
        assert!(end.x >= 0.05 && end.x <= 0.0625 + 1e-12, "{}", end.x);
        assert!(g.is_navigable(end.x, end.z));
        // Repeated pushes settle at a fixed point inside the free cell.
        let mut p = end;
        for _ in 0..3 {
            p = g.attempt_move(&p, 0.25);
        }
        assert_eq!(g.attempt_move(&p, 0.25), p);
        assert!(p.x >= 0.05 && g.is_navigable(p.x, p.z));
    }
}

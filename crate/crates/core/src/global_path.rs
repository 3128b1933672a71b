//! Discrete collision-free waypoints over the occupancy grid: 26-connected
//! A* on an inflated grid followed by greedy line-of-sight shortcutting.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::grid::{euclidean_distance_transform, traverse_segment, Cell, DistanceField, GridGeometry, VoxelGrid};
use crate::Vec3;

pub const DEFAULT_INFLATION: f64 = 0.2;
pub const DEFAULT_HORIZON: f64 = 7.0;
/// Extra room around the start/goal box for the first, windowed search.
pub const WINDOW_MARGIN: f64 = 2.5;
const START_SNAP_CELLS: i64 = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathQuery {
    pub start: Vec3,
    pub goal: Vec3,
    /// Occupied cells are dilated by this radius (meters).
    pub inflation: f64,
    /// Extra step cost `w (1 - d/d_soft)²` for cells closer than `d_soft`
    /// to an obstacle; zero gives plain shortest paths.
    pub clearance_weight: f64,
    pub clearance_soft: f64,
}

impl PathQuery {
    pub fn new(start: Vec3, goal: Vec3) -> Self {
        Self {
            start,
            goal,
            inflation: DEFAULT_INFLATION,
            clearance_weight: 0.0,
            clearance_soft: 0.6,
        }
    }

    fn costs(&self) -> ClearanceCost {
        ClearanceCost {
            weight: self.clearance_weight,
            soft: self.clearance_soft,
        }
    }
}

/// Clearance shaping of step costs and shortcut acceptance.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClearanceCost {
    pub weight: f64,
    pub soft: f64,
}

impl ClearanceCost {
    pub const NONE: Self = Self { weight: 0.0, soft: 0.0 };

    fn factor(&self, d: f64) -> f64 {
        if self.weight > 0.0 && d < self.soft {
            1.0 + self.weight * (1.0 - d / self.soft).powi(2)
        } else {
            1.0
        }
    }
}

/// Free/blocked mask after inflation. Cells not known to be occupied are
/// traversable, so unknown space is treated optimistically.
#[derive(Debug, Clone)]
pub struct Traversability {
    pub geometry: GridGeometry,
    blocked: Vec<bool>,
    /// Distance of each cell center to the nearest occupied cell center.
    clearance: Vec<f64>,
}

impl Traversability {
    /// Blocks every cell whose center lies within `inflation` of an occupied cell center.
    pub fn from_field(field: &DistanceField, inflation: f64) -> Self {
        Self {
            geometry: field.geometry,
            blocked: field.values().iter().map(|&d| d <= inflation).collect(),
            clearance: field.values().to_vec(),
        }
    }

    pub fn inflate(grid: &VoxelGrid, inflation: f64) -> Result<Self> {
        match euclidean_distance_transform(grid) {
            Ok(field) => Ok(Self::from_field(&field, inflation)),
            Err(Error::AllFree) => Ok(Self::free(grid.geometry)),
            Err(e) => Err(e),
        }
    }

    pub fn free(geometry: GridGeometry) -> Self {
        Self {
            blocked: vec![false; geometry.len()],
            clearance: vec![f64::INFINITY; geometry.len()],
            geometry,
        }
    }

    pub fn is_free(&self, c: Cell) -> bool {
        !self.blocked[self.geometry.index(c)]
    }

    pub fn clearance(&self, c: Cell) -> f64 {
        self.clearance[self.geometry.index(c)]
    }

    /// True when every cell crossed by `a → b` is inside the lattice and free.
    pub fn segment_free(&self, a: &Vec3, b: &Vec3) -> bool {
        self.segment_clearance(a, b).is_some()
    }

    /// Smallest cell clearance along `a → b`, or `None` if the segment leaves
    /// the lattice or crosses a blocked cell.
    pub fn segment_clearance(&self, a: &Vec3, b: &Vec3) -> Option<f64> {
        if !self.geometry.contains(a) || !self.geometry.contains(b) {
            return None;
        }
        let mut ok = true;
        let mut min = f64::INFINITY;
        traverse_segment(&self.geometry, a, b, |c| {
            ok &= self.is_free(c);
            min = min.min(self.clearance(c));
        });
        ok.then_some(min)
    }

    /// Center of the nearest free cell to `p` within `max_dist` meters, or
    /// `p` itself when its cell is already free.
    pub fn nearest_free(&self, p: &Vec3, max_dist: f64) -> Option<Vec3> {
        let c = self.geometry.cell_of_unchecked(p);
        if self.geometry.contains_cell(c) && self.is_free(to_cell(c)) {
            return Some(*p);
        }
        let reach = (max_dist / self.geometry.resolution).ceil() as i64;
        let mut best: Option<(f64, Cell)> = None;
        for di in -reach..=reach {
            for dj in -reach..=reach {
                for dk in -reach..=reach {
                    let q = [c[0] + di, c[1] + dj, c[2] + dk];
                    if !self.geometry.contains_cell(q) || !self.is_free(to_cell(q)) {
                        continue;
                    }
                    let center = self.geometry.cell_center(to_cell(q));
                    let d = (center - p).norm();
                    if d <= max_dist && best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, to_cell(q)));
                    }
                }
            }
        }
        best.map(|(_, q)| self.geometry.cell_center(q))
    }
}

fn to_cell(c: [i64; 3]) -> Cell {
    [c[0] as usize, c[1] as usize, c[2] as usize]
}

#[derive(Clone, Copy, PartialEq)]
struct Open {
    f: f64,
    g: f64,
    index: usize,
}

impl Eq for Open {}

impl Ord for Open {
    // Min-heap on f; ties prefer deeper nodes, then lower index.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then(self.g.total_cmp(&other.g))
            .then(other.index.cmp(&self.index))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn neighbor_offsets() -> Vec<([i64; 3], f64)> {
    let mut out = Vec::with_capacity(26);
    for di in -1i64..=1 {
        for dj in -1i64..=1 {
            for dk in -1i64..=1 {
                let n = di.abs() + dj.abs() + dk.abs();
                if n > 0 {
                    out.push(([di, dj, dk], (n as f64).sqrt()));
                }
            }
        }
    }
    out
}

/// Shortest 26-connected cell path between free cells with a Euclidean
/// heuristic (`heuristic = false` gives Dijkstra). Cost is in meters.
pub fn search(trav: &Traversability, start: Cell, goal: Cell, heuristic: bool) -> Option<(Vec<Cell>, f64)> {
    search_with(trav, start, goal, heuristic, ClearanceCost::NONE)
}

/// [`search`] with each step's length scaled by the clearance factor of the
/// cell it enters. The Euclidean heuristic stays admissible since factors are ≥ 1.
pub fn search_with(
    trav: &Traversability,
    start: Cell,
    goal: Cell,
    heuristic: bool,
    cost: ClearanceCost,
) -> Option<(Vec<Cell>, f64)> {
    let geom = &trav.geometry;
    if !trav.is_free(start) || !trav.is_free(goal) {
        return None;
    }
    let res = geom.resolution;
    let h = |c: Cell| {
        if heuristic {
            let d = [
                c[0] as f64 - goal[0] as f64,
                c[1] as f64 - goal[1] as f64,
                c[2] as f64 - goal[2] as f64,
            ];
            res * (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
        } else {
            0.0
        }
    };
    let n = geom.len();
    let mut g = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    let s = geom.index(start);
    let t = geom.index(goal);
    g[s] = 0.0;
    open.push(Open { f: h(start), g: 0.0, index: s });
    let offsets = neighbor_offsets();
    while let Some(Open { g: gc, index, .. }) = open.pop() {
        if closed[index] {
            continue;
        }
        closed[index] = true;
        if index == t {
            let mut cells = vec![geom.cell(t)];
            let mut cur = t;
            while cur != s {
                cur = parent[cur];
                cells.push(geom.cell(cur));
            }
            cells.reverse();
            return Some((cells, gc));
        }
        let c = geom.cell(index);
        for (off, w) in &offsets {
            let q = [c[0] as i64 + off[0], c[1] as i64 + off[1], c[2] as i64 + off[2]];
            if !geom.contains_cell(q) {
                continue;
            }
            let qc = to_cell(q);
            let qi = geom.index(qc);
            if closed[qi] || trav.blocked[qi] {
                continue;
            }
            let ng = gc + w * res * cost.factor(trav.clearance[qi]);
            if ng < g[qi] {
                g[qi] = ng;
                parent[qi] = index;
                open.push(Open { f: ng + h(qc), g: ng, index: qi });
            }
        }
    }
    None
}

/// Greedy line-of-sight shortcutting: from each kept point jump to the
/// farthest later point still visible through free cells.
pub fn shortcut(trav: &Traversability, points: &[Vec3]) -> Vec<Vec3> {
    shortcut_with(trav, points, ClearanceCost::NONE)
}

/// [`shortcut`] that, with a clearance cost, also refuses shortcuts whose
/// clearance drops below that of the skipped section (capped at `soft`).
pub fn shortcut_with(trav: &Traversability, points: &[Vec3], cost: ClearanceCost) -> Vec<Vec3> {
    if points.len() <= 2 {
        return points.to_vec();
    }
    let tolerance = 0.5 * trav.geometry.resolution;
    let clearance_at = |p: &Vec3| {
        trav.geometry
            .cell_of(p)
            .map_or(f64::INFINITY, |c| trav.clearance(c))
    };
    let mut out = vec![points[0]];
    let mut i = 0;
    while i < points.len() - 1 {
        let mut j = points.len() - 1;
        while j > i + 1 {
            if let Some(seg) = trav.segment_clearance(&points[i], &points[j]) {
                if cost.weight <= 0.0 {
                    break;
                }
                let skipped = points[i + 1..j]
                    .iter()
                    .map(clearance_at)
                    .fold(f64::INFINITY, f64::min)
                    .min(cost.soft);
                if seg >= skipped - tolerance {
                    break;
                }
            }
            j -= 1;
        }
        out.push(points[j]);
        i = j;
    }
    out
}

/// Plans on a prepared traversability mask.
pub fn plan_on(trav: &Traversability, query: &PathQuery) -> Result<Vec<Vec3>> {
    let geom = &trav.geometry;
    let no_path = || Error::NoPath {
        start: query.start.into(),
        goal: query.goal.into(),
    };
    let snap = geom.resolution * START_SNAP_CELLS as f64 * 3f64.sqrt();
    let start = trav.nearest_free(&query.start, snap).ok_or_else(no_path)?;
    let goal = trav.nearest_free(&query.goal, snap).ok_or_else(no_path)?;
    let sc = geom.cell_of(&start).ok_or_else(no_path)?;
    let gc = geom.cell_of(&goal).ok_or_else(no_path)?;
    if sc == gc {
        return Ok(if (goal - start).norm() > 0.0 { vec![start, goal] } else { vec![start] });
    }
    let (cells, _) = search_with(trav, sc, gc, true, query.costs()).ok_or_else(no_path)?;
    let mut points = Vec::with_capacity(cells.len());
    points.push(start);
    points.extend(cells[1..cells.len() - 1].iter().map(|&c| geom.cell_center(c)));
    points.push(goal);
    Ok(shortcut_with(trav, &points, query.costs()))
}

/// Plans from `query.start` to `query.goal` over `grid`: first inside a
/// window around both ends, then over the whole grid if that fails.
pub fn plan(grid: &VoxelGrid, query: &PathQuery) -> Result<Vec<Vec3>> {
    let geom = &grid.geometry;
    for (name, p) in [("start", &query.start), ("goal", &query.goal)] {
        if !geom.contains(p) {
            return Err(Error::OutOfBounds(format!(
                "{name} ({:.3}, {:.3}, {:.3}) lies outside the grid",
                p.x, p.y, p.z
            )));
        }
    }
    if (query.start - query.goal).norm() == 0.0 {
        return Ok(vec![query.start]);
    }
    let margin = Vec3::repeat(WINDOW_MARGIN);
    let lo = query.start.inf(&query.goal) - margin;
    let hi = query.start.sup(&query.goal) + margin;
    let (window, offset) = geom.aligned_window(&lo, &hi)?;
    if window.dims != geom.dims {
        let local = Traversability::inflate(&grid.extract(&window, offset), query.inflation)?;
        if let Ok(path) = plan_on(&local, query) {
            return Ok(path);
        }
    }
    plan_on(&Traversability::inflate(grid, query.inflation)?, query)
}

/// Target `horizon` meters ahead: the goal if closer, otherwise the point
/// `horizon` along `previous` (from its closest point to `position`) or
/// along the straight line to the goal.
pub fn horizon_point(global_goal: &Vec3, position: &Vec3, horizon: f64, previous: Option<&[Vec3]>) -> Vec3 {
    if (global_goal - position).norm() <= horizon {
        return *global_goal;
    }
    if let Some(path) = previous.filter(|p| p.len() >= 2) {
        let (_, s0) = closest_arc_length(path, position);
        let p = crate::bspline::point_at_arc_length(path, s0 + horizon);
        // A previous path that ends short of the horizon is extended toward the goal.
        let remaining = crate::bspline::polyline_length(path) - s0;
        if remaining >= horizon {
            return p;
        }
    }
    position + (global_goal - position).normalize() * horizon
}

/// Receding-horizon target snapped to the nearest free cell within 1 m.
pub fn local_goal(
    trav: &Traversability,
    global_goal: &Vec3,
    position: &Vec3,
    horizon: f64,
    previous: Option<&[Vec3]>,
) -> Vec3 {
    let p = horizon_point(global_goal, position, horizon, previous);
    trav.nearest_free(&p, 1.0).unwrap_or(p)
}

/// Segment index and arc length of the point on `path` closest to `p`.
pub fn closest_arc_length(path: &[Vec3], p: &Vec3) -> (usize, f64) {
    let mut best = (f64::INFINITY, 0, 0.0);
    let mut acc = 0.0;
    for (i, w) in path.windows(2).enumerate() {
        let d = w[1] - w[0];
        let len = d.norm();
        let t = if len > 0.0 {
            ((p - w[0]).dot(&d) / (len * len)).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let dist = (w[0] + d * t - p).norm();
        if dist < best.0 {
            best = (dist, i, acc + t * len);
        }
        acc += len;
    }
    (best.1, best.2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bspline::polyline_length;

    fn grid(dims: [usize; 3]) -> VoxelGrid {
        VoxelGrid::new(GridGeometry::new(Vec3::zeros(), 0.1, dims).unwrap())
    }

    fn query(a: [f64; 3], b: [f64; 3], inflation: f64) -> PathQuery {
        PathQuery {
            inflation,
            ..PathQuery::new(Vec3::from(a), Vec3::from(b))
        }
    }

    #[test]
    fn empty_grid_gives_straight_segment() {
        let g = grid([40, 30, 10]);
        let path = plan(&g, &query([0.25, 0.25, 0.45], [3.55, 2.15, 0.55], 0.2)).unwrap();
        assert_eq!(path.len(), 2);
        assert_eq!(path[0], Vec3::new(0.25, 0.25, 0.45));
        assert_eq!(path[1], Vec3::new(3.55, 2.15, 0.55));
    }

    #[test]
    fn degenerate_query() {
        let g = grid([10, 10, 10]);
        let path = plan(&g, &query([0.5, 0.5, 0.5], [0.5, 0.5, 0.5], 0.2)).unwrap();
        assert_eq!(path, vec![Vec3::new(0.5, 0.5, 0.5)]);
    }

    fn wall_with_gap() -> VoxelGrid {
        // Wall at x = 10 cells, gap of 3 cells at y = 15..18 in a 20×20×3 grid.
        let mut g = grid([20, 20, 3]);
        for j in 0..20 {
            if !(15..18).contains(&j) {
                for k in 0..3 {
                    g.set([10, j, k], true);
                }
            }
        }
        g
    }

    #[test]
    fn path_through_gap_is_near_optimal() {
        let g = wall_with_gap();
        let q = query([0.25, 0.25, 0.15], [1.85, 0.25, 0.15], 0.0);
        let path = plan(&g, &q).unwrap();
        let trav = Traversability::inflate(&g, 0.0).unwrap();
        for w in path.windows(2) {
            assert!(trav.segment_free(&w[0], &w[1]));
        }
        assert!(path.iter().any(|p| p.y > 1.4));
        let (_, optimal) = search(
            &trav,
            g.geometry.cell_of(&q.start).unwrap(),
            g.geometry.cell_of(&q.goal).unwrap(),
            false,
        )
        .unwrap();
        assert!(polyline_length(&path) <= 1.1 * optimal);
    }

    #[test]
    fn astar_matches_dijkstra() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let mut g = grid([15, 15, 4]);
            for c in 0..g.geometry.len() {
                if rng.gen_bool(0.25) {
                    g.set(g.geometry.cell(c), true);
                }
            }
            g.set([0, 0, 0], false);
            g.set([14, 14, 3], false);
            let trav = Traversability::inflate(&g, 0.0).unwrap();
            let a = search(&trav, [0, 0, 0], [14, 14, 3], true).map(|r| r.1);
            let d = search(&trav, [0, 0, 0], [14, 14, 3], false).map(|r| r.1);
            match (a, d) {
                (Some(a), Some(d)) => assert!((a - d).abs() < 1e-9, "{a} vs {d}"),
                (None, None) => {}
                other => panic!("reachability differs: {other:?}"),
            }
        }
    }

    #[test]
    fn blocked_start_snaps_to_free_cell() {
        let mut g = grid([30, 30, 3]);
        for k in 0..3 {
            g.set([5, 5, k], true);
        }
        let q = query([0.55, 0.55, 0.15], [2.55, 2.55, 0.15], 0.15);
        let path = plan(&g, &q).unwrap();
        let trav = Traversability::inflate(&g, 0.15).unwrap();
        assert!(trav.is_free(g.geometry.cell_of(&path[0]).unwrap()));
        assert!((path[0] - q.start).norm() <= 0.3 * 3f64.sqrt() + 1e-9);
    }

    #[test]
    fn unreachable_goal() {
        let mut g = grid([20, 20, 3]);
        for j in 0..20 {
            for k in 0..3 {
                g.set([10, j, k], true);
            }
        }
        let err = plan(&g, &query([0.25, 0.25, 0.15], [1.85, 0.25, 0.15], 0.0)).unwrap_err();
        assert!(matches!(err, Error::NoPath { .. }));
    }

    #[test]
    fn shortcut_never_lengthens() {
        let trav = Traversability::free(GridGeometry::new(Vec3::zeros(), 0.1, [20, 20, 3]).unwrap());
        let zig: Vec<Vec3> = (0..10)
            .map(|i| Vec3::new(0.15 + 0.15 * i as f64, 0.5 + 0.3 * (i % 2) as f64, 0.15))
            .collect();
        let s = shortcut(&trav, &zig);
        assert_eq!(s, vec![zig[0], zig[9]]);
        assert!(polyline_length(&s) <= polyline_length(&zig));
    }

    #[test]
    fn horizon_targets() {
        let pos = Vec3::new(1.0, 5.0, 1.0);
        let near = Vec3::new(4.0, 5.0, 1.0);
        assert_eq!(horizon_point(&near, &pos, 7.0, None), near);
        let far = Vec3::new(31.0, 5.0, 1.0);
        let p = horizon_point(&far, &pos, 7.0, None);
        assert!((p - Vec3::new(8.0, 5.0, 1.0)).norm() < 1e-12);
        let prev = [pos, Vec3::new(4.0, 8.0, 1.0), Vec3::new(31.0, 8.0, 1.0)];
        let p = horizon_point(&far, &pos, 7.0, Some(&prev));
        let s = 7.0 - 18f64.sqrt();
        assert!((p - Vec3::new(4.0 + s, 8.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn horizon_point_inside_obstacle_is_snapped() {
        let mut g = grid([120, 60, 3]);
        for i in 75..85 {
            for j in 0..60 {
                for k in 0..3 {
                    g.set([i, j, k], true);
                }
            }
        }
        let trav = Traversability::inflate(&g, 0.0).unwrap();
        let pos = Vec3::new(0.55, 3.05, 0.15);
        let goal = Vec3::new(11.55, 3.05, 0.15);
        let lg = local_goal(&trav, &goal, &pos, 7.0, None);
        // Brute-force oracle: nearest free cell center to (7.55, 3.05, 0.15).
        let raw = Vec3::new(7.55, 3.05, 0.15);
        let oracle = (0..g.geometry.len())
            .map(|i| g.geometry.cell(i))
            .filter(|&c| !g.is_occupied(c))
            .map(|c| g.geometry.cell_center(c))
            .min_by(|a, b| (a - raw).norm().total_cmp(&(b - raw).norm()))
            .unwrap();
        assert!(((lg - raw).norm() - (oracle - raw).norm()).abs() < 1e-9);
        assert!((lg - raw).norm() <= 1.0);
    }
}

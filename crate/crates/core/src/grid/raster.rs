//! Scene and path rasterization.

use super::{Cell, GridGeometry, VoxelGrid};
use crate::error::{Error, Result};
use crate::scene::{Bounds, Obstacle};
use crate::Vec3;

/// Occupancy grid over `bounds`: a cell is occupied iff its center lies
/// inside some obstacle.
pub fn rasterize_scene(obstacles: &[Obstacle], bounds: &Bounds, resolution: f64) -> Result<VoxelGrid> {
    let geom = GridGeometry::from_bounds(bounds.min_v(), bounds.max_v(), resolution)?;
    if let Some(i) = obstacles.iter().position(|o| !o.intersects(bounds)) {
        return Err(Error::InvalidArgument(format!(
            "obstacle {i} does not intersect the scene bounds"
        )));
    }
    let mut grid = VoxelGrid::new(geom);
    for o in obstacles {
        for_each_obstacle_cell(&geom, o, |c| grid.set(c, true));
    }
    Ok(grid)
}

/// Visits every cell of `geom` whose center lies inside `o`.
pub fn for_each_obstacle_cell(geom: &GridGeometry, o: &Obstacle, mut visit: impl FnMut(Cell)) {
    let (lo, hi) = o.aabb();
    let res = geom.resolution;
    let mut range = [(0usize, 0usize); 3];
    for a in 0..3 {
        let n = geom.dims[a] as i64;
        // Cell centers c with lo <= origin + (c + 0.5) res <= hi.
        let first = ((lo[a] - geom.origin[a]) / res - 0.5).ceil() as i64;
        let last = ((hi[a] - geom.origin[a]) / res - 0.5).floor() as i64;
        let first = first.clamp(0, n);
        let last = last.clamp(-1, n - 1);
        range[a] = (first as usize, (last + 1).max(first) as usize);
    }
    for i in range[0].0..range[0].1 {
        for j in range[1].0..range[1].1 {
            for k in range[2].0..range[2].1 {
                let c = [i, j, k];
                if o.contains(&geom.cell_center(c)) {
                    visit(c);
                }
            }
        }
    }
}

/// Visits every cell crossed by the segment `a → b` (3-D digital line
/// traversal), including both end cells. Cells outside the lattice are skipped.
pub fn traverse_segment(geom: &GridGeometry, a: &Vec3, b: &Vec3, mut visit: impl FnMut(Cell)) {
    let start = geom.cell_of_unchecked(a);
    let end = geom.cell_of_unchecked(b);
    let d = b - a;
    let res = geom.resolution;

    let mut cell = start;
    let mut step = [0i64; 3];
    let mut t_max = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    for ax in 0..3 {
        if d[ax] > 0.0 {
            step[ax] = 1;
            let boundary = geom.origin[ax] + (cell[ax] + 1) as f64 * res;
            t_max[ax] = (boundary - a[ax]) / d[ax];
            t_delta[ax] = res / d[ax];
        } else if d[ax] < 0.0 {
            step[ax] = -1;
            let boundary = geom.origin[ax] + cell[ax] as f64 * res;
            t_max[ax] = (boundary - a[ax]) / d[ax];
            t_delta[ax] = -res / d[ax];
        }
    }

    let emit = |c: [i64; 3], visit: &mut dyn FnMut(Cell)| {
        if geom.contains_cell(c) {
            visit([c[0] as usize, c[1] as usize, c[2] as usize]);
        }
    };
    emit(cell, &mut visit);
    let budget: i64 = (0..3).map(|ax| (end[ax] - start[ax]).abs()).sum::<i64>() + 3;
    for _ in 0..budget {
        if cell == end {
            return;
        }
        let ax = if t_max[0] <= t_max[1] && t_max[0] <= t_max[2] {
            0
        } else if t_max[1] <= t_max[2] {
            1
        } else {
            2
        };
        if t_max[ax] > 1.0 {
            break;
        }
        cell[ax] += step[ax];
        t_max[ax] += t_delta[ax];
        emit(cell, &mut visit);
    }
    if cell != end {
        emit(end, &mut visit);
    }
}

/// Marks the cells holding path points plus every cell crossed by the
/// segments between consecutive points.
pub fn rasterize_path(points: &[Vec3], geometry: &GridGeometry) -> Result<VoxelGrid> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("path has no points".into()));
    }
    if let Some(i) = points.iter().position(|p| geometry.cell_of(p).is_none()) {
        let p = points[i];
        return Err(Error::OutOfBounds(format!(
            "path point {i} ({:.3}, {:.3}, {:.3}) lies outside the grid",
            p.x, p.y, p.z
        )));
    }
    let mut grid = VoxelGrid::new(*geometry);
    for p in points {
        grid.set(geometry.cell_of(p).unwrap(), true);
    }
    for w in points.windows(2) {
        traverse_segment(geometry, &w[0], &w[1], |c| grid.set(c, true));
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::euclidean_distance_transform;
    use proptest::prelude::*;

    fn bounds(max: [f64; 3]) -> Bounds {
        Bounds {
            min: [0.0; 3],
            max,
        }
    }

    #[test]
    fn empty_scene_is_free() {
        let g = rasterize_scene(&[], &bounds([1.0, 1.0, 1.0]), 0.1).unwrap();
        assert_eq!(g.occupied_count(), 0);
    }

    #[test]
    fn covering_box_fills_everything() {
        let b = bounds([1.0, 2.0, 0.5]);
        let g = rasterize_scene(&[Obstacle::Box { min: b.min, max: b.max }], &b, 0.1).unwrap();
        assert_eq!(g.occupied_count(), g.geometry.len());
    }

    #[test]
    fn invalid_inputs() {
        assert!(rasterize_scene(&[], &bounds([1.0, 0.0, 1.0]), 0.1).is_err());
        assert!(rasterize_scene(&[], &bounds([1.0, 1.0, 1.0]), -0.1).is_err());
        let far = Obstacle::Box {
            min: [5.0; 3],
            max: [6.0; 3],
        };
        assert!(rasterize_scene(&[far], &bounds([1.0, 1.0, 1.0]), 0.1).is_err());
    }

    #[test]
    fn cylinder_matches_brute_force() {
        let b = bounds([3.0, 3.0, 2.0]);
        let cyl = Obstacle::Cylinder {
            center: [1.43, 1.61],
            radius: 0.5,
            z_min: 0.3,
            z_max: 1.7,
        };
        let g = rasterize_scene(&[cyl], &b, 0.1).unwrap();
        let brute = (0..g.geometry.len())
            .filter(|&i| cyl.contains(&g.geometry.cell_center(g.geometry.cell(i))))
            .count();
        assert_eq!(g.occupied_count(), brute);
        assert!(brute > 0);
    }

    #[test]
    fn path_singletons_and_segments() {
        let geom = GridGeometry::new(Vec3::zeros(), 0.1, [20, 5, 5]).unwrap();
        let one = rasterize_path(&[Vec3::new(0.55, 0.25, 0.25)], &geom).unwrap();
        assert_eq!(one.occupied_count(), 1);
        let same = rasterize_path(&[Vec3::new(0.51, 0.21, 0.21), Vec3::new(0.59, 0.28, 0.22)], &geom).unwrap();
        assert_eq!(same.occupied_count(), 1);
        // Centers of cells 3 and 12 along x: cells 3..=12 are crossed.
        let seg = rasterize_path(
            &[geom.cell_center([3, 2, 2]), geom.cell_center([12, 2, 2])],
            &geom,
        )
        .unwrap();
        assert_eq!(seg.occupied_count(), 10);
        let err = rasterize_path(&[Vec3::new(0.5, 0.2, 0.2), Vec3::new(5.0, 0.2, 0.2)], &geom).unwrap_err();
        assert!(err.to_string().contains("path point 1"));
    }

    proptest! {
        #[test]
        fn traversal_is_face_connected(
            ax in 0.0f64..2.0, ay in 0.0f64..2.0, az in 0.0f64..1.0,
            bx in 0.0f64..2.0, by in 0.0f64..2.0, bz in 0.0f64..1.0,
        ) {
            let geom = GridGeometry::new(Vec3::zeros(), 0.1, [20, 20, 10]).unwrap();
            let a = Vec3::new(ax, ay, az);
            let b = Vec3::new(bx, by, bz);
            let mut cells = Vec::new();
            traverse_segment(&geom, &a, &b, |c| cells.push(c));
            prop_assert_eq!(cells[0], geom.cell_of(&a).unwrap());
            prop_assert_eq!(*cells.last().unwrap(), geom.cell_of(&b).unwrap());
            for w in cells.windows(2) {
                let l1: usize = (0..3).map(|i| w[0][i].abs_diff(w[1][i])).sum();
                prop_assert_eq!(l1, 1);
            }
        }

        #[test]
        fn path_cells_have_zero_distance(
            pts in proptest::collection::vec((0.0f64..2.0, 0.0f64..1.0, 0.0f64..1.0), 1..8)
        ) {
            let geom = GridGeometry::new(Vec3::zeros(), 0.1, [20, 10, 10]).unwrap();
            let pts: Vec<Vec3> = pts.into_iter().map(|(x, y, z)| Vec3::new(x, y, z)).collect();
            let grid = rasterize_path(&pts, &geom).unwrap();
            let field = euclidean_distance_transform(&grid).unwrap();
            for p in &pts {
                prop_assert_eq!(field.at(geom.cell_of(p).unwrap()), 0.0);
            }
        }
    }
}

//! Voxel lattices and the distance fields computed over them.
//!
//! Cells are addressed `(i, j, k)` along `(x, y, z)` and stored row-major
//! with `k` fastest. `origin` is the metric position of the minimum corner of
//! cell `(0, 0, 0)`; cell centers sit at `origin + (idx + 0.5) * resolution`.

mod edt;
mod fit;
pub mod io;
mod raster;
mod sample;

pub use edt::{euclidean_distance_transform, euclidean_distance_transform_with};
pub use fit::{fit_quadratic, solve_quadratic_fit, GradientFit, QUADRATIC_TERMS};
pub use raster::{for_each_obstacle_cell, rasterize_path, rasterize_scene, traverse_segment};

use crate::error::{Error, Result};
use crate::Vec3;

/// Default lattice spacing in meters.
pub const DEFAULT_RESOLUTION: f64 = 0.1;

pub type Cell = [usize; 3];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry {
    pub origin: Vec3,
    pub resolution: f64,
    pub dims: [usize; 3],
}

impl GridGeometry {
    pub fn new(origin: Vec3, resolution: f64, dims: [usize; 3]) -> Result<Self> {
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        if dims.iter().any(|&n| n < 3) {
            return Err(Error::InvalidArgument(format!(
                "every axis needs at least 3 cells, got {dims:?}"
            )));
        }
        if !origin.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite origin".into()));
        }
        Ok(Self {
            origin,
            resolution,
            dims,
        })
    }

    /// Lattice covering the box `[min, max]`. An axis whose extent is within
    /// 1e-9 cells of an integer count uses that count, otherwise it rounds up.
    pub fn from_bounds(min: Vec3, max: Vec3, resolution: f64) -> Result<Self> {
        if !(resolution > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        let mut dims = [0usize; 3];
        for a in 0..3 {
            let extent = max[a] - min[a];
            if !(extent > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "empty bounds on axis {a}: [{}, {}]",
                    min[a], max[a]
                )));
            }
            let cells = extent / resolution;
            let rounded = cells.round();
            dims[a] = if (cells - rounded).abs() < 1e-9 {
                rounded as usize
            } else {
                cells.ceil() as usize
            };
        }
        Self::new(min, resolution, dims)
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, c: Cell) -> usize {
        (c[0] * self.dims[1] + c[1]) * self.dims[2] + c[2]
    }

    #[inline]
    pub fn cell(&self, index: usize) -> Cell {
        let k = index % self.dims[2];
        let rest = index / self.dims[2];
        [rest / self.dims[1], rest % self.dims[1], k]
    }

    #[inline]
    pub fn cell_center(&self, c: Cell) -> Vec3 {
        Vec3::new(
            self.origin.x + (c[0] as f64 + 0.5) * self.resolution,
            self.origin.y + (c[1] as f64 + 0.5) * self.resolution,
            self.origin.z + (c[2] as f64 + 0.5) * self.resolution,
        )
    }

    pub fn max_corner(&self) -> Vec3 {
        self.origin
            + Vec3::new(
                self.dims[0] as f64,
                self.dims[1] as f64,
                self.dims[2] as f64,
            ) * self.resolution
    }

    /// Cell containing `p`; points on the maximum face belong to the last cell.
    pub fn cell_of(&self, p: &Vec3) -> Option<Cell> {
        let mut c = [0usize; 3];
        for a in 0..3 {
            let f = (p[a] - self.origin[a]) / self.resolution;
            if !(f >= 0.0) || f > self.dims[a] as f64 {
                return None;
            }
            c[a] = (f.floor() as usize).min(self.dims[a] - 1);
        }
        Some(c)
    }

    /// Signed cell coordinates of `p`; may lie outside the lattice.
    pub fn cell_of_unchecked(&self, p: &Vec3) -> [i64; 3] {
        let mut c = [0i64; 3];
        for a in 0..3 {
            c[a] = ((p[a] - self.origin[a]) / self.resolution).floor() as i64;
        }
        c
    }

    pub fn contains_cell(&self, c: [i64; 3]) -> bool {
        (0..3).all(|a| c[a] >= 0 && (c[a] as usize) < self.dims[a])
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        self.cell_of(p).is_some()
    }

    /// Sub-lattice aligned with this one that covers `[min, max]` clipped to
    /// the parent, plus the parent cell at which the sub-lattice starts.
    pub fn aligned_window(&self, min: &Vec3, max: &Vec3) -> Result<(GridGeometry, Cell)> {
        let mut lo = [0usize; 3];
        let mut dims = [0usize; 3];
        for a in 0..3 {
            let n = self.dims[a] as i64;
            let l = (((min[a] - self.origin[a]) / self.resolution).floor() as i64).clamp(0, n - 1);
            let h = (((max[a] - self.origin[a]) / self.resolution).ceil() as i64).clamp(1, n);
            let mut l = l;
            let mut h = h.max(l + 1);
            while h - l < 3 {
                if h < n {
                    h += 1;
                } else {
                    l -= 1;
                }
            }
            lo[a] = l as usize;
            dims[a] = (h - l) as usize;
        }
        let origin = self.origin
            + Vec3::new(lo[0] as f64, lo[1] as f64, lo[2] as f64) * self.resolution;
        Ok((GridGeometry::new(origin, self.resolution, dims)?, lo))
    }

    /// Lattice with this resolution whose cell centers sit at whole
    /// multiples of the resolution, covering `[min, max]`.
    pub fn snapped(min: &Vec3, max: &Vec3, resolution: f64) -> Result<GridGeometry> {
        if !(resolution > 0.0) || (0..3).any(|a| !(max[a] >= min[a])) {
            return Err(Error::InvalidArgument("snapped lattice needs ordered bounds".into()));
        }
        let lo = min.map(|v| ((v / resolution + 0.5).floor() - 0.5) * resolution);
        let hi = max.map(|v| ((v / resolution - 0.5).ceil() + 0.5) * resolution);
        let dims = [0, 1, 2].map(|a| ((hi[a] - lo[a]) / resolution).round().max(1.0) as usize);
        GridGeometry::new(lo, resolution, dims)
    }
}

/// Boolean occupancy over a lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub geometry: GridGeometry,
    occupancy: Vec<bool>,
}

impl VoxelGrid {
    pub fn new(geometry: GridGeometry) -> Self {
        Self {
            occupancy: vec![false; geometry.len()],
            geometry,
        }
    }

    pub fn from_occupancy(geometry: GridGeometry, occupancy: Vec<bool>) -> Result<Self> {
        if occupancy.len() != geometry.len() {
            return Err(Error::InvalidArgument(format!(
                "occupancy has {} entries, lattice has {}",
                occupancy.len(),
                geometry.len()
            )));
        }
        Ok(Self {
            geometry,
            occupancy,
        })
    }

    #[inline]
    pub fn is_occupied(&self, c: Cell) -> bool {
        self.occupancy[self.geometry.index(c)]
    }

    #[inline]
    pub fn set(&mut self, c: Cell, occupied: bool) {
        let i = self.geometry.index(c);
        self.occupancy[i] = occupied;
    }

    pub fn occupancy(&self) -> &[bool] {
        &self.occupancy
    }

    pub fn occupied_count(&self) -> usize {
        self.occupancy.iter().filter(|&&o| o).count()
    }

    pub fn occupied_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.occupancy
            .iter()
            .enumerate()
            .filter(|(_, &o)| o)
            .map(|(i, _)| self.geometry.cell(i))
    }

    /// Occupied fraction of all cells.
    pub fn density(&self) -> f64 {
        self.occupied_count() as f64 / self.geometry.len() as f64
    }

    /// Copies the cells of `window` (aligned at parent cell `lo`) out of this grid.
    pub fn extract(&self, window: &GridGeometry, lo: Cell) -> VoxelGrid {
        let mut out = VoxelGrid::new(*window);
        let [nx, ny, nz] = window.dims;
        for i in 0..nx {
            for j in 0..ny {
                let src = self.geometry.index([lo[0] + i, lo[1] + j, lo[2]]);
                let dst = window.index([i, j, 0]);
                out.occupancy[dst..dst + nz].copy_from_slice(&self.occupancy[src..src + nz]);
            }
        }
        out
    }
}

/// Per-cell Euclidean distance in meters over a lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    pub geometry: GridGeometry,
    values: Vec<f64>,
}

impl DistanceField {
    pub fn from_values(geometry: GridGeometry, values: Vec<f64>) -> Result<Self> {
        if values.len() != geometry.len() {
            return Err(Error::InvalidArgument(format!(
                "{} values for a lattice of {} cells",
                values.len(),
                geometry.len()
            )));
        }
        Ok(Self { geometry, values })
    }

    /// Field whose value at each cell center is `f(center)`.
    pub fn from_fn(geometry: GridGeometry, f: impl Fn(&Vec3) -> f64) -> Self {
        let values = (0..geometry.len())
            .map(|i| f(&geometry.cell_center(geometry.cell(i))))
            .collect();
        Self { geometry, values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, c: Cell) -> f64 {
        self.values[self.geometry.index(c)]
    }
}

//! Exact Euclidean distance transform.
//!
//! Three 1-D passes of the lower envelope of parabolas (Felzenszwalb and
//! Huttenlocher) over squared distances in cell units. Squared distances are
//! integers, so every intermediate value is exact in `f64`.

use super::{DistanceField, VoxelGrid};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};

pub fn euclidean_distance_transform(grid: &VoxelGrid) -> Result<DistanceField> {
    euclidean_distance_transform_with(grid, Execution::default())
}

pub fn euclidean_distance_transform_with(
    grid: &VoxelGrid,
    exec: Execution,
) -> Result<DistanceField> {
    if !grid.occupancy().iter().any(|&o| o) {
        return Err(Error::AllFree);
    }
    let geom = grid.geometry;
    let [nx, ny, nz] = geom.dims;
    let plane = ny * nz;

    let mut sq: Vec<f64> = grid
        .occupancy()
        .iter()
        .map(|&o| if o { 0.0 } else { f64::INFINITY })
        .collect();

    // z lines are contiguous.
    exec::for_each_chunk_mut(exec, &mut sq, nz, |_, line| {
        let mut env = Envelope::with_capacity(nz);
        let input = line.to_vec();
        env.transform(&input, line);
    });

    // y lines live inside one x slab.
    exec::for_each_chunk_mut(exec, &mut sq, plane, |_, slab| {
        let mut env = Envelope::with_capacity(ny);
        let mut input = vec![0.0; ny];
        let mut output = vec![0.0; ny];
        for k in 0..nz {
            for j in 0..ny {
                input[j] = slab[j * nz + k];
            }
            env.transform(&input, &mut output);
            for j in 0..ny {
                slab[j * nz + k] = output[j];
            }
        }
    });

    // x lines: transform into a (j, k)-major buffer, then scatter back.
    let mut transposed = vec![0.0; geom.len()];
    {
        let src = &sq;
        exec::for_each_chunk_mut(exec, &mut transposed, nx, |jk, out| {
            let mut env = Envelope::with_capacity(nx);
            let input: Vec<f64> = (0..nx).map(|i| src[i * plane + jk]).collect();
            env.transform(&input, out);
        });
    }
    let res = geom.resolution;
    exec::for_each_chunk_mut(exec, &mut sq, plane, |i, slab| {
        for (jk, v) in slab.iter_mut().enumerate() {
            *v = transposed[jk * nx + i].sqrt() * res;
        }
    });

    DistanceField::from_values(geom, sq)
}

struct Envelope {
    sites: Vec<usize>,
    bounds: Vec<f64>,
}

impl Envelope {
    fn with_capacity(n: usize) -> Self {
        Self {
            sites: Vec::with_capacity(n),
            bounds: Vec::with_capacity(n + 1),
        }
    }

    /// `out[q] = min_p (q - p)^2 + f[p]` over the finite entries of `f`.
    fn transform(&mut self, f: &[f64], out: &mut [f64]) {
        self.sites.clear();
        self.bounds.clear();
        for (q, &fq) in f.iter().enumerate() {
            if !fq.is_finite() {
                continue;
            }
            let qf = q as f64;
            loop {
                let Some(&p) = self.sites.last() else {
                    self.sites.push(q);
                    self.bounds.push(f64::NEG_INFINITY);
                    break;
                };
                let pf = p as f64;
                let s = ((fq + qf * qf) - (f[p] + pf * pf)) / (2.0 * (qf - pf));
                if s <= *self.bounds.last().unwrap() {
                    self.sites.pop();
                    self.bounds.pop();
                } else {
                    self.sites.push(q);
                    self.bounds.push(s);
                    break;
                }
            }
        }
        if self.sites.is_empty() {
            out.fill(f64::INFINITY);
            return;
        }
        let mut k = 0;
        for (q, o) in out.iter_mut().enumerate() {
            let qf = q as f64;
            while k + 1 < self.sites.len() && self.bounds[k + 1] < qf {
                k += 1;
            }
            let p = self.sites[k];
            let d = qf - p as f64;
            *o = d * d + f[p];
        }
    }
}

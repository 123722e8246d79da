//! Exact Euclidean distance from every occupied voxel to the nearest surface
//! voxel.
//!
//! This is the separable lower-envelope transform run along z, then y, then x,
//! but each 1-D pass only visits maximal runs of consecutive occupied voxels.
//! Restricting to runs is exact at occupied voxels: every lattice point
//! strictly closer to `v` than its nearest surface voxel is itself occupied,
//! so all the intermediate points the separable passes rely on lie in the same
//! run as the voxel being updated. Distances stay squared integers until the
//! very end.

use std::io::Write;

use rayon::prelude::*;

use crate::grid::{SurfaceMask, VoxelCoord, VoxelGrid, VoxelId};

#[derive(Clone, Debug, PartialEq)]
pub struct DistanceField {
    d2: Vec<u64>,
    d: Vec<f64>,
    d2_max: u64,
}

impl DistanceField {
    /// Squared distance, exact.
    #[inline]
    pub fn dist2(&self, id: VoxelId) -> u64 {
        self.d2[id as usize]
    }

    #[inline]
    pub fn dist(&self, id: VoxelId) -> f64 {
        self.d[id as usize]
    }

    pub fn squared(&self) -> &[u64] {
        &self.d2
    }

    pub fn values(&self) -> &[f64] {
        &self.d
    }

    pub fn max_squared(&self) -> u64 {
        self.d2_max
    }

    pub fn max(&self) -> f64 {
        (self.d2_max as f64).sqrt()
    }

    /// Search weights `w = d_max - d`: zero on the deepest voxels, `d_max` on
    /// the surface.
    pub fn weights(&self) -> Vec<f64> {
        let dmax = self.max();
        self.d.iter().map(|&d| dmax - d).collect()
    }

    /// Writes `x y z d` lines in lexicographic voxel order.
    pub fn dump(&self, grid: &VoxelGrid, w: &mut impl Write) -> std::io::Result<()> {
        for (c, d) in grid.coords().iter().zip(&self.d) {
            writeln!(w, "{} {} {} {}", c.x, c.y, c.z, d)?;
        }
        Ok(())
    }
}

/// Per-voxel weights `d_max - d` for the weighted searches.
pub fn weights_from_distance(field: &DistanceField) -> Vec<f64> {
    field.weights()
}

pub fn distance_transform(grid: &VoxelGrid, mask: &SurfaceMask) -> DistanceField {
    let n = grid.len();
    let mut d2 = vec![0u64; n];

    // z pass: ids are sorted by (x, y, z), so z-runs are contiguous id ranges
    let z_runs = contiguous_z_runs(grid);
    let parts: Vec<Vec<u64>> = z_runs
        .par_iter()
        .map(|&(s, e)| nearest_marked_1d(&mask.as_slice()[s..e]))
        .collect();
    for (&(s, _), vals) in z_runs.iter().zip(parts) {
        d2[s..s + vals.len()].copy_from_slice(&vals);
    }

    for axis in [1usize, 0] {
        let runs = axis_runs(grid, axis);
        let parts: Vec<Vec<u64>> = runs
            .par_iter()
            .map(|run| {
                let f: Vec<u64> = run.iter().map(|&i| d2[i as usize]).collect();
                lower_envelope(&f)
            })
            .collect();
        for (run, vals) in runs.iter().zip(parts) {
            for (&i, v) in run.iter().zip(vals) {
                d2[i as usize] = v;
            }
        }
    }

    let d2_max = d2.iter().copied().max().unwrap_or(0);
    let d = d2.iter().map(|&v| (v as f64).sqrt()).collect();
    DistanceField { d2, d, d2_max }
}

fn contiguous_z_runs(grid: &VoxelGrid) -> Vec<(usize, usize)> {
    let coords = grid.coords();
    let mut runs = Vec::new();
    let mut start = 0;
    for i in 1..=coords.len() {
        let breaks = i == coords.len() || {
            let (a, b) = (coords[i - 1], coords[i]);
            a.x != b.x || a.y != b.y || a.z + 1 != b.z
        };
        if breaks {
            runs.push((start, i));
            start = i;
        }
    }
    runs
}

fn step(c: VoxelCoord, axis: usize, delta: i64) -> Option<VoxelCoord> {
    match axis {
        0 => c.offset(delta, 0, 0),
        1 => c.offset(0, delta, 0),
        _ => c.offset(0, 0, delta),
    }
}

/// Maximal runs of occupied voxels along `axis`, each as ids in axis order.
fn axis_runs(grid: &VoxelGrid, axis: usize) -> Vec<Vec<VoxelId>> {
    (0..grid.len() as VoxelId)
        .into_par_iter()
        .filter(|&i| {
            step(grid.coord(i), axis, -1)
                .and_then(|p| grid.id_of(p))
                .is_none()
        })
        .map(|start| {
            let mut run = vec![start];
            let mut c = grid.coord(start);
            while let Some(next) = step(c, axis, 1).and_then(|p| grid.id_of(p)) {
                run.push(next);
                c = grid.coord(next);
            }
            run
        })
        .collect()
}

/// Squared distance to the nearest marked position on a 1-D run. Runs always
/// start and end with marked (surface) voxels.
fn nearest_marked_1d(marked: &[bool]) -> Vec<u64> {
    let m = marked.len();
    let mut out = vec![u64::MAX; m];
    let mut last: Option<usize> = None;
    for i in 0..m {
        if marked[i] {
            last = Some(i);
        }
        if let Some(l) = last {
            out[i] = (i - l) as u64;
        }
    }
    last = None;
    for i in (0..m).rev() {
        if marked[i] {
            last = Some(i);
        }
        if let Some(l) = last {
            out[i] = out[i].min((l - i) as u64);
        }
    }
    for v in &mut out {
        debug_assert!(*v != u64::MAX, "run without a surface voxel");
        *v = v.saturating_mul(*v);
    }
    out
}

/// `out[p] = min_q f[q] + (p - q)^2`, via the lower envelope of parabolas.
fn lower_envelope(f: &[u64]) -> Vec<u64> {
    let m = f.len();
    if m == 1 {
        return f.to_vec();
    }
    let eval = |x: usize, i: usize| -> u64 {
        let dx = x.abs_diff(i) as u64;
        f[i] + dx * dx
    };
    // largest x at which parabola i is still no worse than parabola u (i < u)
    let sep = |i: usize, u: usize| -> i128 {
        let num = (u * u) as i128 - (i * i) as i128 + f[u] as i128 - f[i] as i128;
        num.div_euclid(2 * (u - i) as i128)
    };
    let mut s = vec![0usize; m];
    let mut t = vec![0usize; m];
    let mut q: isize = 0;
    for u in 1..m {
        while q >= 0 && eval(t[q as usize], s[q as usize]) > eval(t[q as usize], u) {
            q -= 1;
        }
        if q < 0 {
            q = 0;
            s[0] = u;
        } else {
            let w = 1 + sep(s[q as usize], u);
            if w >= 0 && (w as usize) < m {
                q += 1;
                s[q as usize] = u;
                t[q as usize] = w as usize;
            }
        }
    }
    let mut out = vec![0u64; m];
    for u in (0..m).rev() {
        out[u] = eval(u, s[q as usize]);
        if u == t[q as usize] {
            q -= 1;
        }
    }
    out
}

//! Iterative surface noise: each round erodes some surface voxels and grows
//! bumps on others.
//!
//! Randomness comes from PCG-XSL-RR 128/64 (`Pcg64`) seeded through
//! `seed_from_u64`, with bounded integers drawn by rejection, so a seed gives
//! the same grid on every platform.

use rand_core::{Rng, SeedableRng};
use rand_pcg::Pcg64;
use rustc_hash::FxHashSet;

use crate::error::{Error, Result};
use crate::grid::{VoxelCoord, VoxelGrid, VoxelId, OFFSETS_26};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    /// Fraction of voxels altered per round; half deleted, half added.
    pub p: f64,
    pub iterations: usize,
    pub rng_seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec { p: 0.05, iterations: 1, rng_seed: 0 }
    }
}

/// Per-run bookkeeping.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NoiseReport {
    pub deleted: usize,
    pub added: usize,
    /// Additions dropped after ten colliding draws.
    pub skipped: usize,
}

fn below(rng: &mut Pcg64, n: usize) -> usize {
    let n = n as u64;
    // reject the top partial block so every residue is equally likely
    let zone = u64::MAX - (u64::MAX % n + 1) % n;
    loop {
        let x = rng.next_u64();
        if x <= zone {
            return (x % n) as usize;
        }
    }
}

/// `k` distinct items of `pool`, in draw order.
fn sample<T: Copy>(rng: &mut Pcg64, pool: &mut [T], k: usize) -> Vec<T> {
    for i in 0..k {
        let j = i + below(rng, pool.len() - i);
        pool.swap(i, j);
    }
    pool[..k].to_vec()
}

pub fn inject_noise(grid: &VoxelGrid, spec: &NoiseSpec) -> Result<VoxelGrid> {
    Ok(inject_noise_report(grid, spec)?.0)
}

pub fn inject_noise_report(grid: &VoxelGrid, spec: &NoiseSpec) -> Result<(VoxelGrid, NoiseReport)> {
    if !(spec.p > 0.0 && spec.p < 1.0) {
        return Err(Error::InvalidParameter(format!("noise proportion p = {} must lie in (0, 1)", spec.p)));
    }
    let mut rng = Pcg64::seed_from_u64(spec.rng_seed);
    let mut report = NoiseReport::default();
    let mut g = grid.clone();
    for iter in 1..=spec.iterations {
        g = noise_round(&g, spec.p, iter, &mut rng, &mut report)?;
    }
    if report.skipped > 0 {
        log::info!("noise: {} additions skipped after repeated collisions", report.skipped);
    }
    Ok((g, report))
}

fn noise_round(g: &VoxelGrid, p: f64, iter: usize, rng: &mut Pcg64, report: &mut NoiseReport) -> Result<VoxelGrid> {
    let n = g.len();
    let m = ((p / 2.0) * n as f64).floor() as usize;
    let mask = g.surface_mask();
    let mut deletable: Vec<VoxelId> = mask
        .surface_ids()
        .filter(|&i| g.neighbor_ids(i).iter().any(|&j| !mask.is_surface(j)))
        .collect();
    if deletable.len() < m {
        return Err(Error::InsufficientCandidates { iteration: iter, needed: m, available: deletable.len() });
    }
    let doomed = sample(rng, &mut deletable, m);
    let mut gone = vec![false; n];
    for &i in &doomed {
        gone[i as usize] = true;
    }

    // hosts come from the same snapshot; a voxel about to vanish cannot host
    let empty_neighbors = |i: VoxelId| -> Vec<VoxelCoord> {
        let c = g.coord(i);
        OFFSETS_26
            .iter()
            .filter_map(|o| c.offset(o[0], o[1], o[2]))
            .filter(|&q| g.in_bounds(q) && !g.contains(q))
            .collect()
    };
    let mut hosts: Vec<VoxelId> = mask
        .surface_ids()
        .filter(|&i| !gone[i as usize] && !empty_neighbors(i).is_empty())
        .collect();
    if hosts.len() < m {
        return Err(Error::InsufficientCandidates { iteration: iter, needed: m, available: hosts.len() });
    }
    let chosen = sample(rng, &mut hosts, m);

    let mut added: FxHashSet<VoxelCoord> = FxHashSet::default();
    for &h in &chosen {
        let opts = empty_neighbors(h);
        let mut placed = false;
        for _ in 0..10 {
            let q = opts[below(rng, opts.len())];
            if added.insert(q) {
                placed = true;
                break;
            }
        }
        if !placed {
            report.skipped += 1;
        }
    }
    report.deleted += m;
    report.added += added.len();

    let kept = g.coords().iter().enumerate().filter(|(i, _)| !gone[*i]).map(|(_, &c)| c);
    VoxelGrid::new(g.dims(), kept.chain(added))
        .map_err(|e| Error::Internal(format!("noise round {iter} emptied the grid: {e}")))
}

//! Brute-force references shared by the test targets.
#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};

use skelgrid::{VoxelCoord, VoxelGrid, VoxelId};

pub const OFFSETS: [(i64, i64, i64); 26] = {
    let mut o = [(0, 0, 0); 26];
    let mut k = 0;
    let mut i = 0;
    while i < 27 {
        let (dx, dy, dz) = (i / 9 - 1, i / 3 % 3 - 1, i % 3 - 1);
        if dx != 0 || dy != 0 || dz != 0 {
            o[k] = (dx as i64, dy as i64, dz as i64);
            k += 1;
        }
        i += 1;
    }
    o
};

pub fn shifted(c: VoxelCoord, o: (i64, i64, i64)) -> Option<VoxelCoord> {
    let x = c.x as i64 + o.0;
    let y = c.y as i64 + o.1;
    let z = c.z as i64 + o.2;
    (x >= 0 && y >= 0 && z >= 0).then(|| VoxelCoord::new(x as u32, y as u32, z as u32))
}

/// Random occupancy of an `nx × ny × nz` box, roughly `fill` percent of the
/// cells, capped at `max_n` voxels.
pub fn random_grid(dims: [u32; 3], fill: u32, max_n: usize, seed: u64) -> VoxelGrid {
    let mut s = seed | 1;
    let mut v = Vec::new();
    for x in 0..dims[0] {
        for y in 0..dims[1] {
            for z in 0..dims[2] {
                s = xorshift(s);
                if (s % 100) < fill as u64 && v.len() < max_n {
                    v.push(VoxelCoord::new(x, y, z));
                }
            }
        }
    }
    if v.is_empty() {
        v.push(VoxelCoord::new(0, 0, 0));
    }
    VoxelGrid::new(dims, v).unwrap()
}

pub fn xorshift(mut s: u64) -> u64 {
    s ^= s << 13;
    s ^= s >> 7;
    s ^= s << 17;
    s
}

pub fn brute_surface(set: &HashSet<VoxelCoord>, c: VoxelCoord) -> bool {
    OFFSETS.iter().filter(|&&o| shifted(c, o).is_some_and(|q| set.contains(&q))).count() < 26
}

#[derive(PartialEq)]
pub struct Entry(f64, VoxelId);
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Entry {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
    }
}

/// Textbook Dijkstra with edge cost `w(target) + |step|`.
pub fn dijkstra(grid: &VoxelGrid, w: &[f64], sources: &[VoxelId]) -> Vec<f64> {
    let coords = grid.coords();
    let index: HashMap<VoxelCoord, VoxelId> =
        coords.iter().enumerate().map(|(i, &c)| (c, i as VoxelId)).collect();
    let mut dist = vec![f64::INFINITY; coords.len()];
    let mut heap = BinaryHeap::new();
    for &s in sources {
        dist[s as usize] = 0.0;
        heap.push(Entry(0.0, s));
    }
    while let Some(Entry(d, u)) = heap.pop() {
        if d > dist[u as usize] {
            continue;
        }
        for &o in &OFFSETS {
            let Some(q) = shifted(coords[u as usize], o) else { continue };
            let Some(&v) = index.get(&q) else { continue };
            let step = ((o.0 * o.0 + o.1 * o.1 + o.2 * o.2) as f64).sqrt();
            let nd = d + w[v as usize] + step;
            if nd < dist[v as usize] {
                dist[v as usize] = nd;
                heap.push(Entry(nd, v));
            }
        }
    }
    dist
}

/// Squared distance of every voxel to its nearest surface voxel, by exhaustive search.
pub fn brute_distance(grid: &VoxelGrid) -> Vec<u64> {
    let set: HashSet<VoxelCoord> = grid.coords().iter().copied().collect();
    let surface: Vec<VoxelCoord> = grid.coords().iter().copied().filter(|&c| brute_surface(&set, c)).collect();
    grid.coords().iter().map(|&c| surface.iter().map(|&s| c.dist2(s)).min().unwrap()).collect()
}

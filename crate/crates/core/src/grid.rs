//! Sparse voxel grids with 26-connected topology.
//!
//! Only occupied voxels are stored. Each occupied voxel gets a dense id in
//! `0..n`, assigned in lexicographic `(x, y, z)` order, so comparing ids is the
//! same as comparing coordinates. Per-voxel attributes elsewhere in the crate
//! are plain `Vec`s indexed by that id.

use std::fmt;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense voxel id, valid for the grid that produced it.
pub type VoxelId = u32;

/// Largest accepted extent along any axis.
pub const MAX_DIM: u32 = i32::MAX as u32;

/// Integer lattice position. Ordering is lexicographic by `(x, y, z)`.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(from = "[u32; 3]", into = "[u32; 3]")]
pub struct VoxelCoord {
    pub x: u32,
    pub y: u32,
    pub z: u32,
}

impl VoxelCoord {
    pub const fn new(x: u32, y: u32, z: u32) -> Self {
        VoxelCoord { x, y, z }
    }

    pub fn to_array(self) -> [u32; 3] {
        [self.x, self.y, self.z]
    }

    /// Squared Euclidean distance between voxel centers.
    pub fn dist2(self, other: VoxelCoord) -> u64 {
        let dx = self.x.abs_diff(other.x) as u64;
        let dy = self.y.abs_diff(other.y) as u64;
        let dz = self.z.abs_diff(other.z) as u64;
        dx * dx + dy * dy + dz * dz
    }

    pub fn dist(self, other: VoxelCoord) -> f64 {
        (self.dist2(other) as f64).sqrt()
    }

    /// Chebyshev distance 1, i.e. 26-adjacent and distinct.
    pub fn is_adjacent(self, other: VoxelCoord) -> bool {
        self != other
            && self.x.abs_diff(other.x) <= 1
            && self.y.abs_diff(other.y) <= 1
            && self.z.abs_diff(other.z) <= 1
    }

    /// Returns `self + delta` if the result stays non-negative.
    pub fn offset(self, dx: i64, dy: i64, dz: i64) -> Option<VoxelCoord> {
        let x = u32::try_from(self.x as i64 + dx).ok()?;
        let y = u32::try_from(self.y as i64 + dy).ok()?;
        let z = u32::try_from(self.z as i64 + dz).ok()?;
        Some(VoxelCoord { x, y, z })
    }

    pub fn as_f64(self) -> [f64; 3] {
        [self.x as f64, self.y as f64, self.z as f64]
    }
}

impl From<[u32; 3]> for VoxelCoord {
    fn from(a: [u32; 3]) -> Self {
        VoxelCoord::new(a[0], a[1], a[2])
    }
}

impl From<VoxelCoord> for [u32; 3] {
    fn from(c: VoxelCoord) -> Self {
        c.to_array()
    }
}

impl fmt::Display for VoxelCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// The 26 neighbor offsets in lexicographic order.
pub const OFFSETS_26: [[i64; 3]; 26] = {
    let mut out = [[0i64; 3]; 26];
    let mut i = 0;
    let mut dx = -1;
    while dx <= 1 {
        let mut dy = -1;
        while dy <= 1 {
            let mut dz = -1;
            while dz <= 1 {
                if !(dx == 0 && dy == 0 && dz == 0) {
                    out[i] = [dx, dy, dz];
                    i += 1;
                }
                dz += 1;
            }
            dy += 1;
        }
        dx += 1;
    }
    out
};

/// Length of a lattice step that changes `axes` coordinates by one.
pub fn step_length(axes: u8) -> f64 {
    match axes {
        1 => 1.0,
        2 => std::f64::consts::SQRT_2,
        3 => SQRT_3,
        _ => 0.0,
    }
}

const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// Immutable sparse occupancy grid with precomputed 26-neighbor adjacency.
#[derive(Clone)]
pub struct VoxelGrid {
    dims: [u32; 3],
    coords: Vec<VoxelCoord>,
    index: FxHashMap<VoxelCoord, VoxelId>,
    adj_start: Vec<u32>,
    adj: Vec<VoxelId>,
    // number of axes that differ for the matching `adj` entry (1, 2 or 3)
    adj_axes: Vec<u8>,
}

impl fmt::Debug for VoxelGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VoxelGrid")
            .field("dims", &self.dims)
            .field("n", &self.coords.len())
            .finish()
    }
}

impl PartialEq for VoxelGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dims == other.dims && self.coords == other.coords
    }
}

impl Eq for VoxelGrid {}

impl VoxelGrid {
    /// Builds a grid from occupied coordinates. Duplicates collapse to one voxel.
    pub fn new(dims: [u32; 3], voxels: impl IntoIterator<Item = VoxelCoord>) -> Result<Self> {
        if dims.iter().any(|&d| d == 0 || d > MAX_DIM) {
            return Err(Error::InvalidGrid(format!(
                "dims {dims:?} must be within 1..={MAX_DIM}"
            )));
        }
        let mut coords: Vec<VoxelCoord> = voxels.into_iter().collect();
        if let Some(c) = coords
            .iter()
            .find(|c| c.x >= dims[0] || c.y >= dims[1] || c.z >= dims[2])
        {
            return Err(Error::InvalidGrid(format!(
                "voxel {c} outside dims {dims:?}"
            )));
        }
        coords.sort_unstable();
        coords.dedup();
        if coords.is_empty() {
            return Err(Error::InvalidGrid("no occupied voxels".into()));
        }
        Ok(Self::from_sorted(dims, coords))
    }

    /// `coords` must be sorted, deduplicated, nonempty and inside `dims`.
    pub(crate) fn from_sorted(dims: [u32; 3], coords: Vec<VoxelCoord>) -> Self {
        debug_assert!(coords.windows(2).all(|w| w[0] < w[1]));
        let mut index = FxHashMap::default();
        index.reserve(coords.len());
        for (i, &c) in coords.iter().enumerate() {
            index.insert(c, i as VoxelId);
        }
        let mut adj_start = Vec::with_capacity(coords.len() + 1);
        let mut adj = Vec::with_capacity(coords.len() * 8);
        let mut adj_axes = Vec::with_capacity(coords.len() * 8);
        adj_start.push(0);
        for &c in &coords {
            for off in &OFFSETS_26 {
                if let Some(nc) = c.offset(off[0], off[1], off[2]) {
                    if let Some(&j) = index.get(&nc) {
                        adj.push(j);
                        adj_axes.push(off.iter().filter(|&&d| d != 0).count() as u8);
                    }
                }
            }
            adj_start.push(adj.len() as u32);
        }
        VoxelGrid {
            dims,
            coords,
            index,
            adj_start,
            adj,
            adj_axes,
        }
    }

    pub fn dims(&self) -> [u32; 3] {
        self.dims
    }

    /// Number of occupied voxels, `n`.
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    /// Always false: a grid holds at least one voxel.
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Number of lattice cells, `N = nx * ny * nz`.
    pub fn cell_count(&self) -> u128 {
        self.dims.iter().map(|&d| d as u128).product()
    }

    /// Occupied voxels in id order, which is lexicographic order.
    pub fn coords(&self) -> &[VoxelCoord] {
        &self.coords
    }

    pub fn coord(&self, id: VoxelId) -> VoxelCoord {
        self.coords[id as usize]
    }

    pub fn id_of(&self, c: VoxelCoord) -> Option<VoxelId> {
        self.index.get(&c).copied()
    }

    pub fn contains(&self, c: VoxelCoord) -> bool {
        self.index.contains_key(&c)
    }

    pub fn in_bounds(&self, c: VoxelCoord) -> bool {
        c.x < self.dims[0] && c.y < self.dims[1] && c.z < self.dims[2]
    }

    /// Neighbor ids of `id`, ascending (hence lexicographic).
    #[inline]
    pub fn neighbor_ids(&self, id: VoxelId) -> &[VoxelId] {
        let s = self.adj_start[id as usize] as usize;
        let e = self.adj_start[id as usize + 1] as usize;
        &self.adj[s..e]
    }

    /// Neighbor ids of `id` paired with the Euclidean step length to each.
    #[inline]
    pub fn neighbors_with_steps(&self, id: VoxelId) -> impl Iterator<Item = (VoxelId, f64)> + '_ {
        let s = self.adj_start[id as usize] as usize;
        let e = self.adj_start[id as usize + 1] as usize;
        self.adj[s..e]
            .iter()
            .zip(&self.adj_axes[s..e])
            .map(|(&j, &a)| (j, step_length(a)))
    }

    pub fn degree(&self, id: VoxelId) -> usize {
        (self.adj_start[id as usize + 1] - self.adj_start[id as usize]) as usize
    }

    /// Occupied 26-neighbors of `v` in lexicographic order.
    pub fn neighbors26(&self, v: VoxelCoord) -> Result<Vec<VoxelCoord>> {
        let id = self.id_of(v).ok_or(Error::NotOccupied(v))?;
        Ok(self.neighbor_ids(id).iter().map(|&j| self.coord(j)).collect())
    }

    pub fn surface_mask(&self) -> SurfaceMask {
        SurfaceMask {
            is_surface: (0..self.len() as VoxelId)
                .map(|i| self.degree(i) < 26)
                .collect(),
        }
    }

    /// Component index for every voxel, numbered in order of each
    /// component's smallest voxel, plus the number of components.
    pub fn component_labels(&self) -> (Vec<u32>, usize) {
        const UNSEEN: u32 = u32::MAX;
        let mut label = vec![UNSEEN; self.len()];
        let mut stack = Vec::new();
        let mut count = 0u32;
        for start in 0..self.len() {
            if label[start] != UNSEEN {
                continue;
            }
            label[start] = count;
            stack.push(start as VoxelId);
            while let Some(v) = stack.pop() {
                for &u in self.neighbor_ids(v) {
                    if label[u as usize] == UNSEEN {
                        label[u as usize] = count;
                        stack.push(u);
                    }
                }
            }
            count += 1;
        }
        (label, count as usize)
    }

    /// Maximal 26-connected pieces, ordered by their smallest voxel.
    pub fn connected_components(&self) -> Vec<VoxelGrid> {
        let (label, count) = self.component_labels();
        if count == 1 {
            return vec![self.clone()];
        }
        let mut parts: Vec<Vec<VoxelCoord>> = vec![Vec::new(); count];
        for (i, &l) in label.iter().enumerate() {
            parts[l as usize].push(self.coords[i]);
        }
        parts
            .into_iter()
            .map(|coords| VoxelGrid::from_sorted(self.dims, coords))
            .collect()
    }

    /// The largest component, ties going to the one with the smaller first voxel.
    pub fn largest_component(&self) -> VoxelGrid {
        let mut best: Option<VoxelGrid> = None;
        for c in self.connected_components() {
            if best.as_ref().is_none_or(|b| c.len() > b.len()) {
                best = Some(c);
            }
        }
        best.expect("grid is nonempty")
    }

    /// Sub-grid over a set of voxel ids of this grid.
    pub fn subgrid(&self, ids: &[VoxelId]) -> Result<VoxelGrid> {
        VoxelGrid::new(self.dims, ids.iter().map(|&i| self.coord(i)))
    }
}

/// Per-voxel surface flags: a voxel is on the surface when it has fewer
/// than 26 occupied neighbors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SurfaceMask {
    is_surface: Vec<bool>,
}

impl SurfaceMask {
    #[inline]
    pub fn is_surface(&self, id: VoxelId) -> bool {
        self.is_surface[id as usize]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.is_surface
    }

    pub fn count(&self) -> usize {
        self.is_surface.iter().filter(|&&s| s).count()
    }

    pub fn surface_ids(&self) -> impl Iterator<Item = VoxelId> + '_ {
        self.is_surface
            .iter()
            .enumerate()
            .filter(|(_, &s)| s)
            .map(|(i, _)| i as VoxelId)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: u32, y: u32, z: u32) -> VoxelCoord {
        VoxelCoord::new(x, y, z)
    }

    fn cube(side: u32) -> VoxelGrid {
        let mut v = Vec::new();
        for x in 0..side {
            for y in 0..side {
                for z in 0..side {
                    v.push(c(x, y, z));
                }
            }
        }
        VoxelGrid::new([side; 3], v).unwrap()
    }

    fn line3() -> VoxelGrid {
        VoxelGrid::new([3, 1, 1], [c(0, 0, 0), c(1, 0, 0), c(2, 0, 0)]).unwrap()
    }

    #[test]
    fn offsets_are_lexicographic() {
        assert!(OFFSETS_26.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(OFFSETS_26[0], [-1, -1, -1]);
        assert_eq!(OFFSETS_26[25], [1, 1, 1]);
    }

    #[test]
    fn neighbors_of_line_middle() {
        let g = line3();
        assert_eq!(g.neighbors26(c(1, 0, 0)).unwrap(), vec![c(0, 0, 0), c(2, 0, 0)]);
    }

    #[test]
    fn cube_center_has_full_neighborhood() {
        let g = cube(3);
        let n = g.neighbors26(c(1, 1, 1)).unwrap();
        assert_eq!(n.len(), 26);
        assert!(n.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn isolated_voxel_has_no_neighbors() {
        let g = VoxelGrid::new([4, 4, 4], [c(2, 2, 2)]).unwrap();
        assert!(g.neighbors26(c(2, 2, 2)).unwrap().is_empty());
    }

    #[test]
    fn neighbors_of_unoccupied_is_domain_error() {
        let g2 = VoxelGrid::new([3, 3, 1], [c(0, 0, 0)]).unwrap();
        assert!(matches!(
            g2.neighbors26(c(1, 1, 0)),
            Err(Error::NotOccupied(_))
        ));
    }

    #[test]
    fn surface_of_small_cube() {
        let g = cube(3);
        let m = g.surface_mask();
        let interior: Vec<_> = (0..g.len() as u32)
            .filter(|&i| !m.is_surface(i))
            .map(|i| g.coord(i))
            .collect();
        assert_eq!(interior, vec![c(1, 1, 1)]);
    }

    #[test]
    fn line_is_all_surface() {
        let g = line3();
        assert_eq!(g.surface_mask().count(), 3);
    }

    #[test]
    fn surface_of_five_cube_matches_brute_force() {
        let g = cube(5);
        let m = g.surface_mask();
        // brute force: count occupied cells in the 3x3x3 block around each voxel
        let mut interior = 0;
        for &v in g.coords() {
            let mut cnt = 0;
            for &u in g.coords() {
                if u.is_adjacent(v) {
                    cnt += 1;
                }
            }
            let id = g.id_of(v).unwrap();
            assert_eq!(m.is_surface(id), cnt < 26);
            if cnt == 26 {
                interior += 1;
            }
        }
        assert_eq!(interior, 27);
    }

    #[test]
    fn duplicates_collapse() {
        let g = VoxelGrid::new([3, 1, 1], [c(1, 0, 0), c(1, 0, 0), c(0, 0, 0)]).unwrap();
        assert_eq!(g.len(), 2);
    }

    #[test]
    fn rejects_out_of_bounds_and_empty() {
        assert!(VoxelGrid::new([2, 2, 2], [c(5, 0, 0)]).is_err());
        assert!(VoxelGrid::new([2, 2, 2], []).is_err());
        assert!(VoxelGrid::new([0, 2, 2], [c(0, 0, 0)]).is_err());
        assert!(VoxelGrid::new([MAX_DIM + 1, 1, 1], [c(0, 0, 0)]).is_err());
    }

    #[test]
    fn two_cubes_are_two_components() {
        let mut v = Vec::new();
        for base in [0u32, 10] {
            for x in 0..2 {
                for y in 0..2 {
                    for z in 0..2 {
                        v.push(c(base + x, base + y, base + z));
                    }
                }
            }
        }
        let g = VoxelGrid::new([12, 12, 12], v).unwrap();
        let comps = g.connected_components();
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0].coords()[0], c(0, 0, 0));
        assert_eq!(comps[1].coords()[0], c(10, 10, 10));
        assert_eq!(comps[0].len(), 8);
    }

    #[test]
    fn line_is_one_component() {
        assert_eq!(line3().connected_components().len(), 1);
    }

    #[test]
    fn corner_contact_connects() {
        let g = VoxelGrid::new([2, 2, 2], [c(0, 0, 0), c(1, 1, 1)]).unwrap();
        assert_eq!(g.connected_components().len(), 1);
        assert_eq!(g.neighbors_with_steps(0).next().unwrap().1, SQRT_3);
    }
}

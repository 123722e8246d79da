//! Weighted frontier propagation over the voxel graph.
//!
//! Labels accumulate `w(target) + |step|` along 26-connected paths, so with
//! `w = d_max - d` the search runs fastest through the middle of the object.
//!
//! The search advances in iterations. At iteration `k` the *active* frontier
//! `FA(k)` holds voxels whose label just became final; they relax their
//! neighbors once. The *waiting* frontier `FB(k)` holds earlier voxels that
//! still border unsettled, already-labelled voxels (the candidate set `N(k)`).
//! With `l_min = min N(k)`, every candidate whose label is at most
//! `l_min + 1` is promoted into `FA(k + 1)`: any other route to it would have
//! to leave the settled region through a candidate (label `>= l_min`) and then
//! take at least one more step of cost `>= 1`, so those labels are exact.
//! Each voxel enters the active frontier exactly once.
//!
//! The terminating variant stops a region of the wave once it touches a
//! barrier (the existing skeleton): the connected piece of the frontier that
//! contains the contact is frozen and kept as part of the terminal frontier,
//! and candidates that were only reachable through it are withdrawn.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::grid::{VoxelCoord, VoxelGrid, VoxelId};

/// Per-voxel search labels; `f64::INFINITY` marks voxels not reached.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelField(Vec<f64>);

impl LabelField {
    /// All labels infinite.
    pub fn unreached(n: usize) -> Self {
        LabelField(vec![f64::INFINITY; n])
    }

    /// Zero on `frontier`, infinite elsewhere.
    pub fn initial(n: usize, frontier: &[VoxelId]) -> Self {
        let mut l = Self::unreached(n);
        for &v in frontier {
            l.0[v as usize] = 0.0;
        }
        l
    }

    pub fn from_vec(v: Vec<f64>) -> Self {
        LabelField(v)
    }

    #[inline]
    pub fn get(&self, id: VoxelId) -> f64 {
        self.0[id as usize]
    }

    pub fn set(&mut self, id: VoxelId, value: f64) {
        self.0[id as usize] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Writes `x y z l` lines in lexicographic voxel order.
    pub fn dump(&self, grid: &VoxelGrid, w: &mut impl Write) -> std::io::Result<()> {
        for (c, l) in grid.coords().iter().zip(&self.0) {
            writeln!(w, "{} {} {} {}", c.x, c.y, c.z, l)?;
        }
        Ok(())
    }
}

/// Bookkeeping gathered over one run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SearchStats {
    /// `|FA(k)|` for every iteration.
    pub active: Vec<usize>,
    /// `|FB(k)|` for every iteration.
    pub waiting: Vec<usize>,
    /// `l_min` of every iteration that had candidates.
    pub thresholds: Vec<f64>,
    /// Largest number of iterations any voxel spent in `FA(k) ∪ FB(k)`.
    pub max_residence: usize,
}

impl SearchStats {
    pub fn iterations(&self) -> usize {
        self.active.len()
    }

    /// `Σ_k |FA(k)|`.
    pub fn settled(&self) -> usize {
        self.active.iter().sum()
    }
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub labels: LabelField,
    /// Frozen frontier voxels, ascending. Empty for non-terminating runs.
    pub terminal_frontier: Vec<VoxelId>,
    pub stats: SearchStats,
}

const UNTOUCHED: u8 = 0;
const QUEUED: u8 = 1;
const SETTLED: u8 = 2;
const BARRIER: u8 = 3;

struct Search<'a> {
    grid: &'a VoxelGrid,
    weights: &'a [f64],
    labels: Vec<f64>,
    state: Vec<u8>,
    // settled voxels: number of QUEUED neighbors
    pending: Vec<u8>,
    entered: Vec<u32>,
    retired: Vec<bool>,
    frozen: Vec<bool>,
    heap: BinaryHeap<Reverse<(u64, VoxelId)>>,
    live: usize,
    max_residence: usize,
    terminating: bool,
}

impl<'a> Search<'a> {
    fn settle(&mut self, v: VoxelId, k: u32) {
        let vi = v as usize;
        let was_queued = self.state[vi] == QUEUED;
        self.state[vi] = SETTLED;
        self.entered[vi] = k;
        let mut pending = 0u8;
        for &u in self.grid.neighbor_ids(v) {
            match self.state[u as usize] {
                SETTLED if was_queued => self.drop_pending(u, k),
                QUEUED => pending += 1,
                _ => {}
            }
        }
        self.pending[vi] = pending;
    }

    // one fewer queued neighbor for settled voxel `u`
    fn drop_pending(&mut self, u: VoxelId, k: u32) {
        let ui = u as usize;
        self.pending[ui] -= 1;
        if self.pending[ui] == 0 && !self.retired[ui] && self.entered[ui] < k {
            self.retire(u, k);
        }
    }

    fn retire(&mut self, u: VoxelId, k: u32) {
        let ui = u as usize;
        self.retired[ui] = true;
        // `k` is the first iteration the voxel is no longer in the frontier
        self.max_residence = self.max_residence.max((k - self.entered[ui]) as usize);
        if !self.frozen[ui] {
            self.live -= 1;
        }
    }

    fn relax(&mut self, v: VoxelId) {
        let lv = self.labels[v as usize];
        let grid = self.grid;
        for (j, step) in grid.neighbors_with_steps(v) {
            let ji = j as usize;
            let st = self.state[ji];
            if st == SETTLED || st == BARRIER {
                continue;
            }
            let cand = lv + self.weights[ji] + step;
            if cand < self.labels[ji] {
                self.labels[ji] = cand;
                if st != QUEUED {
                    self.state[ji] = QUEUED;
                    for &u in grid.neighbor_ids(j) {
                        if self.state[u as usize] == SETTLED {
                            self.pending[u as usize] += 1;
                        }
                    }
                }
                self.heap.push(Reverse((cand.to_bits(), j)));
            }
        }
    }

    fn peek_valid(&mut self) -> Option<f64> {
        while let Some(&Reverse((bits, j))) = self.heap.peek() {
            let l = f64::from_bits(bits);
            if self.state[j as usize] == QUEUED && self.labels[j as usize] == l {
                return Some(l);
            }
            self.heap.pop();
        }
        None
    }

    fn freeze_contacts(&mut self, active: &mut Vec<VoxelId>, k: u32, terminal: &mut Vec<VoxelId>) {
        let grid = self.grid;
        let contacts: Vec<VoxelId> = active
            .iter()
            .copied()
            .filter(|&v| {
                grid.neighbor_ids(v)
                    .iter()
                    .any(|&u| self.state[u as usize] == BARRIER)
            })
            .collect();
        if contacts.is_empty() {
            return;
        }
        // flood the current frontier FA(k) ∪ FB(k) from the contacts
        let mut stack = Vec::new();
        let mut region = Vec::new();
        for &c in &contacts {
            if !self.frozen[c as usize] {
                self.frozen[c as usize] = true;
                stack.push(c);
            }
        }
        while let Some(v) = stack.pop() {
            region.push(v);
            for &u in grid.neighbor_ids(v) {
                let ui = u as usize;
                if self.state[ui] == SETTLED && !self.frozen[ui] && !self.retired[ui] {
                    self.frozen[ui] = true;
                    stack.push(u);
                }
            }
        }
        for &v in &region {
            let vi = v as usize;
            // active voxels are not counted as live until they relax
            if self.entered[vi] < k && !self.retired[vi] {
                self.live -= 1;
            }
            self.retired[vi] = true;
            self.max_residence = self.max_residence.max((k + 1 - self.entered[vi]) as usize);
        }
        // withdraw or raise candidates that were only reachable through the region
        for &v in &region {
            for &u in grid.neighbor_ids(v) {
                if self.state[u as usize] == QUEUED {
                    self.recompute_candidate(u, k);
                }
            }
        }
        active.retain(|&v| !self.frozen[v as usize]);
        terminal.extend_from_slice(&region);
    }

    fn recompute_candidate(&mut self, u: VoxelId, k: u32) {
        let ui = u as usize;
        let mut best = f64::INFINITY;
        for (r, step) in self.grid.neighbors_with_steps(u) {
            let ri = r as usize;
            if self.state[ri] == SETTLED && !self.frozen[ri] && self.entered[ri] < k {
                best = best.min(self.labels[ri] + self.weights[ui] + step);
            }
        }
        if best == self.labels[ui] {
            return;
        }
        if best.is_finite() {
            self.labels[ui] = best;
            self.heap.push(Reverse((best.to_bits(), u)));
        } else {
            self.labels[ui] = f64::INFINITY;
            self.state[ui] = UNTOUCHED;
            for &r in self.grid.neighbor_ids(u) {
                if self.state[r as usize] == SETTLED {
                    self.drop_pending(r, k);
                }
            }
        }
    }

    fn run(mut self, frontier: Vec<VoxelId>) -> SearchOutcome {
        let mut stats = SearchStats::default();
        let mut terminal = Vec::new();
        let mut active = frontier;
        for &v in &active {
            self.settle(v, 0);
        }
        let mut k: u32 = 0;
        while !active.is_empty() {
            if self.terminating {
                self.freeze_contacts(&mut active, k, &mut terminal);
            }
            stats.active.push(active.len());
            stats.waiting.push(self.live);
            for i in 0..active.len() {
                self.relax(active[i]);
            }
            for &v in &active {
                if self.pending[v as usize] == 0 {
                    self.retired[v as usize] = true;
                    self.max_residence = self.max_residence.max(1);
                } else {
                    self.live += 1;
                }
            }
            let mut next = Vec::new();
            if let Some(lmin) = self.peek_valid() {
                stats.thresholds.push(lmin);
                let limit = lmin + 1.0;
                while let Some(l) = self.peek_valid() {
                    if l > limit {
                        break;
                    }
                    let Reverse((_, j)) = self.heap.pop().unwrap();
                    self.settle(j, k + 1);
                    next.push(j);
                }
            }
            active = next;
            k += 1;
        }
        for i in 0..self.entered.len() {
            if self.state[i] == SETTLED && !self.retired[i] {
                self.max_residence = self.max_residence.max((k - self.entered[i]) as usize);
            }
        }
        if self.terminating {
            for (l, &s) in self.labels.iter_mut().zip(&self.state) {
                if s == QUEUED {
                    *l = f64::INFINITY;
                }
            }
        }
        stats.max_residence = self.max_residence;
        terminal.sort_unstable();
        SearchOutcome {
            labels: LabelField(self.labels),
            terminal_frontier: terminal,
            stats,
        }
    }
}

/// Runs the search from `frontier` over `labels`.
///
/// `labels` is either the fresh form (zero on the frontier, infinite
/// elsewhere) or a previous result with the frontier reset to zero, in which
/// case only labels that shrink are updated. With a `barrier` the run is
/// terminating: barrier voxels are never entered and labels must start in
/// the fresh form.
pub fn propagate(
    grid: &VoxelGrid,
    weights: &[f64],
    frontier: &[VoxelId],
    labels: LabelField,
    barrier: Option<&[VoxelId]>,
) -> Result<SearchOutcome> {
    let n = grid.len();
    if weights.len() != n || labels.len() != n {
        return Err(Error::Domain(format!(
            "weights ({}) and labels ({}) must have one entry per voxel ({n})",
            weights.len(),
            labels.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
        return Err(Error::Domain(format!("weight {w} is not a finite non-negative value")));
    }
    if frontier.is_empty() {
        return Err(Error::EmptyFrontier);
    }
    let mut front: Vec<VoxelId> = frontier.to_vec();
    front.sort_unstable();
    front.dedup();
    if let Some(&bad) = front.iter().find(|&&v| v as usize >= n) {
        return Err(Error::Domain(format!("frontier id {bad} out of range")));
    }
    let mut state = vec![UNTOUCHED; n];
    if let Some(barrier) = barrier {
        for &b in barrier {
            if b as usize >= n {
                return Err(Error::Domain(format!("barrier id {b} out of range")));
            }
            state[b as usize] = BARRIER;
        }
        if let Some(&v) = front.iter().find(|&&v| state[v as usize] == BARRIER) {
            return Err(Error::Domain(format!(
                "frontier voxel {} lies on the barrier",
                grid.coord(v)
            )));
        }
    }
    let search = Search {
        grid,
        weights,
        labels: labels.into_vec(),
        state,
        pending: vec![0; n],
        entered: vec![0; n],
        retired: vec![false; n],
        frozen: vec![false; n],
        heap: BinaryHeap::new(),
        live: 0,
        max_residence: 0,
        terminating: barrier.is_some(),
    };
    Ok(search.run(front))
}

fn ids_of(grid: &VoxelGrid, coords: &[VoxelCoord]) -> Result<Vec<VoxelId>> {
    coords
        .iter()
        .map(|&c| grid.id_of(c).ok_or(Error::NotOccupied(c)))
        .collect()
}

/// Weighted search from `initial_frontier`; returns final labels.
pub fn run_bfs(
    grid: &VoxelGrid,
    weights: &[f64],
    initial_frontier: &[VoxelCoord],
    initial_labels: LabelField,
) -> Result<LabelField> {
    let front = ids_of(grid, initial_frontier)?;
    Ok(propagate(grid, weights, &front, initial_labels, None)?.labels)
}

/// Weighted search that stops each region of the wave when it reaches
/// `barrier`; returns labels and the frozen terminal frontier.
pub fn run_bfs_terminating(
    grid: &VoxelGrid,
    weights: &[f64],
    initial_frontier: &[VoxelCoord],
    initial_labels: LabelField,
    barrier: &[VoxelCoord],
) -> Result<(LabelField, Vec<VoxelCoord>)> {
    let front = ids_of(grid, initial_frontier)?;
    let bar = ids_of(grid, barrier)?;
    let out = propagate(grid, weights, &front, initial_labels, Some(&bar))?;
    let terminal = out.terminal_frontier.iter().map(|&i| grid.coord(i)).collect();
    Ok((out.labels, terminal))
}

//! Curve-skeleton extraction.
//!
//! Per connected component: a seed at the deepest voxel, then repeatedly
//! - grow BFS1 labels from the current skeleton and take the surface voxel
//!   with the largest label as the next tip `v_t`,
//! - run a terminating search from `v_t` towards the skeleton (BFS2),
//! - trace back from where that wave met the skeleton to `v_t`, preferring
//!   deep voxels,
//! - keep the path unless it looks like surface noise; if the wave met the
//!   skeleton in several places the tip closes a loop and the arms are kept.

mod export;
mod loops;
mod spurious;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bfs::{propagate, LabelField};
use crate::distance::{distance_transform, DistanceField};
use crate::error::{Error, Result};
use crate::grid::{SurfaceMask, VoxelCoord, VoxelGrid, VoxelId, OFFSETS_26};

pub use export::{from_json, to_json, write_ply};
pub use loops::handle_loops;
pub use spurious::{chi2_pdf_3dof, mahalanobis2, spurious_test, SpuriousTestConfig, Verdict};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentKind {
    Seed,
    Branch,
    LoopArm,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkeletonSegment {
    pub kind: SegmentKind,
    /// From the voxel next to the existing skeleton towards the tip.
    pub path: Vec<VoxelCoord>,
    /// Skeleton voxel the first path voxel hangs off.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attach: Option<VoxelCoord>,
    /// Voxel of another loop arm the last path voxel joins.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub close: Option<VoxelCoord>,
}

impl SkeletonSegment {
    /// Consecutive path pairs plus the attachment and closing edges.
    pub fn edges(&self) -> Vec<(VoxelCoord, VoxelCoord)> {
        let mut e = Vec::with_capacity(self.path.len() + 1);
        if let (Some(a), Some(&first)) = (self.attach, self.path.first()) {
            e.push((a, first));
        }
        e.extend(self.path.windows(2).map(|w| (w[0], w[1])));
        if let (Some(c), Some(&last)) = (self.close, self.path.last()) {
            e.push((last, c));
        }
        e
    }
}

/// How long to keep proposing endpoints after spurious rejections.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RejectPolicy {
    /// Stop after this many rejections in a row.
    StopAfter(usize),
    /// Keep going, excluding rejected tips, until no tip is left.
    Exhaustive,
}

impl Default for RejectPolicy {
    fn default() -> Self {
        RejectPolicy::StopAfter(1)
    }
}

impl fmt::Display for RejectPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectPolicy::StopAfter(k) => write!(f, "stop-after-{k}"),
            RejectPolicy::Exhaustive => f.write_str("exhaustive"),
        }
    }
}

impl FromStr for RejectPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "exhaustive" {
            return Ok(RejectPolicy::Exhaustive);
        }
        let k = s
            .strip_prefix("stop-after-")
            .and_then(|k| k.parse::<usize>().ok())
            .filter(|&k| k > 0)
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown policy {s:?}; expected `stop-after-<k>` with k >= 1 or `exhaustive`"
                ))
            })?;
        Ok(RejectPolicy::StopAfter(k))
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SkeletonOptions {
    pub config: SpuriousTestConfig,
    pub policy: RejectPolicy,
    /// Replaces the deepest-voxel seed of the component that contains it.
    pub seed: Option<VoxelCoord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkeletonParams {
    pub t: f64,
    pub epsilon: f64,
    pub policy: String,
    pub seed: Option<VoxelCoord>,
}

impl SkeletonParams {
    fn from_options(o: &SkeletonOptions) -> Self {
        SkeletonParams {
            t: o.config.t,
            epsilon: o.config.epsilon,
            policy: o.policy.to_string(),
            seed: o.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSkeleton {
    pub dims: [u32; 3],
    pub segments: Vec<SkeletonSegment>,
    pub junctions: Vec<VoxelCoord>,
    /// Indices into `segments`, one group per detected loop.
    pub loops: Vec<Vec<usize>>,
    pub params: SkeletonParams,
}

impl CurveSkeleton {
    /// All skeleton voxels, ascending.
    pub fn union(&self) -> Vec<VoxelCoord> {
        let mut u: Vec<VoxelCoord> = self.segments.iter().flat_map(|s| s.path.iter().copied()).collect();
        u.sort_unstable();
        u.dedup();
        u
    }

    pub fn voxel_count(&self) -> usize {
        self.union().len()
    }

    pub fn branch_count(&self) -> usize {
        self.segments.iter().filter(|s| s.kind != SegmentKind::Seed).count()
    }
}

/// Counters for one extraction.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExtractionStats {
    pub components: usize,
    pub proposals: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub loops: usize,
    /// Largest squared distance-to-surface over all components.
    pub d2_max: u64,
}

#[derive(Clone, Debug)]
pub struct FrontierComponent {
    /// Connected piece of the terminal frontier, ascending.
    pub voxels: Vec<VoxelCoord>,
    /// Its surface voxels.
    pub surface: Vec<VoxelCoord>,
    /// Its voxels adjacent to the skeleton.
    pub skeleton_neighbors: Vec<VoxelCoord>,
}

/// What happened to one proposed tip.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Accepted,
    Rejected,
    Loop { arms: usize },
}

/// Snapshot handed to an observer for every proposal.
pub struct ProposalEvent<'a> {
    pub grid: &'a VoxelGrid,
    pub mask: &'a SurfaceMask,
    pub bfs1: &'a LabelField,
    pub bfs2: &'a LabelField,
    pub v_t: VoxelCoord,
    pub components: &'a [FrontierComponent],
    /// Traced paths, one per frontier component.
    pub paths: &'a [Vec<VoxelCoord>],
    pub outcome: Outcome,
}

/// Deepest voxel, smallest coordinate on ties.
pub fn find_seed(field: &DistanceField, grid: &VoxelGrid) -> VoxelCoord {
    let max = field.max_squared();
    let id = field.squared().iter().position(|&d| d == max).expect("nonempty grid");
    grid.coord(id as VoxelId)
}

/// Zeroes the labels of `new_voxels` and lowers every label that can now be
/// reached more cheaply.
pub fn bfs1_update(
    labels: LabelField,
    new_voxels: &[VoxelCoord],
    grid: &VoxelGrid,
    weights: &[f64],
) -> Result<LabelField> {
    if new_voxels.is_empty() {
        return Err(Error::Domain("no new skeleton voxels".into()));
    }
    let ids = ids_of(grid, new_voxels)?;
    update_ids(labels, &ids, grid, weights)
}

fn update_ids(mut labels: LabelField, ids: &[VoxelId], grid: &VoxelGrid, weights: &[f64]) -> Result<LabelField> {
    for &i in ids {
        labels.set(i, 0.0);
    }
    Ok(propagate(grid, weights, ids, labels, None)?.labels)
}

/// Surface voxel with the largest finite label; none when that label is 0.
pub fn select_endpoint(labels: &LabelField, mask: &SurfaceMask, grid: &VoxelGrid) -> Option<VoxelCoord> {
    select_excluding(labels, mask, &[]).map(|i| grid.coord(i))
}

fn select_excluding(labels: &LabelField, mask: &SurfaceMask, excluded: &[bool]) -> Option<VoxelId> {
    let mut best: Option<(f64, VoxelId)> = None;
    for i in mask.surface_ids() {
        let l = labels.get(i);
        if !l.is_finite() || excluded.get(i as usize).copied().unwrap_or(false) {
            continue;
        }
        if best.is_none_or(|(b, _)| l > b) {
            best = Some((l, i));
        }
    }
    best.filter(|&(l, _)| l > 0.0).map(|(_, i)| i)
}

/// Terminating search from `v_t` against `skeleton`, with the terminal
/// frontier split into 26-connected components ordered by smallest voxel.
pub fn bfs2_components(
    grid: &VoxelGrid,
    mask: &SurfaceMask,
    weights: &[f64],
    v_t: VoxelCoord,
    skeleton: &[VoxelCoord],
) -> Result<(LabelField, Vec<FrontierComponent>)> {
    let t = grid.id_of(v_t).ok_or(Error::NotOccupied(v_t))?;
    let bar = ids_of(grid, skeleton)?;
    let mut on = vec![false; grid.len()];
    for &b in &bar {
        on[b as usize] = true;
    }
    bfs2_ids(grid, mask, weights, t, &bar, &on)
}

fn bfs2_ids(
    grid: &VoxelGrid,
    mask: &SurfaceMask,
    weights: &[f64],
    t: VoxelId,
    barrier: &[VoxelId],
    on_skel: &[bool],
) -> Result<(LabelField, Vec<FrontierComponent>)> {
    if on_skel[t as usize] {
        return Err(Error::Domain(format!("tip {} is already on the skeleton", grid.coord(t))));
    }
    let out = propagate(
        grid,
        weights,
        &[t],
        LabelField::initial(grid.len(), &[t]),
        Some(barrier),
    )?;
    let terminal = out.terminal_frontier;
    let mut in_term = vec![false; grid.len()];
    for &v in &terminal {
        in_term[v as usize] = true;
    }
    let mut comps = Vec::new();
    let mut stack = Vec::new();
    for &start in &terminal {
        if !in_term[start as usize] {
            continue;
        }
        in_term[start as usize] = false;
        stack.push(start);
        let mut ids = Vec::new();
        while let Some(v) = stack.pop() {
            ids.push(v);
            for &u in grid.neighbor_ids(v) {
                if in_term[u as usize] {
                    in_term[u as usize] = false;
                    stack.push(u);
                }
            }
        }
        ids.sort_unstable();
        let touches = |v: VoxelId| grid.neighbor_ids(v).iter().any(|&u| on_skel[u as usize]);
        comps.push(FrontierComponent {
            surface: ids.iter().filter(|&&v| mask.is_surface(v)).map(|&v| grid.coord(v)).collect(),
            skeleton_neighbors: ids.iter().filter(|&&v| touches(v)).map(|&v| grid.coord(v)).collect(),
            voxels: ids.iter().map(|&v| grid.coord(v)).collect(),
        });
    }
    Ok((out.labels, comps))
}

/// Skeleton-adjacent frontier voxel with the smallest BFS2 label.
pub fn entry_voxel(component: &FrontierComponent, labels2: &LabelField, grid: &VoxelGrid) -> Result<VoxelCoord> {
    let mut best: Option<(f64, VoxelCoord)> = None;
    for &c in &component.skeleton_neighbors {
        let id = grid.id_of(c).ok_or(Error::NotOccupied(c))?;
        let l = labels2.get(id);
        if best.is_none_or(|(b, bc)| l < b || (l == b && c < bc)) {
            best = Some((l, c));
        }
    }
    best.map(|(_, c)| c).ok_or_else(|| {
        Error::Internal("frontier component has no voxel next to the skeleton".into())
    })
}

/// Follows decreasing BFS2 labels from `v_s1` to `v_t`, at each step moving to
/// the deepest lower-labelled neighbor.
pub fn trace_path(
    grid: &VoxelGrid,
    labels2: &LabelField,
    field: &DistanceField,
    v_t: VoxelCoord,
    v_s1: VoxelCoord,
    skeleton: &[VoxelCoord],
) -> Result<SkeletonSegment> {
    let t = grid.id_of(v_t).ok_or(Error::NotOccupied(v_t))?;
    let s1 = grid.id_of(v_s1).ok_or(Error::NotOccupied(v_s1))?;
    let mut on = vec![false; grid.len()];
    for id in ids_of(grid, skeleton)? {
        on[id as usize] = true;
    }
    let path = trace_ids(grid, labels2, field, t, s1, &on)?;
    Ok(SkeletonSegment {
        kind: SegmentKind::Branch,
        path: path.into_iter().map(|i| grid.coord(i)).collect(),
        attach: None,
        close: None,
    })
}

fn trace_ids(
    grid: &VoxelGrid,
    labels2: &LabelField,
    field: &DistanceField,
    t: VoxelId,
    s1: VoxelId,
    on_skel: &[bool],
) -> Result<Vec<VoxelId>> {
    let mut path = vec![s1];
    let mut c = s1;
    while c != t && !on_skel[c as usize] {
        let lc = labels2.get(c);
        let mut best: Option<(u64, f64, VoxelId)> = None;
        for &j in grid.neighbor_ids(c) {
            let lj = labels2.get(j);
            if !(lj < lc) {
                continue;
            }
            let dj = field.dist2(j);
            // neighbors come in ascending id order, so strict comparisons keep
            // the smallest voxel on ties
            if best.is_none_or(|(bd, bl, _)| dj > bd || (dj == bd && lj < bl)) {
                best = Some((dj, lj, j));
            }
        }
        let Some((_, _, next)) = best else {
            return Err(Error::TraceStalled { at: grid.coord(c) });
        };
        path.push(next);
        c = next;
    }
    Ok(path)
}

/// Skeleton neighbor of `v` closest to it, smallest coordinate on ties.
fn attach_voxel(grid: &VoxelGrid, v: VoxelCoord, on_skel: &[bool]) -> Option<VoxelCoord> {
    let mut best: Option<(u64, VoxelCoord)> = None;
    for off in &OFFSETS_26 {
        let Some(n) = v.offset(off[0], off[1], off[2]) else { continue };
        let Some(id) = grid.id_of(n) else { continue };
        if !on_skel[id as usize] {
            continue;
        }
        let d = v.dist2(n);
        if best.is_none_or(|(bd, bc)| d < bd || (d == bd && n < bc)) {
            best = Some((d, n));
        }
    }
    best.map(|(_, n)| n)
}

fn ids_of(grid: &VoxelGrid, coords: &[VoxelCoord]) -> Result<Vec<VoxelId>> {
    coords.iter().map(|&c| grid.id_of(c).ok_or(Error::NotOccupied(c))).collect()
}

/// Extracts the curve skeleton of every connected component.
pub fn skeletonize(grid: &VoxelGrid, config: SpuriousTestConfig, policy: RejectPolicy) -> Result<CurveSkeleton> {
    let opts = SkeletonOptions { config, policy, seed: None };
    Ok(skeletonize_with(grid, &opts, &mut |_| {})?.0)
}

/// Full-control variant: options, per-proposal observer, and counters.
pub fn skeletonize_with(
    grid: &VoxelGrid,
    opts: &SkeletonOptions,
    observer: &mut dyn FnMut(&ProposalEvent<'_>),
) -> Result<(CurveSkeleton, ExtractionStats)> {
    opts.config.validate()?;
    if let RejectPolicy::StopAfter(0) = opts.policy {
        return Err(Error::InvalidParameter("stop-after needs k >= 1".into()));
    }
    if let Some(s) = opts.seed {
        if !grid.contains(s) {
            return Err(Error::NotOccupied(s));
        }
    }
    let mut skel = CurveSkeleton {
        dims: grid.dims(),
        segments: Vec::new(),
        junctions: Vec::new(),
        loops: Vec::new(),
        params: SkeletonParams::from_options(opts),
    };
    let mut stats = ExtractionStats::default();
    for comp in grid.connected_components() {
        stats.components += 1;
        ComponentRun::new(&comp, opts)?.run(&mut skel, &mut stats, observer)?;
    }
    Ok((skel, stats))
}

struct ComponentRun<'a> {
    grid: &'a VoxelGrid,
    opts: &'a SkeletonOptions,
    mask: SurfaceMask,
    field: DistanceField,
    weights: Vec<f64>,
    on_skel: Vec<bool>,
    barrier: Vec<VoxelId>,
    // edges incident to each voxel in the segment graph
    degree: Vec<u8>,
}

impl<'a> ComponentRun<'a> {
    fn new(grid: &'a VoxelGrid, opts: &'a SkeletonOptions) -> Result<Self> {
        let mask = grid.surface_mask();
        let field = distance_transform(grid, &mask);
        let weights = field.weights();
        Ok(ComponentRun {
            grid,
            opts,
            mask,
            field,
            weights,
            on_skel: vec![false; grid.len()],
            barrier: Vec::new(),
            degree: vec![0; grid.len()],
        })
    }

    fn add_voxels(&mut self, ids: &[VoxelId]) {
        for &i in ids {
            if !self.on_skel[i as usize] {
                self.on_skel[i as usize] = true;
                self.barrier.push(i);
            }
        }
    }

    fn bump(&mut self, c: VoxelCoord) {
        let id = self.grid.id_of(c).expect("skeleton voxel is occupied") as usize;
        self.degree[id] = self.degree[id].saturating_add(1);
    }

    /// Appends a segment, recording a junction if it hangs off a voxel that
    /// already has two skeleton edges.
    fn push_segment(&mut self, skel: &mut CurveSkeleton, seg: SkeletonSegment) -> usize {
        if let Some(a) = seg.attach {
            let id = self.grid.id_of(a).expect("attach voxel is occupied") as usize;
            if self.degree[id] >= 2 && !skel.junctions.contains(&a) {
                skel.junctions.push(a);
            }
        }
        for (u, v) in seg.edges() {
            self.bump(u);
            self.bump(v);
        }
        skel.segments.push(seg);
        skel.segments.len() - 1
    }

    fn run(
        mut self,
        skel: &mut CurveSkeleton,
        stats: &mut ExtractionStats,
        observer: &mut dyn FnMut(&ProposalEvent<'_>),
    ) -> Result<()> {
        let grid = self.grid;
        stats.d2_max = stats.d2_max.max(self.field.max_squared());
        let seed = match self.opts.seed.and_then(|s| grid.id_of(s)) {
            Some(id) => id,
            None => grid.id_of(find_seed(&self.field, grid)).expect("seed is occupied"),
        };
        self.add_voxels(&[seed]);
        self.push_segment(
            skel,
            SkeletonSegment {
                kind: SegmentKind::Seed,
                path: vec![grid.coord(seed)],
                attach: None,
                close: None,
            },
        );
        let mut bfs1 = update_ids(LabelField::unreached(grid.len()), &[seed], grid, &self.weights)?;
        let mut excluded = vec![false; grid.len()];
        let mut streak = 0usize;

        while let Some(t) = select_excluding(&bfs1, &self.mask, &excluded) {
            stats.proposals += 1;
            let (bfs2, comps) = bfs2_ids(grid, &self.mask, &self.weights, t, &self.barrier, &self.on_skel)?;
            if comps.is_empty() {
                return Err(Error::Internal(format!(
                    "search from {} never reached the skeleton",
                    grid.coord(t)
                )));
            }
            let mut paths = Vec::with_capacity(comps.len());
            for comp in &comps {
                let s1 = entry_voxel(comp, &bfs2, grid)?;
                let s1 = grid.id_of(s1).expect("frontier voxel is occupied");
                let ids = trace_ids(grid, &bfs2, &self.field, t, s1, &self.on_skel)?;
                paths.push(ids.into_iter().map(|i| grid.coord(i)).collect::<Vec<_>>());
            }

            let outcome = if comps.len() == 1 {
                self.single(skel, &comps[0], &paths[0], grid.coord(t))?
            } else {
                self.looped(skel, &paths)?
            };
            observer(&ProposalEvent {
                grid,
                mask: &self.mask,
                bfs1: &bfs1,
                bfs2: &bfs2,
                v_t: grid.coord(t),
                components: &comps,
                paths: &paths,
                outcome: outcome.clone(),
            });

            let added: Vec<VoxelId> = match outcome {
                Outcome::Rejected => Vec::new(),
                Outcome::Accepted => paths[0].iter().map(|&c| grid.id_of(c).unwrap()).collect(),
                Outcome::Loop { .. } => {
                    let group = skel.loops.last().expect("loop recorded");
                    group
                        .iter()
                        .flat_map(|&s| skel.segments[s].path.iter().map(|&c| grid.id_of(c).unwrap()))
                        .collect()
                }
            };
            if added.is_empty() {
                stats.rejected += 1;
                excluded[t as usize] = true;
                streak += 1;
                if let RejectPolicy::StopAfter(k) = self.opts.policy {
                    if streak >= k {
                        break;
                    }
                }
                continue;
            }
            streak = 0;
            if matches!(outcome, Outcome::Loop { .. }) {
                stats.loops += 1;
            }
            stats.accepted += 1;
            self.add_voxels(&added);
            bfs1 = update_ids(bfs1, &added, grid, &self.weights)?;
        }
        Ok(())
    }

    fn single(
        &mut self,
        skel: &mut CurveSkeleton,
        comp: &FrontierComponent,
        path: &[VoxelCoord],
        v_t: VoxelCoord,
    ) -> Result<Outcome> {
        let s0 = attach_voxel(self.grid, path[0], &self.on_skel)
            .ok_or_else(|| Error::Internal(format!("entry voxel {} does not touch the skeleton", path[0])))?;
        let verdict = match spurious_test(&comp.surface, v_t, s0, path.len(), &self.opts.config) {
            Ok(v) => v,
            Err(Error::Internal(msg)) if comp.surface.is_empty() => {
                log::warn!("{msg}; deciding by segment length");
                spurious::length_fallback(path.len(), &self.opts.config)
            }
            Err(e) => return Err(e),
        };
        if verdict == Verdict::Reject {
            return Ok(Outcome::Rejected);
        }
        self.push_segment(
            skel,
            SkeletonSegment {
                kind: SegmentKind::Branch,
                path: path.to_vec(),
                attach: Some(s0),
                close: None,
            },
        );
        Ok(Outcome::Accepted)
    }

    fn looped(&mut self, skel: &mut CurveSkeleton, paths: &[Vec<VoxelCoord>]) -> Result<Outcome> {
        let mut arms = handle_loops(paths)?;
        let ends = loops::close_arms(paths, &mut arms);
        let mut group = Vec::new();
        for (arm, close) in arms.into_iter().zip(ends) {
            if arm.is_empty() {
                continue;
            }
            let attach = attach_voxel(self.grid, arm[0], &self.on_skel);
            let idx = self.push_segment(
                skel,
                SkeletonSegment {
                    kind: SegmentKind::LoopArm,
                    path: arm,
                    attach,
                    close,
                },
            );
            group.push(idx);
        }
        if group.is_empty() {
            return Ok(Outcome::Rejected);
        }
        let arms = group.len();
        skel.loops.push(group);
        Ok(Outcome::Loop { arms })
    }
}

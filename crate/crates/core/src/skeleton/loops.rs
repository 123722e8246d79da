//! Splitting the paths traced from several frontier components into loop arms.

use rustc_hash::FxHashSet;

use crate::error::{Error, Result};
use crate::grid::VoxelCoord;

/// Removes the region shared by all `proposals`, then the overlap of every
/// proposal with each later one. Order within each path is kept.
pub fn handle_loops(proposals: &[Vec<VoxelCoord>]) -> Result<Vec<Vec<VoxelCoord>>> {
    if proposals.len() < 2 {
        return Err(Error::Domain(format!(
            "loop handling needs at least 2 proposals, got {}",
            proposals.len()
        )));
    }
    let sets: Vec<FxHashSet<VoxelCoord>> =
        proposals.iter().map(|p| p.iter().copied().collect()).collect();
    let common: FxHashSet<VoxelCoord> = sets[0]
        .iter()
        .copied()
        .filter(|v| sets[1..].iter().all(|s| s.contains(v)))
        .collect();
    let mut arms: Vec<Vec<VoxelCoord>> = proposals
        .iter()
        .map(|p| p.iter().copied().filter(|v| !common.contains(v)).collect())
        .collect();
    for j in 0..arms.len() {
        for k in j + 1..arms.len() {
            let later: FxHashSet<VoxelCoord> = arms[k].iter().copied().collect();
            arms[j].retain(|v| !later.contains(v));
        }
    }
    Ok(arms)
}

/// For each arm, the voxel that followed its last kept voxel in the original
/// proposal. Arms whose successor is not on any kept arm get it appended so
/// that the arms join into a closed curve. Returns, per arm, the voxel its end
/// connects to.
pub(crate) fn close_arms(
    proposals: &[Vec<VoxelCoord>],
    arms: &mut [Vec<VoxelCoord>],
) -> Vec<Option<VoxelCoord>> {
    let mut ends = vec![None; arms.len()];
    for j in 0..arms.len() {
        let Some(&last) = arms[j].last() else { continue };
        let pos = proposals[j].iter().position(|&v| v == last).expect("arm voxel from proposal");
        let Some(&succ) = proposals[j].get(pos + 1) else { continue };
        if arms.iter().any(|a| a.contains(&succ)) {
            ends[j] = Some(succ);
        } else {
            arms[j].push(succ);
            ends[j] = proposals[j].get(pos + 2).copied().filter(|n| arms.iter().any(|a| a.contains(n)));
        }
    }
    ends
}

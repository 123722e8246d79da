//! Curve skeletons of sparse, noisy voxel models.
//!
//! The pipeline: [`grid`] builds the 26-connected voxel graph, [`distance`]
//! computes the distance to the surface, [`bfs`] runs the weighted frontier
//! searches, and [`skeleton`] assembles the skeleton segment by segment.
//! [`synth`] provides test models, surface noise, and metrics.

pub mod bfs;
pub mod distance;
pub mod error;
pub mod grid;
pub mod io;
pub mod skeleton;
pub mod synth;

pub use bfs::{run_bfs, run_bfs_terminating, LabelField};
pub use distance::{distance_transform, weights_from_distance, DistanceField};
pub use error::{Error, FormatError, Result};
pub use grid::{SurfaceMask, VoxelCoord, VoxelGrid, VoxelId};
pub use skeleton::{
    skeletonize, skeletonize_with, CurveSkeleton, RejectPolicy, SkeletonOptions, SpuriousTestConfig,
};

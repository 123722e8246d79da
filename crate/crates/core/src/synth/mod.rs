//! Synthetic models, surface noise, and evaluation metrics.

mod metrics;
mod noise;
mod shapes;

use std::io::Write;
use std::time::Instant;

pub use metrics::{loglog_slope, rmse, skeleton_rmse, skeleton_voxel_count, spearman};
pub use noise::{inject_noise, inject_noise_report, NoiseReport, NoiseSpec};
pub use shapes::{generate, rasterize_polylines, Axis, Shape, ShapeSpec, SynthModel};

use crate::error::{FormatError, Result};
use crate::grid::{VoxelCoord, VoxelGrid};
use crate::io::data_lines;
use crate::skeleton::{
    skeletonize_with, CurveSkeleton, SegmentKind, SkeletonOptions, SkeletonParams, SkeletonSegment,
};

/// Writes `x y z segment_id` lines.
pub fn write_centerline(voxels: &[(VoxelCoord, u32)], w: &mut impl Write) -> std::io::Result<()> {
    for (c, id) in voxels {
        writeln!(w, "{} {} {} {id}", c.x, c.y, c.z)?;
    }
    Ok(())
}

/// Parses a centerline sidecar; blank and `#` lines are skipped.
pub fn parse_centerline(text: &str) -> Result<Vec<(VoxelCoord, u32)>, FormatError> {
    let mut out = Vec::new();
    for (line, content) in data_lines(text) {
        let toks: Vec<&str> = content.split_ascii_whitespace().collect();
        if toks.len() != 4 {
            return Err(FormatError::BadLine {
                line,
                reason: format!("expected `x y z segment_id`, found {} fields", toks.len()),
            });
        }
        let mut v = [0u32; 4];
        for (slot, tok) in v.iter_mut().zip(&toks) {
            *slot = tok
                .parse::<u32>()
                .ok()
                .filter(|_| tok.bytes().all(|b| b.is_ascii_digit()))
                .ok_or_else(|| FormatError::BadLine {
                    line,
                    reason: format!("{tok:?} is not a non-negative 32-bit integer"),
                })?;
        }
        out.push((VoxelCoord::new(v[0], v[1], v[2]), v[3]));
    }
    if out.is_empty() {
        return Err(FormatError::Empty);
    }
    Ok(out)
}

/// Wraps centerline voxels as a skeleton, one segment per id in first-seen order.
pub fn centerline_skeleton(voxels: &[(VoxelCoord, u32)], dims: [u32; 3]) -> CurveSkeleton {
    let mut order: Vec<u32> = Vec::new();
    let mut segments: Vec<SkeletonSegment> = Vec::new();
    for &(c, id) in voxels {
        let k = match order.iter().position(|&o| o == id) {
            Some(k) => k,
            None => {
                order.push(id);
                segments.push(SkeletonSegment { kind: SegmentKind::Branch, path: Vec::new(), attach: None, close: None });
                segments.len() - 1
            }
        };
        segments[k].path.push(c);
    }
    CurveSkeleton {
        dims,
        segments,
        junctions: Vec::new(),
        loops: Vec::new(),
        params: SkeletonParams { t: 0.0, epsilon: 0.0, policy: "reference".into(), seed: None },
    }
}

/// One row of the runtime report.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub model: String,
    pub n: usize,
    /// Lattice cells, `nx * ny * nz`.
    pub cells: u128,
    pub d_max: f64,
    pub proposals: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub loops: usize,
    pub time_ms: f64,
    pub rmse: Option<f64>,
    pub voxel_count: usize,
}

pub const CSV_HEADER: &str = "model,n,N,d_max,proposals,accepted,rejected,loops,time_ms,rmse,voxel_count";

impl BenchRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{:.3},{},{},{},{},{:.3},{},{}",
            self.model,
            self.n,
            self.cells,
            self.d_max,
            self.proposals,
            self.accepted,
            self.rejected,
            self.loops,
            self.time_ms,
            self.rmse.map(|r| format!("{r:.4}")).unwrap_or_default(),
            self.voxel_count
        )
    }
}

/// CSV line for a model that could not be processed.
pub fn failed_csv(model: &str) -> String {
    format!("{model},,,,,,,,failed,,")
}

/// Skeletonizes `grid`, timing only the extraction. With a reference
/// centerline the RMSE column is filled.
pub fn bench_grid(
    model: &str,
    grid: &VoxelGrid,
    reference: Option<&[VoxelCoord]>,
    opts: &SkeletonOptions,
) -> Result<(BenchRow, CurveSkeleton)> {
    let start = Instant::now();
    let (skel, stats) = skeletonize_with(grid, opts, &mut |_| {})?;
    let time_ms = start.elapsed().as_secs_f64() * 1e3;
    let union = skel.union();
    let rmse = reference.map(|r| rmse(r, &union)).transpose()?;
    let row = BenchRow {
        model: model.to_string(),
        n: grid.len(),
        cells: grid.cell_count(),
        d_max: (stats.d2_max as f64).sqrt(),
        proposals: stats.proposals,
        accepted: stats.accepted,
        rejected: stats.rejected,
        loops: stats.loops,
        time_ms,
        rmse,
        voxel_count: union.len(),
    };
    Ok((row, skel))
}

/// Generates and skeletonizes every spec in order, one row each.
pub fn runtime_scaling_report(specs: &[ShapeSpec], opts: &SkeletonOptions) -> Vec<Result<BenchRow>> {
    specs
        .iter()
        .map(|spec| {
            let model = generate(spec)?;
            let reference: Vec<VoxelCoord> = model.centerline_voxels().into_iter().map(|v| v.0).collect();
            let name = spec.shape.to_string().replace(' ', "_");
            Ok(bench_grid(&name, &model.grid, Some(&reference), opts)?.0)
        })
        .collect()
}

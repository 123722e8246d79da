use std::io::Write;

use rustc_hash::FxHashMap;

use super::CurveSkeleton;
use crate::error::{Error, Result};
use crate::grid::VoxelCoord;

/// Canonical JSON document: arrays in acceptance order, integer coordinates.
pub fn to_json(skel: &CurveSkeleton) -> String {
    serde_json::to_string_pretty(skel).expect("skeleton serializes")
}

/// Parses and sanity-checks a skeleton document.
pub fn from_json(text: &str) -> Result<CurveSkeleton> {
    let skel: CurveSkeleton = serde_json::from_str(text)?;
    let [nx, ny, nz] = skel.dims;
    let inside = |c: &VoxelCoord| c.x < nx && c.y < ny && c.z < nz;
    for (i, s) in skel.segments.iter().enumerate() {
        let all = s.path.iter().chain(s.attach.iter()).chain(s.close.iter());
        if let Some(c) = all.clone().find(|c| !inside(c)) {
            return Err(Error::Domain(format!("segment {i}: voxel {c} outside dims {:?}", skel.dims)));
        }
    }
    if let Some(c) = skel.junctions.iter().find(|c| !inside(c)) {
        return Err(Error::Domain(format!("junction {c} outside dims {:?}", skel.dims)));
    }
    for group in &skel.loops {
        if let Some(&i) = group.iter().find(|&&i| i >= skel.segments.len()) {
            return Err(Error::Domain(format!("loop refers to missing segment {i}")));
        }
    }
    Ok(skel)
}

fn segment_color(i: usize) -> [u8; 3] {
    // golden-angle hue walk, full saturation
    let h = (i as f64 * 137.507_764_05) % 360.0 / 60.0;
    let x = 1.0 - (h % 2.0 - 1.0).abs();
    let (r, g, b) = match h as u32 {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    [(r * 255.0) as u8, (g * 255.0) as u8, (b * 255.0) as u8]
}

/// ASCII PLY with one vertex per skeleton voxel and an edge element; vertices
/// and edges take the color of the segment they belong to.
pub fn write_ply(skel: &CurveSkeleton, w: &mut impl Write) -> std::io::Result<()> {
    let mut index: FxHashMap<VoxelCoord, usize> = FxHashMap::default();
    let mut verts: Vec<(VoxelCoord, [u8; 3])> = Vec::new();
    for (i, s) in skel.segments.iter().enumerate() {
        for &c in &s.path {
            index.entry(c).or_insert_with(|| {
                verts.push((c, segment_color(i)));
                verts.len() - 1
            });
        }
    }
    let mut edges = Vec::new();
    for (i, s) in skel.segments.iter().enumerate() {
        for (a, b) in s.edges() {
            if let (Some(&ia), Some(&ib)) = (index.get(&a), index.get(&b)) {
                edges.push((ia, ib, segment_color(i)));
            }
        }
    }
    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    writeln!(w, "comment curve skeleton, dims {} {} {}", skel.dims[0], skel.dims[1], skel.dims[2])?;
    writeln!(w, "element vertex {}", verts.len())?;
    for p in ["x", "y", "z"] {
        writeln!(w, "property float {p}")?;
    }
    for p in ["red", "green", "blue"] {
        writeln!(w, "property uchar {p}")?;
    }
    writeln!(w, "element edge {}", edges.len())?;
    writeln!(w, "property int vertex1")?;
    writeln!(w, "property int vertex2")?;
    for p in ["red", "green", "blue"] {
        writeln!(w, "property uchar {p}")?;
    }
    writeln!(w, "end_header")?;
    for (c, [r, g, b]) in &verts {
        writeln!(w, "{} {} {} {r} {g} {b}", c.x, c.y, c.z)?;
    }
    for (a, b, [r, g, bl]) in &edges {
        writeln!(w, "{a} {b} {r} {g} {bl}")?;
    }
    Ok(())
}

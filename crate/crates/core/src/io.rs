//! Reading and writing occupancy grids.
//!
//! Two encodings are supported:
//!
//! * `ascii-vox`: a header line `VOXA nx ny nz`, then one `x y z` line per
//!   occupied voxel. Lines starting with `#` are comments. Writers emit voxels
//!   in lexicographic order with LF endings, so output is byte-stable.
//! * `binary-vox`: the magic `VOXB`, three little-endian `u32` dims, a
//!   little-endian `u64` voxel count, then that many `u32` triples.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{FormatError, Result};
use crate::grid::{VoxelCoord, VoxelGrid, MAX_DIM};

pub const ASCII_MAGIC: &str = "VOXA";
pub const BINARY_MAGIC: &[u8; 4] = b"VOXB";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VoxFormat {
    Ascii,
    Binary,
}

impl VoxFormat {
    /// Guess the encoding from the leading bytes.
    pub fn detect(bytes: &[u8]) -> VoxFormat {
        if bytes.starts_with(BINARY_MAGIC) {
            VoxFormat::Binary
        } else {
            VoxFormat::Ascii
        }
    }
}

pub fn load_grid(path: impl AsRef<Path>, format: Option<VoxFormat>) -> Result<VoxelGrid> {
    let bytes = fs::read(path)?;
    let format = format.unwrap_or_else(|| VoxFormat::detect(&bytes));
    Ok(match format {
        VoxFormat::Ascii => parse_ascii(&bytes)?,
        VoxFormat::Binary => parse_binary(&bytes)?,
    })
}

pub fn save_grid(grid: &VoxelGrid, path: impl AsRef<Path>, format: VoxFormat) -> Result<()> {
    save_grid_with_comments(grid, path, format, &[])
}

/// Like [`save_grid`]; `comments` become `#` lines after the ascii header and
/// are dropped for the binary encoding, which has no place for them.
pub fn save_grid_with_comments(
    grid: &VoxelGrid,
    path: impl AsRef<Path>,
    format: VoxFormat,
    comments: &[String],
) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    match format {
        VoxFormat::Ascii => write_ascii(grid, comments, &mut w)?,
        VoxFormat::Binary => write_binary(grid, &mut w)?,
    }
    w.flush()?;
    Ok(())
}

pub fn write_ascii(grid: &VoxelGrid, comments: &[String], w: &mut impl Write) -> std::io::Result<()> {
    let [nx, ny, nz] = grid.dims();
    writeln!(w, "{ASCII_MAGIC} {nx} {ny} {nz}")?;
    for c in comments {
        for line in c.lines() {
            writeln!(w, "# {line}")?;
        }
    }
    for v in grid.coords() {
        writeln!(w, "{} {} {}", v.x, v.y, v.z)?;
    }
    Ok(())
}

pub fn write_binary(grid: &VoxelGrid, w: &mut impl Write) -> std::io::Result<()> {
    w.write_all(BINARY_MAGIC)?;
    for d in grid.dims() {
        w.write_all(&d.to_le_bytes())?;
    }
    w.write_all(&(grid.len() as u64).to_le_bytes())?;
    for v in grid.coords() {
        w.write_all(&v.x.to_le_bytes())?;
        w.write_all(&v.y.to_le_bytes())?;
        w.write_all(&v.z.to_le_bytes())?;
    }
    Ok(())
}

pub fn to_ascii_bytes(grid: &VoxelGrid) -> Vec<u8> {
    let mut out = Vec::with_capacity(grid.len() * 12 + 32);
    write_ascii(grid, &[], &mut out).expect("writing to a Vec cannot fail");
    out
}

pub fn to_binary_bytes(grid: &VoxelGrid) -> Vec<u8> {
    let mut out = Vec::with_capacity(grid.len() * 12 + 24);
    write_binary(grid, &mut out).expect("writing to a Vec cannot fail");
    out
}

fn parse_u64(tok: &str) -> Option<u64> {
    if tok.is_empty() || !tok.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    tok.parse().ok()
}

/// Iterates `(line_number, content)` over non-blank, non-comment lines.
pub(crate) fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.split('\n').enumerate().filter_map(|(i, raw)| {
        let line = raw.strip_suffix('\r').unwrap_or(raw).trim();
        if line.is_empty() || line.starts_with('#') {
            None
        } else {
            Some((i + 1, line))
        }
    })
}

pub fn parse_ascii(bytes: &[u8]) -> Result<VoxelGrid, FormatError> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let line = bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
        FormatError::BadLine {
            line,
            reason: "invalid UTF-8".into(),
        }
    })?;
    let mut lines = data_lines(text);
    let (hline, header) = lines.next().ok_or(FormatError::BadHeader {
        line: 1,
        reason: "missing VOXA header".into(),
    })?;
    let toks: Vec<&str> = header.split_ascii_whitespace().collect();
    if toks.first() != Some(&ASCII_MAGIC) {
        return Err(FormatError::BadHeader {
            line: hline,
            reason: format!("expected {ASCII_MAGIC:?} tag"),
        });
    }
    if toks.len() != 4 {
        return Err(FormatError::BadHeader {
            line: hline,
            reason: format!("expected 3 dims, found {}", toks.len() - 1),
        });
    }
    let mut dims = [0u32; 3];
    for (k, tok) in toks[1..].iter().enumerate() {
        let d = parse_u64(tok).ok_or_else(|| FormatError::BadHeader {
            line: hline,
            reason: format!("dim {tok:?} is not a non-negative integer"),
        })?;
        if d == 0 || d > MAX_DIM as u64 {
            return Err(FormatError::BadHeader {
                line: hline,
                reason: format!("dim {d} outside 1..={MAX_DIM}"),
            });
        }
        dims[k] = d as u32;
    }

    let mut coords = Vec::new();
    for (line, content) in lines {
        let mut it = content.split_ascii_whitespace();
        let mut xyz = [0u64; 3];
        for slot in xyz.iter_mut() {
            let tok = it.next().ok_or_else(|| FormatError::BadRecord {
                line,
                reason: "expected three coordinates".into(),
            })?;
            *slot = parse_u64(tok).ok_or_else(|| FormatError::BadRecord {
                line,
                reason: format!("{tok:?} is not a non-negative integer"),
            })?;
        }
        if it.next().is_some() {
            return Err(FormatError::BadRecord {
                line,
                reason: "more than three coordinates".into(),
            });
        }
        if xyz[0] >= dims[0] as u64 || xyz[1] >= dims[1] as u64 || xyz[2] >= dims[2] as u64 {
            return Err(FormatError::OutOfBounds {
                line,
                x: xyz[0],
                y: xyz[1],
                z: xyz[2],
                dims,
            });
        }
        coords.push(VoxelCoord::new(xyz[0] as u32, xyz[1] as u32, xyz[2] as u32));
    }
    finish(dims, coords)
}

fn finish(dims: [u32; 3], mut coords: Vec<VoxelCoord>) -> Result<VoxelGrid, FormatError> {
    coords.sort_unstable();
    coords.dedup();
    if coords.is_empty() {
        return Err(FormatError::Empty);
    }
    Ok(VoxelGrid::from_sorted(dims, coords))
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32, FormatError> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
        .ok_or_else(|| FormatError::Truncated {
            offset,
            needed: (offset + 4).saturating_sub(bytes.len()),
        })
}

pub fn parse_binary(bytes: &[u8]) -> Result<VoxelGrid, FormatError> {
    if bytes.len() < 4 || &bytes[..4] != BINARY_MAGIC {
        return Err(FormatError::BadMagic {
            offset: 0,
            expected: "VOXB",
        });
    }
    let dims = [read_u32(bytes, 4)?, read_u32(bytes, 8)?, read_u32(bytes, 12)?];
    if dims.iter().any(|&d| d == 0 || d > MAX_DIM) {
        return Err(FormatError::BadDims {
            offset: 4,
            dims: dims.map(u64::from),
        });
    }
    let count_bytes = bytes.get(16..24).ok_or_else(|| FormatError::Truncated {
        offset: 16,
        needed: 24usize.saturating_sub(bytes.len()),
    })?;
    let count = u64::from_le_bytes(count_bytes.try_into().unwrap());
    let body = &bytes[24..];
    let expected = count.checked_mul(12).ok_or(FormatError::Truncated {
        offset: 24,
        needed: usize::MAX,
    })?;
    if (body.len() as u64) < expected {
        return Err(FormatError::Truncated {
            offset: bytes.len(),
            needed: (expected - body.len() as u64).min(usize::MAX as u64) as usize,
        });
    }
    if body.len() as u64 > expected {
        return Err(FormatError::TrailingBytes {
            offset: 24 + expected as usize,
            count: body.len() - expected as usize,
        });
    }
    let mut coords = Vec::with_capacity(count as usize);
    for (i, rec) in body.chunks_exact(12).enumerate() {
        let x = u32::from_le_bytes(rec[0..4].try_into().unwrap());
        let y = u32::from_le_bytes(rec[4..8].try_into().unwrap());
        let z = u32::from_le_bytes(rec[8..12].try_into().unwrap());
        if x >= dims[0] || y >= dims[1] || z >= dims[2] {
            return Err(FormatError::OutOfBoundsAt {
                offset: 24 + 12 * i,
                x,
                y,
                z,
                dims,
            });
        }
        coords.push(VoxelCoord::new(x, y, z));
    }
    finish(dims, coords)
}

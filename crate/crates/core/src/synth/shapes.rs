//! Analytic solids rasterized onto the lattice, with their centerlines.
//!
//! A voxel is occupied iff its center (the integer lattice point) lies inside
//! the solid. Branches of the Y-junction and tree models are capsules, i.e.
//! cylinders with hemispherical caps, and their centerlines run from the
//! branch origin to the pole of the cap.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{VoxelCoord, VoxelGrid};

type P3 = [f64; 3];

fn add(a: P3, b: P3) -> P3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub(a: P3, b: P3) -> P3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn scale(a: P3, s: f64) -> P3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn dot(a: P3, b: P3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: P3, b: P3) -> P3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: P3) -> P3 {
    scale(a, 1.0 / dot(a, a).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn unit(self) -> P3 {
        match self {
            Axis::X => [1.0, 0.0, 0.0],
            Axis::Y => [0.0, 1.0, 0.0],
            Axis::Z => [0.0, 0.0, 1.0],
        }
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            _ => Err(Error::InvalidParameter(format!("axis {s:?} is not one of x, y, z"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    /// Flat-ended cylinder.
    Cylinder { radius: f64, length: f64, axis: Axis },
    /// Three capsule arms of the given radii leaving a common point 120° apart.
    YJunction { radii: [f64; 3], length: f64 },
    /// Solid torus in the xy plane.
    Torus { major: f64, minor: f64 },
    Sphere { radius: f64 },
    /// Binary tree of capsules growing along +z; each level shrinks the radius
    /// by 0.7 and the length by 0.75.
    Tree { radius: f64, length: f64, depth: u32 },
}

impl Shape {
    pub fn name(&self) -> &'static str {
        match self {
            Shape::Cylinder { .. } => "cylinder",
            Shape::YJunction { .. } => "y",
            Shape::Torus { .. } => "torus",
            Shape::Sphere { .. } => "sphere",
            Shape::Tree { .. } => "tree",
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Cylinder { radius, length, axis } => {
                write!(f, "cylinder r={radius} len={length} axis={axis:?}")
            }
            Shape::YJunction { radii, length } => {
                write!(f, "y radii={},{},{} len={length}", radii[0], radii[1], radii[2])
            }
            Shape::Torus { major, minor } => write!(f, "torus major={major} minor={minor}"),
            Shape::Sphere { radius } => write!(f, "sphere r={radius}"),
            Shape::Tree { radius, length, depth } => {
                write!(f, "tree r={radius} len={length} depth={depth}")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShapeSpec {
    pub shape: Shape,
    /// Grid size; `None` fits the model with a small margin.
    pub dims: Option<[u32; 3]>,
}

impl ShapeSpec {
    pub fn new(shape: Shape) -> Self {
        ShapeSpec { shape, dims: None }
    }
}

/// A generated model and its ground-truth centerline, one polyline per segment.
#[derive(Clone, Debug)]
pub struct SynthModel {
    pub grid: VoxelGrid,
    pub centerline: Vec<Vec<[f64; 3]>>,
}

impl SynthModel {
    /// Occupied centerline voxels with their segment ids, first segment
    /// winning where segments overlap, in segment order.
    pub fn centerline_voxels(&self) -> Vec<(VoxelCoord, u32)> {
        let mut v = rasterize_polylines(&self.centerline);
        // a rounded cap pole can fall just outside the solid
        v.retain(|(c, _)| self.grid.contains(*c));
        v
    }
}

const MARGIN: f64 = 3.0;

enum Solid {
    Capsule { a: P3, b: P3, r: f64 },
    Cylinder { a: P3, b: P3, r: f64 },
    Sphere { c: P3, r: f64 },
    Torus { c: P3, major: f64, minor: f64 },
}

impl Solid {
    fn contains(&self, p: P3) -> bool {
        match *self {
            Solid::Capsule { a, b, r } => {
                let ab = sub(b, a);
                let t = (dot(sub(p, a), ab) / dot(ab, ab)).clamp(0.0, 1.0);
                let d = sub(p, add(a, scale(ab, t)));
                dot(d, d) <= r * r
            }
            Solid::Cylinder { a, b, r } => {
                let ab = sub(b, a);
                let t = dot(sub(p, a), ab) / dot(ab, ab);
                if !(0.0..=1.0).contains(&t) {
                    return false;
                }
                let d = sub(p, add(a, scale(ab, t)));
                dot(d, d) <= r * r
            }
            Solid::Sphere { c, r } => {
                let d = sub(p, c);
                dot(d, d) <= r * r
            }
            Solid::Torus { c, major, minor } => {
                let d = sub(p, c);
                let rho = (d[0] * d[0] + d[1] * d[1]).sqrt() - major;
                rho * rho + d[2] * d[2] <= minor * minor
            }
        }
    }

    fn bounds(&self) -> (P3, P3) {
        let pad = |lo: P3, hi: P3, r: f64| ([lo[0] - r, lo[1] - r, lo[2] - r], [hi[0] + r, hi[1] + r, hi[2] + r]);
        match *self {
            Solid::Capsule { a, b, r } | Solid::Cylinder { a, b, r } => {
                let lo = [a[0].min(b[0]), a[1].min(b[1]), a[2].min(b[2])];
                let hi = [a[0].max(b[0]), a[1].max(b[1]), a[2].max(b[2])];
                pad(lo, hi, r)
            }
            Solid::Sphere { c, r } => pad(c, c, r),
            Solid::Torus { c, major, minor } => {
                let (lo, hi) = pad(c, c, major + minor);
                ([lo[0], lo[1], c[2] - minor], [hi[0], hi[1], c[2] + minor])
            }
        }
    }

    fn translate(&mut self, s: P3) {
        match self {
            Solid::Capsule { a, b, .. } | Solid::Cylinder { a, b, .. } => {
                *a = add(*a, s);
                *b = add(*b, s);
            }
            Solid::Sphere { c, .. } | Solid::Torus { c, .. } => *c = add(*c, s),
        }
    }
}

fn check_positive(name: &str, v: f64, min: f64) -> Result<()> {
    if !(v >= min && v.is_finite()) {
        return Err(Error::InvalidParameter(format!("{name} = {v} must be a finite value >= {min}")));
    }
    Ok(())
}

fn build(shape: &Shape) -> Result<(Vec<Solid>, Vec<Vec<P3>>)> {
    let o = [0.0; 3];
    Ok(match *shape {
        Shape::Cylinder { radius, length, axis } => {
            check_positive("radius", radius, 1.0)?;
            check_positive("length", length, 1.0)?;
            let b = scale(axis.unit(), length);
            (vec![Solid::Cylinder { a: o, b, r: radius }], vec![vec![o, b]])
        }
        Shape::YJunction { radii, length } => {
            for r in radii {
                check_positive("radius", r, 1.0)?;
            }
            check_positive("length", length, 1.0)?;
            let s = (PI / 3.0).sin();
            let dirs = [[1.0, 0.0, 0.0], [-0.5, s, 0.0], [-0.5, -s, 0.0]];
            let mut solids = Vec::new();
            let mut lines = Vec::new();
            for (d, r) in dirs.into_iter().zip(radii) {
                solids.push(Solid::Capsule { a: o, b: scale(d, length), r });
                lines.push(vec![o, scale(d, length + r)]);
            }
            (solids, lines)
        }
        Shape::Torus { major, minor } => {
            check_positive("minor radius", minor, 1.0)?;
            if !(major > minor + 1.0 && major.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "major radius {major} must exceed minor radius {minor} by more than 1"
                )));
            }
            let k = (2.0 * PI * major).ceil().max(16.0) as usize;
            let circle = (0..=k)
                .map(|i| {
                    let a = 2.0 * PI * i as f64 / k as f64;
                    [major * a.cos(), major * a.sin(), 0.0]
                })
                .collect();
            (vec![Solid::Torus { c: o, major, minor }], vec![circle])
        }
        Shape::Sphere { radius } => {
            check_positive("radius", radius, 1.0)?;
            (vec![Solid::Sphere { c: o, r: radius }], vec![vec![o]])
        }
        Shape::Tree { radius, length, depth } => {
            check_positive("radius", radius, 1.0)?;
            check_positive("length", length, 1.0)?;
            if depth > 8 {
                return Err(Error::InvalidParameter(format!("tree depth {depth} exceeds 8")));
            }
            let mut solids = Vec::new();
            let mut lines = Vec::new();
            grow(&mut solids, &mut lines, o, [0.0, 0.0, 1.0], radius, length, 0, depth)?;
            (solids, lines)
        }
    })
}

#[allow(clippy::too_many_arguments)]
fn grow(
    solids: &mut Vec<Solid>,
    lines: &mut Vec<Vec<P3>>,
    start: P3,
    dir: P3,
    r: f64,
    len: f64,
    level: u32,
    depth: u32,
) -> Result<()> {
    if r < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "tree branches at level {level} would be thinner than one voxel"
        )));
    }
    let end = add(start, scale(dir, len));
    solids.push(Solid::Capsule { a: start, b: end, r });
    let leaf = level == depth;
    lines.push(vec![start, if leaf { add(end, scale(dir, r)) } else { end }]);
    if leaf {
        return Ok(());
    }
    let helper = if dir[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let u = norm(cross(dir, helper));
    let v = cross(dir, u);
    let theta = 35f64.to_radians();
    for k in 0..2 {
        let phi = (level as f64 + 2.0 * k as f64) * PI / 2.0;
        let side = add(scale(u, phi.cos()), scale(v, phi.sin()));
        let child = norm(add(scale(dir, theta.cos()), scale(side, theta.sin())));
        grow(solids, lines, end, child, r * 0.7, len * 0.75, level + 1, depth)?;
    }
    Ok(())
}

/// Rasterizes `spec` and returns it with its centerline.
pub fn generate(spec: &ShapeSpec) -> Result<SynthModel> {
    let (mut solids, mut lines) = build(&spec.shape)?;
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for s in &solids {
        let (a, b) = s.bounds();
        for k in 0..3 {
            lo[k] = lo[k].min(a[k]);
            hi[k] = hi[k].max(b[k]);
        }
    }
    let shift = [MARGIN - lo[0].floor(), MARGIN - lo[1].floor(), MARGIN - lo[2].floor()];
    for s in &mut solids {
        s.translate(shift);
    }
    for l in &mut lines {
        for p in l.iter_mut() {
            *p = add(*p, shift);
        }
    }
    let hi = add(hi, shift);
    let needed = hi.map(|h| h.ceil() + MARGIN + 1.0);
    if needed.iter().any(|&d| d > crate::grid::MAX_DIM as f64) {
        return Err(Error::InvalidParameter(format!("{} is too large for the lattice", spec.shape)));
    }
    let fitted = needed.map(|d| d as u32);
    let dims = match spec.dims {
        None => fitted,
        Some(d) => {
            if (0..3).any(|k| d[k] < fitted[k]) {
                return Err(Error::InvalidParameter(format!(
                    "{} needs dims of at least {:?}, got {:?}",
                    spec.shape, fitted, d
                )));
            }
            d
        }
    };

    let mut coords = Vec::new();
    for s in &solids {
        let (a, b) = s.bounds();
        let (x0, x1) = (a[0].ceil().max(0.0) as u32, b[0].floor() as u32);
        let (y0, y1) = (a[1].ceil().max(0.0) as u32, b[1].floor() as u32);
        let (z0, z1) = (a[2].ceil().max(0.0) as u32, b[2].floor() as u32);
        for x in x0..=x1 {
            for y in y0..=y1 {
                for z in z0..=z1 {
                    if s.contains([x as f64, y as f64, z as f64]) {
                        coords.push(VoxelCoord::new(x, y, z));
                    }
                }
            }
        }
    }
    let grid = VoxelGrid::new(dims, coords)
        .map_err(|e| Error::InvalidParameter(format!("{} rasterizes to nothing: {e}", spec.shape)))?;
    Ok(SynthModel { grid, centerline: lines })
}

/// Voxels whose centers are nearest to points sampled densely along the
/// polylines, tagged with the polyline index.
pub fn rasterize_polylines(lines: &[Vec<[f64; 3]>]) -> Vec<(VoxelCoord, u32)> {
    let mut seen = rustc_hash::FxHashSet::default();
    let mut out = Vec::new();
    let mut put = |p: P3, id: u32, out: &mut Vec<(VoxelCoord, u32)>| {
        let r = p.map(|v| v.round().max(0.0) as u32);
        let c = VoxelCoord::new(r[0], r[1], r[2]);
        if seen.insert(c) {
            out.push((c, id));
        }
    };
    for (id, line) in lines.iter().enumerate() {
        let id = id as u32;
        if let Some(&p) = line.first() {
            put(p, id, &mut out);
        }
        for w in line.windows(2) {
            let d = sub(w[1], w[0]);
            let steps = (dot(d, d).sqrt() * 4.0).ceil().max(1.0) as usize;
            for i in 1..=steps {
                put(add(w[0], scale(d, i as f64 / steps as f64)), id, &mut out);
            }
        }
    }
    out
}

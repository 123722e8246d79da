use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::VoxelCoord;
use crate::skeleton::CurveSkeleton;

/// Root mean squared distance from each reference voxel to its closest test
/// voxel. Directional: extra test voxels cost nothing.
pub fn rmse(reference: &[VoxelCoord], test: &[VoxelCoord]) -> Result<f64> {
    if reference.is_empty() || test.is_empty() {
        return Err(Error::Domain("RMSE needs two nonempty skeletons".into()));
    }
    let sum: u64 = reference
        .par_iter()
        .map(|&r| test.iter().map(|&t| r.dist2(t)).min().unwrap())
        .sum();
    Ok((sum as f64 / reference.len() as f64).sqrt())
}

pub fn skeleton_rmse(reference: &CurveSkeleton, test: &CurveSkeleton) -> Result<f64> {
    rmse(&reference.union(), &test.union())
}

pub fn skeleton_voxel_count(s: &CurveSkeleton) -> usize {
    s.voxel_count()
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        // tied values share the mean of their positions
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Rank correlation with average ranks for ties. NaN if either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Domain("spearman needs two equally long series of length >= 2".into()));
    }
    Ok(pearson(&ranks(x), &ranks(y)))
}

/// Least-squares slope of `ln t` against `ln n`.
pub fn loglog_slope(n: &[f64], t: &[f64]) -> Result<f64> {
    if n.len() != t.len() || n.len() < 2 || n.iter().chain(t).any(|&v| !(v > 0.0)) {
        return Err(Error::Domain("log-log fit needs >= 2 positive pairs".into()));
    }
    let lx: Vec<f64> = n.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = t.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / lx.len() as f64;
    let my = ly.iter().sum::<f64>() / ly.len() as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, b) in lx.iter().zip(&ly) {
        num += (a - mx) * (b - my);
        den += (a - mx) * (a - mx);
    }
    if den == 0.0 {
        return Err(Error::Domain("log-log fit needs at least two distinct sizes".into()));
    }
    Ok(num / den)
}

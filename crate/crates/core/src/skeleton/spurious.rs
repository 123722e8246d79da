//! Statistical rejection of noise-scale branches.
//!
//! Surface voxels of the frontier that met the skeleton are treated as a 3-D
//! Gaussian cloud around the attachment point. The proposed tip's squared
//! Mahalanobis distance to that cloud follows a chi-squared law with three
//! degrees of freedom when the tip is just another sample of the same noise,
//! so a tip whose density is still above the threshold is discarded.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::VoxelCoord;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpuriousTestConfig {
    /// Density above which a proposed tip is considered noise.
    pub t: f64,
    /// Ridge added to the covariance diagonal, in voxel².
    pub epsilon: f64,
    /// Below this many surface samples the covariance is not estimated.
    pub min_surface_samples: usize,
    /// Fallback: accept only segments longer than this many voxels.
    pub min_segment_length: usize,
}

impl Default for SpuriousTestConfig {
    fn default() -> Self {
        SpuriousTestConfig {
            t: 1e-12,
            epsilon: 1e-6,
            min_surface_samples: 4,
            min_segment_length: 3,
        }
    }
}

impl SpuriousTestConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t > 0.0 && self.t <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "threshold t = {} must lie in (0, 1]",
                self.t
            )));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "epsilon = {} must be finite and non-negative",
                self.epsilon
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Accept,
    Reject,
}

/// Chi-squared density with three degrees of freedom,
/// `sqrt(x) e^(-x/2) / (2^(3/2) Γ(3/2))`.
pub fn chi2_pdf_3dof(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("chi-squared density needs x >= 0, got {x}")));
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(x.sqrt() * (-0.5 * x).exp() / (2.0 * std::f64::consts::PI).sqrt())
}

/// Squared Mahalanobis distance of `point` to the cloud `samples`, using the
/// population covariance plus `epsilon * I`.
pub fn mahalanobis2(samples: &[VoxelCoord], point: VoxelCoord, origin: VoxelCoord, epsilon: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Domain("no samples".into()));
    }
    let rel = |c: VoxelCoord| {
        let [x, y, z] = c.as_f64();
        let [ox, oy, oz] = origin.as_f64();
        Vector3::new(x - ox, y - oy, z - oz)
    };
    let n = samples.len() as f64;
    let mu = samples.iter().map(|&c| rel(c)).sum::<Vector3<f64>>() / n;
    let mut cov = Matrix3::zeros();
    for &c in samples {
        let d = rel(c) - mu;
        cov += d * d.transpose();
    }
    cov /= n;
    cov += Matrix3::identity() * epsilon;
    let inv = cov
        .try_inverse()
        .ok_or_else(|| Error::Domain("covariance is singular; use epsilon > 0".into()))?;
    let d = rel(point) - mu;
    Ok((d.transpose() * inv * d)[(0, 0)].max(0.0))
}

/// Decides whether the segment to `v_t` is noise.
///
/// `surface` is the surface part of the frontier component the segment was
/// traced from and `segment_len` the number of voxels in the traced path.
pub fn spurious_test(
    surface: &[VoxelCoord],
    v_t: VoxelCoord,
    v_s0: VoxelCoord,
    segment_len: usize,
    config: &SpuriousTestConfig,
) -> Result<Verdict> {
    if surface.is_empty() {
        return Err(Error::Internal(format!(
            "frontier component for tip {v_t} has no surface voxels"
        )));
    }
    if surface.len() < config.min_surface_samples {
        return Ok(length_fallback(segment_len, config));
    }
    let x = mahalanobis2(surface, v_t, v_s0, config.epsilon)?;
    Ok(if chi2_pdf_3dof(x)? > config.t {
        Verdict::Reject
    } else {
        Verdict::Accept
    })
}

pub(crate) fn length_fallback(segment_len: usize, config: &SpuriousTestConfig) -> Verdict {
    if segment_len > config.min_segment_length {
        Verdict::Accept
    } else {
        Verdict::Reject
    }
}

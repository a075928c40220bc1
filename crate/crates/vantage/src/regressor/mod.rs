//! Evaluation-side viewpoint regressor: image in, six-component factorized
//! viewpoint vector out, with azimuth-pair normalization at decode time and
//! partial-label (masked) training.

mod model;
mod train;

pub use model::{PoseRegressor, RegressorConfig};
pub use train::{
    load_regressor, save_regressor,
    build_regressor_dataset, train_regressor, ComponentStats, DatasetErrors, RegressorDataset,
    RegressorTrainConfig, ValidationReport,
};

use crate::error::{Error, Result};
use crate::geometry::circular::wrap_angle;
use crate::geometry::CameraPose;
use crate::scalar::Real;
use ndarray::Array2;

/// Below this (sin, cos) norm an estimate carries no azimuth direction.
pub const DEGENERATE_NORM: f64 = 1e-12;

/// Raw regressor output plus its decoded pose and per-component validity.
#[derive(Debug, Clone)]
pub struct PoseEstimate {
    /// Normalized raw output: [sin az, cos az, elevation, r_norm, pitch, yaw].
    pub raw6: [f64; 6],
    pub decoded: CameraPose<f64>,
    pub label_mask: [bool; 6],
}

/// Renormalizes the azimuth pair and decodes the raw head output into a
/// pose, denormalizing radius through the dataset's radius range. Elevation
/// and radius are clamped into representable pose bounds; the raw values
/// remain available in `raw6`.
pub fn decode_estimate(raw: &[f64; 6], radius_range: (f64, f64)) -> Result<PoseEstimate> {
    let (s, c) = (raw[0], raw[1]);
    let norm = (s * s + c * c).sqrt();
    if !(norm > DEGENERATE_NORM) {
        return Err(Error::DegenerateEstimate);
    }
    let (s, c) = (s / norm, c / norm);
    let azimuth = wrap_angle(s.atan2(c));
    let half_pi = std::f64::consts::FRAC_PI_2;
    let elevation = raw[2].clamp(-(half_pi - 1e-6), half_pi - 1e-6);
    let radius = (radius_range.0 + raw[3] * (radius_range.1 - radius_range.0)).max(1e-3);
    let decoded = CameraPose::new(azimuth, elevation, radius, raw[4], raw[5])?;
    Ok(PoseEstimate {
        raw6: [s, c, raw[2], raw[3], raw[4], raw[5]],
        decoded,
        label_mask: [true; 6],
    })
}

/// Mean over the batch of the per-sample sum of squared errors over masked
/// components. Returns the loss and its gradient w.r.t. the predictions;
/// unmasked components carry exactly zero gradient.
pub fn masked_sse_loss<R: Real>(
    pred: &Array2<R>,
    target: &Array2<R>,
    mask: &[bool; 6],
) -> Result<(R, Array2<R>)> {
    if !mask.iter().any(|&m| m) {
        return Err(Error::config("loss mask marks no components"));
    }
    if pred.dim() != target.dim() || pred.ncols() != 6 {
        return Err(Error::shape(
            format!("(batch, 6) prediction/target pair, target {:?}", target.dim()),
            format!("{:?}", pred.dim()),
        ));
    }
    let batch = pred.nrows();
    let inv_b = R::one() / R::of(batch as f64);
    let mut loss = R::zero();
    let mut grad = Array2::zeros(pred.raw_dim());
    for i in 0..batch {
        for j in 0..6 {
            if mask[j] {
                let diff = pred[[i, j]] - target[[i, j]];
                loss += diff * diff * inv_b;
                grad[[i, j]] = R::of(2.0) * diff * inv_b;
            }
        }
    }
    Ok((loss, grad))
}

//! Fixed-length vector encodings of a camera pose.
//!
//! Four real encodings plus a `Constant` control used by ablations: the
//! constant kind ignores the pose entirely and always produces `[1]`, which
//! turns the downstream token into a learned pose-independent embedding.

use crate::error::{Error, Result};
use crate::geometry::linalg::{cross, mat_vec, normalize};
use crate::geometry::{pose_to_camera_frame, CameraPose};
use crate::scalar::Real;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodingKind {
    Factorized,
    Sinusoidal,
    Matrix12,
    Plucker,
    Constant,
}

/// Flat real vector encoding of a pose.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewpointEncoding<R: Real> {
    pub kind: EncodingKind,
    pub data: Vec<R>,
}

fn check_radius_range<R: Real>(radius_range: (R, R)) -> Result<()> {
    if !(radius_range.0 < radius_range.1) {
        return Err(Error::config(format!(
            "degenerate radius range ({}, {})",
            radius_range.0, radius_range.1
        )));
    }
    Ok(())
}

fn normalized_radius<R: Real>(radius: R, radius_range: (R, R)) -> R {
    let r_norm = (radius - radius_range.0) / (radius_range.1 - radius_range.0);
    if r_norm < R::zero() || r_norm > R::one() {
        log::warn!(
            "radius {radius} outside normalization range ({}, {}); clamping",
            radius_range.0,
            radius_range.1
        );
    }
    r_norm.max(R::zero()).min(R::one())
}

/// `[sin az, cos az, el, r_norm, pitch, yaw]` with radius min-max normalized
/// to [0, 1]; elevation, pitch and yaw pass through as radians.
pub fn encode_factorized<R: Real>(
    pose: &CameraPose<R>,
    radius_range: (R, R),
) -> Result<ViewpointEncoding<R>> {
    check_radius_range(radius_range)?;
    let (s, c) = pose.azimuth().sin_cos();
    Ok(ViewpointEncoding {
        kind: EncodingKind::Factorized,
        data: vec![
            s,
            c,
            pose.elevation(),
            normalized_radius(pose.radius(), radius_range),
            pose.pitch(),
            pose.yaw(),
        ],
    })
}

/// Frequency-ladder encoding: for each of the five parameters p (radius
/// min-max normalized first, angles raw radians) and each k in 0..F, emits
/// `[sin(2^k p), cos(2^k p), sin(2^k pi p), cos(2^k pi p)]`. Length 4*F*5.
pub fn encode_sinusoidal<R: Real>(
    pose: &CameraPose<R>,
    radius_range: (R, R),
    num_freqs: usize,
) -> Result<ViewpointEncoding<R>> {
    if num_freqs == 0 {
        return Err(Error::config("sinusoidal encoding needs num_freqs >= 1"));
    }
    check_radius_range(radius_range)?;
    let params = [
        pose.azimuth(),
        pose.elevation(),
        normalized_radius(pose.radius(), radius_range),
        pose.pitch(),
        pose.yaw(),
    ];
    let pi = R::of(std::f64::consts::PI);
    let mut data = Vec::with_capacity(4 * num_freqs * 5);
    for p in params {
        let mut scale = R::one();
        for _ in 0..num_freqs {
            let a = scale * p;
            let b = scale * pi * p;
            data.push(a.sin());
            data.push(a.cos());
            data.push(b.sin());
            data.push(b.cos());
            scale = scale + scale;
        }
    }
    Ok(ViewpointEncoding {
        kind: EncodingKind::Sinusoidal,
        data,
    })
}

/// Row-major flattening of the 3x4 world-to-camera matrix `[R^T | -R^T p]`.
pub fn encode_matrix12<R: Real>(pose: &CameraPose<R>) -> Result<ViewpointEncoding<R>> {
    let frame = pose_to_camera_frame(pose)?;
    let w2c = frame.world_to_camera_rotation();
    let t = mat_vec(&w2c, frame.position);
    let mut data = Vec::with_capacity(12);
    for row in 0..3 {
        data.extend_from_slice(&w2c[row]);
        data.push(-t[row]);
    }
    Ok(ViewpointEncoding {
        kind: EncodingKind::Matrix12,
        data,
    })
}

/// Per-pixel Pluecker rays `(d, m)` on a grid_h x grid_w image plane at the
/// frame's field of view: d is the unit ray direction in world coordinates
/// and m = position x d. Row-major, six reals per pixel.
pub fn encode_plucker<R: Real>(
    pose: &CameraPose<R>,
    grid_h: usize,
    grid_w: usize,
) -> Result<ViewpointEncoding<R>> {
    if grid_h == 0 || grid_w == 0 {
        return Err(Error::config("plucker grid must be at least 1x1"));
    }
    let frame = pose_to_camera_frame(pose)?;
    let half_fov = frame.fov_deg.to_f64_().to_radians() / 2.0;
    let tan_x = R::of(half_fov.tan());
    let tan_y = tan_x * R::of(grid_h as f64 / grid_w as f64);
    let mut data = Vec::with_capacity(grid_h * grid_w * 6);
    for i in 0..grid_h {
        for j in 0..grid_w {
            let ndc_x = R::of((j as f64 + 0.5) / grid_w as f64 * 2.0 - 1.0);
            let ndc_y = R::of(1.0 - (i as f64 + 0.5) / grid_h as f64 * 2.0);
            let dir_cam = normalize([ndc_x * tan_x, ndc_y * tan_y, -R::one()]);
            let d = mat_vec(&frame.rotation, dir_cam);
            let m = cross(frame.position, d);
            data.extend_from_slice(&d);
            data.extend_from_slice(&m);
        }
    }
    Ok(ViewpointEncoding {
        kind: EncodingKind::Plucker,
        data,
    })
}

/// Pose-independent control input for ablations.
pub fn encode_constant<R: Real>() -> ViewpointEncoding<R> {
    ViewpointEncoding {
        kind: EncodingKind::Constant,
        data: vec![R::one()],
    }
}

/// Serializable encoder configuration: pins the encoding kind and its
/// parameters so checkpoints reproduce token inputs bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViewpointEncoder {
    Factorized,
    Sinusoidal { num_freqs: usize },
    Matrix12,
    Plucker { grid_h: usize, grid_w: usize },
    Constant,
}

impl ViewpointEncoder {
    pub fn kind(&self) -> EncodingKind {
        match self {
            ViewpointEncoder::Factorized => EncodingKind::Factorized,
            ViewpointEncoder::Sinusoidal { .. } => EncodingKind::Sinusoidal,
            ViewpointEncoder::Matrix12 => EncodingKind::Matrix12,
            ViewpointEncoder::Plucker { .. } => EncodingKind::Plucker,
            ViewpointEncoder::Constant => EncodingKind::Constant,
        }
    }

    pub fn output_len(&self) -> usize {
        match self {
            ViewpointEncoder::Factorized => 6,
            ViewpointEncoder::Sinusoidal { num_freqs } => 4 * num_freqs * 5,
            ViewpointEncoder::Matrix12 => 12,
            ViewpointEncoder::Plucker { grid_h, grid_w } => 6 * grid_h * grid_w,
            ViewpointEncoder::Constant => 1,
        }
    }

    pub fn encode<R: Real>(
        &self,
        pose: &CameraPose<R>,
        radius_range: (R, R),
    ) -> Result<ViewpointEncoding<R>> {
        match self {
            ViewpointEncoder::Factorized => encode_factorized(pose, radius_range),
            ViewpointEncoder::Sinusoidal { num_freqs } => {
                encode_sinusoidal(pose, radius_range, *num_freqs)
            }
            ViewpointEncoder::Matrix12 => encode_matrix12(pose),
            ViewpointEncoder::Plucker { grid_h, grid_w } => {
                encode_plucker(pose, *grid_h, *grid_w)
            }
            ViewpointEncoder::Constant => Ok(encode_constant()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::linalg::{dot, norm, vsub};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

    const RANGE: (f64, f64) = (4.0 / 3.0, 2.0);

    fn pose(az: f64, el: f64, r: f64, pitch: f64, yaw: f64) -> CameraPose<f64> {
        CameraPose::new(az, el, r, pitch, yaw).unwrap()
    }

    #[test]
    fn factorized_at_range_minimum() {
        let e = encode_factorized(&pose(0.0, 0.0, 4.0 / 3.0, 0.0, 0.0), RANGE).unwrap();
        assert_eq!(e.data, vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn factorized_at_range_maximum() {
        let e = encode_factorized(
            &pose(FRAC_PI_2, FRAC_PI_4, 2.0, PI / 12.0, -PI / 12.0),
            RANGE,
        )
        .unwrap();
        assert!((e.data[0] - 1.0).abs() < 1e-15);
        assert!(e.data[1].abs() < 1e-15);
        assert_eq!(e.data[2], FRAC_PI_4);
        assert_eq!(e.data[3], 1.0);
        assert_eq!(e.data[4], PI / 12.0);
        assert_eq!(e.data[5], -PI / 12.0);
    }

    #[test]
    fn factorized_periodic() {
        // Canonical wrapping happens at construction; wrapping az + 2*pi in
        // floating point can differ from az by a few ulps, so the encodings
        // agree to tight but not bitwise tolerance.
        let a = encode_factorized(&pose(0.3, 0.1, 1.5, 0.0, 0.0), RANGE).unwrap();
        let b = encode_factorized(&pose(0.3 + TAU, 0.1, 1.5, 0.0, 0.0), RANGE).unwrap();
        for (x, y) in a.data.iter().zip(&b.data) {
            assert!((x - y).abs() < 1e-12);
        }
        // Identical wrapped poses encode bitwise identically.
        let c = encode_factorized(&pose(0.3, 0.1, 1.5, 0.0, 0.0), RANGE).unwrap();
        assert_eq!(a.data, c.data);
    }

    #[test]
    fn factorized_clamps_out_of_range_radius() {
        let e = encode_factorized(&pose(0.0, 0.0, 3.0, 0.0, 0.0), RANGE).unwrap();
        assert_eq!(e.data[3], 1.0);
        let e = encode_factorized(&pose(0.0, 0.0, 1.0, 0.0, 0.0), RANGE).unwrap();
        assert_eq!(e.data[3], 0.0);
    }

    #[test]
    fn degenerate_radius_range_rejected() {
        assert!(encode_factorized(&pose(0.0, 0.0, 1.5, 0.0, 0.0), (2.0, 2.0)).is_err());
        assert!(encode_sinusoidal(&pose(0.0, 0.0, 1.5, 0.0, 0.0), (2.0, 1.0), 2).is_err());
    }

    #[test]
    fn sinusoidal_zero_pose() {
        // Azimuth, elevation, pitch, yaw zero and radius at the range
        // minimum: every sin entry is 0 and every cos entry is 1.
        let e = encode_sinusoidal(&pose(0.0, 0.0, 4.0 / 3.0, 0.0, 0.0), RANGE, 3).unwrap();
        assert_eq!(e.data.len(), 4 * 3 * 5);
        for (i, v) in e.data.iter().enumerate() {
            if i % 2 == 0 {
                assert_eq!(*v, 0.0, "sin entry {i}");
            } else {
                assert_eq!(*v, 1.0, "cos entry {i}");
            }
        }
    }

    #[test]
    fn sinusoidal_azimuth_block() {
        let e = encode_sinusoidal(&pose(FRAC_PI_2, 0.0, 4.0 / 3.0, 0.0, 0.0), RANGE, 1).unwrap();
        assert_eq!(e.data.len(), 20);
        let expected = [
            FRAC_PI_2.sin(),
            FRAC_PI_2.cos(),
            (PI * FRAC_PI_2).sin(),
            (PI * FRAC_PI_2).cos(),
        ];
        assert!((e.data[0] - 1.0).abs() < 1e-15);
        for (got, want) in e.data[..4].iter().zip(expected) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn sinusoidal_length() {
        let e = encode_sinusoidal(&pose(1.0, 0.2, 1.5, 0.1, -0.1), RANGE, 4).unwrap();
        assert_eq!(e.data.len(), 80);
        assert!(encode_sinusoidal(&pose(1.0, 0.2, 1.5, 0.1, -0.1), RANGE, 0).is_err());
    }

    #[test]
    fn matrix12_front_view_translation() {
        let p = pose(0.0, 0.0, 1.5, 0.0, 0.0);
        let e = encode_matrix12(&p).unwrap();
        assert_eq!(e.data.len(), 12);
        // Independent route: -R^T * position computed via the frame oracle.
        let frame = pose_to_camera_frame(&p).unwrap();
        let w2c = frame.world_to_camera_rotation();
        let t = mat_vec(&w2c, frame.position);
        for row in 0..3 {
            assert!((e.data[row * 4 + 3] + t[row]).abs() < 1e-12);
        }
    }

    #[test]
    fn matrix12_deterministic_and_orthonormal() {
        let p = pose(1.1, 0.4, 1.7, 0.05, -0.08);
        let a = encode_matrix12(&p).unwrap();
        let b = encode_matrix12(&p).unwrap();
        assert_eq!(a.data, b.data);
        // Rows of the rotation block are orthonormal.
        let row = |r: usize| [a.data[r * 4], a.data[r * 4 + 1], a.data[r * 4 + 2]];
        for r in 0..3 {
            assert!((norm(row(r)) - 1.0).abs() < 1e-6);
            for r2 in (r + 1)..3 {
                assert!(dot(row(r), row(r2)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn plucker_center_ray_hits_origin() {
        let p = pose(0.7, 0.3, 1.6, 0.0, 0.0);
        let e = encode_plucker(&p, 1, 1).unwrap();
        assert_eq!(e.data.len(), 6);
        let frame = pose_to_camera_frame(&p).unwrap();
        let d = [e.data[0], e.data[1], e.data[2]];
        let expected = normalize(vsub([0.0; 3], frame.position));
        assert!(norm(vsub(d, expected)) < 1e-12);
    }

    #[test]
    fn plucker_identity_holds() {
        let p = pose(2.2, 0.5, 1.9, 0.1, -0.2);
        let e = encode_plucker(&p, 5, 7).unwrap();
        for px in e.data.chunks_exact(6) {
            let d = [px[0], px[1], px[2]];
            let m = [px[3], px[4], px[5]];
            assert!((norm(d) - 1.0).abs() < 1e-5);
            assert!(dot(d, m).abs() < 1e-5);
        }
    }

    #[test]
    fn plucker_front_view_symmetry() {
        let p = pose(0.0, 0.0, 1.5, 0.0, 0.0);
        let e = encode_plucker(&p, 4, 4).unwrap();
        assert_eq!(e.data.len(), 96);
        let ray = |i: usize, j: usize| {
            let base = (i * 4 + j) * 6;
            [e.data[base], e.data[base + 1], e.data[base + 2]]
        };
        // Mirrored pixel columns flip the horizontal (world y) component and
        // mirrored rows flip the vertical (world z) component.
        for i in 0..4 {
            for j in 0..4 {
                let a = ray(i, j);
                let b = ray(i, 3 - j);
                assert!((a[1] + b[1]).abs() < 1e-6);
                assert!((a[0] - b[0]).abs() < 1e-6);
                let c = ray(3 - i, j);
                assert!((a[2] + c[2]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn encoder_config_lengths_match() {
        let p = pose(1.0, 0.3, 1.5, 0.0, 0.1);
        for enc in [
            ViewpointEncoder::Factorized,
            ViewpointEncoder::Sinusoidal { num_freqs: 4 },
            ViewpointEncoder::Matrix12,
            ViewpointEncoder::Plucker { grid_h: 3, grid_w: 3 },
            ViewpointEncoder::Constant,
        ] {
            let e = enc.encode(&p, RANGE).unwrap();
            assert_eq!(e.data.len(), enc.output_len());
            assert_eq!(e.kind, enc.kind());
        }
    }
}

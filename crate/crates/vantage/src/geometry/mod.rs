//! Object-centric camera model.
//!
//! The object sits at the world origin with its front along +x and +z up.
//! Azimuth is measured counterclockwise from +x when viewed from +z. A pose
//! is five numbers: spherical position (azimuth, elevation, radius) plus a
//! pitch/yaw offset of the optical axis relative to the ray towards the
//! origin. Positive pitch tilts the camera down, positive yaw tilts it left,
//! and roll is always zero (camera up stays aligned with world up).

pub mod circular;
pub mod encoding;
pub mod linalg;
pub mod records;

use crate::error::{Error, Result};
use crate::scalar::Real;
use linalg::{cross, mat_det, mat_vec, normalize, rotation_about_axis, vscale, Mat3, Vec3};
use rand::Rng;

/// Default field of view in degrees (35 mm focal length on a 36 mm sensor).
pub const DEFAULT_FOV_DEG: f64 = 54.4;

/// Five-parameter object-centric camera pose. Angles in radians, radius in
/// units of the object diameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose<R: Real> {
    azimuth: R,
    elevation: R,
    radius: R,
    pitch: R,
    yaw: R,
}

impl<R: Real> CameraPose<R> {
    /// Builds a pose, wrapping azimuth into [0, 2*pi) and validating the
    /// remaining components.
    pub fn new(azimuth: R, elevation: R, radius: R, pitch: R, yaw: R) -> Result<Self> {
        if !(radius > R::zero()) || !radius.is_finite() {
            return Err(Error::config(format!("radius must be > 0, got {radius}")));
        }
        let half_pi = R::of(std::f64::consts::FRAC_PI_2);
        if !(elevation.abs() < half_pi) {
            return Err(Error::DegeneratePose(format!(
                "elevation {elevation} outside (-pi/2, pi/2)"
            )));
        }
        for (name, v) in [("azimuth", azimuth), ("pitch", pitch), ("yaw", yaw)] {
            if !v.is_finite() {
                return Err(Error::config(format!("{name} must be finite, got {v}")));
            }
        }
        Ok(Self {
            azimuth: circular::wrap_angle(azimuth),
            elevation,
            radius,
            pitch,
            yaw,
        })
    }

    pub fn azimuth(&self) -> R {
        self.azimuth
    }

    pub fn elevation(&self) -> R {
        self.elevation
    }

    pub fn radius(&self) -> R {
        self.radius
    }

    pub fn pitch(&self) -> R {
        self.pitch
    }

    pub fn yaw(&self) -> R {
        self.yaw
    }

    pub fn cast<T: Real>(&self) -> CameraPose<T> {
        CameraPose {
            azimuth: T::of(self.azimuth.to_f64_()),
            elevation: T::of(self.elevation.to_f64_()),
            radius: T::of(self.radius.to_f64_()),
            pitch: T::of(self.pitch.to_f64_()),
            yaw: T::of(self.yaw.to_f64_()),
        }
    }
}

/// Rigid camera-to-world transform plus intrinsics.
#[derive(Debug, Clone, Copy)]
pub struct CameraFrame<R: Real> {
    /// Camera-to-world rotation. Columns are the camera right, up and back
    /// axes expressed in world coordinates; the camera looks along -z.
    pub rotation: Mat3<R>,
    /// Camera position in world units (object diameters).
    pub position: Vec3<R>,
    /// Horizontal field of view in degrees.
    pub fov_deg: R,
}

impl<R: Real> CameraFrame<R> {
    pub fn right(&self) -> Vec3<R> {
        [self.rotation[0][0], self.rotation[1][0], self.rotation[2][0]]
    }

    pub fn up(&self) -> Vec3<R> {
        [self.rotation[0][1], self.rotation[1][1], self.rotation[2][1]]
    }

    pub fn forward(&self) -> Vec3<R> {
        [
            -self.rotation[0][2],
            -self.rotation[1][2],
            -self.rotation[2][2],
        ]
    }

    /// World-to-camera rotation (transpose of the orthonormal rotation).
    pub fn world_to_camera_rotation(&self) -> Mat3<R> {
        linalg::mat_transpose(&self.rotation)
    }

    /// World point -> camera coordinates.
    pub fn world_to_camera(&self, p: Vec3<R>) -> Vec3<R> {
        let rel = linalg::vsub(p, self.position);
        mat_vec(&self.world_to_camera_rotation(), rel)
    }

    pub fn det(&self) -> R {
        mat_det(&self.rotation)
    }
}

/// Derives the rigid camera frame from a pose.
///
/// The base orientation looks at the origin with world up; yaw is then
/// applied about the camera up axis (positive = look left) and pitch about
/// the resulting camera right axis (positive = look down).
pub fn pose_to_camera_frame<R: Real>(pose: &CameraPose<R>) -> Result<CameraFrame<R>> {
    let half_pi = R::of(std::f64::consts::FRAC_PI_2);
    if !(pose.elevation.abs() < half_pi) {
        return Err(Error::DegeneratePose(format!(
            "elevation {} degenerates the look-at construction",
            pose.elevation
        )));
    }
    let (sin_az, cos_az) = pose.azimuth.sin_cos();
    let (sin_el, cos_el) = pose.elevation.sin_cos();
    let position = vscale([cos_el * cos_az, cos_el * sin_az, sin_el], pose.radius);

    let world_up = [R::zero(), R::zero(), R::one()];
    let forward = normalize(vscale(position, -R::one()));
    let right = normalize(cross(forward, world_up));
    let up = cross(right, forward);

    // Positive rotation about camera up tilts the view left; positive pitch
    // is defined as tilting down, hence the sign flip about camera right.
    let yaw_rot = rotation_about_axis(up, pose.yaw);
    let right_after_yaw = mat_vec(&yaw_rot, right);
    let pitch_rot = rotation_about_axis(right_after_yaw, -pose.pitch);

    let f = mat_vec(&pitch_rot, mat_vec(&yaw_rot, forward));
    let r = mat_vec(&pitch_rot, right_after_yaw);
    let u = cross(r, f);

    let rotation = [
        [r[0], u[0], -f[0]],
        [r[1], u[1], -f[1]],
        [r[2], u[2], -f[2]],
    ];
    Ok(CameraFrame {
        rotation,
        position,
        fov_deg: R::of(DEFAULT_FOV_DEG),
    })
}

/// Uniform sampling intervals for each pose component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingRanges<R: Real> {
    pub radius_min: R,
    pub radius_max: R,
    pub elevation_min: R,
    pub elevation_max: R,
    pub pitch_bound: R,
    pub yaw_bound: R,
    /// Draw azimuth from the full circle [0, 2*pi). When false, the
    /// [azimuth_min, azimuth_max) interval below is used instead.
    pub azimuth_full: bool,
    pub azimuth_min: R,
    pub azimuth_max: R,
}

impl<R: Real> Default for SamplingRanges<R> {
    fn default() -> Self {
        Self {
            radius_min: R::of(4.0 / 3.0),
            radius_max: R::of(2.0),
            elevation_min: R::zero(),
            elevation_max: R::of(std::f64::consts::FRAC_PI_4),
            pitch_bound: R::of(std::f64::consts::PI / 12.0),
            yaw_bound: R::of(std::f64::consts::PI / 12.0),
            azimuth_full: true,
            azimuth_min: R::zero(),
            azimuth_max: R::of(std::f64::consts::TAU),
        }
    }
}

impl<R: Real> SamplingRanges<R> {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius_min > R::zero()) {
            return Err(Error::config("radius_min must be > 0"));
        }
        if self.radius_min > self.radius_max {
            return Err(Error::config("radius_min > radius_max"));
        }
        if self.elevation_min > self.elevation_max {
            return Err(Error::config("elevation_min > elevation_max"));
        }
        let half_pi = R::of(std::f64::consts::FRAC_PI_2);
        if !(self.elevation_min.abs() < half_pi) || !(self.elevation_max.abs() < half_pi) {
            return Err(Error::config("elevation bounds must lie in (-pi/2, pi/2)"));
        }
        if self.pitch_bound < R::zero() || self.yaw_bound < R::zero() {
            return Err(Error::config("pitch/yaw bounds must be >= 0"));
        }
        if !self.azimuth_full && self.azimuth_min > self.azimuth_max {
            return Err(Error::config("azimuth_min > azimuth_max"));
        }
        Ok(())
    }

    pub fn radius_range(&self) -> (R, R) {
        (self.radius_min, self.radius_max)
    }

    /// True if every pose component lies inside the sampling intervals
    /// (azimuth compared after canonical wrapping).
    pub fn contains(&self, pose: &CameraPose<R>) -> bool {
        let az_ok = if self.azimuth_full {
            true
        } else {
            let az = pose.azimuth();
            circular::wrap_angle(self.azimuth_min) <= az && az <= self.azimuth_max
        };
        az_ok
            && pose.radius() >= self.radius_min
            && pose.radius() <= self.radius_max
            && pose.elevation() >= self.elevation_min
            && pose.elevation() <= self.elevation_max
            && pose.pitch().abs() <= self.pitch_bound
            && pose.yaw().abs() <= self.yaw_bound
    }
}

fn draw<R: Real>(rng: &mut impl Rng, lo: R, hi: R) -> R {
    // Draws happen in f64 regardless of R so RNG streams match across
    // scalar types.
    let (lo, hi) = (lo.to_f64_(), hi.to_f64_());
    if lo == hi {
        return R::of(lo);
    }
    R::of(rng.random_range(lo..hi))
}

/// Draws a pose with every component independent and uniform in its range.
pub fn sample_pose<R: Real>(rng: &mut impl Rng, ranges: &SamplingRanges<R>) -> Result<CameraPose<R>> {
    ranges.validate()?;
    let azimuth = if ranges.azimuth_full {
        draw(rng, R::zero(), R::of(std::f64::consts::TAU))
    } else {
        draw(rng, ranges.azimuth_min, ranges.azimuth_max)
    };
    let elevation = draw(rng, ranges.elevation_min, ranges.elevation_max);
    let radius = draw(rng, ranges.radius_min, ranges.radius_max);
    let pitch = draw(rng, -ranges.pitch_bound, ranges.pitch_bound);
    let yaw = draw(rng, -ranges.yaw_bound, ranges.yaw_bound);
    CameraPose::new(azimuth, elevation, radius, pitch, yaw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::linalg::{norm, vsub};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pose(az: f64, el: f64, r: f64, pitch: f64, yaw: f64) -> CameraPose<f64> {
        CameraPose::new(az, el, r, pitch, yaw).unwrap()
    }

    #[test]
    fn front_view_frame() {
        let f = pose_to_camera_frame(&pose(0.0, 0.0, 1.5, 0.0, 0.0)).unwrap();
        assert!(norm(vsub(f.position, [1.5, 0.0, 0.0])) < 1e-12);
        assert!(norm(vsub(f.forward(), [-1.0, 0.0, 0.0])) < 1e-12);
        assert!(norm(vsub(f.up(), [0.0, 0.0, 1.0])) < 1e-12);
    }

    #[test]
    fn side_view_frame() {
        let f =
            pose_to_camera_frame(&pose(std::f64::consts::FRAC_PI_2, 0.0, 1.5, 0.0, 0.0)).unwrap();
        assert!(norm(vsub(f.position, [0.0, 1.5, 0.0])) < 1e-12);
        assert!(norm(vsub(f.forward(), [0.0, -1.0, 0.0])) < 1e-12);
    }

    #[test]
    fn elevated_look_at_origin() {
        let f =
            pose_to_camera_frame(&pose(0.0, std::f64::consts::FRAC_PI_4, 2.0, 0.0, 0.0)).unwrap();
        let s = std::f64::consts::SQRT_2;
        assert!(norm(vsub(f.position, [s, 0.0, s])) < 1e-12);
        let expected_fwd = linalg::normalize([-s, 0.0, -s]);
        assert!(norm(vsub(f.forward(), expected_fwd)) < 1e-12);
    }

    #[test]
    fn rejects_degenerate_elevation() {
        assert!(CameraPose::new(0.0, std::f64::consts::FRAC_PI_2, 1.5, 0.0, 0.0).is_err());
        assert!(CameraPose::new(0.0, -std::f64::consts::FRAC_PI_2, 1.5, 0.0, 0.0).is_err());
    }

    #[test]
    fn rejects_nonpositive_radius() {
        assert!(CameraPose::new(0.0, 0.0, 0.0, 0.0, 0.0).is_err());
        assert!(CameraPose::new(0.0, 0.0, -1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn azimuth_wraps_on_construction() {
        let p = pose(-0.5, 0.0, 1.5, 0.0, 0.0);
        assert!(p.azimuth() >= 0.0 && p.azimuth() < std::f64::consts::TAU);
        assert!((p.azimuth() - (std::f64::consts::TAU - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn positive_yaw_looks_left() {
        // Camera at +x looks along -x; its left is -y, so the forward axis
        // should gain a -y component.
        let f = pose_to_camera_frame(&pose(0.0, 0.0, 1.5, 0.0, 0.2)).unwrap();
        assert!(f.forward()[1] < -1e-3);
        // Position is untouched by pitch/yaw.
        assert!(norm(vsub(f.position, [1.5, 0.0, 0.0])) < 1e-12);
    }

    #[test]
    fn positive_pitch_looks_down() {
        let f = pose_to_camera_frame(&pose(0.0, 0.0, 1.5, 0.2, 0.0)).unwrap();
        assert!(f.forward()[2] < -1e-3);
    }

    #[test]
    fn degenerate_range_is_constant() {
        let ranges = SamplingRanges {
            radius_min: 1.5,
            radius_max: 1.5,
            ..SamplingRanges::<f64>::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let p = sample_pose(&mut rng, &ranges).unwrap();
            assert_eq!(p.radius(), 1.5);
        }
    }

    #[test]
    fn default_ranges_respected() {
        let ranges = SamplingRanges::<f64>::default();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..1000 {
            let p = sample_pose(&mut rng, &ranges).unwrap();
            assert!(p.radius() >= 4.0 / 3.0 && p.radius() <= 2.0);
            assert!(p.elevation() >= 0.0 && p.elevation() <= std::f64::consts::FRAC_PI_4);
            assert!(p.pitch().abs() <= std::f64::consts::PI / 12.0);
            assert!(p.yaw().abs() <= std::f64::consts::PI / 12.0);
            assert!(ranges.contains(&p));
        }
    }

    #[test]
    fn invalid_ranges_rejected() {
        let ranges = SamplingRanges {
            radius_min: 2.0,
            radius_max: 1.0,
            ..SamplingRanges::<f64>::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_pose(&mut rng, &ranges).is_err());
    }

    #[test]
    fn azimuth_sampling_is_uniform() {
        // 12 bins over 10k draws; each bin should sit within 20% of the
        // uniform expectation of 10000/12.
        let ranges = SamplingRanges::<f64>::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut bins = [0usize; 12];
        for _ in 0..10_000 {
            let p = sample_pose(&mut rng, &ranges).unwrap();
            let bin = (p.azimuth() / std::f64::consts::TAU * 12.0).floor() as usize;
            bins[bin.min(11)] += 1;
        }
        let expected = 10_000.0 / 12.0;
        for (i, &count) in bins.iter().enumerate() {
            let dev = (count as f64 - expected).abs();
            assert!(
                dev <= 0.2 * expected,
                "bin {i} count {count} deviates more than 20% from {expected}"
            );
        }
    }

    #[test]
    fn deterministic_given_rng_state() {
        let ranges = SamplingRanges::<f64>::default();
        let a: Vec<_> = {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            (0..32).map(|_| sample_pose(&mut rng, &ranges).unwrap()).collect()
        };
        let b: Vec<_> = {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            (0..32).map(|_| sample_pose(&mut rng, &ranges).unwrap()).collect()
        };
        assert_eq!(a, b);
    }
}

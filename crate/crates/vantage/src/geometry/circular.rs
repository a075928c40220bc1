//! Circular angle arithmetic for wraparound-aware error metrics.

use crate::scalar::Real;

/// Wraps an angle in radians into the canonical [0, 2*pi) interval.
pub fn wrap_angle<R: Real>(angle: R) -> R {
    let two_pi = R::of(std::f64::consts::TAU);
    let mut w = angle % two_pi;
    if w < R::zero() {
        w = w + two_pi;
    }
    // `%` can produce exactly two_pi after the negative adjustment when the
    // input is a tiny negative value.
    if w >= two_pi {
        w = R::zero();
    }
    w
}

/// Minimal circular distance between two angles in degrees, in [0, 180].
pub fn angular_difference<R: Real>(a_deg: R, b_deg: R) -> R {
    let full = R::of(360.0);
    let mut d = (a_deg - b_deg) % full;
    if d < R::zero() {
        d = d + full;
    }
    if d > R::of(180.0) {
        d = full - d;
    }
    d
}

//! Minimal 3-vector / 3x3-matrix arithmetic used by the camera code.

use crate::scalar::Real;

pub type Vec3<R> = [R; 3];

pub fn vadd<R: Real>(a: Vec3<R>, b: Vec3<R>) -> Vec3<R> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn vsub<R: Real>(a: Vec3<R>, b: Vec3<R>) -> Vec3<R> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn vscale<R: Real>(a: Vec3<R>, s: R) -> Vec3<R> {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn dot<R: Real>(a: Vec3<R>, b: Vec3<R>) -> R {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross<R: Real>(a: Vec3<R>, b: Vec3<R>) -> Vec3<R> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm<R: Real>(a: Vec3<R>) -> R {
    dot(a, a).sqrt()
}

pub fn normalize<R: Real>(a: Vec3<R>) -> Vec3<R> {
    let n = norm(a);
    vscale(a, R::one() / n)
}

/// Row-major 3x3 matrix.
pub type Mat3<R> = [[R; 3]; 3];

pub fn mat_identity<R: Real>() -> Mat3<R> {
    let o = R::one();
    let z = R::zero();
    [[o, z, z], [z, o, z], [z, z, o]]
}

pub fn mat_transpose<R: Real>(m: &Mat3<R>) -> Mat3<R> {
    [
        [m[0][0], m[1][0], m[2][0]],
        [m[0][1], m[1][1], m[2][1]],
        [m[0][2], m[1][2], m[2][2]],
    ]
}

pub fn mat_mul<R: Real>(a: &Mat3<R>, b: &Mat3<R>) -> Mat3<R> {
    let mut out = [[R::zero(); 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

pub fn mat_vec<R: Real>(m: &Mat3<R>, v: Vec3<R>) -> Vec3<R> {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

pub fn mat_det<R: Real>(m: &Mat3<R>) -> R {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Rotation by `angle` about a unit `axis` (Rodrigues).
pub fn rotation_about_axis<R: Real>(axis: Vec3<R>, angle: R) -> Mat3<R> {
    let (s, c) = angle.sin_cos();
    let t = R::one() - c;
    let [x, y, z] = axis;
    [
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rodrigues_matches_axis_rotations() {
        // Rotation about +z by 90 degrees sends +x to +y.
        let r = rotation_about_axis([0.0f64, 0.0, 1.0], std::f64::consts::FRAC_PI_2);
        let v = mat_vec(&r, [1.0, 0.0, 0.0]);
        assert!((v[0]).abs() < 1e-12);
        assert!((v[1] - 1.0).abs() < 1e-12);
        assert!((v[2]).abs() < 1e-12);
    }

    #[test]
    fn det_of_rotation_is_one() {
        let r = rotation_about_axis(normalize([0.3f64, -0.2, 0.9]), 1.1);
        assert!((mat_det(&r) - 1.0).abs() < 1e-12);
    }
}

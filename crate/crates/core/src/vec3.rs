// SPDX-License-Identifier: Apache-2.0

//! Minimal fixed-size 3-vector helpers.

use num_traits::Float;

pub type Vec3 = [f64; 3];

pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: &Vec3) -> f64 {
    Float::sqrt(dot(a, a))
}

pub fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale(a: &Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Returns `a / |a|`, or `None` for a zero or non-finite vector.
pub fn normalized(a: &Vec3) -> Option<Vec3> {
    let n = norm(a);
    if n > 0.0 && n.is_finite() {
        Some(scale(a, 1.0 / n))
    } else {
        None
    }
}

/// Right-handed orthonormal pair spanning the plane perpendicular to `axis`.
///
/// The first vector is the projection of the lattice direction least aligned
/// with `axis`, so the frame is deterministic for a given axis.
pub fn perpendicular_frame(axis: &Vec3) -> (Vec3, Vec3) {
    let candidates = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let mut best = candidates[0];
    let mut best_dot = f64::INFINITY;
    for c in candidates {
        let d = dot(&c, axis).abs();
        if d < best_dot - 1e-12 {
            best_dot = d;
            best = c;
        }
    }
    let proj = sub(&best, &scale(axis, dot(&best, axis)));
    let e1 = normalized(&proj).unwrap_or([1.0, 0.0, 0.0]);
    let e2 = cross(axis, &e1);
    (e1, e2)
}

//! Minimal 3-vector helpers. Coordinates are metres; `z` grows with depth.

pub type Vec3 = [f64; 3];

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    libm::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2])
}

#[inline]
pub fn distance(a: Vec3, b: Vec3) -> f64 {
    norm(sub(a, b))
}

/// Clamps a point into the upright cylinder of the given radius centred on the
/// z axis and spanning `z ∈ [0, height]`.
pub fn clamp_to_cylinder(p: Vec3, radius: f64, height: f64) -> Vec3 {
    let r = libm::sqrt(p[0] * p[0] + p[1] * p[1]);
    // Points within rounding of the rim are left untouched so that a rim node stays put.
    let (x, y) = if r > radius * (1.0 + 1e-12) {
        (p[0] * radius / r, p[1] * radius / r)
    } else {
        (p[0], p[1])
    };
    [x, y, p[2].clamp(0.0, height)]
}

pub fn inside_cylinder(p: Vec3, radius: f64, height: f64) -> bool {
    let r = libm::sqrt(p[0] * p[0] + p[1] * p[1]);
    r <= radius * (1.0 + 1e-12) && p[2] >= 0.0 && p[2] <= height
}

//! Closed-form segment integrals of the Laplace kernels.

use std::f64::consts::PI;

use crate::geometry::{cross, dot, right_perp, sub, Point, Segment};
use crate::quadrature::UnitGauss;

/// Antiderivative in `u` of `ln √(u² + d²)`, vanishing at `u = 0`.
pub fn h1(u: f64, d: f64) -> f64 {
    let r2 = u * u + d * d;
    let log_part = if u == 0.0 { 0.0 } else { u * r2.ln() };
    let atan_part = if d == 0.0 { 0.0 } else { 2.0 * d * (u / d).atan() };
    0.5 * (log_part - 2.0 * u + atan_part)
}

/// Antiderivative in `u` of [`h1`].
pub fn q2(u: f64, d: f64) -> f64 {
    let r2 = u * u + d * d;
    let log_part = if r2 == 0.0 { 0.0 } else { 0.25 * (u * u - d * d) * r2.ln() };
    let atan_part = if d == 0.0 { 0.0 } else { d * u * (u / d).atan() };
    log_part - 0.75 * u * u + atan_part
}

/// `∫_seg ln|x − y| ds_y`.
pub fn log_potential(seg: &Segment, x: Point) -> f64 {
    let (p, q) = seg.local(x);
    let d = q.abs();
    h1(seg.length - p, d) - h1(-p, d)
}

/// `(∫_seg q/|x−y|² ds_y, ∫_seg s q/|x−y|² ds_y)` with `(p, q)` the local coordinates of `x`
/// and `s` the arc length along the segment.
pub fn angle_moments(seg: &Segment, x: Point) -> (f64, f64) {
    let (p, q) = seg.local(x);
    let l = seg.length;
    let scale = l.max(p.abs());
    if q.abs() <= 1e-15 * scale {
        return (0.0, 0.0);
    }
    let i0 = (q * l).atan2(q * q + p * p - p * l);
    let i1 = p * i0 + 0.5 * q * (((l - p).powi(2) + q * q) / (p * p + q * q)).ln();
    (i0, i1)
}

/// `∬ ln|x − y| ds_x ds_y` over two segments, exact for every relative position.
pub fn double_log_integral(a: &Segment, b: &Segment) -> f64 {
    let s = cross(a.tangent, b.tangent);
    let c = sub(a.a, b.a);
    if s.abs() < 1e-10 {
        let ct = dot(c, a.tangent);
        let d = dot(c, right_perp(a.tangent)).abs();
        let (la, lb) = (a.length, b.length);
        if dot(a.tangent, b.tangent) > 0.0 {
            (q2(ct + la, d) - q2(ct, d)) - (q2(ct + la - lb, d) - q2(ct - lb, d))
        } else {
            (q2(ct + la + lb, d) - q2(ct + lb, d)) - (q2(ct + la, d) - q2(ct, d))
        }
    } else {
        // change of variables z = x(s) − y(t) maps the parameter rectangle onto a parallelogram
        let ea = [a.tangent[0] * a.length, a.tangent[1] * a.length];
        let eb = [b.tangent[0] * b.length, b.tangent[1] * b.length];
        let mut poly = [c, [c[0] + ea[0], c[1] + ea[1]], [c[0] + ea[0] - eb[0], c[1] + ea[1] - eb[1]], [c[0] - eb[0], c[1] - eb[1]]];
        if crate::geometry::polygon_area(&poly) < 0.0 {
            poly.reverse();
        }
        parallelogram_log_integral(&poly) / s.abs()
    }
}

/// `∫_P ln|z| dz` over a counterclockwise polygon, via `div(z (ln|z|/2 − 1/4)) = ln|z|`.
fn parallelogram_log_integral(poly: &[Point]) -> f64 {
    let n = poly.len();
    let mut total = 0.0;
    for k in 0..n {
        let e = Segment::new(poly[k], poly[(k + 1) % n]);
        let d_e = dot(e.a, e.normal);
        if d_e == 0.0 {
            continue;
        }
        let p = dot(e.a, e.tangent);
        let line = h1(p + e.length, d_e.abs()) - h1(p, d_e.abs());
        total += d_e * (0.5 * line - 0.25 * e.length);
    }
    total
}

/// Galerkin entry `⟨V χ_b, χ_a⟩ = −(1/2π) ∬ ln|x − y|`.
pub fn single_layer_entry(a: &Segment, b: &Segment, far: &UnitGauss) -> f64 {
    let dist = a.distance_to_segment(b);
    let integral = if dist >= a.length.max(b.length) {
        let mut acc = 0.0;
        for (s, ws) in far.iter() {
            let x = a.at(s * a.length);
            for (t, wt) in far.iter() {
                let y = b.at(t * b.length);
                acc += ws * wt * crate::geometry::dist(x, y).ln();
            }
        }
        acc * a.length * b.length
    } else {
        double_log_integral(a, b)
    };
    -integral / (2.0 * PI)
}

/// `∫_{seg_k} (x − y)·n / |x − y|² ds_x` for a point `y` with normal `n`.
pub fn double_layer_inner(seg_k: &Segment, y: Point, n: Point) -> f64 {
    let (p, q) = seg_k.local(y);
    let l = seg_k.length;
    let a = dot(seg_k.tangent, n);
    let b = dot(seg_k.normal, n);
    let log_part = if a == 0.0 {
        0.0
    } else {
        0.5 * a * (((l - p).powi(2) + q * q) / (p * p + q * q)).ln()
    };
    let angle = if q.abs() <= 1e-15 * l.max(p.abs()) { 0.0 } else { (q * l).atan2(q * q + p * p - p * l) };
    log_part - b * angle
}

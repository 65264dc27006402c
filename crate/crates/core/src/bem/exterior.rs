//! Exterior solution by the representation formula
//! `u_e(x) = ∫_Γ ∂_{n_y}G(x−y) u_e(y) ds_y − ∫_Γ G(x−y) φ(y) ds_y`.

use std::f64::consts::PI;

use super::kernels::{angle_moments, log_potential};
use crate::error::{Error, Result};
use crate::geometry::{dist, dot, sub, Point, Segment};
use crate::mesh::BoundaryMesh;
use crate::quadrature::UnitGauss;

fn check_exterior(boundary: &BoundaryMesh, x: Point) -> Result<()> {
    if boundary.contains(x) {
        Err(Error::NotExterior(x[0], x[1]))
    } else {
        Ok(())
    }
}

/// Evaluates `u_e` at exterior points from the piecewise linear trace `u|_Γ − g1`
/// (per boundary vertex) and the piecewise constant flux `φ` (per boundary edge).
pub fn evaluate_exterior(boundary: &BoundaryMesh, trace: &[f64], density: &[f64], points: &[Point]) -> Result<Vec<f64>> {
    let n = boundary.len();
    if trace.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: trace.len() });
    }
    if density.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: density.len() });
    }
    points
        .iter()
        .map(|&x| {
            check_exterior(boundary, x)?;
            let mut dl = 0.0;
            let mut sl = 0.0;
            for (k, seg) in boundary.segments().iter().enumerate() {
                let (i0, i1) = angle_moments(seg, x);
                let (ta, tb) = (trace[k], trace[boundary.next(k)]);
                dl += ta * (i0 - i1 / seg.length) + tb * i1 / seg.length;
                sl += density[k] * log_potential(seg, x);
            }
            Ok((dl + sl) / (2.0 * PI))
        })
        .collect()
}

/// Same formula for Cauchy data given as functions of the boundary point and outward normal.
///
/// Each segment is split into panels no longer than their distance to `x` and integrated by
/// 16-point Gauss.
pub fn evaluate_exterior_with(
    boundary: &BoundaryMesh,
    trace: impl Fn(Point, Point) -> f64,
    flux: impl Fn(Point, Point) -> f64,
    points: &[Point],
) -> Result<Vec<f64>> {
    let gauss = UnitGauss::new(16);
    points
        .iter()
        .map(|&x| {
            check_exterior(boundary, x)?;
            let mut acc = 0.0;
            for seg in boundary.segments() {
                let mut panels = vec![(0.0, seg.length)];
                while let Some((s0, s1)) = panels.pop() {
                    let panel = Segment::new(seg.at(s0), seg.at(s1));
                    if s1 - s0 > panel.distance_to_point(x) && s1 - s0 > 1e-12 * seg.length {
                        let m = 0.5 * (s0 + s1);
                        panels.push((s0, m));
                        panels.push((m, s1));
                        continue;
                    }
                    for (t, w) in gauss.iter() {
                        let y = seg.at(s0 + t * (s1 - s0));
                        let z = sub(x, y);
                        let kernel_dl = dot(z, seg.normal) / dot(z, z);
                        let kernel_sl = dist(x, y).ln();
                        acc += w * (s1 - s0) * (kernel_dl * trace(y, seg.normal) + kernel_sl * flux(y, seg.normal));
                    }
                }
            }
            Ok(acc / (2.0 * PI))
        })
        .collect()
}

/// `a = (1/2π) Σ_E φ_E h_E`, the coefficient of `log|x|` at infinity.
pub fn radiation_coefficient(boundary: &BoundaryMesh, density: &[f64]) -> f64 {
    boundary.segments().iter().zip(density).map(|(s, d)| s.length * d).sum::<f64>() / (2.0 * PI)
}

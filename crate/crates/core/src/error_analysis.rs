//! Space-time errors against exact solutions and experimental orders of convergence.
//!
//! `e_H² = Σₙ ∫_{Iₙ} ‖u − U_h‖²_{H¹(Ω)} dt` with `U_h` linear in time between the knots, and
//! `e_V² = Σₙ ∫_{Iₙ} ‖φ − Φⁿ‖²_V dt` evaluated on the once-bisected boundary.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;

use crate::bem::{assemble_single_layer, v_energy_norm};
use crate::error::{Error, Result};
use crate::geometry::{dot, Point};
use crate::mesh::{BoundaryMesh, PrimalMesh};
use crate::quadrature::{TriangleRule, UnitGauss};
use crate::spaces::gradient_on_triangle;
use crate::sparse::DenseMatrix;

pub type VectorField = Arc<dyn Fn(Point, f64) -> Point + Send + Sync>;

/// Interior solution `u` and exterior solution `u_e` with their gradients.
#[derive(Clone)]
pub struct ExactSolution {
    pub u: Arc<dyn Fn(Point, f64) -> f64 + Send + Sync>,
    pub grad_u: VectorField,
    pub ue: Arc<dyn Fn(Point, f64) -> f64 + Send + Sync>,
    pub grad_ue: VectorField,
}

impl std::fmt::Debug for ExactSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("ExactSolution")
    }
}

impl ExactSolution {
    /// `φ = ∂_n u_e` for the outward normal `n` of `Ω`.
    pub fn flux(&self, x: Point, n: Point, t: f64) -> f64 {
        dot((self.grad_ue)(x, t), n)
    }

    /// Largest mismatch of `g1 = u − u_e` and of the supplied `g2` against
    /// `expected_g2` over Gauss points of the boundary at time `t`.
    pub fn boundary_data_mismatch(
        &self,
        boundary: &BoundaryMesh,
        t: f64,
        g1: impl Fn(Point, f64) -> f64,
        g2: impl Fn(Point, Point, f64) -> f64,
        expected_g2: impl Fn(Point, Point, f64) -> f64,
    ) -> f64 {
        let gauss = UnitGauss::new(4);
        let mut worst: f64 = 0.0;
        for s in boundary.segments() {
            for (r, _) in gauss.iter() {
                let x = s.at(r * s.length);
                worst = worst.max((g1(x, t) - ((self.u)(x, t) - (self.ue)(x, t))).abs());
                worst = worst.max((g2(x, s.normal, t) - expected_g2(x, s.normal, t)).abs());
            }
        }
        worst
    }
}

/// `∫_{t0}^{t1} ‖u − U_h‖²_{H¹}` for `U_h` linear in time from `u0` to `u1`.
pub fn error_h_t(mesh: &PrimalMesh, exact: &ExactSolution, t0: f64, t1: f64, u0: &[f64], u1: &[f64]) -> Result<f64> {
    let n = mesh.n_vertices();
    for v in [u0, u1] {
        if v.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: v.len() });
        }
    }
    let rule = TriangleRule::with_degree(6);
    let time = UnitGauss::new(3);
    let tau = t1 - t0;
    // collect before summing: the reduction order must not depend on scheduling
    let per_triangle: Vec<f64> = (0..mesh.n_triangles())
        .into_par_iter()
        .map(|t| {
            let [a, b, c] = mesh.triangle_points(t);
            let tri = mesh.triangles()[t];
            let g0 = gradient_on_triangle(mesh, t, u0);
            let g1 = gradient_on_triangle(mesh, t, u1);
            let mut acc = 0.0;
            for (s, w) in time.iter() {
                let tt = t0 + s * tau;
                let g = [(1.0 - s) * g0[0] + s * g1[0], (1.0 - s) * g0[1] + s * g1[1]];
                let nodal = |k: usize| (1.0 - s) * u0[tri[k]] + s * u1[tri[k]];
                let vals = [nodal(0), nodal(1), nodal(2)];
                acc += w * rule.integrate(a, b, c, |x, l| {
                    let uh = l[0] * vals[0] + l[1] * vals[1] + l[2] * vals[2];
                    let gu = (exact.grad_u)(x, tt);
                    let d = [gu[0] - g[0], gu[1] - g[1]];
                    let e = (exact.u)(x, tt) - uh;
                    d[0] * d[0] + d[1] * d[1] + e * e
                });
            }
            acc * tau
        })
        .collect();
    let total: f64 = per_triangle.iter().sum();
    if !total.is_finite() {
        return Err(Error::NonFinite("H¹ error".into()));
    }
    Ok(total)
}

/// Reference single layer matrix on the bisected boundary of a mesh.
#[derive(Debug, Clone)]
pub struct FluxErrorContext {
    pub fine: BoundaryMesh,
    pub v_ref: DenseMatrix,
}

impl FluxErrorContext {
    pub fn new(boundary: &BoundaryMesh) -> Self {
        let fine = boundary.bisected();
        let v_ref = assemble_single_layer(&fine);
        FluxErrorContext { fine, v_ref }
    }

    /// Mean values of `φ(·, t)` on the fine segments.
    pub fn project(&self, exact: &ExactSolution, t: f64) -> Vec<f64> {
        let gauss = UnitGauss::new(8);
        self.fine
            .segments()
            .iter()
            .map(|s| gauss.iter().map(|(r, w)| w * exact.flux(s.at(r * s.length), s.normal, t)).sum())
            .collect()
    }
}

/// `∫_{t0}^{t1} ‖φ − Φ‖²_V` with `Φ` constant on the slab, measured on the bisected boundary.
pub fn error_flux(ctx: &FluxErrorContext, exact: &ExactSolution, t0: f64, t1: f64, phi: &[f64]) -> Result<f64> {
    let coarse = ctx.fine.len() / 2;
    if phi.len() != coarse {
        return Err(Error::DimensionMismatch { expected: coarse, got: phi.len() });
    }
    let time = UnitGauss::new(3);
    let mut acc = 0.0;
    for (s, w) in time.iter() {
        let mut d = ctx.project(exact, t0 + s * (t1 - t0));
        for (k, v) in d.iter_mut().enumerate() {
            *v -= phi[k / 2];
        }
        acc += w * v_energy_norm(&ctx.v_ref, &d)?.powi(2);
    }
    Ok(acc * (t1 - t0))
}

/// Accumulates both squared errors while a trajectory is computed.
#[derive(Debug)]
pub struct ErrorAccumulator<'a> {
    mesh: &'a PrimalMesh,
    exact: &'a ExactSolution,
    ctx: FluxErrorContext,
    knots: Vec<f64>,
    prev: Option<Vec<f64>>,
    pub h1_squared: f64,
    pub v_squared: f64,
}

impl<'a> ErrorAccumulator<'a> {
    pub fn new(mesh: &'a PrimalMesh, exact: &'a ExactSolution, knots: &[f64]) -> Self {
        ErrorAccumulator {
            mesh,
            exact,
            ctx: FluxErrorContext::new(&mesh.boundary()),
            knots: knots.to_vec(),
            prev: None,
            h1_squared: 0.0,
            v_squared: 0.0,
        }
    }

    /// Feed step `n` (starting with `n = 0`).
    pub fn observe(&mut self, n: usize, u: &[f64], phi: &[f64]) -> Result<()> {
        if n > 0 {
            let prev = self.prev.as_deref().ok_or_else(|| Error::Undefined("steps fed out of order".into()))?;
            let (t0, t1) = (self.knots[n - 1], self.knots[n]);
            self.h1_squared += error_h_t(self.mesh, self.exact, t0, t1, prev, u)?;
            self.v_squared += error_flux(&self.ctx, self.exact, t0, t1, phi)?;
        }
        self.prev = Some(u.to_vec());
        Ok(())
    }

    /// `(e_V, e_H)`.
    pub fn errors(&self) -> (f64, f64) {
        (self.v_squared.sqrt(), self.h1_squared.sqrt())
    }
}

/// `log(e_{ℓ−1}/e_ℓ) / log(h_{ℓ−1}/h_ℓ)`; `None` at level 0 or when an error vanishes.
pub fn compute_eoc(errors: &[f64], h: &[f64]) -> Vec<Option<f64>> {
    (0..errors.len())
        .map(|l| {
            if l == 0 || errors[l] <= 0.0 || errors[l - 1] <= 0.0 || h[l] == h[l - 1] {
                None
            } else {
                Some((errors[l - 1] / errors[l]).ln() / (h[l - 1] / h[l]).ln())
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelResult {
    pub level: usize,
    pub h: f64,
    pub tau: f64,
    pub err_v: f64,
    pub err_h1: f64,
}

impl LevelResult {
    pub fn err_sum(&self) -> f64 {
        self.err_v + self.err_h1
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceReport {
    pub problem: String,
    pub levels: Vec<LevelResult>,
}

impl ConvergenceReport {
    fn column(&self, f: impl Fn(&LevelResult) -> f64) -> Vec<Option<f64>> {
        let e: Vec<f64> = self.levels.iter().map(&f).collect();
        let h: Vec<f64> = self.levels.iter().map(|l| l.h).collect();
        compute_eoc(&e, &h)
    }

    pub fn eoc_v(&self) -> Vec<Option<f64>> {
        self.column(|l| l.err_v)
    }

    pub fn eoc_h1(&self) -> Vec<Option<f64>> {
        self.column(|l| l.err_h1)
    }

    pub fn eoc_sum(&self) -> Vec<Option<f64>> {
        self.column(|l| l.err_sum())
    }

    /// EOC of the combined error between the two finest levels.
    pub fn finest_eoc(&self) -> Option<f64> {
        self.eoc_sum().last().copied().flatten()
    }

    pub fn to_csv(&self) -> String {
        let fmt = |x: Option<f64>| x.map(|v| format!("{v:.11e}")).unwrap_or_default();
        let (ev, eh, es) = (self.eoc_v(), self.eoc_h1(), self.eoc_sum());
        let mut out = String::from("level,hinv,err_V,err_H1,err_sum,eoc_V,eoc_H1,eoc_sum\n");
        for (i, l) in self.levels.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{:.11e},{:.11e},{:.11e},{:.11e},{},{},{}",
                l.level,
                1.0 / l.h,
                l.err_v,
                l.err_h1,
                l.err_sum(),
                fmt(ev[i]),
                fmt(eh[i]),
                fmt(es[i])
            );
        }
        out
    }
}

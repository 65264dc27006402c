//! Finite volume bilinear form (Galerkin and upwind variants) and its load integrals.

use std::fmt;
use std::sync::Arc;

use crate::dual::DualMesh;
use crate::error::{Error, Result};
use crate::geometry::{barycentric, barycentric_gradients, centroid, dot, Point};
use crate::mesh::{BoundaryClassification, PrimalMesh};
use crate::quadrature::{TriangleRule, UnitGauss};
use crate::sparse::{CsrMatrix, TripletBuilder};

pub type Matrix2 = [[f64; 2]; 2];

/// Sparse matrix over vertex indices: rows are box test functions, columns nodal hats.
pub type FvmMatrix = CsrMatrix;

/// Diffusion `A`, convection `b` and reaction `c`, all time independent.
#[derive(Clone)]
pub struct CoefficientSet {
    pub diffusion: Arc<dyn Fn(Point) -> Matrix2 + Send + Sync>,
    pub convection: Arc<dyn Fn(Point) -> Point + Send + Sync>,
    pub reaction: Arc<dyn Fn(Point) -> f64 + Send + Sync>,
}

impl fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CoefficientSet { .. }")
    }
}

/// Sampled coercivity data of a coefficient set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientReport {
    /// Smallest eigenvalue of `A` over the samples.
    pub lambda_min: f64,
    /// Smallest value of `div b / 2 + c` over the samples.
    pub min_reaction: f64,
}

impl CoefficientSet {
    pub fn new(
        diffusion: impl Fn(Point) -> Matrix2 + Send + Sync + 'static,
        convection: impl Fn(Point) -> Point + Send + Sync + 'static,
        reaction: impl Fn(Point) -> f64 + Send + Sync + 'static,
    ) -> Self {
        CoefficientSet {
            diffusion: Arc::new(diffusion),
            convection: Arc::new(convection),
            reaction: Arc::new(reaction),
        }
    }

    /// `A = alpha I`, `b = 0`, `c = 0`.
    pub fn isotropic(alpha: f64) -> Self {
        Self::new(move |_| [[alpha, 0.0], [0.0, alpha]], |_| [0.0, 0.0], |_| 0.0)
    }

    #[inline]
    pub fn a(&self, x: Point) -> Matrix2 {
        (self.diffusion)(x)
    }

    #[inline]
    pub fn b(&self, x: Point) -> Point {
        (self.convection)(x)
    }

    #[inline]
    pub fn c(&self, x: Point) -> f64 {
        (self.reaction)(x)
    }

    /// Samples the coefficients at every triangle's barycenter and vertices.
    ///
    /// Fails if `A` is not symmetric positive definite at a sample; only warns when
    /// `div b / 2 + c` is not positive.
    pub fn check(&self, mesh: &PrimalMesh) -> Result<CoefficientReport> {
        let mut lambda_min = f64::INFINITY;
        let mut min_reaction = f64::INFINITY;
        for t in 0..mesh.n_triangles() {
            let [p0, p1, p2] = mesh.triangle_points(t);
            let g = centroid(p0, p1, p2);
            // pull the vertices slightly inside so that jumps along edges are sampled per element
            let inner = |p: Point| [g[0] + 0.999 * (p[0] - g[0]), g[1] + 0.999 * (p[1] - g[1])];
            for x in [g, inner(p0), inner(p1), inner(p2)] {
                let a = self.a(x);
                if a.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite(format!("diffusion at ({}, {})", x[0], x[1])));
                }
                if (a[0][1] - a[1][0]).abs() > 1e-12 * (a[0][1].abs() + a[1][0].abs()).max(1e-300) {
                    return Err(Error::Config(format!("diffusion is not symmetric at ({}, {})", x[0], x[1])));
                }
                lambda_min = lambda_min.min(min_eigenvalue(a));
            }
            let eps = 1e-6 * mesh.h();
            let div = (self.b([g[0] + eps, g[1]])[0] - self.b([g[0] - eps, g[1]])[0]
                + self.b([g[0], g[1] + eps])[1]
                - self.b([g[0], g[1] - eps])[1])
                / (2.0 * eps);
            min_reaction = min_reaction.min(0.5 * div + self.c(g));
        }
        if !(lambda_min > 0.0) {
            return Err(Error::Config(format!("diffusion is not positive definite (min eigenvalue {lambda_min})")));
        }
        if !(min_reaction > 0.0) {
            log::warn!("div b / 2 + c is not positive on the mesh (min {min_reaction:.3e})");
        }
        Ok(CoefficientReport { lambda_min, min_reaction })
    }
}

/// Smallest eigenvalue of a symmetric 2×2 matrix.
pub fn min_eigenvalue(a: Matrix2) -> f64 {
    let m = 0.5 * (a[0][0] + a[1][1]);
    let d = (0.25 * (a[0][0] - a[1][1]).powi(2) + a[0][1] * a[1][0]).max(0.0).sqrt();
    m - d
}

#[inline]
fn mat_vec(a: Matrix2, v: Point) -> Point {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

/// Weight function of the upwind discretisation of convection across dual interfaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpwindScheme {
    /// Galerkin (no upwinding).
    #[default]
    None,
    /// `Φ(t) = (sgn t + 1) / 2`.
    Full,
    /// `Φ(t) = min(2/|t|, 1)/2` for `t < 0` and `1 − min(2/|t|, 1)/2` otherwise.
    Steerable,
}

impl std::str::FromStr for UpwindScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" | "galerkin" => Ok(UpwindScheme::None),
            "full" => Ok(UpwindScheme::Full),
            "steerable" | "steer" => Ok(UpwindScheme::Steerable),
            other => Err(Error::Config(format!("unknown upwind scheme '{other}'"))),
        }
    }
}

impl fmt::Display for UpwindScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UpwindScheme::None => "none",
            UpwindScheme::Full => "full",
            UpwindScheme::Steerable => "steerable",
        })
    }
}

/// Matrix norm used for the interface diffusion in the Péclet argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PecletNorm {
    /// Largest absolute entry.
    #[default]
    MaxEntry,
    /// Largest absolute row sum.
    RowSum,
}

impl PecletNorm {
    pub fn apply(&self, a: Matrix2) -> f64 {
        match self {
            PecletNorm::MaxEntry => a.iter().flatten().fold(0.0, |m: f64, v| m.max(v.abs())),
            PecletNorm::RowSum => a.iter().map(|r| r[0].abs() + r[1].abs()).fold(0.0, f64::max),
        }
    }
}

/// `Φ(t)`; the Galerkin scheme uses the central weight 1/2.
pub fn eval_weight(scheme: UpwindScheme, peclet: f64) -> f64 {
    match scheme {
        UpwindScheme::None => 0.5,
        UpwindScheme::Full => {
            if peclet > 0.0 {
                1.0
            } else if peclet < 0.0 {
                0.0
            } else {
                0.5
            }
        }
        UpwindScheme::Steerable => {
            let m = if peclet == 0.0 { 1.0 } else { (2.0 / peclet.abs()).min(1.0) };
            if peclet < 0.0 {
                0.5 * m
            } else {
                1.0 - 0.5 * m
            }
        }
    }
}

/// Interface averages `β_ij = |τ_ij|⁻¹ ∫ b·n_i` and `A_ij = |τ_ij|⁻¹ ∫ A`, with `|τ_ij|`.
pub fn interface_averages(dual: &DualMesh, coeffs: &CoefficientSet, key: (usize, usize)) -> (f64, Matrix2, f64) {
    let gauss = UnitGauss::new(2);
    let (i, _) = key;
    let mut flux = 0.0;
    let mut a_int = [[0.0; 2]; 2];
    let mut len = 0.0;
    for &s in dual.interfaces().get(&key).map(|v| v.as_slice()).unwrap_or(&[]) {
        let seg = &dual.segments()[s];
        let n = seg.normal_from(i);
        let l = seg.segment.length;
        len += l;
        for (t, w) in gauss.iter() {
            let x = seg.segment.at(t * l);
            flux += w * l * dot(coeffs.b(x), n);
            let a = coeffs.a(x);
            for r in 0..2 {
                for c in 0..2 {
                    a_int[r][c] += w * l * a[r][c];
                }
            }
        }
    }
    if len == 0.0 {
        return (0.0, [[0.0; 2]; 2], 0.0);
    }
    for row in a_int.iter_mut() {
        for v in row.iter_mut() {
            *v /= len;
        }
    }
    (flux / len, a_int, len)
}

fn check_finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

/// Diffusion (and optionally convection) through interior dual segments, 2-point Gauss.
fn add_interior_fluxes(
    mesh: &PrimalMesh,
    dual: &DualMesh,
    coeffs: &CoefficientSet,
    with_convection: bool,
    out: &mut TripletBuilder,
) -> Result<()> {
    let gauss = UnitGauss::new(2);
    for seg in dual.segments() {
        let l = seg.segment.length;
        if l <= 0.0 {
            continue;
        }
        let t = seg.triangle;
        let tri = mesh.triangles()[t];
        let [p0, p1, p2] = mesh.triangle_points(t);
        let grads = barycentric_gradients(p0, p1, p2);
        let mut flux = [0.0; 3];
        for (s, w) in gauss.iter() {
            let x = seg.segment.at(s * l);
            let a = coeffs.a(x);
            let lam = barycentric(x, p0, p1, p2);
            let b = if with_convection { coeffs.b(x) } else { [0.0, 0.0] };
            for k in 0..3 {
                let ag = mat_vec(a, grads[k]);
                let v = [-ag[0] + b[0] * lam[k], -ag[1] + b[1] * lam[k]];
                flux[k] += w * l * dot(v, seg.normal);
            }
        }
        for k in 0..3 {
            let f = check_finite(flux[k], "interior flux")?;
            out.add(seg.i, tri[k], f);
            out.add(seg.j, tri[k], -f);
        }
    }
    Ok(())
}

/// `∫_{∂V_i ∩ Γ^out} b·n φ_k`, 3-point Gauss per half edge.
fn add_outflow(
    mesh: &PrimalMesh,
    dual: &DualMesh,
    coeffs: &CoefficientSet,
    classification: &BoundaryClassification,
    out: &mut TripletBuilder,
) -> Result<()> {
    let gauss = UnitGauss::new(3);
    for piece in dual.boundary_pieces() {
        if !classification.is_outflow(piece.edge) {
            continue;
        }
        let [a, b] = mesh.boundary_edges()[piece.edge];
        let edge = mesh.boundary_segment(piece.edge);
        let (mut fa, mut fb) = (0.0, 0.0);
        let l = piece.segment.length;
        for (s, w) in gauss.iter() {
            let x = piece.segment.at(s * l);
            let bn = dot(coeffs.b(x), piece.normal);
            let (p, _) = edge.local(x);
            let lb = p / edge.length;
            fa += w * l * bn * (1.0 - lb);
            fb += w * l * bn * lb;
        }
        out.add(piece.vertex, a, check_finite(fa, "outflow term")?);
        out.add(piece.vertex, b, check_finite(fb, "outflow term")?);
    }
    Ok(())
}

/// `∫_{V_i} c φ_k`, degree-4 rule on each half of every sub-quadrilateral.
fn add_reaction(mesh: &PrimalMesh, dual: &DualMesh, coeffs: &CoefficientSet, out: &mut TripletBuilder) -> Result<()> {
    let rule = TriangleRule::with_degree(4);
    for q in dual.sub_quads() {
        let tri = mesh.triangles()[q.triangle];
        let [p0, p1, p2] = mesh.triangle_points(q.triangle);
        let mut r = [0.0; 3];
        for h in q.halves() {
            for k in 0..3 {
                r[k] += rule.integrate(h[0], h[1], h[2], |x, _| coeffs.c(x) * barycentric(x, p0, p1, p2)[k]);
            }
        }
        for k in 0..3 {
            out.add(q.vertex, tri[k], check_finite(r[k], "reaction term")?);
        }
    }
    Ok(())
}

/// Galerkin finite volume matrix.
pub fn assemble_fvm(
    mesh: &PrimalMesh,
    dual: &DualMesh,
    coeffs: &CoefficientSet,
    classification: &BoundaryClassification,
) -> Result<FvmMatrix> {
    let n = mesh.n_vertices();
    let mut out = TripletBuilder::new(n, n);
    add_interior_fluxes(mesh, dual, coeffs, true, &mut out)?;
    add_outflow(mesh, dual, coeffs, classification, &mut out)?;
    add_reaction(mesh, dual, coeffs, &mut out)?;
    Ok(out.build())
}

/// Upwind finite volume matrix. Convection across each interface `τ_ij` becomes
/// `β_ij |τ_ij| (λ_ij u_i + (1 − λ_ij) u_j)` with `λ_ij = Φ(β_ij |τ_ij| / ‖A_ij‖)`.
pub fn assemble_fvm_upwind(
    mesh: &PrimalMesh,
    dual: &DualMesh,
    coeffs: &CoefficientSet,
    classification: &BoundaryClassification,
    scheme: UpwindScheme,
    norm: PecletNorm,
) -> Result<FvmMatrix> {
    if scheme == UpwindScheme::None {
        return Err(Error::Config("upwind assembly needs a scheme other than 'none'".into()));
    }
    let n = mesh.n_vertices();
    let mut out = TripletBuilder::new(n, n);
    add_interior_fluxes(mesh, dual, coeffs, false, &mut out)?;
    for &key in dual.interfaces().keys() {
        let (i, j) = key;
        let (beta, a_avg, len) = interface_averages(dual, coeffs, key);
        let flux = check_finite(beta * len, "interface convection")?;
        if flux == 0.0 {
            continue;
        }
        let lambda = eval_weight(scheme, flux / norm.apply(a_avg));
        out.add(i, i, flux * lambda);
        out.add(i, j, flux * (1.0 - lambda));
        out.add(j, i, -flux * lambda);
        out.add(j, j, -flux * (1.0 - lambda));
    }
    add_outflow(mesh, dual, coeffs, classification, &mut out)?;
    add_reaction(mesh, dual, coeffs, &mut out)?;
    Ok(out.build())
}

/// Dispatches on the scheme: Galerkin for `None`, upwind otherwise.
pub fn assemble_fvm_with(
    mesh: &PrimalMesh,
    dual: &DualMesh,
    coeffs: &CoefficientSet,
    classification: &BoundaryClassification,
    scheme: UpwindScheme,
    norm: PecletNorm,
) -> Result<FvmMatrix> {
    match scheme {
        UpwindScheme::None => assemble_fvm(mesh, dual, coeffs, classification),
        _ => assemble_fvm_upwind(mesh, dual, coeffs, classification, scheme, norm),
    }
}

/// `∫_{V_i} f dx + ∫_{∂V_i ∩ Γ} g2 ds`; `g2` receives the point and outward normal.
///
/// Box integrals use a degree-4 rule per sub-triangle, boundary pieces 4-point Gauss.
pub fn assemble_fvm_rhs(
    mesh: &PrimalMesh,
    dual: &DualMesh,
    f: impl Fn(Point) -> f64,
    g2: impl Fn(Point, Point) -> f64,
) -> Result<Vec<f64>> {
    let rule = TriangleRule::with_degree(4);
    let gauss = UnitGauss::new(4);
    let mut out = vec![0.0; mesh.n_vertices()];
    for q in dual.sub_quads() {
        for h in q.halves() {
            out[q.vertex] += rule.integrate(h[0], h[1], h[2], |x, _| f(x));
        }
    }
    for piece in dual.boundary_pieces() {
        let l = piece.segment.length;
        out[piece.vertex] += gauss.iter().map(|(s, w)| w * l * g2(piece.segment.at(s * l), piece.normal)).sum::<f64>();
    }
    for v in &out {
        check_finite(*v, "finite volume load")?;
    }
    Ok(out)
}

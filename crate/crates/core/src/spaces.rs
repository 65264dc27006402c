//! Discrete spaces: continuous piecewise linears on the primal mesh, piecewise
//! constants on the boundary elements and on the boxes, the box interpolation
//! `I_h^*`, and the projections used for initial and boundary data.

use std::sync::Arc;

use faer::prelude::*;

use crate::dual::DualMesh;
use crate::error::{Error, Result};
use crate::geometry::{barycentric, barycentric_gradients, dot, Point};
use crate::mesh::PrimalMesh;
use crate::quadrature::{TriangleRule, UnitGauss};
use crate::sparse::{CsrMatrix, TripletBuilder};

/// Element of `S^1(T)`: nodal values at the mesh vertices.
#[derive(Debug, Clone)]
pub struct NodalFunction {
    mesh: Arc<PrimalMesh>,
    pub values: Vec<f64>,
}

impl NodalFunction {
    pub fn new(mesh: Arc<PrimalMesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_vertices() {
            return Err(Error::DimensionMismatch { expected: mesh.n_vertices(), got: values.len() });
        }
        Ok(NodalFunction { mesh, values })
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(mesh: Arc<PrimalMesh>, f: impl Fn(Point) -> f64) -> Self {
        let values = mesh.vertices().iter().map(|&p| f(p)).collect();
        NodalFunction { mesh, values }
    }

    pub fn mesh(&self) -> &Arc<PrimalMesh> {
        &self.mesh
    }

    /// Value at a point inside triangle `t`.
    pub fn eval_in(&self, t: usize, x: Point) -> f64 {
        let [a, b, c] = self.mesh.triangle_points(t);
        let l = barycentric(x, a, b, c);
        let tri = self.mesh.triangles()[t];
        (0..3).map(|k| l[k] * self.values[tri[k]]).sum()
    }

    pub fn gradient_in(&self, t: usize) -> Point {
        gradient_on_triangle(&self.mesh, t, &self.values)
    }

    fn same_mesh(&self, other: &NodalFunction) -> Result<()> {
        if Arc::ptr_eq(&self.mesh, &other.mesh) {
            Ok(())
        } else {
            Err(Error::MeshMismatch("nodal functions live on different meshes".into()))
        }
    }
}

/// Gradient of the piecewise linear function with nodal `values` on triangle `t`.
pub fn gradient_on_triangle(mesh: &PrimalMesh, t: usize, values: &[f64]) -> Point {
    let [a, b, c] = mesh.triangle_points(t);
    let g = barycentric_gradients(a, b, c);
    let tri = mesh.triangles()[t];
    let mut out = [0.0, 0.0];
    for k in 0..3 {
        out[0] += values[tri[k]] * g[k][0];
        out[1] += values[tri[k]] * g[k][1];
    }
    out
}

/// Element of `P^0(E_Γ)`: one value per boundary edge in loop order.
#[derive(Debug, Clone)]
pub struct BoundaryDensity {
    mesh: Arc<PrimalMesh>,
    pub values: Vec<f64>,
}

impl BoundaryDensity {
    pub fn new(mesh: Arc<PrimalMesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_boundary_edges() {
            return Err(Error::DimensionMismatch { expected: mesh.n_boundary_edges(), got: values.len() });
        }
        Ok(BoundaryDensity { mesh, values })
    }

    pub fn mesh(&self) -> &Arc<PrimalMesh> {
        &self.mesh
    }
}

/// Element of `P^0(T^*)`: one value per box.
#[derive(Debug, Clone)]
pub struct BoxFunction {
    pub values: Vec<f64>,
}

impl BoxFunction {
    /// Value at a point of triangle `t`: the box is the one of the vertex with the
    /// largest barycentric coordinate.
    pub fn eval_in(&self, mesh: &PrimalMesh, t: usize, x: Point) -> f64 {
        let [a, b, c] = mesh.triangle_points(t);
        let l = barycentric(x, a, b, c);
        let k = (0..3).max_by(|&i, &j| l[i].total_cmp(&l[j])).unwrap();
        self.values[mesh.triangles()[t][k]]
    }
}

/// `I_h^*`: box coefficient `i` is the nodal value at `a_i`.
pub fn interpolate_to_boxes(v: &NodalFunction, dual: &DualMesh) -> Result<BoxFunction> {
    if dual.n_boxes() != v.values.len() {
        return Err(Error::MeshMismatch("dual mesh does not match nodal function".into()));
    }
    Ok(BoxFunction { values: v.values.clone() })
}

/// `M_ij = ∫_{V_i} φ_j dx`, computed exactly (affine integrand, centroid rule per half-quad).
pub fn chi_mass_matrix(mesh: &PrimalMesh, dual: &DualMesh) -> CsrMatrix {
    let n = mesh.n_vertices();
    let mut b = TripletBuilder::new(n, n);
    for q in dual.sub_quads() {
        let tri = mesh.triangles()[q.triangle];
        let [pa, pb, pc] = mesh.triangle_points(q.triangle);
        for half in q.halves() {
            let area = crate::geometry::signed_area(half[0], half[1], half[2]);
            let g = crate::geometry::centroid(half[0], half[1], half[2]);
            let l = barycentric(g, pa, pb, pc);
            for k in 0..3 {
                b.add(q.vertex, tri[k], area * l[k]);
            }
        }
    }
    b.build()
}

/// `⟨v, I_h^* w⟩_Ω`.
pub fn chi_inner_product(v: &NodalFunction, w: &NodalFunction, dual: &DualMesh) -> Result<f64> {
    v.same_mesh(w)?;
    let m = chi_mass_matrix(&v.mesh, dual);
    // row i of M integrates over V_i, tested with w(a_i)
    Ok(m.bilinear(&w.values, &v.values))
}

/// Standard `S^1` mass matrix `∫ φ_i φ_j`.
pub fn fem_mass_matrix(mesh: &PrimalMesh) -> CsrMatrix {
    let n = mesh.n_vertices();
    let mut b = TripletBuilder::new(n, n);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.triangle_area(t);
        for i in 0..3 {
            for j in 0..3 {
                b.add(tri[i], tri[j], area / 12.0 * if i == j { 2.0 } else { 1.0 });
            }
        }
    }
    b.build()
}

/// Standard `S^1` stiffness matrix `∫ ∇φ_i · ∇φ_j`.
pub fn fem_stiffness_matrix(mesh: &PrimalMesh) -> CsrMatrix {
    let n = mesh.n_vertices();
    let mut b = TripletBuilder::new(n, n);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let [pa, pb, pc] = mesh.triangle_points(t);
        let g = barycentric_gradients(pa, pb, pc);
        let area = mesh.triangle_area(t);
        for i in 0..3 {
            for j in 0..3 {
                b.add(tri[i], tri[j], area * dot(g[i], g[j]));
            }
        }
    }
    b.build()
}

/// `∫_Ω f φ_i` for every vertex, by a triangle rule of the given degree.
pub fn nodal_load(mesh: &PrimalMesh, f: impl Fn(Point) -> f64, degree: usize) -> Vec<f64> {
    let rule = TriangleRule::with_degree(degree);
    let mut out = vec![0.0; mesh.n_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let [a, b, c] = mesh.triangle_points(t);
        for k in 0..3 {
            out[tri[k]] += rule.integrate(a, b, c, |x, l| f(x) * l[k]);
        }
    }
    out
}

/// `L^2` projection `P_h` onto `S^1(T)`.
pub fn project_l2_nodal(mesh: &Arc<PrimalMesh>, g: impl Fn(Point) -> f64) -> Result<NodalFunction> {
    let mass = fem_mass_matrix(mesh);
    let rhs = nodal_load(mesh, g, 8);
    let llt = mass
        .to_faer()
        .sp_cholesky(faer::Side::Lower)
        .map_err(|e| Error::Singular(format!("mass matrix: {e:?}")))?;
    let b = faer::Mat::<f64>::from_fn(rhs.len(), 1, |i, _| rhs[i]);
    let x = llt.solve(&b);
    let values: Vec<f64> = (0..rhs.len()).map(|i| x[(i, 0)]).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("L2 projection".into()));
    }
    NodalFunction::new(mesh.clone(), values)
}

/// Edge-wise integral means `(1/h_E) ∫_E g ds`; `g` receives the point and outward normal.
pub fn project_boundary_mean(mesh: &Arc<PrimalMesh>, g: impl Fn(Point, Point) -> f64) -> BoundaryDensity {
    let rule = UnitGauss::new(10);
    let values = (0..mesh.n_boundary_edges())
        .map(|k| {
            let s = mesh.boundary_segment(k);
            rule.iter().map(|(t, w)| w * g(s.at(t * s.length), s.normal)).sum()
        })
        .collect();
    BoundaryDensity { mesh: mesh.clone(), values }
}

//! Block system of the finite volume / boundary element coupling:
//!
//! ```text
//! [ A_fvm  Ctb ] [U]   [L_Ω]
//! [ Kb     V   ] [Φ] = [L_Γ]
//! ```
//!
//! plus the box mass matrix `M_chi` for the time derivative.

use std::sync::Arc;

use crate::bem::{BemMatrices, DoubleLayerQuadrature};
use crate::dual::DualMesh;
use crate::error::{Error, Result};
use crate::fvm::{assemble_fvm_rhs, assemble_fvm_with, CoefficientSet, PecletNorm, UpwindScheme};
use crate::geometry::{barycentric_gradients, dot, Point};
use crate::mesh::{BoundaryClassification, PrimalMesh};
use crate::quadrature::{TriangleRule, UnitGauss};
use crate::spaces::{chi_mass_matrix, fem_mass_matrix, fem_stiffness_matrix};
use crate::sparse::{CsrMatrix, DenseMatrix, TripletBuilder};

#[derive(Debug, Clone)]
pub struct CoupledSystem {
    /// Domain block (finite volume or, for the oracle, finite element).
    pub a: CsrMatrix,
    /// `−⟨φ_h, I_h^* v_h⟩_Γ`: `n₁ × n₂`.
    pub ctb: CsrMatrix,
    /// `⟨(1/2 − K) γφ_j, χ_E⟩`: `n₂ × n₂`, columns are boundary vertices in loop order.
    pub kb: DenseMatrix,
    pub v: DenseMatrix,
    pub m_chi: CsrMatrix,
    /// Global vertex id of each boundary vertex, in loop order.
    pub boundary_vertices: Vec<usize>,
}

impl CoupledSystem {
    pub fn n1(&self) -> usize {
        self.a.nrows()
    }

    pub fn n2(&self) -> usize {
        self.v.nrows()
    }

    pub fn trace(&self, u: &[f64]) -> Vec<f64> {
        self.boundary_vertices.iter().map(|&g| u[g]).collect()
    }

    /// Stationary operator applied to `(U, Φ)`.
    pub fn apply(&self, u: &[f64], phi: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut top = self.a.mul_vec(u);
        for (t, c) in top.iter_mut().zip(self.ctb.mul_vec(phi)) {
            *t += c;
        }
        let mut bottom = self.kb.mul_vec(&self.trace(u));
        for (b, c) in bottom.iter_mut().zip(self.v.mul_vec(phi)) {
            *b += c;
        }
        (top, bottom)
    }

    /// `B((u, φ); (v, ψ))` from the blocks.
    pub fn bilinear(&self, u: &[f64], phi: &[f64], v: &[f64], psi: &[f64]) -> f64 {
        let (top, bottom) = self.apply(u, phi);
        dot_slices(&top, v) + dot_slices(&bottom, psi)
    }

    /// `[(1/τ) M_chi + A, Ctb; Kb, V]` (`inv_tau = 0` gives the stationary matrix).
    pub fn step_matrix(&self, inv_tau: f64) -> CsrMatrix {
        let (n1, n2) = (self.n1(), self.n2());
        let mut b = TripletBuilder::new(n1 + n2, n1 + n2);
        for (r, c, v) in self.a.triplets() {
            b.add(r, c, v);
        }
        if inv_tau != 0.0 {
            for (r, c, v) in self.m_chi.triplets() {
                b.add(r, c, inv_tau * v);
            }
        }
        for (r, c, v) in self.ctb.triplets() {
            b.add(r, n1 + c, v);
        }
        for k in 0..n2 {
            for j in 0..n2 {
                let kv = self.kb.get(k, j);
                if kv != 0.0 {
                    b.add(n1 + k, self.boundary_vertices[j], kv);
                }
                b.add(n1 + k, n1 + j, self.v.get(k, j));
            }
        }
        b.build()
    }

    /// Dense stationary matrix; only meant for small meshes.
    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_rows(self.step_matrix(0.0).to_dense())
    }
}

fn dot_slices(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_same_mesh(mesh: &PrimalMesh, dual: &DualMesh, bem: &BemMatrices) -> Result<()> {
    if dual.n_boxes() != mesh.n_vertices() {
        return Err(Error::DimensionMismatch { expected: mesh.n_vertices(), got: dual.n_boxes() });
    }
    if bem.v.nrows() != mesh.n_boundary_edges() {
        return Err(Error::DimensionMismatch { expected: mesh.n_boundary_edges(), got: bem.v.nrows() });
    }
    Ok(())
}

fn boundary_blocks(mesh: &PrimalMesh, bem: &BemMatrices) -> (CsrMatrix, DenseMatrix) {
    let n1 = mesh.n_vertices();
    let n2 = mesh.n_boundary_edges();
    let bv = mesh.boundary_vertices();
    let mut ctb = TripletBuilder::new(n1, n2);
    for (k, j, m) in bem.mb.triplets() {
        ctb.add(bv[j], k, -m);
    }
    let mut kb = DenseMatrix::zeros(n2, n2);
    for k in 0..n2 {
        for j in 0..n2 {
            kb.set(k, j, 0.5 * bem.mb.get(k, j) - bem.k.get(k, j));
        }
    }
    (ctb.build(), kb)
}

/// Finite volume / boundary element block system.
pub fn assemble_system(
    mesh: &PrimalMesh,
    dual: &DualMesh,
    coeffs: &CoefficientSet,
    classification: &BoundaryClassification,
    scheme: UpwindScheme,
    norm: PecletNorm,
    bem: &BemMatrices,
) -> Result<CoupledSystem> {
    check_same_mesh(mesh, dual, bem)?;
    let a = assemble_fvm_with(mesh, dual, coeffs, classification, scheme, norm)?;
    let (ctb, kb) = boundary_blocks(mesh, bem);
    Ok(CoupledSystem {
        a,
        ctb,
        kb,
        v: bem.v.clone(),
        m_chi: chi_mass_matrix(mesh, dual),
        boundary_vertices: mesh.boundary_vertices(),
    })
}

/// Galerkin finite element / boundary element system with the same boundary blocks;
/// `M_chi` is replaced by the consistent mass matrix.
pub fn assemble_fembem_oracle(
    mesh: &PrimalMesh,
    coeffs: &CoefficientSet,
    classification: &BoundaryClassification,
    bem: &BemMatrices,
) -> Result<CoupledSystem> {
    if bem.v.nrows() != mesh.n_boundary_edges() {
        return Err(Error::DimensionMismatch { expected: mesh.n_boundary_edges(), got: bem.v.nrows() });
    }
    let n = mesh.n_vertices();
    let rule = TriangleRule::with_degree(6);
    let mut b = TripletBuilder::new(n, n);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let [p0, p1, p2] = mesh.triangle_points(t);
        let g = barycentric_gradients(p0, p1, p2);
        for i in 0..3 {
            for j in 0..3 {
                // (A∇φ_j − bφ_j)·∇φ_i + c φ_j φ_i
                let v = rule.integrate(p0, p1, p2, |x, l| {
                    let a = coeffs.a(x);
                    let bx = coeffs.b(x);
                    let ag = [a[0][0] * g[j][0] + a[0][1] * g[j][1], a[1][0] * g[j][0] + a[1][1] * g[j][1]];
                    dot([ag[0] - bx[0] * l[j], ag[1] - bx[1] * l[j]], g[i]) + coeffs.c(x) * l[j] * l[i]
                });
                if !v.is_finite() {
                    return Err(Error::NonFinite("finite element block".into()));
                }
                b.add(tri[i], tri[j], v);
            }
        }
    }
    let gauss = UnitGauss::new(3);
    for (k, &[va, vb]) in mesh.boundary_edges().iter().enumerate() {
        if !classification.is_outflow(k) {
            continue;
        }
        let s = mesh.boundary_segment(k);
        let mut m = [[0.0; 2]; 2];
        for (t, w) in gauss.iter() {
            let bn = dot(coeffs.b(s.at(t * s.length)), s.normal);
            let l = [1.0 - t, t];
            for i in 0..2 {
                for j in 0..2 {
                    m[i][j] += w * s.length * bn * l[i] * l[j];
                }
            }
        }
        let ids = [va, vb];
        for i in 0..2 {
            for j in 0..2 {
                b.add(ids[i], ids[j], m[i][j]);
            }
        }
    }
    let (ctb, kb) = boundary_blocks(mesh, bem);
    Ok(CoupledSystem {
        a: b.build(),
        ctb,
        kb,
        v: bem.v.clone(),
        m_chi: fem_mass_matrix(mesh),
        boundary_vertices: mesh.boundary_vertices(),
    })
}

/// Right-hand side `(L_Ω, L_Γ)` of the block system.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadVector {
    pub t: f64,
    pub interior: Vec<f64>,
    pub boundary: Vec<f64>,
}

impl LoadVector {
    pub fn zeros(t: f64, n1: usize, n2: usize) -> Self {
        LoadVector { t, interior: vec![0.0; n1], boundary: vec![0.0; n2] }
    }

    /// `self += w * other`.
    pub fn axpy(&mut self, w: f64, other: &LoadVector) {
        for (a, b) in self.interior.iter_mut().zip(&other.interior) {
            *a += w * b;
        }
        for (a, b) in self.boundary.iter_mut().zip(&other.boundary) {
            *a += w * b;
        }
    }

    pub fn len(&self) -> usize {
        self.interior.len() + self.boundary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Assembles `⟨f, I_h^* v⟩ + ⟨g2, I_h^* v⟩_Γ` and `⟨(1/2 − K) g1, ψ⟩` for data given pointwise.
#[derive(Debug, Clone)]
pub struct LoadAssembler {
    mesh: Arc<PrimalMesh>,
    dual: Arc<DualMesh>,
    double_layer: DoubleLayerQuadrature,
    samples: Vec<(usize, f64, Point)>,
}

impl LoadAssembler {
    pub fn new(mesh: Arc<PrimalMesh>, dual: Arc<DualMesh>) -> Self {
        let double_layer = DoubleLayerQuadrature::new(&mesh.boundary());
        let samples = double_layer.sample_points();
        LoadAssembler { mesh, dual, double_layer, samples }
    }

    /// `⟨(1/2 − K) g1, χ_E⟩` per boundary edge.
    pub fn boundary_part(&self, g1: impl Fn(Point) -> f64) -> Result<Vec<f64>> {
        let values: Vec<f64> = self.samples.iter().map(|&(_, _, p)| g1(p)).collect();
        let k_part = self.double_layer.apply_samples(&values);
        let gauss = UnitGauss::new(16);
        let mut out = Vec::with_capacity(k_part.len());
        for (k, kp) in k_part.iter().enumerate() {
            let s = self.mesh.boundary_segment(k);
            let mean: f64 = gauss.iter().map(|(t, w)| w * g1(s.at(t * s.length))).sum::<f64>() * s.length;
            let v = 0.5 * mean - kp;
            if !v.is_finite() {
                return Err(Error::NonFinite("boundary load".into()));
            }
            out.push(v);
        }
        Ok(out)
    }

    pub fn assemble(
        &self,
        t: f64,
        f: impl Fn(Point) -> f64,
        g1: impl Fn(Point) -> f64,
        g2: impl Fn(Point, Point) -> f64,
    ) -> Result<LoadVector> {
        Ok(LoadVector {
            t,
            interior: assemble_fvm_rhs(&self.mesh, &self.dual, f, g2)?,
            boundary: self.boundary_part(g1)?,
        })
    }
}

/// Smallest generalized eigenvalue of `sym(B) x = λ H x` with
/// `H = blockdiag(stiffness + mass, V)`.
pub fn ellipticity_constant(system: &CoupledSystem, mesh: &PrimalMesh) -> Result<f64> {
    use faer::Side;
    let n1 = system.n1();
    let n = n1 + system.n2();
    let gram = fem_stiffness_matrix(mesh).linear_combination(1.0, &fem_mass_matrix(mesh), 1.0);
    let mut h = faer::Mat::<f64>::zeros(n, n);
    for (r, c, v) in gram.triplets() {
        h[(r, c)] = v;
    }
    for i in 0..system.n2() {
        for j in 0..system.n2() {
            h[(n1 + i, n1 + j)] = system.v.get(i, j);
        }
    }
    let llt = h.llt(Side::Lower).map_err(|e| Error::Singular(format!("norm Gram matrix: {e:?}")))?;
    let l = llt.L().to_owned();
    let b = system.to_dense();
    let mut s = faer::Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (b.get(i, j) + b.get(j, i)));
    // C = L⁻¹ S L⁻ᵀ
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l.as_ref(), s.as_mut(), faer::Par::Seq);
    let mut st = s.transpose().to_owned();
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l.as_ref(), st.as_mut(), faer::Par::Seq);
    let c = faer::Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (st[(i, j)] + st[(j, i)]));
    let ev = c
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Singular(format!("eigenvalue solver: {e:?}")))?;
    ev.first().copied().ok_or_else(|| Error::Undefined("empty system".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_lshape_mesh, build_uniform_square_mesh, classify_boundary, refine_uniform, Square};

    fn setup(mesh: &PrimalMesh) -> (DualMesh, BemMatrices) {
        (DualMesh::new(mesh), BemMatrices::assemble(&mesh.boundary()))
    }

    #[test]
    fn coupling_block_entries() {
        let mesh = build_uniform_square_mesh(Square { min: [0.0, 0.0], side: 0.5 }, 0.125).unwrap();
        let (dual, bem) = setup(&mesh);
        let cls = BoundaryClassification::all_outflow(mesh.n_boundary_edges());
        let sys = assemble_system(
            &mesh,
            &dual,
            &CoefficientSet::isotropic(1.0),
            &cls,
            UpwindScheme::None,
            PecletNorm::MaxEntry,
            &bem,
        )
        .unwrap();
        assert_eq!((sys.n1(), sys.n2()), (25, 16));
        for (k, &[a, b]) in mesh.boundary_edges().iter().enumerate() {
            assert_eq!(sys.ctb.get(a, k), -0.0625);
            assert_eq!(sys.ctb.get(b, k), -0.0625);
        }
        assert_eq!(sys.ctb.nnz(), 32);
        assert!(sys.m_chi.is_symmetric(1e-16));
    }

    #[test]
    fn fem_and_fvm_agree_for_pure_diffusion_and_share_bem_blocks() {
        let mesh = refine_uniform(&build_lshape_mesh(0.125).unwrap());
        let (dual, bem) = setup(&mesh);
        let cls = BoundaryClassification::all_outflow(mesh.n_boundary_edges());
        let c = CoefficientSet::isotropic(1.0);
        let fv = assemble_system(&mesh, &dual, &c, &cls, UpwindScheme::None, PecletNorm::MaxEntry, &bem).unwrap();
        let fe = assemble_fembem_oracle(&mesh, &c, &cls, &bem).unwrap();
        assert!(fv.a.max_abs_diff(&fe.a) < 1e-12);
        assert_eq!(fv.kb, fe.kb);
        assert_eq!(fv.v, fe.v);
        assert_eq!(fv.ctb, fe.ctb);
    }

    #[test]
    fn fvm_fem_difference_decreases_under_refinement() {
        let c = CoefficientSet::new(
            |x| [[1.0 + x[0], 0.1], [0.1, 1.0 + x[1]]],
            |x| [1.0 + x[1], 0.5 - x[0]],
            |x| 1.0 + x[0] * x[1],
        );
        let mut mesh = build_uniform_square_mesh(Square { min: [0.0, 0.0], side: 0.5 }, 0.125).unwrap();
        let mut diffs = Vec::new();
        for _ in 0..3 {
            let (dual, bem) = setup(&mesh);
            let cls = classify_boundary(&mesh, |x| c.b(x));
            let fv = assemble_system(&mesh, &dual, &c, &cls, UpwindScheme::None, PecletNorm::MaxEntry, &bem).unwrap();
            let fe = assemble_fembem_oracle(&mesh, &c, &cls, &bem).unwrap();
            diffs.push(fv.a.max_abs_diff(&fe.a));
            mesh = refine_uniform(&mesh);
        }
        assert!(diffs[1] < diffs[0] && diffs[2] < diffs[1], "{diffs:?}");
    }

    #[test]
    fn step_matrix_blocks_and_apply_agree() {
        let mesh = build_lshape_mesh(0.125).unwrap();
        let (dual, bem) = setup(&mesh);
        let c = CoefficientSet::new(|_| [[1.0, 0.0], [0.0, 2.0]], |x| [x[1], -x[0]], |_| 1.0);
        let cls = classify_boundary(&mesh, |x| c.b(x));
        let sys = assemble_system(&mesh, &dual, &c, &cls, UpwindScheme::Full, PecletNorm::MaxEntry, &bem).unwrap();
        let u: Vec<f64> = (0..sys.n1()).map(|i| (i as f64 * 0.37).sin()).collect();
        let phi: Vec<f64> = (0..sys.n2()).map(|i| (i as f64 * 0.91).cos()).collect();
        let (top, bottom) = sys.apply(&u, &phi);
        let x: Vec<f64> = u.iter().chain(&phi).copied().collect();
        let y = sys.step_matrix(0.0).mul_vec(&x);
        for (a, b) in y.iter().zip(top.iter().chain(&bottom)) {
            assert!((a - b).abs() < 1e-13);
        }
        let y2 = sys.step_matrix(20.0).mul_vec(&x);
        let m = sys.m_chi.mul_vec(&u);
        for i in 0..sys.n1() {
            assert!((y2[i] - y[i] - 20.0 * m[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn loads() {
        let mesh = Arc::new(build_lshape_mesh(0.125).unwrap());
        let dual = Arc::new(DualMesh::new(&mesh));
        let la = LoadAssembler::new(mesh.clone(), dual.clone());
        let zero = la.assemble(0.0, |_| 0.0, |_| 0.0, |_, _| 0.0).unwrap();
        assert!(zero.interior.iter().chain(&zero.boundary).all(|&v| v == 0.0));
        let one = la.assemble(0.0, |_| 1.0, |_| 0.0, |_, _| 0.0).unwrap();
        for (i, v) in one.interior.iter().enumerate() {
            assert!((v - dual.box_area(i)).abs() < 1e-15);
        }
        assert!(one.boundary.iter().all(|&v| v == 0.0));
        // g1 in the hat span: the load equals Kb applied to the nodal values
        let bem = BemMatrices::assemble(&mesh.boundary());
        let (_, kb) = boundary_blocks(&mesh, &bem);
        let g = |x: Point| 1.0 + 2.0 * x[0] - x[1];
        let got = la.boundary_part(g).unwrap();
        let nodal: Vec<f64> = mesh.boundary_vertices().iter().map(|&v| g(mesh.vertex(v))).collect();
        for (a, b) in got.iter().zip(kb.mul_vec(&nodal)) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn ellipticity_constant_is_positive_for_pure_diffusion() {
        let mesh = build_lshape_mesh(0.125).unwrap();
        let (dual, bem) = setup(&mesh);
        let cls = BoundaryClassification::all_outflow(mesh.n_boundary_edges());
        let sys = assemble_system(
            &mesh,
            &dual,
            &CoefficientSet::isotropic(1.0),
            &cls,
            UpwindScheme::None,
            PecletNorm::MaxEntry,
            &bem,
        )
        .unwrap();
        let lam = ellipticity_constant(&sys, &mesh).unwrap();
        assert!(lam > 0.0 && lam < 2.0, "{lam}");
    }

    #[test]
    fn mismatched_inputs_are_rejected() {
        let mesh = build_lshape_mesh(0.125).unwrap();
        let other = refine_uniform(&mesh);
        let (dual, _) = setup(&mesh);
        let bem = BemMatrices::assemble(&other.boundary());
        let cls = BoundaryClassification::all_outflow(mesh.n_boundary_edges());
        let r = assemble_system(&mesh, &dual, &CoefficientSet::isotropic(1.0), &cls, UpwindScheme::None, PecletNorm::MaxEntry, &bem);
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }
}

//! Galerkin boundary element matrices for the Laplace single and double layer
//! operators on a polygonal boundary, with piecewise constant test functions.

pub mod exterior;
pub mod kernels;

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Point, Segment};
use crate::mesh::BoundaryMesh;
use crate::quadrature::UnitGauss;
use crate::sparse::{CsrMatrix, DenseMatrix, TripletBuilder};

pub use exterior::{evaluate_exterior, evaluate_exterior_with, radiation_coefficient};

/// Gauss points per admissible panel.
const PANEL_POINTS: usize = 16;
/// Panels shorter than this fraction of their edge are not split further.
const MIN_PANEL_FRACTION: f64 = 1e-10;

/// `V_mat` (edge × edge), `K_mat` (edge × boundary vertex), `Mb` (edge × boundary vertex).
#[derive(Debug, Clone)]
pub struct BemMatrices {
    pub v: DenseMatrix,
    pub k: DenseMatrix,
    pub mb: CsrMatrix,
}

impl BemMatrices {
    pub fn assemble(boundary: &BoundaryMesh) -> Self {
        let dl = DoubleLayerQuadrature::new(boundary);
        BemMatrices {
            v: assemble_single_layer(boundary),
            k: dl.matrix(boundary),
            mb: assemble_boundary_mass(boundary),
        }
    }
}

/// `⟨V χ_E', χ_E⟩`.
pub fn assemble_single_layer(boundary: &BoundaryMesh) -> DenseMatrix {
    let segs = boundary.segments();
    let n = segs.len();
    let far = UnitGauss::new(16);
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (0..n).map(|j| if j < i { 0.0 } else { kernels::single_layer_entry(&segs[i], &segs[j], &far) }).collect())
        .collect();
    let mut v = DenseMatrix::from_rows(rows);
    for i in 0..n {
        for j in 0..i {
            let x = v.get(j, i);
            v.set(i, j, x);
        }
    }
    v
}

/// `⟨K γφ_j, χ_E⟩` for the boundary vertex hats.
pub fn assemble_double_layer(boundary: &BoundaryMesh) -> DenseMatrix {
    DoubleLayerQuadrature::new(boundary).matrix(boundary)
}

/// `⟨γφ_j, χ_E⟩`: `h_E / 2` at both endpoints of `E`.
pub fn assemble_boundary_mass(boundary: &BoundaryMesh) -> CsrMatrix {
    let n = boundary.len();
    let mut b = TripletBuilder::new(n, n);
    for (k, s) in boundary.segments().iter().enumerate() {
        b.add(k, k, 0.5 * s.length);
        b.add(k, boundary.next(k), 0.5 * s.length);
    }
    b.build()
}

/// `√(ψᵀ V ψ)`.
pub fn v_energy_norm(v: &DenseMatrix, psi: &[f64]) -> Result<f64> {
    if psi.len() != v.ncols() {
        return Err(Error::DimensionMismatch { expected: v.ncols(), got: psi.len() });
    }
    let q = v.bilinear(psi, psi);
    if !q.is_finite() {
        return Err(Error::NonFinite("V-energy".into()));
    }
    if q < 0.0 {
        // tolerate round-off relative to the size of the terms
        let scale: f64 = psi.iter().map(|x| x * x).sum::<f64>() * (0..v.nrows()).map(|i| v.get(i, i).abs()).fold(0.0, f64::max);
        if q < -1e-12 * scale {
            return Err(Error::NegativeQuadraticForm(q));
        }
        return Ok(0.0);
    }
    Ok(q.sqrt())
}

/// Quadrature node for the outer integral over a source edge.
#[derive(Debug, Clone, Copy)]
struct Node {
    /// Arc length along the source edge.
    s: f64,
    point: Point,
    /// Quadrature weight times `(1/2π) ∫_{E_k} (x−y)·n_y/|x−y|² ds_x`.
    weight: f64,
}

/// Quadrature of `⟨K θ, χ_k⟩ = (1/2π) Σ_l ∫_{E_l} θ(y) ∫_{E_k} ∂_{n_y} … ds_x ds_y` for any
/// density `θ` that can be sampled pointwise.
///
/// The inner integral is exact; the outer one uses Gauss panels refined until each panel is
/// no longer than its distance to `E_k`. Well separated pairs share a fixed set of nodes per
/// edge; the (few) pairs that need refinement keep their own node lists.
#[derive(Debug, Clone)]
pub struct DoubleLayerQuadrature {
    n_edges: usize,
    std_nodes: Vec<(f64, Point)>,
    /// `std_weights[k][l * PANEL_POINTS + q]`.
    std_weights: Vec<Vec<f64>>,
    /// `(k, l, nodes)` for pairs integrated on refined panels.
    refined: Vec<(usize, usize, Vec<Node>)>,
}

impl DoubleLayerQuadrature {
    pub fn new(boundary: &BoundaryMesh) -> Self {
        let segs = boundary.segments();
        let n = segs.len();
        let gauss = UnitGauss::new(PANEL_POINTS);
        let std_nodes: Vec<(f64, Point)> = segs
            .iter()
            .flat_map(|seg| gauss.iter().map(move |(t, _)| (t * seg.length, seg.at(t * seg.length))))
            .collect();
        let per_row: Vec<(Vec<f64>, Vec<(usize, usize, Vec<Node>)>)> = (0..n)
            .into_par_iter()
            .map(|k| {
                let sk = &segs[k];
                let mut w = vec![0.0; n * PANEL_POINTS];
                let mut refined = Vec::new();
                for (l, sl) in segs.iter().enumerate() {
                    if l == k || collinear(sk, sl) {
                        continue;
                    }
                    if sl.length <= sk.distance_to_segment(sl) {
                        for (q, (_, wq)) in gauss.iter().enumerate() {
                            let (_, y) = std_nodes[l * PANEL_POINTS + q];
                            w[l * PANEL_POINTS + q] =
                                wq * sl.length * kernels::double_layer_inner(sk, y, sl.normal) / (2.0 * PI);
                        }
                    } else {
                        let mut nodes = Vec::new();
                        panel_nodes(sk, sl, 0.0, sl.length, &gauss, &mut nodes);
                        refined.push((k, l, nodes));
                    }
                }
                (w, refined)
            })
            .collect();
        let mut std_weights = Vec::with_capacity(n);
        let mut refined = Vec::new();
        for (w, r) in per_row {
            std_weights.push(w);
            refined.extend(r);
        }
        DoubleLayerQuadrature { n_edges: n, std_nodes, std_weights, refined }
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    /// Every node at which a density must be sampled, as `(edge, arc length, point)`.
    pub fn sample_points(&self) -> Vec<(usize, f64, Point)> {
        let mut out: Vec<_> = self.std_nodes.iter().enumerate().map(|(i, &(s, p))| (i / PANEL_POINTS, s, p)).collect();
        for (_, l, nodes) in &self.refined {
            out.extend(nodes.iter().map(|nd| (*l, nd.s, nd.point)));
        }
        out
    }

    /// `(1/2π) ∫∫ θ ∂_{n_y}G` per test edge, from samples ordered as in [`Self::sample_points`].
    pub fn apply_samples(&self, samples: &[f64]) -> Vec<f64> {
        let n_std = self.std_nodes.len();
        let mut out: Vec<f64> = self
            .std_weights
            .iter()
            .map(|w| w.iter().zip(&samples[..n_std]).map(|(a, b)| a * b).sum())
            .collect();
        let mut offset = n_std;
        for (k, _, nodes) in &self.refined {
            out[*k] += nodes.iter().zip(&samples[offset..]).map(|(nd, v)| nd.weight * v).sum::<f64>();
            offset += nodes.len();
        }
        out
    }

    /// Same as [`Self::apply_samples`] for a density given as a function of `(edge, arc length, point)`.
    pub fn apply(&self, theta: impl Fn(usize, f64, Point) -> f64) -> Vec<f64> {
        let samples: Vec<f64> = self.sample_points().into_iter().map(|(l, s, p)| theta(l, s, p)).collect();
        self.apply_samples(&samples)
    }

    /// `K_mat[k][j]` for the boundary vertex hats.
    pub fn matrix(&self, boundary: &BoundaryMesh) -> DenseMatrix {
        let n = self.n_edges;
        let segs = boundary.segments();
        let mut m = DenseMatrix::zeros(n, n);
        let mut add = |k: usize, l: usize, s: f64, w: f64| {
            let t = s / segs[l].length;
            let (a, b) = (l, boundary.next(l));
            m.set(k, a, m.get(k, a) + w * (1.0 - t));
            m.set(k, b, m.get(k, b) + w * t);
        };
        for (k, row) in self.std_weights.iter().enumerate() {
            for (idx, &w) in row.iter().enumerate() {
                if w != 0.0 {
                    add(k, idx / PANEL_POINTS, self.std_nodes[idx].0, w);
                }
            }
        }
        for (k, l, nodes) in &self.refined {
            for nd in nodes {
                add(*k, *l, nd.s, nd.weight);
            }
        }
        m
    }
}

/// `(1/2π) ∫_{target} ∫_{source} θ(y) (x−y)·n_y/|x−y|² ds_y ds_x` for the two linear pieces on `source`:
/// `θ = 1 − t` (first entry) and `θ = t` (second entry), `t` the relative arc length.
pub fn double_layer_pair(target: &Segment, source: &Segment) -> [f64; 2] {
    if collinear(target, source) {
        return [0.0, 0.0];
    }
    let gauss = UnitGauss::new(PANEL_POINTS);
    let mut nodes = Vec::new();
    panel_nodes(target, source, 0.0, source.length, &gauss, &mut nodes);
    nodes.iter().fold([0.0, 0.0], |acc, nd| {
        let t = nd.s / source.length;
        [acc[0] + nd.weight * (1.0 - t), acc[1] + nd.weight * t]
    })
}

fn collinear(a: &Segment, b: &Segment) -> bool {
    let tol = 1e-12 * a.length.max(b.length);
    a.local(b.a).1.abs() <= tol && a.local(b.b).1.abs() <= tol
}

fn panel_nodes(target: &Segment, source: &Segment, s0: f64, s1: f64, gauss: &UnitGauss, out: &mut Vec<Node>) {
    let panel = Segment::new(source.at(s0), source.at(s1));
    let len = s1 - s0;
    if len > target.distance_to_segment(&panel) && len > MIN_PANEL_FRACTION * source.length {
        let m = 0.5 * (s0 + s1);
        panel_nodes(target, source, s0, m, gauss, out);
        panel_nodes(target, source, m, s1, gauss, out);
        return;
    }
    for (t, w) in gauss.iter() {
        let s = s0 + t * len;
        let y = source.at(s);
        out.push(Node { s, point: y, weight: w * len * kernels::double_layer_inner(target, y, source.normal) / (2.0 * PI) });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{dot, sub};
    use crate::mesh::{build_lshape_mesh, build_uniform_square_mesh, Square};
    use crate::quadrature::adaptive_integrate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lshape() -> BoundaryMesh {
        build_lshape_mesh(0.125).unwrap().boundary()
    }

    fn square() -> BoundaryMesh {
        build_uniform_square_mesh(Square { min: [0.0, 0.0], side: 0.5 }, 0.125).unwrap().boundary()
    }

    /// `(1/2π) ∫_{E_k} ∫_{E_l} θ(y) (x−y)·n_y/|x−y|²` by nested adaptive quadrature.
    fn k_oracle(b: &BoundaryMesh, k: usize, l: usize, theta: impl Fn(f64) -> f64) -> f64 {
        let (sk, sl) = (b.segments()[k], b.segments()[l]);
        adaptive_integrate(
            |s| {
                let x = sk.at(s);
                adaptive_integrate(
                    |t| {
                        let y = sl.at(t);
                        let z = sub(x, y);
                        theta(t / sl.length) * dot(z, sl.normal) / dot(z, z)
                    },
                    0.0,
                    sl.length,
                    1e-14,
                )
            },
            0.0,
            sk.length,
            1e-13,
        ) / (2.0 * PI)
    }

    #[test]
    fn single_layer_is_symmetric_positive_definite() {
        for b in [square(), lshape()] {
            let v = assemble_single_layer(&b);
            assert_eq!(v.max_asymmetry(), 0.0);
            assert!(v.symmetric_eigenvalues()[0] > 0.0);
        }
    }

    #[test]
    fn boundary_mass_rows() {
        let b = square();
        let mb = assemble_boundary_mass(&b);
        for k in 0..b.len() {
            let row: Vec<_> = mb.row(k).collect();
            assert_eq!(row.len(), 2);
            assert!(row.iter().all(|&(_, v)| v == 0.0625));
        }
        for (k, v) in mb.mul_vec(&vec![1.0; b.len()]).iter().enumerate() {
            assert_eq!(*v, b.segments()[k].length);
        }
    }

    #[test]
    fn double_layer_entries_match_oracle() {
        let b = lshape();
        let k_mat = assemble_double_layer(&b);
        let n = b.len();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|k| [(k, b.next(k)), (k, b.prev(k))]).collect();
        pairs.extend((0..12).map(|_| (rng.gen_range(0..n), rng.gen_range(0..n))));
        for (k, j) in pairs {
            // hat of vertex j lives on edges prev(j) (rising) and j (falling)
            let oracle = k_oracle(&b, k, b.prev(j), |t| t) + k_oracle(&b, k, j, |t| 1.0 - t);
            let got = k_mat.get(k, j);
            assert!((got - oracle).abs() < 1e-8 * oracle.abs().max(1e-6), "({k},{j}) {got} vs {oracle}");
        }
    }

    #[test]
    fn collinear_pairs_vanish() {
        let b = square();
        let k_mat = assemble_double_layer(&b);
        // edges 0..4 lie on the bottom side; vertices 0..5 on the same line
        for k in 0..4 {
            for j in 1..4 {
                assert_eq!(k_mat.get(k, j), 0.0);
            }
        }
    }

    #[test]
    fn row_sums_match_constant_density_oracle() {
        let b = lshape();
        let k_mat = assemble_double_layer(&b);
        for k in 0..b.len() {
            let row: f64 = k_mat.row(k).iter().sum();
            let oracle: f64 = (0..b.len()).filter(|&l| l != k).map(|l| k_oracle(&b, k, l, |_| 1.0)).sum();
            assert!((row - oracle).abs() < 1e-8 * oracle.abs().max(1e-6), "{row} vs {oracle}");
        }
    }

    #[test]
    fn sampled_application_reproduces_matrix_on_hats() {
        let b = lshape();
        let q = DoubleLayerQuadrature::new(&b);
        let k_mat = q.matrix(&b);
        let coeffs: Vec<f64> = (0..b.len()).map(|j| (j as f64 * 0.7).sin()).collect();
        let got = q.apply(|l, s, _| {
            let t = s / b.segments()[l].length;
            coeffs[l] * (1.0 - t) + coeffs[b.next(l)] * t
        });
        let expected = k_mat.mul_vec(&coeffs);
        for (a, e) in got.iter().zip(&expected) {
            assert!((a - e).abs() < 1e-14);
        }
    }

    #[test]
    fn energy_norm_properties() {
        let b = lshape();
        let v = assemble_single_layer(&b);
        assert_eq!(v_energy_norm(&v, &vec![0.0; b.len()]).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let psi: Vec<f64> = (0..b.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let n1 = v_energy_norm(&v, &psi).unwrap();
            assert!(n1 > 0.0);
            let twice: Vec<f64> = psi.iter().map(|x| 2.0 * x).collect();
            assert!((v_energy_norm(&v, &twice).unwrap() - 2.0 * n1).abs() < 1e-14);
        }
        assert!(v_energy_norm(&v, &[1.0]).is_err());
        let neg = DenseMatrix::from_rows(vec![vec![-1.0]]);
        assert!(matches!(v_energy_norm(&neg, &[1.0]), Err(Error::NegativeQuadraticForm(_))));
    }
}

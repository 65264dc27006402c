//! Primal triangulations: construction, red refinement, boundary loop and
//! inflow/outflow classification.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::{dist, dot, midpoint, polygon_area, signed_area, Point, Segment};

/// Conforming triangulation of a polygonal domain with counterclockwise triangles.
#[derive(Debug, Clone)]
pub struct PrimalMesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    /// Undirected edges stored with `lo < hi`.
    edges: Vec<[usize; 2]>,
    edge_triangles: Vec<(usize, Option<usize>)>,
    /// `triangle_edges[t][k]` is the edge joining local vertices `k` and `k + 1`.
    triangle_edges: Vec<[usize; 3]>,
    vertex_triangles: Vec<Vec<usize>>,
    /// Boundary edges oriented counterclockwise and ordered along the loop.
    boundary_edges: Vec<[usize; 2]>,
    boundary_edge_ids: Vec<usize>,
    boundary_vertex_index: Vec<Option<usize>>,
    diameter: f64,
}

impl PrimalMesh {
    /// Validate and index a triangulation.
    pub fn new(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::InvalidMesh("no triangles".into()));
        }
        let nv = vertices.len();
        let mut vertex_triangles = vec![Vec::new(); nv];
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= nv {
                    return Err(Error::InvalidMesh(format!("triangle {t} references vertex {v}")));
                }
            }
            let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if area.is_nan() || area <= 0.0 {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} has non-positive signed area {area}"
                )));
            }
            for &v in tri {
                vertex_triangles[v].push(t);
            }
        }

        let mut edge_index: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut edge_triangles: Vec<(usize, Option<usize>)> = Vec::new();
        let mut edge_first_dir: Vec<[usize; 2]> = Vec::new();
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut te = [0; 3];
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = [a.min(b), a.max(b)];
                match edge_index.get(&key) {
                    Some(&e) => {
                        if edge_triangles[e].1.is_some() {
                            return Err(Error::InvalidMesh(format!(
                                "edge {key:?} shared by more than two triangles"
                            )));
                        }
                        if edge_first_dir[e] != [b, a] {
                            return Err(Error::InvalidMesh(format!(
                                "edge {key:?} traversed twice in the same direction"
                            )));
                        }
                        edge_triangles[e].1 = Some(t);
                        te[k] = e;
                    }
                    None => {
                        let e = edges.len();
                        edges.push(key);
                        edge_triangles.push((t, None));
                        edge_first_dir.push([a, b]);
                        edge_index.insert(key, e);
                        te[k] = e;
                    }
                }
            }
            triangle_edges.push(te);
        }

        // boundary loop
        let mut outgoing: HashMap<usize, usize> = HashMap::new();
        let mut n_boundary = 0;
        for (e, &(_, other)) in edge_triangles.iter().enumerate() {
            if other.is_none() {
                n_boundary += 1;
                let start = edge_first_dir[e][0];
                if outgoing.insert(start, e).is_some() {
                    return Err(Error::InvalidMesh(format!(
                        "boundary touches itself at vertex {start}"
                    )));
                }
            }
        }
        let start_vertex = *outgoing
            .keys()
            .min_by(|&&a, &&b| {
                let (pa, pb) = (vertices[a], vertices[b]);
                pa[1].total_cmp(&pb[1]).then(pa[0].total_cmp(&pb[0]))
            })
            .ok_or_else(|| Error::InvalidMesh("no boundary".into()))?;
        let mut boundary_edges = Vec::with_capacity(n_boundary);
        let mut boundary_edge_ids = Vec::with_capacity(n_boundary);
        let mut v = start_vertex;
        loop {
            let e = *outgoing
                .get(&v)
                .ok_or_else(|| Error::InvalidMesh(format!("boundary loop broken at vertex {v}")))?;
            let [a, b] = edge_first_dir[e];
            boundary_edges.push([a, b]);
            boundary_edge_ids.push(e);
            v = b;
            if v == start_vertex || boundary_edges.len() > n_boundary {
                break;
            }
        }
        if boundary_edges.len() != n_boundary {
            return Err(Error::InvalidMesh(format!(
                "boundary is not a single closed loop ({} of {} edges reached)",
                boundary_edges.len(),
                n_boundary
            )));
        }
        let loop_points: Vec<Point> = boundary_edges.iter().map(|e| vertices[e[0]]).collect();
        if polygon_area(&loop_points) <= 0.0 {
            return Err(Error::InvalidMesh("boundary loop is not counterclockwise".into()));
        }
        let mut boundary_vertex_index = vec![None; nv];
        for (k, e) in boundary_edges.iter().enumerate() {
            boundary_vertex_index[e[0]] = Some(k);
        }
        if let Some(v) = vertex_triangles.iter().position(|s| s.is_empty()) {
            return Err(Error::InvalidMesh(format!("vertex {v} belongs to no triangle")));
        }

        let mut diameter: f64 = 0.0;
        for (i, &p) in loop_points.iter().enumerate() {
            for &q in &loop_points[i + 1..] {
                diameter = diameter.max(dist(p, q));
            }
        }
        if diameter >= 1.0 {
            return Err(Error::DiameterTooLarge(diameter));
        }

        Ok(PrimalMesh {
            vertices,
            triangles,
            edges,
            edge_triangles,
            triangle_edges,
            vertex_triangles,
            boundary_edges,
            boundary_edge_ids,
            boundary_vertex_index,
            diameter,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> Point {
        self.vertices[i]
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        signed_area(a, b, c)
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn edge_triangles(&self) -> &[(usize, Option<usize>)] {
        &self.edge_triangles
    }

    pub fn triangle_edges(&self) -> &[[usize; 3]] {
        &self.triangle_edges
    }

    pub fn vertex_triangles(&self, v: usize) -> &[usize] {
        &self.vertex_triangles[v]
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_boundary_edges(&self) -> usize {
        self.boundary_edges.len()
    }

    /// Boundary edges in counterclockwise loop order.
    pub fn boundary_edges(&self) -> &[[usize; 2]] {
        &self.boundary_edges
    }

    /// Index into [`Self::edges`] of each boundary edge, in loop order.
    pub fn boundary_edge_ids(&self) -> &[usize] {
        &self.boundary_edge_ids
    }

    /// Position of a vertex in the boundary loop, if it lies on the boundary.
    pub fn boundary_vertex_index(&self, v: usize) -> Option<usize> {
        self.boundary_vertex_index[v]
    }

    /// Global vertex ids of the boundary loop; entry `k` starts boundary edge `k`.
    pub fn boundary_vertices(&self) -> Vec<usize> {
        self.boundary_edges.iter().map(|e| e[0]).collect()
    }

    pub fn boundary_segment(&self, k: usize) -> Segment {
        let [a, b] = self.boundary_edges[k];
        Segment::new(self.vertices[a], self.vertices[b])
    }

    pub fn boundary(&self) -> BoundaryMesh {
        BoundaryMesh::new(self.boundary_edges.iter().map(|e| self.vertices[e[0]]).collect())
    }

    pub fn area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Largest triangle diameter.
    pub fn h(&self) -> f64 {
        (0..self.n_triangles())
            .map(|t| {
                let [a, b, c] = self.triangle_points(t);
                dist(a, b).max(dist(b, c)).max(dist(c, a))
            })
            .fold(0.0, f64::max)
    }

    /// Smallest interior angle over all triangles, in radians.
    pub fn min_angle(&self) -> f64 {
        let mut m = f64::INFINITY;
        for t in 0..self.n_triangles() {
            let p = self.triangle_points(t);
            for k in 0..3 {
                let (a, b, c) = (p[k], p[(k + 1) % 3], p[(k + 2) % 3]);
                let u = crate::geometry::sub(b, a);
                let v = crate::geometry::sub(c, a);
                let ang = crate::geometry::cross(u, v).atan2(dot(u, v));
                m = m.min(ang);
            }
        }
        m
    }

    /// Point-in-domain test (boundary counts as inside).
    pub fn contains(&self, x: Point) -> bool {
        self.boundary().contains(x)
    }
}

/// A closed counterclockwise polygon `Γ` split into straight boundary elements.
#[derive(Debug, Clone)]
pub struct BoundaryMesh {
    points: Vec<Point>,
    segments: Vec<Segment>,
}

impl BoundaryMesh {
    /// `points[k]` starts segment `k`; the loop closes back to `points[0]`.
    pub fn new(points: Vec<Point>) -> Self {
        let n = points.len();
        let segments = (0..n).map(|k| Segment::new(points[k], points[(k + 1) % n])).collect();
        BoundaryMesh { points, segments }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Index of the segment ending at vertex `k`.
    pub fn prev(&self, k: usize) -> usize {
        (k + self.len() - 1) % self.len()
    }

    pub fn next(&self, k: usize) -> usize {
        (k + 1) % self.len()
    }

    /// Split every element at its midpoint.
    pub fn bisected(&self) -> BoundaryMesh {
        let mut pts = Vec::with_capacity(2 * self.points.len());
        for s in &self.segments {
            pts.push(s.a);
            pts.push(s.midpoint());
        }
        BoundaryMesh::new(pts)
    }

    pub fn total_length(&self) -> f64 {
        self.segments.iter().map(|s| s.length).sum()
    }

    pub fn distance_to(&self, x: Point) -> f64 {
        self.segments.iter().map(|s| s.distance_to_point(x)).fold(f64::INFINITY, f64::min)
    }

    /// Winding-number test; points on `Γ` count as inside.
    pub fn contains(&self, x: Point) -> bool {
        if self.distance_to(x) == 0.0 {
            return true;
        }
        let mut winding = 0i32;
        for s in &self.segments {
            let (a, b) = (s.a, s.b);
            if a[1] <= x[1] {
                if b[1] > x[1] && signed_area(a, b, x) > 0.0 {
                    winding += 1;
                }
            } else if b[1] <= x[1] && signed_area(a, b, x) < 0.0 {
                winding -= 1;
            }
        }
        winding != 0
    }
}

/// Axis-aligned square `[min, min + side]^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Square {
    pub min: Point,
    pub side: f64,
}

fn grid_count(side: f64, spacing: f64) -> Result<usize> {
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(Error::NonTilingSpacing { spacing, side });
    }
    let n = side / spacing;
    let rounded = n.round();
    if rounded < 1.0 || (n - rounded).abs() > 1e-9 * n.max(1.0) {
        return Err(Error::NonTilingSpacing { spacing, side });
    }
    Ok(rounded as usize)
}

/// Structured mesh of a square cut into `spacing`-sized cells, each split along the
/// diagonal from bottom-left to top-right.
pub fn build_uniform_square_mesh(domain: Square, spacing: f64) -> Result<PrimalMesh> {
    let n = grid_count(domain.side, spacing)?;
    build_grid_mesh(domain, n, |_, _| true)
}

/// `(-1/4, 1/4)^2` with the closed quadrant `[0, 1/4] x [-1/4, 0]` removed.
pub fn build_lshape_mesh(spacing: f64) -> Result<PrimalMesh> {
    let domain = Square { min: [-0.25, -0.25], side: 0.5 };
    let n = grid_count(domain.side, spacing)?;
    if n % 2 != 0 {
        return Err(Error::NonTilingSpacing { spacing, side: 0.25 });
    }
    let half = n / 2;
    build_grid_mesh(domain, n, |i, j| !(i >= half && j < half))
}

fn build_grid_mesh(domain: Square, n: usize, keep_cell: impl Fn(usize, usize) -> bool) -> Result<PrimalMesh> {
    let mut id = vec![usize::MAX; (n + 1) * (n + 1)];
    let mut vertices = Vec::new();
    let used = |i: usize, j: usize| {
        let cells = [(i.wrapping_sub(1), j.wrapping_sub(1)), (i, j.wrapping_sub(1)), (i.wrapping_sub(1), j), (i, j)];
        cells.iter().any(|&(ci, cj)| ci < n && cj < n && keep_cell(ci, cj))
    };
    for j in 0..=n {
        for i in 0..=n {
            if used(i, j) {
                id[j * (n + 1) + i] = vertices.len();
                let h = domain.side / n as f64;
                vertices.push([domain.min[0] + i as f64 * h, domain.min[1] + j as f64 * h]);
            }
        }
    }
    let mut triangles = Vec::new();
    for j in 0..n {
        for i in 0..n {
            if !keep_cell(i, j) {
                continue;
            }
            let v00 = id[j * (n + 1) + i];
            let v10 = id[j * (n + 1) + i + 1];
            let v01 = id[(j + 1) * (n + 1) + i];
            let v11 = id[(j + 1) * (n + 1) + i + 1];
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    PrimalMesh::new(vertices, triangles)
}

/// Red refinement: every triangle is split into four similar children via its edge midpoints.
pub fn refine_uniform(mesh: &PrimalMesh) -> PrimalMesh {
    let nv = mesh.n_vertices();
    let mut vertices = mesh.vertices.clone();
    vertices.extend(mesh.edges.iter().map(|&[a, b]| midpoint(mesh.vertices[a], mesh.vertices[b])));
    let mut triangles = Vec::with_capacity(4 * mesh.n_triangles());
    for (tri, te) in mesh.triangles.iter().zip(&mesh.triangle_edges) {
        let [a, b, c] = *tri;
        let (mab, mbc, mca) = (nv + te[0], nv + te[1], nv + te[2]);
        triangles.push([a, mab, mca]);
        triangles.push([mab, b, mbc]);
        triangles.push([mca, mbc, c]);
        triangles.push([mab, mbc, mca]);
    }
    PrimalMesh::new(vertices, triangles).expect("red refinement preserves validity")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowTag {
    /// `b·n < 0`
    Inflow,
    /// `b·n >= 0`
    Outflow,
}

/// Inflow/outflow tag per boundary edge (loop order), decided at the edge midpoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryClassification {
    pub tags: Vec<FlowTag>,
}

impl BoundaryClassification {
    pub fn all_outflow(n: usize) -> Self {
        BoundaryClassification { tags: vec![FlowTag::Outflow; n] }
    }

    pub fn is_outflow(&self, edge: usize) -> bool {
        self.tags[edge] == FlowTag::Outflow
    }

    pub fn n_inflow(&self) -> usize {
        self.tags.iter().filter(|&&t| t == FlowTag::Inflow).count()
    }
}

pub fn classify_boundary(mesh: &PrimalMesh, velocity: impl Fn(Point) -> Point) -> BoundaryClassification {
    let tags = (0..mesh.n_boundary_edges())
        .map(|k| {
            let s = mesh.boundary_segment(k);
            if dot(velocity(s.midpoint()), s.normal) < 0.0 {
                FlowTag::Inflow
            } else {
                FlowTag::Outflow
            }
        })
        .collect();
    BoundaryClassification { tags }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_square() -> Square {
        Square { min: [0.0, 0.0], side: 0.5 }
    }

    #[test]
    fn square_mesh_counts() {
        let m = build_uniform_square_mesh(half_square(), 0.125).unwrap();
        assert_eq!((m.n_vertices(), m.n_triangles(), m.n_boundary_edges()), (25, 32, 16));
        let m = build_uniform_square_mesh(Square { min: [-0.25, -0.25], side: 0.5 }, 0.25).unwrap();
        assert_eq!((m.n_vertices(), m.n_triangles(), m.n_boundary_edges()), (9, 8, 8));
    }

    #[test]
    fn square_rejects_bad_spacing_and_large_domains() {
        assert!(matches!(
            build_uniform_square_mesh(half_square(), 0.3),
            Err(Error::NonTilingSpacing { .. })
        ));
        assert!(matches!(
            build_uniform_square_mesh(Square { min: [0.0, 0.0], side: 1.0 }, 0.25),
            Err(Error::DiameterTooLarge(_))
        ));
    }

    #[test]
    fn lshape_geometry() {
        let m = build_lshape_mesh(0.25).unwrap();
        assert_eq!(m.n_triangles(), 6);
        assert!((m.area() - 3.0 / 16.0).abs() < 1e-15);
        assert!(m.vertices().contains(&[0.0, 0.0]));
        assert!(build_lshape_mesh(0.5).is_err());
        let m = build_lshape_mesh(0.125).unwrap();
        assert!((m.area() - 3.0 / 16.0).abs() < 1e-15);
        assert!(!m.contains([0.1, -0.1]));
        assert!(m.contains([-0.1, -0.1]));
    }

    #[test]
    fn boundary_loop_is_counterclockwise_and_closed() {
        let m = build_lshape_mesh(0.125).unwrap();
        let b = m.boundary();
        assert!((polygon_area(b.points()) - 3.0 / 16.0).abs() < 1e-15);
        for k in 0..m.n_boundary_edges() {
            let e = m.boundary_edges()[k];
            let next = m.boundary_edges()[(k + 1) % m.n_boundary_edges()];
            assert_eq!(e[1], next[0]);
        }
    }

    #[test]
    fn refinement_quadruples_and_preserves_area_and_angles() {
        let m0 = build_uniform_square_mesh(half_square(), 0.125).unwrap();
        let m1 = refine_uniform(&m0);
        assert_eq!(m1.n_triangles(), 128);
        assert!((m1.area() - m0.area()).abs() < 1e-15);
        assert!((m1.h() - 0.5 * m0.h()).abs() < 1e-15);
        assert!((m1.min_angle() - m0.min_angle()).abs() < 1e-12);
        // every interior edge has two triangles, boundary edges one
        let nb = m1.edge_triangles().iter().filter(|e| e.1.is_none()).count();
        assert_eq!(nb, m1.n_boundary_edges());
        // refined structured mesh equals the directly built one up to numbering
        let direct = build_uniform_square_mesh(half_square(), 0.0625).unwrap();
        assert_eq!(direct.n_vertices(), m1.n_vertices());
        let mut a: Vec<_> = m1.vertices().iter().map(|p| ((p[0] * 64.0) as i64, (p[1] * 64.0) as i64)).collect();
        let mut b: Vec<_> = direct.vertices().iter().map(|p| ((p[0] * 64.0) as i64, (p[1] * 64.0) as i64)).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn classification_examples() {
        let m = build_uniform_square_mesh(half_square(), 0.125).unwrap();
        let c = classify_boundary(&m, |x| [1000.0 * x[0], 0.0]);
        assert_eq!(c.n_inflow(), 0);
        let c = classify_boundary(&m, |_| [0.0, 0.0]);
        assert_eq!(c.n_inflow(), 0);
        let c = classify_boundary(&m, |_| [-1.0, 0.0]);
        for k in 0..m.n_boundary_edges() {
            let s = m.boundary_segment(k);
            let on_right = (s.midpoint()[0] - 0.5).abs() < 1e-14;
            assert_eq!(c.tags[k] == FlowTag::Inflow, on_right);
        }
        assert_eq!(c.n_inflow(), 4);
    }

    #[test]
    fn rejects_nonconforming_input() {
        // hanging node: two triangles on one side, one on the other
        let v = vec![[0.0, 0.0], [0.2, 0.0], [0.2, 0.2], [0.0, 0.2], [0.2, 0.1], [0.4, 0.1]];
        let t = vec![[0, 1, 3], [1, 4, 3], [4, 2, 3], [1, 5, 2]];
        assert!(PrimalMesh::new(v, t).is_err());
        // clockwise triangle
        assert!(PrimalMesh::new(vec![[0.0, 0.0], [0.0, 0.1], [0.1, 0.0]], vec![[0, 1, 2]]).is_err());
    }
}

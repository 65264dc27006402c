//! Vertex-centered box mesh built from barycenters and edge midpoints.

use std::collections::BTreeMap;

use crate::geometry::{centroid, dot, midpoint, polygon_area, right_perp, scale, sub, Point, Segment};
use crate::mesh::PrimalMesh;

/// Part of box `V_vertex` inside one triangle: `(a_i, m_ij, g, m_ik)`.
#[derive(Debug, Clone, Copy)]
pub struct SubQuad {
    pub vertex: usize,
    pub triangle: usize,
    pub corners: [Point; 4],
}

impl SubQuad {
    pub fn area(&self) -> f64 {
        polygon_area(&self.corners)
    }

    /// The two triangles `(c0, c1, c2)` and `(c0, c2, c3)`.
    pub fn halves(&self) -> [[Point; 3]; 2] {
        let c = self.corners;
        [[c[0], c[1], c[2]], [c[0], c[2], c[3]]]
    }
}

/// Straight piece of the interface between boxes `V_i` and `V_j` inside one triangle,
/// running from an edge midpoint to the barycenter.
#[derive(Debug, Clone, Copy)]
pub struct DualSegment {
    pub i: usize,
    pub j: usize,
    pub triangle: usize,
    pub segment: Segment,
    /// Unit normal pointing out of `V_i` (towards `V_j`).
    pub normal: Point,
}

impl DualSegment {
    /// Outward normal of this piece as seen from box `v` (`v` must be `i` or `j`).
    pub fn normal_from(&self, v: usize) -> Point {
        if v == self.i {
            self.normal
        } else {
            debug_assert_eq!(v, self.j);
            scale(self.normal, -1.0)
        }
    }
}

/// Half of a boundary edge: `∂V_vertex ∩ E`.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryPiece {
    pub vertex: usize,
    /// Boundary edge index in loop order.
    pub edge: usize,
    pub segment: Segment,
    /// Outward unit normal of the domain.
    pub normal: Point,
}

#[derive(Debug, Clone)]
pub struct DualMesh {
    box_areas: Vec<f64>,
    sub_quads: Vec<SubQuad>,
    segments: Vec<DualSegment>,
    interfaces: BTreeMap<(usize, usize), Vec<usize>>,
    boundary_pieces: Vec<BoundaryPiece>,
    vertex_segments: Vec<Vec<usize>>,
    vertex_sub_quads: Vec<Vec<usize>>,
    vertex_pieces: Vec<Vec<usize>>,
}

impl DualMesh {
    pub fn new(mesh: &PrimalMesh) -> Self {
        let nv = mesh.n_vertices();
        let nt = mesh.n_triangles();
        let mut sub_quads = Vec::with_capacity(3 * nt);
        let mut segments = Vec::with_capacity(3 * nt);
        let mut box_areas = vec![0.0; nv];
        let mut vertex_segments = vec![Vec::new(); nv];
        let mut vertex_sub_quads = vec![Vec::new(); nv];
        let mut interfaces: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();

        for (t, tri) in mesh.triangles().iter().enumerate() {
            let p = mesh.triangle_points(t);
            let g = centroid(p[0], p[1], p[2]);
            let m = [midpoint(p[0], p[1]), midpoint(p[1], p[2]), midpoint(p[2], p[0])];
            for k in 0..3 {
                // vertex k is bounded by the midpoints of edges k (k,k+1) and k+2 (k+2,k)
                let q = SubQuad { vertex: tri[k], triangle: t, corners: [p[k], m[k], g, m[(k + 2) % 3]] };
                box_areas[tri[k]] += q.area();
                vertex_sub_quads[tri[k]].push(sub_quads.len());
                sub_quads.push(q);
            }
            for k in 0..3 {
                let (i, j) = (tri[k], tri[(k + 1) % 3]);
                let segment = Segment::new(m[k], g);
                let mut normal = right_perp(segment.tangent);
                if dot(normal, sub(p[(k + 1) % 3], p[k])) < 0.0 {
                    normal = scale(normal, -1.0);
                }
                let id = segments.len();
                segments.push(DualSegment { i, j, triangle: t, segment, normal });
                vertex_segments[i].push(id);
                vertex_segments[j].push(id);
                interfaces.entry((i.min(j), i.max(j))).or_default().push(id);
            }
        }

        let mut boundary_pieces = Vec::with_capacity(2 * mesh.n_boundary_edges());
        let mut vertex_pieces = vec![Vec::new(); nv];
        for (k, &[a, b]) in mesh.boundary_edges().iter().enumerate() {
            let edge = mesh.boundary_segment(k);
            let mid = edge.midpoint();
            for (v, seg) in [(a, Segment::new(edge.a, mid)), (b, Segment::new(mid, edge.b))] {
                vertex_pieces[v].push(boundary_pieces.len());
                boundary_pieces.push(BoundaryPiece { vertex: v, edge: k, segment: seg, normal: edge.normal });
            }
        }

        DualMesh {
            box_areas,
            sub_quads,
            segments,
            interfaces,
            boundary_pieces,
            vertex_segments,
            vertex_sub_quads,
            vertex_pieces,
        }
    }

    pub fn n_boxes(&self) -> usize {
        self.box_areas.len()
    }

    pub fn box_area(&self, i: usize) -> f64 {
        self.box_areas[i]
    }

    pub fn box_areas(&self) -> &[f64] {
        &self.box_areas
    }

    /// Three per triangle, ordered by local vertex.
    pub fn sub_quads(&self) -> &[SubQuad] {
        &self.sub_quads
    }

    pub fn sub_quads_of(&self, vertex: usize) -> impl Iterator<Item = &SubQuad> {
        self.vertex_sub_quads[vertex].iter().map(move |&q| &self.sub_quads[q])
    }

    /// Three per triangle; segment `3t + k` separates local vertices `k` and `k + 1`.
    pub fn segments(&self) -> &[DualSegment] {
        &self.segments
    }

    pub fn segments_of(&self, vertex: usize) -> impl Iterator<Item = &DualSegment> {
        self.vertex_segments[vertex].iter().map(move |&s| &self.segments[s])
    }

    /// Interfaces `τ_ij` keyed by `(min(i,j), max(i,j))`, as lists of segment ids.
    pub fn interfaces(&self) -> &BTreeMap<(usize, usize), Vec<usize>> {
        &self.interfaces
    }

    pub fn interface_length(&self, key: (usize, usize)) -> f64 {
        self.interfaces
            .get(&key)
            .map(|ids| ids.iter().map(|&s| self.segments[s].segment.length).sum())
            .unwrap_or(0.0)
    }

    pub fn boundary_pieces(&self) -> &[BoundaryPiece] {
        &self.boundary_pieces
    }

    pub fn boundary_pieces_of(&self, vertex: usize) -> impl Iterator<Item = &BoundaryPiece> {
        self.vertex_pieces[vertex].iter().map(move |&p| &self.boundary_pieces[p])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_lshape_mesh, build_uniform_square_mesh, refine_uniform, Square};

    #[test]
    fn sub_quads_have_a_third_of_the_triangle() {
        let m = refine_uniform(&build_lshape_mesh(0.125).unwrap());
        let d = DualMesh::new(&m);
        for q in d.sub_quads() {
            let third = m.triangle_area(q.triangle) / 3.0;
            assert!((q.area() - third).abs() < 1e-15 * third.max(1.0), "{} vs {}", q.area(), third);
            // the two halves cover the quad
            let [h0, h1] = q.halves();
            let s = crate::geometry::signed_area(h0[0], h0[1], h0[2]) + crate::geometry::signed_area(h1[0], h1[1], h1[2]);
            assert!((s - q.area()).abs() < 1e-16);
        }
        let total: f64 = d.box_areas().iter().sum();
        assert!((total - m.area()).abs() < 1e-12 * m.area());
    }

    #[test]
    fn interior_box_of_uniform_grid_has_area_spacing_squared() {
        let s = 0.125;
        let m = build_uniform_square_mesh(Square { min: [0.0, 0.0], side: 0.5 }, s).unwrap();
        let d = DualMesh::new(&m);
        let interior = m.vertices().iter().position(|p| *p == [0.25, 0.25]).unwrap();
        assert_eq!(m.vertex_triangles(interior).len(), 6);
        assert!((d.box_area(interior) - s * s).abs() < 1e-15);
    }

    #[test]
    fn interfaces_are_antisymmetric() {
        let m = build_uniform_square_mesh(Square { min: [0.0, 0.0], side: 0.5 }, 0.125).unwrap();
        let d = DualMesh::new(&m);
        for (&(i, j), ids) in d.interfaces() {
            for &s in ids {
                let seg = &d.segments()[s];
                let ni = seg.normal_from(i);
                let nj = seg.normal_from(j);
                assert_eq!(crate::geometry::add(ni, nj), [0.0, 0.0]);
            }
            // interior edges give two pieces, boundary edges one
            let e = m.edges().iter().position(|&e| e == [i, j]).unwrap();
            let expected = if m.edge_triangles()[e].1.is_some() { 2 } else { 1 };
            assert_eq!(ids.len(), expected);
        }
    }

    #[test]
    fn boundary_pieces_are_half_edges() {
        let m = build_lshape_mesh(0.125).unwrap();
        let d = DualMesh::new(&m);
        assert_eq!(d.boundary_pieces().len(), 2 * m.n_boundary_edges());
        for p in d.boundary_pieces() {
            let full = m.boundary_segment(p.edge).length;
            assert!((p.segment.length - 0.5 * full).abs() < 1e-15);
        }
    }
}

//! Legacy ASCII VTK output of triangle meshes and nodal fields.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::PrimalMesh;

/// Unstructured grid with optional `POINT_DATA SCALARS u`.
pub fn vtk_string(mesh: &PrimalMesh, title: &str, values: Option<&[f64]>) -> Result<String> {
    if let Some(v) = values {
        if v.len() != mesh.n_vertices() {
            return Err(Error::DimensionMismatch { expected: mesh.n_vertices(), got: v.len() });
        }
    }
    let mut s = String::new();
    let title: String = title.chars().filter(|c| *c != '\n').take(255).collect();
    let _ = writeln!(s, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {} double", mesh.n_vertices());
    for p in mesh.vertices() {
        let _ = writeln!(s, "{:.16e} {:.16e} 0", p[0], p[1]);
    }
    let nt = mesh.n_triangles();
    let _ = writeln!(s, "CELLS {} {}", nt, 4 * nt);
    for t in mesh.triangles() {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        s.push_str("5\n");
    }
    if let Some(v) = values {
        let _ = writeln!(s, "POINT_DATA {}\nSCALARS u double 1\nLOOKUP_TABLE default", v.len());
        for x in v {
            let _ = writeln!(s, "{x:.16e}");
        }
    }
    Ok(s)
}

pub fn write_vtk(path: &Path, mesh: &PrimalMesh, title: &str, values: Option<&[f64]>) -> Result<()> {
    std::fs::write(path, vtk_string(mesh, title, values)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_uniform_square_mesh, Square};

    #[test]
    fn layout() {
        let m = build_uniform_square_mesh(Square { min: [0.0, 0.0], side: 0.5 }, 0.25).unwrap();
        let vals: Vec<f64> = (0..m.n_vertices()).map(|i| i as f64).collect();
        let s = vtk_string(&m, "t = 0", Some(&vals)).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "# vtk DataFile Version 3.0");
        assert_eq!(lines[4], "POINTS 9 double");
        assert!(s.contains("CELLS 8 32\n") && s.contains("CELL_TYPES 8\n"));
        assert!(s.contains("POINT_DATA 9\nSCALARS u double 1\nLOOKUP_TABLE default\n"));
        assert_eq!(lines.len(), 5 + 9 + 1 + 8 + 1 + 8 + 3 + 9);
        assert!(vtk_string(&m, "x", Some(&vals[1..])).is_err());
        assert!(!vtk_string(&m, "x", None).unwrap().contains("POINT_DATA"));
    }
}

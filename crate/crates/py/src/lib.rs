//! Python bindings: meshes, problems, convergence studies, boundary element matrices.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use fvmbem::bem::{assemble_double_layer, assemble_single_layer, evaluate_exterior};
use fvmbem::experiments;
use fvmbem::fvm::UpwindScheme;
use fvmbem::mesh::{build_lshape_mesh, build_uniform_square_mesh, refine_uniform, BoundaryMesh, PrimalMesh, Square};
use fvmbem::problems::{problem_by_name, Config, ProblemSpec};
use fvmbem::sparse::DenseMatrix;
use fvmbem::time::Method;

fn to_py(e: fvmbem::Error) -> PyErr {
    match e.exit_code() {
        1 => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn rows(m: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).to_vec()).collect()
}

/// Triangulation of a square or the L-shape.
#[pyclass(name = "Mesh", module = "pyfvmbem", frozen)]
struct PyMesh {
    inner: PrimalMesh,
}

#[pymethods]
impl PyMesh {
    #[staticmethod]
    #[pyo3(signature = (xmin, ymin, side, spacing))]
    fn square(xmin: f64, ymin: f64, side: f64, spacing: f64) -> PyResult<Self> {
        let inner = build_uniform_square_mesh(Square { min: [xmin, ymin], side }, spacing).map_err(to_py)?;
        Ok(PyMesh { inner })
    }

    #[staticmethod]
    fn lshape(spacing: f64) -> PyResult<Self> {
        Ok(PyMesh { inner: build_lshape_mesh(spacing).map_err(to_py)? })
    }

    /// Red refinement: every triangle split into four.
    fn refine(&self) -> Self {
        PyMesh { inner: refine_uniform(&self.inner) }
    }

    #[getter]
    fn n_vertices(&self) -> usize {
        self.inner.n_vertices()
    }

    #[getter]
    fn n_triangles(&self) -> usize {
        self.inner.n_triangles()
    }

    #[getter]
    fn h(&self) -> f64 {
        self.inner.h()
    }

    fn vertices(&self) -> Vec<(f64, f64)> {
        self.inner.vertices().iter().map(|p| (p[0], p[1])).collect()
    }

    fn triangles(&self) -> Vec<(usize, usize, usize)> {
        self.inner.triangles().iter().map(|t| (t[0], t[1], t[2])).collect()
    }

    /// Boundary vertices in counterclockwise order.
    fn boundary_points(&self) -> Vec<(f64, f64)> {
        self.inner.boundary().points().iter().map(|p| (p[0], p[1])).collect()
    }

    fn __repr__(&self) -> String {
        format!("Mesh(n_vertices={}, n_triangles={})", self.inner.n_vertices(), self.inner.n_triangles())
    }
}

/// One of the built-in experiments (`tanh`, `lshape`, `transport`).
#[pyclass(name = "Problem", module = "pyfvmbem")]
struct PyProblem {
    inner: ProblemSpec,
}

#[pymethods]
impl PyProblem {
    /// `overrides` are `key = value` pairs as in a configuration file.
    #[new]
    #[pyo3(signature = (name, overrides=None))]
    fn new(name: &str, overrides: Option<Vec<(String, String)>>) -> PyResult<Self> {
        let mut cfg = Config::default();
        for (k, v) in overrides.unwrap_or_default() {
            cfg.set(&k, &v);
        }
        Ok(PyProblem { inner: problem_by_name(name, &cfg).map_err(to_py)? })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn t_end(&self) -> f64 {
        self.inner.t_end
    }

    #[getter]
    fn has_exact_solution(&self) -> bool {
        self.inner.exact.is_some()
    }

    #[getter]
    fn method(&self) -> String {
        self.inner.method.to_string()
    }

    #[setter]
    fn set_method(&mut self, method: &str) -> PyResult<()> {
        self.inner.method = method.parse::<Method>().map_err(to_py)?;
        Ok(())
    }

    #[getter]
    fn upwind(&self) -> String {
        self.inner.scheme.to_string()
    }

    #[setter]
    fn set_upwind(&mut self, scheme: &str) -> PyResult<()> {
        self.inner.scheme = scheme.parse::<UpwindScheme>().map_err(to_py)?;
        Ok(())
    }

    /// Mesh of refinement level `level`.
    fn mesh(&self, level: usize) -> PyResult<PyMesh> {
        Ok(PyMesh { inner: self.inner.mesh(level).map_err(to_py)? })
    }

    /// Convergence study; returns the CSV table as a string.
    fn convergence_csv(&self, py: Python<'_>, levels: usize) -> PyResult<String> {
        let p = self.inner.clone();
        py.detach(move || experiments::run_convergence(&p, levels, p.method))
            .map(|r| r.to_csv())
            .map_err(to_py)
    }

    /// List of `(level, h, e_V, e_H)` tuples.
    fn convergence(&self, py: Python<'_>, levels: usize) -> PyResult<Vec<(usize, f64, f64, f64)>> {
        let p = self.inner.clone();
        let r = py.detach(move || experiments::run_convergence(&p, levels, p.method)).map_err(to_py)?;
        Ok(r.levels.iter().map(|l| (l.level, l.h, l.err_v, l.err_h1)).collect())
    }

    /// Nodal solutions at the knots nearest to `times`: `(time, knot time, values)`.
    #[pyo3(signature = (times, level=0, out_dir=None))]
    fn snapshots(
        &self,
        py: Python<'_>,
        times: Vec<f64>,
        level: usize,
        out_dir: Option<PathBuf>,
    ) -> PyResult<Vec<(f64, f64, Vec<f64>)>> {
        let p = self.inner.clone();
        let snaps = py
            .detach(move || experiments::run_snapshots(&p, level, &times, out_dir.as_deref()))
            .map_err(to_py)?;
        Ok(snaps.into_iter().map(|s| (s.time, s.knot_time, s.values)).collect())
    }

    fn __repr__(&self) -> String {
        format!("Problem('{}', method='{}', upwind='{}')", self.inner.name, self.inner.method, self.inner.scheme)
    }
}

fn boundary_from(points: Vec<(f64, f64)>) -> PyResult<BoundaryMesh> {
    if points.len() < 3 {
        return Err(PyValueError::new_err("a boundary polygon needs at least three points"));
    }
    Ok(BoundaryMesh::new(points.into_iter().map(|(x, y)| [x, y]).collect()))
}

/// Galerkin single layer matrix of a closed counterclockwise polygon.
#[pyfunction]
fn single_layer_matrix(points: Vec<(f64, f64)>) -> PyResult<Vec<Vec<f64>>> {
    Ok(rows(&assemble_single_layer(&boundary_from(points)?)))
}

/// Double layer matrix: rows are edges, columns boundary vertex hats.
#[pyfunction]
fn double_layer_matrix(points: Vec<(f64, f64)>) -> PyResult<Vec<Vec<f64>>> {
    Ok(rows(&assemble_double_layer(&boundary_from(points)?)))
}

/// Exterior solution from the trace (per vertex) and the normal flux (per edge).
#[pyfunction]
fn exterior_solution(
    points: Vec<(f64, f64)>,
    trace: Vec<f64>,
    flux: Vec<f64>,
    at: Vec<(f64, f64)>,
) -> PyResult<Vec<f64>> {
    let b = boundary_from(points)?;
    let at: Vec<[f64; 2]> = at.into_iter().map(|(x, y)| [x, y]).collect();
    evaluate_exterior(&b, &trace, &flux, &at).map_err(to_py)
}

/// Upwind weight `Φ(peclet)` of a scheme (`none`, `full`, `steerable`).
#[pyfunction]
fn eval_weight(scheme: &str, peclet: f64) -> PyResult<f64> {
    Ok(fvmbem::fvm::eval_weight(scheme.parse().map_err(to_py)?, peclet))
}

/// `(name, passed, detail)` of the built-in oracle checks.
#[pyfunction]
fn selftest() -> Vec<(String, bool, String)> {
    experiments::selftest().into_iter().map(|r| (r.name.to_string(), r.passed, r.detail)).collect()
}

#[pymodule]
fn pyfvmbem(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMesh>()?;
    m.add_class::<PyProblem>()?;
    m.add_function(wrap_pyfunction!(single_layer_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(double_layer_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(exterior_solution, m)?)?;
    m.add_function(wrap_pyfunction!(eval_weight, m)?)?;
    m.add_function(wrap_pyfunction!(selftest, m)?)?;
    Ok(())
}

//! Drivers: convergence studies, field snapshots and a quick self test.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::bem::kernels::single_layer_entry;
use crate::bem::BemMatrices;
use crate::dual::DualMesh;
use crate::error::{Error, Result};
use crate::error_analysis::{ConvergenceReport, ErrorAccumulator, LevelResult};
use crate::fvm::{assemble_fvm, CoefficientSet};
use crate::mesh::BoundaryClassification;
use crate::problems::ProblemSpec;
use crate::quadrature::{adaptive_integrate, UnitGauss};
use crate::spaces::fem_stiffness_matrix;
use crate::time::{run_with, Discretization, Method, TimeGrid, WeightedAverager};
use crate::vtk::write_vtk;

pub const DEFAULT_SNAPSHOT_TIMES: [f64; 6] = [0.0625, 0.125, 0.25, 0.5, 0.75, 1.0];

/// Solves one refinement level and returns `(e_V, e_H)`.
pub fn run_level(problem: &ProblemSpec, level: usize, method: Method) -> Result<LevelResult> {
    let exact = problem
        .exact
        .as_ref()
        .ok_or_else(|| Error::Config(format!("problem '{}' has no exact solution", problem.name)))?;
    let mesh = problem.mesh(level)?;
    let grid = TimeGrid::with_step(problem.t_end, problem.tau(level))?;
    let disc = Discretization::new(problem, mesh)?;
    let mut acc = ErrorAccumulator::new(&disc.mesh, exact, grid.knots());
    run_with(&disc, problem, &grid, method, |n, u, phi| acc.observe(n, u, phi))?;
    let (err_v, err_h1) = acc.errors();
    log::info!("{} level {level}: e_V = {err_v:.4e}, e_H = {err_h1:.4e}", problem.name);
    Ok(LevelResult { level, h: problem.spacing(level), tau: grid.max_tau(), err_v, err_h1 })
}

/// Levels `0 … levels−1` with `h` and `τ` halved per level; levels run in parallel.
pub fn run_convergence(problem: &ProblemSpec, levels: usize, method: Method) -> Result<ConvergenceReport> {
    if levels == 0 {
        return Err(Error::Config("at least one level is required".into()));
    }
    if problem.exact.is_none() {
        return Err(Error::Config(format!("problem '{}' has no exact solution", problem.name)));
    }
    // finest level first so the longest run starts early
    let mut results: Vec<LevelResult> = (0..levels)
        .rev()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|l| run_level(problem, l, method))
        .collect::<Result<_>>()?;
    results.sort_by_key(|r| r.level);
    Ok(ConvergenceReport { problem: problem.name.clone(), levels: results })
}

pub fn write_csv(report: &ConvergenceReport, path: &Path) -> Result<()> {
    std::fs::write(path, report.to_csv())?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    /// Requested time.
    pub time: f64,
    /// Time knot whose solution is stored.
    pub knot_time: f64,
    pub step: usize,
    pub values: Vec<f64>,
    pub path: Option<PathBuf>,
}

/// Nodal solutions at the time knots nearest to `times`, written as VTK files into `out`
/// when given.
pub fn run_snapshots(problem: &ProblemSpec, level: usize, times: &[f64], out: Option<&Path>) -> Result<Vec<Snapshot>> {
    for &t in times {
        if !(0.0..=problem.t_end).contains(&t) {
            return Err(Error::Config(format!("snapshot time {t} outside [0, {}]", problem.t_end)));
        }
    }
    let grid = TimeGrid::with_step(problem.t_end, problem.tau(level))?;
    let nearest = |t: f64| {
        (0..=grid.n_steps())
            .min_by(|&a, &b| (grid.t(a) - t).abs().total_cmp(&(grid.t(b) - t).abs()))
            .unwrap_or(0)
    };
    let wanted: Vec<usize> = times.iter().map(|&t| nearest(t)).collect();
    let disc = Discretization::new(problem, problem.mesh(level)?)?;
    let mut snaps: Vec<Snapshot> = Vec::with_capacity(times.len());
    run_with(&disc, problem, &grid, problem.method, |n, u, _| {
        if let Some(bad) = u.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("nodal value {bad}")));
        }
        for (k, &w) in wanted.iter().enumerate() {
            if w == n {
                snaps.push(Snapshot { time: times[k], knot_time: grid.t(n), step: n, values: u.to_vec(), path: None });
            }
        }
        Ok(())
    })?;
    snaps.sort_by(|a, b| a.time.total_cmp(&b.time));
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        for s in snaps.iter_mut() {
            let path = dir.join(format!("{}_t{:.6}.vtk", problem.name, s.time));
            write_vtk(&path, &disc.mesh, &format!("{} u at t = {}", problem.name, s.knot_time), Some(&s.values))?;
            s.path = Some(path);
        }
    }
    Ok(snaps)
}

#[derive(Debug, Clone)]
pub struct SelfTestResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Small oracle checks that run in seconds.
pub fn selftest() -> Vec<SelfTestResult> {
    let mut out = Vec::new();
    let mut record = |name, passed, detail: String| out.push(SelfTestResult { name, passed, detail });

    // single layer entries against nested adaptive quadrature
    let segs = [
        crate::geometry::Segment::new([0.0, 0.0], [0.1, 0.0]),
        crate::geometry::Segment::new([0.1, 0.0], [0.1, 0.1]),
        crate::geometry::Segment::new([0.3, 0.2], [0.1, 0.25]),
    ];
    let far = UnitGauss::new(16);
    let mut worst: f64 = 0.0;
    for a in &segs[..1] {
        for b in &segs[1..] {
            let got = single_layer_entry(a, b, &far);
            let oracle = -adaptive_integrate(
                |s| {
                    let x = a.at(s);
                    adaptive_integrate(|t| crate::geometry::dist(x, b.at(t)).ln(), 0.0, b.length, 1e-14)
                },
                0.0,
                a.length,
                1e-13,
            ) / (2.0 * std::f64::consts::PI);
            worst = worst.max((got - oracle).abs() / oracle.abs());
        }
    }
    record("single layer vs quadrature", worst < 1e-8, format!("relative error {worst:.2e}"));

    // Laplace finite volume matrix equals the P1 stiffness matrix
    match crate::mesh::build_lshape_mesh(0.125) {
        Ok(mesh) => {
            let dual = DualMesh::new(&mesh);
            let cls = BoundaryClassification::all_outflow(mesh.n_boundary_edges());
            match assemble_fvm(&mesh, &dual, &CoefficientSet::isotropic(1.0), &cls) {
                Ok(a) => {
                    let d = a.max_abs_diff(&fem_stiffness_matrix(&mesh));
                    record("finite volume = finite element (A = I)", d < 1e-12, format!("max difference {d:.2e}"));
                }
                Err(e) => record("finite volume = finite element (A = I)", false, e.to_string()),
            }
            let bem = BemMatrices::assemble(&mesh.boundary());
            let lmin = bem.v.symmetric_eigenvalues().first().copied().unwrap_or(f64::NAN);
            record("single layer matrix is positive definite", lmin > 0.0, format!("smallest eigenvalue {lmin:.3e}"));
        }
        Err(e) => record("finite volume = finite element (A = I)", false, e.to_string()),
    }

    // weight moments
    let grid = TimeGrid::new(vec![0.0, 0.3, 0.35]).expect("valid grid");
    let avg = WeightedAverager::default();
    let tau = grid.tau(2);
    let m1 = avg.average(&grid, 2, |_| 1.0) * tau - tau;
    let m2 = avg.average(&grid, 2, |t| WeightedAverager::omega(0.3, 0.35, t)) * tau - 4.0 * tau;
    record("time weight moments", m1.abs() < 1e-12 && m2.abs() < 1e-12, format!("deviations {m1:.1e}, {m2:.1e}"));
    out
}

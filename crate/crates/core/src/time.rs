//! Backward Euler time stepping of the coupled system.
//!
//! Both schemes solve
//! `(1/τ) M_chi (Uⁿ − Uⁿ⁻¹) + A Uⁿ + Ctb Φⁿ = L_Ω`, `Kb γUⁿ + V Φⁿ = L_Γ`
//! per step. The classical scheme samples the loads at `tⁿ`; the variant scheme averages
//! them over the slab with the weight `ω(t) = 6(t − tⁿ⁻¹)/τ − 2`.

use std::fmt;
use std::sync::Arc;

use faer::prelude::*;
use faer::sparse::linalg::solvers::Lu;

use crate::bem::BemMatrices;
use crate::coupling::{assemble_system, CoupledSystem, LoadAssembler, LoadVector};
use crate::dual::DualMesh;
use crate::error::{Error, Result};
use crate::mesh::{classify_boundary, BoundaryClassification, PrimalMesh};
use crate::problems::ProblemSpec;
use crate::quadrature::UnitGauss;
use crate::spaces::project_l2_nodal;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    Variant,
    Classical,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "variant" => Ok(Method::Variant),
            "classical" | "classic" => Ok(Method::Classical),
            other => Err(Error::Config(format!("unknown time stepping method '{other}'"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Variant => "variant",
            Method::Classical => "classical",
        })
    }
}

/// Knots `0 = t⁰ < t¹ < … < t^N`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    knots: Vec<f64>,
}

impl TimeGrid {
    pub fn new(knots: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidTimeGrid("need at least one step".into()));
        }
        if knots[0] != 0.0 {
            return Err(Error::InvalidTimeGrid(format!("first knot is {} instead of 0", knots[0])));
        }
        if let Some(w) = knots.windows(2).find(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::InvalidTimeGrid(format!("knots {} and {} are not increasing", w[0], w[1])));
        }
        Ok(TimeGrid { knots })
    }

    /// `n` equal steps on `[0, t_end]`.
    pub fn uniform(t_end: f64, n: usize) -> Result<Self> {
        if n == 0 || !(t_end > 0.0) {
            return Err(Error::InvalidTimeGrid(format!("{n} steps on [0, {t_end}]")));
        }
        Self::new((0..=n).map(|k| if k == n { t_end } else { t_end * k as f64 / n as f64 }).collect())
    }

    /// Uniform grid whose step is `tau` (rounded so that the steps tile `[0, t_end]`).
    pub fn with_step(t_end: f64, tau: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::InvalidTimeGrid(format!("step {tau}")));
        }
        Self::uniform(t_end, ((t_end / tau) - 1e-9).ceil().max(1.0) as usize)
    }

    pub fn n_steps(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn t(&self, n: usize) -> f64 {
        self.knots[n]
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Length of slab `n ≥ 1`, i.e. `tⁿ − tⁿ⁻¹`.
    pub fn tau(&self, n: usize) -> f64 {
        self.knots[n] - self.knots[n - 1]
    }

    pub fn max_tau(&self) -> f64 {
        (1..self.knots.len()).map(|n| self.tau(n)).fold(0.0, f64::max)
    }
}

/// `v̂ⁿ = (1/τ) ∫ ω v dt` by 3-point Gauss, exact for `v` quadratic in time.
#[derive(Debug, Clone)]
pub struct WeightedAverager {
    gauss: UnitGauss,
}

impl Default for WeightedAverager {
    fn default() -> Self {
        WeightedAverager { gauss: UnitGauss::new(3) }
    }
}

impl WeightedAverager {
    /// `ω` on the slab `[t0, t1]`.
    pub fn omega(t0: f64, t1: f64, t: f64) -> f64 {
        6.0 * (t - t0) / (t1 - t0) - 2.0
    }

    /// Times and weights with `v̂ = Σ w v(t)`.
    pub fn nodes(&self, grid: &TimeGrid, n: usize) -> Vec<(f64, f64)> {
        let (t0, t1) = (grid.t(n - 1), grid.t(n));
        self.gauss.iter().map(|(s, w)| (t0 + s * (t1 - t0), w * (6.0 * s - 2.0))).collect()
    }

    pub fn average(&self, grid: &TimeGrid, n: usize, v: impl Fn(f64) -> f64) -> f64 {
        self.nodes(grid, n).into_iter().map(|(t, w)| w * v(t)).sum()
    }
}

/// Everything time-independent on one mesh.
pub struct Discretization {
    pub mesh: Arc<PrimalMesh>,
    pub dual: Arc<DualMesh>,
    pub classification: BoundaryClassification,
    pub bem: BemMatrices,
    pub system: CoupledSystem,
    pub loads: LoadAssembler,
}

impl fmt::Debug for Discretization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Discretization")
            .field("n_vertices", &self.mesh.n_vertices())
            .field("n_boundary_edges", &self.mesh.n_boundary_edges())
            .field("n_inflow", &self.classification.n_inflow())
            .finish()
    }
}

impl Discretization {
    pub fn new(problem: &ProblemSpec, mesh: PrimalMesh) -> Result<Self> {
        if mesh.diameter() >= 1.0 {
            return Err(Error::DiameterTooLarge(mesh.diameter()));
        }
        let report = problem.coefficients.check(&mesh)?;
        log::debug!("{}: λ_min(A) = {:.3e}, min(div b/2 + c) = {:.3e}", problem.name, report.lambda_min, report.min_reaction);
        // the contraction constant of 1/2 + K is not computed; 1 is its worst case
        if report.lambda_min - 0.25 <= 0.0 {
            log::warn!(
                "{}: λ_min(A) = {:.3e} does not exceed C_K/4 for C_K = 1; coercivity is not guaranteed",
                problem.name,
                report.lambda_min
            );
        }
        let mesh = Arc::new(mesh);
        let dual = Arc::new(DualMesh::new(&mesh));
        let classification = classify_boundary(&mesh, |x| problem.coefficients.b(x));
        let bem = BemMatrices::assemble(&mesh.boundary());
        let system = assemble_system(
            &mesh,
            &dual,
            &problem.coefficients,
            &classification,
            problem.scheme,
            problem.peclet_norm,
            &bem,
        )?;
        let loads = LoadAssembler::new(mesh.clone(), dual.clone());
        Ok(Discretization { mesh, dual, classification, bem, system, loads })
    }

    /// `(L_Ω, L_Γ)` of the problem data frozen at time `t`.
    pub fn load_at(&self, problem: &ProblemSpec, t: f64) -> Result<LoadVector> {
        self.loads.assemble(t, |x| (problem.f)(x, t), |x| (problem.g1)(x, t), |x, n| (problem.g2)(x, n, t))
    }
}

/// Right-hand side of step `n` for the chosen method.
pub fn step_load(disc: &Discretization, problem: &ProblemSpec, grid: &TimeGrid, n: usize, method: Method) -> Result<LoadVector> {
    match method {
        Method::Classical => disc.load_at(problem, grid.t(n)),
        Method::Variant => {
            let mut acc = LoadVector::zeros(grid.t(n), disc.system.n1(), disc.system.n2());
            for (t, w) in WeightedAverager::default().nodes(grid, n) {
                acc.axpy(w, &disc.load_at(problem, t)?);
            }
            Ok(acc)
        }
    }
}

const RESIDUAL_WARN: f64 = 1e-10;
const RESIDUAL_FAIL: f64 = 1e-6;

/// Factorized step matrix `[(1/τ) M_chi + A, Ctb; Kb, V]`, refactorized when `τ` changes.
pub struct StepSolver {
    inv_tau: f64,
    matrix: CsrMatrix,
    lu: Lu<usize, f64>,
}

impl fmt::Debug for StepSolver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StepSolver").field("inv_tau", &self.inv_tau).field("n", &self.matrix.nrows()).finish()
    }
}

impl StepSolver {
    pub fn new(system: &CoupledSystem, tau: f64) -> Result<Self> {
        let inv_tau = 1.0 / tau;
        let matrix = system.step_matrix(inv_tau);
        let lu = matrix.to_faer().sp_lu().map_err(|e| Error::Singular(format!("step matrix: {e:?}")))?;
        Ok(StepSolver { inv_tau, matrix, lu })
    }

    fn ensure(&mut self, system: &CoupledSystem, tau: f64) -> Result<()> {
        if ((1.0 / tau) - self.inv_tau).abs() > 1e-12 * self.inv_tau {
            *self = Self::new(system, tau)?;
        }
        Ok(())
    }

    /// Solves with a residual check.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let b = Mat::<f64>::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        let x = self.lu.solve(&b);
        let sol: Vec<f64> = (0..rhs.len()).map(|i| x[(i, 0)]).collect();
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("step solution".into()));
        }
        let r = self.matrix.mul_vec(&sol);
        let res = r.iter().zip(rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = rhs.iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let rel = res / scale;
        if !(rel <= RESIDUAL_FAIL) {
            return Err(Error::Singular(format!("relative residual {rel:.3e}")));
        }
        if rel > RESIDUAL_WARN {
            log::warn!("relative residual {rel:.3e} of the step solve");
        }
        Ok(sol)
    }
}

/// One step: returns `(Uⁿ, Φⁿ)`.
pub fn step_with_load(
    solver: &mut StepSolver,
    system: &CoupledSystem,
    tau: f64,
    u_prev: &[f64],
    load: &LoadVector,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n1 = system.n1();
    if u_prev.len() != n1 {
        return Err(Error::DimensionMismatch { expected: n1, got: u_prev.len() });
    }
    if load.interior.len() != n1 || load.boundary.len() != system.n2() {
        return Err(Error::DimensionMismatch { expected: n1 + system.n2(), got: load.len() });
    }
    solver.ensure(system, tau)?;
    let mut rhs = system.m_chi.mul_vec(u_prev);
    for (r, l) in rhs.iter_mut().zip(&load.interior) {
        *r = *r / tau + l;
    }
    rhs.extend_from_slice(&load.boundary);
    let mut x = solver.solve(&rhs)?;
    let phi = x.split_off(n1);
    Ok((x, phi))
}

pub fn step_variant_euler(
    solver: &mut StepSolver,
    disc: &Discretization,
    problem: &ProblemSpec,
    grid: &TimeGrid,
    n: usize,
    u_prev: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let load = step_load(disc, problem, grid, n, Method::Variant)?;
    step_with_load(solver, &disc.system, grid.tau(n), u_prev, &load)
}

pub fn step_classical_euler(
    solver: &mut StepSolver,
    disc: &Discretization,
    problem: &ProblemSpec,
    grid: &TimeGrid,
    n: usize,
    u_prev: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let load = step_load(disc, problem, grid, n, Method::Classical)?;
    step_with_load(solver, &disc.system, grid.tau(n), u_prev, &load)
}

/// Discrete trajectory. `phi[0]` is a zero placeholder: the flux exists for `n ≥ 1` only.
#[derive(Debug, Clone)]
pub struct TrajectorySolution {
    pub grid: TimeGrid,
    pub u: Vec<Vec<f64>>,
    pub phi: Vec<Vec<f64>>,
}

/// Runs the scheme over the grid starting from `U⁰ = P_h q`; `observe` sees every step.
pub fn run_with(
    disc: &Discretization,
    problem: &ProblemSpec,
    grid: &TimeGrid,
    method: Method,
    mut observe: impl FnMut(usize, &[f64], &[f64]) -> Result<()>,
) -> Result<()> {
    let u0 = project_l2_nodal(&disc.mesh, |x| (problem.q)(x))?.values;
    observe(0, &u0, &vec![0.0; disc.system.n2()])?;
    let mut solver = StepSolver::new(&disc.system, grid.tau(1))?;
    let mut u = u0;
    for n in 1..=grid.n_steps() {
        let wrap = |e| Error::Step { step: n, source: Box::new(e) };
        let load = step_load(disc, problem, grid, n, method).map_err(wrap)?;
        let (un, phin) = step_with_load(&mut solver, &disc.system, grid.tau(n), &u, &load).map_err(wrap)?;
        observe(n, &un, &phin)?;
        u = un;
    }
    Ok(())
}

pub fn run(disc: &Discretization, problem: &ProblemSpec, grid: &TimeGrid, method: Method) -> Result<TrajectorySolution> {
    let mut u = Vec::with_capacity(grid.n_steps() + 1);
    let mut phi = Vec::with_capacity(grid.n_steps() + 1);
    run_with(disc, problem, grid, method, |_, un, pn| {
        u.push(un.to_vec());
        phi.push(pn.to_vec());
        Ok(())
    })?;
    Ok(TrajectorySolution { grid: grid.clone(), u, phi })
}

//! Problem definitions: data, coefficients and (when known) exact solutions of the
//! tanh boundary layer, the L-shaped corner singularity and the rotating transport tests.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::error_analysis::ExactSolution;
use crate::fvm::{CoefficientSet, Matrix2, PecletNorm, UpwindScheme};
use crate::geometry::{dot, Point};
use crate::mesh::{build_lshape_mesh, build_uniform_square_mesh, refine_uniform, PrimalMesh, Square};
use crate::time::Method;

pub type ScalarField = Arc<dyn Fn(Point, f64) -> f64 + Send + Sync>;
/// Boundary data receiving the point, the outward unit normal and the time.
pub type BoundaryField = Arc<dyn Fn(Point, Point, f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Square(Square),
    /// `(−1/4, 1/4)² \ [0, 1/4] × [−1/4, 0]`.
    LShape,
}

impl Domain {
    pub fn mesh(&self, spacing: f64) -> Result<PrimalMesh> {
        match *self {
            Domain::Square(sq) => build_uniform_square_mesh(sq, spacing),
            Domain::LShape => build_lshape_mesh(spacing),
        }
    }
}

/// Everything needed to set up and run one experiment.
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub domain: Domain,
    pub coefficients: CoefficientSet,
    pub f: ScalarField,
    pub g1: ScalarField,
    pub g2: BoundaryField,
    pub q: Arc<dyn Fn(Point) -> f64 + Send + Sync>,
    pub t_end: f64,
    pub exact: Option<ExactSolution>,
    pub scheme: UpwindScheme,
    pub peclet_norm: PecletNorm,
    pub method: Method,
    /// Mesh spacing and time step of refinement level 0.
    pub base_spacing: f64,
    pub base_tau: f64,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("t_end", &self.t_end)
            .field("exact", &self.exact.is_some())
            .field("scheme", &self.scheme)
            .field("method", &self.method)
            .field("base_spacing", &self.base_spacing)
            .field("base_tau", &self.base_tau)
            .finish()
    }
}

impl ProblemSpec {
    /// Mesh of refinement level `level`: the base mesh refined uniformly `level` times.
    pub fn mesh(&self, level: usize) -> Result<PrimalMesh> {
        let mut m = self.domain.mesh(self.base_spacing)?;
        for _ in 0..level {
            m = refine_uniform(&m);
        }
        Ok(m)
    }

    pub fn tau(&self, level: usize) -> f64 {
        self.base_tau / 2f64.powi(level as i32)
    }

    pub fn spacing(&self, level: usize) -> f64 {
        self.base_spacing / 2f64.powi(level as i32)
    }

    /// The same problem for `u_λ = e^{−λt} u`, `u_{e,λ} = e^{−λt} u_e`: the reaction becomes
    /// `c + λ` and all data are scaled by `e^{−λt}`. Turns `div b / 2 + c ≥ 0` into a strict
    /// inequality.
    pub fn exponentially_shifted(&self, lambda: f64) -> ProblemSpec {
        let c0 = self.coefficients.clone();
        let (c1, c2) = (c0.clone(), c0.clone());
        let coefficients = CoefficientSet::new(move |x| c0.a(x), move |x| c1.b(x), move |x| c2.c(x) + lambda);
        let damp = move |t: f64| (-lambda * t).exp();
        let (f, g1, g2) = (self.f.clone(), self.g1.clone(), self.g2.clone());
        let exact = self.exact.clone().map(|ex| {
            let (u, gu, ue, gue) = (ex.u, ex.grad_u, ex.ue, ex.grad_ue);
            ExactSolution {
                u: Arc::new(move |x, t| damp(t) * u(x, t)),
                grad_u: Arc::new(move |x, t| {
                    let g = gu(x, t);
                    [damp(t) * g[0], damp(t) * g[1]]
                }),
                ue: Arc::new(move |x, t| damp(t) * ue(x, t)),
                grad_ue: Arc::new(move |x, t| {
                    let g = gue(x, t);
                    [damp(t) * g[0], damp(t) * g[1]]
                }),
            }
        });
        ProblemSpec {
            name: format!("{}-shifted", self.name),
            coefficients,
            f: Arc::new(move |x, t| damp(t) * f(x, t)),
            g1: Arc::new(move |x, t| damp(t) * g1(x, t)),
            g2: Arc::new(move |x, n, t| damp(t) * g2(x, n, t)),
            exact,
            ..self.clone()
        }
    }
}

/// `(A∇u − [b·n < 0] b u)·n − ∂_n u_e`: the flux jump datum consistent with the exact solutions.
fn flux_datum(coeffs: CoefficientSet, exact: ExactSolution) -> BoundaryField {
    Arc::new(move |x, n, t| {
        let a = coeffs.a(x);
        let g = (exact.grad_u)(x, t);
        let ag = [a[0][0] * g[0] + a[0][1] * g[1], a[1][0] * g[0] + a[1][1] * g[1]];
        let b = coeffs.b(x);
        let bn = dot(b, n);
        let conv = if bn < 0.0 { bn * (exact.u)(x, t) } else { 0.0 };
        dot(ag, n) - conv - exact.flux(x, n, t)
    })
}

/// Exterior field `(1 − t) log|x − c|`.
fn log_exterior(c: Point) -> (ScalarField, Arc<dyn Fn(Point, f64) -> Point + Send + Sync>) {
    let ue: ScalarField = Arc::new(move |x: Point, t| (1.0 - t) * 0.5 * ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)).ln());
    let grad = Arc::new(move |x: Point, t: f64| {
        let d = [x[0] - c[0], x[1] - c[1]];
        let r2 = d[0] * d[0] + d[1] * d[1];
        [(1.0 - t) * d[0] / r2, (1.0 - t) * d[1] / r2]
    });
    (ue, grad)
}

/// Key = value overrides; keys not consumed by the problem builder are errors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", no + 1)))?;
            let key = k.trim().to_string();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", no + 1)));
            }
            values.insert(key, v.trim().to_string());
        }
        Ok(Config { values })
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.values.insert(key.to_string(), value.to_string());
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(|s| s.as_str())
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn get_f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::Config(format!("{key}: '{v}' is not a finite number"))),
        }
    }

    pub fn get_usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => v.parse::<usize>().map_err(|_| Error::Config(format!("{key}: '{v}' is not a count"))),
        }
    }

    pub fn get_parsed<T: std::str::FromStr<Err = Error>>(&self, key: &str, default: T) -> Result<T> {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => v.parse(),
        }
    }
}

const COMMON_KEYS: [&str; 8] = ["t_end", "base_spacing", "base_tau", "upwind", "method", "peclet_norm", "levels", "output"];

fn check_keys(cfg: &Config, specific: &[&str]) -> Result<()> {
    for k in cfg.keys() {
        if !COMMON_KEYS.contains(&k) && !specific.contains(&k) {
            return Err(Error::Config(format!("unknown configuration key '{k}'")));
        }
    }
    Ok(())
}

impl std::str::FromStr for PecletNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "max" | "max_entry" | "maxentry" => Ok(PecletNorm::MaxEntry),
            "row" | "row_sum" | "rowsum" => Ok(PecletNorm::RowSum),
            other => Err(Error::Config(format!("unknown Peclet norm '{other}'"))),
        }
    }
}

fn apply_common(mut p: ProblemSpec, cfg: &Config) -> Result<ProblemSpec> {
    p.t_end = cfg.get_f64("t_end", p.t_end)?;
    p.base_spacing = cfg.get_f64("base_spacing", p.base_spacing)?;
    p.base_tau = cfg.get_f64("base_tau", p.base_tau)?;
    p.scheme = cfg.get_parsed("upwind", p.scheme)?;
    p.method = cfg.get_parsed("method", p.method)?;
    p.peclet_norm = cfg.get_parsed("peclet_norm", p.peclet_norm)?;
    if !(p.t_end > 0.0 && p.base_spacing > 0.0 && p.base_tau > 0.0) {
        return Err(Error::Config("t_end, base_spacing and base_tau must be positive".into()));
    }
    Ok(p)
}

/// `u = 0.5(1 + t)(1 − tanh((0.25 − x₁)/0.02))` on `(0, 1/2)²` with a strong convection
/// `b = (1000 x₁, 0)` and a diffusion jump across `x₂ = 0.25`.
pub fn problem_tanh_layer() -> ProblemSpec {
    problem_tanh_layer_with(&Config::default()).expect("default configuration is valid")
}

pub fn problem_tanh_layer_with(cfg: &Config) -> Result<ProblemSpec> {
    check_keys(cfg, &["alpha_low", "alpha_high", "convection", "reaction"])?;
    let alpha_low = cfg.get_f64("alpha_low", 0.42)?;
    let alpha_high = cfg.get_f64("alpha_high", 1.0)?;
    let beta = cfg.get_f64("convection", 1000.0)?;
    let c = cfg.get_f64("reaction", 5.0)?;
    let alpha = move |x: Point| if x[1] < 0.25 { alpha_low } else { alpha_high };
    let coefficients = CoefficientSet::new(
        move |x| {
            let a = alpha(x);
            [[a, 0.0], [0.0, a]]
        },
        move |x| [beta * x[0], 0.0],
        move |_| c,
    );
    const EPS: f64 = 0.02;
    let z = |x: Point| (0.25 - x[0]) / EPS;
    let u = Arc::new(move |x: Point, t: f64| 0.5 * (1.0 + t) * (1.0 - z(x).tanh()));
    let grad_u = Arc::new(move |x: Point, t: f64| {
        let s = 1.0 / z(x).cosh();
        [0.5 / EPS * (1.0 + t) * s * s, 0.0]
    });
    let (ue, grad_ue) = log_exterior([0.25, 0.25]);
    let exact = ExactSolution { u: u.clone(), grad_u: grad_u.clone(), ue: ue.clone(), grad_ue };
    let f: ScalarField = {
        let u = u.clone();
        Arc::new(move |x: Point, t: f64| {
            let zz = z(x);
            let s = 1.0 / zz.cosh();
            let ut = 0.5 * (1.0 - zz.tanh());
            let u1 = 0.5 / EPS * (1.0 + t) * s * s;
            let u11 = (1.0 + t) / (EPS * EPS) * s * s * zz.tanh();
            let uu = u(x, t);
            // ∂_t u − α ∂₁₁u + div(b u) + c u, with div b = β
            ut - alpha(x) * u11 + beta * uu + beta * x[0] * u1 + c * uu
        })
    };
    let g1: ScalarField = {
        let (u, ue) = (u.clone(), ue.clone());
        Arc::new(move |x, t| u(x, t) - ue(x, t))
    };
    let g2 = flux_datum(coefficients.clone(), exact.clone());
    let q = {
        let u = u.clone();
        Arc::new(move |x: Point| u(x, 0.0))
    };
    apply_common(
        ProblemSpec {
            name: "tanh".into(),
            domain: Domain::Square(Square { min: [0.0, 0.0], side: 0.5 }),
            coefficients,
            f,
            g1,
            g2,
            q,
            t_end: 1.0,
            exact: Some(exact),
            scheme: UpwindScheme::Full,
            peclet_norm: PecletNorm::MaxEntry,
            method: Method::Variant,
            base_spacing: 0.125,
            base_tau: 0.05,
        },
        cfg,
    )
}

/// Polar angle in `[0, 2π)`.
fn angle(x: Point) -> f64 {
    let p = x[1].atan2(x[0]);
    if p < 0.0 {
        p + 2.0 * PI
    } else {
        p
    }
}

/// `w = r^{2/3} sin(2φ/3)` with gradient and Hessian `(w₁₁, w₁₂, w₂₂)`.
fn corner_function(x: Point) -> (f64, Point, [f64; 3]) {
    let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
    if r == 0.0 {
        return (0.0, [f64::INFINITY, f64::INFINITY], [f64::INFINITY; 3]);
    }
    let p = angle(x);
    let w = r.powf(2.0 / 3.0) * (2.0 * p / 3.0).sin();
    let g = 2.0 / 3.0 * r.powf(-1.0 / 3.0);
    let grad = [-g * (p / 3.0).sin(), g * (p / 3.0).cos()];
    let h = 2.0 / 9.0 * r.powf(-4.0 / 3.0);
    let w11 = h * (4.0 * p / 3.0).sin();
    let w12 = -h * (4.0 * p / 3.0).cos();
    (w, grad, [w11, w12, -w11])
}

/// `u = (1 + t²) r^{2/3} sin(2φ/3)` on the L-shape with a variable full diffusion matrix.
pub fn problem_lshape() -> ProblemSpec {
    problem_lshape_with(&Config::default()).expect("default configuration is valid")
}

pub fn problem_lshape_with(cfg: &Config) -> Result<ProblemSpec> {
    check_keys(cfg, &[])?;
    let a_of = |x: Point| -> Matrix2 {
        let off = 160.0 * x[0] * x[1];
        [[10.0 + x[0].cos(), off], [off, 10.0 + x[1].sin()]]
    };
    let coefficients = CoefficientSet::new(a_of, |_| [0.0, 0.0], |_| 0.0);
    let u = Arc::new(|x: Point, t: f64| (1.0 + t * t) * corner_function(x).0);
    let grad_u = Arc::new(|x: Point, t: f64| {
        let g = corner_function(x).1;
        [(1.0 + t * t) * g[0], (1.0 + t * t) * g[1]]
    });
    let (ue, grad_ue) = log_exterior([-0.125, 0.125]);
    let exact = ExactSolution { u: u.clone(), grad_u, ue: ue.clone(), grad_ue };
    let f: ScalarField = Arc::new(move |x: Point, t: f64| {
        let (w, g, [w11, w12, w22]) = corner_function(x);
        let a = a_of(x);
        // div(A∇w) = (∂₁A₁₁ + ∂₂A₂₁) w₁ + (∂₁A₁₂ + ∂₂A₂₂) w₂ + A : ∇²w
        let div = (-x[0].sin() + 160.0 * x[0]) * g[0]
            + (160.0 * x[1] + x[1].cos()) * g[1]
            + a[0][0] * w11
            + 2.0 * a[0][1] * w12
            + a[1][1] * w22;
        2.0 * t * w - (1.0 + t * t) * div
    });
    let g1: ScalarField = {
        let (u, ue) = (u.clone(), ue.clone());
        Arc::new(move |x, t| u(x, t) - ue(x, t))
    };
    let g2 = flux_datum(coefficients.clone(), exact.clone());
    apply_common(
        ProblemSpec {
            name: "lshape".into(),
            domain: Domain::LShape,
            coefficients,
            f,
            g1,
            g2,
            q: Arc::new(|x| corner_function(x).0),
            t_end: 1.0,
            exact: Some(exact),
            scheme: UpwindScheme::None,
            peclet_norm: PecletNorm::MaxEntry,
            method: Method::Variant,
            base_spacing: 0.125,
            base_tau: 0.05,
        },
        cfg,
    )
}

/// Two switched-off sources transported by the rotating field `b = (0.25 − 4x₂, 4x₁)`.
pub fn problem_transport() -> ProblemSpec {
    problem_transport_with(&Config::default()).expect("default configuration is valid")
}

pub fn problem_transport_with(cfg: &Config) -> Result<ProblemSpec> {
    check_keys(cfg, &["alpha_low", "alpha_high", "alpha_threshold"])?;
    let alpha_low = cfg.get_f64("alpha_low", 1e-2)?;
    let alpha_high = cfg.get_f64("alpha_high", 1e-3)?;
    let threshold = cfg.get_f64("alpha_threshold", 0.25)?;
    let coefficients = CoefficientSet::new(
        move |x| {
            let a = if x[0] < threshold { alpha_low } else { alpha_high };
            [[a, 0.0], [0.0, a]]
        },
        |x| [0.25 - 4.0 * x[1], 4.0 * x[0]],
        |_| 1.0,
    );
    apply_common(
        ProblemSpec {
            name: "transport".into(),
            domain: Domain::Square(Square { min: [-0.25, -0.25], side: 0.5 }),
            coefficients,
            f: Arc::new(transport_source),
            g1: Arc::new(|_, _| 0.0),
            g2: Arc::new(|_, _, _| 0.0),
            q: Arc::new(|_| 0.0),
            t_end: 1.0,
            exact: None,
            scheme: UpwindScheme::Full,
            peclet_norm: PecletNorm::MaxEntry,
            method: Method::Variant,
            base_spacing: 0.125,
            base_tau: 0.05,
        },
        cfg,
    )
}

/// Source rectangles `[x₀, x₁] × [y₀, y₁]` of the transport problem.
pub const TRANSPORT_SOURCES: [[f64; 4]; 2] = [[-0.2, -0.1, -0.2, -0.05], [-0.2, -0.1, 0.05, 0.2]];

pub fn transport_source(x: Point, t: f64) -> f64 {
    let inside = |r: [f64; 4]| x[0] >= r[0] && x[0] <= r[1] && x[1] >= r[2] && x[1] <= r[3];
    if inside(TRANSPORT_SOURCES[0]) && t < 0.25 {
        50.0
    } else if inside(TRANSPORT_SOURCES[1]) && t < 0.5 {
        25.0
    } else {
        0.0
    }
}

pub const PROBLEM_NAMES: [&str; 3] = ["tanh", "lshape", "transport"];

pub fn problem_by_name(name: &str, cfg: &Config) -> Result<ProblemSpec> {
    match name {
        "tanh" => problem_tanh_layer_with(cfg),
        "lshape" => problem_lshape_with(cfg),
        "transport" => problem_transport_with(cfg),
        other => Err(Error::Config(format!("unknown problem '{other}' (expected one of {})", PROBLEM_NAMES.join(", ")))),
    }
}

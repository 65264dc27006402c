//! Gauss rules on intervals and triangles, plus an adaptive Gauss-Kronrod
//! integrator used for reference values.

use crate::geometry::{lerp, Point};

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out.reverse();
    out
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let nf = n as f64;
    (p1, nf * (x * p1 - p0) / (x * x - 1.0))
}

/// Gauss-Legendre rule mapped to `[0, 1]` (weights sum to 1).
#[derive(Debug, Clone)]
pub struct UnitGauss {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl UnitGauss {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n)
            .into_iter()
            .map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w))
            .unzip();
        UnitGauss { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// Integrate `f` over the straight segment `a -> b`.
    pub fn integrate_segment(&self, a: Point, b: Point, mut f: impl FnMut(Point) -> f64) -> f64 {
        let len = crate::geometry::dist(a, b);
        self.iter().map(|(s, w)| w * f(lerp(a, b, s))).sum::<f64>() * len
    }

    /// Integrate `f` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.iter().map(|(s, w)| w * f(a + s * (b - a))).sum::<f64>() * (b - a)
    }
}

/// Collapsed (conical product) Gauss rule on the reference triangle.
/// Points are barycentric triples, weights sum to 1.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl TriangleRule {
    /// Rule exact for polynomials of total degree `degree`.
    pub fn with_degree(degree: usize) -> Self {
        let nu = (degree + 2).div_ceil(2).max(1);
        let nv = (degree + 1).div_ceil(2).max(1);
        let gu = UnitGauss::new(nu);
        let gv = UnitGauss::new(nv);
        let mut points = Vec::with_capacity(nu * nv);
        let mut weights = Vec::with_capacity(nu * nv);
        for (u, wu) in gu.iter() {
            for (v, wv) in gv.iter() {
                let x = u;
                let y = v * (1.0 - u);
                points.push([1.0 - x - y, x, y]);
                // reference area is 1/2; normalise weights to sum 1
                weights.push(2.0 * wu * wv * (1.0 - u));
            }
        }
        TriangleRule { points, weights, degree }
    }

    /// Integrate `f` over the triangle `(a, b, c)`; orientation does not matter.
    pub fn integrate(&self, a: Point, b: Point, c: Point, mut f: impl FnMut(Point, [f64; 3]) -> f64) -> f64 {
        let area = crate::geometry::signed_area(a, b, c).abs();
        let mut s = 0.0;
        for (l, w) in self.points.iter().zip(&self.weights) {
            let x = [
                l[0] * a[0] + l[1] * b[0] + l[2] * c[0],
                l[0] * a[1] + l[1] * b[1] + l[2] * c[1],
            ];
            s += w * f(x, *l);
        }
        s * area
    }
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, (k - g).abs() * h)
}

/// Adaptive Gauss-Kronrod (7/15) integration of `f` over `[a, b]` to absolute
/// tolerance `tol`, always splitting the interval with the largest error estimate.
/// Endpoint singularities of integrable type are handled by bisection; the work is
/// capped, and the tolerance is never tightened below round-off.
pub fn adaptive_integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    const MAX_INTERVALS: usize = 4000;
    #[derive(PartialEq)]
    struct Piece {
        err: f64,
        a: f64,
        b: f64,
        val: f64,
    }
    impl Eq for Piece {}
    impl PartialOrd for Piece {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Piece {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            self.err.total_cmp(&other.err)
        }
    }
    let (val, err) = gk15(&mut f, a, b);
    let mut heap = std::collections::BinaryHeap::new();
    heap.push(Piece { err, a, b, val });
    let (mut total, mut total_err) = (val, err);
    while heap.len() < MAX_INTERVALS {
        if total_err <= tol.max(50.0 * f64::EPSILON * total.abs()) {
            break;
        }
        let worst = heap.pop().unwrap();
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a.min(worst.b) || m >= worst.a.max(worst.b) {
            heap.push(worst);
            break;
        }
        let (lv, le) = gk15(&mut f, worst.a, m);
        let (rv, re) = gk15(&mut f, m, worst.b);
        total += lv + rv - worst.val;
        total_err += le + re - worst.err;
        heap.push(Piece { err: le, a: worst.a, b: m, val: lv });
        heap.push(Piece { err: re, a: m, b: worst.b, val: rv });
    }
    // re-sum to drop the drift of the running total
    heap.iter().map(|p| p.val).sum()
}

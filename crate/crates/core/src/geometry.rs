//! Small planar vector helpers. Points and vectors are plain `[f64; 2]`.

pub type Point = [f64; 2];

#[inline]
pub fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn scale(a: Point, s: f64) -> Point {
    [a[0] * s, a[1] * s]
}

#[inline]
pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// z-component of the 3D cross product.
#[inline]
pub fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
pub fn dist(a: Point, b: Point) -> f64 {
    norm(sub(a, b))
}

#[inline]
pub fn midpoint(a: Point, b: Point) -> Point {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

#[inline]
pub fn lerp(a: Point, b: Point, s: f64) -> Point {
    [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
}

/// Signed area, positive for counterclockwise orientation.
#[inline]
pub fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * cross(sub(b, a), sub(c, a))
}

pub fn centroid(a: Point, b: Point, c: Point) -> Point {
    [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
}

/// Shoelace area of a simple polygon (signed).
pub fn polygon_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for k in 0..n {
        s += cross(poly[k], poly[(k + 1) % n]);
    }
    0.5 * s
}

/// Rotate by -90 degrees: for a counterclockwise boundary this is the outward direction.
#[inline]
pub fn right_perp(a: Point) -> Point {
    [a[1], -a[0]]
}

/// Straight segment with cached frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
    pub length: f64,
    pub tangent: Point,
    /// Unit normal to the right of the direction a -> b.
    pub normal: Point,
}

impl Segment {
    pub fn new(a: Point, b: Point) -> Self {
        let d = sub(b, a);
        let length = norm(d);
        let tangent = if length > 0.0 { scale(d, 1.0 / length) } else { [0.0, 0.0] };
        Segment { a, b, length, tangent, normal: right_perp(tangent) }
    }

    /// Point at arc-length parameter `s` in `[0, length]`.
    #[inline]
    pub fn at(&self, s: f64) -> Point {
        add(self.a, scale(self.tangent, s))
    }

    #[inline]
    pub fn midpoint(&self) -> Point {
        midpoint(self.a, self.b)
    }

    /// Local coordinates (along, across) of `x` in the frame of this segment.
    #[inline]
    pub fn local(&self, x: Point) -> (f64, f64) {
        let r = sub(x, self.a);
        (dot(r, self.tangent), dot(r, self.normal))
    }

    pub fn distance_to_point(&self, x: Point) -> f64 {
        let (p, q) = self.local(x);
        if p <= 0.0 {
            dist(x, self.a)
        } else if p >= self.length {
            dist(x, self.b)
        } else {
            q.abs()
        }
    }

    /// Distance between two segments that do not cross.
    pub fn distance_to_segment(&self, other: &Segment) -> f64 {
        self.distance_to_point(other.a)
            .min(self.distance_to_point(other.b))
            .min(other.distance_to_point(self.a))
            .min(other.distance_to_point(self.b))
    }

    pub fn split(&self) -> [Segment; 2] {
        let m = self.midpoint();
        [Segment::new(self.a, m), Segment::new(m, self.b)]
    }
}

/// Barycentric coordinates of `x` with respect to triangle `(a, b, c)`.
pub fn barycentric(x: Point, a: Point, b: Point, c: Point) -> [f64; 3] {
    let area = signed_area(a, b, c);
    let l0 = signed_area(x, b, c) / area;
    let l1 = signed_area(a, x, c) / area;
    [l0, l1, 1.0 - l0 - l1]
}

/// Gradients of the three barycentric coordinate functions (constant on the triangle).
pub fn barycentric_gradients(a: Point, b: Point, c: Point) -> [Point; 3] {
    let two_area = 2.0 * signed_area(a, b, c);
    [
        scale(right_perp(sub(c, b)), -1.0 / two_area),
        scale(right_perp(sub(a, c)), -1.0 / two_area),
        scale(right_perp(sub(b, a)), -1.0 / two_area),
    ]
}

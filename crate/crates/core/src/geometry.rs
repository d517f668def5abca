//! Oriented ellipses and the predicates the simulators are built on.
//!
//! An ellipse with centre `z`, semi-axes `a`, `b` and tilt `gamma` is the set
//! `z + R(gamma) * (a r cos t, b r sin t)` for `r` in `[0, 1]`. Membership is
//! closed; the overlap predicate asks for a positive-area intersection.

use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative depth below which two sets are treated as merely touching.
pub const OVERLAP_TOLERANCE: f64 = 1e-9;

/// Boundary samples used when the overlap Newton iteration does not settle.
const FALLBACK_SAMPLES: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm2(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// Rotates counter-clockwise by the angle whose cosine and sine are given.
    pub fn rotate(self, cos: f64, sin: f64) -> Point {
        Point::new(cos * self.x - sin * self.y, sin * self.x + cos * self.y)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// Shape parameters of an ellipse, independent of its position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shape {
    pub a: f64,
    pub b: f64,
    pub gamma: f64,
}

impl Shape {
    pub fn new(a: f64, b: f64, gamma: f64) -> Result<Self> {
        validate_shape(a, b, gamma)?;
        Ok(Shape { a, b, gamma })
    }

    pub fn area(&self) -> f64 {
        PI * self.a * self.b
    }

    /// Radius of the smallest centred ball containing the ellipse.
    pub fn radius(&self) -> f64 {
        self.a.max(self.b)
    }

    /// Maximal horizontal distance from the centre to a point of the ellipse.
    pub fn reach(&self) -> f64 {
        let (c, s) = (self.gamma.cos(), self.gamma.sin());
        (self.a * self.a * c * c + self.b * self.b * s * s).sqrt()
    }

    /// Offset from the centre to the rightmost point.
    pub fn extreme_offset(&self) -> Point {
        let theta = (-(self.b / self.a) * self.gamma.tan()).atan();
        let local = Point::new(self.a * theta.cos(), self.b * theta.sin());
        local.rotate(self.gamma.cos(), self.gamma.sin())
    }

    /// The same shape reflected through the vertical axis.
    pub fn mirrored(&self) -> Shape {
        Shape {
            gamma: -self.gamma,
            ..*self
        }
    }
}

fn validate_shape(a: f64, b: f64, gamma: f64) -> Result<()> {
    if !(a > 0.0 && a.is_finite()) || !(b > 0.0 && b.is_finite()) {
        return Err(Error::domain(format!(
            "semi-axes must be positive and finite, got a = {a}, b = {b}"
        )));
    }
    if !(gamma.abs() < FRAC_PI_2) {
        return Err(Error::domain(format!(
            "tilt must lie in (-pi/2, pi/2), got {gamma}"
        )));
    }
    Ok(())
}

/// Angle of the rightmost boundary point and its horizontal offset `D`.
///
/// ```
/// let (theta, d) = slfv::geometry::max_horizontal_offset(2.0, 1.0, 0.0).unwrap();
/// assert_eq!((theta, d), (0.0, 2.0));
/// ```
pub fn max_horizontal_offset(a: f64, b: f64, gamma: f64) -> Result<(f64, f64)> {
    validate_shape(a, b, gamma)?;
    let theta = (-(b / a) * gamma.tan()).atan();
    let d = Shape { a, b, gamma }.reach();
    Ok((theta, d))
}

/// Axis-aligned rectangle `[min.x, max.x] x [min.y, max.y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        if !(x0 < x1 && y0 < y1) || ![x0, y0, x1, y1].iter().all(|v| v.is_finite()) {
            return Err(Error::domain(format!(
                "rectangle [{x0}, {x1}] x [{y0}, {y1}] is degenerate"
            )));
        }
        Ok(Rect {
            min: Point::new(x0, y0),
            max: Point::new(x1, y1),
        })
    }

    /// Square of half-side `r` around `c`.
    pub fn around(c: Point, r: f64) -> Rect {
        Rect {
            min: Point::new(c.x - r, c.y - r),
            max: Point::new(c.x + r, c.y + r),
        }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn contains_rect(&self, o: &Rect) -> bool {
        self.min.x <= o.min.x && self.min.y <= o.min.y && self.max.x >= o.max.x && self.max.y >= o.max.y
    }

    pub fn dilate(&self, r: f64) -> Rect {
        Rect {
            min: Point::new(self.min.x - r, self.min.y - r),
            max: Point::new(self.max.x + r, self.max.y + r),
        }
    }

    pub fn union(&self, o: &Rect) -> Rect {
        Rect {
            min: Point::new(self.min.x.min(o.min.x), self.min.y.min(o.min.y)),
            max: Point::new(self.max.x.max(o.max.x), self.max.y.max(o.max.y)),
        }
    }

    /// Euclidean distance from `p` to the closed rectangle.
    pub fn distance_to(&self, p: Point) -> f64 {
        let dx = (self.min.x - p.x).max(0.0).max(p.x - self.max.x);
        let dy = (self.min.y - p.y).max(0.0).max(p.y - self.max.y);
        dx.hypot(dy)
    }

    /// True when the open interiors intersect.
    pub fn overlaps(&self, o: &Rect) -> bool {
        self.min.x < o.max.x && o.min.x < self.max.x && self.min.y < o.max.y && o.min.y < self.max.y
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        Point::new(
            self.min.x + self.width() * rng.random::<f64>(),
            self.min.y + self.height() * rng.random::<f64>(),
        )
    }

    pub fn corners(&self) -> [Point; 4] {
        [
            self.min,
            Point::new(self.max.x, self.min.y),
            self.max,
            Point::new(self.min.x, self.max.y),
        ]
    }
}

/// An ellipse placed in the plane. The tilt's cosine and sine are cached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    center: Point,
    shape: Shape,
    cos: f64,
    sin: f64,
}

impl Ellipse {
    pub fn new(center: Point, a: f64, b: f64, gamma: f64) -> Result<Self> {
        Ok(Self::from_shape(center, Shape::new(a, b, gamma)?))
    }

    /// Places an already validated shape.
    pub fn from_shape(center: Point, shape: Shape) -> Self {
        Ellipse {
            center,
            shape,
            cos: shape.gamma.cos(),
            sin: shape.gamma.sin(),
        }
    }

    /// Disk of radius `r`.
    pub fn disk(center: Point, r: f64) -> Result<Self> {
        Self::new(center, r, r, 0.0)
    }

    pub fn center(&self) -> Point {
        self.center
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn a(&self) -> f64 {
        self.shape.a
    }

    pub fn b(&self) -> f64 {
        self.shape.b
    }

    pub fn gamma(&self) -> f64 {
        self.shape.gamma
    }

    pub fn area(&self) -> f64 {
        self.shape.area()
    }

    pub fn radius(&self) -> f64 {
        self.shape.radius()
    }

    /// Largest abscissa of a point of the ellipse.
    pub fn max_x(&self) -> f64 {
        self.center.x + self.shape.reach()
    }

    /// The point attaining [`Ellipse::max_x`].
    pub fn extreme_point(&self) -> Point {
        self.center + self.shape.extreme_offset()
    }

    /// Image of `p` under the affine map sending the ellipse to the unit disk.
    pub fn to_local(&self, p: Point) -> Point {
        let q = (p - self.center).rotate(self.cos, -self.sin);
        Point::new(q.x / self.shape.a, q.y / self.shape.b)
    }

    /// Inverse of [`Ellipse::to_local`].
    pub fn from_local(&self, q: Point) -> Point {
        Point::new(q.x * self.shape.a, q.y * self.shape.b).rotate(self.cos, self.sin) + self.center
    }

    pub fn contains(&self, p: Point) -> bool {
        self.to_local(p).norm2() <= 1.0
    }

    pub fn boundary_point(&self, theta: f64) -> Point {
        self.from_local(Point::new(theta.cos(), theta.sin()))
    }

    /// Tight axis-aligned bounding box.
    pub fn bbox(&self) -> Rect {
        let (a, b) = (self.shape.a, self.shape.b);
        let hx = (a * a * self.cos * self.cos + b * b * self.sin * self.sin).sqrt();
        let hy = (a * a * self.sin * self.sin + b * b * self.cos * self.cos).sqrt();
        Rect {
            min: Point::new(self.center.x - hx, self.center.y - hy),
            max: Point::new(self.center.x + hx, self.center.y + hy),
        }
    }

    /// Bounding box of the bounding ball.
    pub fn ball_box(&self) -> Rect {
        Rect::around(self.center, self.radius())
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let theta = 2.0 * PI * rng.random::<f64>();
        let r = rng.random::<f64>().sqrt();
        self.from_local(Point::new(r * theta.cos(), r * theta.sin()))
    }

    /// Whether the intersection with `other` has positive area.
    pub fn intersects_positively(&self, other: &Ellipse) -> bool {
        let d2 = (other.center - self.center).norm2();
        let outer = self.radius() + other.radius();
        if d2 >= outer * outer {
            return false;
        }
        let inner = self.shape.a.min(self.shape.b) + other.shape.a.min(other.shape.b);
        if d2 < inner * inner {
            return true;
        }
        // Evaluate in a canonical order so the predicate is exactly symmetric.
        let (e1, e2) = if canonical_key(self) <= canonical_key(other) {
            (self, other)
        } else {
            (other, self)
        };
        overlap_depth(e1, e2) < 1.0 - OVERLAP_TOLERANCE
    }

    /// Whether the intersection with the rectangle has positive area.
    pub fn overlaps_rect(&self, r: &Rect) -> bool {
        if !self.bbox().overlaps(r) {
            return false;
        }
        if r.contains(self.center) {
            return true;
        }
        // In local coordinates the rectangle becomes a parallelogram; the
        // sets overlap iff it comes strictly closer than 1 to the origin.
        let c = r.corners().map(|p| self.to_local(p));
        polygon_distance(&c) < 1.0 - OVERLAP_TOLERANCE
    }
}

fn canonical_key(e: &Ellipse) -> [f64; 5] {
    [e.center.x, e.center.y, e.shape.a, e.shape.b, e.shape.gamma]
}

/// Minimum over the closed disk `|q| <= 1` of the quadratic form that equals
/// 1 on the boundary of `e2` mapped into `e1`'s unit-disk frame. Values
/// below 1 mean the interiors meet.
fn overlap_depth(e1: &Ellipse, e2: &Ellipse) -> f64 {
    let c = e1.to_local(e2.center);
    if c.norm2() <= 1.0 {
        return 0.0;
    }
    let q = local_form(e1, e2);
    match secular_minimum(&q, c) {
        Some(v) => v,
        None => sampled_minimum(&q, c),
    }
}

/// Matrix of `e2`'s quadratic form expressed in `e1`'s local coordinates.
fn local_form(e1: &Ellipse, e2: &Ellipse) -> [f64; 3] {
    let delta = e2.shape.gamma - e1.shape.gamma;
    let (c, s) = (delta.cos(), delta.sin());
    let ia = 1.0 / (e2.shape.a * e2.shape.a);
    let ib = 1.0 / (e2.shape.b * e2.shape.b);
    let m11 = c * c * ia + s * s * ib;
    let m22 = s * s * ia + c * c * ib;
    let m12 = c * s * (ia - ib);
    let (a1, b1) = (e1.shape.a, e1.shape.b);
    [a1 * a1 * m11, a1 * b1 * m12, b1 * b1 * m22]
}

fn form(q: &[f64; 3], v: Point) -> f64 {
    q[0] * v.x * v.x + 2.0 * q[1] * v.x * v.y + q[2] * v.y * v.y
}

/// Solves `(Q + lambda I) v = rhs`.
fn shifted_solve(q: &[f64; 3], lambda: f64, rhs: Point) -> Point {
    let (p11, p12, p22) = (q[0] + lambda, q[1], q[2] + lambda);
    let det = p11 * p22 - p12 * p12;
    Point::new((p22 * rhs.x - p12 * rhs.y) / det, (p11 * rhs.y - p12 * rhs.x) / det)
}

/// Minimises `(u - c)^T Q (u - c)` over `|u| <= 1` for `|c| > 1`.
///
/// The minimiser is `u(lambda) = (Q + lambda I)^{-1} Q c` with `|u| = 1`.
/// `1/|u(lambda)|` is concave and increasing in `lambda >= 0`, so Newton
/// started at 0 climbs monotonically to the root.
fn secular_minimum(q: &[f64; 3], c: Point) -> Option<f64> {
    let qc = Point::new(q[0] * c.x + q[1] * c.y, q[1] * c.x + q[2] * c.y);
    let mut lambda = 0.0_f64;
    for _ in 0..100 {
        let u = shifted_solve(q, lambda, qc);
        let n = u.norm();
        let h = 1.0 / n - 1.0;
        if h.abs() <= 1e-14 {
            let diff = shifted_solve(q, lambda, c) * (-lambda);
            let v = form(q, diff);
            return v.is_finite().then_some(v);
        }
        let du = shifted_solve(q, lambda, u) * -1.0;
        let dh = -u.dot(du) / (n * n * n);
        if !(dh > 0.0) || !dh.is_finite() {
            return None;
        }
        let next = lambda - h / dh;
        if !next.is_finite() || next < lambda {
            return None;
        }
        lambda = next;
    }
    None
}

fn sampled_minimum(q: &[f64; 3], c: Point) -> f64 {
    (0..FALLBACK_SAMPLES)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / FALLBACK_SAMPLES as f64;
            form(q, Point::new(t.cos(), t.sin()) - c)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Distance from the origin to a convex polygon given in cyclic order.
fn polygon_distance(v: &[Point]) -> f64 {
    let n = v.len();
    let mut sign = 0.0;
    let mut inside = true;
    for i in 0..n {
        let (p, q) = (v[i], v[(i + 1) % n]);
        let cross = (q.x - p.x) * (-p.y) - (q.y - p.y) * (-p.x);
        if cross != 0.0 {
            if sign == 0.0 {
                sign = cross.signum();
            } else if cross.signum() != sign {
                inside = false;
                break;
            }
        }
    }
    if inside {
        return 0.0;
    }
    (0..n)
        .map(|i| segment_distance(v[i], v[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

fn segment_distance(p: Point, q: Point) -> f64 {
    let d = q - p;
    let len2 = d.norm2();
    let t = if len2 > 0.0 {
        (-p.dot(d) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p + d * t).norm()
}

pub fn contains(e: &Ellipse, p: Point) -> bool {
    e.contains(p)
}

pub fn intersects_positively(e1: &Ellipse, e2: &Ellipse) -> bool {
    e1.intersects_positively(e2)
}

pub fn sample_uniform<R: Rng + ?Sized>(e: &Ellipse, rng: &mut R) -> Point {
    e.sample_uniform(rng)
}

pub fn area(e: &Ellipse) -> f64 {
    e.area()
}

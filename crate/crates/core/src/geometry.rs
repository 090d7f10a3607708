//! Convex spatial domains and the exit-time primitives `t_±(x, v)` and `τ(x, v)`.
//!
//! Domains live in one or two dimensions. One-dimensional positions and velocities are
//! carried in the `x` component of a [`Vec2`]; the `y` component is ignored.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use crate::{Error, Result};

/// Relative tolerance (in units of the diameter) for "on the boundary".
pub const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    /// A one-dimensional value.
    pub const fn scalar(x: f64) -> Self {
        Vec2 { x, y: 0.0 }
    }

    pub fn polar(r: f64, angle: f64) -> Self {
        Vec2::new(r * angle.cos(), r * angle.sin())
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn norm2(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// A position/velocity pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub x: Vec2,
    pub v: Vec2,
}

impl PhasePoint {
    pub const fn new(x: Vec2, v: Vec2) -> Self {
        PhasePoint { x, v }
    }

    pub fn reversed(self) -> Self {
        PhasePoint::new(self.x, -self.v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitTimes {
    pub t_minus: f64,
    pub t_plus: f64,
    pub tau: f64,
    /// Tangent boundary chord (`τ ≈ 0`); a measure-zero set.
    pub grazing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryNode {
    pub x: Vec2,
    /// Unit outward normal.
    pub normal: Vec2,
    /// Surface-measure quadrature weight.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Interval {
        a: f64,
        b: f64,
    },
    Disk {
        center: Vec2,
        radius: f64,
    },
    /// Counterclockwise, strictly convex. `normals[i]`/`offsets[i]` describe the edge from
    /// vertex `i` to `i + 1` as the half-plane `normal · y ≤ offset`.
    Polygon {
        vertices: Vec<Vec2>,
        normals: Vec<Vec2>,
        offsets: Vec<f64>,
    },
}

/// A bounded convex open set in one or two dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialDomain {
    shape: Shape,
    diameter: f64,
}

impl SpatialDomain {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(Error::InvalidDomain(format!(
                "interval needs b > a, got ({a}, {b})"
            )));
        }
        Ok(SpatialDomain {
            shape: Shape::Interval { a, b },
            diameter: b - a,
        })
    }

    pub fn disk(center: Vec2, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0 && center.x.is_finite() && center.y.is_finite()) {
            return Err(Error::InvalidDomain(format!(
                "disk radius must be positive, got {radius}"
            )));
        }
        Ok(SpatialDomain {
            shape: Shape::Disk { center, radius },
            diameter: 2.0 * radius,
        })
    }

    pub fn unit_disk() -> Self {
        Self::disk(Vec2::ZERO, 1.0).expect("unit disk is valid")
    }

    pub fn polygon(vertices: Vec<Vec2>) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(Error::InvalidDomain(format!(
                "polygon needs at least 3 vertices, got {n}"
            )));
        }
        let mut normals = Vec::with_capacity(n);
        let mut offsets = Vec::with_capacity(n);
        for i in 0..n {
            let p = vertices[i];
            let q = vertices[(i + 1) % n];
            let r = vertices[(i + 2) % n];
            let e = q - p;
            let len = e.norm();
            if !(len > 0.0) {
                return Err(Error::InvalidDomain(format!(
                    "degenerate edge at vertex {i}"
                )));
            }
            if e.cross(r - q) <= 0.0 {
                return Err(Error::InvalidDomain(
                    "polygon must be strictly convex and counterclockwise".into(),
                ));
            }
            let nrm = Vec2::new(e.y / len, -e.x / len);
            normals.push(nrm);
            offsets.push(nrm.dot(p));
        }
        // Turning number 1: total exterior angle 2π rules out self-overlapping stars.
        let turning: f64 = (0..n)
            .map(|i| {
                let e0 = vertices[(i + 1) % n] - vertices[i];
                let e1 = vertices[(i + 2) % n] - vertices[(i + 1) % n];
                e0.cross(e1).atan2(e0.dot(e1))
            })
            .sum();
        if (turning - 2.0 * PI).abs() > 1e-9 {
            return Err(Error::InvalidDomain("polygon winds more than once".into()));
        }
        let mut diameter: f64 = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                diameter = diameter.max((vertices[i] - vertices[j]).norm());
            }
        }
        Ok(SpatialDomain {
            shape: Shape::Polygon {
                vertices,
                normals,
                offsets,
            },
            diameter,
        })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn dim(&self) -> usize {
        match self.shape {
            Shape::Interval { .. } => 1,
            _ => 2,
        }
    }

    /// Euclidean length of a velocity as seen by this domain's dimension.
    pub fn speed(&self, v: Vec2) -> f64 {
        match self.shape {
            Shape::Interval { .. } => v.x.abs(),
            _ => v.norm(),
        }
    }

    /// Projects a vector onto the domain's dimension (drops `y` in 1D).
    pub fn embed(&self, v: Vec2) -> Vec2 {
        match self.shape {
            Shape::Interval { .. } => Vec2::scalar(v.x),
            _ => v,
        }
    }

    /// Lebesgue measure of the domain.
    pub fn volume(&self) -> f64 {
        match &self.shape {
            Shape::Interval { a, b } => b - a,
            Shape::Disk { radius, .. } => PI * radius * radius,
            Shape::Polygon { vertices, .. } => {
                let n = vertices.len();
                0.5 * (0..n)
                    .map(|i| vertices[i].cross(vertices[(i + 1) % n]))
                    .sum::<f64>()
            }
        }
    }

    /// Measure of the boundary (2 for an interval: counting measure on the endpoints).
    pub fn boundary_measure(&self) -> f64 {
        match &self.shape {
            Shape::Interval { .. } => 2.0,
            Shape::Disk { radius, .. } => 2.0 * PI * radius,
            Shape::Polygon { vertices, .. } => {
                let n = vertices.len();
                (0..n)
                    .map(|i| (vertices[(i + 1) % n] - vertices[i]).norm())
                    .sum()
            }
        }
    }

    /// Signed distance-like violation: positive outside, `≤ 0` in the closure.
    fn excess(&self, y: Vec2) -> f64 {
        match &self.shape {
            Shape::Interval { a, b } => (a - y.x).max(y.x - b),
            Shape::Disk { center, radius } => (y - *center).norm() - radius,
            Shape::Polygon {
                normals, offsets, ..
            } => normals
                .iter()
                .zip(offsets)
                .map(|(n, h)| n.dot(y) - h)
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Exact closed-set membership, without tolerance.
    pub fn contains(&self, y: Vec2) -> bool {
        self.excess(y) <= 0.0
    }

    /// Closure membership up to [`BOUNDARY_TOL`]` · d`.
    pub fn contains_closure(&self, y: Vec2) -> bool {
        self.excess(y) <= BOUNDARY_TOL * self.diameter
    }

    /// Pulls a point that sits marginally outside back onto the boundary.
    pub fn clamp_to_closure(&self, y: Vec2) -> Vec2 {
        if self.excess(y) <= 0.0 {
            return y;
        }
        match &self.shape {
            Shape::Interval { a, b } => Vec2::scalar(y.x.clamp(*a, *b)),
            Shape::Disk { center, radius } => {
                let d = y - *center;
                *center + d * (radius / d.norm())
            }
            Shape::Polygon {
                normals, offsets, ..
            } => {
                let mut p = y;
                for _ in 0..4 {
                    for (n, h) in normals.iter().zip(offsets) {
                        let e = n.dot(p) - h;
                        if e > 0.0 {
                            p = p - *n * e;
                        }
                    }
                }
                p
            }
        }
    }

    /// Time to leave the domain moving forward from `x` with velocity `v` (`t_+`).
    fn forward_exit(&self, x: Vec2, v: Vec2) -> f64 {
        let t = match &self.shape {
            Shape::Interval { a, b } => {
                if v.x > 0.0 {
                    (b - x.x) / v.x
                } else {
                    (a - x.x) / v.x
                }
            }
            Shape::Disk { center, radius } => {
                let d = x - *center;
                let a = v.norm2();
                let half_b = d.dot(v);
                let c = d.norm2() - radius * radius;
                let sq = (half_b * half_b - a * c).max(0.0).sqrt();
                if half_b <= 0.0 {
                    (sq - half_b) / a
                } else {
                    -c / (half_b + sq)
                }
            }
            Shape::Polygon {
                normals, offsets, ..
            } => {
                let mut best = f64::INFINITY;
                for (n, h) in normals.iter().zip(offsets) {
                    let rate = n.dot(v);
                    if rate > 0.0 {
                        best = best.min((h - n.dot(x)) / rate);
                    }
                }
                best
            }
        };
        t.max(0.0)
    }

    /// `t_±(x, v)` and `τ = t_- + t_+`.
    pub fn exit_times(&self, p: PhasePoint) -> Result<ExitTimes> {
        let v = self.embed(p.v);
        let speed = self.speed(v);
        if !(speed > 0.0) {
            return Err(Error::ZeroVelocity);
        }
        if !self.contains_closure(p.x) {
            return Err(Error::OutsideDomain(p.x.x, p.x.y));
        }
        let x = self.embed(p.x);
        let t_plus = self.forward_exit(x, v);
        let t_minus = self.forward_exit(x, -v);
        let tau = t_minus + t_plus;
        Ok(ExitTimes {
            t_minus,
            t_plus,
            tau,
            grazing: tau <= BOUNDARY_TOL * self.diameter / speed,
        })
    }

    /// Outward unit normal at a boundary point (nearest edge for polygons).
    pub fn normal_at(&self, x: Vec2) -> Vec2 {
        match &self.shape {
            Shape::Interval { a, b } => {
                if (x.x - a).abs() <= (x.x - b).abs() {
                    Vec2::scalar(-1.0)
                } else {
                    Vec2::scalar(1.0)
                }
            }
            Shape::Disk { center, .. } => {
                let d = x - *center;
                d * (1.0 / d.norm())
            }
            Shape::Polygon {
                normals, offsets, ..
            } => {
                let mut best = 0;
                let mut gap = f64::INFINITY;
                for (i, (n, h)) in normals.iter().zip(offsets).enumerate() {
                    let g = (n.dot(x) - h).abs();
                    if g < gap {
                        gap = g;
                        best = i;
                    }
                }
                normals[best]
            }
        }
    }

    /// Boundary nodes with surface weights. Polygon corners are never nodes.
    pub fn boundary_quadrature(&self, resolution: usize) -> Result<Vec<BoundaryNode>> {
        if resolution < 2 {
            return Err(Error::InvalidParameter(format!(
                "boundary resolution must be ≥ 2, got {resolution}"
            )));
        }
        Ok(match &self.shape {
            Shape::Interval { a, b } => vec![
                BoundaryNode {
                    x: Vec2::scalar(*a),
                    normal: Vec2::scalar(-1.0),
                    weight: 1.0,
                },
                BoundaryNode {
                    x: Vec2::scalar(*b),
                    normal: Vec2::scalar(1.0),
                    weight: 1.0,
                },
            ],
            Shape::Disk { center, radius } => {
                let dtheta = 2.0 * PI / resolution as f64;
                (0..resolution)
                    .map(|k| {
                        let normal = Vec2::polar(1.0, (k as f64 + 0.5) * dtheta);
                        BoundaryNode {
                            x: *center + normal * *radius,
                            normal,
                            weight: radius * dtheta,
                        }
                    })
                    .collect()
            }
            Shape::Polygon {
                vertices, normals, ..
            } => {
                let perimeter = self.boundary_measure();
                let n = vertices.len();
                let mut nodes = Vec::with_capacity(resolution + n);
                for i in 0..n {
                    let p = vertices[i];
                    let e = vertices[(i + 1) % n] - p;
                    let len = e.norm();
                    let count = ((resolution as f64 * len / perimeter).round() as usize).max(1);
                    let w = len / count as f64;
                    for j in 0..count {
                        let s = (j as f64 + 0.5) / count as f64;
                        nodes.push(BoundaryNode {
                            x: p + e * s,
                            normal: normals[i],
                            weight: w,
                        });
                    }
                }
                nodes
            }
        })
    }
}

//! Phase-space grids: spatial nodes over the domain times velocity nodes over an annulus.
//!
//! Values are stored spatial-major: entry `i * nv + j` belongs to spatial node `i` and
//! velocity node `j`. Velocity grids are symmetric under `v -> -v`, so the reversed
//! velocity of a node is again a node (see [`VelocityGrid::reverse`]).

use std::f64::consts::PI;
use std::sync::Arc;

use crate::geometry::{PhasePoint, Shape, SpatialDomain, Vec2};
use crate::{Error, Result, C64};

/// Up to four interpolation nodes with nonnegative weights summing to one.
#[derive(Debug, Clone, Copy, Default)]
pub struct Stencil {
    pub idx: [usize; 4],
    pub w: [f64; 4],
    pub len: usize,
}

impl Stencil {
    fn single(i: usize) -> Self {
        Stencil {
            idx: [i, 0, 0, 0],
            w: [1.0, 0.0, 0.0, 0.0],
            len: 1,
        }
    }

    fn push(&mut self, i: usize, w: f64) {
        if w != 0.0 {
            self.idx[self.len] = i;
            self.w[self.len] = w;
            self.len += 1;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.len).map(|k| (self.idx[k], self.w[k]))
    }
}

/// Splits a fractional index into `(lower node, fraction)` clamped to `[0, n - 1]`.
fn split(u: f64, n: usize) -> (usize, f64) {
    if n == 1 {
        return (0, 0.0);
    }
    let u = u.clamp(0.0, (n - 1) as f64);
    let i = (u.floor() as usize).min(n - 2);
    (i, u - i as f64)
}

#[derive(Debug, Clone)]
enum Layout {
    Interval {
        a: f64,
        h: f64,
        n: usize,
    },
    Polar {
        center: Vec2,
        dr: f64,
        dtheta: f64,
        nr: usize,
        nt: usize,
    },
    Tensor {
        x0: f64,
        y0: f64,
        hx: f64,
        hy: f64,
        nx: usize,
        ny: usize,
        index: Vec<Option<usize>>,
    },
}

/// Midpoint nodes over the domain. Disks use a polar grid so the boundary is grid-aligned;
/// polygons use the bounding-box tensor grid restricted to interior nodes.
#[derive(Debug, Clone)]
pub struct SpatialGrid {
    layout: Layout,
    nodes: Vec<Vec2>,
    weights: Vec<f64>,
}

impl SpatialGrid {
    /// `n1`/`n2`: cells for intervals (`n2` unused), radial/angular counts for disks,
    /// `x`/`y` counts for polygons.
    pub fn new(domain: &SpatialDomain, n1: usize, n2: usize) -> Result<Self> {
        if n1 == 0 || (domain.dim() == 2 && n2 == 0) {
            return Err(Error::InvalidParameter(
                "spatial resolution must be positive".into(),
            ));
        }
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let layout = match domain.shape() {
            Shape::Interval { a, b } => {
                let h = (b - a) / n1 as f64;
                for i in 0..n1 {
                    nodes.push(Vec2::scalar(a + (i as f64 + 0.5) * h));
                    weights.push(h);
                }
                Layout::Interval { a: *a, h, n: n1 }
            }
            Shape::Disk { center, radius } => {
                let dr = radius / n1 as f64;
                let dtheta = 2.0 * PI / n2 as f64;
                for i in 0..n1 {
                    let r = (i as f64 + 0.5) * dr;
                    for k in 0..n2 {
                        nodes.push(*center + Vec2::polar(r, (k as f64 + 0.5) * dtheta));
                        weights.push(r * dr * dtheta);
                    }
                }
                Layout::Polar {
                    center: *center,
                    dr,
                    dtheta,
                    nr: n1,
                    nt: n2,
                }
            }
            Shape::Polygon { vertices, .. } => {
                let (mut lo, mut hi) = (vertices[0], vertices[0]);
                for v in vertices {
                    lo = Vec2::new(lo.x.min(v.x), lo.y.min(v.y));
                    hi = Vec2::new(hi.x.max(v.x), hi.y.max(v.y));
                }
                let hx = (hi.x - lo.x) / n1 as f64;
                let hy = (hi.y - lo.y) / n2 as f64;
                let mut index = vec![None; n1 * n2];
                for iy in 0..n2 {
                    for ix in 0..n1 {
                        let p =
                            Vec2::new(lo.x + (ix as f64 + 0.5) * hx, lo.y + (iy as f64 + 0.5) * hy);
                        if domain.contains(p) {
                            index[iy * n1 + ix] = Some(nodes.len());
                            nodes.push(p);
                            weights.push(hx * hy);
                        }
                    }
                }
                if nodes.is_empty() {
                    return Err(Error::InvalidParameter(
                        "polygon grid has no interior nodes".into(),
                    ));
                }
                Layout::Tensor {
                    x0: lo.x,
                    y0: lo.y,
                    hx,
                    hy,
                    nx: n1,
                    ny: n2,
                    index,
                }
            }
        };
        Ok(SpatialGrid {
            layout,
            nodes,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Vec2] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Bilinear (polar or Cartesian) interpolation stencil at `y`; flat outside the node hull.
    pub fn stencil(&self, y: Vec2) -> Stencil {
        let mut s = Stencil::default();
        match &self.layout {
            Layout::Interval { a, h, n } => {
                let (i, f) = split((y.x - a) / h - 0.5, *n);
                s.push(i, 1.0 - f);
                if *n > 1 {
                    s.push(i + 1, f);
                }
            }
            Layout::Polar {
                center,
                dr,
                dtheta,
                nr,
                nt,
            } => {
                let d = y - *center;
                let (i, fr) = split(d.norm() / dr - 0.5, *nr);
                let ang = d.y.atan2(d.x).rem_euclid(2.0 * PI);
                let u = (ang / dtheta - 0.5).rem_euclid(*nt as f64);
                let k0 = (u.floor() as usize) % nt;
                let fa = u - u.floor();
                let k1 = (k0 + 1) % nt;
                let i1 = if *nr > 1 { i + 1 } else { i };
                s.push(i * nt + k0, (1.0 - fr) * (1.0 - fa));
                s.push(i * nt + k1, (1.0 - fr) * fa);
                if *nr > 1 {
                    s.push(i1 * nt + k0, fr * (1.0 - fa));
                    s.push(i1 * nt + k1, fr * fa);
                }
            }
            Layout::Tensor {
                x0,
                y0,
                hx,
                hy,
                nx,
                ny,
                index,
            } => {
                let (ix, fx) = split((y.x - x0) / hx - 0.5, *nx);
                let (iy, fy) = split((y.y - y0) / hy - 0.5, *ny);
                let mut total = 0.0;
                for (dx, wx) in [(0, 1.0 - fx), (1, fx)] {
                    for (dy, wy) in [(0, 1.0 - fy), (1, fy)] {
                        let (cx, cy) = (ix + dx, iy + dy);
                        if cx < *nx && cy < *ny {
                            if let Some(node) = index[cy * nx + cx] {
                                s.push(node, wx * wy);
                                total += wx * wy;
                            }
                        }
                    }
                }
                if total > 0.0 {
                    for k in 0..s.len {
                        s.w[k] /= total;
                    }
                } else {
                    let nearest = self
                        .nodes
                        .iter()
                        .enumerate()
                        .min_by(|a, b| (*a.1 - y).norm2().total_cmp(&(*b.1 - y).norm2()))
                        .map(|(i, _)| i)
                        .unwrap_or(0);
                    s = Stencil::single(nearest);
                }
            }
        }
        if s.len == 0 {
            // every weight vanished: y sits exactly on a node
            s = Stencil::single(self.nearest_node(y));
        }
        s
    }

    fn nearest_node(&self, y: Vec2) -> usize {
        self.nodes
            .iter()
            .enumerate()
            .min_by(|a, b| (*a.1 - y).norm2().total_cmp(&(*b.1 - y).norm2()))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}

/// Velocity nodes over `{a ≤ |v| ≤ b}`: midpoint speeds times midpoint angles (2D) or
/// both signs (1D).
#[derive(Debug, Clone)]
pub struct VelocityGrid {
    dim: usize,
    a: f64,
    b: f64,
    n_speeds: usize,
    n_angles: usize,
    nodes: Vec<Vec2>,
    weights: Vec<f64>,
    reverse: Vec<usize>,
}

impl VelocityGrid {
    /// `n_angles` is ignored in 1D and must be even in 2D.
    pub fn annulus(dim: usize, a: f64, b: f64, n_speeds: usize, n_angles: usize) -> Result<Self> {
        if !(a > 0.0 && b > a && a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "velocity annulus needs 0 < a < b, got [{a}, {b}]"
            )));
        }
        if n_speeds == 0 {
            return Err(Error::InvalidParameter("need at least one speed".into()));
        }
        let ds = (b - a) / n_speeds as f64;
        let speed = |i: usize| a + (i as f64 + 0.5) * ds;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut reverse = Vec::new();
        match dim {
            1 => {
                for sign in [1.0, -1.0] {
                    for i in 0..n_speeds {
                        nodes.push(Vec2::scalar(sign * speed(i)));
                        weights.push(ds);
                    }
                }
                let n = 2 * n_speeds;
                reverse.extend((0..n).map(|j| (j + n_speeds) % n));
            }
            2 => {
                if n_angles < 2 || !n_angles.is_multiple_of(2) {
                    return Err(Error::InvalidParameter(format!(
                        "angular velocity count must be even and ≥ 2, got {n_angles}"
                    )));
                }
                let dtheta = 2.0 * PI / n_angles as f64;
                for i in 0..n_speeds {
                    for k in 0..n_angles {
                        nodes.push(Vec2::polar(speed(i), (k as f64 + 0.5) * dtheta));
                        weights.push(speed(i) * ds * dtheta);
                        reverse.push(i * n_angles + (k + n_angles / 2) % n_angles);
                    }
                }
            }
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "dimension {dim} unsupported"
                )))
            }
        }
        Ok(VelocityGrid {
            dim,
            a,
            b,
            n_speeds,
            n_angles,
            nodes,
            weights,
            reverse,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn n_speeds(&self) -> usize {
        self.n_speeds
    }

    pub fn n_angles(&self) -> usize {
        self.n_angles
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Vec2] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Index of the node at `-v`.
    pub fn reverse(&self, j: usize) -> usize {
        self.reverse[j]
    }

    /// Discrete `L^p` norm of a velocity profile.
    pub fn lp_norm(&self, f: impl Fn(Vec2) -> f64, p: f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| w * f(*v).abs().powf(p))
            .sum::<f64>()
            .powf(1.0 / p)
    }
}

#[derive(Debug, Clone)]
pub struct PhaseGrid {
    pub domain: SpatialDomain,
    pub spatial: SpatialGrid,
    pub velocity: VelocityGrid,
}

impl PhaseGrid {
    pub fn new(
        domain: SpatialDomain,
        spatial: (usize, usize),
        velocity: VelocityGrid,
    ) -> Result<Self> {
        if velocity.dim() != domain.dim() {
            return Err(Error::GridMismatch(format!(
                "velocity grid is {}D but the domain is {}D",
                velocity.dim(),
                domain.dim()
            )));
        }
        let spatial = SpatialGrid::new(&domain, spatial.0, spatial.1)?;
        Ok(PhaseGrid {
            domain,
            spatial,
            velocity,
        })
    }

    pub fn len(&self) -> usize {
        self.spatial.len() * self.velocity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn nv(&self) -> usize {
        self.velocity.len()
    }

    pub fn point(&self, idx: usize) -> PhasePoint {
        let nv = self.nv();
        PhasePoint::new(self.spatial.nodes[idx / nv], self.velocity.nodes[idx % nv])
    }

    pub fn weight(&self, idx: usize) -> f64 {
        let nv = self.nv();
        self.spatial.weights[idx / nv] * self.velocity.weights[idx % nv]
    }

    /// Value of the grid function `values` at `(y, velocity node slot)`.
    pub fn interpolate<T>(&self, values: &[T], y: Vec2, slot: usize) -> T
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T> + Default,
    {
        let nv = self.nv();
        self.spatial
            .stencil(y)
            .iter()
            .fold(T::default(), |acc, (k, w)| acc + values[k * nv + slot] * w)
    }

    pub fn csv_header(&self) -> Vec<&'static str> {
        if self.domain.dim() == 1 {
            vec!["x", "v", "re", "im", "weight"]
        } else {
            vec!["x", "y", "vx", "vy", "re", "im", "weight"]
        }
    }
}

/// Complex samples of a phase-space function on a [`PhaseGrid`].
#[derive(Debug, Clone)]
pub struct PhaseGridFunction {
    pub grid: Arc<PhaseGrid>,
    pub values: Vec<C64>,
}

impl PhaseGridFunction {
    pub fn new(grid: Arc<PhaseGrid>, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(PhaseGridFunction { grid, values })
    }

    pub fn zeros(grid: Arc<PhaseGrid>) -> Self {
        let n = grid.len();
        PhaseGridFunction {
            grid,
            values: vec![C64::new(0.0, 0.0); n],
        }
    }

    pub fn from_fn(grid: Arc<PhaseGrid>, f: impl Fn(Vec2, Vec2) -> C64) -> Self {
        let values = (0..grid.len())
            .map(|i| {
                let p = grid.point(i);
                f(p.x, p.v)
            })
            .collect();
        PhaseGridFunction { grid, values }
    }

    pub fn scaled(&self, s: C64) -> Self {
        PhaseGridFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    /// `(Σ weight · |value|^p)^{1/p}`.
    pub fn p_norm(&self, p: f64) -> Result<f64> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "norm exponent must lie in (1, ∞), got {p}"
            )));
        }
        let sum: f64 = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| self.grid.weight(i) * v.norm().powf(p))
            .sum();
        Ok(sum.powf(1.0 / p))
    }

    pub fn csv_record(&self, idx: usize) -> Vec<f64> {
        let p = self.grid.point(idx);
        let v = self.values[idx];
        let w = self.grid.weight(idx);
        if self.grid.domain.dim() == 1 {
            vec![p.x.x, p.v.x, v.re, v.im, w]
        } else {
            vec![p.x.x, p.x.y, p.v.x, p.v.y, v.re, v.im, w]
        }
    }
}

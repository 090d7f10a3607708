//! Norms of `K₁ 𝒥 (λ) K₂` for single-term kernels along vertical lines `λ = α + iβ`.
//!
//! With `K_i φ(x, v) = α_i(x) β_i(v) ∫ θ_i(w) φ(x, w) dw` the reflection terms factor as
//! `K₁ 𝒥 K₂ = 𝒜₃ 𝒜₂(λ) 𝒜₁` with `𝒜₂(λ)` acting on `L²(D)`:
//!
//! * odd terms `𝒥_{2n+1}`:
//!   `𝒜₂ f(x) = γ^{2n+1} ∫ h(v) e^{-2nμτ(x,v)} ∫_{-t_-}^{t_+} f(x + tv) e^{-μ(t + 2t_-(x,v))} dt dv`
//!   with `h(v) = θ₁(v) β₂(-v)`,
//! * even terms `𝒥_{2n+2}`:
//!   `𝒜₂ f(x) = γ^{2n+2} ∫ h(v) e^{-(2n+2)μτ(x,v)} ∫_{-t_-}^{t_+} f(x + tv) e^{μt} dt dv`
//!   with `h(v) = θ₁(v) β₂(v)`,
//!
//! where `μ = λ + Σ(v)`. Hence `‖K₁ 𝒥 K₂‖ = ‖β₁‖₂ ‖θ₂‖₂ ‖α₁ 𝒜₂ α₂‖`.
//!
//! `𝒜₂` is discretized on square cells: collocation at cell centres, exact `t`-integrals
//! over each cell crossed by a ray, and Gauss–Legendre in speed with enough panels to
//! resolve the phase `β t`.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::fields::{CollisionFrequency, KernelTerm, RegularCollisionKernel};
use crate::geometry::{PhasePoint, Shape, SpatialDomain, Vec2};
use crate::linalg::{power_norm, DenseMatrix};
use crate::quadrature::gauss_legendre;
use crate::streaming::BounceBack;
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    /// `𝒥_{2n+1}`.
    Odd,
    /// `𝒥_{2n+2}`.
    Even,
}

impl Parity {
    /// Index of the series term `𝒥_k` for family index `n`.
    pub fn term_index(self, n: usize) -> usize {
        match self {
            Parity::Odd => 2 * n + 1,
            Parity::Even => 2 * n + 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    /// Cells per axis of the bounding box.
    pub cells: usize,
    /// Directions on the unit circle (ignored in 1D).
    pub directions: usize,
    pub max_iter: usize,
    pub tol: f64,
    /// Largest phase change across one 10-point speed panel.
    pub panel_phase: f64,
    pub gamma: BounceBack,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            cells: 20,
            directions: 40,
            max_iter: 20,
            tol: 1e-8,
            panel_phase: 8.0,
            gamma: BounceBack::new(1.0).expect("γ = 1 is admissible"),
        }
    }
}

/// Square cells of the bounding box whose centre lies in the domain.
#[derive(Debug, Clone)]
pub struct CellGrid {
    pub centers: Vec<Vec2>,
    pub area: f64,
    origin: Vec2,
    h: Vec2,
    nx: usize,
    ny: usize,
    index: Vec<Option<usize>>,
}

impl CellGrid {
    pub fn new(domain: &SpatialDomain, cells: usize) -> Result<Self> {
        if cells == 0 {
            return Err(Error::InvalidParameter(
                "need at least one cell per axis".into(),
            ));
        }
        let (lo, hi, ny) = match domain.shape() {
            Shape::Interval { a, b } => (Vec2::new(*a, -0.5), Vec2::new(*b, 0.5), 1),
            Shape::Disk { center, radius } => (
                *center - Vec2::new(*radius, *radius),
                *center + Vec2::new(*radius, *radius),
                cells,
            ),
            Shape::Polygon { vertices, .. } => {
                let mut lo = vertices[0];
                let mut hi = vertices[0];
                for v in vertices {
                    lo = Vec2::new(lo.x.min(v.x), lo.y.min(v.y));
                    hi = Vec2::new(hi.x.max(v.x), hi.y.max(v.y));
                }
                (lo, hi, cells)
            }
        };
        let nx = cells;
        let h = Vec2::new((hi.x - lo.x) / nx as f64, (hi.y - lo.y) / ny as f64);
        let mut centers = Vec::new();
        let mut index = vec![None; nx * ny];
        for iy in 0..ny {
            for ix in 0..nx {
                let c = Vec2::new(
                    lo.x + (ix as f64 + 0.5) * h.x,
                    lo.y + (iy as f64 + 0.5) * h.y,
                );
                let c = if domain.dim() == 1 {
                    Vec2::scalar(c.x)
                } else {
                    c
                };
                if domain.contains(c) {
                    index[iy * nx + ix] = Some(centers.len());
                    centers.push(c);
                }
            }
        }
        if centers.is_empty() {
            return Err(Error::InvalidParameter(
                "cell grid has no interior cells".into(),
            ));
        }
        let area = if domain.dim() == 1 { h.x } else { h.x * h.y };
        let origin = if domain.dim() == 1 {
            Vec2::new(lo.x, -0.5)
        } else {
            lo
        };
        Ok(CellGrid {
            centers,
            area,
            origin,
            h,
            nx,
            ny,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Cells crossed by `x + r ω`, `r ∈ [r0, r1]`, as `(cell, entry r, exit r)`.
    fn traverse(&self, x: Vec2, w: Vec2, r0: f64, r1: f64, out: &mut Vec<(usize, f64, f64)>) {
        out.clear();
        if r1 <= r0 {
            return;
        }
        let local = |p: Vec2| {
            Vec2::new(
                (p.x - self.origin.x) / self.h.x,
                (p.y - self.origin.y) / self.h.y,
            )
        };
        let mid = local(x + w * (r0 + 1e-12 * (r1 - r0)));
        let mut ix = mid.x.floor() as i64;
        let mut iy = mid.y.floor() as i64;
        let step = |d: f64| if d > 0.0 { 1 } else { -1 };
        let (sx, sy) = (step(w.x), step(w.y));
        let start = local(x + w * r0);
        let next_edge = |pos: f64, i: i64, s: i64, d: f64, h: f64| -> (f64, f64) {
            if d == 0.0 {
                return (f64::INFINITY, f64::INFINITY);
            }
            let edge = if s > 0 { (i + 1) as f64 } else { i as f64 };
            ((edge - pos) * h / d + r0, h / d.abs())
        };
        let (mut tx, dx) = next_edge(start.x, ix, sx, w.x, self.h.x);
        let (mut ty, dy) = next_edge(start.y, iy, sy, w.y, self.h.y);
        let mut r = r0;
        while r < r1 {
            let exit = tx.min(ty).min(r1);
            if ix >= 0 && iy >= 0 && (ix as usize) < self.nx && (iy as usize) < self.ny {
                if let Some(c) = self.index[iy as usize * self.nx + ix as usize] {
                    if exit > r {
                        out.push((c, r, exit));
                    }
                }
            }
            r = exit;
            if tx <= ty {
                ix += sx;
                tx += dx;
            } else {
                iy += sy;
                ty += dy;
            }
        }
    }
}

fn single_term(k: &RegularCollisionKernel, name: &str) -> Result<Option<KernelTerm>> {
    match k.terms() {
        [] => Ok(None),
        [t] => Ok(Some(t.clone())),
        _ => Err(Error::InvalidParameter(format!(
            "{name} must have a single separable term"
        ))),
    }
}

/// Velocity quadrature nodes `(v, weight)` on `a ≤ |v| ≤ b`.
fn velocity_nodes(
    dim: usize,
    a: f64,
    b: f64,
    panels: usize,
    directions: usize,
) -> Vec<(Vec2, f64)> {
    let (gx, gw) = gauss_legendre(10);
    let ds = (b - a) / panels as f64;
    let mut speeds = Vec::with_capacity(panels * 10);
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * ds;
        for (x, w) in gx.iter().zip(&gw) {
            speeds.push((mid + 0.5 * ds * x, 0.5 * ds * w));
        }
    }
    let mut out = Vec::new();
    if dim == 1 {
        for sign in [1.0, -1.0] {
            out.extend(speeds.iter().map(|(s, w)| (Vec2::scalar(sign * s), *w)));
        }
    } else {
        let dw = 2.0 * PI / directions as f64;
        for k in 0..directions {
            let om = Vec2::polar(1.0, (k as f64 + 0.5) * dw);
            out.extend(speeds.iter().map(|(s, w)| (om * *s, w * s * dw)));
        }
    }
    out
}

fn l2_norm(dim: usize, a: f64, b: f64, f: &(dyn Fn(Vec2) -> f64 + Send + Sync)) -> f64 {
    velocity_nodes(dim, a, b, 32, 256)
        .iter()
        .map(|(v, w)| w * f(*v).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn sup_norm(cells: &CellGrid, f: &(dyn Fn(Vec2) -> f64 + Send + Sync)) -> f64 {
    cells
        .centers
        .iter()
        .map(|x| f(*x).abs())
        .fold(0.0, f64::max)
}

/// `(1 - e^{-z}) / z` given `e^{-z}`, accurate for small `z`.
fn phi1(z: C64, emz: C64) -> C64 {
    if z.norm() < 1e-4 {
        C64::new(1.0, 0.0) - z / 2.0 + z * z / 6.0
    } else {
        (C64::new(1.0, 0.0) - emz) / z
    }
}

struct Problem<'a> {
    domain: &'a SpatialDomain,
    sigma: &'a CollisionFrequency,
    lambda: C64,
    n: usize,
    parity: Parity,
    h: Box<dyn Fn(Vec2) -> f64 + Send + Sync + 'a>,
    support: (f64, f64),
    config: SweepConfig,
}

impl Problem<'_> {
    fn speed_panels(&self) -> usize {
        let (a, b) = self.support;
        let d = self.domain.diameter();
        let reach = match self.parity {
            Parity::Odd => (2 * self.n + 2) as f64 * d,
            Parity::Even => (2 * self.n + 3) as f64 * d,
        };
        let phase = self.lambda.im.abs() * reach * (1.0 / a - 1.0 / b);
        ((phase / self.config.panel_phase).ceil() as usize).max(2)
    }

    fn assemble(&self, cells: &CellGrid) -> Result<DenseMatrix> {
        let (a, b) = self.support;
        let nodes: Vec<(Vec2, f64, C64)> = velocity_nodes(
            self.domain.dim(),
            a,
            b,
            self.speed_panels(),
            self.config.directions,
        )
        .into_iter()
        .filter_map(|(v, w)| {
            let hv = (self.h)(v);
            if hv == 0.0 {
                return None;
            }
            Some((
                v,
                w * hv,
                self.sigma.speed_value(v).map(|s| self.lambda + s),
            ))
        })
        .map(|(v, w, mu)| mu.map(|mu| (v, w, mu)).ok_or(Error::NonHomogeneousSigma))
        .collect::<Result<_>>()?;
        let k = self.parity.term_index(self.n) as i32;
        let gpow = self.config.gamma.value().powi(k);
        let nc = cells.len();
        let rows: Vec<Vec<C64>> = cells
            .centers
            .par_iter()
            .map(|x| -> Result<Vec<C64>> {
                let mut row = vec![C64::new(0.0, 0.0); nc];
                let mut segs = Vec::new();
                let mut last_dir: Option<Vec2> = None;
                let (mut lm, mut lp) = (0.0, 0.0);
                for (v, w, mu) in &nodes {
                    let s = v.norm();
                    let om = *v * (1.0 / s);
                    if last_dir.is_none_or(|d| (d - om).norm() > 1e-14) {
                        let e = self.domain.exit_times(PhasePoint::new(*x, om))?;
                        lm = e.t_minus;
                        lp = e.t_plus;
                        cells.traverse(*x, om, -lm, lp, &mut segs);
                        last_dir = Some(om);
                    }
                    let len = lm + lp;
                    let inv = 1.0 / s;
                    // running value of the t-weight at the start of each segment
                    let (mut run, grow) = match self.parity {
                        Parity::Odd => {
                            ((-*mu * ((2 * self.n) as f64 * len + lm) * inv).exp(), -1.0)
                        }
                        Parity::Even => (
                            (-*mu * ((2 * self.n + 2) as f64 * len + lm) * inv).exp(),
                            1.0,
                        ),
                    };
                    let scale = w * gpow;
                    let mut r_prev = -lm;
                    for &(c, r0, r1) in &segs {
                        if r0 > r_prev {
                            run *= (*mu * grow * (r0 - r_prev) * inv).exp();
                        }
                        let dt = (r1 - r0) * inv;
                        let z = -*mu * grow * dt;
                        let emz = (-z).exp();
                        row[c] += run * phi1(z, emz) * (dt * scale);
                        run *= emz;
                        r_prev = r1;
                    }
                }
                Ok(row)
            })
            .collect::<Result<_>>()?;
        let mut m = DenseMatrix::zeros(nc, nc);
        for (i, row) in rows.into_iter().enumerate() {
            for (j, v) in row.into_iter().enumerate() {
                m.set(i, j, v);
            }
        }
        Ok(m)
    }

    /// `γ^k ∫_{-d/a}^{d/a} e^{-(α + inf Σ) t} dt ∫ |h|`.
    fn envelope_bound(&self) -> f64 {
        let (a, b) = self.support;
        let c = self.lambda.re + self.sigma.floor();
        let r = self.domain.diameter() / a;
        let time = if c.abs() < 1e-12 {
            2.0 * r
        } else {
            2.0 * (c * r).sinh() / c
        };
        let hint: f64 = velocity_nodes(self.domain.dim(), a, b, 32, 256)
            .iter()
            .map(|(v, w)| w * (self.h)(*v).abs())
            .sum();
        self.config
            .gamma
            .value()
            .powi(self.parity.term_index(self.n) as i32)
            * time
            * hint
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct A2Estimate {
    /// Power-iteration estimate of the discretized operator norm.
    pub estimate: f64,
    /// `‖A 1‖ / ‖1‖`, a lower bound on the discretized norm.
    pub lower_bound: f64,
    /// Analytic bound from the kernel envelope.
    pub envelope_bound: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[allow(clippy::too_many_arguments)]
fn problem<'a>(
    lambda: C64,
    n: usize,
    parity: Parity,
    t1: &KernelTerm,
    t2: &KernelTerm,
    k1: &RegularCollisionKernel,
    k2: &RegularCollisionKernel,
    domain: &'a SpatialDomain,
    sigma: &'a CollisionFrequency,
    config: SweepConfig,
) -> Result<Problem<'a>> {
    if lambda.re + sigma.floor() <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "need α > -σ, got α = {} and inf Σ = {}",
            lambda.re,
            sigma.floor()
        )));
    }
    let (theta1, beta2) = (t1.theta.clone(), t2.beta.clone());
    let h: Box<dyn Fn(Vec2) -> f64 + Send + Sync> = match parity {
        Parity::Odd => Box::new(move |v: Vec2| theta1(v) * beta2(-v)),
        Parity::Even => Box::new(move |v: Vec2| theta1(v) * beta2(v)),
    };
    let support = (
        k1.support().0.max(k2.support().0),
        k1.support().1.min(k2.support().1),
    );
    Ok(Problem {
        domain,
        sigma,
        lambda,
        n,
        parity,
        h,
        support,
        config,
    })
}

/// Discretized `α₁ 𝒜₂(λ) α₂` on the cell grid (without the `α` factors when `with_alpha`
/// is false).
#[allow(clippy::too_many_arguments)]
pub fn a2_matrix(
    lambda: C64,
    n: usize,
    parity: Parity,
    k1: &RegularCollisionKernel,
    k2: &RegularCollisionKernel,
    domain: &SpatialDomain,
    sigma: &CollisionFrequency,
    config: SweepConfig,
    with_alpha: bool,
) -> Result<(CellGrid, DenseMatrix)> {
    let cells = CellGrid::new(domain, config.cells)?;
    let (Some(t1), Some(t2)) = (single_term(k1, "K₁")?, single_term(k2, "K₂")?) else {
        let nc = cells.len();
        return Ok((cells, DenseMatrix::zeros(nc, nc)));
    };
    let p = problem(lambda, n, parity, &t1, &t2, k1, k2, domain, sigma, config)?;
    if p.support.0 >= p.support.1 {
        let nc = cells.len();
        return Ok((cells, DenseMatrix::zeros(nc, nc)));
    }
    let mut m = p.assemble(&cells)?;
    if with_alpha {
        let a1: Vec<f64> = cells.centers.iter().map(|x| (t1.alpha)(*x)).collect();
        let a2: Vec<f64> = cells.centers.iter().map(|x| (t2.alpha)(*x)).collect();
        for j in 0..cells.len() {
            for i in 0..cells.len() {
                let v = m.get(i, j) * (a1[i] * a2[j]);
                m.set(i, j, v);
            }
        }
    }
    Ok((cells, m))
}

fn estimate(m: &DenseMatrix, config: &SweepConfig) -> (f64, f64, usize, bool) {
    let n = m.cols;
    if m.data.iter().all(|v| v.norm() == 0.0) {
        return (0.0, 0.0, 0, true);
    }
    let p = power_norm(
        n,
        |x| m.apply(x),
        |y| m.apply_adjoint(y),
        config.max_iter,
        config.tol,
    );
    let ones = vec![C64::new(1.0, 0.0); n];
    let lower = m
        .apply(&ones)
        .iter()
        .map(|v| v.norm_sqr())
        .sum::<f64>()
        .sqrt()
        / (n as f64).sqrt();
    (p.norm, lower, p.iterations, p.converged)
}

/// `‖𝒜₂(λ)‖` on `L²(D)` with its analytic envelope bound.
#[allow(clippy::too_many_arguments)]
pub fn a2_norm(
    lambda: C64,
    n: usize,
    parity: Parity,
    k1: &RegularCollisionKernel,
    k2: &RegularCollisionKernel,
    domain: &SpatialDomain,
    sigma: &CollisionFrequency,
    config: SweepConfig,
) -> Result<A2Estimate> {
    let (t1, t2) = match (single_term(k1, "K₁")?, single_term(k2, "K₂")?) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Ok(A2Estimate {
                estimate: 0.0,
                lower_bound: 0.0,
                envelope_bound: 0.0,
                iterations: 0,
                converged: true,
            })
        }
    };
    let p = problem(lambda, n, parity, &t1, &t2, k1, k2, domain, sigma, config)?;
    let (_, m) = a2_matrix(lambda, n, parity, k1, k2, domain, sigma, config, false)?;
    let (est, lower, iterations, converged) = estimate(&m, &config);
    Ok(A2Estimate {
        estimate: est,
        lower_bound: lower,
        envelope_bound: p.envelope_bound(),
        iterations,
        converged,
    })
}

/// Estimates of `‖K₁ 𝒥(α + iβ) K₂‖` over a list of `β`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormSweep {
    pub alpha: f64,
    pub n: usize,
    pub parity: Parity,
    pub betas: Vec<f64>,
    pub estimates: Vec<f64>,
    /// `max_{β' ≥ β}` of the estimates; nonincreasing.
    pub envelope: Vec<f64>,
    /// `β`-independent analytic bound.
    pub bound: f64,
}

impl NormSweep {
    /// Final envelope value over the first; `None` if the first is zero.
    pub fn decay_ratio(&self) -> Option<f64> {
        let first = *self.envelope.first()?;
        let last = *self.envelope.last()?;
        (first > 0.0).then(|| last / first)
    }
}

#[allow(clippy::too_many_arguments)]
pub fn rl_sweep(
    alpha: f64,
    betas: &[f64],
    n: usize,
    parity: Parity,
    k1: &RegularCollisionKernel,
    k2: &RegularCollisionKernel,
    domain: &SpatialDomain,
    sigma: &CollisionFrequency,
    config: SweepConfig,
) -> Result<NormSweep> {
    if betas.is_empty()
        || betas.iter().any(|b| !(*b >= 0.0 && b.is_finite()))
        || betas.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::InvalidParameter(
            "β list must be nonempty, nonnegative and increasing".into(),
        ));
    }
    let zero = |len: usize| NormSweep {
        alpha,
        n,
        parity,
        betas: betas.to_vec(),
        estimates: vec![0.0; len],
        envelope: vec![0.0; len],
        bound: 0.0,
    };
    let (t1, t2) = match (single_term(k1, "K₁")?, single_term(k2, "K₂")?) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            if alpha + sigma.floor() <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "need α > -σ, got α = {alpha}"
                )));
            }
            return Ok(zero(betas.len()));
        }
    };
    let cells = CellGrid::new(domain, config.cells)?;
    let (a1, b1) = k1.support();
    let (a2, b2) = k2.support();
    let dim = domain.dim();
    let factor = l2_norm(dim, a1, b1, &*t1.beta) * l2_norm(dim, a2, b2, &*t2.theta);
    let alpha_sup = sup_norm(&cells, &*t1.alpha) * sup_norm(&cells, &*t2.alpha);
    let base = problem(
        C64::new(alpha, 0.0),
        n,
        parity,
        &t1,
        &t2,
        k1,
        k2,
        domain,
        sigma,
        config,
    )?;
    let bound = factor * alpha_sup * base.envelope_bound();
    let mut estimates = Vec::with_capacity(betas.len());
    for beta in betas {
        let (_, m) = a2_matrix(
            C64::new(alpha, *beta),
            n,
            parity,
            k1,
            k2,
            domain,
            sigma,
            config,
            true,
        )?;
        estimates.push(factor * estimate(&m, &config).0);
    }
    let mut envelope = estimates.clone();
    for i in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[i] = envelope[i].max(envelope[i + 1]);
    }
    Ok(NormSweep {
        alpha,
        n,
        parity,
        betas: betas.to_vec(),
        estimates,
        envelope,
        bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::smooth_bump;
    use crate::linalg::singular_values;

    fn bump_kernel() -> RegularCollisionKernel {
        let t = KernelTerm::new(
            |_| 1.0,
            smooth_bump(1.0, 2.0, 1.0),
            smooth_bump(1.0, 2.0, 1.0),
        );
        RegularCollisionKernel::new(vec![t], 1.0, 2.0).unwrap()
    }

    fn small() -> SweepConfig {
        SweepConfig {
            cells: 10,
            directions: 24,
            ..SweepConfig::default()
        }
    }

    #[test]
    fn traversal_covers_the_chord() {
        let d = SpatialDomain::unit_disk();
        let cells = CellGrid::new(&d, 16).unwrap();
        let mut segs = Vec::new();
        let x = Vec2::new(0.1, -0.2);
        for k in 0..17 {
            let om = Vec2::polar(1.0, 0.3 + k as f64 * 0.4);
            let e = d.exit_times(PhasePoint::new(x, om)).unwrap();
            cells.traverse(x, om, -e.t_minus, e.t_plus, &mut segs);
            assert!(segs.windows(2).all(|w| w[0].2 <= w[1].1 + 1e-12));
            for (c, r0, r1) in &segs {
                let mid = x + om * (0.5 * (r0 + r1));
                let cc = cells.centers[*c];
                assert!(
                    (mid.x - cc.x).abs() <= 0.5 * cells.h.x + 1e-9
                        && (mid.y - cc.y).abs() <= 0.5 * cells.h.y + 1e-9
                );
            }
            let covered: f64 = segs.iter().map(|(_, a, b)| b - a).sum();
            assert!(covered <= e.tau + 1e-12 && covered > 0.8 * e.tau);
        }
        let axis = Vec2::new(1.0, 0.0);
        cells.traverse(Vec2::new(0.05, 0.05), axis, -1.0, 0.9, &mut segs);
        let covered: f64 = segs.iter().map(|(_, a, b)| b - a).sum();
        assert!((covered - 1.9).abs() < 0.25);
    }

    #[test]
    fn zero_kernels_give_zero() {
        let d = SpatialDomain::unit_disk();
        let s = CollisionFrequency::constant(1.0).unwrap();
        let z = RegularCollisionKernel::zero(1.0, 2.0).unwrap();
        let r = a2_norm(
            C64::new(0.0, 3.0),
            0,
            Parity::Odd,
            &z,
            &bump_kernel(),
            &d,
            &s,
            small(),
        )
        .unwrap();
        assert_eq!(r.estimate, 0.0);
        let sw = rl_sweep(
            0.0,
            &[0.0, 10.0],
            0,
            Parity::Odd,
            &bump_kernel(),
            &z,
            &d,
            &s,
            small(),
        )
        .unwrap();
        assert!(sw.estimates.iter().all(|e| *e == 0.0));
        let no_h = KernelTerm::new(|_| 1.0, |_| 0.0, |_| 0.0);
        let k0 = RegularCollisionKernel::new(vec![no_h], 1.0, 2.0).unwrap();
        let r = a2_norm(
            C64::new(0.0, 0.0),
            0,
            Parity::Odd,
            &k0,
            &k0,
            &d,
            &s,
            small(),
        )
        .unwrap();
        assert_eq!(r.estimate, 0.0);
        assert!(RegularCollisionKernel::zero(0.0, 2.0).is_err());
        assert!(a2_norm(
            C64::new(-1.5, 0.0),
            0,
            Parity::Odd,
            &bump_kernel(),
            &bump_kernel(),
            &d,
            &s,
            small()
        )
        .is_err());
    }

    #[test]
    fn estimate_between_row_sum_and_envelope() {
        let d = SpatialDomain::unit_disk();
        let s = CollisionFrequency::constant(1.0).unwrap();
        let k = bump_kernel();
        for parity in [Parity::Odd, Parity::Even] {
            let r = a2_norm(C64::new(0.0, 0.0), 0, parity, &k, &k, &d, &s, small()).unwrap();
            let (_, m) = a2_matrix(
                C64::new(0.0, 0.0),
                0,
                parity,
                &k,
                &k,
                &d,
                &s,
                small(),
                false,
            )
            .unwrap();
            let exact = singular_values(&m)[0];
            assert!(m.data.iter().all(|v| v.re >= 0.0 && v.im == 0.0));
            assert!(
                (r.estimate - exact).abs() < 1e-6 * exact,
                "{} vs {exact}",
                r.estimate
            );
            assert!(r.lower_bound <= r.estimate * (1.0 + 1e-12));
            assert!(r.estimate <= r.envelope_bound);
        }
    }

    #[test]
    fn higher_terms_are_dominated() {
        let d = SpatialDomain::unit_disk();
        let s = CollisionFrequency::constant(1.0).unwrap();
        let k = bump_kernel();
        let lam = C64::new(0.2, 0.0);
        let (_, m0) = a2_matrix(lam, 0, Parity::Odd, &k, &k, &d, &s, small(), false).unwrap();
        let (_, m1) = a2_matrix(lam, 1, Parity::Odd, &k, &k, &d, &s, small(), false).unwrap();
        assert!(m0
            .data
            .iter()
            .zip(&m1.data)
            .all(|(a, b)| b.re <= a.re + 1e-15));
        assert!(singular_values(&m1)[0] < singular_values(&m0)[0]);
    }

    #[test]
    fn sweep_shape() {
        let d = SpatialDomain::unit_disk();
        let s = CollisionFrequency::constant(1.0).unwrap();
        let k = bump_kernel();
        let one = rl_sweep(0.0, &[0.0], 0, Parity::Odd, &k, &k, &d, &s, small()).unwrap();
        assert!(one.estimates[0] > 0.0 && one.estimates[0] <= one.bound);
        let sw = rl_sweep(
            0.0,
            &[0.0, 20.0, 40.0],
            0,
            Parity::Odd,
            &k,
            &k,
            &d,
            &s,
            small(),
        )
        .unwrap();
        assert!(sw.envelope.windows(2).all(|w| w[0] >= w[1]));
        assert!(sw.decay_ratio().unwrap() < 1.0);
        assert!(rl_sweep(0.0, &[3.0, 1.0], 0, Parity::Odd, &k, &k, &d, &s, small()).is_err());
    }

    #[test]
    fn interval_domain() {
        let d = SpatialDomain::interval(-1.0, 1.0).unwrap();
        let s = CollisionFrequency::constant(1.0).unwrap();
        let k = bump_kernel();
        let r = a2_norm(C64::new(0.0, 0.0), 0, Parity::Odd, &k, &k, &d, &s, small()).unwrap();
        assert!(r.estimate > 0.0 && r.estimate <= r.envelope_bound);
    }
}

//! The bounce-back operator `H` and the streaming semigroup `U(t)`.
//!
//! For a speed-homogeneous Σ, `U(t)` is evaluated in closed form: at most one reflection
//! term contributes at any `(x, v, t)`. The term is selected by the half-open interval
//! `I_n = [n τ + t_-, (n + 1) τ + t_-)` containing `t`. [`characteristics_oracle`] follows
//! the reflected flow backward segment by segment instead and serves as the reference for
//! general even Σ.

use std::sync::Arc;

use rayon::prelude::*;

use crate::fields::CollisionFrequency;
use crate::geometry::{PhasePoint, SpatialDomain, Vec2};
use crate::grid::{PhaseGrid, PhaseGridFunction};
use crate::quadrature::integrate_complex;
use crate::{Error, PhaseFn, Result, C64};

/// Reflection coefficient `γ` of the boundary condition `ψ|Γ- (x, v) = γ ψ|Γ+ (x, -v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BounceBack(f64);

impl BounceBack {
    /// Accepts `0 < γ ≤ 1`.
    pub fn new(gamma: f64) -> Result<Self> {
        if gamma > 0.0 && gamma <= 1.0 {
            Ok(BounceBack(gamma))
        } else {
            Err(Error::InvalidParameter(format!(
                "γ must lie in (0,1], got {gamma}"
            )))
        }
    }

    /// Accepts `0 < γ < 1` only.
    pub fn strict(gamma: f64) -> Result<Self> {
        if gamma > 0.0 && gamma < 1.0 {
            Ok(BounceBack(gamma))
        } else {
            Err(Error::InvalidParameter(format!(
                "γ must lie in (0,1) here, got {gamma}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    fn pow(self, k: usize) -> f64 {
        if k <= i32::MAX as usize {
            self.0.powi(k as i32)
        } else {
            self.0.powf(k as f64)
        }
    }
}

/// `(Hψ)(x, v) = γ ψ(x, -v)` at an incoming boundary point.
pub fn apply_h(psi: PhaseFn<'_>, gamma: BounceBack, p: PhasePoint) -> C64 {
    psi(p.x, -p.v) * gamma.value()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReflectionState {
    /// `t < t_-`: no reflection yet.
    Free,
    /// `t ∈ I_n`: the particle has been reflected `n + 1` times.
    Interval(usize),
}

impl ReflectionState {
    /// Index of the contributing term `U_k` of the series.
    pub fn term(self) -> usize {
        match self {
            ReflectionState::Free => 0,
            ReflectionState::Interval(n) => n.saturating_add(1),
        }
    }
}

/// The backward characteristic: `U(t)φ(x, v) = weight · φ(point, velocity)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Characteristic {
    pub weight: f64,
    pub point: Vec2,
    pub velocity: Vec2,
    pub state: ReflectionState,
}

impl Characteristic {
    pub fn reversed(&self) -> bool {
        self.state.term() % 2 == 1
    }
}

fn homogeneous_sigma(sigma: &CollisionFrequency, v: Vec2) -> Result<f64> {
    sigma.speed_value(v).ok_or(Error::NonHomogeneousSigma)
}

/// Closed-form backward characteristic of `U(t)` for `Σ = Σ(v)`.
pub fn trace_back(
    domain: &SpatialDomain,
    sigma: &CollisionFrequency,
    gamma: BounceBack,
    p: PhasePoint,
    t: f64,
) -> Result<Characteristic> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "time must be ≥ 0, got {t}"
        )));
    }
    let e = domain.exit_times(p)?;
    let x = domain.embed(p.x);
    let v = domain.embed(p.v);
    let decay = (-homogeneous_sigma(sigma, v)? * t).exp();
    if t < e.t_minus {
        return Ok(Characteristic {
            weight: decay,
            point: domain.clamp_to_closure(x - v * t),
            velocity: v,
            state: ReflectionState::Free,
        });
    }
    if !(e.tau > 0.0) {
        // tangent chord: infinitely many reflections in zero time
        let weight = if gamma.value() < 1.0 { 0.0 } else { decay };
        return Ok(Characteristic {
            weight,
            point: x,
            velocity: v,
            state: ReflectionState::Interval(usize::MAX),
        });
    }
    let k = ((t - e.t_minus) / e.tau).floor().max(0.0) as usize;
    let m = k / 2;
    let (point, velocity) = if k.is_multiple_of(2) {
        (x + v * (t - 2.0 * e.t_minus - 2.0 * m as f64 * e.tau), -v)
    } else {
        (x + v * ((2 * m + 2) as f64 * e.tau - t), v)
    };
    Ok(Characteristic {
        weight: gamma.pow(k + 1) * decay,
        point: domain.clamp_to_closure(point),
        velocity,
        state: ReflectionState::Interval(k),
    })
}

/// `[U(t)φ](x, v)` for a speed-homogeneous Σ.
pub fn u_eval(
    phi: PhaseFn<'_>,
    domain: &SpatialDomain,
    sigma: &CollisionFrequency,
    gamma: BounceBack,
    p: PhasePoint,
    t: f64,
) -> Result<C64> {
    let c = trace_back(domain, sigma, gamma, p, t)?;
    if c.weight == 0.0 {
        return Ok(C64::new(0.0, 0.0));
    }
    Ok(phi(c.point, c.velocity) * c.weight)
}

/// Independent evaluation of `[U(t)φ](x, v)` by following the bounce-back flow backward,
/// accumulating `exp(-∫Σ)` by quadrature per segment and a factor `γ` per reflection.
pub fn characteristics_oracle(
    phi: PhaseFn<'_>,
    domain: &SpatialDomain,
    sigma: &CollisionFrequency,
    gamma: BounceBack,
    p: PhasePoint,
    t: f64,
) -> Result<C64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "time must be ≥ 0, got {t}"
        )));
    }
    let mut pos = domain.embed(p.x);
    let mut vel = domain.embed(p.v);
    if !(domain.speed(vel) > 0.0) {
        return Err(Error::ZeroVelocity);
    }
    let mut remaining = t;
    let mut weight = 1.0;
    let mut absorbed = 0.0;
    const MAX_SEGMENTS: usize = 10_000_000;
    for _ in 0..MAX_SEGMENTS {
        let e = domain.exit_times(PhasePoint::new(pos, vel))?;
        if remaining < e.t_minus {
            absorbed += sigma.chord_integral(pos, vel, 0.0, remaining);
            pos = domain.clamp_to_closure(pos - vel * remaining);
            return Ok(phi(pos, vel) * (weight * (-absorbed).exp()));
        }
        if e.grazing && e.t_minus == 0.0 && gamma.value() < 1.0 {
            return Ok(C64::new(0.0, 0.0));
        }
        absorbed += sigma.chord_integral(pos, vel, 0.0, e.t_minus);
        pos = domain.clamp_to_closure(pos - vel * e.t_minus);
        remaining -= e.t_minus;
        vel = -vel;
        weight *= gamma.value();
        if weight == 0.0 {
            return Ok(C64::new(0.0, 0.0));
        }
    }
    Err(Error::ResourceLimit(format!(
        "more than {MAX_SEGMENTS} reflections"
    )))
}

/// `∫_0^∞ e^{-λt} [U(t)φ](x, v) dt`, integrated piecewise over the reflection intervals and
/// truncated where the remaining tail is below `tol · sup|φ|` with `sup|φ| ≤ phi_bound`.
pub fn laplace_transform(
    phi: PhaseFn<'_>,
    phi_bound: f64,
    domain: &SpatialDomain,
    sigma: &CollisionFrequency,
    gamma: BounceBack,
    p: PhasePoint,
    lambda: C64,
    tol: f64,
) -> Result<C64> {
    let e = domain.exit_times(p)?;
    let rate = lambda.re + homogeneous_sigma(sigma, domain.embed(p.v))?;
    if !(rate > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Laplace transform needs Re λ + Σ > 0, got {rate}"
        )));
    }
    let integrand = |t: f64| -> C64 {
        let u = u_eval(phi, domain, sigma, gamma, p, t).unwrap_or_default();
        (-lambda * t).exp() * u
    };
    let piece_tol = 1e-3 * tol;
    let mut total = integrate_complex(&integrand, 0.0, e.t_minus, piece_tol);
    if !(e.tau > 0.0) {
        return Ok(total);
    }
    let mut start = e.t_minus;
    let mut factor = 1.0;
    loop {
        factor *= gamma.value();
        // tail bound of everything from `start` on: γ^{k+1} sup|φ| e^{-rate·start} / rate
        let tail = factor * phi_bound * (-rate * start).exp() / rate;
        if tail < tol {
            break;
        }
        let end = start + e.tau;
        total += integrate_complex(&integrand, start, end, piece_tol);
        start = end;
    }
    Ok(total)
}

/// `U(t)` on a phase grid as a sparse matrix: every row holds one reflected characteristic
/// interpolated bilinearly from at most four nodes of the contributing velocity slot.
#[derive(Debug, Clone)]
pub struct StreamingMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl StreamingMatrix {
    pub fn identity(n: usize) -> Self {
        StreamingMatrix {
            n,
            row_ptr: (0..=n).collect(),
            cols: (0..n as u32).collect(),
            vals: vec![1.0; n],
        }
    }

    pub fn build(
        grid: &PhaseGrid,
        sigma: &CollisionFrequency,
        gamma: BounceBack,
        t: f64,
    ) -> Result<Self> {
        let n = grid.len();
        if t == 0.0 {
            return Ok(Self::identity(n));
        }
        if n > u32::MAX as usize {
            return Err(Error::ResourceLimit(format!("{n} grid nodes")));
        }
        let nv = grid.nv();
        let rows: Vec<Vec<(u32, f64)>> = (0..n)
            .into_par_iter()
            .map(|idx| -> Result<Vec<(u32, f64)>> {
                let j = idx % nv;
                let c = trace_back(&grid.domain, sigma, gamma, grid.point(idx), t)?;
                if c.weight == 0.0 {
                    return Ok(Vec::new());
                }
                let slot = if c.reversed() {
                    grid.velocity.reverse(j)
                } else {
                    j
                };
                Ok(grid
                    .spatial
                    .stencil(c.point)
                    .iter()
                    .map(|(k, w)| ((k * nv + slot) as u32, c.weight * w))
                    .collect())
            })
            .collect::<Result<_>>()?;
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(4 * n);
        let mut vals = Vec::with_capacity(4 * n);
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Ok(StreamingMatrix {
            n,
            row_ptr,
            cols,
            vals,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn apply<T>(&self, x: &[T]) -> Vec<T>
    where
        T: Copy
            + Default
            + Send
            + Sync
            + std::ops::Mul<f64, Output = T>
            + std::ops::Add<Output = T>,
    {
        let mut out = vec![T::default(); self.n];
        self.apply_into(x, &mut out);
        out
    }

    pub fn apply_into<T>(&self, x: &[T], out: &mut [T])
    where
        T: Copy
            + Default
            + Send
            + Sync
            + std::ops::Mul<f64, Output = T>
            + std::ops::Add<Output = T>,
    {
        out.par_iter_mut().enumerate().for_each(|(r, o)| {
            let mut acc = T::default();
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc = acc + x[self.cols[k] as usize] * self.vals[k];
            }
            *o = acc;
        });
    }

    /// Row `r` as `(column, value)` pairs.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(|k| (self.cols[k] as usize, self.vals[k]))
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.n + 1];
        for &c in &self.cols {
            counts[c as usize + 1] += 1;
        }
        for i in 0..self.n {
            counts[i + 1] += counts[i];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut cols = vec![0u32; self.nnz()];
        let mut vals = vec![0.0; self.nnz()];
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.cols[k] as usize;
                cols[next[c]] = r as u32;
                vals[next[c]] = self.vals[k];
                next[c] += 1;
            }
        }
        StreamingMatrix {
            n: self.n,
            row_ptr,
            cols,
            vals,
        }
    }
}

/// `U(t)` applied to grid samples; off-grid values come from bilinear interpolation.
pub fn evolve(
    phi: &PhaseGridFunction,
    t: f64,
    sigma: &CollisionFrequency,
    gamma: BounceBack,
) -> Result<PhaseGridFunction> {
    if t == 0.0 {
        return Ok(phi.clone());
    }
    let m = StreamingMatrix::build(&phi.grid, sigma, gamma, t)?;
    PhaseGridFunction::new(phi.grid.clone(), m.apply(&phi.values))
}

/// `U(t)` applied to a closed-form function, sampled on the grid nodes.
pub fn evolve_fn(
    phi: PhaseFn<'_>,
    grid: Arc<PhaseGrid>,
    t: f64,
    sigma: &CollisionFrequency,
    gamma: BounceBack,
) -> Result<PhaseGridFunction> {
    let values = (0..grid.len())
        .into_par_iter()
        .map(|i| u_eval(phi, &grid.domain, sigma, gamma, grid.point(i), t))
        .collect::<Result<Vec<_>>>()?;
    PhaseGridFunction::new(grid, values)
}

//! Collision frequency Σ, its chord integral ϑ, and separable (regular) collision kernels.
//!
//! Σ is an absorption rate, i.e. an inverse time.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::geometry::{PhasePoint, SpatialDomain, Vec2};
use crate::grid::PhaseGridFunction;
use crate::quadrature::{integrate, CHORD_TOL};
use crate::{Error, Result, C64};

pub type VelocityProfile = Arc<dyn Fn(Vec2) -> f64 + Send + Sync>;
pub type SpatialProfile = Arc<dyn Fn(Vec2) -> f64 + Send + Sync>;
pub type PhaseProfile = Arc<dyn Fn(Vec2, Vec2) -> f64 + Send + Sync>;

/// Bounded nonnegative collision frequency, even in the velocity.
///
/// User-supplied profiles are evaluated as `½(f(x, v) + f(x, -v))`, so evenness holds by
/// construction.
#[derive(Clone)]
pub enum CollisionFrequency {
    Constant(f64),
    /// Depends on the velocity only.
    Speed {
        profile: VelocityProfile,
        bound: f64,
    },
    General {
        profile: PhaseProfile,
        bound: f64,
    },
}

impl fmt::Debug for CollisionFrequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(s) => write!(f, "Constant({s})"),
            Self::Speed { bound, .. } => write!(f, "Speed {{ bound: {bound} }}"),
            Self::General { bound, .. } => write!(f, "General {{ bound: {bound} }}"),
        }
    }
}

fn check_bound(bound: f64) -> Result<()> {
    if bound.is_finite() && bound >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "Σ bound must be finite and ≥ 0, got {bound}"
        )))
    }
}

impl CollisionFrequency {
    pub fn constant(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Σ must be finite and ≥ 0, got {sigma}"
            )));
        }
        Ok(Self::Constant(sigma))
    }

    pub fn speed(
        profile: impl Fn(Vec2) -> f64 + Send + Sync + 'static,
        bound: f64,
    ) -> Result<Self> {
        check_bound(bound)?;
        Ok(Self::Speed {
            profile: Arc::new(profile),
            bound,
        })
    }

    pub fn general(
        profile: impl Fn(Vec2, Vec2) -> f64 + Send + Sync + 'static,
        bound: f64,
    ) -> Result<Self> {
        check_bound(bound)?;
        Ok(Self::General {
            profile: Arc::new(profile),
            bound,
        })
    }

    pub fn eval(&self, x: Vec2, v: Vec2) -> f64 {
        match self {
            Self::Constant(s) => *s,
            Self::Speed { profile, .. } => 0.5 * (profile(v) + profile(-v)),
            Self::General { profile, .. } => 0.5 * (profile(x, v) + profile(x, -v)),
        }
    }

    /// `Σ(v)` when Σ does not depend on position.
    pub fn speed_value(&self, v: Vec2) -> Option<f64> {
        match self {
            Self::Constant(s) => Some(*s),
            Self::Speed { profile, .. } => Some(0.5 * (profile(v) + profile(-v))),
            Self::General { .. } => None,
        }
    }

    pub fn is_speed_homogeneous(&self) -> bool {
        !matches!(self, Self::General { .. })
    }

    /// Essential supremum.
    pub fn bound(&self) -> f64 {
        match self {
            Self::Constant(s) => *s,
            Self::Speed { bound, .. } | Self::General { bound, .. } => *bound,
        }
    }

    /// A known lower bound (exact for constants, 0 otherwise).
    pub fn floor(&self) -> f64 {
        match self {
            Self::Constant(s) => *s,
            _ => 0.0,
        }
    }

    /// `∫_{s0}^{s1} Σ(x - s v, v) ds`.
    pub fn chord_integral(&self, x: Vec2, v: Vec2, s0: f64, s1: f64) -> f64 {
        match self.speed_value(v) {
            Some(s) => s * (s1 - s0),
            None => integrate(&|s| self.eval(x - v * s, v), s0, s1, CHORD_TOL),
        }
    }
}

/// `ϑ(x, v) = ∫_{-t_+}^{t_-} Σ(x - s v, v) ds`, the total absorption along the chord.
pub fn theta(sigma: &CollisionFrequency, domain: &SpatialDomain, p: PhasePoint) -> Result<f64> {
    let e = domain.exit_times(p)?;
    let v = domain.embed(p.v);
    Ok(sigma.chord_integral(domain.embed(p.x), v, -e.t_plus, e.t_minus))
}

/// One separable term `α(x) β(v) ∫ θ(w) φ(x, w) dw`.
#[derive(Clone)]
pub struct KernelTerm {
    pub alpha: SpatialProfile,
    pub beta: VelocityProfile,
    pub theta: VelocityProfile,
}

impl KernelTerm {
    pub fn new(
        alpha: impl Fn(Vec2) -> f64 + Send + Sync + 'static,
        beta: impl Fn(Vec2) -> f64 + Send + Sync + 'static,
        theta: impl Fn(Vec2) -> f64 + Send + Sync + 'static,
    ) -> Self {
        KernelTerm {
            alpha: Arc::new(alpha),
            beta: Arc::new(beta),
            theta: Arc::new(theta),
        }
    }
}

/// Finite sum of separable terms whose velocity factors vanish outside `a ≤ |v| ≤ b`.
#[derive(Clone)]
pub struct RegularCollisionKernel {
    terms: Vec<KernelTerm>,
    support: (f64, f64),
}

impl fmt::Debug for RegularCollisionKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RegularCollisionKernel")
            .field("terms", &self.terms.len())
            .field("support", &self.support)
            .finish()
    }
}

impl RegularCollisionKernel {
    pub fn new(terms: Vec<KernelTerm>, a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::BadSupport(a));
        }
        if !(b >= a && b.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "kernel support needs b ≥ a, got [{a}, {b}]"
            )));
        }
        Ok(RegularCollisionKernel {
            terms,
            support: (a, b),
        })
    }

    pub fn zero(a: f64, b: f64) -> Result<Self> {
        Self::new(Vec::new(), a, b)
    }

    pub fn terms(&self) -> &[KernelTerm] {
        &self.terms
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Samples the kernel on `grid` once; [`KernelTable::apply`] then costs `O(terms · n)`.
    pub fn tabulate(&self, grid: &crate::grid::PhaseGrid) -> Result<KernelTable> {
        let (ga, gb) = grid.velocity.support();
        let (a, b) = self.support;
        if !self.terms.is_empty() && (ga > a || gb < b) {
            return Err(Error::GridMismatch(format!(
                "velocity grid [{ga}, {gb}] does not cover the kernel support [{a}, {b}]"
            )));
        }
        let xs = grid.spatial.nodes();
        let vs = grid.velocity.nodes();
        let vw = grid.velocity.weights();
        let terms = self
            .terms
            .iter()
            .map(|t| TermTable {
                alpha: xs.iter().map(|x| (t.alpha)(*x)).collect(),
                beta: vs.iter().map(|v| (t.beta)(*v)).collect(),
                theta_w: vs.iter().zip(vw).map(|(v, w)| (t.theta)(*v) * w).collect(),
            })
            .collect();
        Ok(KernelTable {
            terms,
            nv: vs.len(),
        })
    }

    /// `(Kφ)(x, v) = Σ_i α_i(x) β_i(v) ⟨θ_i, φ(x, ·)⟩`.
    pub fn apply(&self, phi: &PhaseGridFunction) -> Result<PhaseGridFunction> {
        let table = self.tabulate(&phi.grid)?;
        let mut out = vec![C64::new(0.0, 0.0); phi.values.len()];
        table.apply(&phi.values, &mut out);
        PhaseGridFunction::new(phi.grid.clone(), out)
    }

    /// Hölder bound `Σ_i ‖α_i‖_∞ ‖β_i‖_p ‖θ_i‖_q` on the grid's quadrature.
    pub fn holder_bound(&self, grid: &crate::grid::PhaseGrid, p: f64) -> f64 {
        let q = p / (p - 1.0);
        self.terms
            .iter()
            .map(|t| {
                let amax = grid
                    .spatial
                    .nodes()
                    .iter()
                    .map(|x| (t.alpha)(*x).abs())
                    .fold(0.0, f64::max);
                amax * grid.velocity.lp_norm(|v| (t.beta)(v), p)
                    * grid.velocity.lp_norm(|v| (t.theta)(v), q)
            })
            .sum()
    }
}

#[derive(Debug, Clone)]
struct TermTable {
    alpha: Vec<f64>,
    beta: Vec<f64>,
    theta_w: Vec<f64>,
}

/// A kernel sampled on a fixed phase grid.
#[derive(Debug, Clone)]
pub struct KernelTable {
    terms: Vec<TermTable>,
    nv: usize,
}

impl KernelTable {
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Overwrites `out` with `K values`. Works for real or complex samples.
    pub fn apply<T>(&self, values: &[T], out: &mut [T])
    where
        T: Copy
            + Default
            + Send
            + Sync
            + std::ops::Mul<f64, Output = T>
            + std::ops::Add<Output = T>,
    {
        let nv = self.nv;
        out.par_chunks_mut(nv)
            .zip(values.par_chunks(nv))
            .enumerate()
            .for_each(|(i, (row, phi))| {
                row.iter_mut().for_each(|r| *r = T::default());
                for t in &self.terms {
                    let moment = phi
                        .iter()
                        .zip(&t.theta_w)
                        .fold(T::default(), |acc, (f, w)| acc + *f * *w);
                    let scale = t.alpha[i];
                    for (r, b) in row.iter_mut().zip(&t.beta) {
                        *r = *r + moment * (scale * b);
                    }
                }
            });
    }

    pub fn nv(&self) -> usize {
        self.nv
    }

    /// The velocity block of `K` at spatial node `i`; overwrites `out`.
    pub fn apply_node(&self, i: usize, phi: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|r| *r = 0.0);
        for t in &self.terms {
            let moment: f64 =
                phi.iter().zip(&t.theta_w).map(|(f, w)| f * w).sum::<f64>() * t.alpha[i];
            for (r, b) in out.iter_mut().zip(&t.beta) {
                *r += moment * b;
            }
        }
    }

    /// Adjoint of [`KernelTable::apply`] with respect to the plain (unweighted) dot product.
    pub fn apply_transpose(&self, values: &[f64], out: &mut [f64]) {
        let nv = self.nv;
        out.par_chunks_mut(nv)
            .zip(values.par_chunks(nv))
            .enumerate()
            .for_each(|(i, (row, u))| {
                row.iter_mut().for_each(|r| *r = 0.0);
                for t in &self.terms {
                    let moment: f64 =
                        u.iter().zip(&t.beta).map(|(a, b)| a * b).sum::<f64>() * t.alpha[i];
                    for (r, w) in row.iter_mut().zip(&t.theta_w) {
                        *r += moment * w;
                    }
                }
            });
    }
}

/// Smooth bump supported on `a ≤ |v| ≤ b`, peak value `scale`.
pub fn smooth_bump(a: f64, b: f64, scale: f64) -> impl Fn(Vec2) -> f64 + Send + Sync + Clone {
    move |v: Vec2| {
        let s = v.norm();
        if s <= a || s >= b {
            return 0.0;
        }
        let u = (2.0 * s - a - b) / (b - a);
        scale * (1.0 - 1.0 / (1.0 - u * u)).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{PhaseGrid, VelocityGrid};

    #[test]
    fn theta_constant_and_quadratic() {
        let d = SpatialDomain::unit_disk();
        let p = PhasePoint::new(Vec2::ZERO, Vec2::new(1.0, 0.0));
        let one = CollisionFrequency::constant(1.0).unwrap();
        assert!((theta(&one, &d, p).unwrap() - 2.0).abs() < 1e-15);
        let quad = CollisionFrequency::general(|x, _| x.norm2(), 1.0).unwrap();
        let got = theta(&quad, &d, p).unwrap();
        // ∫_{-1}^{1} s² ds, adaptive oracle at 1e-10
        assert!((got - 0.666_666_666_666_666_6).abs() < 1e-10);
        assert!((got - 0.6666667).abs() < 1e-7);
    }

    #[test]
    fn general_frequency_is_symmetrized() {
        let skew = CollisionFrequency::general(|_, v| 1.0 + 0.5 * v.x, 2.0).unwrap();
        let v = Vec2::new(0.7, 0.2);
        assert_eq!(skew.eval(Vec2::ZERO, v), skew.eval(Vec2::ZERO, -v));
        assert_eq!(skew.eval(Vec2::ZERO, v), 1.0);
        assert!(CollisionFrequency::constant(-1.0).is_err());
        assert!(CollisionFrequency::speed(|_| 1.0, f64::NAN).is_err());
    }

    fn line_grid() -> PhaseGrid {
        let vel = VelocityGrid::annulus(1, 1.0, 2.0, 64, 0).unwrap();
        PhaseGrid::new(SpatialDomain::interval(0.0, 1.0).unwrap(), (8, 0), vel).unwrap()
    }

    #[test]
    fn constant_phi_factors_out() {
        let grid = std::sync::Arc::new(line_grid());
        let bump = smooth_bump(1.0, 2.0, 1.0);
        // normalize θ so that its grid quadrature is exactly 2
        let mass: f64 = grid
            .velocity
            .nodes()
            .iter()
            .zip(grid.velocity.weights())
            .map(|(v, w)| bump(*v) * w)
            .sum();
        let b2 = bump.clone();
        let k = RegularCollisionKernel::new(
            vec![KernelTerm::new(
                |_| 1.0,
                bump.clone(),
                move |v| 2.0 * b2(v) / mass,
            )],
            1.0,
            2.0,
        )
        .unwrap();
        let phi = PhaseGridFunction::from_fn(grid.clone(), |_, _| C64::new(1.0, 0.0));
        let out = k.apply(&phi).unwrap();
        for (i, val) in out.values.iter().enumerate() {
            let v = grid.point(i).v;
            assert!((val - C64::new(2.0 * bump(v), 0.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn empty_kernel_and_linearity() {
        let grid = std::sync::Arc::new(line_grid());
        let phi = PhaseGridFunction::from_fn(grid.clone(), |x, v| C64::new(x.x * v.x, x.x - v.x));
        let zero = RegularCollisionKernel::zero(1.0, 2.0)
            .unwrap()
            .apply(&phi)
            .unwrap();
        assert!(zero.values.iter().all(|v| v.norm() == 0.0));

        let bump = smooth_bump(1.0, 2.0, 1.0);
        let term =
            |scale: f64| KernelTerm::new(move |x| scale * (1.0 + x.x), bump.clone(), bump.clone());
        let twice = RegularCollisionKernel::new(vec![term(1.0), term(1.0)], 1.0, 2.0).unwrap();
        let doubled = RegularCollisionKernel::new(vec![term(2.0)], 1.0, 2.0).unwrap();
        let a = twice.apply(&phi).unwrap();
        let b = doubled.apply(&phi).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).norm() <= 1e-14 * (1.0 + y.norm()));
        }
    }

    #[test]
    fn grid_must_cover_support() {
        let grid = std::sync::Arc::new(line_grid());
        let phi = PhaseGridFunction::zeros(grid);
        let k =
            RegularCollisionKernel::new(vec![KernelTerm::new(|_| 1.0, |_| 1.0, |_| 1.0)], 0.5, 2.0)
                .unwrap();
        assert!(matches!(k.apply(&phi), Err(Error::GridMismatch(_))));
        assert!(matches!(
            RegularCollisionKernel::zero(0.0, 1.0),
            Err(Error::BadSupport(_))
        ));
    }

    #[test]
    fn bump_support() {
        let b = smooth_bump(1.0, 2.0, 1.0);
        assert_eq!(b(Vec2::new(0.99, 0.0)), 0.0);
        assert_eq!(b(Vec2::new(2.0, 0.0)), 0.0);
        assert!((b(Vec2::new(0.0, 1.5)) - 1.0).abs() < 1e-15);
    }
}

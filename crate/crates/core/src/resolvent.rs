//! Closed-form resolvent of the streaming operator with bounce-back boundary conditions.
//!
//! All operators are evaluated pointwise along chords:
//!
//! * `M_λ u(x, v) = u(x - τv, v) e^{-∫_0^τ λ + Σ}` on `Γ+`,
//! * `B_λ u(x, v) = u(x - t_- v, v) e^{-∫_0^{t_-} λ + Σ}`,
//! * `G_λ φ(x, v) = ∫_0^τ φ(x - sv, v) e^{-∫_0^s λ + Σ} ds` on `Γ+`,
//! * `C_λ φ(x, v) = ∫_0^{t_-} φ(x - sv, v) e^{-∫_0^s λ + Σ} ds` (no-reentry resolvent),
//!
//! and `(λ - T)^{-1} = B_λ H (I - M_λ H)^{-1} G_λ + C_λ`, where `(I - M_λ H)^{-1}` is the
//! pointwise multiplier `(1 - m_λ²)^{-1} (I + M_λ H)`.

use std::sync::Arc;

use crate::fields::CollisionFrequency;
use crate::geometry::{BoundaryNode, PhasePoint, SpatialDomain, Vec2, BOUNDARY_TOL};
use crate::quadrature::{integrate_complex, CHORD_TOL};
use crate::streaming::BounceBack;
use crate::{Error, PhaseFn, Result, C64};

/// Default threshold on `|1 - m_λ²|` below which λ is treated as spectral.
pub const NEAR_SINGULAR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceTag {
    /// `Γ-`: `v · n(x) < 0`.
    Incoming,
    /// `Γ+`: `v · n(x) > 0`.
    Outgoing,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceNode {
    pub x: Vec2,
    pub v: Vec2,
    /// `|v · n(x)|` times surface and velocity weights.
    pub weight: f64,
}

impl TraceNode {
    pub fn point(&self) -> PhasePoint {
        PhasePoint::new(self.x, self.v)
    }
}

/// Boundary × velocity nodes on one side of the phase-space boundary. Grazing pairs are
/// dropped.
#[derive(Debug, Clone)]
pub struct TraceNodes {
    pub tag: TraceTag,
    pub nodes: Vec<TraceNode>,
}

impl TraceNodes {
    pub fn new(boundary: &[BoundaryNode], velocities: &[(Vec2, f64)], tag: TraceTag) -> Self {
        let mut nodes = Vec::new();
        for b in boundary {
            for (v, wv) in velocities {
                let flux = v.dot(b.normal);
                if flux.abs() <= 1e-12 * v.norm() {
                    continue;
                }
                let keep = match tag {
                    TraceTag::Incoming => flux < 0.0,
                    TraceTag::Outgoing => flux > 0.0,
                };
                if keep {
                    nodes.push(TraceNode {
                        x: b.x,
                        v: *v,
                        weight: flux.abs() * b.weight * wv,
                    });
                }
            }
        }
        TraceNodes { tag, nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Samples of a boundary function on tagged trace nodes.
#[derive(Debug, Clone)]
pub struct TraceFunction {
    pub nodes: Arc<TraceNodes>,
    pub values: Vec<C64>,
}

impl TraceFunction {
    pub fn sample(nodes: Arc<TraceNodes>, f: PhaseFn<'_>) -> Self {
        let values = nodes.nodes.iter().map(|n| f(n.x, n.v)).collect();
        TraceFunction { nodes, values }
    }

    pub fn tag(&self) -> TraceTag {
        self.nodes.tag
    }

    /// Norm in `L^p(Γ±; |v·n| dγ ⊗ dv)`.
    pub fn p_norm(&self, p: f64) -> f64 {
        self.nodes
            .nodes
            .iter()
            .zip(&self.values)
            .map(|(n, v)| n.weight * v.norm().powf(p))
            .sum::<f64>()
            .powf(1.0 / p)
    }
}

/// The resolvent algebra at a fixed `λ`.
#[derive(Debug, Clone, Copy)]
pub struct Resolvent<'a> {
    domain: &'a SpatialDomain,
    sigma: &'a CollisionFrequency,
    gamma: BounceBack,
    lambda: C64,
    delta: f64,
}

impl<'a> Resolvent<'a> {
    /// Requires `Re λ ≥ -inf Σ` when `γ < 1` and `Re λ > -inf Σ` when `γ = 1`, so that
    /// `|m_λ| < 1` on every chord of positive length.
    pub fn new(
        domain: &'a SpatialDomain,
        sigma: &'a CollisionFrequency,
        gamma: BounceBack,
        lambda: C64,
    ) -> Result<Self> {
        let shifted = lambda.re + sigma.floor();
        let ok = if gamma.value() < 1.0 {
            shifted >= 0.0
        } else {
            shifted > 0.0
        };
        if !ok || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "Re λ = {} is outside the region where the reflection series converges",
                lambda.re
            )));
        }
        Ok(Resolvent {
            domain,
            sigma,
            gamma,
            lambda,
            delta: NEAR_SINGULAR,
        })
    }

    /// Same as [`Resolvent::new`] without the convergence-region check; only
    /// [`Resolvent::m`] and [`Resolvent::solve_i_minus_mh`] are meaningful then.
    pub fn unchecked(
        domain: &'a SpatialDomain,
        sigma: &'a CollisionFrequency,
        gamma: BounceBack,
        lambda: C64,
    ) -> Self {
        Resolvent {
            domain,
            sigma,
            gamma,
            lambda,
            delta: NEAR_SINGULAR,
        }
    }

    pub fn with_threshold(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn lambda(&self) -> C64 {
        self.lambda
    }

    pub fn gamma(&self) -> BounceBack {
        self.gamma
    }

    /// `exp(-λ s - ∫_0^s Σ(x - r v, v) dr)`.
    fn attenuation(&self, x: Vec2, v: Vec2, s: f64) -> C64 {
        (-self.lambda * s - self.sigma.chord_integral(x, v, 0.0, s)).exp()
    }

    /// `∫_0^len φ(x - s v, v) · attenuation(s) ds`.
    fn backward_integral(&self, phi: PhaseFn<'_>, x: Vec2, v: Vec2, len: f64) -> C64 {
        match self.sigma.speed_value(v) {
            Some(s) => {
                let mu = self.lambda + s;
                integrate_complex(
                    &|r| phi(x - v * r, v) * (-mu * r).exp(),
                    0.0,
                    len,
                    CHORD_TOL,
                )
            }
            None => integrate_complex(
                &|r| phi(x - v * r, v) * self.attenuation(x, v, r),
                0.0,
                len,
                CHORD_TOL,
            ),
        }
    }

    fn chord(&self, p: PhasePoint) -> Result<(Vec2, Vec2, crate::geometry::ExitTimes)> {
        let e = self.domain.exit_times(p)?;
        Ok((self.domain.embed(p.x), self.domain.embed(p.v), e))
    }

    fn require_outgoing(&self, p: PhasePoint) -> Result<(Vec2, Vec2, crate::geometry::ExitTimes)> {
        let (x, v, e) = self.chord(p)?;
        let tol = BOUNDARY_TOL * self.domain.diameter() / self.domain.speed(v);
        if e.t_plus > tol || e.grazing {
            return Err(Error::TagMismatch(format!(
                "({}, {}) with v = ({}, {}) is not an outgoing boundary point",
                x.x, x.y, v.x, v.y
            )));
        }
        Ok((x, v, e))
    }

    /// `m_λ = γ exp(-λ τ - ϑ)`; constant along each chord.
    pub fn m(&self, p: PhasePoint) -> Result<C64> {
        let (x, v, e) = self.chord(p)?;
        let theta = self.sigma.chord_integral(x, v, -e.t_plus, e.t_minus);
        Ok((-self.lambda * e.tau - theta).exp() * self.gamma.value())
    }

    /// `M_λ u` at an outgoing point.
    pub fn apply_m(&self, u: PhaseFn<'_>, p: PhasePoint) -> Result<C64> {
        let (x, v, e) = self.require_outgoing(p)?;
        let y = self.domain.clamp_to_closure(x - v * e.tau);
        Ok(u(y, v) * self.attenuation(x, v, e.tau))
    }

    /// `B_λ u` at any point of the closure.
    pub fn apply_b(&self, u: PhaseFn<'_>, p: PhasePoint) -> Result<C64> {
        let (x, v, e) = self.chord(p)?;
        let y = self.domain.clamp_to_closure(x - v * e.t_minus);
        Ok(u(y, v) * self.attenuation(x, v, e.t_minus))
    }

    /// `G_λ φ` at an outgoing point.
    pub fn apply_g(&self, phi: PhaseFn<'_>, p: PhasePoint) -> Result<C64> {
        let (x, v, e) = self.require_outgoing(p)?;
        Ok(self.backward_integral(phi, x, v, e.tau))
    }

    /// `C_λ φ`.
    pub fn apply_c(&self, phi: PhaseFn<'_>, p: PhasePoint) -> Result<C64> {
        let (x, v, e) = self.chord(p)?;
        Ok(self.backward_integral(phi, x, v, e.t_minus))
    }

    /// `(I - M_λ H)^{-1} ψ` at an outgoing point.
    pub fn solve_i_minus_mh(&self, psi: PhaseFn<'_>, p: PhasePoint) -> Result<C64> {
        let (x, v, e) = self.require_outgoing(p)?;
        let m = self.m(p)?;
        let den = C64::new(1.0, 0.0) - m * m;
        if den.norm() <= self.delta {
            return Err(Error::NearSingular {
                margin: den.norm(),
                threshold: self.delta,
            });
        }
        let far = self.domain.clamp_to_closure(x - v * e.tau);
        Ok((psi(x, v) + m * psi(far, -v)) / den)
    }

    /// `(I - M_λ H) ψ` at an outgoing point, for checking [`Resolvent::solve_i_minus_mh`].
    pub fn apply_i_minus_mh(&self, psi: PhaseFn<'_>, p: PhasePoint) -> Result<C64> {
        let (x, v, e) = self.require_outgoing(p)?;
        let far = self.domain.clamp_to_closure(x - v * e.tau);
        Ok(psi(x, v) - self.m(p)? * psi(far, -v))
    }

    /// `(I - M_λ H)^{-1} G_λ φ` at the outgoing point `(y, w)` of a chord of length `tau`,
    /// whose other end is `far`.
    fn reflected_source(
        &self,
        phi: PhaseFn<'_>,
        y: Vec2,
        w: Vec2,
        far: Vec2,
        tau: f64,
    ) -> Result<C64> {
        let g_here = self.backward_integral(phi, y, w, tau);
        let g_far = self.backward_integral(phi, far, -w, tau);
        let m = (-self.lambda * tau - self.sigma.chord_integral(y, w, 0.0, tau)).exp()
            * self.gamma.value();
        let den = C64::new(1.0, 0.0) - m * m;
        if den.norm() <= self.delta {
            return Err(Error::NearSingular {
                margin: den.norm(),
                threshold: self.delta,
            });
        }
        Ok((g_here + m * g_far) / den)
    }

    /// `[(λ - T)^{-1} φ](x, v) = [B_λ H (I - M_λ H)^{-1} G_λ φ + C_λ φ](x, v)`.
    pub fn apply(&self, phi: PhaseFn<'_>, p: PhasePoint) -> Result<C64> {
        let (x, v, e) = self.chord(p)?;
        let direct = self.backward_integral(phi, x, v, e.t_minus);
        if e.grazing {
            return Ok(direct);
        }
        Ok(direct + self.reentry(phi, x, v, e)?)
    }

    /// `[B_λ H (I - M_λ H)^{-1} G_λ φ](x, v)`.
    pub fn apply_reentry(&self, phi: PhaseFn<'_>, p: PhasePoint) -> Result<C64> {
        let (x, v, e) = self.chord(p)?;
        if e.grazing {
            return Ok(C64::new(0.0, 0.0));
        }
        self.reentry(phi, x, v, e)
    }

    fn reentry(
        &self,
        phi: PhaseFn<'_>,
        x: Vec2,
        v: Vec2,
        e: crate::geometry::ExitTimes,
    ) -> Result<C64> {
        let entry = self.domain.clamp_to_closure(x - v * e.t_minus);
        let exit = self.domain.clamp_to_closure(x + v * e.t_plus);
        // H maps the outgoing value at (entry, -v) onto the incoming pair (entry, v).
        let w = self.reflected_source(phi, entry, -v, exit, e.tau)?;
        Ok(w * self.gamma.value() * self.attenuation(x, v, e.t_minus))
    }

    /// Series term `𝒥_n(λ)φ`, `n ≥ 1`, the Laplace transform of the `n`-th reflection
    /// term of the semigroup. Needs a speed-homogeneous Σ.
    pub fn series_term(&self, phi: PhaseFn<'_>, p: PhasePoint, n: usize) -> Result<C64> {
        if n == 0 {
            return Err(Error::InvalidParameter("series index starts at 1".into()));
        }
        let (x, v, e) = self.chord(p)?;
        let mu = self.lambda
            + self
                .sigma
                .speed_value(v)
                .ok_or(Error::NonHomogeneousSigma)?;
        if e.grazing {
            return Ok(C64::new(0.0, 0.0));
        }
        let entry = self.domain.clamp_to_closure(x - v * e.t_minus);
        let exit = self.domain.clamp_to_closure(x + v * e.t_plus);
        let gpow = self.gamma.value().powi(n as i32);
        let m = (n - 1) / 2;
        let (chords, integral) = if n % 2 == 1 {
            (2 * m, self.backward_integral(phi, entry, -v, e.tau))
        } else {
            (2 * m + 1, self.backward_integral(phi, exit, v, e.tau))
        };
        Ok(integral * (-mu * (chords as f64 * e.tau + e.t_minus)).exp() * gpow)
    }

    /// `M_λ u` on every node of an outgoing trace grid.
    pub fn apply_m_trace(
        &self,
        u: &TraceFunctionRef<'_>,
        out: Arc<TraceNodes>,
    ) -> Result<TraceFunction> {
        if u.tag != TraceTag::Incoming {
            return Err(Error::TagMismatch("M_λ acts on incoming traces".into()));
        }
        if out.tag != TraceTag::Outgoing {
            return Err(Error::TagMismatch("M_λ produces outgoing traces".into()));
        }
        let values = out
            .nodes
            .iter()
            .map(|n| self.apply_m(u.f, n.point()))
            .collect::<Result<_>>()?;
        Ok(TraceFunction { nodes: out, values })
    }

    /// `(I - M_λ H)^{-1} ψ` on every node of an outgoing trace grid.
    pub fn solve_trace(
        &self,
        psi: &TraceFunctionRef<'_>,
        out: Arc<TraceNodes>,
    ) -> Result<TraceFunction> {
        if psi.tag != TraceTag::Outgoing || out.tag != TraceTag::Outgoing {
            return Err(Error::TagMismatch(
                "(I - M_λH)^{-1} acts on outgoing traces".into(),
            ));
        }
        let values = out
            .nodes
            .iter()
            .map(|n| self.solve_i_minus_mh(psi.f, n.point()))
            .collect::<Result<_>>()?;
        Ok(TraceFunction { nodes: out, values })
    }

    /// Largest relative violation of `ψ|Γ-(x, v) = γ ψ|Γ+(x, -v)` for `ψ = (λ - T)^{-1} φ`
    /// over the incoming nodes.
    pub fn boundary_residual(&self, phi: PhaseFn<'_>, incoming: &TraceNodes) -> Result<f64> {
        if incoming.tag != TraceTag::Incoming {
            return Err(Error::TagMismatch(
                "boundary residual is evaluated on Γ-".into(),
            ));
        }
        let mut worst: f64 = 0.0;
        for n in &incoming.nodes {
            let inside = self.apply(phi, n.point())?;
            let outside = self.apply(phi, n.point().reversed())? * self.gamma.value();
            let scale = inside.norm().max(outside.norm()).max(f64::MIN_POSITIVE);
            worst = worst.max((inside - outside).norm() / scale);
        }
        Ok(worst)
    }
}

/// A closed-form boundary function together with the side it lives on.
#[derive(Clone, Copy)]
pub struct TraceFunctionRef<'a> {
    pub tag: TraceTag,
    pub f: PhaseFn<'a>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> (SpatialDomain, CollisionFrequency, BounceBack) {
        (
            SpatialDomain::unit_disk(),
            CollisionFrequency::constant(1.0).unwrap(),
            BounceBack::new(0.5).unwrap(),
        )
    }

    fn one(_: Vec2, _: Vec2) -> C64 {
        C64::new(1.0, 0.0)
    }

    fn zero(_: Vec2, _: Vec2) -> C64 {
        C64::new(0.0, 0.0)
    }

    const EDGE: PhasePoint = PhasePoint::new(Vec2::new(1.0, 0.0), Vec2::new(1.0, 0.0));
    const CENTER: PhasePoint = PhasePoint::new(Vec2::ZERO, Vec2::new(1.0, 0.0));
    const ENTRY: PhasePoint = PhasePoint::new(Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0));

    #[test]
    fn m_lambda_values() {
        let d = SpatialDomain::unit_disk();
        let g = BounceBack::new(0.5).unwrap();
        let free = CollisionFrequency::constant(0.0).unwrap();
        let r = Resolvent::new(&d, &free, g, C64::new(0.0, 0.0)).unwrap();
        assert!((r.m(EDGE).unwrap() - 0.5).norm() < 1e-15);
        let (d, s, g) = data();
        let r = Resolvent::new(&d, &s, g, C64::new(0.0, 0.0)).unwrap();
        let m = r.m(EDGE).unwrap();
        assert!((m.re - 0.5 * (-2f64).exp()).abs() < 1e-16 && (m.re - 0.0676676).abs() < 1e-7);
        let far = Resolvent::new(&d, &s, g, C64::new(1e3, 5.0)).unwrap();
        assert!(far.m(EDGE).unwrap().norm() < 1e-300);
    }

    #[test]
    fn elementary_operators() {
        let (d, s, g) = data();
        let r = Resolvent::new(&d, &s, g, C64::new(0.0, 0.0)).unwrap();
        let e2 = (-2f64).exp();
        assert!((r.apply_m(&one, EDGE).unwrap().re - e2).abs() < 1e-15);
        assert_eq!(r.apply_m(&zero, EDGE).unwrap(), C64::new(0.0, 0.0));
        assert!((r.apply_b(&one, CENTER).unwrap().re - (-1f64).exp()).abs() < 1e-15);
        let tag = |x: Vec2, v: Vec2| C64::new(x.x + 3.0, v.y);
        assert_eq!(r.apply_b(&tag, ENTRY).unwrap(), tag(ENTRY.x, ENTRY.v));
        assert!((r.apply_g(&one, EDGE).unwrap().re - (1.0 - e2)).abs() < 1e-12);
        assert!((r.apply_g(&one, EDGE).unwrap().re - 0.8646647).abs() < 1e-7);
        assert!((r.apply_c(&one, CENTER).unwrap().re - (1.0 - (-1f64).exp())).abs() < 1e-12);
        assert!((r.apply_c(&one, CENTER).unwrap().re - 0.6321206).abs() < 1e-7);
        assert_eq!(r.apply_c(&one, ENTRY).unwrap(), C64::new(0.0, 0.0));
        assert_eq!(r.apply_g(&zero, EDGE).unwrap(), C64::new(0.0, 0.0));
        assert!(matches!(
            r.apply_m(&one, CENTER),
            Err(Error::TagMismatch(_))
        ));
        let fast = Resolvent::new(&d, &s, g, C64::new(1e4, 0.0)).unwrap();
        assert!(fast.apply_g(&one, EDGE).unwrap().norm() < 2e-4);

        let free = CollisionFrequency::constant(0.0).unwrap();
        let r0 = Resolvent::new(&d, &free, g, C64::new(0.0, 0.0)).unwrap();
        assert!((r0.apply_m(&one, EDGE).unwrap() - 1.0).norm() < 1e-15);
        assert!((r0.apply_b(&one, CENTER).unwrap() - 1.0).norm() < 1e-15);
    }

    #[test]
    fn inverse_on_the_diameter() {
        let (d, s, g) = data();
        let r = Resolvent::new(&d, &s, g, C64::new(0.0, 0.0)).unwrap();
        let m = 0.5 * (-2f64).exp();
        let got = r.solve_i_minus_mh(&one, EDGE).unwrap();
        assert!((got.re - 1.0 / (1.0 - m)).abs() < 1e-14);
        assert!((got.re - 1.0725765).abs() < 1e-5);
        assert_eq!(r.solve_i_minus_mh(&zero, EDGE).unwrap(), C64::new(0.0, 0.0));
        let tiny = BounceBack::new(1e-12).unwrap();
        let r = Resolvent::new(&d, &s, tiny, C64::new(0.0, 0.0)).unwrap();
        let psi = |x: Vec2, v: Vec2| C64::new(x.y + 2.0, v.x);
        let p = PhasePoint::new(Vec2::polar(1.0, 0.3), Vec2::new(1.0, 0.2));
        assert!((r.solve_i_minus_mh(&psi, p).unwrap() - psi(p.x, p.v)).norm() < 1e-11);
    }

    #[test]
    fn near_singular_lambda_is_reported() {
        let (d, s, g) = data();
        let lambda = C64::new(0.5f64.ln() / 2.0 - 1.0, 0.0);
        let r = Resolvent::unchecked(&d, &s, g, lambda);
        assert!(matches!(
            r.solve_i_minus_mh(&one, EDGE),
            Err(Error::NearSingular { .. })
        ));
        assert!(Resolvent::new(&d, &s, g, lambda).is_err());
    }

    #[test]
    fn full_resolvent_reference_value() {
        let (d, s, g) = data();
        let r = Resolvent::new(&d, &s, g, C64::new(0.0, 0.0)).unwrap();
        let got = r.apply(&one, CENTER).unwrap();
        let m = 0.5 * (-2f64).exp();
        let want = (1.0 - (-1f64).exp()) + 0.5 * (-1f64).exp() * (1.0 - (-2f64).exp()) / (1.0 - m);
        assert!((got.re - want).abs() < 1e-12 && got.im.abs() < 1e-15);
        assert!((got.re - 0.8027).abs() < 1e-4);
        assert_eq!(r.apply(&zero, CENTER).unwrap(), C64::new(0.0, 0.0));
        let tiny = BounceBack::new(1e-12).unwrap();
        let r = Resolvent::new(&d, &s, tiny, C64::new(0.0, 0.0)).unwrap();
        let c = r.apply_c(&one, CENTER).unwrap();
        assert!((r.apply(&one, CENTER).unwrap() - c).norm() < 1e-12);
    }

    #[test]
    fn series_terms() {
        let (d, s, g) = data();
        let r = Resolvent::new(&d, &s, g, C64::new(0.0, 0.0)).unwrap();
        let j1 = r.series_term(&one, CENTER, 1).unwrap();
        let want1 = 0.5 * (-1f64).exp() * (1.0 - (-2f64).exp());
        assert!((j1.re - want1).abs() < 1e-13 && (j1.re - 0.1590567).abs() < 1e-4);
        let j2 = r.series_term(&one, CENTER, 2).unwrap();
        let want2 = 0.25 * (-2f64).exp() * (-1f64).exp() * (1.0 - (-2f64).exp());
        assert!((j2.re - want2).abs() < 1e-13 && (j2.re - 0.0107661).abs() < 1e-5);
        let partial: C64 = (1..=8)
            .map(|n| r.series_term(&one, CENTER, n).unwrap())
            .sum();
        let closed = r.apply(&one, CENTER).unwrap() - r.apply_c(&one, CENTER).unwrap();
        assert!((partial - closed).norm() < 1e-6 * closed.norm());
        assert!(r.series_term(&one, CENTER, 0).is_err());
    }

    #[test]
    fn trace_tags_are_enforced() {
        let (d, s, g) = data();
        let r = Resolvent::new(&d, &s, g, C64::new(0.5, 0.0)).unwrap();
        let bnd = d.boundary_quadrature(16).unwrap();
        let vel = [(Vec2::new(1.0, 0.0), 1.0), (Vec2::new(-0.5, 0.5), 1.0)];
        let out = Arc::new(TraceNodes::new(&bnd, &vel, TraceTag::Outgoing));
        let inc = Arc::new(TraceNodes::new(&bnd, &vel, TraceTag::Incoming));
        assert!(!out.is_empty() && !inc.is_empty());
        let u = TraceFunctionRef {
            tag: TraceTag::Outgoing,
            f: &one,
        };
        assert!(matches!(
            r.apply_m_trace(&u, out.clone()),
            Err(Error::TagMismatch(_))
        ));
        let u = TraceFunctionRef {
            tag: TraceTag::Incoming,
            f: &one,
        };
        assert!(matches!(
            r.apply_m_trace(&u, inc.clone()),
            Err(Error::TagMismatch(_))
        ));
        let mu = r.apply_m_trace(&u, out.clone()).unwrap();
        assert!(mu.values.iter().all(|v| v.norm() <= 1.0));
        assert!(matches!(
            r.boundary_residual(&one, &out),
            Err(Error::TagMismatch(_))
        ));
        assert!(r.boundary_residual(&one, &inc).unwrap() < 1e-8);
    }
}

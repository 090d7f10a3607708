//! A quick invariant suite over the public API, seeded and deterministic.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dyson::{v_apply, DysonConfig};
use crate::fields::{smooth_bump, theta, CollisionFrequency, KernelTerm, RegularCollisionKernel};
use crate::geometry::{PhasePoint, SpatialDomain, Vec2};
use crate::grid::{PhaseGrid, PhaseGridFunction, VelocityGrid};
use crate::resolvent::{Resolvent, TraceNodes, TraceTag};
use crate::streaming::{characteristics_oracle, evolve, laplace_transform, u_eval, BounceBack};
use crate::{Result, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub samples: usize,
    pub worst: f64,
    pub tolerance: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.worst <= self.tolerance
    }
}

fn hexagon() -> SpatialDomain {
    SpatialDomain::polygon(
        (0..6)
            .map(|k| Vec2::polar(1.0, k as f64 * PI / 3.0))
            .collect(),
    )
    .expect("regular hexagon")
}

// both test domains contain the disk of radius 0.85 around the origin
fn phase_point(rng: &mut ChaCha8Rng) -> PhasePoint {
    let x = Vec2::polar(0.85 * rng.gen::<f64>().sqrt(), rng.gen_range(0.0..2.0 * PI));
    let v = Vec2::polar(rng.gen_range(0.5..2.0), rng.gen_range(0.0..2.0 * PI));
    PhasePoint::new(x, v)
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

fn phi(x: Vec2, v: Vec2) -> C64 {
    C64::new(1.5 + 0.5 * (x.x + 0.3 * v.y).sin(), 0.25 * x.y * v.x)
}

fn check(
    name: &'static str,
    samples: usize,
    tolerance: f64,
    f: impl FnMut() -> Result<f64>,
) -> Result<CheckResult> {
    let mut f = f;
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        worst = worst.max(f()?);
    }
    Ok(CheckResult {
        name,
        samples,
        worst,
        tolerance,
    })
}

/// Runs every check; errors only if an operation fails outright.
pub fn run(seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let domains = [SpatialDomain::unit_disk(), hexagon()];
    let sigma = CollisionFrequency::constant(1.0)?;
    let general = CollisionFrequency::general(
        |x: Vec2, v: Vec2| 1.0 + x.norm2() + 0.3 * (x.x * v.y).sin(),
        3.0,
    )?;
    let half = BounceBack::new(0.5)?;
    let mut out = Vec::new();

    out.push(check("chord reversal", 2000, 1e-12, || {
        let d = &domains[rng.gen_range(0..2)];
        let p = phase_point(&mut rng);
        let (e, r) = (d.exit_times(p)?, d.exit_times(p.reversed())?);
        let th = theta(&general, d, p)?;
        let thr = theta(&general, d, p.reversed())?;
        Ok((e.t_plus - r.t_minus)
            .abs()
            .max((e.tau - r.tau).abs())
            .max((th - thr).abs() / th))
    })?);

    out.push(check("semigroup law", 2000, 1e-12, || {
        let d = &domains[rng.gen_range(0..2)];
        let p = phase_point(&mut rng);
        let (t, s) = (rng.gen_range(0.0..4.0), rng.gen_range(0.0..4.0));
        let direct = u_eval(&phi, d, &sigma, half, p, t + s)?;
        let inner = |x: Vec2, v: Vec2| {
            u_eval(&phi, d, &sigma, half, PhasePoint::new(x, v), s).unwrap_or_default()
        };
        Ok(rel(u_eval(&inner, d, &sigma, half, p, t)?, direct))
    })?);

    out.push(check(
        "explicit semigroup vs characteristics",
        500,
        1e-12,
        || {
            let d = &domains[rng.gen_range(0..2)];
            let p = phase_point(&mut rng);
            let t = rng.gen_range(0.0..6.0);
            let a = u_eval(&phi, d, &sigma, half, p, t)?;
            Ok(rel(a, characteristics_oracle(&phi, d, &sigma, half, p, t)?))
        },
    )?);

    let vel = VelocityGrid::annulus(2, 1.0, 2.0, 2, 8)?;
    let pairs: Vec<(Vec2, f64)> = vel
        .nodes()
        .iter()
        .copied()
        .zip(vel.weights().iter().copied())
        .collect();
    let mut traces = Vec::new();
    for d in &domains {
        traces.push(TraceNodes::new(
            &d.boundary_quadrature(16)?,
            &pairs,
            TraceTag::Incoming,
        ));
    }
    let mut which = 0;
    out.push(check("bounce-back trace condition", 4, 1e-8, || {
        let i = which % 2;
        which += 1;
        let lambda = C64::new(rng.gen_range(-0.5..1.0), rng.gen_range(-5.0..5.0));
        Resolvent::new(&domains[i], &sigma, half, lambda)?.boundary_residual(&phi, &traces[i])
    })?);

    out.push(check("Laplace identity", 10, 1e-4, || {
        let d = &domains[rng.gen_range(0..2)];
        let p = phase_point(&mut rng);
        let gamma = BounceBack::new(rng.gen_range(0.2..1.0))?;
        let lambda = C64::new(rng.gen_range(-0.8..1.0), rng.gen_range(-5.0..5.0));
        let r = Resolvent::new(d, &sigma, gamma, lambda)?.apply(&phi, p)?;
        Ok(rel(
            r,
            laplace_transform(&phi, 2.0, d, &sigma, gamma, p, lambda, 1e-9)?,
        ))
    })?);

    out.push(check("reflection series", 100, 1e-6, || {
        let gamma = BounceBack::new(rng.gen_range(0.05..0.4))?;
        let lambda = C64::new(rng.gen_range(0.2..1.0), rng.gen_range(-10.0..10.0));
        let x = Vec2::polar(0.5 * rng.gen::<f64>().sqrt(), rng.gen_range(0.0..2.0 * PI));
        let p = PhasePoint::new(
            x,
            Vec2::polar(rng.gen_range(1.0..2.0), rng.gen_range(0.0..2.0 * PI)),
        );
        let r = Resolvent::new(&domains[0], &sigma, gamma, lambda)?;
        let mut series = C64::new(0.0, 0.0);
        for n in 1..=8 {
            series += r.series_term(&phi, p, n)?;
        }
        Ok(rel(series, r.apply(&phi, p)? - r.apply_c(&phi, p)?))
    })?);

    let grid = Arc::new(PhaseGrid::new(
        domains[0].clone(),
        (4, 8),
        VelocityGrid::annulus(2, 1.0, 2.0, 1, 8)?,
    )?);
    let kernel = RegularCollisionKernel::new(
        vec![KernelTerm::new(
            |_| 1.0,
            smooth_bump(1.0, 2.0, 0.3),
            smooth_bump(1.0, 2.0, 0.3),
        )],
        1.0,
        2.0,
    )?;
    let zero = RegularCollisionKernel::zero(1.0, 2.0)?;
    let f = PhaseGridFunction::from_fn(grid.clone(), phi);
    out.push(check("Dyson with K = 0 is streaming", 1, 0.0, || {
        let a = v_apply(&f, 0.7, DysonConfig::default(), &zero, &sigma, half)?.value;
        let b = evolve(&f, 0.7, &sigma, half)?;
        Ok(if a.values == b.values { 0.0 } else { 1.0 })
    })?);

    out.push(check("Dyson positivity", 50, 0.0, || {
        let values = (0..grid.len())
            .map(|_| C64::new(rng.gen::<f64>(), 0.0))
            .collect();
        let g = PhaseGridFunction::new(grid.clone(), values)?;
        let r = v_apply(
            &g,
            rng.gen_range(0.0..1.5),
            DysonConfig::new(3, 16)?,
            &kernel,
            &sigma,
            half,
        )?;
        Ok(r.value
            .values
            .iter()
            .filter(|v| v.re < 0.0 || v.im != 0.0)
            .count() as f64)
    })?);

    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        for c in run(7).unwrap() {
            assert!(c.passed(), "{c:?}");
        }
    }

    #[test]
    fn suite_is_deterministic() {
        assert_eq!(run(3).unwrap(), run(3).unwrap());
    }
}

//! Sampling of the spectral functions `F_k = (ln γ - ϑ)/τ - 2πik/τ`.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::fields::CollisionFrequency;
use crate::geometry::{PhasePoint, SpatialDomain, Vec2};
use crate::grid::SpatialGrid;
use crate::resolvent::NEAR_SINGULAR;
use crate::streaming::BounceBack;
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralSample {
    pub value: C64,
    pub k: i64,
    pub tau: f64,
    pub theta: f64,
    pub point: PhasePoint,
}

impl SpectralSample {
    /// Recomputes the value from `tau`, `theta` and `k`.
    pub fn reevaluate(&self, gamma: BounceBack) -> C64 {
        f_k(gamma, self.tau, self.theta, self.k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    /// Spatial resolution, as in [`SpatialGrid::new`].
    pub spatial: (usize, usize),
    pub speed_range: (f64, f64),
    /// Speeds are sampled endpoint-inclusive on `speed_range`.
    pub n_speeds: usize,
    /// Directions `(j + 1/2) 2π / n_angles`; ignored in 1D.
    pub n_angles: usize,
    pub k_max: u32,
    /// Defaults to `1e-3 · d / b`.
    pub tau_floor: Option<f64>,
}

impl ScanConfig {
    pub fn new(
        spatial: (usize, usize),
        speed_range: (f64, f64),
        n_speeds: usize,
        n_angles: usize,
    ) -> Self {
        ScanConfig {
            spatial,
            speed_range,
            n_speeds,
            n_angles,
            k_max: 8,
            tau_floor: None,
        }
    }

    pub fn with_k_max(mut self, k_max: u32) -> Self {
        self.k_max = k_max;
        self
    }

    pub fn tau_floor(&self, domain: &SpatialDomain) -> f64 {
        self.tau_floor
            .unwrap_or(1e-3 * domain.diameter() / self.speed_range.1)
    }

    fn validate(&self) -> Result<()> {
        let (a, b) = self.speed_range;
        if !(a > 0.0 && b >= a && b.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "speed range [{a}, {b}] must satisfy 0 < a ≤ b"
            )));
        }
        if self.n_speeds == 0 || self.n_angles == 0 {
            return Err(Error::InvalidParameter(
                "velocity resolution must be positive".into(),
            ));
        }
        if let Some(f) = self.tau_floor {
            if !(f > 0.0 && f.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "τ floor must be positive, got {f}"
                )));
            }
        }
        Ok(())
    }

    /// Sampled velocities.
    pub fn velocities(&self, dim: usize) -> Vec<Vec2> {
        let (a, b) = self.speed_range;
        let speeds: Vec<f64> = if self.n_speeds == 1 {
            vec![a]
        } else {
            (0..self.n_speeds)
                .map(|i| a + (b - a) * i as f64 / (self.n_speeds - 1) as f64)
                .collect()
        };
        let mut out = Vec::new();
        if dim == 1 {
            for s in &speeds {
                out.push(Vec2::scalar(*s));
                out.push(Vec2::scalar(-*s));
            }
        } else {
            for s in &speeds {
                for j in 0..self.n_angles {
                    out.push(Vec2::polar(
                        *s,
                        (j as f64 + 0.5) * 2.0 * PI / self.n_angles as f64,
                    ));
                }
            }
        }
        out
    }

    /// Sampled phase points in deterministic order.
    pub fn points(&self, domain: &SpatialDomain) -> Result<Vec<PhasePoint>> {
        self.validate()?;
        let grid = SpatialGrid::new(domain, self.spatial.0, self.spatial.1)?;
        let vel = self.velocities(domain.dim());
        Ok(grid
            .nodes()
            .iter()
            .flat_map(|x| vel.iter().map(move |v| PhasePoint::new(*x, *v)))
            .collect())
    }
}

fn f_k(gamma: BounceBack, tau: f64, theta: f64, k: i64) -> C64 {
    C64::new(
        (gamma.value().ln() - theta) / tau,
        -2.0 * PI * k as f64 / tau,
    )
}

fn require_strict(gamma: BounceBack) -> Result<()> {
    if gamma.value() >= 1.0 {
        return Err(Error::InvalidParameter(
            "spectral functions need γ < 1".into(),
        ));
    }
    Ok(())
}

/// `F_k(x, v)`.
pub fn f_k_eval(
    p: PhasePoint,
    k: i64,
    sigma: &CollisionFrequency,
    gamma: BounceBack,
    domain: &SpatialDomain,
    tau_floor: f64,
) -> Result<SpectralSample> {
    require_strict(gamma)?;
    let e = domain.exit_times(p)?;
    if e.grazing || e.tau < tau_floor {
        return Err(Error::GrazingChord {
            tau: e.tau,
            floor: tau_floor,
        });
    }
    let (x, v) = (domain.embed(p.x), domain.embed(p.v));
    let theta = sigma.chord_integral(x, v, -e.t_plus, e.t_minus);
    Ok(SpectralSample {
        value: f_k(gamma, e.tau, theta, k),
        k,
        tau: e.tau,
        theta,
        point: p,
    })
}

/// One sample per `(point, k)` with `τ ≥ τ_floor`, ordered by point then `k`.
pub fn scan_spectrum(
    config: &ScanConfig,
    domain: &SpatialDomain,
    sigma: &CollisionFrequency,
    gamma: BounceBack,
) -> Result<Vec<SpectralSample>> {
    require_strict(gamma)?;
    let floor = config.tau_floor(domain);
    let k_max = config.k_max as i64;
    let points = config.points(domain)?;
    let per_point: Vec<Vec<SpectralSample>> = points
        .par_iter()
        .map(|p| match f_k_eval(*p, 0, sigma, gamma, domain, floor) {
            Ok(s) => (-k_max..=k_max)
                .map(|k| SpectralSample {
                    value: f_k(gamma, s.tau, s.theta, k),
                    k,
                    ..s
                })
                .collect(),
            Err(_) => Vec::new(),
        })
        .collect();
    Ok(per_point.into_iter().flatten().collect())
}

/// Largest real part over the cloud.
pub fn spectral_bound(samples: &[SpectralSample]) -> Result<f64> {
    samples
        .iter()
        .map(|s| s.value.re)
        .reduce(f64::max)
        .ok_or(Error::EmptyCloud)
}

/// Chord data `(τ, ϑ)` sampled over `Γ+`, enough to evaluate `m_λ` at any `λ`.
#[derive(Debug, Clone, Default)]
pub struct TraceSampling {
    pub chords: Vec<(f64, f64)>,
}

impl TraceSampling {
    /// Chords through the given samples.
    pub fn from_samples(samples: &[SpectralSample]) -> Self {
        let mut chords: Vec<(f64, f64)> = samples
            .iter()
            .filter(|s| s.k == 0)
            .map(|s| (s.tau, s.theta))
            .collect();
        if chords.is_empty() {
            chords = samples.iter().map(|s| (s.tau, s.theta)).collect();
        }
        TraceSampling { chords }
    }

    /// Outgoing pairs `(x, v)` with `x` from a boundary quadrature of the given resolution.
    pub fn from_boundary(
        domain: &SpatialDomain,
        sigma: &CollisionFrequency,
        boundary_resolution: usize,
        velocities: &[Vec2],
    ) -> Result<Self> {
        let nodes = domain.boundary_quadrature(boundary_resolution)?;
        let mut chords = Vec::new();
        for b in &nodes {
            for v in velocities {
                let vv = domain.embed(*v);
                if vv.dot(b.normal) <= 1e-12 * vv.norm() {
                    continue;
                }
                let e = domain.exit_times(PhasePoint::new(b.x, *v))?;
                if e.grazing || e.tau <= 0.0 {
                    continue;
                }
                chords.push((e.tau, sigma.chord_integral(b.x, vv, -e.t_plus, e.t_minus)));
            }
        }
        Ok(TraceSampling { chords })
    }

    pub fn len(&self) -> usize {
        self.chords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chords.is_empty()
    }
}

/// Sampled `ess inf` of `min(|1 - m_λ|, |1 - m_λ²|)` over `Γ+`, and whether it exceeds
/// `δ` (default [`NEAR_SINGULAR`]).
pub fn resolvent_set_test(
    lambda: C64,
    gamma: BounceBack,
    sampling: &TraceSampling,
    delta: Option<f64>,
) -> (bool, f64) {
    let delta = delta.unwrap_or(NEAR_SINGULAR);
    let one = C64::new(1.0, 0.0);
    let margin = sampling
        .chords
        .iter()
        .map(|&(tau, theta)| {
            let m = (-lambda * tau - theta).exp() * gamma.value();
            (one - m).norm().min((one - m * m).norm())
        })
        .fold(f64::INFINITY, f64::min);
    (margin > delta, margin)
}

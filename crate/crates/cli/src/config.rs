//! JSON run configuration. Lengths in domain units, times in the same units divided by speed,
//! Σ, λ and rates in inverse time.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use transport_core::dyson::{DysonConfig, Parity, SweepConfig};
use transport_core::fields::{smooth_bump, CollisionFrequency, KernelTerm, RegularCollisionKernel};
use transport_core::geometry::{SpatialDomain, Vec2};
use transport_core::grid::{PhaseGrid, VelocityGrid};
use transport_core::spectra::ScanConfig;
use transport_core::streaming::BounceBack;
use transport_core::C64;

use crate::Failure;

/// Largest phase grid any command will allocate.
pub const MAX_PHASE_NODES: usize = 1 << 21;
/// Largest spectral cloud `spectrum` will write.
pub const MAX_SPECTRAL_SAMPLES: usize = 50_000_000;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSpec,
    pub sigma: SigmaSpec,
    pub gamma: f64,
    #[serde(default)]
    pub kernel: Option<KernelSpec>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub spectrum: SpectrumSpec,
    #[serde(default)]
    pub evolve: EvolveSpec,
    #[serde(default)]
    pub resolvent_verify: ResolventSpec,
    #[serde(default)]
    pub dyson: DysonSpec,
    #[serde(default)]
    pub rl_scan: RlScanSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Disk { center: [f64; 2], radius: f64 },
    Interval { a: f64, b: f64 },
    Polygon { vertices: Vec<[f64; 2]> },
}

/// Σ as `constant`, `Σ(v) = Σ c_i |v|^i`, or `Σ(x) = base + curvature·|x - center|²`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SigmaSpec {
    Constant {
        value: f64,
    },
    SpeedPolynomial {
        coefficients: Vec<f64>,
    },
    PositionQuadratic {
        base: f64,
        curvature: f64,
        #[serde(default)]
        center: [f64; 2],
    },
}

/// Terms `α β(v) ∫ θ(w) φ(x, w) dw` with constant `α` and smooth bumps supported on `support`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub support: [f64; 2],
    pub terms: Vec<KernelTermSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelTermSpec {
    #[serde(default = "one")]
    pub alpha: f64,
    pub beta_scale: f64,
    pub theta_scale: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub spatial: [usize; 2],
    pub speed_range: [f64; 2],
    pub speeds: usize,
    pub angles: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            spatial: [8, 16],
            speed_range: [1.0, 2.0],
            speeds: 2,
            angles: 8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Constant {
        value: f64,
    },
    Gaussian {
        center: [f64; 2],
        width: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec::Constant { value: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSpec {
    pub k_max: u32,
    #[serde(default)]
    pub tau_floor: Option<f64>,
}

impl Default for SpectrumSpec {
    fn default() -> Self {
        SpectrumSpec {
            k_max: 1,
            tau_floor: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveSpec {
    pub times: Vec<f64>,
}

impl Default for EvolveSpec {
    fn default() -> Self {
        EvolveSpec {
            times: vec![0.5, 1.0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolventSpec {
    /// `[re, im]` pairs.
    pub lambdas: Vec<[f64; 2]>,
    pub samples: usize,
    pub tol: f64,
    pub boundary_resolution: usize,
}

impl Default for ResolventSpec {
    fn default() -> Self {
        ResolventSpec {
            lambdas: vec![[0.0, 0.0], [0.5, 3.0]],
            samples: 20,
            tol: 1e-9,
            boundary_resolution: 16,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DysonSpec {
    pub t: f64,
    pub j_max: usize,
    pub nodes_per_unit_time: usize,
    /// When set, also report the singular-value tail of `R₁(t)` beyond this rank.
    #[serde(default)]
    pub r1_rank: Option<usize>,
}

impl Default for DysonSpec {
    fn default() -> Self {
        DysonSpec {
            t: 1.0,
            j_max: 3,
            nodes_per_unit_time: 32,
            r1_rank: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RlScanSpec {
    pub alpha: f64,
    pub betas: Vec<f64>,
    pub n: usize,
    pub parity: ParitySpec,
    pub cells: usize,
    pub directions: usize,
}

impl Default for RlScanSpec {
    fn default() -> Self {
        let d = SweepConfig::default();
        RlScanSpec {
            alpha: 0.0,
            betas: vec![0.0, 25.0, 50.0, 100.0, 200.0, 400.0],
            n: 0,
            parity: ParitySpec::Odd,
            cells: d.cells,
            directions: d.directions,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParitySpec {
    Odd,
    Even,
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Config(msg.into())
}

fn finite(name: &str, x: f64) -> Result<f64, Failure> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(invalid(format!("{name} must be finite, got {x}")))
    }
}

fn vec2(p: [f64; 2]) -> Vec2 {
    Vec2::new(p[0], p[1])
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, Failure> {
        serde_json::from_str(text).map_err(|e| invalid(format!("config: {e}")))
    }

    pub fn domain(&self) -> Result<SpatialDomain, Failure> {
        let d = match &self.domain {
            DomainSpec::Disk { center, radius } => SpatialDomain::disk(vec2(*center), *radius),
            DomainSpec::Interval { a, b } => SpatialDomain::interval(*a, *b),
            DomainSpec::Polygon { vertices } => {
                SpatialDomain::polygon(vertices.iter().copied().map(vec2).collect())
            }
        };
        d.map_err(|e| invalid(e.to_string()))
    }

    /// Largest `|x - c|` over the closed domain.
    fn reach(&self, c: Vec2) -> f64 {
        match &self.domain {
            DomainSpec::Disk { center, radius } => (vec2(*center) - c).norm() + radius,
            DomainSpec::Interval { a, b } => (a - c.x).abs().max((b - c.x).abs()),
            DomainSpec::Polygon { vertices } => vertices
                .iter()
                .map(|v| (vec2(*v) - c).norm())
                .fold(0.0, f64::max),
        }
    }

    pub fn sigma(&self) -> Result<CollisionFrequency, Failure> {
        let (_, vmax) = self.speed_range()?;
        let s = match &self.sigma {
            SigmaSpec::Constant { value } => CollisionFrequency::constant(*value),
            SigmaSpec::SpeedPolynomial { coefficients } => {
                if coefficients.is_empty()
                    || coefficients.iter().any(|c| !(c.is_finite() && *c >= 0.0))
                {
                    return Err(invalid(
                        "Σ polynomial coefficients must be finite and ≥ 0, at least one",
                    ));
                }
                let c = coefficients.clone();
                let bound = c.iter().rev().fold(0.0, |acc, ci| acc * vmax + ci);
                CollisionFrequency::speed(
                    move |v| c.iter().rev().fold(0.0, |acc, ci| acc * v.norm() + ci),
                    bound,
                )
            }
            SigmaSpec::PositionQuadratic {
                base,
                curvature,
                center,
            } => {
                let (base, curvature) =
                    (finite("Σ base", *base)?, finite("Σ curvature", *curvature)?);
                if base < 0.0 || curvature < 0.0 {
                    return Err(invalid("Σ base and curvature must be ≥ 0"));
                }
                let c = vec2(*center);
                let r = self.reach(c);
                CollisionFrequency::general(
                    move |x: Vec2, _| base + curvature * (x - c).norm2(),
                    base + curvature * r * r,
                )
            }
        };
        s.map_err(|e| invalid(e.to_string()))
    }

    pub fn gamma(&self) -> Result<BounceBack, Failure> {
        BounceBack::new(self.gamma).map_err(|e| invalid(e.to_string()))
    }

    fn speed_range(&self) -> Result<(f64, f64), Failure> {
        let [a, b] = self.grid.speed_range;
        if !(a > 0.0 && a <= b && b.is_finite()) {
            return Err(invalid(format!(
                "speed range must satisfy 0 < a ≤ b < ∞, got [{a}, {b}]"
            )));
        }
        Ok((a, b))
    }

    pub fn kernel(&self) -> Result<RegularCollisionKernel, Failure> {
        let (vmin, vmax) = self.speed_range()?;
        let Some(spec) = &self.kernel else {
            return RegularCollisionKernel::zero(vmin, vmax).map_err(|e| invalid(e.to_string()));
        };
        let [a, b] = spec.support;
        let mut terms = Vec::with_capacity(spec.terms.len());
        for t in &spec.terms {
            let alpha = finite("kernel α", t.alpha)?;
            let bs = finite("kernel β scale", t.beta_scale)?;
            let ts = finite("kernel θ scale", t.theta_scale)?;
            terms.push(KernelTerm::new(
                move |_| alpha,
                smooth_bump(a, b, bs),
                smooth_bump(a, b, ts),
            ));
        }
        RegularCollisionKernel::new(terms, a, b).map_err(|e| invalid(e.to_string()))
    }

    pub fn phase_grid(&self, domain: &SpatialDomain) -> Result<Arc<PhaseGrid>, Failure> {
        let (a, b) = self.speed_range()?;
        let g = &self.grid;
        let count = g.spatial[0]
            .saturating_mul(g.spatial[1])
            .saturating_mul(g.speeds)
            .saturating_mul(g.angles);
        if count > MAX_PHASE_NODES {
            return Err(Failure::Resource(format!(
                "phase grid of {count} nodes exceeds {MAX_PHASE_NODES}"
            )));
        }
        let vel = VelocityGrid::annulus(domain.dim(), a, b, g.speeds, g.angles)
            .map_err(|e| invalid(e.to_string()))?;
        let grid = PhaseGrid::new(domain.clone(), (g.spatial[0], g.spatial[1]), vel)
            .map_err(|e| invalid(e.to_string()))?;
        Ok(Arc::new(grid))
    }

    pub fn scan(&self) -> Result<ScanConfig, Failure> {
        let (a, b) = self.speed_range()?;
        let g = &self.grid;
        if g.spatial.contains(&0) || g.speeds == 0 || g.angles == 0 {
            return Err(invalid("grid counts must be positive"));
        }
        let samples = g.spatial[0]
            .saturating_mul(g.spatial[1])
            .saturating_mul(g.speeds)
            .saturating_mul(g.angles)
            .saturating_mul(2 * self.spectrum.k_max as usize + 1);
        if samples > MAX_SPECTRAL_SAMPLES {
            return Err(Failure::Resource(format!(
                "{samples} spectral samples exceed {MAX_SPECTRAL_SAMPLES}"
            )));
        }
        let mut cfg = ScanConfig::new((g.spatial[0], g.spatial[1]), (a, b), g.speeds, g.angles)
            .with_k_max(self.spectrum.k_max);
        if let Some(f) = self.spectrum.tau_floor {
            if !(f > 0.0 && f.is_finite()) {
                return Err(invalid(format!("tau_floor must be positive, got {f}")));
            }
            cfg.tau_floor = Some(f);
        }
        Ok(cfg)
    }

    pub fn initial(&self) -> Result<impl Fn(Vec2, Vec2) -> C64 + Sync + Clone, Failure> {
        let (c, w, amp, constant) = match self.initial {
            InitialSpec::Constant { value } => {
                (Vec2::ZERO, 1.0, finite("initial value", value)?, true)
            }
            InitialSpec::Gaussian {
                center,
                width,
                amplitude,
            } => {
                if !(width > 0.0 && width.is_finite()) {
                    return Err(invalid(format!(
                        "gaussian width must be positive, got {width}"
                    )));
                }
                (
                    vec2(center),
                    width,
                    finite("initial amplitude", amplitude)?,
                    false,
                )
            }
        };
        Ok(move |x: Vec2, _: Vec2| {
            if constant {
                C64::new(amp, 0.0)
            } else {
                C64::new(amp * (-(x - c).norm2() / (w * w)).exp(), 0.0)
            }
        })
    }

    /// `sup |φ|` of the initial data.
    pub fn initial_bound(&self) -> f64 {
        match self.initial {
            InitialSpec::Constant { value } => value.abs(),
            InitialSpec::Gaussian { amplitude, .. } => amplitude.abs(),
        }
    }

    pub fn require_homogeneous(&self) -> Result<(), Failure> {
        if matches!(self.sigma, SigmaSpec::PositionQuadratic { .. }) {
            return Err(invalid(
                "this command needs Σ independent of position (constant or speed_polynomial)",
            ));
        }
        Ok(())
    }

    pub fn evolve_times(&self) -> Result<Vec<f64>, Failure> {
        if self.evolve.times.is_empty() {
            return Err(invalid("evolve.times must not be empty"));
        }
        for &t in &self.evolve.times {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(invalid(format!("times must be finite and ≥ 0, got {t}")));
            }
        }
        Ok(self.evolve.times.clone())
    }

    pub fn lambdas(&self) -> Result<Vec<C64>, Failure> {
        let r = &self.resolvent_verify;
        if r.lambdas.is_empty() || r.samples == 0 {
            return Err(invalid(
                "resolvent_verify needs at least one λ and one sample",
            ));
        }
        if !(r.tol > 0.0) || r.boundary_resolution == 0 {
            return Err(invalid(
                "resolvent_verify.tol and boundary_resolution must be positive",
            ));
        }
        r.lambdas
            .iter()
            .map(|&[re, im]| Ok(C64::new(finite("Re λ", re)?, finite("Im λ", im)?)))
            .collect()
    }

    pub fn dyson(&self) -> Result<DysonConfig, Failure> {
        let d = &self.dyson;
        if !(d.t >= 0.0 && d.t.is_finite()) {
            return Err(invalid(format!(
                "dyson.t must be finite and ≥ 0, got {}",
                d.t
            )));
        }
        if d.r1_rank == Some(0) {
            return Err(invalid("dyson.r1_rank must be positive"));
        }
        DysonConfig::new(d.j_max, d.nodes_per_unit_time).map_err(|e| invalid(e.to_string()))
    }

    pub fn sweep(&self) -> Result<(SweepConfig, Parity), Failure> {
        let s = &self.rl_scan;
        if s.betas.is_empty()
            || s.betas.iter().any(|b| !(*b >= 0.0 && b.is_finite()))
            || s.betas.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(invalid(
                "rl_scan.betas must be nonempty, finite, nonnegative and increasing",
            ));
        }
        finite("rl_scan.alpha", s.alpha)?;
        if s.cells == 0 || s.directions == 0 {
            return Err(invalid("rl_scan.cells and directions must be positive"));
        }
        let parity = match s.parity {
            ParitySpec::Odd => Parity::Odd,
            ParitySpec::Even => Parity::Even,
        };
        let cfg = SweepConfig {
            cells: s.cells,
            directions: s.directions,
            gamma: self.gamma()?,
            ..SweepConfig::default()
        };
        Ok((cfg, parity))
    }
}

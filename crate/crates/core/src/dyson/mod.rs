//! Dyson–Phillips expansion `V(t) = Σ_j V_j(t)` of the perturbed semigroup, with
//! `V_0 = U` and `V_j(t) = ∫_0^t U(t - s) K V_{j-1}(s) ds`.
//!
//! Time integrals use a uniform lattice `h = t / ⌈N t⌉` and composite Simpson weights, so
//! every `U(s)` needed is one of `⌈N t⌉ + 1` precomputed streaming matrices.

mod remainder;
mod sweep;

use std::ops::{Add, Mul};
use std::sync::Arc;

use rayon::prelude::*;

use crate::fields::{CollisionFrequency, KernelTable, RegularCollisionKernel};
use crate::grid::{PhaseGrid, PhaseGridFunction};
use crate::streaming::{evolve, BounceBack, StreamingMatrix};
use crate::{Error, Result, C64};

pub use remainder::{r1_singular_values, r1_tail_mass, tail_ratio, TailMass, DENSE_CAP};
pub use sweep::{
    a2_matrix, a2_norm, rl_sweep, A2Estimate, CellGrid, NormSweep, Parity, SweepConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DysonConfig {
    pub j_max: usize,
    pub nodes_per_unit_time: usize,
}

impl Default for DysonConfig {
    fn default() -> Self {
        DysonConfig {
            j_max: 3,
            nodes_per_unit_time: 32,
        }
    }
}

impl DysonConfig {
    pub fn new(j_max: usize, nodes_per_unit_time: usize) -> Result<Self> {
        if nodes_per_unit_time == 0 {
            return Err(Error::InvalidParameter(
                "time quadrature needs at least one node per unit time".into(),
            ));
        }
        Ok(DysonConfig {
            j_max,
            nodes_per_unit_time,
        })
    }
}

/// Weights on `m + 1` equispaced nodes of unit spacing: Simpson for even `m`, Simpson plus
/// a closing 3/8 panel for odd `m ≥ 3`, trapezoid for `m = 1`.
pub fn simpson_weights(m: usize) -> Vec<f64> {
    let mut w = vec![0.0; m + 1];
    match m {
        0 => {}
        1 => {
            w[0] = 0.5;
            w[1] = 0.5;
        }
        _ => {
            let simpson_end = if m.is_multiple_of(2) { m } else { m - 3 };
            for k in (0..simpson_end).step_by(2) {
                w[k] += 1.0 / 3.0;
                w[k + 1] += 4.0 / 3.0;
                w[k + 2] += 1.0 / 3.0;
            }
            if m % 2 == 1 {
                for (off, c) in [1.0, 3.0, 3.0, 1.0].iter().enumerate() {
                    w[m - 3 + off] += 3.0 / 8.0 * c;
                }
            }
        }
    }
    w
}

/// Uniform lattice on `[0, t]`; the last node is `t` itself.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeLattice {
    pub h: f64,
    pub times: Vec<f64>,
}

impl TimeLattice {
    pub fn new(t: f64, nodes_per_unit_time: usize) -> Result<Self> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "time must be finite and ≥ 0, got {t}"
            )));
        }
        if t == 0.0 {
            return Ok(TimeLattice {
                h: 0.0,
                times: vec![0.0],
            });
        }
        let m = ((nodes_per_unit_time as f64 * t).ceil() as usize).max(1);
        let h = t / m as f64;
        let mut times: Vec<f64> = (0..=m).map(|k| k as f64 * h).collect();
        times[m] = t;
        Ok(TimeLattice { h, times })
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    /// Quadrature weights for `∫_0^{t_m}` on the first `m + 1` nodes.
    pub fn weights(&self, m: usize) -> Vec<f64> {
        simpson_weights(m).into_iter().map(|w| w * self.h).collect()
    }
}

/// Streaming matrices on a time lattice plus the tabulated kernel.
pub struct DysonPropagator {
    pub grid: Arc<PhaseGrid>,
    pub lattice: TimeLattice,
    streams: Vec<StreamingMatrix>,
    kernel: KernelTable,
}

trait Sample: Copy + Default + Send + Sync + Mul<f64, Output = Self> + Add<Output = Self> {}
impl<T: Copy + Default + Send + Sync + Mul<f64, Output = T> + Add<Output = T>> Sample for T {}

impl DysonPropagator {
    pub fn new(
        grid: Arc<PhaseGrid>,
        t: f64,
        nodes_per_unit_time: usize,
        kernel: &RegularCollisionKernel,
        sigma: &CollisionFrequency,
        gamma: BounceBack,
    ) -> Result<Self> {
        let lattice = TimeLattice::new(t, nodes_per_unit_time)?;
        let kernel = kernel.tabulate(&grid)?;
        let streams = lattice
            .times
            .iter()
            .map(|s| StreamingMatrix::build(&grid, sigma, gamma, *s))
            .collect::<Result<Vec<_>>>()?;
        Ok(DysonPropagator {
            grid,
            lattice,
            streams,
            kernel,
        })
    }

    pub fn streams(&self) -> &[StreamingMatrix] {
        &self.streams
    }

    pub fn kernel(&self) -> &KernelTable {
        &self.kernel
    }

    /// `V_j(t_m) φ` for all lattice times, given `V_{j-1}(t_l) φ` for all lattice times.
    fn next_level<T: Sample>(&self, prev: &[Vec<T>], all_times: bool) -> Vec<Vec<T>> {
        let n = self.grid.len();
        let mm = self.lattice.steps();
        let kv: Vec<Vec<T>> = prev
            .iter()
            .map(|v| {
                let mut out = vec![T::default(); n];
                self.kernel.apply(v, &mut out);
                out
            })
            .collect();
        let targets: Vec<usize> = if all_times {
            (0..=mm).collect()
        } else {
            vec![mm]
        };
        let mut level = vec![Vec::new(); mm + 1];
        let computed: Vec<(usize, Vec<T>)> = targets
            .into_par_iter()
            .map(|m| {
                let w = self.lattice.weights(m);
                let mut acc = vec![T::default(); n];
                let mut tmp = vec![T::default(); n];
                for (l, wl) in w.iter().enumerate() {
                    if *wl == 0.0 {
                        continue;
                    }
                    self.streams[m - l].apply_into(&kv[l], &mut tmp);
                    acc.iter_mut()
                        .zip(&tmp)
                        .for_each(|(a, b)| *a = *a + *b * *wl);
                }
                (m, acc)
            })
            .collect();
        for (m, v) in computed {
            level[m] = v;
        }
        level
    }

    /// `[V_0(t) φ, V_1(t) φ, …, V_{j_max}(t) φ]` at the final lattice time.
    fn terms<T: Sample>(&self, phi: &[T], j_max: usize) -> Vec<Vec<T>> {
        let mm = self.lattice.steps();
        let mut level: Vec<Vec<T>> = self.streams.iter().map(|s| s.apply(phi)).collect();
        let mut out = vec![level[mm].clone()];
        for j in 1..=j_max {
            level = self.next_level(&level, j < j_max);
            out.push(level[mm].clone());
        }
        out
    }

    /// `Σ_{j=1}^{j_max} V_j(t) x` for real samples.
    pub fn remainder_real(&self, x: &[f64], j_max: usize) -> Vec<f64> {
        let terms = self.terms(x, j_max);
        let mut acc = vec![0.0; x.len()];
        for t in &terms[1..] {
            acc.iter_mut().zip(t).for_each(|(a, b)| *a += b);
        }
        acc
    }
}

/// `V(t) φ` truncated at `j_max`, with the Duhamel self-consistency residual.
#[derive(Debug, Clone)]
pub struct DysonResult {
    pub value: PhaseGridFunction,
    /// `‖V_j(t) φ‖₂` for `j = 0..=j_max`.
    pub term_norms: Vec<f64>,
    /// `‖S(t)φ - U(t)φ - ∫_0^t U(t-s) K S(s)φ ds‖₂ / ‖φ‖₂` for the partial sum `S`; with the
    /// lattice quadrature this equals `‖V_{j_max+1}(t) φ‖₂ / ‖φ‖₂`.
    pub residual: f64,
}

fn weighted_norm(grid: &PhaseGrid, v: &[C64]) -> f64 {
    v.iter()
        .enumerate()
        .map(|(i, x)| grid.weight(i) * x.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// `V_j(t) φ`.
pub fn v_j_apply(
    phi: &PhaseGridFunction,
    t: f64,
    j: usize,
    config: DysonConfig,
    kernel: &RegularCollisionKernel,
    sigma: &CollisionFrequency,
    gamma: BounceBack,
) -> Result<PhaseGridFunction> {
    if j == 0 {
        return evolve(phi, t, sigma, gamma);
    }
    kernel.tabulate(&phi.grid)?;
    if t == 0.0 || kernel.is_zero() {
        return Ok(PhaseGridFunction::zeros(phi.grid.clone()));
    }
    let prop = DysonPropagator::new(
        phi.grid.clone(),
        t,
        config.nodes_per_unit_time,
        kernel,
        sigma,
        gamma,
    )?;
    let mut terms = prop.terms(&phi.values, j);
    PhaseGridFunction::new(phi.grid.clone(), terms.pop().unwrap_or_default())
}

/// `Σ_{j ≤ j_max} V_j(t) φ` and its Duhamel residual.
pub fn v_apply(
    phi: &PhaseGridFunction,
    t: f64,
    config: DysonConfig,
    kernel: &RegularCollisionKernel,
    sigma: &CollisionFrequency,
    gamma: BounceBack,
) -> Result<DysonResult> {
    kernel.tabulate(&phi.grid)?;
    if t == 0.0 || kernel.is_zero() {
        let value = evolve(phi, t, sigma, gamma)?;
        let n0 = weighted_norm(&phi.grid, &value.values);
        let mut term_norms = vec![n0];
        term_norms.resize(config.j_max + 1, 0.0);
        return Ok(DysonResult {
            value,
            term_norms,
            residual: 0.0,
        });
    }
    let prop = DysonPropagator::new(
        phi.grid.clone(),
        t,
        config.nodes_per_unit_time,
        kernel,
        sigma,
        gamma,
    )?;
    let terms = prop.terms(&phi.values, config.j_max + 1);
    let grid = &phi.grid;
    let term_norms: Vec<f64> = terms.iter().map(|v| weighted_norm(grid, v)).collect();
    let mut acc = terms[0].clone();
    for v in &terms[1..=config.j_max] {
        acc.iter_mut().zip(v).for_each(|(a, b)| *a += b);
    }
    let norm_phi = weighted_norm(grid, &phi.values);
    let residual = if norm_phi == 0.0 {
        0.0
    } else {
        term_norms[config.j_max + 1] / norm_phi
    };
    Ok(DysonResult {
        value: PhaseGridFunction::new(grid.clone(), acc)?,
        term_norms: term_norms[..=config.j_max].to_vec(),
        residual,
    })
}

/// Upper bound on `‖K‖` in `L²` of the grid.
pub fn kernel_norm(kernel: &RegularCollisionKernel, grid: &PhaseGrid) -> f64 {
    kernel.holder_bound(grid, 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{smooth_bump, KernelTerm};
    use crate::geometry::{SpatialDomain, Vec2};
    use crate::grid::VelocityGrid;

    fn setup() -> (Arc<PhaseGrid>, CollisionFrequency, BounceBack) {
        let v = VelocityGrid::annulus(2, 1.0, 2.0, 2, 8).unwrap();
        let g = PhaseGrid::new(SpatialDomain::unit_disk(), (4, 8), v).unwrap();
        (
            Arc::new(g),
            CollisionFrequency::constant(1.0).unwrap(),
            BounceBack::new(0.5).unwrap(),
        )
    }

    fn bump_kernel(scale: f64) -> RegularCollisionKernel {
        let t = KernelTerm::new(
            |_| 1.0,
            smooth_bump(1.0, 2.0, scale),
            smooth_bump(1.0, 2.0, 1.0),
        );
        RegularCollisionKernel::new(vec![t], 1.0, 2.0).unwrap()
    }

    fn phi(grid: &Arc<PhaseGrid>) -> PhaseGridFunction {
        PhaseGridFunction::from_fn(grid.clone(), |x: Vec2, v: Vec2| {
            C64::new(1.0 + x.x * v.y, 0.5 * x.y)
        })
    }

    #[test]
    fn simpson_weights_integrate_cubics() {
        for m in 1..12 {
            let w = simpson_weights(m);
            assert!(w.iter().all(|x| *x > 0.0));
            let exact_deg = if m == 1 { 1 } else { 3 };
            for d in 0..=exact_deg {
                let q: f64 = w
                    .iter()
                    .enumerate()
                    .map(|(k, wk)| wk * (k as f64).powi(d))
                    .sum();
                let e = (m as f64).powi(d + 1) / (d + 1) as f64;
                assert!((q - e).abs() < 1e-10 * e.max(1.0), "m={m} d={d}");
            }
        }
        assert!(simpson_weights(0).is_empty() || simpson_weights(0) == vec![0.0]);
    }

    #[test]
    fn lattice_shape() {
        let l = TimeLattice::new(1.0, 32).unwrap();
        assert_eq!(l.steps(), 32);
        assert_eq!(*l.times.last().unwrap(), 1.0);
        let l = TimeLattice::new(0.01, 32).unwrap();
        assert_eq!(l.steps(), 1);
        assert!(TimeLattice::new(-1.0, 32).is_err());
    }

    #[test]
    fn trivial_cases() {
        let (grid, s, g) = setup();
        let f = phi(&grid);
        let k = bump_kernel(0.1);
        let cfg = DysonConfig::default();
        let u = evolve(&f, 0.7, &s, g).unwrap();
        assert_eq!(
            v_j_apply(&f, 0.7, 0, cfg, &k, &s, g).unwrap().values,
            u.values
        );
        assert!(v_j_apply(&f, 0.0, 1, cfg, &k, &s, g)
            .unwrap()
            .values
            .iter()
            .all(|v| v.norm() == 0.0));
        let zero = RegularCollisionKernel::zero(1.0, 2.0).unwrap();
        assert!(v_j_apply(&f, 0.7, 2, cfg, &zero, &s, g)
            .unwrap()
            .values
            .iter()
            .all(|v| v.norm() == 0.0));
        let v = v_apply(&f, 0.7, cfg, &zero, &s, g).unwrap();
        assert_eq!(v.value.values, u.values);
        let v0 = v_apply(&f, 0.0, cfg, &k, &s, g).unwrap();
        assert_eq!(v0.value.values, f.values);
    }

    #[test]
    fn residual_shrinks_with_order() {
        let (grid, s, g) = setup();
        let f = phi(&grid);
        let k = bump_kernel(1.0);
        let knorm = kernel_norm(&k, &grid);
        let mut last = f64::INFINITY;
        for j in 1..=4 {
            let r = v_apply(&f, 1.0, DysonConfig::new(j, 32).unwrap(), &k, &s, g).unwrap();
            assert!(r.residual <= last * knorm / j as f64 * 1.0001 || r.residual < 1e-14);
            last = r.residual;
        }
    }

    #[test]
    fn truncation_difference_matches_tail_bound() {
        let (grid, s, g) = setup();
        let f = phi(&grid);
        let k = bump_kernel(1e-2);
        let knorm = kernel_norm(&k, &grid);
        let a = v_apply(&f, 1.0, DysonConfig::new(2, 32).unwrap(), &k, &s, g).unwrap();
        let b = v_apply(&f, 1.0, DysonConfig::new(4, 32).unwrap(), &k, &s, g).unwrap();
        let diff: Vec<C64> = a
            .value
            .values
            .iter()
            .zip(&b.value.values)
            .map(|(x, y)| x - y)
            .collect();
        let nphi = f.p_norm(2.0).unwrap();
        assert!(weighted_norm(&grid, &diff) <= knorm.powi(3) / 6.0 * nphi * 1.01);
    }

    #[test]
    fn positivity() {
        let (grid, s, g) = setup();
        let f = PhaseGridFunction::from_fn(grid.clone(), |x: Vec2, _| {
            C64::new((x.x + 1.0).powi(2), 0.0)
        });
        let r = v_apply(&f, 1.0, DysonConfig::default(), &bump_kernel(1.0), &s, g).unwrap();
        assert!(r.value.values.iter().all(|v| v.re >= 0.0 && v.im == 0.0));
    }
}

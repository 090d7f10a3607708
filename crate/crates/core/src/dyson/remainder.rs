//! Singular values of the discretized remainder `R₁(t) = V(t) - U(t)`.
//!
//! Singular values are taken in `L²` of the grid quadrature, i.e. of the similarity
//! `W^{1/2} R₁ W^{-1/2}` with `W` the diagonal of node weights.

use std::sync::Arc;

use rayon::prelude::*;

use super::DysonPropagator;
use crate::fields::{CollisionFrequency, RegularCollisionKernel};
use crate::grid::PhaseGrid;
use crate::linalg::{randomized_singular_values, singular_values, DenseMatrix};
use crate::streaming::{BounceBack, StreamingMatrix};
use crate::{Error, Result, C64};

/// Largest grid for which the dense matrix is assembled.
pub const DENSE_CAP: usize = 4096;

/// `Σ_{k ≥ rank} σ_k² / Σ_k σ_k²` (zero-based `k`).
pub fn tail_ratio(values: &[f64], rank: usize) -> f64 {
    let total: f64 = values.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return 0.0;
    }
    values.iter().skip(rank).map(|s| s * s).sum::<f64>() / total
}

/// All singular values of `R₁(t)` truncated at `j_max`, from the dense matrix.
pub fn r1_singular_values(
    grid: Arc<PhaseGrid>,
    t: f64,
    j_max: usize,
    nodes_per_unit_time: usize,
    kernel: &RegularCollisionKernel,
    sigma: &CollisionFrequency,
    gamma: BounceBack,
) -> Result<Vec<f64>> {
    let n = grid.len();
    if n > DENSE_CAP {
        return Err(Error::ResourceLimit(format!(
            "dense remainder would be {n}×{n}; the cap is {DENSE_CAP}×{DENSE_CAP}"
        )));
    }
    kernel.tabulate(&grid)?;
    if t == 0.0 || kernel.is_zero() || j_max == 0 {
        return Ok(vec![0.0; n]);
    }
    let prop = DysonPropagator::new(grid.clone(), t, nodes_per_unit_time, kernel, sigma, gamma)?;
    let sqrt_w: Vec<f64> = (0..n).map(|i| grid.weight(i).sqrt()).collect();
    let columns: Vec<Vec<C64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0 / sqrt_w[i];
            prop.remainder_real(&e, j_max)
                .iter()
                .zip(&sqrt_w)
                .map(|(r, s)| C64::new(r * s, 0.0))
                .collect()
        })
        .collect();
    Ok(singular_values(&DenseMatrix::from_columns(n, columns)))
}

/// Tail diagnostics for the first-order remainder `V_1(t)` on grids too large for the dense
/// path.
#[derive(Debug, Clone, PartialEq)]
pub struct TailMass {
    /// `‖R₁‖_F²`, exact on the grid.
    pub frobenius2: f64,
    /// Leading singular values from randomized subspace iteration.
    pub leading: Vec<f64>,
    pub rank: usize,
    /// `1 - Σ_{k < rank} σ_k² / ‖R₁‖_F²`.
    pub tail_ratio: f64,
}

struct FirstOrder {
    prop: DysonPropagator,
    transposed: Vec<StreamingMatrix>,
    weights: Vec<f64>,
    sqrt_w: Vec<f64>,
}

impl FirstOrder {
    fn steps(&self) -> usize {
        self.prop.lattice.steps()
    }

    /// `W^{1/2} V_1(t) W^{-1/2} x`.
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let m = self.steps();
        let scaled: Vec<f64> = x.iter().zip(&self.sqrt_w).map(|(a, s)| a / s).collect();
        let streams = self.prop.streams();
        let mut acc = vec![0.0; n];
        let (mut u, mut k, mut v) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for (l, wl) in self.weights.iter().enumerate() {
            streams[l].apply_into(&scaled, &mut u);
            self.prop.kernel().apply(&u, &mut k);
            streams[m - l].apply_into(&k, &mut v);
            acc.iter_mut().zip(&v).for_each(|(a, b)| *a += wl * b);
        }
        acc.iter_mut().zip(&self.sqrt_w).for_each(|(a, s)| *a *= s);
        acc
    }

    /// Transpose of [`FirstOrder::apply`].
    fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let m = self.steps();
        let scaled: Vec<f64> = x.iter().zip(&self.sqrt_w).map(|(a, s)| a * s).collect();
        let mut acc = vec![0.0; n];
        let (mut u, mut k, mut v) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for (l, wl) in self.weights.iter().enumerate() {
            self.transposed[m - l].apply_into(&scaled, &mut u);
            self.prop.kernel().apply_transpose(&u, &mut k);
            self.transposed[l].apply_into(&k, &mut v);
            acc.iter_mut().zip(&v).for_each(|(a, b)| *a += wl * b);
        }
        acc.iter_mut().zip(&self.sqrt_w).for_each(|(a, s)| *a /= s);
        acc
    }

    /// `‖W^{1/2} V_1(t) W^{-1/2}‖_F²` by propagating each sparse column.
    fn frobenius2(&self) -> f64 {
        let n = self.sqrt_w.len();
        let nv = self.prop.kernel().nv();
        let m = self.steps();
        (0..n)
            .into_par_iter()
            .map_init(
                || {
                    (
                        vec![0.0; n],
                        Vec::<usize>::new(),
                        vec![0.0; n],
                        Vec::<usize>::new(),
                        vec![0.0; nv],
                    )
                },
                |(acc, touched, mid, mid_touched, block), i| {
                    let x = 1.0 / self.sqrt_w[i];
                    for (l, wl) in self.weights.iter().enumerate() {
                        // column i of U(t_l)
                        for (r, val) in self.transposed[l].row(i) {
                            if mid[r] == 0.0 {
                                mid_touched.push(r);
                            }
                            mid[r] += val * x;
                        }
                        let mut nodes: Vec<usize> = mid_touched.iter().map(|r| r / nv).collect();
                        nodes.sort_unstable();
                        nodes.dedup();
                        for node in nodes {
                            let base = node * nv;
                            self.prop
                                .kernel()
                                .apply_node(node, &mid[base..base + nv], block);
                            for (s, b) in block.iter().enumerate() {
                                if *b == 0.0 {
                                    continue;
                                }
                                for (r, val) in self.transposed[m - l].row(base + s) {
                                    if acc[r] == 0.0 {
                                        touched.push(r);
                                    }
                                    acc[r] += wl * val * b;
                                }
                            }
                        }
                        for r in mid_touched.drain(..) {
                            mid[r] = 0.0;
                        }
                    }
                    touched.sort_unstable();
                    touched.dedup();
                    let mut sum = 0.0;
                    for r in touched.drain(..) {
                        let y = acc[r] * self.sqrt_w[r];
                        sum += y * y;
                        acc[r] = 0.0;
                    }
                    sum
                },
            )
            .collect::<Vec<f64>>()
            .into_iter()
            .sum()
    }
}

/// Frobenius mass and leading singular values of the first Dyson term `V_1(t)`, which is
/// `R₁(t)` truncated at first order. Matrix-free, for grids beyond [`DENSE_CAP`].
#[allow(clippy::too_many_arguments)]
pub fn r1_tail_mass(
    grid: Arc<PhaseGrid>,
    t: f64,
    nodes_per_unit_time: usize,
    kernel: &RegularCollisionKernel,
    sigma: &CollisionFrequency,
    gamma: BounceBack,
    rank: usize,
    seed: u64,
) -> Result<TailMass> {
    let n = grid.len();
    kernel.tabulate(&grid)?;
    if t == 0.0 || kernel.is_zero() {
        return Ok(TailMass {
            frobenius2: 0.0,
            leading: vec![0.0; rank.min(n)],
            rank,
            tail_ratio: 0.0,
        });
    }
    let prop = DysonPropagator::new(grid.clone(), t, nodes_per_unit_time, kernel, sigma, gamma)?;
    let transposed = prop.streams().par_iter().map(|s| s.transpose()).collect();
    let weights = prop.lattice.weights(prop.lattice.steps());
    let sqrt_w = (0..n).map(|i| grid.weight(i).sqrt()).collect();
    let op = FirstOrder {
        prop,
        transposed,
        weights,
        sqrt_w,
    };
    let frobenius2 = op.frobenius2();
    let leading = randomized_singular_values(
        n,
        |x| op.apply(x),
        |x| op.apply_transpose(x),
        rank,
        8,
        3,
        seed,
    );
    let head: f64 = leading.iter().map(|s| s * s).sum();
    let tail_ratio = if frobenius2 == 0.0 {
        0.0
    } else {
        (1.0 - head / frobenius2).max(0.0)
    };
    Ok(TailMass {
        frobenius2,
        leading,
        rank,
        tail_ratio,
    })
}

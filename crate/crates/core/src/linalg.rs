//! Small dense linear algebra: one-sided Jacobi SVD, Gram power iteration, and a
//! randomized range finder for the leading singular values of matrix-free operators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::C64;

/// Column-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<C64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn from_columns(rows: usize, columns: Vec<Vec<C64>>) -> Self {
        let cols = columns.len();
        let data = columns.into_iter().flatten().collect::<Vec<_>>();
        assert_eq!(data.len(), rows * cols);
        DenseMatrix { rows, cols, data }
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[j * self.rows + i]
    }

    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[j * self.rows + i] = v;
    }

    pub fn column(&self, j: usize) -> &[C64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.rows];
        for (j, xj) in x.iter().enumerate() {
            if *xj == C64::new(0.0, 0.0) {
                continue;
            }
            for (yi, a) in y.iter_mut().zip(self.column(j)) {
                *yi += a * xj;
            }
        }
        y
    }

    /// `A^H x`.
    pub fn apply_adjoint(&self, x: &[C64]) -> Vec<C64> {
        (0..self.cols)
            .into_par_iter()
            .map(|j| {
                self.column(j)
                    .iter()
                    .zip(x)
                    .map(|(a, xi)| a.conj() * xi)
                    .sum()
            })
            .collect()
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Singular values in decreasing order, by one-sided Jacobi rotations on the columns.
pub fn singular_values(a: &DenseMatrix) -> Vec<f64> {
    let mut cols: Vec<Vec<C64>> = (0..a.cols).map(|j| a.column(j).to_vec()).collect();
    jacobi_orthogonalize(&mut cols);
    let mut s: Vec<f64> = cols.iter().map(|c| norm(c)).collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

fn norm(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

fn jacobi_orthogonalize(cols: &mut [Vec<C64>]) {
    let n = cols.len();
    const EPS: f64 = 1e-15;
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (left, right) = cols.split_at_mut(q);
                let (ap, aq) = (&mut left[p], &mut right[0]);
                let alpha: f64 = ap.iter().map(|v| v.norm_sqr()).sum();
                let beta: f64 = aq.iter().map(|v| v.norm_sqr()).sum();
                let gamma: C64 = ap.iter().zip(aq.iter()).map(|(x, y)| x.conj() * y).sum();
                let g = gamma.norm();
                if g <= EPS * (alpha * beta).sqrt() || g == 0.0 {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for (x, y) in ap.iter_mut().zip(aq.iter_mut()) {
                    let yq = *y * phase.conj();
                    let xp = *x;
                    *x = xp * c - yq * s;
                    *y = xp * s + yq * c;
                }
            }
        }
        if !rotated {
            break;
        }
    }
}

/// Result of a power iteration on `A^H A`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerEstimate {
    pub norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `‖A‖₂` by power iteration on `A^H A`, starting from the all-ones vector.
pub fn power_norm(
    n: usize,
    apply: impl Fn(&[C64]) -> Vec<C64>,
    apply_adjoint: impl Fn(&[C64]) -> Vec<C64>,
    max_iter: usize,
    tol: f64,
) -> PowerEstimate {
    let mut x = vec![C64::new(1.0, 0.0); n];
    let nx = norm(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut last = 0.0;
    for it in 1..=max_iter {
        let y = apply_adjoint(&apply(&x));
        let ny = norm(&y);
        if ny == 0.0 {
            return PowerEstimate {
                norm: 0.0,
                iterations: it,
                converged: true,
            };
        }
        let est = ny.sqrt();
        x = y.into_iter().map(|v| v / ny).collect();
        if (est - last).abs() <= tol * est {
            return PowerEstimate {
                norm: est,
                iterations: it,
                converged: true,
            };
        }
        last = est;
    }
    PowerEstimate {
        norm: last,
        iterations: max_iter,
        converged: false,
    }
}

fn orthonormalize(cols: &mut [Vec<f64>]) {
    for _ in 0..2 {
        for j in 0..cols.len() {
            let (done, rest) = cols.split_at_mut(j);
            let c = &mut rest[0];
            for q in done.iter() {
                let d: f64 = q.iter().zip(c.iter()).map(|(a, b)| a * b).sum();
                c.iter_mut().zip(q).for_each(|(x, qi)| *x -= d * qi);
            }
            let nc = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nc > 0.0 {
                c.iter_mut().for_each(|x| *x /= nc);
            }
        }
    }
}

/// Leading `k` singular values of a real operator given only through `A x` and `A^T x`,
/// by randomized subspace iteration with `oversample` extra vectors and `power_steps`
/// passes of `A A^T`. Deterministic for a fixed `seed`.
pub fn randomized_singular_values(
    n: usize,
    apply: impl Fn(&[f64]) -> Vec<f64> + Sync,
    apply_transpose: impl Fn(&[f64]) -> Vec<f64> + Sync,
    k: usize,
    oversample: usize,
    power_steps: usize,
    seed: u64,
) -> Vec<f64> {
    let l = (k + oversample).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega: Vec<Vec<f64>> = (0..l)
        .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let mut y: Vec<Vec<f64>> = omega.par_iter().map(|w| apply(w)).collect();
    orthonormalize(&mut y);
    for _ in 0..power_steps {
        let mut z: Vec<Vec<f64>> = y.par_iter().map(|q| apply_transpose(q)).collect();
        orthonormalize(&mut z);
        y = z.par_iter().map(|q| apply(q)).collect();
        orthonormalize(&mut y);
    }
    // Columns of B^T = A^T Q share singular values with Q^T A.
    let bt: Vec<Vec<C64>> = y
        .par_iter()
        .map(|q| {
            apply_transpose(q)
                .into_iter()
                .map(|v| C64::new(v, 0.0))
                .collect()
        })
        .collect();
    let mut s = singular_values(&DenseMatrix::from_columns(n, bt));
    s.truncate(k);
    s
}

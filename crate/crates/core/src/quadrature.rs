//! Composite Gauss–Legendre quadrature with adaptive bisection.

use std::sync::OnceLock;

use crate::C64;

/// Absolute tolerance used for chord integrals.
pub const CHORD_TOL: f64 = 1e-10;
/// Maximum bisection depth.
pub const MAX_DEPTH: u32 = 40;

const ORDER: usize = 10;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess, then Newton on P_n.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pn1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(ORDER))
}

fn panel<F: Fn(f64) -> C64 + ?Sized>(f: &F, a: f64, b: f64) -> C64 {
    let (x, w) = rule();
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = C64::new(0.0, 0.0);
    for (xi, wi) in x.iter().zip(w) {
        acc += f(mid + half * xi) * *wi;
    }
    acc * half
}

fn refine<F: Fn(f64) -> C64 + ?Sized>(
    f: &F,
    a: f64,
    b: f64,
    whole: C64,
    tol: f64,
    depth: u32,
) -> C64 {
    let mid = 0.5 * (a + b);
    let left = panel(f, a, mid);
    let right = panel(f, mid, b);
    let sum = left + right;
    if depth == 0 || (sum - whole).norm() <= tol {
        return sum;
    }
    refine(f, a, mid, left, 0.5 * tol, depth - 1) + refine(f, mid, b, right, 0.5 * tol, depth - 1)
}

/// `∫_a^b f` of a complex integrand to absolute tolerance `tol`.
pub fn integrate_complex<F: Fn(f64) -> C64 + ?Sized>(f: &F, a: f64, b: f64, tol: f64) -> C64 {
    if a == b {
        return C64::new(0.0, 0.0);
    }
    let whole = panel(f, a, b);
    refine(f, a, b, whole, tol, MAX_DEPTH)
}

pub fn integrate<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    integrate_complex(&|s| C64::new(f(s), 0.0), a, b, tol).re
}

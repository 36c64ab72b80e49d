//! Shared helpers for the integration suites: an independent RK4 oracle and
//! random stable linear systems whose discrete-time samples are exact (the
//! propagator e^{A·dt} is assembled from closed-form block exponentials, not
//! from a numerical integrator).
//!
//! Each test target compiles its own copy and uses a different subset.
#![allow(dead_code)]

use koopman_pf::C64;
use ndarray::prelude::*;
use rand::Rng;

/// Test-side classical RK4, written independently of the library's
/// integrator: no preallocated stage buffers, plain Vec arithmetic.
pub fn rk4_oracle(
    f: &dyn Fn(&[f64]) -> Vec<f64>,
    x0: &[f64],
    dt: f64,
    steps: usize,
) -> Array2<f64> {
    let n = x0.len();
    let mut out = Array2::<f64>::zeros((n, steps + 1));
    let mut x = x0.to_vec();
    for i in 0..n {
        out[(i, 0)] = x[i];
    }
    for k in 1..=steps {
        let k1 = f(&x);
        let k2 = f(&add_scaled(&x, &k1, dt / 2.0));
        let k3 = f(&add_scaled(&x, &k2, dt / 2.0));
        let k4 = f(&add_scaled(&x, &k3, dt));
        for i in 0..n {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            out[(i, k)] = x[i];
        }
    }
    out
}

fn add_scaled(x: &[f64], d: &[f64], h: f64) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + h * b).collect()
}

/// A random stable linear system together with its exact sampled-time data.
pub struct RandomLinear {
    /// Continuous-time system matrix A = S·Λ·S⁻¹.
    pub a: Array2<f64>,
    /// Exact propagator e^{A·dt} (same similarity, block exponentials).
    pub propagator: Array2<f64>,
    /// The planted continuous spectrum (order: reals, then +Im/−Im pairs).
    pub lambda: Vec<C64>,
    pub dt: f64,
}

/// Well-conditioned random similarity built from Givens rotations and a mild
/// diagonal, so that both S and S⁻¹ are known essentially exactly.
fn random_similarity<R: Rng>(rng: &mut R, n: usize) -> (Array2<f64>, Array2<f64>) {
    let mut s = Array2::<f64>::eye(n);
    let mut s_inv = Array2::<f64>::eye(n);
    for i in 0..n {
        let d = rng.random_range(0.6..1.6);
        s[(i, i)] = d;
        s_inv[(i, i)] = 1.0 / d;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            let (c, sn) = (theta.cos(), theta.sin());
            // S ← G·S (rows), S⁻¹ ← S⁻¹·Gᵀ (columns).
            for col in 0..n {
                let (a, b) = (s[(i, col)], s[(j, col)]);
                s[(i, col)] = c * a - sn * b;
                s[(j, col)] = sn * a + c * b;
            }
            for row in 0..n {
                let (a, b) = (s_inv[(row, i)], s_inv[(row, j)]);
                s_inv[(row, i)] = c * a - sn * b;
                s_inv[(row, j)] = sn * a + c * b;
            }
        }
    }
    (s, s_inv)
}

/// Draw a stable system with well-separated eigenvalues (real parts in
/// [−2, −0.1], pair frequencies in [0.3, 3], all mutual gaps ≥ 0.08).
pub fn random_stable_system<R: Rng>(rng: &mut R, n: usize, dt: f64) -> RandomLinear {
    loop {
        let n_pairs = rng.random_range(0..=(n / 2));
        let n_real = n - 2 * n_pairs;
        let reals: Vec<f64> = (0..n_real).map(|_| rng.random_range(-2.0..-0.1)).collect();
        let pairs: Vec<(f64, f64)> = (0..n_pairs)
            .map(|_| (rng.random_range(-1.5..-0.1), rng.random_range(0.3..3.0)))
            .collect();

        let lambda: Vec<C64> = reals
            .iter()
            .map(|&r| C64::new(r, 0.0))
            .chain(pairs.iter().flat_map(|&(a, b)| [C64::new(a, b), C64::new(a, -b)]))
            .collect();
        let separated = (0..n)
            .all(|i| ((i + 1)..n).all(|j| (lambda[i] - lambda[j]).norm() >= 0.08));
        if !separated {
            continue;
        }

        // Real block-diagonal Λ and its exact exponential.
        let mut lam = Array2::<f64>::zeros((n, n));
        let mut elam = Array2::<f64>::zeros((n, n));
        let mut k = 0;
        for &r in &reals {
            lam[(k, k)] = r;
            elam[(k, k)] = (r * dt).exp();
            k += 1;
        }
        for &(a, b) in &pairs {
            lam[(k, k)] = a;
            lam[(k, k + 1)] = b;
            lam[(k + 1, k)] = -b;
            lam[(k + 1, k + 1)] = a;
            let e = (a * dt).exp();
            let (cb, sb) = ((b * dt).cos(), (b * dt).sin());
            elam[(k, k)] = e * cb;
            elam[(k, k + 1)] = e * sb;
            elam[(k + 1, k)] = -e * sb;
            elam[(k + 1, k + 1)] = e * cb;
            k += 2;
        }

        let (s, s_inv) = random_similarity(rng, n);
        return RandomLinear {
            a: s.dot(&lam).dot(&s_inv),
            propagator: s.dot(&elam).dot(&s_inv),
            lambda,
            dt,
        };
    }
}

/// Exact discrete sampling: x_{k+1} = P·x_k.
pub fn sample_exact(p: &Array2<f64>, x0: &Array1<f64>, steps: usize) -> Array2<f64> {
    let n = x0.len();
    let mut out = Array2::<f64>::zeros((n, steps + 1));
    let mut x = x0.clone();
    out.column_mut(0).assign(&x);
    for k in 1..=steps {
        x = p.dot(&x);
        out.column_mut(k).assign(&x);
    }
    out
}

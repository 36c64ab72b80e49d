//! Classical and probabilistic modal analysis of linear systems
//! `ẋ = A·x`: eigendecomposition with a reproducible normalization, modal
//! simulation, contribution factors and the two participation-factor families.
//!
//! This module doubles as the oracle against which the Koopman pipeline is
//! validated on linear data.

use ndarray::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, EigenOrder};
use crate::C64;

/// Autonomous linear system `ẋ = A·x`.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    a: Array2<f64>,
}

impl LinearSystem {
    /// Wraps a square state matrix; rejects non-square or non-finite input.
    pub fn new(a: Array2<f64>) -> Result<Self> {
        let (rows, cols) = a.dim();
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        if !linalg::all_finite(&a.view()) {
            return Err(Error::NonFiniteValue {
                row: 0,
                col: 0,
                context: "state matrix A".into(),
            });
        }
        Ok(Self { a })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &Array2<f64> {
        &self.a
    }
}

/// Modal basis `A = U·Λ·V` with `V = U⁻¹`: eigenvalues sorted by descending
/// real part (ties by ascending imaginary part), right eigenvectors of unit
/// Euclidean norm with the largest-magnitude component rotated real-positive.
#[derive(Debug, Clone)]
pub struct ModalBasis {
    /// Eigenvalues λ_j.
    pub eigenvalues: Array1<C64>,
    /// Right eigenvectors u_j as columns of U.
    pub right_eigvecs: Array2<C64>,
    /// Left eigenvectors v_jᵀ as rows of V = U⁻¹.
    pub left_eigvecs: Array2<C64>,
}

impl ModalBasis {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }
}

/// Contribution of each mode to each state for a given initial condition:
/// `σ_ij = (v_jᵀ x₀) u_ij`. Rows sum to `x₀`.
#[derive(Debug, Clone)]
pub struct ContributionMatrix {
    pub sigma: Array2<C64>,
    pub x0: Array1<f64>,
}

/// Eigendecomposition with the fixed normalization convention. Coinciding
/// eigenvalues (within `1e-9·‖A‖_F`) are rejected: the modal expansion
/// assumes a diagonalizable system with distinct eigenvalues.
pub fn eigendecompose(sys: &LinearSystem) -> Result<ModalBasis> {
    let scale = linalg::fro_norm(&sys.a.view());
    let eig = linalg::eig_normalized(&sys.a.view(), EigenOrder::RealDescending, scale, false)?;
    let left = linalg::inv_c(&eig.vectors.view())?;
    Ok(ModalBasis {
        eigenvalues: eig.values,
        right_eigvecs: eig.vectors,
        left_eigvecs: left,
    })
}

/// Modal solution `x(t) = Σ_j (v_jᵀ x₀) u_j e^{λ_j t}` evaluated at the given
/// time points; returns the trajectory with one column per time point.
///
/// For real systems the imaginary parts cancel in conjugate pairs; the
/// residual is checked against 1e-9 (a warning is logged above that) and
/// discarded.
pub fn simulate_linear(basis: &ModalBasis, x0: &ArrayView1<'_, f64>, times: &[f64]) -> Result<Array2<f64>> {
    let n = basis.n();
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: x0.len(),
            context: "initial state passed to simulate_linear".into(),
        });
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidConfig("time points must be non-decreasing".into()));
    }

    // Modal amplitudes α_j = v_jᵀ x₀.
    let x0c = x0.map(|&v| C64::new(v, 0.0));
    let alpha = basis.left_eigvecs.dot(&x0c);

    let mut out = Array2::<f64>::zeros((n, times.len()));
    let mut max_imag: f64 = 0.0;
    for (k, &t) in times.iter().enumerate() {
        let mut xk = Array1::<C64>::zeros(n);
        for j in 0..n {
            let gain = alpha[j] * (basis.eigenvalues[j] * t).exp();
            for i in 0..n {
                xk[i] += gain * basis.right_eigvecs[(i, j)];
            }
        }
        for i in 0..n {
            max_imag = max_imag.max(xk[i].im.abs());
            out[(i, k)] = xk[i].re;
        }
    }
    if max_imag > 1e-9 {
        log::warn!("simulate_linear: imaginary residue {max_imag:.3e} exceeds 1e-9");
    }
    Ok(out)
}

/// Contribution factors `σ_ij = (v_jᵀ x₀) u_ij` (mode j in state i for the
/// given initial condition).
pub fn contribution_factors(basis: &ModalBasis, x0: &ArrayView1<'_, f64>) -> Result<ContributionMatrix> {
    let n = basis.n();
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: x0.len(),
            context: "initial state passed to contribution_factors".into(),
        });
    }
    let x0c = x0.map(|&v| C64::new(v, 0.0));
    let alpha = basis.left_eigvecs.dot(&x0c);
    let mut sigma = Array2::<C64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            sigma[(i, j)] = alpha[j] * basis.right_eigvecs[(i, j)];
        }
    }
    Ok(ContributionMatrix {
        sigma,
        x0: x0.to_owned(),
    })
}

/// Classic participation factors `p_ij = V[j,i]·U[i,j]` (component i of the
/// left and right eigenvectors of mode j). Rows and columns each sum to 1 by
/// biorthogonality.
pub fn linear_participation_factors(basis: &ModalBasis) -> Array2<C64> {
    let n = basis.n();
    let mut p = Array2::<C64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            p[(i, j)] = basis.left_eigvecs[(j, i)] * basis.right_eigvecs[(i, j)];
        }
    }
    p
}

/// Probabilistic state-in-mode participation factors
/// `Π[i,j] = (Re V[j,i])² / Σ_r (Re V[j,r])²`: the expected fraction of the
/// modal energy of mode j carried by state i for an initial condition uniform
/// on the unit sphere. Columns sum to 1.
pub fn probabilistic_state_in_mode(basis: &ModalBasis) -> Result<Array2<f64>> {
    state_in_mode_from_left(&basis.left_eigvecs.view())
}

/// Core of the state-in-mode computation, shared with the Koopman module:
/// rows of `left` are the left eigenvectors.
pub(crate) fn state_in_mode_from_left(left: &ArrayView2<'_, C64>) -> Result<Array2<f64>> {
    let q = left.nrows();
    let mut pi = Array2::<f64>::zeros((q, q));
    for j in 0..q {
        let denom: f64 = left.row(j).iter().map(|x| x.re * x.re).sum();
        if denom < 1e-14 {
            return Err(Error::ZeroRealEigenvector { index: j });
        }
        for i in 0..q {
            let re = left[(j, i)].re;
            pi[(i, j)] = re * re / denom;
        }
    }
    Ok(pi)
}

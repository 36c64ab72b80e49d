//! Extended dynamic mode decomposition: estimate a finite Koopman operator
//! `K = Γ_X′ · Γ_X†` from lifted snapshot pairs and extract Koopman tuples
//! `(μ_j, φ_j, ϕ_j)`, eigenfunctions, modal coordinates, reconstructions and
//! frequency/damping summaries.

use ndarray::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, EigenOrder};
use crate::observables::{self, ObservableDictionary};
use crate::C64;

/// Snapshot matrices `X = [x₀ … x_{m−1}]`, `X′ = [x₁ … x_m]` with sampling
/// interval `dt` (seconds). Columns may be concatenated across independent
/// trajectories; pairs never straddle trajectory boundaries.
#[derive(Debug, Clone)]
pub struct SnapshotPair {
    pub x: Array2<f64>,
    pub xp: Array2<f64>,
    pub dt: f64,
}

impl SnapshotPair {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn m(&self) -> usize {
        self.x.ncols()
    }

    /// Concatenate pairs from independent trajectories (same state dimension
    /// and sampling interval).
    pub fn concat(pairs: &[SnapshotPair]) -> Result<SnapshotPair> {
        let first = pairs
            .first()
            .ok_or_else(|| Error::InvalidConfig("no snapshot pairs to concatenate".into()))?;
        let n = first.n();
        let dt = first.dt;
        let m_total: usize = pairs.iter().map(|p| p.m()).sum();
        let mut x = Array2::<f64>::zeros((n, m_total));
        let mut xp = Array2::<f64>::zeros((n, m_total));
        let mut at = 0;
        for p in pairs {
            if p.n() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: p.n(),
                    context: "state rows across concatenated trajectories".into(),
                });
            }
            if (p.dt - dt).abs() > 1e-12 * dt.abs().max(1.0) {
                return Err(Error::InvalidConfig(
                    "concatenated trajectories must share the sampling interval".into(),
                ));
            }
            x.slice_mut(s![.., at..at + p.m()]).assign(&p.x);
            xp.slice_mut(s![.., at..at + p.m()]).assign(&p.xp);
            at += p.m();
        }
        Ok(SnapshotPair { x, xp, dt })
    }
}

/// Split one trajectory (columns in time order) into the shifted pair.
pub fn assemble_snapshots(trajectory: &ArrayView2<'_, f64>, dt: f64) -> Result<SnapshotPair> {
    if dt <= 0.0 || !dt.is_finite() {
        return Err(Error::InvalidConfig(format!("sampling interval must be positive, got {dt}")));
    }
    let cols = trajectory.ncols();
    if cols < 2 {
        return Err(Error::TooFewSnapshots { cols });
    }
    Ok(SnapshotPair {
        x: trajectory.slice(s![.., ..cols - 1]).to_owned(),
        xp: trajectory.slice(s![.., 1..]).to_owned(),
        dt,
    })
}

/// Numerical metadata of the least-squares fit.
#[derive(Debug, Clone)]
pub struct FitDiagnostics {
    /// Residual `‖K·Γ_X − Γ_X′‖_F`.
    pub residual: f64,
    /// Retained numerical rank of `Γ_X`.
    pub rank: usize,
    /// True when rank < q (the fit is still returned; strict CLI mode turns
    /// this into an error).
    pub rank_deficient: bool,
    /// Singular values of `Γ_X`.
    pub singular_values: Vec<f64>,
    /// Number of snapshot columns used.
    pub m: usize,
}

/// `K = Γ_X′ · Γ_X†` with the pseudoinverse realized by a truncated SVD:
/// singular values below `svd_rtol · σ_max` are discarded.
pub fn estimate_koopman(
    gx: &ArrayView2<'_, f64>,
    gxp: &ArrayView2<'_, f64>,
    svd_rtol: f64,
) -> Result<(Array2<f64>, FitDiagnostics)> {
    if gx.dim() != gxp.dim() {
        return Err(Error::DimensionMismatch {
            expected: gx.ncols(),
            actual: gxp.ncols(),
            context: "snapshot matrices Γ_X and Γ_X′".into(),
        });
    }
    let (q, m) = gx.dim();
    if m < q {
        log::warn!("estimate_koopman: only {m} snapshot columns for {q} observables; the fit is underdetermined");
    }
    for (name, g) in [("Γ_X", gx), ("Γ_X′", gxp)] {
        if let Some(((row, col), _)) = g.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteValue { row, col, context: format!("lifted snapshot matrix {name}") });
        }
    }

    let p = linalg::right_pinv_product(gxp, gx, svd_rtol)?;
    let residual = linalg::fro_norm(&(&p.product.dot(gx) - gxp).view());
    let rank_deficient = p.rank < q;
    if rank_deficient {
        log::warn!("estimate_koopman: numerical rank {} < q = {q} (rank-deficient dictionary)", p.rank);
    }
    Ok((
        p.product,
        FitDiagnostics {
            residual,
            rank: p.rank,
            rank_deficient,
            singular_values: p.singular_values.to_vec(),
            m,
        },
    ))
}

/// Finite Koopman approximation: operator matrix, eigenvalues, left
/// eigenvectors (rows of `Xi`), right eigenvectors (columns of `XiInv`,
/// unit-norm with real-positive leading component) and Koopman modes
/// `Phi = B·XiInv`.
#[derive(Debug, Clone)]
pub struct KoopmanDecomposition {
    pub k: Array2<f64>,
    /// Discrete-time eigenvalues μ_j.
    pub mu: Array1<C64>,
    /// Left-eigenvector matrix Ξ (row j pairs with μ_j); eigenfunctions are
    /// `φ(x) = Ξ·γ(x)`.
    pub xi: Array2<C64>,
    /// Right eigenvectors as columns; `Xi·XiInv = I`.
    pub xi_inv: Array2<C64>,
    /// Koopman modes ϕ_j as columns (n×q).
    pub phi: Array2<C64>,
    pub dict: ObservableDictionary,
    /// Sampling interval, seconds.
    pub dt: f64,
    /// Present when produced by [`fit`]; `None` for decompositions built from
    /// an externally supplied operator matrix.
    pub diagnostics: Option<FitDiagnostics>,
}

impl KoopmanDecomposition {
    pub fn q(&self) -> usize {
        self.mu.len()
    }

    pub fn n(&self) -> usize {
        self.phi.nrows()
    }

    /// Continuous-time eigenvalues `λ_c = ln(μ)/dt` (principal branch).
    /// Zero eigenvalues map to `-∞ + 0i`; see [`mode_summary`].
    pub fn lambda_c(&self) -> Array1<C64> {
        self.mu.map(|m| discrete_to_continuous(*m, self.dt))
    }

    /// Reorder modes by a permutation: `perm[t]` = old index of new mode `t`.
    /// Rows of Ξ and columns of XiInv/Φ move together, so all invariants are
    /// preserved.
    pub fn permute_modes(&self, perm: &[usize]) -> Result<KoopmanDecomposition> {
        let q = self.q();
        let mut seen = vec![false; q];
        if perm.len() != q || perm.iter().any(|&p| p >= q || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidConfig(format!("invalid mode permutation {perm:?}")));
        }
        let mut out = self.clone();
        for (t, &p) in perm.iter().enumerate() {
            out.mu[t] = self.mu[p];
            out.xi.row_mut(t).assign(&self.xi.row(p));
            out.xi_inv.column_mut(t).assign(&self.xi_inv.column(p));
            out.phi.column_mut(t).assign(&self.phi.column(p));
        }
        Ok(out)
    }

    /// Reorder modes so that mode `t` is the one whose continuous eigenvalue
    /// is nearest `targets[t]` (greedy global matching). The mode-in-state
    /// participation convention pairs Ξ row i with state i, so golden-value
    /// comparisons must fix the mode order first; this is the tool for that.
    pub fn align_modes(&self, targets: &[C64]) -> Result<KoopmanDecomposition> {
        if targets.len() != self.q() {
            return Err(Error::DimensionMismatch {
                expected: self.q(),
                actual: targets.len(),
                context: "eigenvalue targets passed to align_modes".into(),
            });
        }
        let lam = self.lambda_c();
        let perm = linalg::match_eigenvalues(lam.as_slice().unwrap(), targets);
        self.permute_modes(&perm)
    }

    /// Reorder modes by dominant observable: assign each mode to the
    /// observable it reads most strongly (largest `|Ξ[j, i]|`, greedily over
    /// all pairs), then order modes by their assigned observable position.
    ///
    /// The element-wise mode-in-state convention is order-sensitive; this
    /// ordering pairs each Ξ row with the observable it dominates, which is
    /// the arrangement under which the printed participation matrices of the
    /// canonical benchmark come out. The CLI applies it after fitting.
    pub fn observable_dominance_order(&self) -> KoopmanDecomposition {
        let q = self.q();
        let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(q * q);
        for j in 0..q {
            for i in 0..q {
                pairs.push((self.xi[(j, i)].norm(), j, i));
            }
        }
        // Strongest |Ξ[j,i]| first; deterministic tie-breaks.
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut mode_of_obs = vec![usize::MAX; q];
        let mut mode_used = vec![false; q];
        for (_, j, i) in pairs {
            if mode_of_obs[i] == usize::MAX && !mode_used[j] {
                mode_of_obs[i] = j;
                mode_used[j] = true;
            }
        }
        self.permute_modes(&mode_of_obs)
            .expect("greedy assignment yields a permutation")
    }
}

fn discrete_to_continuous(mu: C64, dt: f64) -> C64 {
    if mu.norm() == 0.0 {
        return C64::new(f64::NEG_INFINITY, 0.0);
    }
    C64::new(mu.norm().ln() / dt, mu.arg() / dt)
}

/// Eigendecompose an operator matrix into Koopman tuples under the fixed
/// normalization and ordering convention (descending |μ|, ties by ascending
/// frequency, conjugate pairs adjacent with the positive-imaginary member
/// first).
///
/// Coinciding eigenvalues are rejected except within the near-zero cluster
/// that a rank-truncated fit legitimately produces for discarded directions.
pub fn koopman_tuples(
    k: Array2<f64>,
    dict: &ObservableDictionary,
    dt: f64,
) -> Result<KoopmanDecomposition> {
    koopman_tuples_with(k, dict, dt, None)
}

fn koopman_tuples_with(
    k: Array2<f64>,
    dict: &ObservableDictionary,
    dt: f64,
    diagnostics: Option<FitDiagnostics>,
) -> Result<KoopmanDecomposition> {
    let (rows, cols) = k.dim();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    if rows != dict.q() {
        return Err(Error::DimensionMismatch {
            expected: dict.q(),
            actual: rows,
            context: "operator size vs dictionary size".into(),
        });
    }
    if dt <= 0.0 || !dt.is_finite() {
        return Err(Error::InvalidConfig(format!("sampling interval must be positive, got {dt}")));
    }

    let scale = linalg::fro_norm(&k.view());
    let eig = linalg::eig_normalized(&k.view(), EigenOrder::MagnitudeDescending, scale, true)?;
    let xi = linalg::inv_c(&eig.vectors.view())?;
    let b = observables::recovery_matrix(dict).b;
    let phi = linalg::complexify(&b.view()).dot(&eig.vectors);

    Ok(KoopmanDecomposition {
        k,
        mu: eig.values,
        xi,
        xi_inv: eig.vectors,
        phi,
        dict: dict.clone(),
        dt,
        diagnostics,
    })
}

/// Full EDMD pipeline on a snapshot pair: lift both matrices, estimate the
/// operator and extract the tuples.
pub fn fit(
    pair: &SnapshotPair,
    dict: &ObservableDictionary,
    svd_rtol: f64,
) -> Result<KoopmanDecomposition> {
    let gx = observables::lift(dict, &pair.x.view())?;
    let gxp = observables::lift(dict, &pair.xp.view())?;
    let (k, diag) = estimate_koopman(&gx.view(), &gxp.view(), svd_rtol)?;
    koopman_tuples_with(k, dict, pair.dt, Some(diag))
}

/// Koopman eigenfunction values `φ(x) = Ξ·γ(x)`.
pub fn evaluate_eigenfunctions(dec: &KoopmanDecomposition, x: &ArrayView1<'_, f64>) -> Result<Array1<C64>> {
    if x.len() != dec.n() {
        return Err(Error::DimensionMismatch {
            expected: dec.n(),
            actual: x.len(),
            context: "state passed to evaluate_eigenfunctions".into(),
        });
    }
    // Column views of row-major trajectories are strided, so copy when needed.
    let g = match x.as_slice() {
        Some(slice) => dec.dict.eval(slice),
        None => dec.dict.eval(&x.to_vec()),
    };
    Ok(dec.xi.dot(&g.map(|&v| C64::new(v, 0.0))))
}

/// Spectral reconstruction `x_k = Σ_j φ_j(x₀)·ϕ_j·μ_j^k` for k = 0…steps.
/// Imaginary residues above 1e-6 are logged; the real part is returned.
pub fn reconstruct(
    dec: &KoopmanDecomposition,
    x0: &ArrayView1<'_, f64>,
    steps: usize,
) -> Result<Array2<f64>> {
    let phi0 = evaluate_eigenfunctions(dec, x0)?;
    let n = dec.n();
    let q = dec.q();
    let mut out = Array2::<f64>::zeros((n, steps + 1));
    let mut coeff = phi0; // φ_j(x₀)·μ_j^k, advanced multiplicatively
    let mut max_imag: f64 = 0.0;
    for k in 0..=steps {
        if k > 0 {
            for j in 0..q {
                coeff[j] *= dec.mu[j];
            }
        }
        for i in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..q {
                acc += coeff[j] * dec.phi[(i, j)];
            }
            max_imag = max_imag.max(acc.im.abs());
            out[(i, k)] = acc.re;
        }
    }
    if max_imag > 1e-6 {
        log::warn!("reconstruct: imaginary residue {max_imag:.3e} exceeds 1e-6; conjugate modes may be incomplete");
    }
    Ok(out)
}

/// Relative Frobenius reconstruction error `ε = ‖X̂ − X‖_F / ‖X‖_F`
/// (a fraction; multiply by 100 for percent).
pub fn reconstruction_error(xhat: &ArrayView2<'_, f64>, x: &ArrayView2<'_, f64>) -> Result<f64> {
    if xhat.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.ncols(),
            actual: xhat.ncols(),
            context: "reconstruction vs reference trajectory".into(),
        });
    }
    let denom = linalg::fro_norm(x);
    if denom == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok(linalg::fro_norm(&(xhat - x).view()) / denom)
}

/// Modal coordinates `Z = Ξ·G` of lifted data; on trajectory data each row
/// evolves decoupled: `Z[j, k+1] ≈ μ_j·Z[j, k]`.
pub fn modal_coordinates(dec: &KoopmanDecomposition, g: &ArrayView2<'_, f64>) -> Result<Array2<C64>> {
    if g.nrows() != dec.q() {
        return Err(Error::DimensionMismatch {
            expected: dec.q(),
            actual: g.nrows(),
            context: "lifted rows passed to modal_coordinates".into(),
        });
    }
    Ok(dec.xi.dot(&linalg::complexify(g)))
}

/// Per-mode frequency/damping summary. `lambda_c` is the principal-branch
/// logarithm `ln(μ)/dt`.
#[derive(Debug, Clone, Copy)]
pub struct ModeSummary {
    /// 1-based mode index (position in the decomposition).
    pub index: usize,
    pub mu_re: f64,
    pub mu_im: f64,
    pub lambda_re: f64,
    pub lambda_im: f64,
    /// `|Im λ_c| / 2π`, Hz.
    pub freq_hz: f64,
    /// `−Re λ_c / |λ_c| · 100`; defined as 100 when `|λ_c| = 0`.
    pub damping_pct: f64,
    /// Set for μ = 0 (non-invertible mode, reported as infinitely damped).
    pub zero_eigenvalue: bool,
}

/// Frequency (Hz) and damping ratio (%) for every mode. A zero discrete
/// eigenvalue cannot be mapped to continuous time; such modes are flagged and
/// reported with `λ_c = −∞`, frequency 0 and damping 100.
pub fn mode_summary(dec: &KoopmanDecomposition) -> Vec<ModeSummary> {
    dec.mu
        .iter()
        .enumerate()
        .map(|(j, &mu)| {
            if mu.norm() == 0.0 {
                return ModeSummary {
                    index: j + 1,
                    mu_re: mu.re,
                    mu_im: mu.im,
                    lambda_re: f64::NEG_INFINITY,
                    lambda_im: 0.0,
                    freq_hz: 0.0,
                    damping_pct: 100.0,
                    zero_eigenvalue: true,
                };
            }
            let lam = discrete_to_continuous(mu, dec.dt);
            debug_assert!(lam.im.abs() <= std::f64::consts::PI / dec.dt * (1.0 + 1e-12));
            let mag = lam.norm();
            let damping_pct = if mag == 0.0 { 100.0 } else { -lam.re / mag * 100.0 };
            ModeSummary {
                index: j + 1,
                mu_re: mu.re,
                mu_im: mu.im,
                lambda_re: lam.re,
                lambda_im: lam.im,
                freq_hz: lam.im.abs() / (2.0 * std::f64::consts::PI),
                damping_pct,
                zero_eigenvalue: false,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::{build_dictionary, identity_dictionary, ObservableSpec};
    use approx::assert_abs_diff_eq;

    fn canonical_dict() -> ObservableDictionary {
        build_dictionary(
            vec![
                ObservableSpec::identity(1),
                ObservableSpec::identity(2),
                ObservableSpec::monomial(vec![0, 2]),
            ],
            2,
        )
        .unwrap()
    }

    #[test]
    fn snapshots_shift_by_one() {
        let traj = array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]];
        let pair = assemble_snapshots(&traj.view(), 0.1).unwrap();
        assert_eq!(pair.x, array![[1.0, 2.0], [4.0, 5.0]]);
        assert_eq!(pair.xp, array![[2.0, 3.0], [5.0, 6.0]]);
        assert_eq!(pair.m(), 2);
    }

    #[test]
    fn single_column_is_too_few() {
        let traj = array![[1.0], [2.0]];
        assert!(matches!(
            assemble_snapshots(&traj.view(), 0.1),
            Err(Error::TooFewSnapshots { cols: 1 })
        ));
    }

    #[test]
    fn thousand_step_trajectory_gives_999_pairs() {
        let sys = crate::models::canonical_system(-1.0, -0.05);
        let traj = crate::models::integrate_rk4(&sys, &[-1.0, 2.0], 0.01, 999).unwrap();
        let pair = assemble_snapshots(&traj.view(), 0.01).unwrap();
        assert_eq!(pair.m(), 999);
    }

    #[test]
    fn identity_data_gives_identity_operator() {
        let gx = Array2::<f64>::eye(3);
        let (k, diag) = estimate_koopman(&gx.view(), &gx.view(), 1e-10).unwrap();
        assert_eq!(diag.rank, 3);
        assert!(!diag.rank_deficient);
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(k[(i, j)], if i == j { 1.0 } else { 0.0 }, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn scaled_data_gives_scaled_operator() {
        let gx = array![[1.0, 0.0, 2.0], [0.0, 1.0, -1.0]];
        let gxp = gx.mapv(|x| 2.0 * x);
        let (k, diag) = estimate_koopman(&gx.view(), &gxp.view(), 1e-10).unwrap();
        assert!(diag.residual < 1e-12);
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(k[(i, j)], if i == j { 2.0 } else { 0.0 }, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn column_duplication_leaves_operator_unchanged() {
        let gx = array![[1.0, 0.2, -0.4, 0.9], [0.3, -1.0, 0.5, 0.1], [0.0, 0.7, 1.1, -0.6]];
        let gxp = array![[0.9, 0.1, -0.3, 0.8], [0.2, -0.9, 0.6, 0.2], [0.1, 0.6, 1.0, -0.5]];
        let (k1, _) = estimate_koopman(&gx.view(), &gxp.view(), 1e-10).unwrap();
        let dup = |g: &Array2<f64>| ndarray::concatenate![Axis(1), g.view(), g.view()];
        let (k2, _) = estimate_koopman(&dup(&gx).view(), &dup(&gxp).view(), 1e-10).unwrap();
        for (a, b) in k1.iter().zip(k2.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn rank_deficiency_is_flagged_not_fatal() {
        // Second observable row is identically zero.
        let gx = array![[1.0, 2.0, 3.0], [0.0, 0.0, 0.0]];
        let gxp = array![[2.0, 4.0, 6.0], [0.0, 0.0, 0.0]];
        let (_, diag) = estimate_koopman(&gx.view(), &gxp.view(), 1e-10).unwrap();
        assert!(diag.rank_deficient);
        assert_eq!(diag.rank, 1);
    }

    #[test]
    fn lifted_canonical_data_recovers_the_analytic_spectrum() {
        // RK4 data at dt=0.01; eigenvalues of the exact lift are (−1, −0.05, −0.1).
        let sys = crate::models::canonical_system(-1.0, -0.05);
        let traj = crate::models::integrate_rk4(&sys, &[-1.0, 2.0], 0.01, 1000).unwrap();
        let pair = assemble_snapshots(&traj.view(), 0.01).unwrap();
        let dec = fit(&pair, &canonical_dict(), 1e-10).unwrap();
        let mut lam: Vec<f64> = dec.lambda_c().iter().map(|l| l.re).collect();
        lam.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(lam[0], -1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(lam[1], -0.1, epsilon = 1e-8);
        assert_abs_diff_eq!(lam[2], -0.05, epsilon = 1e-8);
        // Discrete eigenvalues are the exponentials of those.
        let mut mu: Vec<f64> = dec.mu.iter().map(|m| m.re).collect();
        mu.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(mu[0], (-0.01f64).exp(), epsilon = 1e-10);
        assert_abs_diff_eq!(mu[1], (-0.001f64).exp(), epsilon = 1e-10);
        assert_abs_diff_eq!(mu[2], (-0.0005f64).exp(), epsilon = 1e-10);
    }

    #[test]
    fn diagonal_operator_tuples_sorted_by_magnitude() {
        let k = array![[0.5, 0.0], [0.0, 0.9]];
        let dec = koopman_tuples(k, &identity_dictionary(2), 0.01).unwrap();
        assert_abs_diff_eq!(dec.mu[0].re, 0.9, epsilon = 1e-14);
        assert_abs_diff_eq!(dec.mu[1].re, 0.5, epsilon = 1e-14);
        // Ξ and Φ are (permuted) identities with unit diagonal.
        assert_abs_diff_eq!(dec.xi[(0, 1)].re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(dec.xi[(1, 0)].re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(dec.phi[(1, 0)].re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(dec.phi[(0, 1)].re, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn canonical_tuples_match_printed_matrices_after_alignment() {
        let sys = crate::models::canonical_system(-1.0, -0.05);
        let traj = crate::models::integrate_rk4(&sys, &[-1.0, 2.0], 0.01, 1000).unwrap();
        let pair = assemble_snapshots(&traj.view(), 0.01).unwrap();
        let dec = fit(&pair, &canonical_dict(), 1e-10)
            .unwrap()
            .align_modes(&[C64::new(-1.0, 0.0), C64::new(-0.05, 0.0), C64::new(-0.1, 0.0)])
            .unwrap();

        let xi_expect = [
            [1.0, 0.0, -1.111111],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.494847],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(dec.xi[(i, j)].re, xi_expect[i][j], epsilon = 1e-4);
                assert_abs_diff_eq!(dec.xi[(i, j)].im, 0.0, epsilon = 1e-8);
            }
        }
        let phi_expect = [[1.0, 0.0, 0.743294], [0.0, 1.0, 0.0]];
        for i in 0..2 {
            for j in 0..3 {
                assert_abs_diff_eq!(dec.phi[(i, j)].re, phi_expect[i][j], epsilon = 1e-4);
            }
        }
        // Dominance ordering reproduces the same arrangement on its own.
        let dom = fit(&pair, &canonical_dict(), 1e-10).unwrap().observable_dominance_order();
        for j in 0..3 {
            assert_abs_diff_eq!(dom.lambda_c()[j].re, dec.lambda_c()[j].re, epsilon = 1e-10);
        }
    }

    #[test]
    fn identity_dictionary_reduces_to_linear_modal_analysis() {
        // Exactly sampled stable linear system: μ = exp(λ dt), Φ columns are
        // the eigenvectors of A under the shared normalization.
        let a = array![[-1.0, 0.4], [0.1, -2.5]];
        let lin = crate::lin_modal::eigendecompose(&crate::lin_modal::LinearSystem::new(a.clone()).unwrap()).unwrap();
        let dt = 0.05;
        // Propagator via the modal factors: U diag(e^{λdt}) V.
        let mut ulam = lin.right_eigvecs.clone();
        for (j, mut col) in ulam.columns_mut().into_iter().enumerate() {
            let g = (lin.eigenvalues[j] * dt).exp();
            col.mapv_inplace(|x| x * g);
        }
        let prop_c = ulam.dot(&lin.left_eigvecs);
        let prop = prop_c.map(|z| z.re);

        // Two short exactly-propagated trajectories.
        let mut cols_x: Vec<f64> = Vec::new();
        let mut cols_xp: Vec<f64> = Vec::new();
        let mut m = 0;
        for x0 in [array![1.0, 0.25], array![-0.5, 1.5]] {
            let mut x = x0.clone();
            for _ in 0..4 {
                let xn = prop.dot(&x);
                cols_x.extend(x.iter());
                cols_xp.extend(xn.iter());
                x = xn;
                m += 1;
            }
        }
        let gx = Array2::from_shape_vec((m, 2), cols_x).unwrap().reversed_axes();
        let gxp = Array2::from_shape_vec((m, 2), cols_xp).unwrap().reversed_axes();
        let (k, _) = estimate_koopman(&gx.view(), &gxp.view(), 1e-12).unwrap();
        let dec = koopman_tuples(k, &identity_dictionary(2), dt).unwrap();

        for j in 0..2 {
            let expect = (lin.eigenvalues[j] * dt).exp();
            assert!((dec.mu[j] - expect).norm() < 1e-9);
            for i in 0..2 {
                assert!((dec.phi[(i, j)] - lin.right_eigvecs[(i, j)]).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn eigenfunctions_at_the_paper_point() {
        let sys = crate::models::canonical_system(-1.0, -0.05);
        let traj = crate::models::integrate_rk4(&sys, &[-1.0, 2.0], 0.01, 1000).unwrap();
        let pair = assemble_snapshots(&traj.view(), 0.01).unwrap();
        let dec = fit(&pair, &canonical_dict(), 1e-10)
            .unwrap()
            .align_modes(&[C64::new(-1.0, 0.0), C64::new(-0.05, 0.0), C64::new(-0.1, 0.0)])
            .unwrap();
        let phi0 = evaluate_eigenfunctions(&dec, &array![-1.0, 2.0].view()).unwrap();
        assert_abs_diff_eq!(phi0[0].re, -5.444444, epsilon = 1e-4);
        assert_abs_diff_eq!(phi0[1].re, 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(phi0[2].re, 5.979388, epsilon = 1e-4);
    }

    #[test]
    fn eigenfunctions_vanish_at_origin_for_monomial_dictionaries() {
        let sys = crate::models::canonical_system(-1.0, -0.05);
        let traj = crate::models::integrate_rk4(&sys, &[-1.0, 2.0], 0.01, 500).unwrap();
        let pair = assemble_snapshots(&traj.view(), 0.01).unwrap();
        let dec = fit(&pair, &canonical_dict(), 1e-10).unwrap();
        let phi0 = evaluate_eigenfunctions(&dec, &array![0.0, 0.0].view()).unwrap();
        for v in phi0.iter() {
            assert_abs_diff_eq!(v.norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn reconstruction_starts_at_x0_and_tracks_rk4() {
        let sys = crate::models::canonical_system(-1.0, -0.05);
        let traj = crate::models::integrate_rk4(&sys, &[-1.0, 2.0], 0.01, 1000).unwrap();
        let pair = assemble_snapshots(&traj.view(), 0.01).unwrap();
        let dec = fit(&pair, &canonical_dict(), 1e-10).unwrap();

        let xhat = reconstruct(&dec, &array![-1.0, 2.0].view(), 1000).unwrap();
        // k = 0 returns x0 (B·γ identity).
        assert_abs_diff_eq!(xhat[(0, 0)], -1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(xhat[(1, 0)], 2.0, epsilon = 1e-10);
        // Relative Frobenius error well under 0.1%.
        let eps = reconstruction_error(&xhat.view(), &traj.view()).unwrap();
        assert!(eps <= 1e-3, "ε = {eps:.3e}");
    }

    #[test]
    fn linear_identity_reconstruction_matches_modal_sum() {
        let a = array![[-0.6, 0.3], [-0.3, -0.6]];
        let lin = crate::lin_modal::eigendecompose(&crate::lin_modal::LinearSystem::new(a.clone()).unwrap()).unwrap();
        let dt = 0.02;
        let x0 = array![1.0, -1.0];
        let times: Vec<f64> = (0..50).map(|k| k as f64 * dt).collect();
        let exact = crate::lin_modal::simulate_linear(&lin, &x0.view(), &times).unwrap();
        let pair = assemble_snapshots(&exact.view(), dt).unwrap();
        let dec = fit(&pair, &identity_dictionary(2), 1e-12).unwrap();
        let xhat = reconstruct(&dec, &x0.view(), 49).unwrap();
        for (a, b) in xhat.iter().zip(exact.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
    }

    #[test]
    fn reconstruction_error_basics() {
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        assert_abs_diff_eq!(reconstruction_error(&x.view(), &x.view()).unwrap(), 0.0);
        let inflated = x.mapv(|v| 1.01 * v);
        assert_abs_diff_eq!(reconstruction_error(&inflated.view(), &x.view()).unwrap(), 0.01, epsilon = 1e-12);
        let zero = Array2::<f64>::zeros((2, 2));
        assert!(matches!(
            reconstruction_error(&x.view(), &zero.view()),
            Err(Error::ZeroReference)
        ));
    }

    #[test]
    fn modal_coordinates_decouple_on_trajectory_data() {
        let sys = crate::models::canonical_system(-1.0, -0.05);
        let traj = crate::models::integrate_rk4(&sys, &[-1.0, 2.0], 0.01, 400).unwrap();
        let pair = assemble_snapshots(&traj.view(), 0.01).unwrap();
        let dec = fit(&pair, &canonical_dict(), 1e-10).unwrap();
        let g = observables::lift(&dec.dict, &traj.view()).unwrap();
        let z = modal_coordinates(&dec, &g.view()).unwrap();

        // Z[:, 0] = Ξ·γ₀ …
        let phi0 = evaluate_eigenfunctions(&dec, &array![-1.0, 2.0].view()).unwrap();
        for j in 0..3 {
            assert!((z[(j, 0)] - phi0[j]).norm() < 1e-12);
        }
        // … and rows advance by μ_j.
        let mut resid: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for j in 0..3 {
            for k in 0..400 {
                resid = resid.max((z[(j, k + 1)] - dec.mu[j] * z[(j, k)]).norm());
                scale = scale.max(z[(j, k)].norm());
            }
        }
        assert!(resid <= 1e-6 * scale, "decoupling residual {resid:.3e}");
    }

    #[test]
    fn mode_summary_reference_points() {
        // μ = 1 → frequency 0, damping 100.
        let k = array![[1.0, 0.0], [0.0, 0.5]];
        let dec = koopman_tuples(k, &identity_dictionary(2), 0.01).unwrap();
        let s = mode_summary(&dec);
        assert_abs_diff_eq!(s[0].lambda_re, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s[0].freq_hz, 0.0);
        assert_abs_diff_eq!(s[0].damping_pct, 100.0);
        assert!(!s[0].zero_eigenvalue);

        // Real stable mode: μ = e^{−0.05·0.01} → λ_c = −0.05, damping 100.
        let k = array![[(-0.05f64 * 0.01).exp(), 0.0], [0.0, 0.2]];
        let dec = koopman_tuples(k, &identity_dictionary(2), 0.01).unwrap();
        let s = mode_summary(&dec);
        assert_abs_diff_eq!(s[0].lambda_re, -0.05, epsilon = 1e-10);
        assert_abs_diff_eq!(s[0].freq_hz, 0.0);
        assert_abs_diff_eq!(s[0].damping_pct, 100.0);

        // Oscillatory pair λ_c = −0.0287 ± 1.4703i → 0.23 Hz, 1.95% damping.
        let (re, im) = (-0.0287, 1.4703);
        let dt = 0.01;
        let mu = (C64::new(re, im) * dt).exp();
        let k = array![
            [mu.re, mu.im, 0.0],
            [-mu.im, mu.re, 0.0],
            [0.0, 0.0, 0.1]
        ];
        let dec = koopman_tuples(k, &identity_dictionary(3), dt).unwrap();
        let s = mode_summary(&dec);
        assert_abs_diff_eq!(s[0].freq_hz, 0.23, epsilon = 5e-3);
        assert_abs_diff_eq!(s[0].damping_pct, 1.95, epsilon = 5e-3);
        assert!(s[0].damping_pct >= -100.0 && s[0].damping_pct <= 100.0);
        assert!(s[0].freq_hz >= 0.0);

        // μ = 0 is flagged, not fatal.
        let k = array![[0.5, 0.0], [0.0, 0.0]];
        let dec = koopman_tuples(k, &identity_dictionary(2), 0.01).unwrap();
        let s = mode_summary(&dec);
        assert!(s[1].zero_eigenvalue);
        assert_abs_diff_eq!(s[1].damping_pct, 100.0);
        assert_eq!(s[1].lambda_re, f64::NEG_INFINITY);
    }

    #[test]
    fn held_out_eigenfunction_evolution() {
        // Fit on one trajectory, verify φ_j(x_{k+1}) = μ_j φ_j(x_k) on another.
        let sys = crate::models::canonical_system(-1.0, -0.05);
        let train = crate::models::integrate_rk4(&sys, &[-1.0, 2.0], 0.01, 1000).unwrap();
        let dec = fit(&assemble_snapshots(&train.view(), 0.01).unwrap(), &canonical_dict(), 1e-10).unwrap();

        let held = crate::models::integrate_rk4(&sys, &[0.5, -1.2], 0.01, 500).unwrap();
        let mut worst = vec![0.0f64; 3];
        let mut scale = vec![0.0f64; 3];
        let mut prev = evaluate_eigenfunctions(&dec, &held.column(0)).unwrap();
        for k in 1..=500 {
            let cur = evaluate_eigenfunctions(&dec, &held.column(k)).unwrap();
            for j in 0..3 {
                worst[j] = worst[j].max((cur[j] - dec.mu[j] * prev[j]).norm());
                scale[j] = scale[j].max(prev[j].norm());
            }
            prev = cur;
        }
        for j in 0..3 {
            assert!(worst[j] <= 1e-6 * scale[j], "mode {j}: {:.3e} vs scale {:.3e}", worst[j], scale[j]);
        }
    }
}

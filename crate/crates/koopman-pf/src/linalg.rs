//! Dense linear-algebra helpers: normalized eigendecompositions, truncated-SVD
//! pseudoinverse and small utilities shared by `lin_modal` and `edmd`.

use ndarray::prelude::*;
use ndarray_linalg::{Eig, Inverse, JobSvd, SVDDC};

use crate::error::{Error, Result};
use crate::C64;

/// Ordering rule applied to eigenvalues before fixing eigenvector phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenOrder {
    /// Descending real part, ties by ascending imaginary part (linear modal
    /// analysis convention).
    RealDescending,
    /// Descending magnitude, ties by ascending frequency `|arg μ|`, conjugate
    /// pairs adjacent with the positive-imaginary member first (Koopman
    /// convention for discrete eigenvalues).
    MagnitudeDescending,
}

/// Eigendecomposition with a deterministic normalization: eigenvalues sorted
/// per `order`, each right eigenvector scaled to unit Euclidean norm with its
/// largest-magnitude component rotated to be real and positive.
#[derive(Debug)]
pub struct NormalizedEigen {
    /// Sorted eigenvalues.
    pub values: Array1<C64>,
    /// Right eigenvectors as columns, normalized as described above.
    pub vectors: Array2<C64>,
}

/// Frobenius norm of a real matrix.
pub fn fro_norm(a: &ArrayView2<'_, f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Frobenius norm of a complex matrix.
pub fn fro_norm_c(a: &ArrayView2<'_, C64>) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest absolute entry of a complex matrix (max norm).
pub fn max_abs_c(a: &ArrayView2<'_, C64>) -> f64 {
    a.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

pub(crate) fn all_finite(a: &ArrayView2<'_, f64>) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// Map a real matrix into the complex field.
pub fn complexify(a: &ArrayView2<'_, f64>) -> Array2<C64> {
    a.map(|&x| C64::new(x, 0.0))
}

fn sort_keys(mu: C64, order: EigenOrder) -> (f64, f64, f64) {
    match order {
        // (-Re, Im) and a stable third key.
        EigenOrder::RealDescending => (-mu.re, mu.im, 0.0),
        // (-|μ|, |arg μ|, -Im) so conjugates stay adjacent, +Im first.
        EigenOrder::MagnitudeDescending => (-mu.norm(), mu.arg().abs(), -mu.im),
    }
}

/// Eigendecomposition of a real square matrix with deterministic ordering and
/// the fixed phase/scale convention.
///
/// `degeneracy_scale` is the norm against which eigenvalue gaps are compared:
/// two eigenvalues closer than `1e-9 · degeneracy_scale` raise
/// [`Error::DegenerateSpectrum`]. When `exempt_zero_cluster` is set, pairs in
/// which both members are negligible (`|μ| ≤ 1e-8 · max|μ|`) are exempt from
/// that check — rank-truncated Koopman fits legitimately carry a cluster of
/// zero eigenvalues for the truncated directions.
pub fn eig_normalized(
    a: &ArrayView2<'_, f64>,
    order: EigenOrder,
    degeneracy_scale: f64,
    exempt_zero_cluster: bool,
) -> Result<NormalizedEigen> {
    let (rows, cols) = a.dim();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    if !all_finite(a) {
        return Err(Error::NonFiniteValue {
            row: 0,
            col: 0,
            context: "matrix passed to eigendecomposition".into(),
        });
    }
    let (raw_values, raw_vectors) = a.eig()?;

    let n = rows;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&p, &q| {
        let kp = sort_keys(raw_values[p], order);
        let kq = sort_keys(raw_values[q], order);
        kp.0
            .total_cmp(&kq.0)
            .then(kp.1.total_cmp(&kq.1))
            .then(kp.2.total_cmp(&kq.2))
    });

    let values = Array1::from_iter(idx.iter().map(|&p| raw_values[p]));
    let mut vectors = Array2::<C64>::zeros((n, n));
    for (j, &p) in idx.iter().enumerate() {
        vectors.column_mut(j).assign(&raw_vectors.column(p));
    }
    normalize_columns(&mut vectors);

    let max_mag = values.iter().map(|m| m.norm()).fold(0.0, f64::max);
    for i in 0..n {
        for j in (i + 1)..n {
            if exempt_zero_cluster
                && values[i].norm() <= 1e-8 * max_mag
                && values[j].norm() <= 1e-8 * max_mag
            {
                continue;
            }
            let gap = (values[i] - values[j]).norm();
            if gap < 1e-9 * degeneracy_scale {
                return Err(Error::DegenerateSpectrum { i, j, gap });
            }
        }
    }

    Ok(NormalizedEigen { values, vectors })
}

/// Scale each column to unit Euclidean norm and rotate its phase so that the
/// component of largest magnitude is real and positive.
pub fn normalize_columns(vectors: &mut Array2<C64>) {
    for mut col in vectors.columns_mut() {
        let norm = col.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let mut lead = C64::new(0.0, 0.0);
        let mut lead_mag = -1.0;
        for x in col.iter() {
            let m = x.norm();
            if m > lead_mag {
                lead_mag = m;
                lead = *x;
            }
        }
        // conj(lead)/|lead| has unit modulus, so it rotates `lead` onto the
        // positive real axis without changing the norm.
        let phase = lead.conj() / lead_mag;
        let scale = phase / norm;
        col.mapv_inplace(|x| x * scale);
    }
}

/// Inverse of a complex square matrix.
pub fn inv_c(a: &ArrayView2<'_, C64>) -> Result<Array2<C64>> {
    Ok(a.inv()?)
}

/// Moore–Penrose pseudoinverse applied from the right: computes
/// `B · pinv(A)` without materializing the pseudoinverse, via the economy SVD
/// `A = U Σ Vᵀ` with singular values below `rtol · σ_max` truncated.
///
/// Returns the product, the retained numerical rank and the singular values
/// of `A`.
pub struct PinvProduct {
    pub product: Array2<f64>,
    pub rank: usize,
    pub singular_values: Array1<f64>,
}

pub fn right_pinv_product(
    b: &ArrayView2<'_, f64>,
    a: &ArrayView2<'_, f64>,
    rtol: f64,
) -> Result<PinvProduct> {
    let (u, s, vt) = a.svddc(JobSvd::Some)?;
    let u = u.expect("JobSvd::Some returns U");
    let vt = vt.expect("JobSvd::Some returns Vᵀ");

    let smax = s.iter().copied().fold(0.0, f64::max);
    let cutoff = rtol * smax;
    let rank = s.iter().filter(|&&x| x > cutoff).count();

    // B·pinv(A) = B · V Σ⁻¹ Uᵀ, keeping only the leading `rank` triplets.
    let bv = b.dot(&vt.slice(s![..rank, ..]).t()); // (rows of B) × rank
    let mut scaled = bv;
    for (j, mut col) in scaled.columns_mut().into_iter().enumerate() {
        col.mapv_inplace(|x| x / s[j]);
    }
    let product = scaled.dot(&u.slice(s![.., ..rank]).t());

    Ok(PinvProduct {
        product,
        rank,
        singular_values: s,
    })
}

/// Greedy nearest-neighbour assignment used to align two eigenvalue lists:
/// returns `perm` such that `from[perm[t]]` is the best match for
/// `targets[t]`, assigning globally closest pairs first.
pub fn match_eigenvalues(from: &[C64], targets: &[C64]) -> Vec<usize> {
    assert_eq!(from.len(), targets.len(), "eigenvalue lists differ in length");
    let n = from.len();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for (t, tv) in targets.iter().enumerate() {
        for (f, fv) in from.iter().enumerate() {
            pairs.push(((tv - fv).norm(), t, f));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut perm = vec![usize::MAX; n];
    let mut from_used = vec![false; n];
    let mut target_done = vec![false; n];
    for (_, t, f) in pairs {
        if !target_done[t] && !from_used[f] {
            target_done[t] = true;
            from_used[f] = true;
            perm[t] = f;
        }
    }
    perm
}

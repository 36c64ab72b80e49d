//! Data-driven participation factors on top of a Koopman decomposition:
//! contribution factors, the mode-in-state matrix P (simplified and general
//! expectation forms), the state-in-mode matrix Π, and the antithetic Monte
//! Carlo estimator for the cross-expectation terms E[γ_r0/γ_i0].

use ndarray::prelude::*;
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::edmd::KoopmanDecomposition;
use crate::error::{Error, Result};
use crate::observables::ObservableDictionary;
use crate::C64;

/// Which participation definition produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PfMethod {
    /// Element-wise Ξ∘Φ (cross-expectations assumed zero).
    Simplified,
    /// Full expectation form with Monte Carlo cross terms.
    General,
}

/// Index reading of the mode-in-state product. The printed reference values
/// fix `P[i,j] = Ξ[i,j]·Φ[i,j]` (rows of Ξ), while the derivation of the
/// eigenfunction expansion suggests `P[i,j] = Ξ[j,i]·Φ[i,j]` instead. Both
/// are computed; `PaperPrinted` is the primary output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PfIndexing {
    #[default]
    PaperPrinted,
    Derivation,
}

/// Distribution of the random initial condition x₀.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DistributionKind {
    /// Independent per-coordinate uniform on `[lo_k, hi_k]`.
    UniformBox { lo: Vec<f64>, hi: Vec<f64> },
    /// Uniform on the sphere of the given radius (surface measure).
    UniformSphere { radius: f64 },
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct InitialDistribution {
    #[serde(flatten)]
    pub kind: DistributionKind,
    pub seed: u64,
    /// Monte Carlo draw count (each draw may be expanded into a deterministic
    /// sign-flip orbit; see [`expectation_ratio`]).
    pub samples: usize,
}

impl InitialDistribution {
    /// Box `[-half_width, half_width]^n`.
    pub fn symmetric_box(n: usize, half_width: f64, seed: u64, samples: usize) -> InitialDistribution {
        InitialDistribution {
            kind: DistributionKind::UniformBox {
                lo: vec![-half_width; n],
                hi: vec![half_width; n],
            },
            seed,
            samples,
        }
    }

    pub fn uniform_box(lo: Vec<f64>, hi: Vec<f64>, seed: u64, samples: usize) -> InitialDistribution {
        InitialDistribution { kind: DistributionKind::UniformBox { lo, hi }, seed, samples }
    }

    pub fn uniform_sphere(radius: f64, seed: u64, samples: usize) -> InitialDistribution {
        InitialDistribution { kind: DistributionKind::UniformSphere { radius }, seed, samples }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.samples < 1000 {
            return Err(Error::InvalidConfig(format!(
                "distribution sample count {} is below the minimum of 1000",
                self.samples
            )));
        }
        match &self.kind {
            DistributionKind::UniformBox { lo, hi } => {
                if lo.len() != n || hi.len() != n {
                    return Err(Error::InvalidConfig(format!(
                        "box bounds have lengths ({}, {}), expected {n}",
                        lo.len(),
                        hi.len()
                    )));
                }
                for k in 0..n {
                    if !(lo[k].is_finite() && hi[k].is_finite() && lo[k] < hi[k]) {
                        return Err(Error::InvalidConfig(format!(
                            "box bounds for state {} must be finite with lo < hi (got [{}, {}])",
                            k + 1,
                            lo[k],
                            hi[k]
                        )));
                    }
                }
            }
            DistributionKind::UniformSphere { radius } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "sphere radius must be positive, got {radius}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// True when the distribution is symmetric about the origin, which is the
    /// precondition for exact antithetic cancellation.
    pub fn is_symmetric(&self) -> bool {
        match &self.kind {
            DistributionKind::UniformBox { lo, hi } => {
                lo.iter().zip(hi).all(|(l, h)| *l == -*h)
            }
            DistributionKind::UniformSphere { .. } => true,
        }
    }
}

enum Sampler {
    Box(Vec<Uniform<f64>>),
    Sphere { radius: f64, n: usize },
}

impl Sampler {
    fn new(dist: &InitialDistribution, n: usize) -> Result<Sampler> {
        dist.validate(n)?;
        match &dist.kind {
            DistributionKind::UniformBox { lo, hi } => {
                let dims = lo
                    .iter()
                    .zip(hi)
                    .map(|(&l, &h)| {
                        Uniform::new_inclusive(l, h)
                            .map_err(|e| Error::InvalidConfig(format!("uniform bounds: {e}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Sampler::Box(dims))
            }
            DistributionKind::UniformSphere { radius } => Ok(Sampler::Sphere { radius: *radius, n }),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng, x: &mut [f64]) {
        match self {
            Sampler::Box(dims) => {
                for (xi, d) in x.iter_mut().zip(dims) {
                    *xi = d.sample(rng);
                }
            }
            Sampler::Sphere { radius, n } => loop {
                let mut norm2 = 0.0;
                for xi in x.iter_mut().take(*n) {
                    *xi = StandardNormal.sample(rng);
                    norm2 += *xi * *xi;
                }
                if norm2 > 0.0 {
                    let scale = radius / norm2.sqrt();
                    for xi in x.iter_mut().take(*n) {
                        *xi *= scale;
                    }
                    return;
                }
            },
        }
    }
}

/// Contribution of each Koopman mode to each state at k = 0:
/// `c[i,j] = φ_j(x₀)·ϕ_j[i]`. Real parts of each row sum to x₀.
#[derive(Debug, Clone)]
pub struct KoopmanContribution {
    pub c: Array2<C64>,
    pub x0: Array1<f64>,
}

impl KoopmanContribution {
    pub fn row_sums(&self) -> Array1<f64> {
        self.c.map_axis(Axis(1), |row| row.iter().map(|z| z.re).sum())
    }
}

pub fn koopman_contribution_factors(
    dec: &KoopmanDecomposition,
    x0: &ArrayView1<'_, f64>,
) -> Result<KoopmanContribution> {
    let phi0 = crate::edmd::evaluate_eigenfunctions(dec, x0)?;
    let (n, q) = (dec.n(), dec.q());
    let mut c = Array2::<C64>::zeros((n, q));
    for i in 0..n {
        for j in 0..q {
            c[(i, j)] = phi0[j] * dec.phi[(i, j)];
        }
    }
    Ok(KoopmanContribution { c, x0: x0.to_owned() })
}

/// Monte Carlo estimate of one cross-expectation term.
#[derive(Debug, Clone, Copy)]
pub struct ExpectationEstimate {
    pub value: f64,
    pub std_error: f64,
    /// Draws that produced a finite integrand value.
    pub draws_used: usize,
    /// Draws discarded for a non-finite ratio (denominator hit zero).
    pub skipped: usize,
    /// Heavy-tail warning: the standard error failed to shrink, a single draw
    /// dominates the spread, or draws had to be discarded.
    pub non_convergent: bool,
}

/// Mean of `f` over the sign-flip orbit of the coordinates in `coords`,
/// combined as nested pairwise means. When `f` is odd in any one of those
/// coordinates the two branches of that level are exact IEEE negations of
/// each other, so the mean is exactly zero — bitwise, not just small.
fn orbit_mean(f: &dyn Fn(&[f64]) -> f64, x: &mut [f64], coords: &[usize]) -> f64 {
    match coords.split_first() {
        None => f(x),
        Some((&c, rest)) => {
            let plus = orbit_mean(f, x, rest);
            x[c] = -x[c];
            let minus = orbit_mean(f, x, rest);
            x[c] = -x[c];
            0.5 * (plus + minus)
        }
    }
}

/// Estimate `E[γ_r(x₀)/γ_i(x₀)]` over the distribution (`r`, `i` are 0-based
/// dictionary positions, `r ≠ i`).
///
/// For distributions symmetric about the origin every draw is expanded into
/// the full sign-flip orbit of the coordinates the two observables depend on,
/// so integrands odd in any coordinate average to exactly zero — this
/// realizes the principal-value reading under which the simplified
/// participation form drops the cross terms. Asymmetric distributions use
/// plain Monte Carlo (pairing a draw with its negation would step outside
/// the support).
///
/// Heavy-tailed ratios (the expectation need not exist) are detected and
/// flagged via `non_convergent`; the estimate is still returned.
pub fn expectation_ratio(
    dist: &InitialDistribution,
    dict: &ObservableDictionary,
    r: usize,
    i: usize,
) -> Result<ExpectationEstimate> {
    let q = dict.q();
    if r >= q || i >= q {
        return Err(Error::InvalidConfig(format!(
            "expectation indices ({r}, {i}) out of range for a dictionary of size {q}"
        )));
    }
    if r == i {
        return Err(Error::InvalidConfig(
            "expectation_ratio requires distinct observable indices (the ratio is identically 1)".into(),
        ));
    }
    let n = dict.n();
    let sampler = Sampler::new(dist, n)?;

    // Dedicated substream per (numerator, denominator) pair: estimates do not
    // depend on how many other terms are computed or in which order.
    let mut rng = ChaCha8Rng::seed_from_u64(dist.seed);
    rng.set_stream((i * q + r + 1) as u64);

    let deps: Vec<usize> = {
        let mut set = dict.dependencies(r);
        set.extend(dict.dependencies(i));
        set.into_iter().collect()
    };
    let symmetric = dist.is_symmetric();
    let f = move |x: &[f64]| dict.eval_observable(r, x) / dict.eval_observable(i, x);

    let mut x = vec![0.0; n];
    let (mut mean, mut m2) = (0.0f64, 0.0f64);
    let mut used = 0usize;
    let mut skipped = 0usize;
    // Three largest Welford increments, descending: a variance budget
    // dominated by a handful of draws is the signature of a heavy tail.
    let mut top = [0.0f64; 3];
    let mut se_half = f64::INFINITY;
    let half = dist.samples / 2;

    for draw in 1..=dist.samples {
        sampler.draw(&mut rng, &mut x);
        let value = if symmetric { orbit_mean(&f, &mut x, &deps) } else { f(&x) };
        if value.is_finite() {
            used += 1;
            let delta = value - mean;
            mean += delta / used as f64;
            let increment = delta * (value - mean);
            m2 += increment;
            if increment > top[2] {
                top[2] = increment;
                top.sort_by(|a, b| b.total_cmp(a));
            }
        } else {
            skipped += 1;
        }
        if draw == half {
            se_half = standard_error(mean, m2, used);
        }
    }

    let std_error = standard_error(mean, m2, used);
    let non_convergent = skipped > 0
        || used < 2
        || (std_error > 0.0 && std_error >= 0.9 * se_half)
        || (m2 > 0.0 && (top[0] > 0.25 * m2 || top.iter().sum::<f64>() > 0.5 * m2));
    Ok(ExpectationEstimate { value: mean, std_error, draws_used: used, skipped, non_convergent })
}

fn standard_error(_mean: f64, m2: f64, used: usize) -> f64 {
    if used < 2 {
        return f64::INFINITY;
    }
    (m2 / ((used - 1) as f64 * used as f64)).sqrt()
}

/// All cross-expectation terms needed by the general mode-in-state form:
/// entry `(r, i)` estimates `E[γ_r0/γ_i0]` for numerator observable `r` and
/// denominator state `i` (diagonal entries are the trivial ratio 1 and carry
/// no Monte Carlo data).
#[derive(Debug, Clone)]
pub struct ExpectationTable {
    pub estimates: Array2<f64>,
    pub std_errors: Array2<f64>,
    pub non_convergent: Array2<bool>,
}

/// One off-diagonal term of an [`ExpectationTable`] (0-based indices).
#[derive(Debug, Clone, Copy)]
pub struct ExpectationTerm {
    pub r: usize,
    pub i: usize,
    pub estimate: f64,
    pub std_error: f64,
    pub non_convergent: bool,
}

impl ExpectationTable {
    pub fn any_non_convergent(&self) -> bool {
        self.non_convergent.iter().any(|&b| b)
    }

    pub fn flagged_count(&self) -> usize {
        self.non_convergent.iter().filter(|&&b| b).count()
    }

    /// Off-diagonal terms in deterministic (denominator-major) order.
    pub fn terms(&self) -> Vec<ExpectationTerm> {
        let (q, n) = self.estimates.dim();
        let mut out = Vec::with_capacity(n * q.saturating_sub(1));
        for i in 0..n {
            for r in 0..q {
                if r != i {
                    out.push(ExpectationTerm {
                        r,
                        i,
                        estimate: self.estimates[(r, i)],
                        std_error: self.std_errors[(r, i)],
                        non_convergent: self.non_convergent[(r, i)],
                    });
                }
            }
        }
        out
    }
}

/// Mode-in-state participation P (n×q, complex, with magnitudes and the
/// row-normalized table), state-in-mode participation Π (q×q), and — for the
/// general method — the Monte Carlo cross-expectation terms.
///
/// The element-wise P convention pairs row i of Ξ with state i and column j
/// of Ξ with mode j, so the result depends on the mode ordering. Fit results
/// should be passed through `observable_dominance_order` (what the CLI does)
/// or `align_modes` before computing P.
#[derive(Debug, Clone)]
pub struct ParticipationResult {
    pub p: Array2<C64>,
    pub p_magnitude: Array2<f64>,
    /// Rows of |P| scaled to sum to 1.
    pub p_normalized: Array2<f64>,
    pub pi: Array2<f64>,
    pub method: PfMethod,
    pub indexing: PfIndexing,
    pub expectation_terms: Option<ExpectationTable>,
}

/// Simplified mode-in-state participation (cross-expectations taken as zero):
/// under the paper-printed reading `P[i,j] = Ξ[i,j]·Φ[i,j]` — the element-wise
/// product of the first n rows of Ξ with Φ.
pub fn mode_in_state_simplified(dec: &KoopmanDecomposition) -> Result<ParticipationResult> {
    mode_in_state_simplified_with(dec, PfIndexing::PaperPrinted)
}

/// Simplified form under an explicit index reading; `PfIndexing::Derivation`
/// computes `P[i,j] = Ξ[j,i]·Φ[i,j]` instead.
pub fn mode_in_state_simplified_with(
    dec: &KoopmanDecomposition,
    indexing: PfIndexing,
) -> Result<ParticipationResult> {
    let (n, q) = (dec.n(), dec.q());
    let mut p = Array2::<C64>::zeros((n, q));
    for i in 0..n {
        for j in 0..q {
            let xi = match indexing {
                PfIndexing::PaperPrinted => dec.xi[(i, j)],
                PfIndexing::Derivation => dec.xi[(j, i)],
            };
            p[(i, j)] = xi * dec.phi[(i, j)];
        }
    }
    assemble_result(dec, p, PfMethod::Simplified, indexing, None)
}

/// General mode-in-state participation with Monte Carlo cross terms:
/// `P[i,j] = Φ[i,j]·(Ξ[i,j] + Σ_{r≠i} Ξ[r,j]·E[γ_r0/γ_i0])` under the
/// paper-printed reading. For symmetric distributions the antithetic
/// estimator makes every odd cross term exactly zero, so the result equals
/// the simplified form bit for bit on the benchmark dictionaries.
pub fn mode_in_state_general(
    dec: &KoopmanDecomposition,
    dist: &InitialDistribution,
) -> Result<ParticipationResult> {
    mode_in_state_general_with(dec, dist, PfIndexing::PaperPrinted)
}

/// General form under an explicit index reading (`Derivation` swaps the Ξ
/// indices: `P[i,j] = Φ[i,j]·(Ξ[j,i] + Σ_{r≠i} Ξ[j,r]·E[γ_r0/γ_i0])`).
pub fn mode_in_state_general_with(
    dec: &KoopmanDecomposition,
    dist: &InitialDistribution,
    indexing: PfIndexing,
) -> Result<ParticipationResult> {
    let (n, q) = (dec.n(), dec.q());
    for i in 0..n {
        if dec.dict.identity_position(i) != i {
            return Err(Error::InvalidObservable(
                "the general expectation form requires the dictionary to begin with the identity \
                 observables in state order (γ_i0 = x_i(0))"
                    .into(),
            ));
        }
    }
    dist.validate(n)?;

    let mut estimates = Array2::<f64>::zeros((q, n));
    let mut std_errors = Array2::<f64>::zeros((q, n));
    let mut flags = Array2::<bool>::from_elem((q, n), false);
    for i in 0..n {
        estimates[(i, i)] = 1.0;
        for r in 0..q {
            if r == i {
                continue;
            }
            let est = expectation_ratio(dist, &dec.dict, r, i)?;
            estimates[(r, i)] = est.value;
            std_errors[(r, i)] = est.std_error;
            flags[(r, i)] = est.non_convergent;
        }
    }

    let mut p = Array2::<C64>::zeros((n, q));
    for i in 0..n {
        for j in 0..q {
            let mut acc = match indexing {
                PfIndexing::PaperPrinted => dec.xi[(i, j)],
                PfIndexing::Derivation => dec.xi[(j, i)],
            };
            for r in 0..q {
                if r == i {
                    continue;
                }
                let xi = match indexing {
                    PfIndexing::PaperPrinted => dec.xi[(r, j)],
                    PfIndexing::Derivation => dec.xi[(j, r)],
                };
                acc += xi * estimates[(r, i)];
            }
            p[(i, j)] = acc * dec.phi[(i, j)];
        }
    }
    let table = ExpectationTable { estimates, std_errors, non_convergent: flags };
    assemble_result(dec, p, PfMethod::General, indexing, Some(table))
}

fn assemble_result(
    dec: &KoopmanDecomposition,
    p: Array2<C64>,
    method: PfMethod,
    indexing: PfIndexing,
    expectation_terms: Option<ExpectationTable>,
) -> Result<ParticipationResult> {
    let p_magnitude = p.map(|z| z.norm());
    let p_normalized = normalize_rows(&p_magnitude.view())?;
    let pi = state_in_mode_pf(dec)?;
    Ok(ParticipationResult { p, p_magnitude, p_normalized, pi, method, indexing, expectation_terms })
}

/// State-in-mode participation `Π[i,j] = (Re Ξ[j,i])² / Σ_r (Re Ξ[j,r])²`
/// (component i of left eigenvector j, squared and column-normalized).
/// Columns sum to 1 and every entry lies in [0, 1].
pub fn state_in_mode_pf(dec: &KoopmanDecomposition) -> Result<Array2<f64>> {
    state_in_mode_from_xi(&dec.xi.view())
}

/// Π computed directly from a left-eigenvector matrix (rows = eigenvectors);
/// exposed so scale-invariance can be asserted on perturbed copies of Ξ.
pub fn state_in_mode_from_xi(xi: &ArrayView2<'_, C64>) -> Result<Array2<f64>> {
    crate::lin_modal::state_in_mode_from_left(xi)
}

/// Scale each row of |P| to sum to 1.
pub fn normalize_rows(p: &ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let mut out = p.map(|v| v.abs());
    for (row, mut r) in out.rows_mut().into_iter().enumerate() {
        let sum: f64 = r.iter().sum();
        if sum == 0.0 {
            return Err(Error::ZeroRow { row });
        }
        r.mapv_inplace(|v| v / sum);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edmd;
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

    fn canonical_dec(lambda2: f64) -> KoopmanDecomposition {
        let sys = crate::models::canonical_system(-1.0, lambda2);
        let traj = crate::models::integrate_rk4(&sys, &[-1.0, 2.0], 0.01, 1000).unwrap();
        let pair = edmd::assemble_snapshots(&traj.view(), 0.01).unwrap();
        edmd::fit(&pair, &canonical_dict(), 1e-10)
            .unwrap()
            .align_modes(&[
                C64::new(-1.0, 0.0),
                C64::new(lambda2, 0.0),
                C64::new(2.0 * lambda2, 0.0),
            ])
            .unwrap()
    }

    #[test]
    fn canonical_printed_participation_matrices() {
        let dec = canonical_dec(-0.05);
        let res = mode_in_state_simplified(&dec).unwrap();

        let pm_expect = [[1.0, 0.0, 0.8259], [0.0, 1.0, 0.0]];
        for i in 0..2 {
            for j in 0..3 {
                assert_abs_diff_eq!(res.p_magnitude[(i, j)], pm_expect[i][j], epsilon = 1e-3);
            }
        }
        // Signed value behind the printed magnitude is negative.
        assert!(res.p[(0, 2)].re < 0.0);
        assert_abs_diff_eq!(res.p[(0, 2)].re, -0.825882, epsilon = 1e-4);

        let pn_expect = [[0.5477, 0.0, 0.4523], [0.0, 1.0, 0.0]];
        for i in 0..2 {
            for j in 0..3 {
                assert_abs_diff_eq!(res.p_normalized[(i, j)], pn_expect[i][j], epsilon = 1e-3);
            }
            assert_abs_diff_eq!(res.p_normalized.row(i).sum(), 1.0, epsilon = 1e-12);
        }

        let pi_expect = [[0.447513, 0.0, 0.0], [0.0, 1.0, 0.0], [0.552487, 0.0, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(res.pi[(i, j)], pi_expect[i][j], epsilon = 1e-4);
            }
        }
    }

    #[test]
    fn variant_lambda2_check_value() {
        let dec = canonical_dec(-0.4);
        let res = mode_in_state_simplified(&dec).unwrap();
        assert_abs_diff_eq!(res.p_magnitude[(0, 2)], 4.9029, epsilon = 1e-3);
        assert_abs_diff_eq!(res.p[(0, 2)].re, -4.902903, epsilon = 1e-3);
    }

    #[test]
    fn derivation_reading_zeroes_the_cross_entry() {
        let dec = canonical_dec(-0.05);
        let res = mode_in_state_simplified_with(&dec, PfIndexing::Derivation).unwrap();
        // Ξ[3,1] = 0, so the derivation reading gives p₁₃ = 0 (the printed
        // table contradicts this — that is why PaperPrinted is primary).
        assert_abs_diff_eq!(res.p_magnitude[(0, 2)], 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(res.p_magnitude[(0, 0)], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn sorted_diagonal_operator_gives_identity_p() {
        let k = array![[0.9, 0.0], [0.0, 0.5]];
        let dec = edmd::koopman_tuples(k, &identity_dictionary(2), 0.01).unwrap();
        let res = mode_in_state_simplified(&dec).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(res.p_magnitude[(i, j)], if i == j { 1.0 } else { 0.0 }, epsilon = 1e-12);
            }
        }
        // An unsorted diagonal lands in the same place after dominance ordering.
        let k = array![[0.5, 0.0], [0.0, 0.9]];
        let dec = edmd::koopman_tuples(k, &identity_dictionary(2), 0.01)
            .unwrap()
            .observable_dominance_order();
        let res = mode_in_state_simplified(&dec).unwrap();
        for i in 0..2 {
            assert_abs_diff_eq!(res.p_magnitude[(i, i)], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn contribution_rows_sum_to_x0() {
        let dec = canonical_dec(-0.05);
        let c = koopman_contribution_factors(&dec, &array![-1.0, 2.0].view()).unwrap();
        let sums = c.row_sums();
        assert_abs_diff_eq!(sums[0], -1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(sums[1], 2.0, epsilon = 1e-8);

        let zero = koopman_contribution_factors(&dec, &array![0.0, 0.0].view()).unwrap();
        for v in zero.c.iter() {
            assert_abs_diff_eq!(v.norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn contribution_matches_linear_oracle_for_identity_dictionary() {
        let a = array![[-1.0, 0.4], [0.1, -2.5]];
        let lin = crate::lin_modal::eigendecompose(&crate::lin_modal::LinearSystem::new(a).unwrap()).unwrap();
        let dt = 0.05;
        let x0 = array![0.7, -1.3];
        let times: Vec<f64> = (0..40).map(|k| k as f64 * dt).collect();
        let exact = crate::lin_modal::simulate_linear(&lin, &x0.view(), &times).unwrap();
        let dec = edmd::fit(
            &edmd::assemble_snapshots(&exact.view(), dt).unwrap(),
            &identity_dictionary(2),
            1e-12,
        )
        .unwrap()
        .align_modes(lin.eigenvalues.as_slice().unwrap())
        .unwrap();

        let koop = koopman_contribution_factors(&dec, &x0.view()).unwrap();
        let oracle = crate::lin_modal::contribution_factors(&lin, &x0.view()).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((koop.c[(i, j)] - oracle.sigma[(i, j)]).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn antithetic_orbit_gives_exact_zero_for_odd_ratios() {
        let dist = InitialDistribution::symmetric_box(2, 1.0, 7, 2000);
        // Identity ratios x_r/x_i — odd in x_r.
        let dict = identity_dictionary(2);
        let est = expectation_ratio(&dist, &dict, 0, 1).unwrap();
        assert_eq!(est.value, 0.0);
        assert_eq!(est.std_error, 0.0);
        assert!(!est.non_convergent);
        assert_eq!(est.draws_used, 2000);

        // x2²/x1 — odd in x1 (the Case 2 construction).
        let dict = canonical_dict();
        let est = expectation_ratio(&dist, &dict, 2, 0).unwrap();
        assert_eq!(est.value, 0.0);
        assert!(!est.non_convergent);

        // E[x2²/x2] = E[x2] — odd in x2.
        let est = expectation_ratio(&dist, &dict, 2, 1).unwrap();
        assert_eq!(est.value, 0.0);
    }

    #[test]
    fn asymmetric_box_matches_the_separable_closed_form() {
        // Independent coordinates: E[x1²/x2] = E[x1²]·E[1/x2] = (7/3)·ln 2.
        let dict = build_dictionary(
            vec![
                ObservableSpec::identity(1),
                ObservableSpec::identity(2),
                ObservableSpec::monomial(vec![2, 0]),
            ],
            2,
        )
        .unwrap();
        let dist = InitialDistribution::uniform_box(vec![1.0, 1.0], vec![2.0, 2.0], 11, 100_000);
        let est = expectation_ratio(&dist, &dict, 2, 1).unwrap();
        let truth = (7.0 / 3.0) * std::f64::consts::LN_2;
        assert!(!est.non_convergent);
        assert!(
            (est.value - truth).abs() <= 3.0 * est.std_error,
            "estimate {} vs {truth} (se {})",
            est.value,
            est.std_error
        );
        // E[x1²/x1] = E[x1] = 0 on the zero-mean box (exactly, by oddness).
        let sym = InitialDistribution::symmetric_box(2, 1.0, 11, 10_000);
        let est = expectation_ratio(&sym, &dict, 2, 0).unwrap();
        assert_eq!(est.value, 0.0);
    }

    #[test]
    fn heavy_tailed_ratio_is_flagged() {
        // x1²/x2² is even in both coordinates — no antithetic cancellation —
        // and the expectation diverges on a box containing x2 = 0.
        let dict = build_dictionary(
            vec![
                ObservableSpec::identity(1),
                ObservableSpec::identity(2),
                ObservableSpec::monomial(vec![2, 0]),
                ObservableSpec::monomial(vec![0, 2]),
            ],
            2,
        )
        .unwrap();
        let dist = InitialDistribution::symmetric_box(2, 1.0, 3, 20_000);
        let est = expectation_ratio(&dist, &dict, 2, 3).unwrap();
        assert!(est.non_convergent, "divergent ratio must be flagged (value {})", est.value);
    }

    #[test]
    fn estimates_are_deterministic_per_seed_and_stream() {
        let dict = build_dictionary(
            vec![
                ObservableSpec::identity(1),
                ObservableSpec::identity(2),
                ObservableSpec::monomial(vec![2, 0]),
            ],
            2,
        )
        .unwrap();
        let dist = InitialDistribution::uniform_box(vec![1.0, 1.0], vec![2.0, 2.0], 42, 5000);
        let a = expectation_ratio(&dist, &dict, 2, 1).unwrap();
        let b = expectation_ratio(&dist, &dict, 2, 1).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
        // A different pair draws from a different substream.
        let c = expectation_ratio(&dist, &dict, 1, 0).unwrap();
        assert_ne!(a.value.to_bits(), c.value.to_bits());
    }

    #[test]
    fn expectation_ratio_argument_validation() {
        let dict = identity_dictionary(2);
        let dist = InitialDistribution::symmetric_box(2, 1.0, 0, 1000);
        assert!(expectation_ratio(&dist, &dict, 1, 1).is_err());
        assert!(expectation_ratio(&dist, &dict, 5, 0).is_err());
        let too_few = InitialDistribution::symmetric_box(2, 1.0, 0, 999);
        assert!(matches!(
            expectation_ratio(&too_few, &dict, 0, 1),
            Err(Error::InvalidConfig(_))
        ));
        let bad_box = InitialDistribution::uniform_box(vec![1.0, 1.0], vec![0.0, 2.0], 0, 1000);
        assert!(expectation_ratio(&bad_box, &dict, 0, 1).is_err());
        let bad_sphere = InitialDistribution::uniform_sphere(0.0, 0, 1000);
        assert!(expectation_ratio(&bad_sphere, &dict, 0, 1).is_err());
    }

    #[test]
    fn general_equals_simplified_exactly_under_symmetry() {
        // Canonical dictionary (Case 2) …
        let dec = canonical_dec(-0.05);
        let dist = InitialDistribution::symmetric_box(2, 1.0, 0, 2000);
        let gen = mode_in_state_general(&dec, &dist).unwrap();
        let simp = mode_in_state_simplified(&dec).unwrap();
        for (a, b) in gen.p.iter().zip(simp.p.iter()) {
            assert!(a == b, "general {a} != simplified {b}");
        }
        let table = gen.expectation_terms.as_ref().unwrap();
        assert!(!table.any_non_convergent());
        for t in table.terms() {
            assert_eq!(t.estimate, 0.0);
        }

        // … and the identity dictionary on a linear fit (Case 1).
        let a = array![[-0.6, 0.3], [-0.3, -0.6]];
        let lin = crate::lin_modal::eigendecompose(&crate::lin_modal::LinearSystem::new(a).unwrap()).unwrap();
        let x0 = array![1.0, -0.5];
        let times: Vec<f64> = (0..60).map(|k| k as f64 * 0.02).collect();
        let exact = crate::lin_modal::simulate_linear(&lin, &x0.view(), &times).unwrap();
        let dec = edmd::fit(
            &edmd::assemble_snapshots(&exact.view(), 0.02).unwrap(),
            &identity_dictionary(2),
            1e-12,
        )
        .unwrap();
        let gen = mode_in_state_general(&dec, &dist).unwrap();
        let simp = mode_in_state_simplified(&dec).unwrap();
        for (a, b) in gen.p.iter().zip(simp.p.iter()) {
            assert!(a == b, "general {a} != simplified {b}");
        }
    }

    #[test]
    fn asymmetric_general_composes_the_expectation_terms() {
        let a = array![[-1.0, 0.4], [0.1, -2.5]];
        let lin = crate::lin_modal::eigendecompose(&crate::lin_modal::LinearSystem::new(a).unwrap()).unwrap();
        let x0 = array![0.9, 1.4];
        let times: Vec<f64> = (0..60).map(|k| k as f64 * 0.02).collect();
        let exact = crate::lin_modal::simulate_linear(&lin, &x0.view(), &times).unwrap();
        let dec = edmd::fit(
            &edmd::assemble_snapshots(&exact.view(), 0.02).unwrap(),
            &identity_dictionary(2),
            1e-12,
        )
        .unwrap();

        let dist = InitialDistribution::uniform_box(vec![1.0, 1.0], vec![2.0, 2.0], 5, 50_000);
        let gen = mode_in_state_general(&dec, &dist).unwrap();
        let simp = mode_in_state_simplified(&dec).unwrap();
        let table = gen.expectation_terms.as_ref().unwrap();
        assert!(!table.any_non_convergent());

        // P_general[i,j] − P_simplified[i,j] = Σ_{r≠i} Ξ[r,j]·Φ[i,j]·m_ri.
        for i in 0..2 {
            for j in 0..2 {
                let mut cross = C64::new(0.0, 0.0);
                for r in 0..2 {
                    if r != i {
                        cross += dec.xi[(r, j)] * table.estimates[(r, i)];
                    }
                }
                let expect = simp.p[(i, j)] + cross * dec.phi[(i, j)];
                assert!((gen.p[(i, j)] - expect).norm() < 1e-12);
            }
        }
        // The independent-coordinate truth E[x_r/x_i] = E[x_r]·E[1/x_i] = 1.5·ln 2.
        let truth = 1.5 * std::f64::consts::LN_2;
        for t in table.terms() {
            assert!(
                (t.estimate - truth).abs() <= 4.0 * t.std_error,
                "E[x{}/x{}] = {} (se {}) vs {truth}",
                t.r + 1,
                t.i + 1,
                t.estimate,
                t.std_error
            );
        }
        // And the general result genuinely differs from the simplified one.
        let max_diff = gen
            .p
            .iter()
            .zip(simp.p.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        assert!(max_diff > 1e-3, "cross terms should shift P (max diff {max_diff})");
    }

    #[test]
    fn pi_is_column_stochastic_and_scale_invariant() {
        let dec = canonical_dec(-0.05);
        let pi = state_in_mode_pf(&dec).unwrap();
        for j in 0..3 {
            let col: f64 = (0..3).map(|i| pi[(i, j)]).sum();
            assert_abs_diff_eq!(col, 1.0, epsilon = 1e-12);
            for i in 0..3 {
                assert!((0.0..=1.0).contains(&pi[(i, j)]));
            }
        }
        // Positive rescaling of a left eigenvector row leaves Π unchanged;
        // scaling by 4 (a power of two) is even bitwise-exact.
        let mut xi4 = dec.xi.clone();
        for v in xi4.row_mut(2).iter_mut() {
            *v *= 4.0;
        }
        let pi4 = state_in_mode_from_xi(&xi4.view()).unwrap();
        for (a, b) in pi.iter().zip(pi4.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let mut xi37 = dec.xi.clone();
        for v in xi37.row_mut(0).iter_mut() {
            *v *= 3.7;
        }
        let pi37 = state_in_mode_from_xi(&xi37.view()).unwrap();
        for (a, b) in pi.iter().zip(pi37.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn identity_xi_gives_identity_pi() {
        let k = array![[0.9, 0.0], [0.0, 0.5]];
        let dec = edmd::koopman_tuples(k, &identity_dictionary(2), 0.01).unwrap();
        let pi = state_in_mode_pf(&dec).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(pi[(i, j)], if i == j { 1.0 } else { 0.0 }, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn normalize_rows_examples() {
        let p = array![[1.0, 0.0, 0.8259], [0.0, 1.0, 0.0]];
        let n = normalize_rows(&p.view()).unwrap();
        assert_abs_diff_eq!(n[(0, 0)], 0.5477, epsilon = 1e-4);
        assert_abs_diff_eq!(n[(0, 2)], 0.4523, epsilon = 1e-4);
        assert_abs_diff_eq!(n[(1, 1)], 1.0);

        let eye = Array2::<f64>::eye(3);
        assert_eq!(normalize_rows(&eye.view()).unwrap(), eye);

        let single = array![[2.0, 2.0]];
        let n = normalize_rows(&single.view()).unwrap();
        assert_eq!(n, array![[0.5, 0.5]]);

        // Signs are dropped before normalizing.
        let signed = array![[-1.0, 1.0]];
        assert_eq!(normalize_rows(&signed.view()).unwrap(), array![[0.5, 0.5]]);

        let zero_row = array![[1.0, 1.0], [0.0, 0.0]];
        assert!(matches!(
            normalize_rows(&zero_row.view()),
            Err(Error::ZeroRow { row: 1 })
        ));
    }

    #[test]
    fn sphere_distribution_is_symmetric_and_on_radius() {
        let dist = InitialDistribution::uniform_sphere(2.5, 9, 1000);
        assert!(dist.is_symmetric());
        let sampler = Sampler::new(&dist, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut x = vec![0.0; 3];
        for _ in 0..100 {
            sampler.draw(&mut rng, &mut x);
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert_abs_diff_eq!(norm, 2.5, epsilon = 1e-12);
        }
    }
}

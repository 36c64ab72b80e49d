//! Linear and Koopman-based modal participation factors from trajectory data.
//!
//! This crate implements the full pipeline from raw trajectory snapshots to
//! modal participation diagnostics:
//!
//! 1. [`models`] — built-in dynamical systems (a canonical 2-state nonlinear
//!    benchmark, its exact 3-state linear lift, and a classical swing-equation
//!    surrogate) plus a fixed-step RK4 integrator.
//! 2. [`observables`] — observable dictionaries (the lifting `γ`): identities,
//!    monomials, sines/cosines and parsed custom expressions, together with the
//!    state-recovery matrix `B` satisfying `x = B·γ(x)`.
//! 3. [`edmd`] — extended dynamic mode decomposition: snapshot assembly,
//!    `K = Γ_X′ · Γ_X†` via truncated SVD, Koopman tuples `(μ_j, φ_j, ϕ_j)`,
//!    eigenfunction evaluation, modal coordinates, spectral reconstruction and
//!    frequency/damping summaries.
//! 4. [`participation`] — data-driven contribution factors, mode-in-state and
//!    state-in-mode participation factors, including the general
//!    expectation-based form with an exactly-cancelling antithetic estimator.
//! 5. [`lin_modal`] — classical and probabilistic modal analysis of linear
//!    systems; doubles as the oracle for the Koopman pipeline on linear data.
//! 6. [`config`] / [`csvio`] / [`commands`] — the `kpf` command-line front end
//!    (`simulate`, `decompose`, `pf`, `report`) with reproducible, atomic file
//!    outputs.
//!
//! The runnable examples under `examples/` walk through every major
//! capability; start with `canonical_pipeline`.
//!
//! ```
//! use koopman_pf::{edmd, models, observables::{self, ObservableSpec}};
//!
//! // Canonical benchmark: dx1 = λ1(x1 - x2²), dx2 = λ2 x2.
//! let sys = models::canonical_system(-1.0, -0.05);
//! let traj = models::integrate_rk4(&sys, &[-1.0, 2.0], 0.01, 1000).unwrap();
//!
//! // Lift through [x1, x2, x2²] and fit the Koopman operator.
//! let dict = observables::build_dictionary(
//!     vec![
//!         ObservableSpec::identity(1),
//!         ObservableSpec::identity(2),
//!         ObservableSpec::monomial(vec![0, 2]),
//!     ],
//!     2,
//! )
//! .unwrap();
//! let dec = edmd::fit(&edmd::assemble_snapshots(&traj.view(), 0.01).unwrap(), &dict, 1e-10).unwrap();
//!
//! // Continuous eigenvalues recover (λ1, λ2, 2·λ2) = (-1, -0.05, -0.1).
//! let mut re: Vec<f64> = dec.lambda_c().iter().map(|l| l.re).collect();
//! re.sort_by(f64::total_cmp);
//! assert!((re[0] + 1.0).abs() < 1e-6 && (re[1] + 0.1).abs() < 1e-6 && (re[2] + 0.05).abs() < 1e-6);
//! ```

pub mod commands;
pub mod config;
pub mod csvio;
pub mod edmd;
pub mod error;
pub mod expr;
pub mod linalg;
pub mod lin_modal;
pub mod models;
pub mod observables;
pub mod participation;

pub use error::{Error, Result};

/// Complex scalar used throughout (double precision).
pub type C64 = num_complex::Complex64;

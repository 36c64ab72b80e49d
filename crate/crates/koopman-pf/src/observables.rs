//! Observable dictionaries: the lifting `γ(x)` from states to observables and
//! the state-recovery matrix `B` with `x = B·γ(x)`.
//!
//! Every dictionary must contain exactly one identity observable per state so
//! that `B` exists exactly (it simply selects the identity rows).

use std::collections::BTreeSet;

use ndarray::prelude::*;

use crate::error::{Error, Result};
use crate::expr::{self, Expr};

/// A single scalar observable.
#[derive(Debug, Clone, PartialEq)]
pub enum ObservableKind {
    /// `γ(x) = x_i` (1-based state index).
    Identity { index: usize },
    /// `γ(x) = Π_i x_i^{e_i}`; exponents are per-state, total degree ≥ 1.
    Monomial { exponents: Vec<u32> },
    /// `γ(x) = sin(x_i)` (1-based state index).
    Sine { index: usize },
    /// `γ(x) = cos(x_i)` (1-based state index).
    Cosine { index: usize },
    /// Parsed custom expression.
    Expression { source: String, ast: Expr },
}

/// Observable with an optional user-facing name (a canonical name is derived
/// from the kind when absent).
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSpec {
    pub kind: ObservableKind,
    pub name: Option<String>,
}

impl ObservableSpec {
    pub fn identity(index: usize) -> Self {
        Self { kind: ObservableKind::Identity { index }, name: None }
    }

    pub fn monomial(exponents: Vec<u32>) -> Self {
        Self { kind: ObservableKind::Monomial { exponents }, name: None }
    }

    pub fn sine(index: usize) -> Self {
        Self { kind: ObservableKind::Sine { index }, name: None }
    }

    pub fn cosine(index: usize) -> Self {
        Self { kind: ObservableKind::Cosine { index }, name: None }
    }

    /// Parse a custom expression observable.
    pub fn expression(source: &str) -> Result<Self> {
        let ast = expr::parse(source)?;
        Ok(Self {
            kind: ObservableKind::Expression { source: source.trim().to_string(), ast },
            name: None,
        })
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    fn canonical_name(&self) -> String {
        match &self.kind {
            ObservableKind::Identity { index } => format!("x{index}"),
            ObservableKind::Monomial { exponents } => {
                let mut parts = Vec::new();
                for (i, &e) in exponents.iter().enumerate() {
                    match e {
                        0 => {}
                        1 => parts.push(format!("x{}", i + 1)),
                        _ => parts.push(format!("x{}^{e}", i + 1)),
                    }
                }
                parts.join("*")
            }
            ObservableKind::Sine { index } => format!("sin(x{index})"),
            ObservableKind::Cosine { index } => format!("cos(x{index})"),
            ObservableKind::Expression { source, .. } => source.clone(),
        }
    }
}

/// Validated, immutable dictionary of `q ≥ n` observables over an
/// `n`-dimensional state space.
#[derive(Debug, Clone)]
pub struct ObservableDictionary {
    entries: Vec<ObservableSpec>,
    names: Vec<String>,
    n: usize,
    /// `identity_cols[i]` = position of the identity observable for state i.
    identity_cols: Vec<usize>,
}

impl ObservableDictionary {
    pub fn q(&self) -> usize {
        self.entries.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[ObservableSpec] {
        &self.entries
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Position of the identity observable of (0-based) state `i`.
    pub fn identity_position(&self, i: usize) -> usize {
        self.identity_cols[i]
    }

    /// Evaluate observable `idx` (0-based) at a state.
    pub fn eval_observable(&self, idx: usize, x: &[f64]) -> f64 {
        match &self.entries[idx].kind {
            ObservableKind::Identity { index } => x[index - 1],
            ObservableKind::Monomial { exponents } => {
                let mut acc = 1.0;
                for (i, &e) in exponents.iter().enumerate() {
                    if e > 0 {
                        acc *= x[i].powi(e as i32);
                    }
                }
                acc
            }
            ObservableKind::Sine { index } => x[index - 1].sin(),
            ObservableKind::Cosine { index } => x[index - 1].cos(),
            ObservableKind::Expression { ast, .. } => ast.eval(x),
        }
    }

    /// Evaluate the full lifting `γ(x)`.
    pub fn eval(&self, x: &[f64]) -> Array1<f64> {
        Array1::from_iter((0..self.q()).map(|k| self.eval_observable(k, x)))
    }

    /// (0-based) state indices that observable `idx` actually depends on.
    pub fn dependencies(&self, idx: usize) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        match &self.entries[idx].kind {
            ObservableKind::Identity { index }
            | ObservableKind::Sine { index }
            | ObservableKind::Cosine { index } => {
                out.insert(index - 1);
            }
            ObservableKind::Monomial { exponents } => {
                for (i, &e) in exponents.iter().enumerate() {
                    if e > 0 {
                        out.insert(i);
                    }
                }
            }
            ObservableKind::Expression { ast, .. } => ast.collect_states(&mut out),
        }
        out
    }
}

/// Validate a list of observables and freeze it into a dictionary (ordering
/// is preserved as given).
pub fn build_dictionary(spec: Vec<ObservableSpec>, n: usize) -> Result<ObservableDictionary> {
    if n == 0 {
        return Err(Error::InvalidConfig("state dimension must be at least 1".into()));
    }

    let mut identity_cols = vec![usize::MAX; n];
    let mut names: Vec<String> = Vec::with_capacity(spec.len());

    for (pos, s) in spec.iter().enumerate() {
        match &s.kind {
            ObservableKind::Identity { index } => {
                if *index == 0 || *index > n {
                    return Err(Error::InvalidStateIndex { index: *index, n });
                }
                let slot = &mut identity_cols[*index - 1];
                if *slot != usize::MAX {
                    return Err(Error::DuplicateIdentity { state: *index });
                }
                *slot = pos;
            }
            ObservableKind::Sine { index } | ObservableKind::Cosine { index } => {
                if *index == 0 || *index > n {
                    return Err(Error::InvalidStateIndex { index: *index, n });
                }
            }
            ObservableKind::Monomial { exponents } => {
                if exponents.len() != n {
                    return Err(Error::InvalidObservable(format!(
                        "monomial exponent vector has length {}, state dimension is {n}",
                        exponents.len()
                    )));
                }
                if exponents.iter().map(|&e| e as u64).sum::<u64>() == 0 {
                    return Err(Error::InvalidObservable(
                        "monomial total degree must be at least 1".into(),
                    ));
                }
            }
            ObservableKind::Expression { ast, source } => {
                let max = ast.max_state();
                if max > n {
                    return Err(Error::InvalidExpression {
                        text: source.clone(),
                        message: format!("references x{max}, but the state dimension is {n}"),
                    });
                }
            }
        }
        let name = s.name.clone().unwrap_or_else(|| s.canonical_name());
        if names.contains(&name) {
            return Err(Error::DuplicateName { name });
        }
        names.push(name);
    }

    for (i, &col) in identity_cols.iter().enumerate() {
        if col == usize::MAX {
            return Err(Error::MissingIdentity { state: i + 1 });
        }
    }

    Ok(ObservableDictionary { entries: spec, names, n, identity_cols })
}

/// Identity dictionary `γ(x) = x` (q = n).
pub fn identity_dictionary(n: usize) -> ObservableDictionary {
    build_dictionary((1..=n).map(ObservableSpec::identity).collect(), n)
        .expect("identity dictionary is always valid")
}

/// Lift a state matrix column-by-column: `Γ_X[:, k] = γ(X[:, k])`.
pub fn lift(dict: &ObservableDictionary, x: &ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if x.nrows() != dict.n() {
        return Err(Error::DimensionMismatch {
            expected: dict.n(),
            actual: x.nrows(),
            context: "state rows passed to lift".into(),
        });
    }
    let m = x.ncols();
    let q = dict.q();
    let mut out = Array2::<f64>::zeros((q, m));
    let mut xk = vec![0.0; dict.n()];
    for k in 0..m {
        for (i, v) in xk.iter_mut().enumerate() {
            *v = x[(i, k)];
        }
        for r in 0..q {
            let val = dict.eval_observable(r, &xk);
            if !val.is_finite() {
                return Err(Error::NonFiniteValue {
                    row: r,
                    col: k,
                    context: format!("observable `{}`", dict.names()[r]),
                });
            }
            out[(r, k)] = val;
        }
    }
    Ok(out)
}

/// State-recovery matrix `B` (n×q): `B[i, j] = 1` iff entry j is the identity
/// observable of state i.
#[derive(Debug, Clone)]
pub struct RecoveryMatrix {
    pub b: Array2<f64>,
}

pub fn recovery_matrix(dict: &ObservableDictionary) -> RecoveryMatrix {
    let mut b = Array2::<f64>::zeros((dict.n(), dict.q()));
    for i in 0..dict.n() {
        b[(i, dict.identity_position(i))] = 1.0;
    }
    RecoveryMatrix { b }
}

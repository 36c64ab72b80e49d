//! Custom expression observables: lifting a nonlinear system with a
//! user-written dictionary.
//!
//! Observables can be given as parsed expressions over `x1…xn` (with `^`,
//! `*`, `+`, `-`, `sin`, `cos`, and parentheses), which is how the CLI's
//! JSON config extends the built-in identity/monomial/trig kinds. Here the
//! benchmark system is lifted with expression observables only, and the fit
//! is identical to the one produced by the equivalent built-in monomial.

use koopman_pf::observables::{build_dictionary, ObservableSpec};
use koopman_pf::{edmd, models};

fn main() -> koopman_pf::Result<()> {
    let sys = models::canonical_system(-1.0, -0.05);
    let traj = models::integrate_rk4(&sys, &[-1.0, 2.0], 0.01, 1000)?;

    // The same invariant subspace, written three ways.
    let dictionaries = [
        ("built-in monomial", vec![
            ObservableSpec::identity(1),
            ObservableSpec::identity(2),
            ObservableSpec::monomial(vec![0, 2]),
        ]),
        ("expression x2^2", vec![
            ObservableSpec::identity(1),
            ObservableSpec::identity(2),
            ObservableSpec::expression("x2^2")?,
        ]),
        ("expression x2*x2", vec![
            ObservableSpec::identity(1),
            ObservableSpec::identity(2),
            ObservableSpec::expression("x2 * x2")?.named("x2*x2"),
        ]),
    ];

    for (label, spec) in dictionaries {
        let dict = build_dictionary(spec, 2)?;
        let dec = edmd::fit(&edmd::assemble_snapshots(&traj.view(), 0.01)?, &dict, 1e-10)?
            .observable_dominance_order();
        let lambda: Vec<String> = dec
            .lambda_c()
            .iter()
            .map(|l| format!("{:+.6}", l.re))
            .collect();
        println!("{label:>20}: λ_c = [{}], observables {:?}", lambda.join(", "), dec.dict.names());
    }

    // Expressions are validated against the state dimension up front.
    let err = build_dictionary(
        vec![
            ObservableSpec::identity(1),
            ObservableSpec::identity(2),
            ObservableSpec::expression("sin(x3)")?,
        ],
        2,
    )
    .unwrap_err();
    println!("\nout-of-range expression is rejected: {err}");

    // And malformed source fails at parse time, not at evaluation time.
    let parse_err = ObservableSpec::expression("x1 + * x2").unwrap_err();
    println!("malformed expression is rejected: {parse_err}");
    Ok(())
}

//! Implementations behind the CLI subcommands (`simulate`, `decompose`,
//! `pf`, `report`) plus the stable exit-code contract.
//!
//! Each command takes an [`AnalysisConfig`] (config file merged with CLI
//! overrides by the binary), performs its pipeline stage, writes its output
//! files into `output_dir`, and returns a one-line human summary for stdout.

use ndarray::prelude::*;

use crate::config::{AnalysisConfig, InputConfig, ObservableEntry, OutputFormat};
use crate::csvio::{self, DecompositionBundle, ParticipationBundle};
use crate::edmd::{self, KoopmanDecomposition};
use crate::error::{Error, Result};
use crate::participation::{self, PfMethod};

/// Stable exit-code contract: 0 ok, 2 configuration/input problems,
/// 3 numerical failures, 4 rank deficiency under `--strict`,
/// 5 non-convergent expectations under `--strict`.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidConfig(_)
        | Error::Io { .. }
        | Error::Json { .. }
        | Error::Csv { .. }
        | Error::InvalidObservable(_)
        | Error::InvalidExpression { .. }
        | Error::MissingIdentity { .. }
        | Error::DuplicateIdentity { .. }
        | Error::DuplicateName { .. }
        | Error::InvalidStateIndex { .. }
        | Error::InvalidTopology(_)
        | Error::TooFewSnapshots { .. }
        | Error::DimensionMismatch { .. } => 2,
        Error::NonFiniteState { .. }
        | Error::NonFiniteValue { .. }
        | Error::DegenerateSpectrum { .. }
        | Error::ZeroRealEigenvector { .. }
        | Error::ZeroEigenvalue { .. }
        | Error::ZeroReference
        | Error::ZeroRow { .. }
        | Error::NotSquare { .. }
        | Error::Linalg(_) => 3,
        Error::RankDeficientStrict { .. } => 4,
        Error::NonConvergentStrict { .. } => 5,
    }
}

/// Input data resolved from the config: one or more trajectories sharing a
/// sampling interval.
struct LoadedInput {
    trajectories: Vec<Array2<f64>>,
    dt: f64,
    source: String,
}

fn load_input(cfg: &AnalysisConfig) -> Result<LoadedInput> {
    match &cfg.input {
        None => Err(Error::InvalidConfig(
            "no input configured: set `input` in the config file or pass `--model`/`--input`".into(),
        )),
        Some(InputConfig::Preset { name, x0, dt, steps }) => {
            let mut preset = crate::models::preset(name)?;
            if let Some(x0) = x0 {
                preset.x0 = x0.clone();
            }
            if let Some(dt) = dt {
                preset.dt = *dt;
            }
            if let Some(steps) = steps {
                preset.steps = *steps;
            }
            let traj =
                crate::models::integrate_rk4(&preset.system, &preset.x0, preset.dt, preset.steps)?;
            Ok(LoadedInput {
                trajectories: vec![traj],
                dt: preset.dt,
                source: format!("preset `{name}`"),
            })
        }
        Some(InputConfig::Csv { paths, dt }) => {
            let mut trajectories = Vec::with_capacity(paths.len());
            let mut file_dt: Option<f64> = None;
            for path in paths {
                let (traj, this_dt) = csvio::read_trajectory(path)?;
                if let Some(this_dt) = this_dt {
                    match file_dt {
                        Some(prev) if (prev - this_dt).abs() > 1e-9 * prev.max(1.0) => {
                            return Err(Error::InvalidConfig(format!(
                                "trajectory files disagree on dt ({prev} vs {this_dt} in {})",
                                path.display()
                            )));
                        }
                        _ => file_dt = Some(this_dt),
                    }
                }
                trajectories.push(traj);
            }
            let n = trajectories[0].nrows();
            if let Some(bad) = trajectories.iter().position(|t| t.nrows() != n) {
                return Err(Error::InvalidConfig(format!(
                    "trajectory files have differing state dimensions ({} has {} states, {} has {})",
                    paths[0].display(),
                    n,
                    paths[bad].display(),
                    trajectories[bad].nrows()
                )));
            }
            let dt = match (dt, file_dt) {
                (Some(cfg_dt), Some(t_dt)) => {
                    if (cfg_dt - t_dt).abs() > 1e-9 * cfg_dt.max(1.0) {
                        return Err(Error::InvalidConfig(format!(
                            "configured dt {cfg_dt} disagrees with the time column ({t_dt})"
                        )));
                    }
                    *cfg_dt
                }
                (Some(cfg_dt), None) => *cfg_dt,
                (None, Some(t_dt)) => t_dt,
                (None, None) => {
                    return Err(Error::InvalidConfig(
                        "dt unknown: trajectory files have no `t` column and no dt was configured"
                            .into(),
                    ));
                }
            };
            Ok(LoadedInput {
                trajectories,
                dt,
                source: format!("{} csv file(s)", paths.len()),
            })
        }
    }
}

/// Fit the Koopman decomposition from loaded input under the config's
/// dictionary and SVD tolerance. Modes come back in observable-dominance
/// order (each identity observable aligned with the mode that dominates it).
fn fit_from_input(
    cfg: &AnalysisConfig,
    input: &LoadedInput,
    strict: bool,
) -> Result<(KoopmanDecomposition, Vec<ObservableEntry>)> {
    let n = input.trajectories[0].nrows();
    let entries = cfg.dictionary_entries(n);
    let specs = entries.iter().map(|e| e.to_spec()).collect::<Result<Vec<_>>>()?;
    let dict = crate::observables::build_dictionary(specs, n)?;
    let pairs = input
        .trajectories
        .iter()
        .map(|t| edmd::assemble_snapshots(&t.view(), input.dt))
        .collect::<Result<Vec<_>>>()?;
    let pair = edmd::SnapshotPair::concat(&pairs)?;
    let dec = edmd::fit(&pair, &dict, cfg.svd_rtol)?.observable_dominance_order();
    strict_rank_check(dec.diagnostics.as_ref().map(|d| (d.rank_deficient, d.rank)), dec.q(), strict)?;
    Ok((dec, entries))
}

fn strict_rank_check(diag: Option<(bool, usize)>, q: usize, strict: bool) -> Result<()> {
    if strict {
        if let Some((true, rank)) = diag {
            return Err(Error::RankDeficientStrict { rank, q });
        }
    }
    Ok(())
}

/// `simulate`: integrate a model preset and write `trajectory.csv`.
pub fn cmd_simulate(cfg: &AnalysisConfig) -> Result<String> {
    if !matches!(cfg.input, Some(InputConfig::Preset { .. })) {
        return Err(Error::InvalidConfig(
            "simulate needs a model preset: pass --model or set input.kind = \"preset\"".into(),
        ));
    }
    let input = load_input(cfg)?;
    let traj = &input.trajectories[0];
    let path = cfg.output_dir.join("trajectory.csv");
    csvio::write_trajectory(&path, &traj.view(), input.dt)?;
    Ok(format!(
        "simulated {}: n = {}, steps = {}, dt = {} s -> {}",
        input.source,
        traj.nrows(),
        traj.ncols() - 1,
        input.dt,
        path.display()
    ))
}

/// `decompose`: fit EDMD, write the mode table, eigen-matrices,
/// reconstruction error, and the machine-readable bundle.
pub fn cmd_decompose(cfg: &AnalysisConfig, strict: bool) -> Result<String> {
    let input = load_input(cfg)?;
    let (dec, entries) = fit_from_input(cfg, &input, strict)?;

    // Reconstruction error ε over the first trajectory, from its own x0.
    let first = &input.trajectories[0];
    let xhat = edmd::reconstruct(&dec, &first.column(0), first.ncols() - 1)?;
    let eps = edmd::reconstruction_error(&xhat.view(), &first.view())?;

    let out = &cfg.output_dir;
    if cfg.wants(OutputFormat::Csv) {
        csvio::write_modes_csv(&out.join("modes.csv"), &edmd::mode_summary(&dec))?;
        csvio::write_complex_matrix(
            &out.join("xi.csv"),
            &dec.xi.view(),
            "mode",
            &csvio::mode_names(dec.q()),
            dec.dict.names(),
        )?;
        csvio::write_complex_matrix(
            &out.join("phi.csv"),
            &dec.phi.view(),
            "state",
            &csvio::state_names(dec.n()),
            &csvio::mode_names(dec.q()),
        )?;
        csvio::write_recon_error(&out.join("recon_error.txt"), eps)?;
    }
    if cfg.wants(OutputFormat::Json) {
        let bundle = DecompositionBundle::from_decomposition(&dec, &entries, Some(eps));
        csvio::write_json(&out.join("decomposition.json"), &bundle)?;
    }

    let rank = dec
        .diagnostics
        .as_ref()
        .map(|d| format!("rank {}/{}", d.rank, dec.q()))
        .unwrap_or_else(|| "rank n/a".into());
    Ok(format!(
        "decomposed {}: n = {}, q = {}, {}, recon error = {:.3e} -> {}",
        input.source,
        dec.n(),
        dec.q(),
        rank,
        eps,
        out.display()
    ))
}

/// `pf`: compute participation factors, either from fresh input (when the
/// config declares one) or from a previously written `decomposition.json`.
pub fn cmd_pf(cfg: &AnalysisConfig, strict: bool, seed_override: Option<u64>) -> Result<String> {
    let dec = if cfg.input.is_some() {
        let input = load_input(cfg)?;
        fit_from_input(cfg, &input, strict)?.0
    } else {
        let path = cfg.output_dir.join("decomposition.json");
        let bundle: DecompositionBundle = csvio::read_json(&path)?;
        let dec = bundle.to_decomposition()?.observable_dominance_order();
        let diag = bundle.diagnostics.as_ref().map(|d| (d.rank_deficient, d.rank));
        strict_rank_check(diag, dec.q(), strict)?;
        dec
    };

    let res = match cfg.pf_method {
        PfMethod::Simplified => participation::mode_in_state_simplified_with(&dec, cfg.indexing)?,
        PfMethod::General => {
            let mut dist = cfg.distribution_for(dec.n());
            if let Some(seed) = seed_override {
                dist.seed = seed;
            }
            dist.validate(dec.n())?;
            participation::mode_in_state_general_with(&dec, &dist, cfg.indexing)?
        }
    };
    let flagged = res.expectation_terms.as_ref().map(|t| t.flagged_count()).unwrap_or(0);
    if strict && flagged > 0 {
        return Err(Error::NonConvergentStrict { count: flagged });
    }

    let out = &cfg.output_dir;
    let (n, q) = (dec.n(), dec.q());
    if cfg.wants(OutputFormat::Csv) {
        csvio::write_real_matrix(
            &out.join("p_mode_in_state.csv"),
            &res.p_magnitude.view(),
            "state",
            &csvio::state_names(n),
            &csvio::mode_names(q),
        )?;
        csvio::write_real_matrix(
            &out.join("p_normalized.csv"),
            &res.p_normalized.view(),
            "state",
            &csvio::state_names(n),
            &csvio::mode_names(q),
        )?;
        csvio::write_real_matrix(
            &out.join("pi_state_in_mode.csv"),
            &res.pi.view(),
            "observable",
            dec.dict.names(),
            &csvio::mode_names(q),
        )?;
        if let Some(table) = &res.expectation_terms {
            csvio::write_expectation_terms(&out.join("expectation_terms.csv"), table, &dec.dict)?;
        }
    }
    if cfg.wants(OutputFormat::Json) {
        let bundle = ParticipationBundle::from_result(&res, &dec.dict);
        csvio::write_json(&out.join("participation.json"), &bundle)?;
    }

    Ok(format!(
        "participation ({} method): P is {}x{}, {} flagged expectation term(s) -> {}",
        match cfg.pf_method {
            PfMethod::Simplified => "simplified",
            PfMethod::General => "general",
        },
        n,
        q,
        flagged,
        out.display()
    ))
}

/// `report`: condense prior outputs into a human-readable `report.md`.
pub fn cmd_report(cfg: &AnalysisConfig) -> Result<String> {
    let out = &cfg.output_dir;
    let bundle: DecompositionBundle = csvio::read_json(&out.join("decomposition.json"))?;
    let pnorm = csvio::read_real_matrix(&out.join("p_normalized.csv")).ok();
    let part: Option<ParticipationBundle> = csvio::read_json(&out.join("participation.json")).ok();

    let report = render_report(&bundle, pnorm.as_ref(), part.as_ref());
    let path = out.join("report.md");
    csvio::atomic_write(&path, report.as_bytes())?;
    Ok(format!("report written -> {}", path.display()))
}

/// Continuous eigenvalues with |λ_c| below this are flagged as zero modes
/// (conserved directions, e.g. the center-of-angle direction of a swing
/// network).
pub const ZERO_MODE_TOL: f64 = 1e-3;

fn fmt_complex(re: f64, im: f64) -> String {
    format!("{re:.6}{im:+.6}i")
}

fn mode_note(m: &csvio::ModeSummaryJson) -> String {
    if m.zero_eigenvalue {
        return "zero discrete eigenvalue (mu = 0)".into();
    }
    if let Some(l) = m.lambda_c {
        if (l.re * l.re + l.im * l.im).sqrt() < ZERO_MODE_TOL {
            return "zero mode (lambda_c ~ 0)".into();
        }
    }
    String::new()
}

/// Render the markdown report. The `Generated:` header is the only
/// non-deterministic line in the whole output set.
pub fn render_report(
    bundle: &DecompositionBundle,
    pnorm: Option<&(Vec<String>, Vec<String>, Array2<f64>)>,
    part: Option<&ParticipationBundle>,
) -> String {
    use std::fmt::Write;

    let mut s = String::new();
    let now = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    let _ = writeln!(s, "# Koopman mode analysis report\n");
    let _ = writeln!(s, "Generated: {now}\n");

    let _ = writeln!(s, "## Summary\n");
    let _ = writeln!(s, "| quantity | value |");
    let _ = writeln!(s, "|---|---|");
    let _ = writeln!(s, "| states (n) | {} |", bundle.n);
    let _ = writeln!(s, "| observables (q) | {} |", bundle.q);
    let _ = writeln!(s, "| sampling interval dt | {} s |", bundle.dt);
    if let Some(d) = &bundle.diagnostics {
        let _ = writeln!(s, "| operator rank | {} / {} |", d.rank, bundle.q);
        let _ = writeln!(s, "| fit residual (Frobenius) | {:.3e} |", d.residual);
        let _ = writeln!(s, "| snapshot pairs | {} |", d.snapshot_columns);
    }
    if let Some(eps) = bundle.recon_error {
        let _ = writeln!(
            s,
            "| reconstruction error | {:.3e} ({:.3e} %) |",
            eps,
            eps * 100.0
        );
    }
    let _ = writeln!(s);

    // Mode table, least-damped first (damping ratio ascending).
    let mut order: Vec<usize> = (0..bundle.modes.len()).collect();
    order.sort_by(|&a, &b| {
        bundle.modes[a]
            .damping_pct
            .total_cmp(&bundle.modes[b].damping_pct)
            .then(bundle.modes[a].index.cmp(&bundle.modes[b].index))
    });
    let _ = writeln!(s, "## Modes (sorted by damping ratio, ascending)\n");
    let _ = writeln!(
        s,
        "| # | mu (discrete) | lambda (continuous, 1/s) | frequency (Hz) | damping (%) | notes |"
    );
    let _ = writeln!(s, "|--:|---|---|--:|--:|---|");
    for &k in &order {
        let m = &bundle.modes[k];
        let lambda = match m.lambda_c {
            Some(l) => fmt_complex(l.re, l.im),
            None => "-inf (mu = 0)".into(),
        };
        let _ = writeln!(
            s,
            "| {} | {} | {} | {:.6} | {:.2} | {} |",
            m.index,
            fmt_complex(m.mu.re, m.mu.im),
            lambda,
            m.freq_hz,
            m.damping_pct,
            mode_note(m)
        );
    }
    let _ = writeln!(s);

    // Dominant participation per mode from the normalized P table.
    let _ = writeln!(s, "## Dominant participation per mode\n");
    match pnorm {
        Some((col_names, row_names, p)) => {
            let _ = writeln!(
                s,
                "Top participating states per mode by normalized mode-in-state factor:\n"
            );
            for (j, col) in col_names.iter().enumerate() {
                let mut ranked: Vec<(usize, f64)> =
                    (0..p.nrows()).map(|i| (i, p[(i, j)])).collect();
                ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                let top: Vec<String> = ranked
                    .iter()
                    .take(3)
                    .filter(|(_, v)| *v >= 5e-4)
                    .map(|(i, v)| format!("{} ({:.3})", row_names[*i], v))
                    .collect();
                let lambda = bundle
                    .modes
                    .get(j)
                    .map(|m| match m.lambda_c {
                        Some(l) => format!("lambda_c = {}", fmt_complex(l.re, l.im)),
                        None => "mu = 0".into(),
                    })
                    .unwrap_or_default();
                let list = if top.is_empty() {
                    "all shares below display threshold".into()
                } else {
                    top.join(", ")
                };
                let _ = writeln!(s, "- {col} ({lambda}): {list}");
            }
        }
        None => {
            let _ = writeln!(
                s,
                "_No participation tables found; run the `pf` subcommand first._"
            );
        }
    }
    let _ = writeln!(s);

    // Warnings.
    let mut warnings: Vec<String> = Vec::new();
    if let Some(d) = &bundle.diagnostics {
        if d.rank_deficient {
            warnings.push(format!(
                "rank-deficient fit: numerical rank {} < q = {}; trailing singular values were truncated",
                d.rank, bundle.q
            ));
        }
    }
    for m in &bundle.modes {
        let note = mode_note(m);
        if !note.is_empty() {
            warnings.push(format!("mode {}: {}", m.index, note));
        }
    }
    if let Some(p) = part {
        if p.non_convergent_count > 0 {
            warnings.push(format!(
                "{} expectation term(s) flagged non-convergent; the affected general-form P entries carry extra uncertainty",
                p.non_convergent_count
            ));
        }
    }
    let _ = writeln!(s, "## Warnings\n");
    if warnings.is_empty() {
        let _ = writeln!(s, "- none");
    } else {
        for w in &warnings {
            let _ = writeln!(s, "- {w}");
        }
    }
    s
}

//! File formats: trajectory/matrix CSV schemas, the machine-readable JSON
//! bundles, and atomic write helpers.
//!
//! Floats are written with 17 significant digits (`{:.16e}`), which round
//! trips `f64` exactly; complex values become `name_re`/`name_im` column
//! pairs in CSV and `{re, im}` objects in JSON.

use std::path::Path;

use ndarray::prelude::*;

use crate::config::ObservableEntry;
use crate::edmd::{FitDiagnostics, KoopmanDecomposition, ModeSummary};
use crate::error::{Error, Result};
use crate::observables::ObservableDictionary;
use crate::participation::{ExpectationTable, ParticipationResult, PfIndexing, PfMethod};
use crate::C64;

/// Exact-roundtrip float formatting used in every CSV/text output.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write via a temporary file in the same directory, then rename into place,
/// so readers never observe a half-written file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidConfig(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", file_name.to_string_lossy()));
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn csv_bytes(records: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for rec in records {
        w.write_record(&rec)
            .map_err(|e| Error::csv("<buffer>", e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::csv("<buffer>", e.to_string()))
}

/// Standard state names `x1…xn`.
pub fn state_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("x{i}")).collect()
}

/// Standard mode names `mode1…modeq`.
pub fn mode_names(q: usize) -> Vec<String> {
    (1..=q).map(|j| format!("mode{j}")).collect()
}

/// Trajectory CSV: header `t,x1,…,xn`, one row per sample in time order.
pub fn write_trajectory(path: &Path, traj: &ArrayView2<'_, f64>, dt: f64) -> Result<()> {
    let (n, t_len) = traj.dim();
    let mut records = Vec::with_capacity(t_len + 1);
    let mut header = vec!["t".to_string()];
    header.extend(state_names(n));
    records.push(header);
    for k in 0..t_len {
        let mut row = Vec::with_capacity(n + 1);
        row.push(fmt_f64(k as f64 * dt));
        row.extend(traj.column(k).iter().map(|&v| fmt_f64(v)));
        records.push(row);
    }
    atomic_write(path, &csv_bytes(records)?)
}

/// Read a trajectory CSV. A leading `t` column (if present) is stripped and
/// converted into the sampling interval after a uniform-spacing check; the
/// remaining columns become states in file order. Returns the n×T state
/// matrix and the derived `dt` (None when the file has no time column).
pub fn read_trajectory(path: &Path) -> Result<(Array2<f64>, Option<f64>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e.to_string()))?;
    let headers = rdr
        .headers()
        .map_err(|e| Error::csv(path, e.to_string()))?
        .clone();
    if headers.is_empty() {
        return Err(Error::csv(path, "empty header row"));
    }
    let has_time = headers.get(0) == Some("t");
    let n = headers.len() - usize::from(has_time);
    if n == 0 {
        return Err(Error::csv(path, "no state columns"));
    }

    let mut times = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::csv(path, e.to_string()))?;
        if record.len() != headers.len() {
            return Err(Error::csv(
                path,
                format!("row {} has {} fields, expected {}", line + 2, record.len(), headers.len()),
            ));
        }
        let mut fields = record.iter();
        if has_time {
            times.push(parse_f64(path, line + 2, fields.next().unwrap())?);
        }
        for field in fields {
            values.push(parse_f64(path, line + 2, field)?);
        }
    }
    let t_len = values.len() / n;
    if t_len == 0 {
        return Err(Error::csv(path, "no data rows"));
    }
    // Rows are samples; transpose into the n×T state-major layout.
    let traj = Array2::from_shape_vec((t_len, n), values)
        .expect("row count × column count matches data length")
        .reversed_axes()
        .to_owned();

    let dt = if has_time && t_len >= 2 {
        let dt = times[1] - times[0];
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::csv(path, format!("non-increasing time column (dt = {dt})")));
        }
        for k in 1..t_len {
            let gap = times[k] - times[k - 1];
            if (gap - dt).abs() > 1e-9 * dt.max(1.0) {
                return Err(Error::csv(
                    path,
                    format!("non-uniform time column: gap {gap} at row {} vs dt {dt}", k + 1),
                ));
            }
        }
        Some(dt)
    } else {
        None
    };
    Ok((traj, dt))
}

fn parse_f64(path: &Path, line: usize, field: &str) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|_| Error::csv(path, format!("row {line}: `{field}` is not a number")))
}

/// Per-mode frequency/damping table
/// (`index,mu_re,mu_im,lambda_re,lambda_im,freq_hz,damping_pct,zero_eigenvalue`).
/// A zero discrete eigenvalue is written with `lambda_re = -inf`, which
/// `f64::from_str` parses back.
pub fn write_modes_csv(path: &Path, modes: &[ModeSummary]) -> Result<()> {
    let mut records = vec![vec![
        "index".to_string(),
        "mu_re".to_string(),
        "mu_im".to_string(),
        "lambda_re".to_string(),
        "lambda_im".to_string(),
        "freq_hz".to_string(),
        "damping_pct".to_string(),
        "zero_eigenvalue".to_string(),
    ]];
    for m in modes {
        records.push(vec![
            m.index.to_string(),
            fmt_f64(m.mu_re),
            fmt_f64(m.mu_im),
            fmt_f64(m.lambda_re),
            fmt_f64(m.lambda_im),
            fmt_f64(m.freq_hz),
            fmt_f64(m.damping_pct),
            m.zero_eigenvalue.to_string(),
        ]);
    }
    atomic_write(path, &csv_bytes(records)?)
}

/// Complex matrix as `label,<col>_re,<col>_im,…` with one labeled row per
/// matrix row.
pub fn write_complex_matrix(
    path: &Path,
    m: &ArrayView2<'_, C64>,
    row_label: &str,
    row_names: &[String],
    col_names: &[String],
) -> Result<()> {
    let (rows, cols) = m.dim();
    debug_assert_eq!((rows, cols), (row_names.len(), col_names.len()));
    let mut header = Vec::with_capacity(1 + 2 * cols);
    header.push(row_label.to_string());
    for c in col_names {
        header.push(format!("{c}_re"));
        header.push(format!("{c}_im"));
    }
    let mut records = vec![header];
    for i in 0..rows {
        let mut row = Vec::with_capacity(1 + 2 * cols);
        row.push(row_names[i].clone());
        for j in 0..cols {
            row.push(fmt_f64(m[(i, j)].re));
            row.push(fmt_f64(m[(i, j)].im));
        }
        records.push(row);
    }
    atomic_write(path, &csv_bytes(records)?)
}

/// Real matrix as `label,<col>,…` with one labeled row per matrix row.
pub fn write_real_matrix(
    path: &Path,
    m: &ArrayView2<'_, f64>,
    row_label: &str,
    row_names: &[String],
    col_names: &[String],
) -> Result<()> {
    let (rows, cols) = m.dim();
    debug_assert_eq!((rows, cols), (row_names.len(), col_names.len()));
    let mut header = Vec::with_capacity(1 + cols);
    header.push(row_label.to_string());
    header.extend(col_names.iter().cloned());
    let mut records = vec![header];
    for i in 0..rows {
        let mut row = Vec::with_capacity(1 + cols);
        row.push(row_names[i].clone());
        row.extend(m.row(i).iter().map(|&v| fmt_f64(v)));
        records.push(row);
    }
    atomic_write(path, &csv_bytes(records)?)
}

/// Read back a labeled real matrix written by [`write_real_matrix`]:
/// returns (column names, row names, values).
pub fn read_real_matrix(path: &Path) -> Result<(Vec<String>, Vec<String>, Array2<f64>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e.to_string()))?;
    let headers = rdr
        .headers()
        .map_err(|e| Error::csv(path, e.to_string()))?
        .clone();
    if headers.len() < 2 {
        return Err(Error::csv(path, "matrix file needs a label column and data columns"));
    }
    let col_names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut row_names = Vec::new();
    let mut values = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::csv(path, e.to_string()))?;
        let mut fields = record.iter();
        row_names.push(fields.next().unwrap_or("").to_string());
        for field in fields {
            values.push(parse_f64(path, line + 2, field)?);
        }
    }
    let rows = row_names.len();
    let m = Array2::from_shape_vec((rows, col_names.len()), values)
        .map_err(|e| Error::csv(path, e.to_string()))?;
    Ok((col_names, row_names, m))
}

/// Cross-expectation estimates
/// (`r,i,numerator,denominator,estimate,std_error,non_convergent`), indices
/// 1-based to match the printed formulas.
pub fn write_expectation_terms(
    path: &Path,
    table: &ExpectationTable,
    dict: &ObservableDictionary,
) -> Result<()> {
    let mut records = vec![vec![
        "r".to_string(),
        "i".to_string(),
        "numerator".to_string(),
        "denominator".to_string(),
        "estimate".to_string(),
        "std_error".to_string(),
        "non_convergent".to_string(),
    ]];
    for t in table.terms() {
        records.push(vec![
            (t.r + 1).to_string(),
            (t.i + 1).to_string(),
            dict.names()[t.r].clone(),
            dict.names()[t.i].clone(),
            fmt_f64(t.estimate),
            fmt_f64(t.std_error),
            t.non_convergent.to_string(),
        ]);
    }
    atomic_write(path, &csv_bytes(records)?)
}

/// Relative reconstruction error as both a fraction and a percentage.
pub fn write_recon_error(path: &Path, epsilon: f64) -> Result<()> {
    let text = format!(
        "epsilon_fraction = {}\nepsilon_percent = {}\n",
        fmt_f64(epsilon),
        fmt_f64(epsilon * 100.0)
    );
    atomic_write(path, text.as_bytes())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::json(path, e))?;
    bytes.push(b'\n');
    atomic_write(path, &bytes)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

/// JSON-safe complex value.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ComplexJson {
    pub re: f64,
    pub im: f64,
}

impl From<C64> for ComplexJson {
    fn from(z: C64) -> ComplexJson {
        ComplexJson { re: z.re, im: z.im }
    }
}

impl From<ComplexJson> for C64 {
    fn from(z: ComplexJson) -> C64 {
        C64::new(z.re, z.im)
    }
}

fn complex_rows(m: &Array2<C64>) -> Vec<Vec<ComplexJson>> {
    m.rows().into_iter().map(|r| r.iter().map(|&z| z.into()).collect()).collect()
}

fn real_rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

/// JSON-safe mode summary: `lambda_c` is omitted (null) for zero eigenvalues
/// instead of writing a non-finite float.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ModeSummaryJson {
    pub index: usize,
    pub mu: ComplexJson,
    pub lambda_c: Option<ComplexJson>,
    pub freq_hz: f64,
    pub damping_pct: f64,
    pub zero_eigenvalue: bool,
}

impl From<&ModeSummary> for ModeSummaryJson {
    fn from(m: &ModeSummary) -> ModeSummaryJson {
        ModeSummaryJson {
            index: m.index,
            mu: ComplexJson { re: m.mu_re, im: m.mu_im },
            lambda_c: (!m.zero_eigenvalue).then_some(ComplexJson { re: m.lambda_re, im: m.lambda_im }),
            freq_hz: m.freq_hz,
            damping_pct: m.damping_pct,
            zero_eigenvalue: m.zero_eigenvalue,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct DiagnosticsJson {
    pub residual: f64,
    pub rank: usize,
    pub rank_deficient: bool,
    pub singular_values: Vec<f64>,
    pub snapshot_columns: usize,
}

impl From<&FitDiagnostics> for DiagnosticsJson {
    fn from(d: &FitDiagnostics) -> DiagnosticsJson {
        DiagnosticsJson {
            residual: d.residual,
            rank: d.rank,
            rank_deficient: d.rank_deficient,
            singular_values: d.singular_values.clone(),
            snapshot_columns: d.m,
        }
    }
}

/// The full machine-readable decomposition bundle (`decomposition.json`).
/// Carries enough (`k`, `dictionary`, `dt`) to rebuild the decomposition.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct DecompositionBundle {
    pub n: usize,
    pub q: usize,
    pub dt: f64,
    pub dictionary: Vec<ObservableEntry>,
    pub observable_names: Vec<String>,
    pub k: Vec<Vec<f64>>,
    pub mu: Vec<ComplexJson>,
    pub lambda_c: Vec<Option<ComplexJson>>,
    pub xi: Vec<Vec<ComplexJson>>,
    pub xi_inv: Vec<Vec<ComplexJson>>,
    pub phi: Vec<Vec<ComplexJson>>,
    pub modes: Vec<ModeSummaryJson>,
    pub diagnostics: Option<DiagnosticsJson>,
    pub recon_error: Option<f64>,
}

impl DecompositionBundle {
    pub fn from_decomposition(
        dec: &KoopmanDecomposition,
        entries: &[ObservableEntry],
        recon_error: Option<f64>,
    ) -> DecompositionBundle {
        let modes = crate::edmd::mode_summary(dec);
        DecompositionBundle {
            n: dec.n(),
            q: dec.q(),
            dt: dec.dt,
            dictionary: entries.to_vec(),
            observable_names: dec.dict.names().to_vec(),
            k: real_rows(&dec.k),
            mu: dec.mu.iter().map(|&z| z.into()).collect(),
            lambda_c: dec
                .lambda_c()
                .iter()
                .map(|&l| l.re.is_finite().then_some(l.into()))
                .collect(),
            xi: complex_rows(&dec.xi),
            xi_inv: complex_rows(&dec.xi_inv),
            phi: complex_rows(&dec.phi),
            modes: modes.iter().map(ModeSummaryJson::from).collect(),
            diagnostics: dec.diagnostics.as_ref().map(DiagnosticsJson::from),
            recon_error,
        }
    }

    /// Rebuild a decomposition from the stored operator, dictionary and dt.
    /// Eigen-data is recomputed, so the result satisfies the same invariants
    /// as a fresh fit (the stored matrices are an echo, not the source).
    pub fn to_decomposition(&self) -> Result<KoopmanDecomposition> {
        let specs = self
            .dictionary
            .iter()
            .map(|e| e.to_spec())
            .collect::<Result<Vec<_>>>()?;
        let dict = crate::observables::build_dictionary(specs, self.n)?;
        let k = Array2::from_shape_vec(
            (self.q, self.q),
            self.k.iter().flatten().copied().collect(),
        )
        .map_err(|e| Error::InvalidConfig(format!("stored operator has wrong shape: {e}")))?;
        crate::edmd::koopman_tuples(k, &dict, self.dt)
    }
}

/// Participation outputs in JSON form (`participation.json`); P is kept as
/// signed complex values here, while the CSV tables carry magnitudes.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ParticipationBundle {
    pub method: PfMethod,
    pub indexing: PfIndexing,
    pub state_names: Vec<String>,
    pub observable_names: Vec<String>,
    pub p: Vec<Vec<ComplexJson>>,
    pub p_magnitude: Vec<Vec<f64>>,
    pub p_normalized: Vec<Vec<f64>>,
    pub pi: Vec<Vec<f64>>,
    pub expectation_terms: Vec<ExpectationTermJson>,
    pub non_convergent_count: usize,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ExpectationTermJson {
    pub r: usize,
    pub i: usize,
    pub numerator: String,
    pub denominator: String,
    pub estimate: f64,
    pub std_error: f64,
    pub non_convergent: bool,
}

impl ParticipationBundle {
    pub fn from_result(res: &ParticipationResult, dict: &ObservableDictionary) -> ParticipationBundle {
        let n = res.p.nrows();
        let terms = res
            .expectation_terms
            .as_ref()
            .map(|t| {
                t.terms()
                    .into_iter()
                    .map(|t| ExpectationTermJson {
                        r: t.r + 1,
                        i: t.i + 1,
                        numerator: dict.names()[t.r].clone(),
                        denominator: dict.names()[t.i].clone(),
                        estimate: t.estimate,
                        std_error: t.std_error,
                        non_convergent: t.non_convergent,
                    })
                    .collect()
            })
            .unwrap_or_default();
        ParticipationBundle {
            method: res.method,
            indexing: res.indexing,
            state_names: state_names(n),
            observable_names: dict.names().to_vec(),
            p: complex_rows(&res.p),
            p_magnitude: real_rows(&res.p_magnitude),
            p_normalized: real_rows(&res.p_normalized),
            pi: real_rows(&res.pi),
            non_convergent_count: res
                .expectation_terms
                .as_ref()
                .map(|t| t.flagged_count())
                .unwrap_or(0),
            expectation_terms: terms,
        }
    }
}

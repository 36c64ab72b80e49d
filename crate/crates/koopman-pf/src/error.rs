//! Error taxonomy shared by every module.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes of the library and the CLI front end.
///
/// The CLI maps these onto its exit-code contract (see `commands::exit_code`):
/// configuration and input-shape problems exit 2, numerical failures exit 3,
/// strict-mode rank deficiency exits 4 and strict-mode non-convergent
/// expectations exit 5.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error(
        "degenerate spectrum: eigenvalues {i} and {j} coincide within tolerance (|Δ| = {gap:.3e}); \
         distinct eigenvalues are assumed"
    )]
    DegenerateSpectrum { i: usize, j: usize, gap: f64 },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: String,
    },

    #[error("no identity observable for state x{state}; every state needs exactly one")]
    MissingIdentity { state: usize },

    #[error("more than one identity observable for state x{state}")]
    DuplicateIdentity { state: usize },

    #[error("duplicate observable name `{name}`")]
    DuplicateName { name: String },

    #[error("observable index {index} out of range for state dimension {n}")]
    InvalidStateIndex { index: usize, n: usize },

    #[error("invalid observable: {0}")]
    InvalidObservable(String),

    #[error("invalid expression `{text}`: {message}")]
    InvalidExpression { text: String, message: String },

    #[error("non-finite value at row {row}, column {col} ({context})")]
    NonFiniteValue {
        row: usize,
        col: usize,
        context: String,
    },

    #[error("too few snapshots: need at least 2 trajectory columns, got {cols}")]
    TooFewSnapshots { cols: usize },

    #[error("left eigenvector {index} has numerically zero real part; Π is undefined")]
    ZeroRealEigenvector { index: usize },

    #[error("Koopman eigenvalue {index} is zero; continuous-time conversion is undefined")]
    ZeroEigenvalue { index: usize },

    #[error("reference trajectory has zero Frobenius norm")]
    ZeroReference,

    #[error("row {row} of |P| sums to zero; cannot normalize")]
    ZeroRow { row: usize },

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("non-finite state at step {step}: integration blew up")]
    NonFiniteState { step: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("rank-deficient fit (numerical rank {rank} < {q}) rejected under --strict")]
    RankDeficientStrict { rank: usize, q: usize },

    #[error("{count} expectation estimate(s) flagged non-convergent under --strict")]
    NonConvergentStrict { count: usize },

    #[error("linear algebra backend error: {0}")]
    Linalg(#[from] ndarray_linalg::error::LinalgError),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("CSV error in {path}: {message}")]
    Csv { path: String, message: String },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn csv(path: impl AsRef<std::path::Path>, message: impl Into<String>) -> Self {
        Error::Csv {
            path: path.as_ref().display().to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn json(path: impl AsRef<std::path::Path>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

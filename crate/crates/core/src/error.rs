use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = SfaError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SfaError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}: malformed row at line {line}: {message}")]
    MalformedRow { file: String, line: u64, message: String },

    #[error("{file}: bad header, expected `{expected}`, found `{found}`")]
    BadHeader {
        file: String,
        expected: String,
        found: String,
    },

    #[error("no country is present in all of culture, governance and GDP files")]
    EmptyIntersection,

    #[error("degenerate panel: {0}")]
    DegeneratePanel(String),

    #[error("{what} has a constant value; scaling is undefined")]
    ConstantValues { what: String },

    #[error("{what} has zero variance")]
    ZeroVariance { what: String },

    #[error("non-positive GDP per capita {value} for {country} in {year}")]
    NonPositiveGdp { country: String, year: i32, value: f64 },

    #[error("too few observations: {have} rows for {need} regressors")]
    TooFewObservations { have: usize, need: usize },

    #[error("design matrix is rank deficient; collinear column(s): {}", columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("log-likelihood is not finite for country index {country}")]
    NonFiniteLikelihood { country: usize },

    #[error("objective is not finite at the evaluation point")]
    NonFiniteObjective,

    #[error("estimation failed: every start failed to converge\n{}", diagnostics.join("\n"))]
    NoConvergence { diagnostics: Vec<String> },

    #[error("hessian is not negative definite (min eigenvalue of -H {min_eigenvalue:e}, max {max_eigenvalue:e})")]
    NotNegativeDefinite { min_eigenvalue: f64, max_eigenvalue: f64 },

    #[error("quadrature failed to reach tolerance {tolerance:e} (estimated error {error:e})")]
    Quadrature { tolerance: f64, error: f64 },

    #[error("effective sample size {ess:.1} is below 1% of {draws} draws")]
    EffectiveSampleSize { ess: f64, draws: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl SfaError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SfaError::Io {
            path: path.into(),
            source,
        }
    }
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, RgamError>;

#[derive(Debug, Error)]
pub enum RgamError {
    #[error("value {value} for `{what}` is outside [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("node {0} has degree 0; resample the network or trim isolated nodes")]
    IsolatedNode(usize),

    #[error("stationarity requires |alpha| + |beta| < 1, got |{alpha}| + |{beta}|")]
    StationarityViolation { alpha: f64, beta: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("panel too short: need T >= {needed}, got T = {got}")]
    TooShort { needed: usize, got: usize },

    #[error("singular instrumental-variable design: {0}")]
    SingularDesign(String),

    #[error("kernel-weighted covariate Gram matrix is singular (condition number {0:e})")]
    SingularGram(f64),

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("all codegree distances are zero; supply a bandwidth manually")]
    AllDistancesZero,

    #[error("network has no edges")]
    NoEdges,

    #[error("network must be connected with every degree >= 1: {0}")]
    NotConnected(String),

    #[error("invalid graphon: {0}")]
    InvalidGraphon(String),

    #[error("stacked least-squares design is rank deficient (condition number {0:e})")]
    RankDeficient(f64),

    #[error("insufficient history for target time {target}: need at least {needed}")]
    InsufficientHistory { target: usize, needed: usize },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("node sets disagree: {0}")]
    NodeMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl RgamError {
    /// True for failures caused by malformed or inconsistent input rather
    /// than by the numerics of an otherwise valid problem.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            RgamError::OutOfRange { .. }
                | RgamError::IsolatedNode(_)
                | RgamError::StationarityViolation { .. }
                | RgamError::ShapeMismatch(_)
                | RgamError::TooShort { .. }
                | RgamError::NoEdges
                | RgamError::InvalidGraphon(_)
                | RgamError::InsufficientHistory { .. }
                | RgamError::Parse { .. }
                | RgamError::NodeMismatch(_)
                | RgamError::Config(_)
                | RgamError::Io(_)
                | RgamError::Json(_)
        )
    }
}

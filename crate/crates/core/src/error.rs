use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid degree distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid coupling law: {0}")]
    InvalidCouplingLaw(String),

    #[error("degenerate ensemble: mean degree is zero")]
    DegenerateEnsemble,

    #[error("infeasible degree sequence: {0}")]
    InfeasibleSequence(String),

    #[error("no even-sum completion of the degree sequence within the support")]
    NoEvenSumCompletion,

    #[error("generation stalled after {restarts} restarts")]
    GenerationStalled { restarts: usize },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error(
        "power iteration did not converge in {iterations} iterations \
         (best estimate {lambda}, residual {residual:e})"
    )]
    NotConverged {
        lambda: f64,
        residual: f64,
        iterations: usize,
    },

    #[error("empty input")]
    EmptyInput,

    #[error("singular message on directed edge {from} -> {to}")]
    SingularMessage { from: usize, to: usize },

    #[error("invalid bracket [{lo}, {hi}]: {reason}")]
    InvalidBracket { lo: f64, hi: f64, reason: String },

    #[error("trivial field: the first-order fields vanish everywhere")]
    TrivialField,

    #[error("below spectral edge: lambda = {lambda} but lambda^2 < 4 * {c}")]
    BelowSpectralEdge { lambda: f64, c: f64 },

    #[error("window of {window} sweeps exceeds the {available} recorded")]
    WindowExceedsHistory { window: usize, available: usize },

    #[error(
        "defect regime near lambda = {lambda}: negative-A fraction {frac_negative_a} \
         below it while the largest growth rate above it is only {max_rate}"
    )]
    DefectRegime {
        lambda: f64,
        frac_negative_a: f64,
        max_rate: f64,
    },

    #[error("mixture relation inapplicable: {nonpositive} of {total} A samples are nonpositive")]
    MixtureRelationInapplicable { nonpositive: usize, total: usize },

    #[error("acyclic generation exceeded {attempts} attempts")]
    TreeGenerationFailed { attempts: usize },

    #[error("{failed} of {total} replicates failed (first failure: {first})")]
    TooManyFailures {
        failed: usize,
        total: usize,
        first: String,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

//! Error type shared across the crate.
//!
//! Infeasibility and unboundedness of stage subproblems are hard errors on
//! purpose: the solver assumes relatively complete recourse and bounded stage
//! values, so either condition means the model itself is broken and no
//! feasibility-cut machinery exists to mask it.

/// Crate-wide error enumeration.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Model construction or validation failed.
    #[error("invalid model: {0}")]
    Model(String),

    /// A solver or generator configuration value is out of range.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Matrix/vector dimensions do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A stage subproblem had no feasible point. Violates the relatively
    /// complete recourse assumption, so the run stops.
    #[error(
        "stage {stage} subproblem infeasible at the queried state; the model \
         violates relatively complete recourse"
    )]
    InfeasibleSubproblem { stage: usize },

    /// A stage subproblem was unbounded below. Violates the boundedness
    /// assumption on stage values.
    #[error("stage {stage} subproblem unbounded below; stage costs must bound the value")]
    UnboundedSubproblem { stage: usize },

    /// The mean-value recursion used to seed cost-to-go lower bounds failed.
    #[error("mean-value problem {kind} at stage {stage}; cannot seed cost-to-go bounds")]
    MeanValueBound { stage: usize, kind: &'static str },

    /// The simplex iteration cap was hit without reaching a conclusion.
    #[error("linear program did not converge within {iterations} simplex iterations")]
    LpIterationLimit { iterations: u64 },

    /// A basis factorization or similar numeric step failed.
    #[error("numerical failure in LP solve: {0}")]
    LpNumerical(String),

    /// The scenario tree is too large to expand into its extensive form.
    #[error("scenario tree too large for extensive form: {nodes} nodes exceeds cap {cap}")]
    TreeTooLarge { nodes: u128, cap: u64 },

    /// A cautious pass kept oscillating at one stage boundary.
    #[error(
        "cautious pass did not stabilize at stage boundary {boundary} within \
         {cap} inner rounds"
    )]
    CautiousCap { boundary: usize, cap: usize },

    /// Instance or config file could not be parsed.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    /// Instance file carries a format version this build does not read.
    #[error("unsupported instance format version {found:?} (expected {expected:?})")]
    Version { found: String, expected: String },

    /// Underlying I/O failure, annotated with the path involved.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Attach a path to a raw I/O error.
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Build a parse error for `path` at 1-based `line`.
    pub fn parse(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

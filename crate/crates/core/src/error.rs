use thiserror::Error;

/// Errors produced by model construction, parsing and analysis.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("line {line}: syntax error: {message}")]
    Syntax { line: usize, message: String },

    #[error("{}", match .line { Some(l) => format!("line {l}: invalid model: {message}"), None => format!("invalid model: {message}") })]
    Validation { line: Option<usize>, message: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("reaction {reaction} lacks reactants in the current population")]
    InsufficientReactants { reaction: usize },

    #[error("type `{0}` has no initial state")]
    MissingInitialState(String),

    #[error(
        "network is not certified complex-balanced (weakly reversible: {weakly_reversible}, deficiency: {deficiency})"
    )]
    NotComplexBalanced { weakly_reversible: bool, deficiency: usize },

    #[error("numerical method did not converge: {0}")]
    NonConvergence(String),

    #[error("reachable state space exceeds the cap of {cap} states")]
    ExplosionGuard { cap: usize },

    #[error("reachable class is reducible ({classes} strongly connected components)")]
    Reducible { classes: usize },

    #[error("argument out of range: {0}")]
    Range(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),
}

impl Error {
    pub(crate) fn validation(message: impl Into<String>) -> Self {
        Error::Validation {
            line: None,
            message: message.into(),
        }
    }

    /// True for failures caused by the model text or its contents.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Syntax { .. }
                | Error::Validation { .. }
                | Error::DimensionMismatch { .. }
                | Error::MissingInitialState(_)
                | Error::Range(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use std::fmt;

use thiserror::Error;

use crate::expr::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Location and cause of a non-finite or undefined evaluation.
///
/// Operators fill in `component`; the system layer adds `regime`, and
/// simulation adds `step`.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericalError {
    pub regime: Option<usize>,
    pub component: Option<usize>,
    pub step: Option<usize>,
    pub reason: String,
}

impl NumericalError {
    pub fn new(reason: impl Into<String>) -> Self {
        Self {
            regime: None,
            component: None,
            step: None,
            reason: reason.into(),
        }
    }

    pub fn in_component(mut self, component: usize) -> Self {
        self.component.get_or_insert(component);
        self
    }

    pub fn in_regime(mut self, regime: usize) -> Self {
        self.regime.get_or_insert(regime);
        self
    }

    pub fn at_step(mut self, step: usize) -> Self {
        self.step.get_or_insert(step);
        self
    }
}

impl fmt::Display for NumericalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("numerical failure")?;
        if let Some(step) = self.step {
            write!(f, " at step {step}")?;
        }
        if let Some(regime) = self.regime {
            write!(f, " in regime {regime}")?;
        }
        if let Some(component) = self.component {
            write!(f, " (component {component})")?;
        }
        write!(f, ": {}", self.reason)
    }
}

impl std::error::Error for NumericalError {}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error(transparent)]
    Numerical(#[from] NumericalError),

    #[error("regime index {index} out of range ({count} regimes)")]
    UnknownRegime { index: usize, count: usize },

    #[error("switching signal exhausted: explicit word has {len} entries but horizon is {horizon}")]
    SignalExhausted { len: usize, horizon: usize },

    #[error("regime word must be non-empty")]
    EmptyWord,

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("variable x{index} out of range for dimension {dimension}")]
    VariableIndex { index: usize, dimension: usize },

    #[error("I - A is singular: no unique fixed point")]
    NoUniqueFixedPoint,

    #[error("every one of {samples} sample points failed to evaluate")]
    Sampling { samples: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("every requested analysis failed: {}", .0.join("; "))]
    AllAnalysesFailed(Vec<String>),
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }
}

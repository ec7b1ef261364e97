use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, NumericalError, Result};

/// A point in ℝⁿ with every component finite and n ≥ 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct StateVector(Vec<f64>);

impl StateVector {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("state vector", "dimension must be at least 1"));
        }
        if let Some(i) = components.iter().position(|v| !v.is_finite()) {
            return Err(NumericalError::new("non-finite state component").in_component(i).into());
        }
        Ok(StateVector(components))
    }

    pub fn zeros(n: usize) -> Self {
        StateVector(vec![0.0; n.max(1)])
    }

    /// Caller guarantees finiteness (operator outputs are checked).
    pub(crate) fn from_finite(components: Vec<f64>) -> Self {
        debug_assert!(components.iter().all(|v| v.is_finite()));
        StateVector(components)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// `‖self − other‖∞`.
    pub fn distance_inf(&self, other: &[f64]) -> f64 {
        self.0.iter().zip(other).fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }
}

impl Deref for StateVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for StateVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        StateVector::new(v)
    }
}

impl From<StateVector> for Vec<f64> {
    fn from(s: StateVector) -> Vec<f64> {
        s.0
    }
}

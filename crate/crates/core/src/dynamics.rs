//! Regime-indexed stepping, trajectories and ordered composition.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::operator::RegimeOperator;
use crate::signal::SwitchingSignal;
use crate::state::StateVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RegimeId(pub usize);

impl fmt::Display for RegimeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A finite family of propagation operators on ℝⁿ, one per labelled regime.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeSystem {
    dimension: usize,
    labels: Vec<String>,
    operators: Vec<RegimeOperator>,
}

impl RegimeSystem {
    pub fn new(regimes: Vec<(String, RegimeOperator)>) -> Result<Self> {
        let Some((_, first)) = regimes.first() else {
            return Err(Error::invalid("regime system", "needs at least one regime"));
        };
        let dimension = first.dimension();
        if dimension == 0 {
            return Err(Error::invalid("regime system", "dimension must be at least 1"));
        }
        let mut labels = Vec::with_capacity(regimes.len());
        let mut operators = Vec::with_capacity(regimes.len());
        for (label, op) in regimes {
            if op.dimension() != dimension {
                return Err(Error::Dimension {
                    expected: dimension,
                    found: op.dimension(),
                });
            }
            if label.is_empty() {
                return Err(Error::invalid("regime system", "regime labels must be non-empty"));
            }
            if labels.contains(&label) {
                return Err(Error::invalid(
                    "regime system",
                    format!("duplicate regime label `{label}`"),
                ));
            }
            labels.push(label);
            operators.push(op);
        }
        Ok(RegimeSystem {
            dimension,
            labels,
            operators,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn regime_count(&self) -> usize {
        self.operators.len()
    }

    pub fn regime_ids(&self) -> impl Iterator<Item = RegimeId> {
        (0..self.operators.len()).map(RegimeId)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, id: RegimeId) -> &str {
        &self.labels[id.0]
    }

    pub fn id_of(&self, label: &str) -> Option<RegimeId> {
        self.labels.iter().position(|l| l == label).map(RegimeId)
    }

    pub fn operators(&self) -> &[RegimeOperator] {
        &self.operators
    }

    pub fn operator(&self, id: RegimeId) -> Result<&RegimeOperator> {
        self.operators.get(id.0).ok_or(Error::UnknownRegime {
            index: id.0,
            count: self.operators.len(),
        })
    }

    pub fn check_state(&self, x: &StateVector) -> Result<()> {
        if x.len() != self.dimension {
            return Err(Error::Dimension {
                expected: self.dimension,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// `F_regime(x)`.
    pub fn step(&self, regime: RegimeId, x: &StateVector) -> Result<StateVector> {
        let op = self.operator(regime)?;
        self.check_state(x)?;
        op.apply(x).map_err(|e| match e {
            Error::Numerical(n) => Error::Numerical(n.in_regime(regime.0)),
            other => other,
        })
    }

    pub fn simulate(&self, signal: &SwitchingSignal, x0: &StateVector, horizon: usize) -> Result<Trajectory> {
        self.check_state(x0)?;
        signal.validate(self.regime_count())?;
        let regimes = signal.regimes(horizon)?;
        self.run_word(&regimes, x0)
    }

    /// Apply `word` in order starting from `x0`.
    pub fn run_word(&self, word: &[RegimeId], x0: &StateVector) -> Result<Trajectory> {
        self.check_state(x0)?;
        let mut states = Vec::with_capacity(word.len() + 1);
        states.push(x0.clone());
        for (t, &regime) in word.iter().enumerate() {
            let next = self.step(regime, &states[t]).map_err(|e| match e {
                Error::Numerical(n) => Error::Numerical(n.at_step(t)),
                other => other,
            })?;
            states.push(next);
        }
        Ok(Trajectory {
            states,
            regimes: word.to_vec(),
        })
    }

    /// The single operator `F_{w_k} ∘ ⋯ ∘ F_{w_1}` for `word = (w_1, …, w_k)`.
    ///
    /// All-affine words collapse to one affine map; anything else becomes a
    /// [`RegimeOperator::Composition`].
    pub fn compose(&self, word: &[RegimeId]) -> Result<RegimeOperator> {
        let Some(&first) = word.first() else {
            return Err(Error::EmptyWord);
        };
        let factors = word.iter().map(|&id| self.operator(id)).collect::<Result<Vec<_>>>()?;
        if word.len() == 1 {
            return Ok(self.operator(first)?.clone());
        }
        if factors.iter().all(|op| op.is_affine()) {
            let n = self.dimension;
            let mut matrix = Matrix::identity(n, n);
            let mut offset = vec![0.0; n];
            for op in factors {
                let RegimeOperator::Affine { matrix: a, offset: c } = op else {
                    unreachable!()
                };
                offset = (0..n)
                    .map(|i| a.row(i).iter().zip(&offset).map(|(x, y)| x * y).sum::<f64>() + c[i])
                    .collect();
                matrix = a * matrix;
            }
            return RegimeOperator::affine(matrix, offset);
        }
        let mut parts = Vec::with_capacity(factors.len());
        for op in factors {
            match op {
                RegimeOperator::Composition(inner) => parts.extend(inner.iter().cloned()),
                other => parts.push(other.clone()),
            }
        }
        Ok(RegimeOperator::Composition(parts))
    }
}

/// States `x_0 … x_T` and the regimes `s_0 … s_{T−1}` that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<StateVector>,
    pub regimes: Vec<RegimeId>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.regimes.len()
    }

    pub fn last(&self) -> &StateVector {
        self.states.last().expect("trajectory holds at least x0")
    }

    /// Index of the first transition that `step` does not reproduce exactly.
    pub fn first_replay_mismatch(&self, system: &RegimeSystem) -> Option<usize> {
        if self.states.len() != self.regimes.len() + 1 {
            return Some(self.regimes.len().min(self.states.len()));
        }
        self.regimes
            .iter()
            .enumerate()
            .find_map(|(t, &r)| match system.step(r, &self.states[t]) {
                Ok(next) if next == self.states[t + 1] => None,
                _ => Some(t),
            })
    }

    /// `‖x_t − x*‖∞` for every t.
    pub fn deviations(&self, x_star: &[f64]) -> Vec<f64> {
        self.states.iter().map(|s| s.distance_inf(x_star)).collect()
    }
}

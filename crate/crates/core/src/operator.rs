//! Regime propagation operators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, NumericalError, Result};
use crate::expr::{parse_expression, Expr};
use crate::linalg::Matrix;
use crate::state::StateVector;

/// Which of the two collateral/borrowing laws of motion applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, schemars::JsonSchema)]
pub enum Side {
    /// Normal financial conditions: borrowing feeds asset prices.
    N,
    /// Constrained conditions: asset prices feed borrowing capacity.
    C,
}

/// Parameters of the two-variable collateral/borrowing model with state
/// `(q, b)` (collateral value, borrowing capacity).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct CollateralParams {
    pub alpha: f64,
    pub beta: f64,
    pub mu: f64,
    pub nu: f64,
    pub q_bar: f64,
    pub b_bar: f64,
}

impl CollateralParams {
    /// α = β = 0.8, μ = ν = 1.6, q̄ = b̄ = 0.2; common fixed point (1, 1).
    pub const REFERENCE: CollateralParams = CollateralParams {
        alpha: 0.8,
        beta: 0.8,
        mu: 1.6,
        nu: 1.6,
        q_bar: 0.2,
        b_bar: 0.2,
    };

    pub fn validate(&self) -> Result<()> {
        let all = [self.alpha, self.beta, self.mu, self.nu, self.q_bar, self.b_bar];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("collateral parameters", "all parameters must be finite"));
        }
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if !unit(self.alpha) || !unit(self.beta) {
            return Err(Error::invalid(
                "collateral parameters",
                "alpha and beta must lie in (0, 1)",
            ));
        }
        if self.q_bar <= 0.0 || self.b_bar <= 0.0 {
            return Err(Error::invalid(
                "collateral parameters",
                "q_bar and b_bar must be positive",
            ));
        }
        if self.mu < 0.0 || self.nu < 0.0 {
            return Err(Error::invalid(
                "collateral parameters",
                "mu and nu must be non-negative",
            ));
        }
        Ok(())
    }

    /// `(q̄/(1−α), b̄/(1−β))`.
    pub fn steady_state(&self) -> (f64, f64) {
        (self.q_bar / (1.0 - self.alpha), self.b_bar / (1.0 - self.beta))
    }
}

/// One output expression per state component.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionMap {
    components: Vec<Expr>,
    sources: Vec<String>,
}

impl ExpressionMap {
    pub fn parse<S: AsRef<str>>(components: &[S]) -> Result<Self> {
        let n = components.len();
        if n == 0 {
            return Err(Error::invalid("expression map", "needs at least one component"));
        }
        let trees = components
            .iter()
            .map(|text| parse_expression(text.as_ref(), n))
            .collect::<Result<Vec<_>>>()?;
        Ok(ExpressionMap {
            components: trees,
            sources: components.iter().map(|s| s.as_ref().to_string()).collect(),
        })
    }

    pub fn from_trees(components: Vec<Expr>) -> Result<Self> {
        let n = components.len();
        if n == 0 {
            return Err(Error::invalid("expression map", "needs at least one component"));
        }
        for e in &components {
            if let Some(index) = e.max_variable().filter(|&i| i >= n) {
                return Err(Error::VariableIndex { index, dimension: n });
            }
        }
        let sources = components.iter().map(|e| e.to_string()).collect();
        Ok(ExpressionMap { components, sources })
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    /// The text each component was parsed from.
    pub fn sources(&self) -> &[String] {
        &self.sources
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RegimeOperator {
    /// `x ↦ A x + c`.
    Affine {
        matrix: Matrix,
        offset: Vec<f64>,
    },
    Collateral {
        params: CollateralParams,
        side: Side,
    },
    Expression(ExpressionMap),
    /// Functional composition; factors are listed in application order.
    Composition(Vec<RegimeOperator>),
}

/// Jacobian together with a flag raised when the point sits at (or within
/// one probe step of) a kink of `abs`, `min` or `max`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    pub matrix: Matrix,
    pub nonsmooth: bool,
}

impl RegimeOperator {
    pub fn affine(matrix: Matrix, offset: Vec<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::invalid(
                "affine operator",
                format!("matrix must be square, got {}x{}", matrix.nrows(), matrix.ncols()),
            ));
        }
        if matrix.nrows() == 0 {
            return Err(Error::invalid("affine operator", "dimension must be at least 1"));
        }
        if offset.len() != matrix.nrows() {
            return Err(Error::Dimension {
                expected: matrix.nrows(),
                found: offset.len(),
            });
        }
        if matrix.iter().chain(offset.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("affine operator", "entries must be finite"));
        }
        Ok(RegimeOperator::Affine { matrix, offset })
    }

    pub fn linear(matrix: Matrix) -> Result<Self> {
        let n = matrix.nrows();
        Self::affine(matrix, vec![0.0; n])
    }

    pub fn collateral(params: CollateralParams, side: Side) -> Result<Self> {
        params.validate()?;
        Ok(RegimeOperator::Collateral { params, side })
    }

    pub fn expression<S: AsRef<str>>(components: &[S]) -> Result<Self> {
        ExpressionMap::parse(components).map(RegimeOperator::Expression)
    }

    pub fn dimension(&self) -> usize {
        match self {
            RegimeOperator::Affine { offset, .. } => offset.len(),
            RegimeOperator::Collateral { .. } => 2,
            RegimeOperator::Expression(map) => map.components.len(),
            RegimeOperator::Composition(parts) => parts.first().map_or(0, Self::dimension),
        }
    }

    pub fn is_affine(&self) -> bool {
        matches!(self, RegimeOperator::Affine { .. })
    }

    pub fn apply(&self, x: &StateVector) -> Result<StateVector> {
        self.check_dimension(x.len())?;
        let out = self.apply_raw(x)?;
        Ok(StateVector::from_finite(out))
    }

    fn check_dimension(&self, found: usize) -> Result<()> {
        let expected = self.dimension();
        if expected != found {
            return Err(Error::Dimension { expected, found });
        }
        Ok(())
    }

    /// Evaluate on a raw slice; every returned component is finite.
    pub(crate) fn apply_raw(&self, x: &[f64]) -> Result<Vec<f64>, NumericalError> {
        let out = match self {
            RegimeOperator::Affine { matrix, offset } => (0..offset.len())
                .map(|i| {
                    let row: f64 = matrix.row(i).iter().zip(x).map(|(a, v)| a * v).sum();
                    row + offset[i]
                })
                .collect(),
            RegimeOperator::Collateral { params: p, side } => {
                let (q, b) = (x[0], x[1]);
                let (q_star, b_star) = p.steady_state();
                match side {
                    Side::N => {
                        let pull = saturation(b, 0)? - b_star / (1.0 + b_star);
                        vec![p.alpha * q + p.mu * pull + p.q_bar, p.beta * b + p.b_bar]
                    }
                    Side::C => {
                        let pull = saturation(q, 1)? - q_star / (1.0 + q_star);
                        vec![p.alpha * q + p.q_bar, p.beta * b + p.nu * pull + p.b_bar]
                    }
                }
            }
            RegimeOperator::Expression(map) => map
                .components
                .iter()
                .enumerate()
                .map(|(i, e)| e.eval(x).map_err(|err| NumericalError::new(err.0).in_component(i)))
                .collect::<Result<Vec<_>, _>>()?,
            RegimeOperator::Composition(parts) => {
                let mut state = x.to_vec();
                for part in parts {
                    state = part.apply_raw(&state)?;
                }
                state
            }
        };
        if let Some(i) = out.iter().position(|v| !v.is_finite()) {
            return Err(NumericalError::new("non-finite output").in_component(i));
        }
        Ok(out)
    }

    /// Analytic Jacobian where available, central finite differences for
    /// expression maps.
    pub fn jacobian(&self, x: &StateVector) -> Result<Jacobian> {
        self.check_dimension(x.len())?;
        self.jacobian_raw(x)
    }

    fn jacobian_raw(&self, x: &[f64]) -> Result<Jacobian> {
        let smooth = |matrix| Jacobian {
            matrix,
            nonsmooth: false,
        };
        match self {
            RegimeOperator::Affine { matrix, .. } => Ok(smooth(matrix.clone())),
            RegimeOperator::Collateral { params: p, side } => {
                let (q, b) = (x[0], x[1]);
                let m = match side {
                    Side::N => {
                        if 1.0 + b == 0.0 {
                            return Err(NumericalError::new("division by zero").in_component(0).into());
                        }
                        Matrix::from_row_slice(2, 2, &[p.alpha, p.mu / ((1.0 + b) * (1.0 + b)), 0.0, p.beta])
                    }
                    Side::C => {
                        if 1.0 + q == 0.0 {
                            return Err(NumericalError::new("division by zero").in_component(1).into());
                        }
                        Matrix::from_row_slice(2, 2, &[p.alpha, 0.0, p.nu / ((1.0 + q) * (1.0 + q)), p.beta])
                    }
                };
                Ok(smooth(m))
            }
            RegimeOperator::Expression(map) => {
                let matrix = finite_difference_raw(self, x)?;
                let nonsmooth = map.components.iter().any(|e| e.has_kinks()) && near_kink(map, x)?;
                Ok(Jacobian { matrix, nonsmooth })
            }
            RegimeOperator::Composition(parts) => {
                let n = x.len();
                let mut state = x.to_vec();
                let mut acc = Matrix::identity(n, n);
                let mut nonsmooth = false;
                for part in parts {
                    let j = part.jacobian_raw(&state)?;
                    nonsmooth |= j.nonsmooth;
                    acc = j.matrix * acc;
                    state = part.apply_raw(&state)?;
                }
                Ok(Jacobian { matrix: acc, nonsmooth })
            }
        }
    }
}

fn saturation(v: f64, component: usize) -> Result<f64, NumericalError> {
    if 1.0 + v == 0.0 {
        return Err(NumericalError::new("division by zero").in_component(component));
    }
    Ok(v / (1.0 + v))
}

/// Per-coordinate step `max(1e-6, 1e-6·|x_i|)`.
pub fn fd_step(xi: f64) -> f64 {
    (1e-6 * xi.abs()).max(1e-6)
}

/// Central-difference Jacobian of any operator.
pub fn finite_difference_jacobian(op: &RegimeOperator, x: &StateVector) -> Result<Matrix> {
    op.check_dimension(x.len())?;
    finite_difference_raw(op, x)
}

fn finite_difference_raw(op: &RegimeOperator, x: &[f64]) -> Result<Matrix> {
    let n = x.len();
    let mut jac = Matrix::zeros(n, n);
    let mut probe = x.to_vec();
    for j in 0..n {
        let h = fd_step(x[j]);
        probe[j] = x[j] + h;
        let plus = op.apply_raw(&probe)?;
        probe[j] = x[j] - h;
        let minus = op.apply_raw(&probe)?;
        probe[j] = x[j];
        for i in 0..n {
            jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

fn near_kink(map: &ExpressionMap, x: &[f64]) -> Result<bool> {
    let signature = |p: &[f64]| -> Result<Vec<i8>> {
        let mut branches = Vec::new();
        for (i, e) in map.components.iter().enumerate() {
            e.eval_with_branches(p, &mut branches)
                .map_err(|err| NumericalError::new(err.0).in_component(i))?;
        }
        Ok(branches)
    };
    let center = signature(x)?;
    if center.contains(&0) {
        return Ok(true);
    }
    let mut probe = x.to_vec();
    for j in 0..x.len() {
        let h = fd_step(x[j]);
        for shifted in [x[j] + h, x[j] - h] {
            probe[j] = shifted;
            if signature(&probe)? != center {
                return Ok(true);
            }
        }
        probe[j] = x[j];
    }
    Ok(false)
}

//! Fixed points, linearization into the Jacobian family and finite-word
//! growth rates.

use serde::{Deserialize, Serialize};

use crate::dynamics::{RegimeId, RegimeSystem};
use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, spectral_radius, Matrix, Spectrum};
use crate::operator::RegimeOperator;
use crate::state::StateVector;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100;
/// Step halvings tried per Newton iteration before giving up.
pub const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixedPointMethod {
    /// `(I − A)⁻¹ c`.
    ClosedForm,
    DampedNewton,
    /// The starting point already satisfied the tolerance.
    Initial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointResult {
    pub point: StateVector,
    /// `‖F(x*) − x*‖∞`, maximised over regimes for common fixed points.
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
    pub method: FixedPointMethod,
    /// Regime with the largest residual (common fixed points only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worst_regime: Option<RegimeId>,
}

fn residual(op: &RegimeOperator, x: &StateVector) -> Result<f64> {
    Ok(op.apply(x)?.distance_inf(x))
}

/// Fixed point of a single operator.
///
/// Affine maps use the closed form and fail with
/// [`Error::NoUniqueFixedPoint`] when `I − A` is singular. Everything else
/// runs damped Newton on `G(x) = F(x) − x`; running out of iterations is
/// reported through `converged = false`, not an error.
pub fn fixed_point(op: &RegimeOperator, x_init: &StateVector, options: FixedPointOptions) -> Result<FixedPointResult> {
    if options.tol.is_nan() || options.tol <= 0.0 {
        return Err(Error::invalid("fixed-point tolerance", "must be positive"));
    }
    if op.dimension() != x_init.len() {
        return Err(Error::Dimension {
            expected: op.dimension(),
            found: x_init.len(),
        });
    }
    if let RegimeOperator::Affine { matrix, offset } = op {
        let n = offset.len();
        let system = Matrix::identity(n, n) - matrix;
        let point = solve_nonsingular(system, offset).ok_or(Error::NoUniqueFixedPoint)?;
        let point = StateVector::new(point)?;
        let residual = residual(op, &point)?;
        return Ok(FixedPointResult {
            point,
            residual,
            converged: residual <= options.tol,
            iterations: 0,
            method: FixedPointMethod::ClosedForm,
            worst_regime: None,
        });
    }
    newton(op, x_init, options)
}

fn newton(op: &RegimeOperator, x_init: &StateVector, options: FixedPointOptions) -> Result<FixedPointResult> {
    let n = x_init.len();
    let mut x = x_init.clone();
    let mut image = op.apply(&x)?;
    let mut r = image.distance_inf(&x);
    let mut iterations = 0;
    while r > options.tol && iterations < options.max_iter {
        let jac = op.jacobian(&x)?.matrix - Matrix::identity(n, n);
        let g: Vec<f64> = image.iter().zip(x.iter()).map(|(fx, xi)| xi - fx).collect();
        let Some(delta) = solve_nonsingular(jac, &g) else {
            break;
        };
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = x.iter().zip(&delta).map(|(xi, d)| xi + t * d).collect();
            if let Ok(trial) = StateVector::new(trial) {
                if let Ok(fx) = op.apply(&trial) {
                    let rt = fx.distance_inf(&trial);
                    if rt < r {
                        accepted = Some((trial, fx, rt));
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        let Some((next, fx, rt)) = accepted else {
            break;
        };
        x = next;
        image = fx;
        r = rt;
        iterations += 1;
    }
    Ok(FixedPointResult {
        point: x,
        residual: r,
        converged: r <= options.tol,
        iterations,
        method: FixedPointMethod::DampedNewton,
        worst_regime: None,
    })
}

/// Solve `m x = rhs` unless `m` is numerically singular.
fn solve_nonsingular(m: Matrix, rhs: &[f64]) -> Option<Vec<f64>> {
    let n = m.nrows();
    let lu = m.full_piv_lu();
    let u = lu.u();
    let diag: Vec<f64> = (0..n).map(|i| u[(i, i)].abs()).collect();
    let largest = diag.iter().copied().fold(0.0, f64::max);
    let smallest = diag.iter().copied().fold(f64::INFINITY, f64::min);
    if largest == 0.0 || smallest <= (n as f64) * f64::EPSILON * largest {
        return None;
    }
    let b = nalgebra::DVector::from_column_slice(rhs);
    let sol = lu.solve(&b)?;
    sol.iter().all(|v| v.is_finite()).then(|| sol.iter().copied().collect())
}

/// A state fixed by every regime.
///
/// Returns `x_init` unchanged if it already satisfies every regime within
/// `tol`. Otherwise solves under regime 0 and verifies the other regimes;
/// verification failure yields `converged = false` with `worst_regime` set.
pub fn common_fixed_point(
    system: &RegimeSystem,
    x_init: &StateVector,
    options: FixedPointOptions,
) -> Result<FixedPointResult> {
    system.check_state(x_init)?;
    let tol = options.tol;
    let (res, worst) = max_residual(system, x_init)?;
    if res <= tol {
        return Ok(FixedPointResult {
            point: x_init.clone(),
            residual: res,
            converged: true,
            iterations: 0,
            method: FixedPointMethod::Initial,
            worst_regime: Some(worst),
        });
    }
    let base = fixed_point(&system.operators()[0], x_init, options)?;
    let (res, worst) = max_residual(system, &base.point)?;
    Ok(FixedPointResult {
        converged: base.converged && res <= tol,
        residual: res,
        worst_regime: Some(worst),
        ..base
    })
}

fn max_residual(system: &RegimeSystem, x: &StateVector) -> Result<(f64, RegimeId)> {
    let mut best = (f64::NEG_INFINITY, RegimeId(0));
    for id in system.regime_ids() {
        let r = system.step(id, x)?.distance_inf(x);
        if r > best.0 {
            best = (r, id);
        }
    }
    Ok(best)
}

/// The Jacobian family `{A_s = DF_s(x*)}` with per-regime spectra.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalLinearization {
    pub point: StateVector,
    pub matrices: Vec<Matrix>,
    pub spectra: Vec<Spectrum>,
    /// Raised for regimes whose Jacobian was taken at a kink.
    pub nonsmooth: Vec<bool>,
}

pub fn linearize(system: &RegimeSystem, x_star: &StateVector) -> Result<LocalLinearization> {
    system.check_state(x_star)?;
    let mut matrices = Vec::with_capacity(system.regime_count());
    let mut spectra = Vec::with_capacity(system.regime_count());
    let mut nonsmooth = Vec::with_capacity(system.regime_count());
    for (s, op) in system.operators().iter().enumerate() {
        let jac = op.jacobian(x_star).map_err(|e| match e {
            Error::Numerical(n) => Error::Numerical(n.in_regime(s)),
            other => other,
        })?;
        spectra.push(eigenvalues(&jac.matrix).map_err(|e| match e {
            Error::Numerical(n) => Error::Numerical(n.in_regime(s)),
            other => other,
        })?);
        matrices.push(jac.matrix);
        nonsmooth.push(jac.nonsmooth);
    }
    Ok(LocalLinearization {
        point: x_star.clone(),
        matrices,
        spectra,
        nonsmooth,
    })
}

impl LocalLinearization {
    pub fn word_product(&self, word: &[RegimeId]) -> Result<Matrix> {
        word_product(&self.matrices, word)
    }

    pub fn growth_factor(&self, word: &[RegimeId]) -> Result<f64> {
        growth_factor(&self.matrices, word)
    }
}

/// `A_{w_k} ⋯ A_{w_1}` for `word = (w_1, …, w_k)` (first letter applied first).
pub fn word_product(family: &[Matrix], word: &[RegimeId]) -> Result<Matrix> {
    let Some(first) = word.first() else {
        return Err(Error::EmptyWord);
    };
    let get = |id: &RegimeId| {
        family.get(id.0).ok_or(Error::UnknownRegime {
            index: id.0,
            count: family.len(),
        })
    };
    let mut acc = get(first)?.clone();
    for id in &word[1..] {
        acc = get(id)? * acc;
    }
    Ok(acc)
}

/// `ρ(Π_w)^{1/|w|}`: per-step growth under periodic repetition of `word`.
pub fn growth_factor(family: &[Matrix], word: &[RegimeId]) -> Result<f64> {
    let product = word_product(family, word)?;
    Ok(spectral_radius(&product)?.powf(1.0 / word.len() as f64))
}

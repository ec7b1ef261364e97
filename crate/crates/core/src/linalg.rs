//! Dense linear algebra helpers: induced norms, commutators and a real
//! eigenvalue solver.
//!
//! Eigenvalues of 1×1 and 2×2 matrices come straight from the
//! characteristic polynomial. Larger matrices are balanced, reduced to upper
//! Hessenberg form by stabilized elimination, and then deflated with the
//! Francis double-shift QR iteration. The iteration budget is
//! [`QR_SWEEP_BUDGET`] sweeps per eigenvalue; exceeding it is reported as a
//! [`NumericalError`].

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, NumericalError, Result};

pub type Matrix = DMatrix<f64>;

/// Maximum QR sweeps spent isolating a single eigenvalue (or pair).
pub const QR_SWEEP_BUDGET: usize = 60;

/// Sub-multiplicative induced matrix norm used by the JSR routines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize, schemars::JsonSchema)]
pub enum MatrixNorm {
    /// Maximum absolute row sum.
    #[default]
    #[serde(rename = "inf", alias = "induced-inf")]
    InducedInf,
    /// Largest singular value.
    #[serde(rename = "2", alias = "induced-2")]
    Induced2,
}

impl MatrixNorm {
    pub fn eval(self, m: &Matrix) -> f64 {
        match self {
            MatrixNorm::InducedInf => inf_norm(m),
            MatrixNorm::Induced2 => two_norm(m),
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            MatrixNorm::InducedInf => "inf",
            MatrixNorm::Induced2 => "2",
        }
    }
}

pub fn inf_norm(m: &Matrix) -> f64 {
    m.row_iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn vec_inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub fn two_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().iter().copied().fold(0.0, f64::max)
}

/// `‖AB − BA‖∞`.
pub fn commutator_norm(a: &Matrix, b: &Matrix) -> Result<f64> {
    check_square(a)?;
    if a.shape() != b.shape() {
        return Err(Error::Dimension {
            expected: a.nrows(),
            found: b.nrows(),
        });
    }
    Ok(inf_norm(&(a * b - b * a)))
}

pub(crate) fn check_square(m: &Matrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::invalid(
            "matrix",
            format!("expected square matrix, got {}x{}", m.nrows(), m.ncols()),
        ));
    }
    Ok(())
}

/// Convert row-major nested vectors into a matrix.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != m) {
        return Err(Error::Dimension {
            expected: m,
            found: bad.len(),
        });
    }
    Ok(Matrix::from_fn(n, m, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Eigenvalues of a real square matrix together with its spectral radius.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Sorted by decreasing modulus; conjugate pairs are adjacent with the
    /// positive imaginary part first.
    pub eigenvalues: Vec<Complex<f64>>,
    pub spectral_radius: f64,
}

impl Spectrum {
    fn from_values(mut values: Vec<Complex<f64>>) -> Self {
        values.sort_by(|a, b| {
            b.norm()
                .total_cmp(&a.norm())
                .then(b.re.total_cmp(&a.re))
                .then(b.im.total_cmp(&a.im))
        });
        let spectral_radius = values.iter().map(|z| z.norm()).fold(0.0, f64::max);
        Spectrum {
            eigenvalues: values,
            spectral_radius,
        }
    }
}

pub fn eigenvalues(m: &Matrix) -> Result<Spectrum> {
    check_square(m)?;
    if m.iter().any(|v| !v.is_finite()) {
        return Err(NumericalError::new("matrix has non-finite entries").into());
    }
    let values = match m.nrows() {
        0 => Vec::new(),
        1 => vec![Complex::new(m[(0, 0)], 0.0)],
        2 => eig2(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]).to_vec(),
        _ => hessenberg_qr(m)?,
    };
    Ok(Spectrum::from_values(values))
}

/// Spectral radius only; avoids sorting for the JSR hot loop.
pub fn spectral_radius(m: &Matrix) -> Result<f64> {
    check_square(m)?;
    match m.nrows() {
        0 => Ok(0.0),
        1 => Ok(m[(0, 0)].abs()),
        2 => {
            let [a, b] = eig2(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
            Ok(a.norm().max(b.norm()))
        }
        _ => eigenvalues(m).map(|s| s.spectral_radius),
    }
}

/// Roots of `λ² − (a+d)λ + (ad − bc)`.
fn eig2(a: f64, b: f64, c: f64, d: f64) -> [Complex<f64>; 2] {
    let mid = 0.5 * (a + d);
    let half_diff = 0.5 * (a - d);
    // Discriminant written to avoid cancellation in tr²/4 − det.
    let disc = half_diff * half_diff + b * c;
    if disc >= 0.0 {
        let s = disc.sqrt();
        let big = mid + s.copysign(mid);
        let det = a * d - b * c;
        let small = if big != 0.0 { det / big } else { mid - s.copysign(mid) };
        [Complex::new(big, 0.0), Complex::new(small, 0.0)]
    } else {
        let s = (-disc).sqrt();
        [Complex::new(mid, s), Complex::new(mid, -s)]
    }
}

fn hessenberg_qr(m: &Matrix) -> Result<Vec<Complex<f64>>> {
    let n = m.nrows();
    let mut a: Vec<Vec<f64>> = matrix_to_rows(m);
    balance(&mut a);
    reduce_to_hessenberg(&mut a);
    for (i, row) in a.iter_mut().enumerate() {
        for v in row.iter_mut().take(i.saturating_sub(1)) {
            *v = 0.0;
        }
    }
    let values = francis_qr(&mut a)?;
    debug_assert_eq!(values.len(), n);
    Ok(values)
}

/// Diagonal similarity scaling by powers of two so that row and column
/// norms are comparable. Exact in binary floating point.
#[allow(clippy::needless_range_loop)]
fn balance(a: &mut [Vec<f64>]) {
    const RADIX: f64 = 2.0;
    let sqrdx = RADIX * RADIX;
    let n = a.len();
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[j][i].abs();
                    r += a[i][j].abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut g = r / RADIX;
                let mut f = 1.0;
                let s = c + r;
                while c < g {
                    f *= RADIX;
                    c *= sqrdx;
                }
                g = r * RADIX;
                while c > g {
                    f /= RADIX;
                    c /= sqrdx;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    let g = 1.0 / f;
                    for v in a[i].iter_mut() {
                        *v *= g;
                    }
                    for row in a.iter_mut() {
                        row[i] *= f;
                    }
                }
            }
        }
    }
}

/// Gaussian elimination with pivoting to upper Hessenberg form.
#[allow(clippy::needless_range_loop)]
fn reduce_to_hessenberg(a: &mut [Vec<f64>]) {
    let n = a.len();
    for m in 1..n.saturating_sub(1) {
        let mut x = 0.0f64;
        let mut pivot = m;
        for (j, row) in a.iter().enumerate().skip(m) {
            if row[m - 1].abs() > x.abs() {
                x = row[m - 1];
                pivot = j;
            }
        }
        if pivot != m {
            a.swap(pivot, m);
            for row in a.iter_mut() {
                row.swap(pivot, m);
            }
        }
        if x != 0.0 {
            for i in (m + 1)..n {
                let mut y = a[i][m - 1];
                if y != 0.0 {
                    y /= x;
                    a[i][m - 1] = y;
                    for j in m..n {
                        a[i][j] -= y * a[m][j];
                    }
                    for row in a.iter_mut() {
                        row[m] += y * row[i];
                    }
                }
            }
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix (destroyed).
#[allow(clippy::many_single_char_names)]
fn francis_qr(a: &mut [Vec<f64>]) -> Result<Vec<Complex<f64>>> {
    let n = a.len() as isize;
    let mut out = vec![Complex::new(0.0, 0.0); n as usize];
    let at = |i: isize| i as usize;

    let mut anorm = 0.0;
    for i in 0..n {
        for j in (i - 1).max(0)..n {
            anorm += a[at(i)][at(j)].abs();
        }
    }

    let (mut p, mut q, mut r) = (0.0f64, 0.0f64, 0.0f64);
    let (mut x, mut y, mut z, mut w);
    let mut t = 0.0;
    let mut nn = n - 1;
    while nn >= 0 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l > 0 {
                let mut s = a[at(l - 1)][at(l - 1)].abs() + a[at(l)][at(l)].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[at(l)][at(l - 1)].abs() <= f64::EPSILON * s {
                    a[at(l)][at(l - 1)] = 0.0;
                    break;
                }
                l -= 1;
            }
            x = a[at(nn)][at(nn)];
            if l == nn {
                out[at(nn)] = Complex::new(x + t, 0.0);
                nn -= 1;
                break;
            }
            y = a[at(nn - 1)][at(nn - 1)];
            w = a[at(nn)][at(nn - 1)] * a[at(nn - 1)][at(nn)];
            if l == nn - 1 {
                p = 0.5 * (y - x);
                q = p * p + w;
                z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    z = p + z.copysign(p);
                    out[at(nn - 1)] = Complex::new(x + z, 0.0);
                    out[at(nn)] = Complex::new(if z != 0.0 { x - w / z } else { x + z }, 0.0);
                } else {
                    out[at(nn - 1)] = Complex::new(x + p, z);
                    out[at(nn)] = Complex::new(x + p, -z);
                }
                nn -= 2;
                break;
            }
            if its == QR_SWEEP_BUDGET {
                return Err(NumericalError::new(format!(
                    "QR iteration did not converge within {QR_SWEEP_BUDGET} sweeps"
                ))
                .into());
            }
            if its > 0 && its % 10 == 0 {
                // Exceptional shift.
                t += x;
                for i in 0..=nn {
                    a[at(i)][at(i)] -= x;
                }
                let s = a[at(nn)][at(nn - 1)].abs() + a[at(nn - 1)][at(nn - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            let mut m = nn - 2;
            while m >= l {
                z = a[at(m)][at(m)];
                r = x - z;
                let s = y - z;
                p = (r * s - w) / a[at(m + 1)][at(m)] + a[at(m)][at(m + 1)];
                q = a[at(m + 1)][at(m + 1)] - z - r - s;
                r = a[at(m + 2)][at(m + 1)];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[at(m)][at(m - 1)].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[at(m - 1)][at(m - 1)].abs() + z.abs() + a[at(m + 1)][at(m + 1)].abs());
                if u <= f64::EPSILON * v {
                    break;
                }
                m -= 1;
            }
            for i in m..(nn - 1) {
                a[at(i + 2)][at(i)] = 0.0;
                if i != m {
                    a[at(i + 2)][at(i - 1)] = 0.0;
                }
            }
            let mut k = m;
            while k < nn {
                if k != m {
                    p = a[at(k)][at(k - 1)];
                    q = a[at(k + 1)][at(k - 1)];
                    r = 0.0;
                    if k + 1 != nn {
                        r = a[at(k + 2)][at(k - 1)];
                    }
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = (p * p + q * q + r * r).sqrt().copysign(p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            a[at(k)][at(k - 1)] = -a[at(k)][at(k - 1)];
                        }
                    } else {
                        a[at(k)][at(k - 1)] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nn {
                        let mut pj = a[at(k)][at(j)] + q * a[at(k + 1)][at(j)];
                        if k + 1 != nn {
                            pj += r * a[at(k + 2)][at(j)];
                            a[at(k + 2)][at(j)] -= pj * z;
                        }
                        a[at(k + 1)][at(j)] -= pj * y;
                        a[at(k)][at(j)] -= pj * x;
                    }
                    let mmin = if nn < k + 3 { nn } else { k + 3 };
                    for i in l..=mmin {
                        let mut pi = x * a[at(i)][at(k)] + y * a[at(i)][at(k + 1)];
                        if k + 1 != nn {
                            pi += z * a[at(i)][at(k + 2)];
                            a[at(i)][at(k + 2)] -= pi * r;
                        }
                        a[at(i)][at(k + 1)] -= pi * q;
                        a[at(i)][at(k)] -= pi;
                    }
                }
                k += 1;
            }
        }
    }
    Ok(out)
}

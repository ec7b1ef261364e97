//! Brute-force reference computations that share no code with the library's
//! eigenvalue or JSR routines.

#![allow(dead_code)]

use nalgebra::DMatrix;

/// Spectral radius through nalgebra's Schur-based eigenvalues.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Exhaustive evaluation of every word up to `depth`.
pub struct Exhaustive {
    /// `max_{|w| ≤ k} ρ(Π_w)^{1/|w|}` at index k − 1.
    pub lower_by_depth: Vec<f64>,
    /// `max_{|w| = k} min_{j ≤ k} ‖Π_{w[..j]}‖^{1/j}` at index k − 1.
    pub prefix_upper_by_depth: Vec<f64>,
    /// `max_{|w| = k} ‖Π_w‖^{1/k}` at index k − 1.
    pub gelfand_by_depth: Vec<f64>,
}

impl Exhaustive {
    pub fn run(family: &[DMatrix<f64>], depth: usize) -> Self {
        let mut out = Exhaustive {
            lower_by_depth: vec![f64::NEG_INFINITY; depth],
            prefix_upper_by_depth: vec![0.0; depth],
            gelfand_by_depth: vec![0.0; depth],
        };
        let n = family[0].nrows();
        let mut stack: Vec<(DMatrix<f64>, usize, f64)> = vec![(DMatrix::identity(n, n), 0, f64::INFINITY)];
        while let Some((p, k, prefix_min)) = stack.pop() {
            for a in family {
                let q = a * &p;
                let len = k + 1;
                let inv = 1.0 / len as f64;
                let rho = spectral_radius(&q).powf(inv);
                let nr = inf_norm(&q).powf(inv);
                let pm = prefix_min.min(nr);
                out.lower_by_depth[len - 1] = out.lower_by_depth[len - 1].max(rho);
                out.prefix_upper_by_depth[len - 1] = out.prefix_upper_by_depth[len - 1].max(pm);
                out.gelfand_by_depth[len - 1] = out.gelfand_by_depth[len - 1].max(nr);
                if len < depth {
                    stack.push((q, len, pm));
                }
            }
        }
        for k in 1..depth {
            out.lower_by_depth[k] = out.lower_by_depth[k].max(out.lower_by_depth[k - 1]);
        }
        out
    }

    pub fn lower(&self) -> f64 {
        *self.lower_by_depth.last().unwrap()
    }

    /// `min_k max(lower_k, prefix_upper_k)`.
    pub fn upper(&self) -> f64 {
        self.lower_by_depth
            .iter()
            .zip(&self.prefix_upper_by_depth)
            .map(|(l, u)| l.max(*u))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn gelfand_upper(&self) -> f64 {
        self.gelfand_by_depth.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

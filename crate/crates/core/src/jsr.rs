//! Joint spectral radius bounds for a finite matrix family.
//!
//! Lower bounds come from spectral radii of finite products,
//! `ρ(Π_w)^{1/|w|}`, which never exceed the JSR. Upper bounds come from
//! sub-multiplicative norms of products.
//!
//! [`jsr_bounds`] deepens level by level. A node `w` carries
//! `m(w) = min_{j ≤ |w|} ‖Π_{w[..j]}‖^{1/j}` over its prefixes, and the
//! depth-k upper bound is `max(lower, max_{|w| = k} m(w))`: any long
//! product splits greedily into blocks whose normalized norm is at most that
//! value. A node with `m(w) ≤ lower` cannot raise this bound, so it is not
//! extended. Some rotation of every word with `ρ^{1/|w|} > lower` has all of
//! its prefixes above `lower` and therefore survives, which keeps the lower
//! bound identical to exhaustive enumeration at the same depth.
//!
//! Products are renormalized by exact powers of two whenever their largest
//! entry leaves `[2^-256, 2^256]`, so long words never overflow.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{RegimeId, Trajectory};
use crate::error::{Error, Result};
use crate::linalg::{spectral_radius, Matrix, MatrixNorm};

pub const DEFAULT_BUDGET: usize = 1_000_000;
pub const DEFAULT_MAX_DEPTH: usize = 16;
pub const DEFAULT_TARGET_GAP: f64 = 1e-3;

const RESCALE_EXP: i32 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JsrOptions {
    pub target_gap: f64,
    pub max_depth: usize,
    pub budget: usize,
    pub norm: MatrixNorm,
}

impl Default for JsrOptions {
    fn default() -> Self {
        JsrOptions {
            target_gap: DEFAULT_TARGET_GAP,
            max_depth: DEFAULT_MAX_DEPTH,
            budget: DEFAULT_BUDGET,
            norm: MatrixNorm::InducedInf,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBound {
    pub value: f64,
    pub witness: Vec<RegimeId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsrBounds {
    pub lower: f64,
    pub upper: f64,
    /// Deepest level whose upper bound is accounted for.
    pub depth: usize,
    pub norm: MatrixNorm,
    /// Word attaining `lower`.
    pub witness_word: Vec<RegimeId>,
    pub products_evaluated: usize,
}

impl JsrBounds {
    pub fn gap(&self) -> f64 {
        self.upper - self.lower
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StabilityStatus {
    StableCertified,
    UnstableCertified,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub status: StabilityStatus,
    pub bounds: JsrBounds,
    /// Distance of the certifying bound from 1 (closest bound when
    /// inconclusive).
    pub margin: f64,
}

fn validate_family(family: &[Matrix]) -> Result<usize> {
    let Some(first) = family.first() else {
        return Err(Error::invalid("matrix family", "must be non-empty"));
    };
    let n = first.nrows();
    for m in family {
        if m.nrows() != m.ncols() || m.nrows() != n {
            return Err(Error::invalid(
                "matrix family",
                format!("all matrices must be {n}x{n}, found {}x{}", m.nrows(), m.ncols()),
            ));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("matrix family", "entries must be finite"));
        }
    }
    Ok(n)
}

/// A product stored as `m · 2^exp2`.
#[derive(Debug, Clone)]
struct ScaledProduct {
    m: Matrix,
    exp2: i64,
}

impl ScaledProduct {
    fn new(m: Matrix) -> Self {
        ScaledProduct { m, exp2: 0 }.renormalized()
    }

    fn then(&self, next: &Matrix) -> Self {
        ScaledProduct {
            m: next * &self.m,
            exp2: self.exp2,
        }
        .renormalized()
    }

    fn renormalized(mut self) -> Self {
        let largest = self.m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if largest == 0.0 {
            return self;
        }
        let e = largest.log2().floor() as i32;
        if e.abs() > RESCALE_EXP {
            self.m *= 2f64.powi(-e);
            self.exp2 += i64::from(e);
        }
        self
    }

    /// `(v · 2^exp2)^{1/k}` for a homogeneous degree-one quantity `v` of `m`.
    fn root(&self, v: f64, k: usize) -> f64 {
        if v == 0.0 {
            return 0.0;
        }
        let inv = 1.0 / k as f64;
        if self.exp2 == 0 {
            if k == 1 {
                v
            } else {
                v.powf(inv)
            }
        } else {
            ((v.ln() + self.exp2 as f64 * std::f64::consts::LN_2) * inv).exp()
        }
    }

    fn rho_root(&self, k: usize) -> Result<f64> {
        Ok(self.root(spectral_radius(&self.m)?, k))
    }

    fn norm_root(&self, norm: MatrixNorm, k: usize) -> f64 {
        self.root(norm.eval(&self.m), k)
    }
}

/// Relative width of the window in which lower-bound candidates tie.
const TIE_REL: f64 = 1e-13;

/// Lower-bound candidates that can still become the witness.
///
/// The witness is the shortest, then lexicographically smallest, word whose
/// value lies within [`TIE_REL`] of the maximum. The selection depends only
/// on the set of candidates seen, so parallel reductions are deterministic.
/// Entries are sorted by word preference with strictly increasing values;
/// anything dominated by a preferred word of at least the same value, or
/// fallen out of the window, is dropped.
#[derive(Debug, Clone, Default)]
struct Candidates(Vec<(f64, Vec<RegimeId>)>);

fn word_key(w: &[RegimeId]) -> (usize, &[RegimeId]) {
    (w.len(), w)
}

impl Candidates {
    fn max(&self) -> f64 {
        self.0.last().map_or(f64::NEG_INFINITY, |e| e.0)
    }

    fn floor(&self) -> f64 {
        let m = self.max();
        m - TIE_REL * m.abs()
    }

    fn insert(&mut self, value: f64, word: &[RegimeId]) {
        let key = word_key(word);
        let pos = self.0.partition_point(|e| word_key(&e.1) < key);
        if pos > 0 && self.0[pos - 1].0 >= value {
            return;
        }
        if pos < self.0.len() && self.0[pos].1 == word && self.0[pos].0 >= value {
            return;
        }
        let end = pos + self.0[pos..].iter().take_while(|e| e.0 <= value).count();
        self.0.splice(pos..end, std::iter::once((value, word.to_vec())));
        let floor = self.floor();
        let cut = self.0.partition_point(|e| e.0 < floor);
        if cut > 0 {
            self.0.drain(..cut);
        }
    }

    fn merge(mut self, other: Candidates) -> Candidates {
        for (v, w) in &other.0 {
            self.insert(*v, w);
        }
        self
    }

    fn choose(&self) -> (f64, Vec<RegimeId>) {
        let floor = self.floor();
        self.0
            .iter()
            .find(|e| e.0 >= floor)
            .cloned()
            .unwrap_or((f64::NEG_INFINITY, Vec::new()))
    }
}

/// Per-level maxima collected by the exhaustive depth-first walk.
struct Sweep {
    best: Candidates,
    /// `max_{|w| = k} ‖Π_w‖^{1/k}` at index `k − 1`.
    level_norm_max: Vec<f64>,
    products: usize,
}

impl Sweep {
    fn empty(depth: usize) -> Self {
        Sweep {
            best: Candidates::default(),
            level_norm_max: vec![0.0; depth],
            products: 0,
        }
    }

    fn merge(mut self, other: Sweep) -> Sweep {
        self.best = self.best.merge(other.best);
        for (a, b) in self.level_norm_max.iter_mut().zip(other.level_norm_max) {
            *a = a.max(b);
        }
        self.products += other.products;
        self
    }
}

fn exhaustive(family: &[Matrix], depth: usize, norm: MatrixNorm) -> Result<Sweep> {
    validate_family(family)?;
    if depth == 0 {
        return Err(Error::invalid("depth", "must be at least 1"));
    }
    (0..family.len())
        .into_par_iter()
        .map(|first| {
            let mut sweep = Sweep::empty(depth);
            let mut word = vec![RegimeId(first)];
            let root = ScaledProduct::new(family[first].clone());
            walk(family, depth, norm, &root, &mut word, &mut sweep)?;
            Ok(sweep)
        })
        .try_reduce(|| Sweep::empty(depth), |a, b| Ok(a.merge(b)))
}

fn walk(
    family: &[Matrix],
    depth: usize,
    norm: MatrixNorm,
    product: &ScaledProduct,
    word: &mut Vec<RegimeId>,
    sweep: &mut Sweep,
) -> Result<()> {
    let k = word.len();
    sweep.products += 1;
    sweep.best.insert(product.rho_root(k)?, word);
    let nr = product.norm_root(norm, k);
    sweep.level_norm_max[k - 1] = sweep.level_norm_max[k - 1].max(nr);
    if k < depth {
        for (letter, a) in family.iter().enumerate() {
            word.push(RegimeId(letter));
            walk(family, depth, norm, &product.then(a), word, sweep)?;
            word.pop();
        }
    }
    Ok(())
}

/// `max_{1 ≤ |w| ≤ depth} ρ(Π_w)^{1/|w|}` with its witness word.
pub fn jsr_lower(family: &[Matrix], depth: usize) -> Result<LowerBound> {
    let (value, witness) = exhaustive(family, depth, MatrixNorm::InducedInf)?.best.choose();
    Ok(LowerBound { value, witness })
}

/// `min_{1 ≤ k ≤ depth} max_{|w| = k} ‖Π_w‖^{1/k}`.
pub fn jsr_upper(family: &[Matrix], depth: usize, norm: MatrixNorm) -> Result<f64> {
    let sweep = exhaustive(family, depth, norm)?;
    Ok(sweep.level_norm_max.into_iter().fold(f64::INFINITY, f64::min))
}

struct Node {
    word: Vec<RegimeId>,
    product: ScaledProduct,
    /// Smallest normalized prefix norm along the word.
    prefix_min: f64,
    rho_root: f64,
}

fn make_node(word: Vec<RegimeId>, product: ScaledProduct, parent_min: f64, norm: MatrixNorm) -> Result<Node> {
    let k = word.len();
    let prefix_min = parent_min.min(product.norm_root(norm, k));
    let rho_root = product.rho_root(k)?;
    Ok(Node {
        word,
        product,
        prefix_min,
        rho_root,
    })
}

/// Certified bracket on the JSR by pruned iterative deepening.
///
/// Stops when the gap reaches `target_gap`, at `max_depth`, or before a
/// level that would push `products_evaluated` past `budget`. Level 1 is
/// always evaluated.
pub fn jsr_bounds(family: &[Matrix], options: &JsrOptions) -> Result<JsrBounds> {
    validate_family(family)?;
    if options.target_gap.is_nan() || options.target_gap < 0.0 {
        return Err(Error::invalid("target gap", "must be non-negative"));
    }
    if options.max_depth == 0 {
        return Err(Error::invalid("max depth", "must be at least 1"));
    }
    let norm = options.norm;
    let mut nodes = family
        .par_iter()
        .enumerate()
        .map(|(i, a)| make_node(vec![RegimeId(i)], ScaledProduct::new(a.clone()), f64::INFINITY, norm))
        .collect::<Result<Vec<_>>>()?;
    let mut products_evaluated = nodes.len();
    let mut candidates = Candidates::default();
    let mut upper = f64::INFINITY;
    let mut depth = 0;

    loop {
        let level = depth + 1;
        let level_best = nodes
            .par_iter()
            .fold(Candidates::default, |mut c, n| {
                c.insert(n.rho_root, &n.word);
                c
            })
            .reduce(Candidates::default, Candidates::merge);
        candidates = candidates.merge(level_best);
        let lower = candidates.choose().0;
        let level_upper = nodes.par_iter().map(|n| n.prefix_min).reduce(|| 0.0, f64::max);
        upper = upper.min(lower.max(level_upper));
        depth = level;

        if upper - lower <= options.target_gap || level >= options.max_depth {
            break;
        }
        let survivors: Vec<&Node> = nodes.iter().filter(|n| n.prefix_min > lower).collect();
        if survivors.is_empty() {
            // Every word of the next length has a prefix at or below `lower`.
            upper = lower;
            depth = level + 1;
            break;
        }
        let next_count = survivors.len() * family.len();
        if products_evaluated + next_count > options.budget {
            break;
        }
        nodes = survivors
            .par_iter()
            .flat_map_iter(|parent| {
                family.iter().enumerate().map(move |(i, a)| {
                    let mut word = parent.word.clone();
                    word.push(RegimeId(i));
                    make_node(word, parent.product.then(a), parent.prefix_min, norm)
                })
            })
            .collect::<Result<Vec<_>>>()?;
        products_evaluated += next_count;
    }

    let best = candidates.choose();
    Ok(JsrBounds {
        lower: best.0,
        upper: upper.max(best.0),
        depth,
        norm,
        witness_word: best.1,
        products_evaluated,
    })
}

pub fn stability_verdict(bounds: &JsrBounds) -> StabilityVerdict {
    let (status, margin) = if bounds.upper < 1.0 {
        (StabilityStatus::StableCertified, 1.0 - bounds.upper)
    } else if bounds.lower > 1.0 {
        (StabilityStatus::UnstableCertified, bounds.lower - 1.0)
    } else {
        (
            StabilityStatus::Inconclusive,
            (1.0 - bounds.lower).abs().min((bounds.upper - 1.0).abs()),
        )
    };
    StabilityVerdict {
        status,
        bounds: bounds.clone(),
        margin,
    }
}

/// Diagnostic envelope `‖x_t − x*‖∞ ≈ M α^t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    #[serde(rename = "M")]
    pub m: f64,
    pub alpha: f64,
    /// Number of nonzero deviations used in the fit.
    pub samples: usize,
}

/// Least-squares fit of `log ‖x_t − x*‖∞` against `t`, skipping exact
/// zeros. An identically zero deviation sequence yields `(0, 0)`.
pub fn exponential_envelope_fit(trajectory: &Trajectory, x_star: &[f64]) -> Result<Envelope> {
    if trajectory.states.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "envelope fit needs at least 3 states, got {}",
            trajectory.states.len()
        )));
    }
    if x_star.len() != trajectory.states[0].len() {
        return Err(Error::Dimension {
            expected: trajectory.states[0].len(),
            found: x_star.len(),
        });
    }
    let points: Vec<(f64, f64)> = trajectory
        .deviations(x_star)
        .into_iter()
        .enumerate()
        .filter(|(_, d)| *d > 0.0)
        .map(|(t, d)| (t as f64, d.ln()))
        .collect();
    match points.len() {
        0 => {
            return Ok(Envelope {
                m: 0.0,
                alpha: 0.0,
                samples: 0,
            })
        }
        1 => {
            return Err(Error::InsufficientData(
                "envelope fit needs at least two nonzero deviations".into(),
            ))
        }
        _ => {}
    }
    let count = points.len() as f64;
    let mean_t = points.iter().map(|p| p.0).sum::<f64>() / count;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / count;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_t).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_t) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_t;
    Ok(Envelope {
        m: intercept.exp(),
        alpha: slope.exp(),
        samples: points.len(),
    })
}

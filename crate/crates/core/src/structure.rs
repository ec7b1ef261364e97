//! Sample-based structural diagnostics for regime families.
//!
//! * Commutation: a point where `F_a∘F_b` and `F_b∘F_a` differ rules out any
//!   single map whose iterates generate every regime-admissible trajectory,
//!   because the iterates of one map always commute.
//! * Irreducibility: two regimes that differ anywhere cannot be merged by an
//!   injective regime-blind change of variables.
//! * Topology: the regime-indexed phase space has one component per regime.
//!
//! A discrepancy `d` at `x` counts as a witness when
//! `d > tol · (1 + ‖reference output‖∞)`. Every scan is sample-limited: the
//! absence of a witness proves nothing.

use rand_xoshiro::rand_core::SeedableRng;
use rand_xoshiro::Xoshiro256StarStar;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{RegimeId, RegimeSystem};
use crate::error::{Error, Result};
use crate::linalg::{commutator_norm, vec_inf_norm, Matrix};
use crate::operator::RegimeOperator;
use crate::signal::unit_uniform;
use crate::state::StateVector;

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_BOX: (f64, f64) = (-2.0, 4.0);
pub const DEFAULT_GRID_POINTS: usize = 11;
pub const DEFAULT_RANDOM_POINTS: usize = 1000;
/// Upper limit on grid size; the per-axis count shrinks in high dimension.
pub const MAX_GRID_SIZE: usize = 100_000;

/// Deterministic grid followed by seeded uniform points in a box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub bounds: Vec<(f64, f64)>,
    pub grid_points: usize,
    pub random_points: usize,
    pub seed: u64,
}

impl SamplingPlan {
    pub fn new(dimension: usize) -> Self {
        SamplingPlan {
            bounds: vec![DEFAULT_BOX; dimension],
            grid_points: DEFAULT_GRID_POINTS,
            random_points: DEFAULT_RANDOM_POINTS,
            seed: 0,
        }
    }

    pub fn with_box(mut self, lo: f64, hi: f64) -> Self {
        let n = self.bounds.len();
        self.bounds = vec![(lo, hi); n];
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.bounds.is_empty() {
            return Err(Error::invalid("sampling plan", "dimension must be at least 1"));
        }
        for (i, (lo, hi)) in self.bounds.iter().enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(Error::invalid(
                    "sampling plan",
                    format!("axis {i}: bounds [{lo}, {hi}] must be finite with lo <= hi"),
                ));
            }
        }
        Ok(())
    }

    /// Grid points per axis after applying [`MAX_GRID_SIZE`].
    pub fn effective_grid_points(&self) -> usize {
        let n = self.bounds.len() as i32;
        let mut g = self.grid_points;
        while g > 1 && (g as f64).powi(n) > MAX_GRID_SIZE as f64 {
            g -= 1;
        }
        g
    }

    /// Grid in lexicographic order (last axis fastest), then random points.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let n = self.bounds.len();
        let g = self.effective_grid_points();
        let mut out = Vec::new();
        if g > 0 {
            let total = g.pow(n as u32);
            out.reserve(total + self.random_points);
            for flat in 0..total {
                let mut rem = flat;
                let mut p = vec![0.0; n];
                for axis in (0..n).rev() {
                    let i = rem % g;
                    rem /= g;
                    let (lo, hi) = self.bounds[axis];
                    p[axis] = if g == 1 {
                        0.5 * (lo + hi)
                    } else {
                        lo + (hi - lo) * i as f64 / (g - 1) as f64
                    };
                }
                out.push(p);
            }
        }
        let mut rng = Xoshiro256StarStar::seed_from_u64(self.seed);
        for _ in 0..self.random_points {
            out.push(
                self.bounds
                    .iter()
                    .map(|(lo, hi)| lo + (hi - lo) * unit_uniform(&mut rng))
                    .collect(),
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub point: StateVector,
    pub discrepancy: f64,
}

/// Outcome of comparing two evaluations over a sampling plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommutationScan {
    /// Largest `‖F_a∘F_b(x) − F_b∘F_a(x)‖∞` over the samples.
    pub max_discrepancy: f64,
    pub witness: Option<Witness>,
    /// No sample exceeded the tolerance. Sample-limited, not a proof.
    pub commute: bool,
    pub samples_tested: usize,
    pub samples_failed: usize,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommutationReport {
    pub pair: (RegimeId, RegimeId),
    pub labels: (String, String),
    #[serde(flatten)]
    pub scan: CommutationScan,
}

struct Sample {
    discrepancy: f64,
    exceeds: bool,
}

/// Evaluate `measure` at every point and keep the largest discrepancy plus
/// the largest tolerance-exceeding one. Ties go to the lowest sample index.
fn scan<F>(points: &[Vec<f64>], tol: f64, measure: F) -> Result<CommutationScan>
where
    F: Fn(&[f64]) -> Option<(f64, f64)> + Sync,
{
    let samples: Vec<Option<Sample>> = points
        .par_iter()
        .map(|p| {
            measure(p).map(|(d, reference)| Sample {
                discrepancy: d,
                exceeds: d > tol * (1.0 + reference),
            })
        })
        .collect();
    let failed = samples.iter().filter(|s| s.is_none()).count();
    if failed == points.len() {
        return Err(Error::Sampling { samples: points.len() });
    }
    let mut max_discrepancy = 0.0f64;
    let mut worst: Option<(usize, f64)> = None;
    for (i, s) in samples.iter().enumerate() {
        let Some(s) = s else { continue };
        max_discrepancy = max_discrepancy.max(s.discrepancy);
        if s.exceeds && worst.map_or(true, |(_, d)| s.discrepancy > d) {
            worst = Some((i, s.discrepancy));
        }
    }
    let witness = worst.map(|(i, d)| Witness {
        point: StateVector::from_finite(points[i].clone()),
        discrepancy: d,
    });
    Ok(CommutationScan {
        max_discrepancy,
        commute: witness.is_none(),
        witness,
        samples_tested: points.len() - failed,
        samples_failed: failed,
        tolerance: tol,
    })
}

fn check_pair(a: &RegimeOperator, b: &RegimeOperator, plan: &SamplingPlan) -> Result<()> {
    plan.validate()?;
    if a.dimension() != b.dimension() {
        return Err(Error::Dimension {
            expected: a.dimension(),
            found: b.dimension(),
        });
    }
    if plan.bounds.len() != a.dimension() {
        return Err(Error::Dimension {
            expected: a.dimension(),
            found: plan.bounds.len(),
        });
    }
    Ok(())
}

/// Search for a point where the two orderings of `a` and `b` disagree.
pub fn commutation_witness(
    a: &RegimeOperator,
    b: &RegimeOperator,
    plan: &SamplingPlan,
    tol: f64,
) -> Result<CommutationScan> {
    check_pair(a, b, plan)?;
    scan(&plan.points(), tol, |x| {
        let ab = a.apply_raw(&b.apply_raw(x).ok()?).ok()?;
        let ba = b.apply_raw(&a.apply_raw(x).ok()?).ok()?;
        let d = ab.iter().zip(&ba).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
        Some((d, vec_inf_norm(&ab)))
    })
}

/// Largest pointwise difference `‖F_a(x) − F_b(x)‖∞` over the plan.
pub fn difference_scan(
    a: &RegimeOperator,
    b: &RegimeOperator,
    plan: &SamplingPlan,
    tol: f64,
) -> Result<CommutationScan> {
    check_pair(a, b, plan)?;
    scan(&plan.points(), tol, |x| {
        let fa = a.apply_raw(x).ok()?;
        let fb = b.apply_raw(x).ok()?;
        let d = fa.iter().zip(&fb).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
        Some((d, vec_inf_norm(&fa)))
    })
}

fn pairs(system: &RegimeSystem) -> impl Iterator<Item = (RegimeId, RegimeId)> + '_ {
    let k = system.regime_count();
    (0..k).flat_map(move |i| ((i + 1)..k).map(move |j| (RegimeId(i), RegimeId(j))))
}

fn labels(system: &RegimeSystem, pair: (RegimeId, RegimeId)) -> (String, String) {
    (system.label(pair.0).to_string(), system.label(pair.1).to_string())
}

/// `‖A_a A_b − A_b A_a‖∞` for one regime pair of the linearization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearCommutator {
    pub pair: (RegimeId, RegimeId),
    pub norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RepresentabilityStatus {
    /// A non-commuting pair exists; no single map reproduces all
    /// regime-admissible trajectories.
    RuledOut,
    /// No witness was found. Commutation is necessary, not sufficient, and
    /// sampling is finite.
    NotRuledOut,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentabilityVerdict {
    pub status: RepresentabilityStatus,
    pub reason: String,
    pub evidence: Vec<CommutationReport>,
    /// Commutators of the Jacobian family, when a linearization is known.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub linear_commutators: Vec<LinearCommutator>,
}

impl RepresentabilityVerdict {
    /// Attach commutator norms of `{A_s}` as corroborating evidence.
    pub fn with_linearization(mut self, matrices: &[Matrix]) -> Result<Self> {
        let k = matrices.len();
        for i in 0..k {
            for j in (i + 1)..k {
                self.linear_commutators.push(LinearCommutator {
                    pair: (RegimeId(i), RegimeId(j)),
                    norm: commutator_norm(&matrices[i], &matrices[j])?,
                });
            }
        }
        Ok(self)
    }
}

pub fn invariant_law_verdict(system: &RegimeSystem, plan: &SamplingPlan, tol: f64) -> Result<RepresentabilityVerdict> {
    let mut evidence = Vec::new();
    for pair in pairs(system) {
        let scan = commutation_witness(system.operator(pair.0)?, system.operator(pair.1)?, plan, tol)?;
        evidence.push(CommutationReport {
            pair,
            labels: labels(system, pair),
            scan,
        });
    }
    let witness = evidence.iter().find(|r| r.scan.witness.is_some());
    let (status, reason) = if system.regime_count() == 1 {
        (
            RepresentabilityStatus::NotRuledOut,
            "single regime: its own operator generates every trajectory".to_string(),
        )
    } else if let Some(r) = witness {
        let w = r.scan.witness.as_ref().expect("checked above");
        (
            RepresentabilityStatus::RuledOut,
            format!(
                "regimes {} and {} do not commute: orderings differ by {:e} at {:?}; iterates of a single map always commute",
                r.labels.0,
                r.labels.1,
                w.discrepancy,
                w.point.as_slice()
            ),
        )
    } else {
        (
            RepresentabilityStatus::NotRuledOut,
            format!(
                "no non-commuting pair found on {} samples per pair; commutation is necessary but not sufficient for a single-map representation",
                evidence.first().map_or(0, |r| r.scan.samples_tested)
            ),
        )
    };
    Ok(RepresentabilityVerdict {
        status,
        reason,
        evidence,
        linear_commutators: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistinctPair {
    pub pair: (RegimeId, RegimeId),
    pub labels: (String, String),
    pub max_difference: f64,
    pub witness: Witness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrreducibilityReport {
    pub distinct_pairs: Vec<DistinctPair>,
    /// Every pair of operators coincided on all samples.
    pub reducible_candidate: bool,
    pub samples_per_pair: usize,
}

pub fn irreducibility_check(system: &RegimeSystem, plan: &SamplingPlan, tol: f64) -> Result<IrreducibilityReport> {
    let mut distinct_pairs = Vec::new();
    let mut samples_per_pair = 0;
    for pair in pairs(system) {
        let scan = difference_scan(system.operator(pair.0)?, system.operator(pair.1)?, plan, tol)?;
        samples_per_pair = scan.samples_tested;
        if let Some(witness) = scan.witness {
            distinct_pairs.push(DistinctPair {
                pair,
                labels: labels(system, pair),
                max_difference: scan.max_discrepancy,
                witness,
            });
        }
    }
    Ok(IrreducibilityReport {
        reducible_candidate: distinct_pairs.is_empty(),
        distinct_pairs,
        samples_per_pair,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologyReport {
    pub regime_count: usize,
    /// Connected components of the regime-indexed phase space ℝⁿ × S.
    pub component_count: usize,
    /// Whether a topological conjugacy to a single-law system on the
    /// connected space ℝⁿ is possible; false as soon as there are two
    /// regimes.
    pub conjugate_to_invariant_law: bool,
}

pub fn topology_report(system: &RegimeSystem) -> TopologyReport {
    let k = system.regime_count();
    TopologyReport {
        regime_count: k,
        component_count: k,
        conjugate_to_invariant_law: k < 2,
    }
}

/// `‖AB − BA‖∞`.
pub fn matrix_commutator_norm(a: &Matrix, b: &Matrix) -> Result<f64> {
    commutator_norm(a, b)
}

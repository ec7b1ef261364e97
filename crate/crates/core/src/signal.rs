//! Exogenous regime sequences.
//!
//! Stochastic signals draw from xoshiro256** seeded through splitmix64
//! (`rand_xoshiro`'s `seed_from_u64`). A uniform variate is the top 53 bits
//! of one `next_u64` scaled by 2⁻⁵³, and categorical draws pick the first
//! index whose running cumulative weight exceeds it. Both steps are plain
//! integer/IEEE arithmetic, so a seed yields the same regime path on every
//! platform.

use rand_xoshiro::rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

use crate::dynamics::RegimeId;
use crate::error::{Error, Result};

/// Tolerance on probability row sums.
pub const PROBABILITY_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum SwitchingSignal {
    /// Exactly this regime sequence; must cover the horizon.
    Explicit(Vec<RegimeId>),
    /// The word repeated indefinitely.
    Periodic(Vec<RegimeId>),
    /// Independent draws from a fixed probability vector.
    Iid { weights: Vec<f64>, seed: u64 },
    /// Markov chain started from `initial`; `transition[i][j]` is the
    /// probability of moving from regime i to regime j.
    Markov {
        transition: Vec<Vec<f64>>,
        initial: RegimeId,
        seed: u64,
    },
}

impl SwitchingSignal {
    pub fn validate(&self, regime_count: usize) -> Result<()> {
        let check_id = |id: &RegimeId| {
            if id.0 >= regime_count {
                Err(Error::UnknownRegime {
                    index: id.0,
                    count: regime_count,
                })
            } else {
                Ok(())
            }
        };
        match self {
            SwitchingSignal::Explicit(word) => word.iter().try_for_each(check_id),
            SwitchingSignal::Periodic(word) => {
                if word.is_empty() {
                    return Err(Error::invalid("switching signal", "periodic word must be non-empty"));
                }
                word.iter().try_for_each(check_id)
            }
            SwitchingSignal::Iid { weights, .. } => {
                if weights.len() != regime_count {
                    return Err(Error::invalid(
                        "switching signal",
                        format!("weights has {} entries for {regime_count} regimes", weights.len()),
                    ));
                }
                check_probability_row(weights).map_err(|r| Error::invalid("switching signal", format!("weights: {r}")))
            }
            SwitchingSignal::Markov {
                transition, initial, ..
            } => {
                check_id(initial)?;
                if transition.len() != regime_count {
                    return Err(Error::invalid(
                        "switching signal",
                        format!("transition has {} rows for {regime_count} regimes", transition.len()),
                    ));
                }
                for (i, row) in transition.iter().enumerate() {
                    if row.len() != regime_count {
                        return Err(Error::invalid(
                            "switching signal",
                            format!("transition row {i} has {} entries, expected {regime_count}", row.len()),
                        ));
                    }
                    check_probability_row(row)
                        .map_err(|r| Error::invalid("switching signal", format!("transition row {i}: {r}")))?;
                }
                Ok(())
            }
        }
    }

    /// The first `horizon` regimes of the signal.
    pub fn regimes(&self, horizon: usize) -> Result<Vec<RegimeId>> {
        match self {
            SwitchingSignal::Explicit(word) => {
                if word.len() < horizon {
                    return Err(Error::SignalExhausted {
                        len: word.len(),
                        horizon,
                    });
                }
                Ok(word[..horizon].to_vec())
            }
            SwitchingSignal::Periodic(word) => {
                if word.is_empty() {
                    return Err(Error::invalid("switching signal", "periodic word must be non-empty"));
                }
                Ok(word.iter().copied().cycle().take(horizon).collect())
            }
            SwitchingSignal::Iid { weights, seed } => {
                let mut rng = Xoshiro256StarStar::seed_from_u64(*seed);
                Ok((0..horizon)
                    .map(|_| RegimeId(categorical(weights, unit_uniform(&mut rng))))
                    .collect())
            }
            SwitchingSignal::Markov {
                transition,
                initial,
                seed,
            } => {
                let mut rng = Xoshiro256StarStar::seed_from_u64(*seed);
                let mut out = Vec::with_capacity(horizon);
                let mut current = *initial;
                for t in 0..horizon {
                    if t > 0 {
                        current = RegimeId(categorical(&transition[current.0], unit_uniform(&mut rng)));
                    }
                    out.push(current);
                }
                Ok(out)
            }
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            SwitchingSignal::Iid { seed, .. } | SwitchingSignal::Markov { seed, .. } => Some(*seed),
            _ => None,
        }
    }

    pub fn with_seed(mut self, new_seed: u64) -> Self {
        if let SwitchingSignal::Iid { seed, .. } | SwitchingSignal::Markov { seed, .. } = &mut self {
            *seed = new_seed;
        }
        self
    }
}

fn check_probability_row(row: &[f64]) -> Result<(), String> {
    if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(format!("entry {v} outside [0, 1]"));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > PROBABILITY_SUM_TOL {
        return Err(format!("entries sum to {sum}, expected 1"));
    }
    Ok(())
}

/// Uniform on [0, 1) from the top 53 bits.
pub fn unit_uniform(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn categorical(weights: &[f64], u: f64) -> usize {
    let mut cumulative = 0.0;
    for (i, w) in weights.iter().enumerate() {
        cumulative += w;
        if u < cumulative {
            return i;
        }
    }
    // Rounding left u above the total: take the last regime with mass.
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[usize]) -> Vec<RegimeId> {
        v.iter().copied().map(RegimeId).collect()
    }

    #[test]
    fn periodic_and_explicit() {
        let p = SwitchingSignal::Periodic(ids(&[0, 1]));
        assert_eq!(p.regimes(5).unwrap(), ids(&[0, 1, 0, 1, 0]));
        let e = SwitchingSignal::Explicit(ids(&[1, 0]));
        assert_eq!(e.regimes(2).unwrap(), ids(&[1, 0]));
        assert_eq!(e.regimes(3), Err(Error::SignalExhausted { len: 2, horizon: 3 }));
        assert_eq!(e.regimes(0).unwrap(), vec![]);
    }

    #[test]
    fn seeded_draws_are_reproducible() {
        let s = SwitchingSignal::Iid {
            weights: vec![0.3, 0.7],
            seed: 42,
        };
        let a = s.regimes(200).unwrap();
        assert_eq!(a, s.regimes(200).unwrap());
        let ones = a.iter().filter(|r| r.0 == 1).count();
        assert!((100..180).contains(&ones), "{ones}");
        let other = s.clone().with_seed(43).regimes(200).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn xoshiro_reference_stream() {
        // First outputs of xoshiro256** seeded via splitmix64(0).
        let mut rng = Xoshiro256StarStar::seed_from_u64(0);
        let first = rng.next_u64();
        let mut again = Xoshiro256StarStar::seed_from_u64(0);
        assert_eq!(first, again.next_u64());
        assert_eq!(first, 0x99EC_5F36_CB75_F2B4);
    }

    #[test]
    fn markov_respects_absorbing_state() {
        let s = SwitchingSignal::Markov {
            transition: vec![vec![0.0, 1.0], vec![0.0, 1.0]],
            initial: RegimeId(0),
            seed: 7,
        };
        s.validate(2).unwrap();
        assert_eq!(s.regimes(4).unwrap(), ids(&[0, 1, 1, 1]));
    }

    #[test]
    fn probability_rows_validated() {
        let bad = SwitchingSignal::Markov {
            transition: vec![vec![0.5, 0.5], vec![0.6, 0.3]],
            initial: RegimeId(0),
            seed: 1,
        };
        let err = bad.validate(2).unwrap_err().to_string();
        assert!(err.contains("row 1"), "{err}");
        let neg = SwitchingSignal::Iid {
            weights: vec![1.5, -0.5],
            seed: 1,
        };
        assert!(neg.validate(2).is_err());
        assert!(SwitchingSignal::Periodic(ids(&[2])).validate(2).is_err());
        assert!(SwitchingSignal::Periodic(vec![]).validate(2).is_err());
    }
}

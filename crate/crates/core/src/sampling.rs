//! Monte Carlo trajectories of the sequential experiment.
//!
//! Each round draws the six setting indices uniformly, then draws outcomes
//! one observer at a time from the conditional weight of the updated state,
//! exactly as an experiment would produce them.
//!
//! Seeding: round `r` uses `ChaCha8Rng::seed_from_u64(seed)` switched to
//! stream `r`, so rounds are independent of scheduling and of each other.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::correlations::{JointProbabilityTable, ObserverTriple, MABK_TERMS};
use crate::measurement::{
    LocalMeasurement, MeasurementPlan, ObserverSlot, OutcomeRecord, SettingChoice, Stage,
};
use crate::qcore::{CMatrix, DensityOperator, Outcome};
use crate::{Error, Result};

/// Slack allowed on a conditional probability before the round is aborted.
pub const PROBABILITY_GUARD: f64 = 1e-12;

/// Fewest rounds accepted by [`estimate_mabk`].
pub const MIN_ROUNDS: u64 = 1000;

/// Fewest samples any correlator cell may have.
pub const MIN_CELL_SAMPLES: u64 = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TrialRound {
    pub choice: SettingChoice,
    pub record: OutcomeRecord,
}

/// Generator for round `round` under `seed`.
pub fn round_rng(seed: u64, round: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(round);
    rng
}

/// Draws one round.
pub fn sample_round<R: Rng + ?Sized>(
    rho0: &DensityOperator,
    plan: &MeasurementPlan,
    rng: &mut R,
) -> Result<TrialRound> {
    if !rho0.is_normalized() {
        return Err(Error::InvalidState("initial state must have unit trace".into()));
    }
    let settings: [u8; 6] = std::array::from_fn(|_| if rng.random::<bool>() { 2 } else { 1 });
    let choice = SettingChoice::new(settings)?;
    let mut outcomes = [Outcome::Plus; 6];
    let mut state: CMatrix = rho0.matrix().clone();
    for slot in ObserverSlot::ALL {
        let m = LocalMeasurement::new(slot.site, plan.direction(slot, choice.setting(slot)));
        let q = plan.quality(slot.site);
        let weight = |a| match slot.stage {
            Stage::First => m.weak_weight(&state, a, q),
            Stage::Second => m.born(&state, a),
        };
        let total = state.trace().re;
        let p_plus = weight(Outcome::Plus) / total;
        if !(total > 0.0) || !(-PROBABILITY_GUARD..=1.0 + PROBABILITY_GUARD).contains(&p_plus) {
            return Err(Error::NumericalGuard(format!(
                "{}: conditional probability {p_plus:e} (state trace {total:e})",
                slot.name()
            )));
        }
        let a = if rng.random::<f64>() < p_plus { Outcome::Plus } else { Outcome::Minus };
        let next = match slot.stage {
            Stage::First => m.weak(&state, a, q),
            Stage::Second => m.strong(&state, a),
        };
        // renormalize to keep the state O(1); the trace ratio is unchanged
        let tr = next.trace().re;
        state = next.scale_re(1.0 / tr);
        outcomes[slot.index()] = a;
    }
    Ok(TrialRound {
        choice,
        record: OutcomeRecord::new(outcomes),
    })
}

/// Rounds `0..rounds` under `seed`, sampled in parallel.
pub fn sample_rounds(
    rho0: &DensityOperator,
    plan: &MeasurementPlan,
    rounds: u64,
    seed: u64,
) -> Result<Vec<TrialRound>> {
    (0..rounds)
        .into_par_iter()
        .map(|r| sample_round(rho0, plan, &mut round_rng(seed, r)))
        .collect()
}

/// Counts of each `(setting, outcome)` cell.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyTable {
    counts: Vec<u64>,
    rounds: u64,
}

impl FrequencyTable {
    pub fn from_rounds(rounds: &[TrialRound]) -> Self {
        let mut counts = vec![0u64; SettingChoice::COUNT * OutcomeRecord::COUNT];
        for r in rounds {
            counts[r.choice.index() * OutcomeRecord::COUNT + r.record.index()] += 1;
        }
        Self {
            counts,
            rounds: rounds.len() as u64,
        }
    }

    pub fn count(&self, setting_index: usize, outcome_index: usize) -> u64 {
        self.counts[setting_index * OutcomeRecord::COUNT + outcome_index]
    }

    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    /// Largest `|count − N p / 64| / σ` over all cells, with
    /// `σ = √(N q (1 − q))` and `q = p / 64`. Cells with `q = 0` must be
    /// empty; a non-empty one yields infinity.
    pub fn max_standardized_deviation(&self, exact: &JointProbabilityTable) -> f64 {
        let n = self.rounds as f64;
        exact
            .entries()
            .iter()
            .zip(&self.counts)
            .map(|(p, &c)| {
                let q = (p / SettingChoice::COUNT as f64).max(0.0);
                let dev = (c as f64 - n * q).abs();
                let sigma = (n * q * (1.0 - q)).sqrt();
                if sigma > 0.0 {
                    dev / sigma
                } else if c == 0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max)
    }

    /// Checks every cell against a 5σ band. Cells with a small expected count
    /// (`N q < 100`) use the exact Poisson upper tail instead of the normal
    /// approximation, which understates their skew. Returns the worst cell as
    /// `(setting_index, outcome_index, count, expected)` on failure.
    pub fn within_five_sigma(&self, exact: &JointProbabilityTable) -> Result<(), (usize, usize, u64, f64)> {
        let n = self.rounds as f64;
        for (i, (p, &c)) in exact.entries().iter().zip(&self.counts).enumerate() {
            let q = (p / SettingChoice::COUNT as f64).max(0.0);
            let expected = n * q;
            let sigma = (n * q * (1.0 - q)).sqrt();
            let ok = if sigma == 0.0 {
                c == 0
            } else if (c as f64 - expected).abs() <= 5.0 * sigma {
                true
            } else {
                expected < 100.0 && c as f64 > expected && poisson_upper_tail(expected, c) >= FIVE_SIGMA_TAIL
            };
            if !ok {
                let cols = OutcomeRecord::COUNT;
                return Err((i / cols, i % cols, c, expected));
            }
        }
        Ok(())
    }

    /// Largest absolute difference between empirical and exact cell
    /// frequencies, both scaled to sum to 1 over the whole table.
    pub fn max_abs_deviation(&self, exact: &JointProbabilityTable) -> f64 {
        let n = self.rounds as f64;
        exact
            .entries()
            .iter()
            .zip(&self.counts)
            .map(|(p, &c)| (c as f64 / n - p / SettingChoice::COUNT as f64).abs())
            .fold(0.0, f64::max)
    }
}

/// One-sided normal tail beyond 5σ.
const FIVE_SIGMA_TAIL: f64 = 2.866_515_718_791_939e-7;

/// `P(X ≥ k)` for `X ~ Poisson(lambda)`, summed upward from `k`.
fn poisson_upper_tail(lambda: f64, k: u64) -> f64 {
    let mut log_term = -lambda + k as f64 * lambda.ln() - ln_factorial(k);
    let mut total = 0.0;
    let mut j = k;
    loop {
        let term = log_term.exp();
        total += term;
        if term < total * 1e-16 || j > k + 10_000 {
            break total;
        }
        j += 1;
        log_term += lambda.ln() - (j as f64).ln();
    }
}

fn ln_factorial(k: u64) -> f64 {
    (2..=k).map(|j| (j as f64).ln()).sum()
}

/// Sample mean of `a·b·c` for one setting triple.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrelatorEstimate {
    pub settings: (u8, u8, u8),
    pub mean: f64,
    pub standard_error: f64,
    pub samples: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimateReport {
    /// `"B1"` .. `"B8"`.
    pub quantity: String,
    pub estimate: f64,
    pub standard_error: f64,
    pub rounds: u64,
    pub seed: u64,
    pub correlators: [CorrelatorEstimate; 4],
}

/// Estimates one correlator from the rounds whose settings match.
///
/// The standard error uses the add-one smoothed rate `(k + 1)/(n + 2)` of
/// `a·b·c = +1`, which stays positive when every sample agrees.
pub fn estimate_correlator(
    rounds: &[TrialRound],
    triple: ObserverTriple,
    settings: (u8, u8, u8),
) -> CorrelatorEstimate {
    let slots = triple.slots();
    let want = [settings.0, settings.1, settings.2];
    let (mut n, mut plus) = (0u64, 0u64);
    for r in rounds {
        if slots.iter().zip(want).all(|(s, w)| r.choice.setting(*s) == w) {
            n += 1;
            let parity = slots.iter().map(|s| r.record.outcome(*s).bit()).sum::<usize>() % 2;
            if parity == 0 {
                plus += 1;
            }
        }
    }
    let nf = n as f64;
    let mean = if n > 0 { (2.0 * plus as f64 - nf) / nf } else { 0.0 };
    let smoothed = (plus as f64 + 1.0) / (nf + 2.0);
    let standard_error = (4.0 * smoothed * (1.0 - smoothed) / nf.max(1.0)).sqrt();
    CorrelatorEstimate {
        settings,
        mean,
        standard_error,
        samples: n,
    }
}

/// `B̂_ω` from already sampled rounds. Errors propagate in quadrature across
/// the four correlators, which use disjoint rounds.
pub fn estimate_from_rounds(rounds: &[TrialRound], omega: u8, seed: u64) -> Result<EstimateReport> {
    let triple = ObserverTriple::for_omega(omega)?;
    let correlators = MABK_TERMS.map(|(s, _)| estimate_correlator(rounds, triple, s));
    if let Some(c) = correlators.iter().find(|c| c.samples < MIN_CELL_SAMPLES) {
        return Err(Error::InsufficientRounds {
            cell: format!("E{:?}", c.settings),
            samples: c.samples,
            needed: MIN_CELL_SAMPLES,
        });
    }
    let estimate = MABK_TERMS
        .iter()
        .zip(&correlators)
        .map(|((_, sign), c)| sign * c.mean)
        .sum::<f64>()
        .abs();
    let standard_error = correlators
        .iter()
        .map(|c| c.standard_error * c.standard_error)
        .sum::<f64>()
        .sqrt();
    Ok(EstimateReport {
        quantity: format!("B{omega}"),
        estimate,
        standard_error,
        rounds: rounds.len() as u64,
        seed,
        correlators,
    })
}

/// Samples `rounds` rounds and estimates `B_ω`.
pub fn estimate_mabk(
    rho0: &DensityOperator,
    plan: &MeasurementPlan,
    omega: u8,
    rounds: u64,
    seed: u64,
) -> Result<EstimateReport> {
    if rounds < MIN_ROUNDS {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_ROUNDS} rounds, got {rounds}"
        )));
    }
    ObserverTriple::for_omega(omega)?;
    let sampled = sample_rounds(rho0, plan, rounds, seed)?;
    estimate_from_rounds(&sampled, omega, seed)
}

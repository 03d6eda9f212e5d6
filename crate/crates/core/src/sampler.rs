//! Synthetic outcome counts from known probabilities.
//!
//! Each trial first picks an operation according to an [`OperationPolicy`],
//! then an outcome of that operation according to the true probabilities.
//!
//! The random stream is portable: xoshiro256** seeded from a `u64` through
//! SplitMix64 (as in `rand_xoshiro`'s `seed_from_u64`). A uniform draw is
//! `(next_u64() >> 11) * 2^-53`. Each categorical draw takes one uniform `u`
//! and returns the first index whose running weight sum exceeds `u` times
//! the total (the last positive-weight index if rounding runs past the end).
//! A trial makes two such draws, operation then outcome. Independent batches
//! should use streams separated by `Xoshiro256StarStar::jump`.

use rand_xoshiro::rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use thiserror::Error;

use crate::diagram::{check_probability, FrequencyTable, GreechieDiagram, ProbabilityAssignment};

pub const POLICY_TOLERANCE: f64 = 1e-12;
pub const TRUE_PROBABILITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplerError {
    #[error("policy has {found} weights for {expected} operations")]
    PolicyLength { expected: usize, found: usize },
    #[error("policy weights must be finite, nonnegative and sum to 1 (sum is {0})")]
    PolicyWeights(f64),
    #[error("true probabilities are not a probability assignment on this diagram")]
    InvalidProbabilities,
    #[error("trial count must be at least 1")]
    NoTrials,
}

/// Probability of choosing each operation for a trial.
#[derive(Debug, Clone, PartialEq)]
pub struct OperationPolicy {
    weights: Vec<f64>,
}

impl OperationPolicy {
    pub fn new(diagram: &GreechieDiagram, weights: Vec<f64>) -> Result<Self, SamplerError> {
        if weights.len() != diagram.operation_count() {
            return Err(SamplerError::PolicyLength {
                expected: diagram.operation_count(),
                found: weights.len(),
            });
        }
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || (sum - 1.0).abs() > POLICY_TOLERANCE {
            return Err(SamplerError::PolicyWeights(sum));
        }
        Ok(Self { weights })
    }

    /// Every operation equally likely.
    pub fn uniform(diagram: &GreechieDiagram) -> Self {
        let k = diagram.operation_count();
        Self {
            weights: vec![1.0 / k as f64; k],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Uniform on [0, 1) from the top 53 bits.
pub fn unit_uniform(rng: &mut Xoshiro256StarStar) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Index drawn from nonnegative `weights` using one uniform.
pub fn categorical(rng: &mut Xoshiro256StarStar, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let target = unit_uniform(rng) * total;
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if target < acc {
            return i;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Counts from `trial_count` trials; deterministic given `seed`.
pub fn sample_outcomes(
    diagram: &GreechieDiagram,
    p_true: &ProbabilityAssignment,
    policy: &OperationPolicy,
    trial_count: u64,
    seed: u64,
) -> Result<FrequencyTable, SamplerError> {
    if trial_count == 0 {
        return Err(SamplerError::NoTrials);
    }
    if !check_probability(diagram, p_true, TRUE_PROBABILITY_TOLERANCE) {
        return Err(SamplerError::InvalidProbabilities);
    }
    if policy.weights.len() != diagram.operation_count() {
        return Err(SamplerError::PolicyLength {
            expected: diagram.operation_count(),
            found: policy.weights.len(),
        });
    }
    let conditionals: Vec<Vec<f64>> = diagram
        .operations()
        .iter()
        .map(|op| op.members().iter().map(|&x| p_true.get(x)).collect())
        .collect();

    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    let mut counts = vec![0u64; diagram.outcome_count()];
    for _ in 0..trial_count {
        let edge = categorical(&mut rng, &policy.weights);
        let k = categorical(&mut rng, &conditionals[edge]);
        counts[diagram.operations()[edge].members()[k]] += 1;
    }
    Ok(FrequencyTable::new(diagram, counts).expect("one count per outcome"))
}

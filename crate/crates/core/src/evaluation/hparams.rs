//! Random-search space used to fine-tune the dialect identifier.
//!
//! Every parameter is drawn uniformly from its range except the learning
//! rate, which is log-uniform. The batch size is derived from the sampled
//! clip duration so each batch holds about 75 s of audio:
//! `batch = 4 * floor(75 / duration)`.
//!
//! The reported best configuration of that search (see
//! [`REPORTED_OPTIMUM`]) lists batch 16 with duration 4.69 s, while the rule
//! gives `4 * floor(75 / 4.69) = 60` for that duration. The rule is
//! implemented as written and the reported values are kept unmodified.
//!
//! The transcription models were trained separately with AdamW at a fixed
//! learning rate of 1e-5, 500 warmup steps, no weight decay and early
//! stopping with patience 5. Those values are not part of this search space.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Seconds of audio per batch targeted by the batch rule.
pub const BATCH_AUDIO_SECONDS: f64 = 75.0;
pub const BATCH_MULTIPLIER: u32 = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HparamError {
    #[error("duration {0} s outside [{lo}, {hi}]", lo = DURATION_RANGE_S.0, hi = DURATION_RANGE_S.1)]
    DurationOutOfRange(f64),
}

pub const DURATION_RANGE_S: (f64, f64) = (4.0, 18.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperparamSpace {
    pub freeze_steps: (u32, u32),
    pub learning_rate: (f64, f64),
    pub max_steps: (u32, u32),
    pub duration_s: (f64, f64),
    pub thaw_depth: (u32, u32),
}

impl Default for HyperparamSpace {
    fn default() -> Self {
        Self {
            freeze_steps: (0, 1000),
            learning_rate: (1e-5, 1e-2),
            max_steps: (20_000, 40_000),
            duration_s: DURATION_RANGE_S,
            thaw_depth: (0, 23),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperparamConfig {
    pub freeze_steps: u32,
    pub max_steps: u32,
    pub thaw_depth: u32,
    pub batch_size: u32,
    pub learning_rate: f64,
    pub duration_s: f64,
}

impl HyperparamConfig {
    pub fn within(&self, space: &HyperparamSpace) -> bool {
        let in_u = |v: u32, (lo, hi): (u32, u32)| lo <= v && v <= hi;
        let in_f = |v: f64, (lo, hi): (f64, f64)| lo <= v && v <= hi;
        in_u(self.freeze_steps, space.freeze_steps)
            && in_u(self.max_steps, space.max_steps)
            && in_u(self.thaw_depth, space.thaw_depth)
            && in_f(self.learning_rate, space.learning_rate)
            && in_f(self.duration_s, space.duration_s)
            && self.batch_size == batch_rule(self.duration_s)
    }
}

/// Best configuration reported for the search, kept verbatim. Its batch size
/// does not follow [`batch_rule`].
pub const REPORTED_OPTIMUM: HyperparamConfig = HyperparamConfig {
    freeze_steps: 192,
    max_steps: 29_225,
    thaw_depth: 3,
    batch_size: 16,
    learning_rate: 6e-4,
    duration_s: 4.69,
};

/// `4 * floor(75 / duration)` with no range check.
pub fn batch_rule(duration_s: f64) -> u32 {
    BATCH_MULTIPLIER * (BATCH_AUDIO_SECONDS / duration_s).floor() as u32
}

/// [`batch_rule`] restricted to the searched duration range.
pub fn batch_size_for_duration(duration_s: f64) -> Result<u32, HparamError> {
    let (lo, hi) = DURATION_RANGE_S;
    if !(lo..=hi).contains(&duration_s) {
        return Err(HparamError::DurationOutOfRange(duration_s));
    }
    Ok(batch_rule(duration_s))
}

fn draw(space: &HyperparamSpace, rng: &mut ChaCha8Rng) -> HyperparamConfig {
    let (lr_lo, lr_hi) = space.learning_rate;
    let learning_rate = rng
        .random_range(lr_lo.ln()..=lr_hi.ln())
        .exp()
        .clamp(lr_lo, lr_hi);
    let duration_s = rng.random_range(space.duration_s.0..=space.duration_s.1);
    HyperparamConfig {
        freeze_steps: rng.random_range(space.freeze_steps.0..=space.freeze_steps.1),
        max_steps: rng.random_range(space.max_steps.0..=space.max_steps.1),
        thaw_depth: rng.random_range(space.thaw_depth.0..=space.thaw_depth.1),
        batch_size: batch_rule(duration_s),
        learning_rate,
        duration_s,
    }
}

/// One configuration; identical seeds give identical configurations.
pub fn sample_hyperparameters(space: &HyperparamSpace, seed: u64) -> HyperparamConfig {
    draw(space, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// `count` configurations from a single seeded stream. The first equals
/// [`sample_hyperparameters`] with the same seed.
pub fn sample_many(space: &HyperparamSpace, seed: u64, count: usize) -> Vec<HyperparamConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| draw(space, &mut rng)).collect()
}

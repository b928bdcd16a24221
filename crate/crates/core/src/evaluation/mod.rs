//! Scoring and the dialect-identifier search space.

pub mod hparams;
pub mod wer;

pub use hparams::{
    batch_rule, batch_size_for_duration, sample_hyperparameters, sample_many, HparamError,
    HyperparamConfig, HyperparamSpace,
};
pub use wer::{align, corpus_error_rate, edit_distance, word_error_rate, EditCounts, ScoreReport};

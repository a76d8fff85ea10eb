//! Pluggable text-to-text model backends.
//!
//! The trainer drives backends exclusively through [`ModelBackend`]:
//! tokenization, teacher-forced loss with gradient accumulation, greedy
//! generation, parameter snapshots, and optimizer steps. The crate ships
//! [`TinyBackend`], a deterministic few-thousand-parameter encoder-decoder
//! over a character vocabulary that makes the full pipeline testable in
//! seconds; pretrained backends plug in through the same interface.

mod tiny;

use thiserror::Error;

pub use tiny::{TinyBackend, TinyConfig};

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("parameter snapshot has length {got}, expected {expected}")]
    SnapshotShape { got: usize, expected: usize },
    #[error("backend does not support {0}")]
    Unsupported(&'static str),
    #[error("non-finite loss encountered: {0}")]
    NonFiniteLoss(f64),
    #[error("{0}")]
    Other(String),
}

/// One tokenized training pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeqPair {
    pub input: Vec<u32>,
    pub target: Vec<u32>,
}

/// A text-to-text model the trainer can drive.
///
/// Loss values are per-sequence mean token cross-entropies. Gradients
/// accumulate across `accumulate_loss` calls as `weight x d(batch mean)/d(params)`
/// until [`ModelBackend::apply_step`] consumes them, which is how the
/// alpha-weighted multitask objective composes its two terms into one
/// optimizer step.
pub trait ModelBackend: Send + Sync {
    /// Identifier recorded in reports and checkpoint manifests.
    fn id(&self) -> String;

    fn tokenize(&self, text: &str) -> Vec<u32>;

    /// Teacher-forced per-sequence losses; accumulates scaled gradients.
    /// Deterministic given fixed parameters and inputs.
    fn accumulate_loss(&mut self, batch: &[SeqPair], weight: f64) -> Result<Vec<f64>, BackendError>;

    /// Losses only, no gradient side effects.
    fn eval_loss(&self, batch: &[SeqPair]) -> Result<Vec<f64>, BackendError>;

    /// One optimizer step over the accumulated gradient; clears it.
    fn apply_step(&mut self, learning_rate: f64) -> Result<(), BackendError>;

    /// Greedy decoding from the given input, capped at `max_new_tokens`.
    /// Deterministic for fixed parameters and input.
    fn generate(&self, input: &[u32], max_new_tokens: usize) -> Result<String, BackendError>;

    /// Flat parameter snapshot.
    fn params(&self) -> Vec<f64>;

    fn set_params(&mut self, params: &[f64]) -> Result<(), BackendError>;

    /// The currently accumulated (unapplied) gradient, same layout as
    /// [`ModelBackend::params`].
    fn gradient(&self) -> Vec<f64>;

    /// Whether `generate` may be called concurrently from multiple threads.
    fn supports_parallel_inference(&self) -> bool {
        false
    }
}

/// Test double that answers every generation with a fixed string.
pub struct FixedResponseBackend {
    response: String,
}

impl FixedResponseBackend {
    pub fn new(response: impl Into<String>) -> Self {
        FixedResponseBackend {
            response: response.into(),
        }
    }
}

impl ModelBackend for FixedResponseBackend {
    fn id(&self) -> String {
        "fixed".to_string()
    }

    fn tokenize(&self, text: &str) -> Vec<u32> {
        text.chars().map(|c| c as u32).collect()
    }

    fn accumulate_loss(&mut self, _: &[SeqPair], _: f64) -> Result<Vec<f64>, BackendError> {
        Err(BackendError::Unsupported("training"))
    }

    fn eval_loss(&self, _: &[SeqPair]) -> Result<Vec<f64>, BackendError> {
        Err(BackendError::Unsupported("training"))
    }

    fn apply_step(&mut self, _: f64) -> Result<(), BackendError> {
        Err(BackendError::Unsupported("training"))
    }

    fn generate(&self, _: &[u32], _: usize) -> Result<String, BackendError> {
        Ok(self.response.clone())
    }

    fn params(&self) -> Vec<f64> {
        Vec::new()
    }

    fn set_params(&mut self, params: &[f64]) -> Result<(), BackendError> {
        if params.is_empty() {
            Ok(())
        } else {
            Err(BackendError::SnapshotShape {
                got: params.len(),
                expected: 0,
            })
        }
    }

    fn gradient(&self) -> Vec<f64> {
        Vec::new()
    }

    fn supports_parallel_inference(&self) -> bool {
        true
    }
}

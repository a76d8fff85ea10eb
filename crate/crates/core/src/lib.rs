//! Explainable stance detection via rationale distillation.
//!
//! The crate covers the full pipeline: ingesting SemEval-style stance data,
//! eliciting label-conditioned rationales from a completion service (or a
//! deterministic offline mock), encoding examples into the text-to-text
//! formats of the three finetuning paradigms (ST-FT, ST-CoT, MTL), training
//! a pluggable seq2seq backend under an alpha-weighted multitask objective,
//! and scoring predictions with the favor/against macro-F1 metric.

pub mod backend;
pub mod codec;
pub mod corpus;
pub mod elicitor;
pub mod evaluator;
pub mod fixtures;
pub mod prompts;
pub mod trainer;
pub mod util;

pub use backend::{BackendError, ModelBackend, TinyBackend, TinyConfig};
pub use codec::{CodecError, EncodeOptions, Paradigm, ParseOutcome, TaskTag, TrainingInstance};
pub use corpus::{
    CorpusError, CorpusSplit, CorpusStats, LabelCounts, StanceExample, StanceLabel,
};
pub use elicitor::{
    CompletionClient, CompletionError, ElicitError, ElicitorConfig, MockClient,
    RationalizedExample, RationaleStore, StoreSummary,
};
pub use evaluator::{EvalError, EvalReport, RunAggregate};
pub use trainer::{LossBreakdown, TrainConfig, TrainError, TrainRecord, Trainer};

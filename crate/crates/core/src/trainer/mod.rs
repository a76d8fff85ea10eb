//! Training loops for the three paradigms, the alpha-weighted multitask
//! objective, deterministic batching, validation-based checkpoint selection,
//! and greedy-decoded prediction.

mod batch;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use batch::{build_batches, Batch};

use crate::backend::{BackendError, ModelBackend, SeqPair};
use crate::codec::{self, EncodeOptions, Paradigm, ParseOutcome, TaskTag, TrainingInstance};
use crate::corpus::{CorpusError, CorpusSplit, StanceExample};
use crate::elicitor::RationaleStore;
use crate::evaluator::{self, EvalError};
use crate::util::derive_seed;

/// Training hyperparameters. Defaults: batch 128, learning rate 5e-5,
/// 30 epochs, input cap 512 tokens, generation cap 256 tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub paradigm: Paradigm,
    /// Stance-task weight in the MTL objective; ignored (and reported as
    /// such) for the single-task paradigms.
    pub alpha: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub max_input_tokens: usize,
    pub max_generation_tokens: usize,
    pub seed: u64,
    pub instructed_format: bool,
    /// Stratified training subsample taken before encoding.
    pub train_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            paradigm: Paradigm::StFt,
            alpha: 0.5,
            batch_size: 128,
            learning_rate: 5e-5,
            epochs: 30,
            max_input_tokens: 512,
            max_generation_tokens: 256,
            seed: 13,
            instructed_format: false,
            train_fraction: 1.0,
        }
    }
}

impl TrainConfig {
    /// The alpha that actually enters the objective: `None` outside MTL.
    pub fn effective_alpha(&self) -> Option<f64> {
        (self.paradigm == Paradigm::Mtl).then_some(self.alpha)
    }

    pub fn encode_options(&self) -> EncodeOptions {
        EncodeOptions::default().instructed(self.instructed_format)
    }
}

/// The two loss terms and their combination for one step or epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub stance_loss: f64,
    pub rationale_loss: f64,
    pub combined: f64,
    pub alpha: f64,
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("instance list is empty")]
    EmptyInstanceList,
    #[error("paradigm {0} requires a rationale store")]
    MissingRationaleStore(Paradigm),
    #[error("MTL batches need an even batch size, got {0}")]
    OddMtlBatchSize(usize),
    #[error("no {0:?} instances to draw from")]
    EmptyTaskStream(TaskTag),
    #[error("loss is not finite (stance {stance}, rationale {rationale})")]
    NonFiniteLoss { stance: f64, rationale: f64 },
    #[error("alpha must lie in [0, 1], got {0}")]
    AlphaOutOfRange(f64),
    #[error("backend failure at {context}: {source}")]
    Backend {
        context: String,
        #[source]
        source: BackendError,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Combine the per-batch mean losses: `alpha * stance + (1 - alpha) * rationale`.
pub fn mtl_combine_loss(
    stance_loss: f64,
    rationale_loss: f64,
    alpha: f64,
) -> Result<LossBreakdown, TrainError> {
    if !stance_loss.is_finite() || !rationale_loss.is_finite() {
        return Err(TrainError::NonFiniteLoss {
            stance: stance_loss,
            rationale: rationale_loss,
        });
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(TrainError::AlphaOutOfRange(alpha));
    }
    debug_assert!(stance_loss >= 0.0 && rationale_loss >= 0.0);
    Ok(LossBreakdown {
        stance_loss,
        rationale_loss,
        combined: alpha * stance_loss + (1.0 - alpha) * rationale_loss,
        alpha,
    })
}

/// One epoch's aggregates plus its per-step traces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub stance_loss: f64,
    pub rationale_loss: f64,
    pub combined: f64,
    pub val_f_avg: Option<f64>,
    pub seconds: f64,
    pub steps: Vec<LossBreakdown>,
}

/// The checkpoint with the best validation score (ties broken by earliest
/// epoch).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BestCheckpoint {
    pub epoch: usize,
    pub val_f_avg: f64,
    pub path: Option<PathBuf>,
}

/// Everything a training run reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainRecord {
    pub epochs: Vec<EpochRecord>,
    pub best: Option<BestCheckpoint>,
    /// `None` means alpha was ignored because the paradigm is single-task.
    pub alpha_used: Option<f64>,
    pub excluded_missing_rationale: usize,
    pub excluded_invalid_rationale: usize,
    pub truncated_inputs: usize,
    pub truncated_targets: usize,
    pub backend_id: String,
    pub corpus_fingerprint: String,
}

impl TrainRecord {
    /// Per-step loss traces flattened across epochs.
    pub fn step_losses(&self) -> impl Iterator<Item = &LossBreakdown> {
        self.epochs.iter().flat_map(|e| e.steps.iter())
    }
}

/// Checkpoint sidecar manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub config: TrainConfig,
    pub epoch: usize,
    pub val_f_avg: f64,
    pub corpus_fingerprint: String,
    pub backend_id: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointFile {
    backend_id: String,
    params: Vec<f64>,
}

/// Write a parameter snapshot plus its sidecar manifest.
pub fn save_checkpoint(
    path: &Path,
    backend: &dyn ModelBackend,
    manifest: &CheckpointManifest,
) -> Result<(), TrainError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let file = CheckpointFile {
        backend_id: backend.id(),
        params: backend.params(),
    };
    std::fs::write(path, serde_json::to_vec(&file).map_err(io_err)?)?;
    let manifest_path = manifest_path_for(path);
    std::fs::write(
        manifest_path,
        serde_json::to_vec_pretty(manifest).map_err(io_err)?,
    )?;
    Ok(())
}

/// Load a parameter snapshot into a backend.
pub fn load_checkpoint(path: &Path, backend: &mut dyn ModelBackend) -> Result<(), TrainError> {
    let bytes = std::fs::read(path)?;
    let file: CheckpointFile = serde_json::from_slice(&bytes).map_err(io_err)?;
    if file.backend_id != backend.id() {
        return Err(TrainError::Backend {
            context: format!("loading checkpoint {}", path.display()),
            source: BackendError::Other(format!(
                "checkpoint was written by backend {:?}, not {:?}",
                file.backend_id,
                backend.id()
            )),
        });
    }
    backend.set_params(&file.params).map_err(|source| TrainError::Backend {
        context: format!("loading checkpoint {}", path.display()),
        source,
    })
}

pub fn manifest_path_for(checkpoint: &Path) -> PathBuf {
    let mut name = checkpoint.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    checkpoint.with_file_name(name)
}

fn io_err(e: serde_json::Error) -> std::io::Error {
    std::io::Error::other(e)
}

/// Orchestrates encoding, batching, optimization, validation, and
/// checkpointing for one configuration.
pub struct Trainer {
    config: TrainConfig,
    encode_opts: EncodeOptions,
    output_dir: Option<PathBuf>,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Self {
        let encode_opts = config.encode_options();
        Trainer {
            config,
            encode_opts,
            output_dir: None,
        }
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// Override the default encode options (separator, task prefixes).
    pub fn with_encode_options(mut self, opts: EncodeOptions) -> Self {
        self.encode_opts = opts;
        self
    }

    /// Persist the best checkpoint and a per-epoch log CSV under `dir`.
    pub fn with_output_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.output_dir = Some(dir.into());
        self
    }

    /// Encode the training partition for the configured paradigm. Examples
    /// lacking a usable rationale are excluded from rationale-dependent
    /// instances and counted.
    pub fn encode_training_set(
        &self,
        train: &[StanceExample],
        rationales: Option<&RationaleStore>,
    ) -> Result<(Vec<TrainingInstance>, usize, usize), TrainError> {
        let mut instances = Vec::new();
        let mut missing = 0usize;
        let mut invalid = 0usize;
        match self.config.paradigm {
            Paradigm::StFt => {
                for example in train {
                    instances.push(codec::encode_st_ft(example, &self.encode_opts));
                }
            }
            Paradigm::StCot => {
                let store = rationales
                    .ok_or(TrainError::MissingRationaleStore(Paradigm::StCot))?;
                for example in train {
                    match store.rationalized(example) {
                        Some(rex) => match codec::encode_st_cot(&rex, &self.encode_opts) {
                            Ok(instance) => instances.push(instance),
                            Err(_) => invalid += 1,
                        },
                        None => missing += 1,
                    }
                }
            }
            Paradigm::Mtl => {
                let store = rationales
                    .ok_or(TrainError::MissingRationaleStore(Paradigm::Mtl))?;
                for example in train {
                    match store.rationalized(example) {
                        Some(rex) => match codec::encode_mtl(&rex, &self.encode_opts) {
                            Ok([stance, rationale]) => {
                                instances.push(stance);
                                instances.push(rationale);
                            }
                            Err(_) => {
                                invalid += 1;
                                instances.push(codec::encode_mtl_stance(example, &self.encode_opts));
                            }
                        },
                        None => {
                            missing += 1;
                            instances.push(codec::encode_mtl_stance(example, &self.encode_opts));
                        }
                    }
                }
            }
        }
        Ok((instances, missing, invalid))
    }

    /// Train on a corpus split: subsample by `train_fraction`, encode, fit,
    /// and validate per epoch. The backend ends up holding the best
    /// checkpoint's parameters (falling back to the final epoch when no
    /// validation score exists).
    pub fn run(
        &self,
        backend: &mut dyn ModelBackend,
        split: &CorpusSplit,
        rationales: Option<&RationaleStore>,
    ) -> Result<TrainRecord, TrainError> {
        let train = if self.config.train_fraction < 1.0 {
            crate::corpus::subsample(&split.train, self.config.train_fraction, self.config.seed)?
        } else {
            split.train.clone()
        };
        let (instances, missing, invalid) = self.encode_training_set(&train, rationales)?;
        let mut record =
            self.fit_instances(backend, &instances, &split.validation, split.fingerprint())?;
        record.excluded_missing_rationale = missing;
        record.excluded_invalid_rationale = invalid;
        Ok(record)
    }

    /// The core loop over pre-encoded instances. Validation may be empty,
    /// in which case no checkpoint selection happens.
    pub fn fit_instances(
        &self,
        backend: &mut dyn ModelBackend,
        instances: &[TrainingInstance],
        validation: &[StanceExample],
        corpus_fingerprint: String,
    ) -> Result<TrainRecord, TrainError> {
        let config = &self.config;
        let mut record = TrainRecord {
            epochs: Vec::with_capacity(config.epochs),
            best: None,
            alpha_used: config.effective_alpha(),
            excluded_missing_rationale: 0,
            excluded_invalid_rationale: 0,
            truncated_inputs: 0,
            truncated_targets: 0,
            backend_id: backend.id(),
            corpus_fingerprint,
        };
        if config.epochs == 0 {
            return Ok(record);
        }
        if let Some(alpha) = config.effective_alpha() {
            if !(0.0..=1.0).contains(&alpha) {
                return Err(TrainError::AlphaOutOfRange(alpha));
            }
        }

        let mut best_params: Option<Vec<f64>> = None;
        for epoch in 0..config.epochs {
            let started = Instant::now();
            let epoch_seed = derive_seed(config.seed, &["epoch", &epoch.to_string()]);
            let batches = build_batches(instances, config, epoch_seed)?;
            let mut steps = Vec::with_capacity(batches.len());
            for (step_idx, batch) in batches.iter().enumerate() {
                let breakdown = self
                    .step(backend, instances, batch, &mut record)
                    .map_err(|err| annotate(err, epoch, step_idx))?;
                steps.push(breakdown);
            }

            let val_f_avg = if validation.is_empty() {
                None
            } else {
                let outcomes = predict(backend, validation, config.paradigm, config, &self.encode_opts)?;
                let golds: Vec<_> = validation.iter().map(|e| e.gold).collect();
                let topics: Vec<_> = validation.iter().map(|e| e.topic.clone()).collect();
                Some(evaluator::score(&golds, &outcomes, &topics)?.f_avg)
            };

            let mean = |f: fn(&LossBreakdown) -> f64| -> f64 {
                steps.iter().map(f).sum::<f64>() / steps.len().max(1) as f64
            };
            record.epochs.push(EpochRecord {
                epoch,
                stance_loss: mean(|s| s.stance_loss),
                rationale_loss: mean(|s| s.rationale_loss),
                combined: mean(|s| s.combined),
                val_f_avg,
                seconds: started.elapsed().as_secs_f64(),
                steps,
            });

            if let Some(score) = val_f_avg {
                let improved = match &record.best {
                    Some(best) => score > best.val_f_avg,
                    None => true,
                };
                if improved {
                    record.best = Some(BestCheckpoint {
                        epoch,
                        val_f_avg: score,
                        path: None,
                    });
                    best_params = Some(backend.params());
                }
            }
        }

        // leave the backend at the selected checkpoint
        if let Some(params) = &best_params {
            backend.set_params(params).map_err(|source| TrainError::Backend {
                context: "restoring best checkpoint".to_string(),
                source,
            })?;
        }

        if let Some(dir) = &self.output_dir {
            std::fs::create_dir_all(dir)?;
            self.write_log_csv(&record, &dir.join("training_log.csv"))?;
            if let Some(best) = record.best.clone() {
                let path = dir.join("checkpoint_best.json");
                save_checkpoint(
                    &path,
                    backend,
                    &CheckpointManifest {
                        config: config.clone(),
                        epoch: best.epoch,
                        val_f_avg: best.val_f_avg,
                        corpus_fingerprint: record.corpus_fingerprint.clone(),
                        backend_id: record.backend_id.clone(),
                    },
                )?;
                record.best = Some(BestCheckpoint {
                    path: Some(path),
                    ..best
                });
            }
        }
        Ok(record)
    }

    fn step(
        &self,
        backend: &mut dyn ModelBackend,
        instances: &[TrainingInstance],
        batch: &Batch,
        record: &mut TrainRecord,
    ) -> Result<LossBreakdown, TrainError> {
        let config = &self.config;
        match batch {
            Batch::Single(indices) => {
                let pairs = self.tokenize_batch(backend, instances, indices, record);
                let losses = backend
                    .accumulate_loss(&pairs, 1.0)
                    .map_err(|source| backend_err("loss", source))?;
                backend
                    .apply_step(config.learning_rate)
                    .map_err(|source| backend_err("optimizer step", source))?;
                let loss = mean_of(&losses);
                Ok(LossBreakdown {
                    stance_loss: loss,
                    rationale_loss: 0.0,
                    combined: loss,
                    alpha: 1.0,
                })
            }
            Batch::Mixed { stance, rationale } => {
                let alpha = config.alpha;
                let stance_pairs = self.tokenize_batch(backend, instances, stance, record);
                let rationale_pairs = self.tokenize_batch(backend, instances, rationale, record);
                let stance_losses = backend
                    .accumulate_loss(&stance_pairs, alpha)
                    .map_err(|source| backend_err("stance loss", source))?;
                let rationale_losses = backend
                    .accumulate_loss(&rationale_pairs, 1.0 - alpha)
                    .map_err(|source| backend_err("rationale loss", source))?;
                backend
                    .apply_step(config.learning_rate)
                    .map_err(|source| backend_err("optimizer step", source))?;
                mtl_combine_loss(mean_of(&stance_losses), mean_of(&rationale_losses), alpha)
            }
        }
    }

    fn tokenize_batch(
        &self,
        backend: &dyn ModelBackend,
        instances: &[TrainingInstance],
        indices: &[usize],
        record: &mut TrainRecord,
    ) -> Vec<SeqPair> {
        indices
            .iter()
            .map(|&idx| {
                let instance = &instances[idx];
                let mut input = backend.tokenize(&instance.input_text);
                if input.len() > self.config.max_input_tokens {
                    // the comment sits at the tail of every input format, so
                    // truncating from the end never drops the topic
                    input.truncate(self.config.max_input_tokens);
                    record.truncated_inputs += 1;
                }
                let mut target = backend.tokenize(&instance.target_text);
                if target.len() > self.config.max_generation_tokens {
                    target.truncate(self.config.max_generation_tokens);
                    record.truncated_targets += 1;
                }
                SeqPair { input, target }
            })
            .collect()
    }

    fn write_log_csv(&self, record: &TrainRecord, path: &Path) -> Result<(), TrainError> {
        let mut out = String::from("epoch,stance_loss,rationale_loss,combined,val_f_avg,seconds\n");
        for epoch in &record.epochs {
            let val = epoch
                .val_f_avg
                .map(|v| format!("{v:.6}"))
                .unwrap_or_default();
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6},{},{:.3}\n",
                epoch.epoch, epoch.stance_loss, epoch.rationale_loss, epoch.combined, val, epoch.seconds
            ));
        }
        let mut file = std::fs::File::create(path)?;
        file.write_all(out.as_bytes())?;
        Ok(())
    }
}

fn mean_of(losses: &[f64]) -> f64 {
    if losses.is_empty() {
        0.0
    } else {
        losses.iter().sum::<f64>() / losses.len() as f64
    }
}

fn backend_err(context: &str, source: BackendError) -> TrainError {
    TrainError::Backend {
        context: context.to_string(),
        source,
    }
}

fn annotate(err: TrainError, epoch: usize, step: usize) -> TrainError {
    match err {
        TrainError::Backend { context, source } => TrainError::Backend {
            context: format!("epoch {epoch} step {step}: {context}"),
            source,
        },
        other => other,
    }
}

/// Greedy-decode predictions for a list of examples and parse them. MTL
/// predicts through the stance-prefixed input only, so exactly one
/// generation call happens per example under every paradigm.
pub fn predict(
    backend: &dyn ModelBackend,
    examples: &[StanceExample],
    paradigm: Paradigm,
    config: &TrainConfig,
    opts: &EncodeOptions,
) -> Result<Vec<ParseOutcome>, TrainError> {
    let inputs: Vec<Vec<u32>> = examples
        .iter()
        .map(|example| {
            let mut tokens = backend.tokenize(&codec::prediction_input(example, paradigm, opts));
            tokens.truncate(config.max_input_tokens);
            tokens
        })
        .collect();

    let generations: Vec<Result<String, BackendError>> =
        if backend.supports_parallel_inference() && inputs.len() > 16 {
            inputs
                .par_iter()
                .map(|input| backend.generate(input, config.max_generation_tokens))
                .collect()
        } else {
            inputs
                .iter()
                .map(|input| backend.generate(input, config.max_generation_tokens))
                .collect()
        };

    generations
        .into_iter()
        .map(|generation| {
            generation
                .map(|text| codec::parse_generation(&text, paradigm))
                .map_err(|source| backend_err("generation", source))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::FixedResponseBackend;
    use crate::backend::{TinyBackend, TinyConfig};
    use crate::corpus::StanceLabel;
    use crate::elicitor::{build_rationale_store, ElicitorConfig, MockClient, RationaleStore};
    use crate::fixtures::toy_corpus;

    fn toy_store(dir: &Path) -> RationaleStore {
        let cache = dir.join("rationales.jsonl");
        build_rationale_store(
            &toy_corpus(),
            &MockClient::new(),
            &cache,
            &ElicitorConfig::default().immediate(),
        )
        .unwrap();
        RationaleStore::load(&cache).unwrap()
    }

    fn toy_split() -> CorpusSplit {
        let corpus = toy_corpus();
        CorpusSplit {
            train: corpus.clone(),
            validation: corpus[..8].to_vec(),
            test: Vec::new(),
            seed: 0,
        }
    }

    #[test]
    fn combine_loss_examples() {
        assert_eq!(mtl_combine_loss(2.5, 7.0, 1.0).unwrap().combined, 2.5);
        assert_eq!(mtl_combine_loss(2.5, 7.0, 0.0).unwrap().combined, 7.0);
        let b = mtl_combine_loss(2.0, 5.0, 0.2).unwrap();
        assert!((b.combined - 4.4).abs() < 1e-12);
    }

    #[test]
    fn combine_loss_rejects_bad_inputs() {
        assert!(matches!(
            mtl_combine_loss(f64::NAN, 1.0, 0.5),
            Err(TrainError::NonFiniteLoss { .. })
        ));
        assert!(matches!(
            mtl_combine_loss(1.0, 1.0, 1.5),
            Err(TrainError::AlphaOutOfRange(_))
        ));
    }

    #[test]
    fn combined_is_monotone_in_alpha() {
        // with stance < rationale, increasing alpha must decrease combined
        let mut prev = f64::INFINITY;
        for i in 0..=10 {
            let alpha = i as f64 / 10.0;
            let combined = mtl_combine_loss(1.0, 3.0, alpha).unwrap().combined;
            assert!(combined < prev);
            prev = combined;
        }
    }

    #[test]
    fn zero_epochs_is_vacuous() {
        let config = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let mut backend = TinyBackend::new(TinyConfig::default());
        let record = Trainer::new(config)
            .run(&mut backend, &toy_split(), None)
            .unwrap();
        assert!(record.epochs.is_empty());
        assert!(record.best.is_none());
    }

    #[test]
    fn alpha_is_reported_ignored_outside_mtl() {
        let config = TrainConfig {
            epochs: 0,
            alpha: 0.3,
            paradigm: Paradigm::StFt,
            ..TrainConfig::default()
        };
        assert_eq!(config.effective_alpha(), None);
        let mut backend = TinyBackend::new(TinyConfig::default());
        let record = Trainer::new(config)
            .run(&mut backend, &toy_split(), None)
            .unwrap();
        assert_eq!(record.alpha_used, None);
    }

    #[test]
    fn missing_store_is_an_error_for_rationale_paradigms() {
        for paradigm in [Paradigm::StCot, Paradigm::Mtl] {
            let config = TrainConfig {
                paradigm,
                epochs: 1,
                ..TrainConfig::default()
            };
            let mut backend = TinyBackend::new(TinyConfig::default());
            let err = Trainer::new(config)
                .run(&mut backend, &toy_split(), None)
                .unwrap_err();
            assert!(matches!(err, TrainError::MissingRationaleStore(p) if p == paradigm));
        }
    }

    #[test]
    fn predict_with_stub_backends() {
        let config = TrainConfig::default();
        let opts = EncodeOptions::default();
        let examples = toy_corpus();

        let backend = FixedResponseBackend::new("favor");
        let outcomes = predict(&backend, &examples, Paradigm::StFt, &config, &opts).unwrap();
        assert!(outcomes.iter().all(|o| o.label == Some(StanceLabel::Favor)));

        let backend = FixedResponseBackend::new("garbled output with no labels");
        let outcomes = predict(&backend, &examples, Paradigm::Mtl, &config, &opts).unwrap();
        assert!(outcomes.iter().all(|o| o.failed));
    }

    #[test]
    fn mtl_prediction_uses_stance_prefix_and_one_call_per_example() {
        use std::sync::atomic::{AtomicUsize, Ordering};
        use std::sync::Arc;

        struct CountingBackend {
            calls: Arc<AtomicUsize>,
        }
        impl ModelBackend for CountingBackend {
            fn id(&self) -> String {
                "counting".to_string()
            }
            fn tokenize(&self, text: &str) -> Vec<u32> {
                assert!(text.starts_with("Stance: "), "input was {text:?}");
                text.chars().map(|c| c as u32).collect()
            }
            fn accumulate_loss(&mut self, _: &[SeqPair], _: f64) -> Result<Vec<f64>, BackendError> {
                unreachable!()
            }
            fn eval_loss(&self, _: &[SeqPair]) -> Result<Vec<f64>, BackendError> {
                unreachable!()
            }
            fn apply_step(&mut self, _: f64) -> Result<(), BackendError> {
                unreachable!()
            }
            fn generate(&self, _: &[u32], _: usize) -> Result<String, BackendError> {
                self.calls.fetch_add(1, Ordering::SeqCst);
                Ok("neutral".to_string())
            }
            fn params(&self) -> Vec<f64> {
                Vec::new()
            }
            fn set_params(&mut self, _: &[f64]) -> Result<(), BackendError> {
                Ok(())
            }
            fn gradient(&self) -> Vec<f64> {
                Vec::new()
            }
        }

        let calls = Arc::new(AtomicUsize::new(0));
        let backend = CountingBackend {
            calls: Arc::clone(&calls),
        };
        let examples = toy_corpus();
        let outcomes = predict(
            &backend,
            &examples,
            Paradigm::Mtl,
            &TrainConfig::default(),
            &EncodeOptions::default(),
        )
        .unwrap();
        assert_eq!(outcomes.len(), examples.len());
        assert_eq!(calls.load(Ordering::SeqCst), examples.len());
    }

    #[test]
    fn seed_determinism_of_loss_history() {
        let dir = tempfile::tempdir().unwrap();
        let store = toy_store(dir.path());
        let config = TrainConfig {
            paradigm: Paradigm::Mtl,
            alpha: 0.4,
            batch_size: 8,
            learning_rate: 5e-3,
            epochs: 2,
            seed: 17,
            ..TrainConfig::default()
        };
        let split = toy_split();
        let run = |config: &TrainConfig| {
            let mut backend = TinyBackend::new(TinyConfig::default().with_seed(1));
            Trainer::new(config.clone())
                .run(&mut backend, &split, Some(&store))
                .unwrap()
        };
        let a = run(&config);
        let b = run(&config);
        let traces = |r: &TrainRecord| -> Vec<f64> { r.step_losses().map(|s| s.combined).collect() };
        let ta = traces(&a);
        let tb = traces(&b);
        assert_eq!(ta.len(), tb.len());
        for (x, y) in ta.iter().zip(&tb) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn training_loss_descends_for_all_paradigms() {
        let dir = tempfile::tempdir().unwrap();
        let store = toy_store(dir.path());
        let split = toy_split();
        for paradigm in Paradigm::ALL {
            let config = TrainConfig {
                paradigm,
                alpha: 0.5,
                batch_size: 8,
                learning_rate: 1e-2,
                epochs: 5,
                seed: 5,
                ..TrainConfig::default()
            };
            let mut backend = TinyBackend::new(TinyConfig::default().with_seed(5));
            let record = Trainer::new(config)
                .run(&mut backend, &split, Some(&store))
                .unwrap();
            let first = record.epochs.first().unwrap().combined;
            let last = record.epochs.last().unwrap().combined;
            assert!(
                last < first,
                "{paradigm}: epoch-mean loss did not descend ({first} -> {last})"
            );
        }
    }

    #[test]
    fn mtl_alpha_extremes_match_single_task_updates() {
        let dir = tempfile::tempdir().unwrap();
        let store = toy_store(dir.path());
        let corpus = toy_corpus();
        let opts = EncodeOptions::default();

        let stance_instances: Vec<_> = corpus
            .iter()
            .map(|e| codec::encode_mtl_stance(e, &opts))
            .collect();
        let rationale_instances: Vec<_> = corpus
            .iter()
            .map(|e| {
                let rex = store.rationalized(e).unwrap();
                codec::encode_mtl(&rex, &opts).unwrap()[1].clone()
            })
            .collect();

        let lr = 1e-3;
        let into_pairs = |backend: &TinyBackend, instances: &[TrainingInstance]| -> Vec<SeqPair> {
            instances
                .iter()
                .map(|i| SeqPair {
                    input: backend.tokenize(&i.input_text),
                    target: backend.tokenize(&i.target_text),
                })
                .collect()
        };

        for (alpha, dominant) in [(1.0, &stance_instances), (0.0, &rationale_instances)] {
            // single-objective reference step
            let mut reference = TinyBackend::new(TinyConfig::default().with_seed(8));
            let pairs = into_pairs(&reference, dominant);
            reference.accumulate_loss(&pairs, 1.0).unwrap();
            reference.apply_step(lr).unwrap();

            // one MTL step at the degenerate alpha over both batches
            let mut mtl = TinyBackend::new(TinyConfig::default().with_seed(8));
            let stance_pairs = into_pairs(&mtl, &stance_instances);
            let rationale_pairs = into_pairs(&mtl, &rationale_instances);
            mtl.accumulate_loss(&stance_pairs, alpha).unwrap();
            mtl.accumulate_loss(&rationale_pairs, 1.0 - alpha).unwrap();
            mtl.apply_step(lr).unwrap();

            let max_diff = reference
                .params()
                .iter()
                .zip(mtl.params())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            assert!(
                max_diff < 1e-6,
                "alpha {alpha}: parameters diverged from single-task update by {max_diff}"
            );
        }
    }

    #[test]
    fn checkpoint_round_trips_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let backend = TinyBackend::new(TinyConfig::default().with_seed(4));
        let manifest = CheckpointManifest {
            config: TrainConfig::default(),
            epoch: 3,
            val_f_avg: 0.5,
            corpus_fingerprint: "abc".to_string(),
            backend_id: backend.id(),
        };
        let path = dir.path().join("ckpt.json");
        save_checkpoint(&path, &backend, &manifest).unwrap();
        let original = backend.params();

        let mut other = TinyBackend::new(TinyConfig::default().with_seed(99));
        assert_ne!(other.params(), original);
        load_checkpoint(&path, &mut other).unwrap();
        assert_eq!(other.params(), original);
        assert!(manifest_path_for(&path).exists());
    }
}

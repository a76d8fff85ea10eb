//! Resolved run specification: defaults, config-file overlay, output-tree
//! layout, corpus loading, and the backend factory.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use stance_core::backend::{ModelBackend, TinyBackend, TinyConfig};
use stance_core::codec::{EncodeOptions, Paradigm};
use stance_core::corpus::{self, CorpusSplit, StanceExample};
use stance_core::elicitor::{
    CompletionClient, ElicitorConfig, HttpCompletionClient, MockClient, DEFAULT_API_KEY_ENV,
};
use stance_core::trainer::TrainConfig;
use stance_core::util;

use crate::args::CommonArgs;
use crate::config::ConfigFile;

/// Default seeds mirroring "three random runs".
pub const DEFAULT_SEEDS: [u64; 3] = [13, 42, 87];

/// Everything a command run needs, fully resolved. Serialized next to each
/// command's outputs as the config snapshot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSpec {
    pub command: String,
    pub train: TrainConfig,
    pub encode: EncodeOptions,
    pub seeds: Vec<u64>,
    pub data: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub out_root: PathBuf,
    pub backend: String,
    pub workers: usize,
    pub mock_llm: bool,
    pub alphas: Vec<f64>,
    pub fractions: Vec<f64>,
    pub val_fraction: f64,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub api_key_env: String,
    /// Filled in after the corpus loads; part of the snapshot, not the
    /// spec fingerprint.
    pub corpus_fingerprint: Option<String>,
    pub created_at: String,
}

impl RunSpec {
    pub fn resolve(command: &str, mut args: CommonArgs) -> Result<Self> {
        if let Some(path) = args.config.clone() {
            ConfigFile::load(&path)?.overlay(&mut args)?;
        }
        let defaults = TrainConfig::default();
        let mut seeds = args.seeds.unwrap_or_else(|| DEFAULT_SEEDS.to_vec());
        if let Some(seed) = args.seed {
            seeds = vec![seed];
        }
        if seeds.is_empty() {
            bail!("at least one seed is required");
        }
        let train = TrainConfig {
            paradigm: args.paradigm.unwrap_or(defaults.paradigm),
            alpha: args.alpha.unwrap_or(defaults.alpha),
            batch_size: args.batch_size.unwrap_or(defaults.batch_size),
            learning_rate: args.lr.unwrap_or(defaults.learning_rate),
            epochs: args.epochs.unwrap_or(defaults.epochs),
            max_input_tokens: args.max_input_len.unwrap_or(defaults.max_input_tokens),
            max_generation_tokens: args.max_gen_len.unwrap_or(defaults.max_generation_tokens),
            seed: seeds[0],
            instructed_format: args.instructed_format,
            train_fraction: args.train_fraction.unwrap_or(defaults.train_fraction),
        };
        let mut encode = EncodeOptions::default().instructed(args.instructed_format);
        if let Some(separator) = args.separator {
            encode.separator = separator;
        }
        Ok(RunSpec {
            command: command.to_string(),
            train,
            encode,
            seeds,
            data: args.data,
            cache: args.cache,
            out_root: args.out.unwrap_or_else(|| PathBuf::from("out")),
            backend: args.backend.unwrap_or_else(|| "tiny".to_string()),
            workers: args.workers.unwrap_or(4).max(1),
            mock_llm: args.mock_llm,
            alphas: args
                .alphas
                .unwrap_or_else(|| (1..=9).map(|i| i as f64 / 10.0).collect()),
            fractions: args
                .fractions
                .unwrap_or_else(|| (1..=10).map(|i| i as f64 / 10.0).collect()),
            val_fraction: args.val_fraction.unwrap_or(0.1),
            endpoint: args.endpoint,
            model: args.model,
            api_key_env: args
                .api_key_env
                .unwrap_or_else(|| DEFAULT_API_KEY_ENV.to_string()),
            corpus_fingerprint: None,
            created_at: util::timestamp_now(),
        })
    }

    /// Stable fingerprint of the resolved spec, excluding volatile fields
    /// (timestamp, corpus fingerprint). Names sweep run directories so a
    /// rerun with the same configuration resumes in place.
    pub fn fingerprint(&self) -> String {
        let mut value = serde_json::to_value(self).expect("spec serializes");
        let obj = value.as_object_mut().expect("spec is an object");
        obj.remove("created_at");
        obj.remove("corpus_fingerprint");
        let canonical = serde_json::to_string(&value).expect("spec serializes");
        format!("{:08x}", util::fnv1a64(canonical.as_bytes()) as u32)
    }

    /// The run directory: `--run-dir` if given, otherwise
    /// `out/<command>/<timestamp>` for one-shot commands or
    /// `out/<command>/<fingerprint>` when `resumable` is set (sweeps).
    pub fn run_dir(&self, explicit: Option<&Path>, resumable: bool) -> PathBuf {
        if let Some(dir) = explicit {
            return dir.to_path_buf();
        }
        let leaf = if resumable {
            self.fingerprint()
        } else {
            format!(
                "{}-{:04x}",
                self.created_at.replace(':', "").replace('T', "-").replace('Z', ""),
                std::process::id() as u16
            )
        };
        self.out_root.join(&self.command).join(leaf)
    }

    /// Write the resolved-config snapshot next to a run's outputs.
    pub fn write_snapshot(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("config_snapshot.json");
        std::fs::write(&path, serde_json::to_string_pretty(self)?)
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }

    pub fn elicitor_config(&self) -> ElicitorConfig {
        let mut config = ElicitorConfig {
            max_output_tokens: self.train.max_generation_tokens,
            workers: self.workers,
            ..ElicitorConfig::default()
        };
        if self.mock_llm {
            config = config.immediate();
        }
        config
    }

    /// The completion client: deterministic mock (optionally with a gold
    /// oracle for classification) or the HTTP service client.
    pub fn completion_client(
        &self,
        oracle: Option<&[StanceExample]>,
    ) -> Result<Box<dyn CompletionClient>> {
        if self.mock_llm {
            return Ok(match oracle {
                Some(examples) => Box::new(MockClient::with_gold_oracle(examples)),
                None => Box::new(MockClient::new()),
            });
        }
        let endpoint = self
            .endpoint
            .as_deref()
            .context("a service endpoint is required unless --mock-llm is set")?;
        let model = self.model.as_deref().unwrap_or("gpt-3.5-turbo");
        let client = HttpCompletionClient::new(endpoint, model)
            .with_key_from_env(&self.api_key_env)
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        Ok(Box::new(client))
    }
}

/// Instantiate a backend from its identifier. `tiny` uses the default
/// dimensions; `tiny-d<D>-h<H>` pins them (matching the id the backend
/// itself reports).
pub fn make_backend(identifier: &str, seed: u64) -> Result<Box<dyn ModelBackend>> {
    if identifier == "tiny" {
        return Ok(Box::new(TinyBackend::new(TinyConfig::default().with_seed(seed))));
    }
    if let Some(rest) = identifier.strip_prefix("tiny-d") {
        if let Some((d, h)) = rest.split_once("-h") {
            if let (Ok(embed_dim), Ok(hidden_dim)) = (d.parse(), h.parse()) {
                return Ok(Box::new(TinyBackend::new(TinyConfig {
                    embed_dim,
                    hidden_dim,
                    seed,
                })));
            }
        }
    }
    bail!(
        "unknown backend {identifier:?}; available: tiny, tiny-d<D>-h<H> \
         (pretrained backends plug in through the ModelBackend trait)"
    )
}

/// A loaded corpus: either raw train/test pools or a persisted split.
pub struct LoadedData {
    pub train_pool: Vec<StanceExample>,
    pub test: Vec<StanceExample>,
    pub presplit: Option<CorpusSplit>,
    /// Everything ingested, including topics excluded from evaluation.
    pub all: Vec<StanceExample>,
}

impl LoadedData {
    /// Split for one seeded run: the persisted split when the data came
    /// from a split file, otherwise a fresh topic-stratified split.
    pub fn split_for_seed(&self, val_fraction: f64, seed: u64) -> Result<CorpusSplit> {
        if let Some(split) = &self.presplit {
            let mut split = split.clone();
            split.seed = seed;
            return Ok(split);
        }
        Ok(corpus::make_split(&self.train_pool, val_fraction, seed)?
            .attach_test(self.test.clone())?)
    }

    pub fn fingerprint(&self) -> String {
        util::fingerprint(
            self.all
                .iter()
                .map(|e| format!("{}\t{}\t{}\t{}", e.id, e.topic, e.comment, e.gold)),
        )
    }
}

fn find_corpus_file(dir: &Path, tag: &str) -> Result<PathBuf> {
    let mut candidates = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default()
            .to_lowercase();
        if path.is_file() && name.contains(tag) && name.ends_with(".txt") {
            candidates.push(path);
        }
    }
    candidates.sort();
    match candidates.len() {
        0 => bail!("no *{tag}*.txt file under {}", dir.display()),
        1 => Ok(candidates.remove(0)),
        _ => bail!(
            "multiple *{tag}*.txt candidates under {}: {}",
            dir.display(),
            candidates
                .iter()
                .map(|p| p.display().to_string())
                .collect::<Vec<_>>()
                .join(", ")
        ),
    }
}

/// Load data from a split .jsonl file or a directory holding train/test
/// files in the tab-separated layout. Topics outside the evaluation set are
/// kept for statistics but dropped from the train/test pools.
pub fn load_data(path: &Path) -> Result<LoadedData> {
    if path.is_file() {
        let reader = std::io::BufReader::new(std::fs::File::open(path)?);
        let split = corpus::read_split_jsonl(reader)
            .with_context(|| format!("reading split file {}", path.display()))?;
        let mut all = split.train.clone();
        all.extend(split.validation.clone());
        all.extend(split.test.clone());
        return Ok(LoadedData {
            train_pool: split.train.clone(),
            test: split.test.clone(),
            presplit: Some(split),
            all,
        });
    }
    let train_path = find_corpus_file(path, "train")?;
    let test_path = find_corpus_file(path, "test")?;
    let train_raw = corpus::parse_stance_file(&std::fs::read(&train_path)?)
        .with_context(|| format!("parsing {}", train_path.display()))?;
    let test_raw = corpus::parse_stance_file(&std::fs::read(&test_path)?)
        .with_context(|| format!("parsing {}", test_path.display()))?;
    let mut all = train_raw.clone();
    all.extend(test_raw.clone());
    Ok(LoadedData {
        train_pool: corpus::evaluation_examples(&train_raw),
        test: corpus::evaluation_examples(&test_raw),
        presplit: None,
        all,
    })
}

/// Atomic-enough JSON write: temp file in the same directory, then rename,
/// so a killed process never leaves a half-written manifest behind.
pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, serde_json::to_string_pretty(value)?)?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// Restrict a paradigm list: an explicit `--paradigm` narrows a sweep to
/// that paradigm; otherwise all three run.
pub fn sweep_paradigms(explicit: Option<Paradigm>) -> Vec<Paradigm> {
    match explicit {
        Some(paradigm) => vec![paradigm],
        None => Paradigm::ALL.to_vec(),
    }
}

//! Rationale elicitation: prompt rendering, zero-shot baseline
//! classification, label-conditioned rationale generation with validation
//! and retry, and the idempotent JSON-lines cache.

mod client;
mod mock;
mod store;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use client::{CompletionClient, CompletionError, FnClient, HttpCompletionClient};
pub use mock::MockClient;
pub use store::{build_rationale_store, RationaleStore, StoreRecord, StoreSummary, StoreViolation};

use crate::codec::{parse_generation, Paradigm, ParseOutcome};
use crate::corpus::{StanceExample, StanceLabel};
use crate::prompts::{self, PromptError, PromptKind};

/// Default environment variable holding service credentials.
pub const DEFAULT_API_KEY_ENV: &str = "STANCE_LLM_API_KEY";

/// Elicitation policy: retry budget, backoff, decoding caps, concurrency.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ElicitorConfig {
    /// Total completion calls allowed per example (validation failures and
    /// transient service errors both consume attempts).
    pub max_attempts: u32,
    /// Base delay for exponential backoff after a transient failure.
    pub backoff: Duration,
    /// Generation cap passed to the service.
    pub max_output_tokens: usize,
    /// Sampling temperature requested from the service.
    pub temperature: f64,
    /// Concurrent in-flight requests during batch elicitation.
    pub workers: usize,
}

impl Default for ElicitorConfig {
    fn default() -> Self {
        ElicitorConfig {
            max_attempts: 3,
            backoff: Duration::from_millis(500),
            max_output_tokens: 256,
            temperature: 0.0,
            workers: 4,
        }
    }
}

impl ElicitorConfig {
    /// No backoff delays; used by tests and the offline mock path.
    pub fn immediate(mut self) -> Self {
        self.backoff = Duration::ZERO;
        self
    }
}

/// A stance example plus its elicited rationale and provenance.
///
/// Invariant: the rationale begins with the answer stem naming the gold
/// label and the topic (up to case and whitespace); construction paths go
/// through [`validate_rationale`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalizedExample {
    pub example: StanceExample,
    pub rationale: String,
    pub service_id: String,
    pub attempts: u32,
    pub created_at: String,
}

#[derive(Debug, Error)]
pub enum ElicitError {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("service unavailable after {attempts} attempts: {last_error}")]
    ServiceUnavailable { attempts: u32, last_error: String },
    #[error("no conforming rationale for {id:?} after {attempts} attempts: {last_issue}")]
    RationaleValidationFailed {
        id: String,
        attempts: u32,
        last_issue: String,
    },
    #[error("cache line {line} is corrupt: {message}")]
    CacheCorrupt { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Render one of the three prompt templates. The gold label is required for
/// the label-conditioned explain prompt and rejected otherwise.
pub fn render_prompt(
    kind: PromptKind,
    topic: &str,
    comment: &str,
    gold: Option<StanceLabel>,
) -> Result<String, ElicitError> {
    Ok(prompts::render(kind, topic, comment, gold)?)
}

/// Check a completion against the rationale contract: it must begin with the
/// answer stem, the stem's verdict must equal the gold label, and the stem's
/// topic must match the example's topic.
pub fn validate_rationale(example: &StanceExample, rationale: &str) -> Result<(), String> {
    if rationale.trim().is_empty() {
        return Err("rationale is empty".to_string());
    }
    let stem = prompts::parse_rationale_stem(rationale)
        .ok_or_else(|| "completion does not begin with the answer stem".to_string())?;
    if stem.label != example.gold {
        return Err(format!(
            "stem names {:?} but the gold label is {:?}",
            stem.label.word(),
            example.gold.word()
        ));
    }
    let mut stem_words = stem.topic.split_whitespace();
    let mut topic_words = example.topic.split_whitespace();
    let topic_matches = loop {
        match (stem_words.next(), topic_words.next()) {
            (None, None) => break true,
            (Some(a), Some(b)) if a.eq_ignore_ascii_case(b) => {}
            _ => break false,
        }
    };
    if !topic_matches {
        return Err(format!(
            "stem names topic {:?} but the example topic is {:?}",
            stem.topic, example.topic
        ));
    }
    Ok(())
}

fn backoff_delay(config: &ElicitorConfig, attempt: u32) -> Duration {
    if config.backoff.is_zero() {
        return Duration::ZERO;
    }
    // capped exponential: base, 2x, 4x, ... up to 8x
    config.backoff * 2u32.pow(attempt.saturating_sub(1).min(3))
}

/// Classify an example zero-shot through the completion service.
///
/// The completion is parsed with the generation parser; an unrecoverable
/// label is a [`ParseOutcome`] with `failed` set, not an error. Transient
/// service failures retry with backoff up to the configured attempt budget.
pub fn classify_zero_shot(
    example: &StanceExample,
    client: &dyn CompletionClient,
    config: &ElicitorConfig,
) -> Result<ParseOutcome, ElicitError> {
    let prompt = render_prompt(
        PromptKind::ZeroShotClassify,
        &example.topic,
        &example.comment,
        None,
    )?;
    let mut last_error = String::new();
    for attempt in 1..=config.max_attempts.max(1) {
        match client.complete(&prompt, config.max_output_tokens) {
            Ok(completion) => return Ok(parse_generation(&completion, Paradigm::StFt)),
            Err(err) => {
                last_error = err.to_string();
                if !err.is_retryable() || attempt == config.max_attempts {
                    break;
                }
                std::thread::sleep(backoff_delay(config, attempt));
            }
        }
    }
    Err(ElicitError::ServiceUnavailable {
        attempts: config.max_attempts,
        last_error,
    })
}

/// Elicit a label-conditioned rationale, retrying until the completion
/// satisfies the stem-and-label contract or the attempt budget runs out.
/// The recorded attempt count equals the number of completion calls made.
pub fn elicit_rationale(
    example: &StanceExample,
    client: &dyn CompletionClient,
    config: &ElicitorConfig,
) -> Result<RationalizedExample, ElicitError> {
    let prompt = render_prompt(
        PromptKind::LabelConditionedExplain,
        &example.topic,
        &example.comment,
        Some(example.gold),
    )?;
    let max_attempts = config.max_attempts.max(1);
    let mut last_issue = String::new();
    let mut service_failed = false;
    for attempt in 1..=max_attempts {
        match client.complete(&prompt, config.max_output_tokens) {
            Ok(completion) => match validate_rationale(example, &completion) {
                Ok(()) => {
                    return Ok(RationalizedExample {
                        example: example.clone(),
                        rationale: completion.trim().to_string(),
                        service_id: client.id().to_string(),
                        attempts: attempt,
                        created_at: crate::util::timestamp_now(),
                    });
                }
                Err(issue) => {
                    service_failed = false;
                    last_issue = issue;
                }
            },
            Err(err) => {
                service_failed = true;
                last_issue = err.to_string();
                if !err.is_retryable() {
                    break;
                }
                if attempt < max_attempts {
                    std::thread::sleep(backoff_delay(config, attempt));
                }
            }
        }
    }
    if service_failed {
        Err(ElicitError::ServiceUnavailable {
            attempts: max_attempts,
            last_error: last_issue,
        })
    } else {
        Err(ElicitError::RationaleValidationFailed {
            id: example.id.clone(),
            attempts: max_attempts,
            last_issue,
        })
    }
}

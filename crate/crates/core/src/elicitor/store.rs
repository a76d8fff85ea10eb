//! JSON-lines rationale cache: idempotent batch building and validation.

use std::collections::HashSet;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{StanceExample, StanceLabel};

use super::{
    elicit_rationale, validate_rationale, CompletionClient, ElicitError, ElicitorConfig,
    RationalizedExample,
};

/// One cache line. `status` is `"ok"` or `"failed"`; failed entries keep the
/// attempt count and the failure reason but no rationale.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreRecord {
    pub id: String,
    pub topic: String,
    pub comment: String,
    pub gold: StanceLabel,
    pub rationale: Option<String>,
    pub service_id: String,
    pub attempts: u32,
    pub created_at: String,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl StoreRecord {
    fn from_rationalized(rex: &RationalizedExample) -> Self {
        StoreRecord {
            id: rex.example.id.clone(),
            topic: rex.example.topic.clone(),
            comment: rex.example.comment.clone(),
            gold: rex.example.gold,
            rationale: Some(rex.rationale.clone()),
            service_id: rex.service_id.clone(),
            attempts: rex.attempts,
            created_at: rex.created_at.clone(),
            status: "ok".to_string(),
            error: None,
        }
    }

    fn from_failure(example: &StanceExample, service_id: &str, attempts: u32, error: &ElicitError) -> Self {
        StoreRecord {
            id: example.id.clone(),
            topic: example.topic.clone(),
            comment: example.comment.clone(),
            gold: example.gold,
            rationale: None,
            service_id: service_id.to_string(),
            attempts,
            created_at: crate::util::timestamp_now(),
            status: "failed".to_string(),
            error: Some(error.to_string()),
        }
    }
}

/// Counts reported by [`build_rationale_store`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreSummary {
    pub cached: usize,
    pub newly_elicited: usize,
    pub failed: usize,
}

/// An in-memory view of the rationale cache.
#[derive(Debug, Clone, Default)]
pub struct RationaleStore {
    records: Vec<StoreRecord>,
}

/// A stem-invariant violation found by [`RationaleStore::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoreViolation {
    pub id: String,
    pub issue: String,
}

impl RationaleStore {
    pub fn load(path: &Path) -> Result<Self, ElicitError> {
        if !path.exists() {
            return Ok(RationaleStore::default());
        }
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut records = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: StoreRecord =
                serde_json::from_str(&line).map_err(|e| ElicitError::CacheCorrupt {
                    line: idx + 1,
                    message: e.to_string(),
                })?;
            records.push(record);
        }
        Ok(RationaleStore { records })
    }

    pub fn records(&self) -> &[StoreRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.records.iter().any(|r| r.id == id)
    }

    /// The stored rationale for an example id, if elicitation succeeded.
    pub fn rationale_for(&self, id: &str) -> Option<&str> {
        self.records
            .iter()
            .find(|r| r.id == id && r.status == "ok")
            .and_then(|r| r.rationale.as_deref())
    }

    /// Rebuild the [`RationalizedExample`] for a corpus example, if cached.
    pub fn rationalized(&self, example: &StanceExample) -> Option<RationalizedExample> {
        let record = self
            .records
            .iter()
            .find(|r| r.id == example.id && r.status == "ok")?;
        Some(RationalizedExample {
            example: example.clone(),
            rationale: record.rationale.clone()?,
            service_id: record.service_id.clone(),
            attempts: record.attempts,
            created_at: record.created_at.clone(),
        })
    }

    /// Scan every ok record against the stem-and-label invariant.
    pub fn validate(&self) -> Vec<StoreViolation> {
        let mut violations = Vec::new();
        for record in &self.records {
            if record.status != "ok" {
                continue;
            }
            let example = StanceExample {
                id: record.id.clone(),
                topic: record.topic.clone(),
                comment: record.comment.clone(),
                gold: record.gold,
            };
            let rationale = record.rationale.as_deref().unwrap_or("");
            if let Err(issue) = validate_rationale(&example, rationale) {
                violations.push(StoreViolation {
                    id: record.id.clone(),
                    issue,
                });
            }
        }
        violations
    }
}

/// Elicit rationales for every example not already in the cache, appending
/// results (and failure markers) to the JSON-lines file at `cache_path`.
///
/// Idempotent by example id: a rerun with the same inputs appends nothing.
/// Failures are recorded and do not abort the batch. Up to `config.workers`
/// requests run concurrently; appends happen in input order through a single
/// writer.
pub fn build_rationale_store(
    examples: &[StanceExample],
    client: &dyn CompletionClient,
    cache_path: &Path,
    config: &ElicitorConfig,
) -> Result<StoreSummary, ElicitError> {
    let existing = RationaleStore::load(cache_path)?;
    let known: HashSet<&str> = existing.records.iter().map(|r| r.id.as_str()).collect();

    let todo: Vec<&StanceExample> = examples
        .iter()
        .filter(|e| !known.contains(e.id.as_str()))
        .collect();
    let mut summary = StoreSummary {
        cached: examples.len() - todo.len(),
        ..StoreSummary::default()
    };
    if todo.is_empty() {
        return Ok(summary);
    }

    if let Some(parent) = cache_path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(cache_path)?;

    let workers = config.workers.max(1);
    for chunk in todo.chunks(workers) {
        let results: Vec<Result<RationalizedExample, (u32, ElicitError)>> = if workers == 1 {
            chunk
                .iter()
                .map(|example| elicit_with_attempts(example, client, config))
                .collect()
        } else {
            std::thread::scope(|scope| {
                let handles: Vec<_> = chunk
                    .iter()
                    .map(|example| scope.spawn(move || elicit_with_attempts(example, client, config)))
                    .collect();
                handles.into_iter().map(|h| h.join().expect("elicitation worker panicked")).collect()
            })
        };

        for (example, result) in chunk.iter().zip(results) {
            let record = match result {
                Ok(rex) => {
                    summary.newly_elicited += 1;
                    StoreRecord::from_rationalized(&rex)
                }
                Err((attempts, error)) => {
                    summary.failed += 1;
                    log::warn!("rationale elicitation failed for {}: {error}", example.id);
                    StoreRecord::from_failure(example, client.id(), attempts, &error)
                }
            };
            serde_json::to_writer(&mut file, &record)
                .map_err(std::io::Error::other)?;
            file.write_all(b"\n")?;
        }
        file.flush()?;
    }
    Ok(summary)
}

fn elicit_with_attempts(
    example: &StanceExample,
    client: &dyn CompletionClient,
    config: &ElicitorConfig,
) -> Result<RationalizedExample, (u32, ElicitError)> {
    elicit_rationale(example, client, config).map_err(|err| {
        let attempts = match &err {
            ElicitError::ServiceUnavailable { attempts, .. } => *attempts,
            ElicitError::RationaleValidationFailed { attempts, .. } => *attempts,
            _ => 0,
        };
        (attempts, err)
    })
}

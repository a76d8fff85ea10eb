//! SemEval-style stance corpus: parsing, splits, subsampling, statistics.
//!
//! The on-disk input format is the official tab-separated layout with a
//! header row (`ID<TAB>Target<TAB>Tweet<TAB>Stance`). Stance strings map
//! case-insensitively (`FAVOR`, `AGAINST`, `NONE`/`NEUTRAL`) and a terminal
//! `#SemST` marker token is stripped from tweets.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::util::derive_seed;

/// The topic that appears in the corpus statistics but is excluded from the
/// evaluation topic set (it has no training data in the official split).
pub const EXCLUDED_EVAL_TOPIC: &str = "Donald Trump";

/// A stance toward a topic: favor, against, or neutral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StanceLabel {
    Favor,
    Against,
    Neutral,
}

impl StanceLabel {
    pub const ALL: [StanceLabel; 3] = [StanceLabel::Favor, StanceLabel::Against, StanceLabel::Neutral];

    /// The verbalizer word used as generation target and in rationale stems.
    pub fn word(self) -> &'static str {
        match self {
            StanceLabel::Favor => "favor",
            StanceLabel::Against => "against",
            StanceLabel::Neutral => "neutral",
        }
    }

    /// Parse a verbalizer word, case-insensitively.
    pub fn from_word(word: &str) -> Option<Self> {
        let w = word.trim();
        Self::ALL
            .into_iter()
            .find(|label| w.eq_ignore_ascii_case(label.word()))
    }

    /// Parse a raw corpus stance string. The official data uses upper-case
    /// tags and `NONE` for the neutral class.
    pub fn from_corpus_tag(tag: &str) -> Option<Self> {
        let t = tag.trim();
        if t.eq_ignore_ascii_case("favor") {
            Some(StanceLabel::Favor)
        } else if t.eq_ignore_ascii_case("against") {
            Some(StanceLabel::Against)
        } else if t.eq_ignore_ascii_case("none") || t.eq_ignore_ascii_case("neutral") {
            Some(StanceLabel::Neutral)
        } else {
            None
        }
    }

    /// Corpus-style tag used when serializing back to the tab-separated format.
    pub fn corpus_tag(self) -> &'static str {
        match self {
            StanceLabel::Favor => "FAVOR",
            StanceLabel::Against => "AGAINST",
            StanceLabel::Neutral => "NONE",
        }
    }
}

impl std::fmt::Display for StanceLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.word())
    }
}

/// One annotated post: identifier, topic, comment text, and gold label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StanceExample {
    pub id: String,
    pub topic: String,
    pub comment: String,
    pub gold: StanceLabel,
}

/// Per-topic label counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub favor: usize,
    pub against: usize,
    pub neutral: usize,
}

impl LabelCounts {
    pub fn total(&self) -> usize {
        self.favor + self.against + self.neutral
    }

    fn bump(&mut self, label: StanceLabel) {
        match label {
            StanceLabel::Favor => self.favor += 1,
            StanceLabel::Against => self.against += 1,
            StanceLabel::Neutral => self.neutral += 1,
        }
    }

    fn add(&mut self, other: &LabelCounts) {
        self.favor += other.favor;
        self.against += other.against;
        self.neutral += other.neutral;
    }
}

/// Per-topic and total label statistics.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub per_topic: BTreeMap<String, LabelCounts>,
}

impl CorpusStats {
    pub fn totals(&self) -> LabelCounts {
        let mut totals = LabelCounts::default();
        for counts in self.per_topic.values() {
            totals.add(counts);
        }
        totals
    }

    pub fn topic(&self, topic: &str) -> LabelCounts {
        self.per_topic.get(topic).copied().unwrap_or_default()
    }

    /// Emit CSV with columns `topic,favor,against,neutral`, one row per topic
    /// plus a final `ALL` totals row.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), CorpusError> {
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record(["topic", "favor", "against", "neutral"])?;
        for (topic, counts) in &self.per_topic {
            csv.write_record([
                topic.as_str(),
                &counts.favor.to_string(),
                &counts.against.to_string(),
                &counts.neutral.to_string(),
            ])?;
        }
        let totals = self.totals();
        csv.write_record([
            "ALL",
            &totals.favor.to_string(),
            &totals.against.to_string(),
            &totals.neutral.to_string(),
        ])?;
        csv.flush()?;
        Ok(())
    }
}

/// Train/validation/test partitions with the seed that produced them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSplit {
    pub train: Vec<StanceExample>,
    pub validation: Vec<StanceExample>,
    pub test: Vec<StanceExample>,
    pub seed: u64,
}

impl CorpusSplit {
    /// Attach the official test partition. The test set is never resampled;
    /// it is carried alongside the train/validation split.
    pub fn attach_test(mut self, test: Vec<StanceExample>) -> Result<Self, CorpusError> {
        for example in &test {
            if self.train.iter().any(|e| e.id == example.id)
                || self.validation.iter().any(|e| e.id == example.id)
            {
                return Err(CorpusError::OverlappingIds {
                    id: example.id.clone(),
                });
            }
        }
        self.test = test;
        Ok(self)
    }

    pub fn fingerprint(&self) -> String {
        let records = self
            .train
            .iter()
            .map(|e| ("train", e))
            .chain(self.validation.iter().map(|e| ("validation", e)))
            .chain(self.test.iter().map(|e| ("test", e)))
            .map(|(part, e)| format!("{part}\t{}\t{}\t{}\t{}", e.id, e.topic, e.comment, e.gold));
        crate::util::fingerprint(records)
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("input is not valid UTF-8")]
    InvalidUtf8,
    #[error("line {line}: expected at least 4 tab-separated fields, found {found}")]
    MalformedRow { line: usize, found: usize },
    #[error("line {line}: unknown stance string {value:?}")]
    UnknownStanceString { line: usize, value: String },
    #[error("line {line}: comment is empty after trimming")]
    EmptyComment { line: usize },
    #[error("cannot split an empty example pool")]
    EmptyPool,
    #[error("invalid fraction {0}")]
    InvalidFraction(f64),
    #[error("example id {id:?} appears in more than one partition")]
    OverlappingIds { id: String },
    #[error("split file line {line}: {message}")]
    BadSplitRecord { line: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Strip terminal corpus hashtag markers (`#SemST`) from a comment, then trim.
fn strip_hashtag_marker(comment: &str) -> String {
    let mut text = comment.trim();
    // the marker appears with inconsistent casing in derived files; the
    // matched suffix is pure ASCII, so the byte offset is a char boundary
    while text.len() >= 6 && text.as_bytes()[text.len() - 6..].eq_ignore_ascii_case(b"#semst") {
        text = text[..text.len() - 6].trim_end();
    }
    text.trim().to_string()
}

/// Parse the tab-separated stance format: header line first, then one record
/// per line with at least 4 fields (id, target, tweet, stance). Accepts LF or
/// CRLF line endings; tabs inside the tweet field are preserved.
pub fn parse_stance_file(raw: &[u8]) -> Result<Vec<StanceExample>, CorpusError> {
    let text = std::str::from_utf8(raw).map_err(|_| CorpusError::InvalidUtf8)?;
    let mut examples = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line_no == 1 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 4 {
            return Err(CorpusError::MalformedRow {
                line: line_no,
                found: fields.len(),
            });
        }
        let stance_raw = fields[fields.len() - 1].trim();
        let gold = StanceLabel::from_corpus_tag(stance_raw).ok_or_else(|| {
            CorpusError::UnknownStanceString {
                line: line_no,
                value: stance_raw.to_string(),
            }
        })?;
        let comment = strip_hashtag_marker(&fields[2..fields.len() - 1].join("\t"));
        if comment.is_empty() {
            return Err(CorpusError::EmptyComment { line: line_no });
        }
        examples.push(StanceExample {
            id: fields[0].trim().to_string(),
            topic: fields[1].trim().to_string(),
            comment,
            gold,
        });
    }
    Ok(examples)
}

/// Serialize examples back to the tab-separated format (header included).
/// Re-parsing the output yields the same example list.
pub fn serialize_examples(examples: &[StanceExample]) -> String {
    let mut out = String::from("ID\tTarget\tTweet\tStance\n");
    for example in examples {
        debug_assert!(!example.comment.contains('\n'));
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            example.id,
            example.topic,
            example.comment,
            example.gold.corpus_tag()
        ));
    }
    out
}

/// Exact per-topic per-label counts.
pub fn compute_stats(examples: &[StanceExample]) -> CorpusStats {
    let mut stats = CorpusStats::default();
    for example in examples {
        stats
            .per_topic
            .entry(example.topic.clone())
            .or_default()
            .bump(example.gold);
    }
    stats
}

/// Topic-stratified train/validation split.
///
/// Within each topic the examples are shuffled by a seeded RNG and
/// `ceil(val_fraction * topic_size)` of them move to validation, so every
/// topic present in the pool is represented in validation. Deterministic for
/// a fixed seed; the test partition starts empty (see
/// [`CorpusSplit::attach_test`]).
pub fn make_split(
    train_pool: &[StanceExample],
    val_fraction: f64,
    seed: u64,
) -> Result<CorpusSplit, CorpusError> {
    if train_pool.is_empty() {
        return Err(CorpusError::EmptyPool);
    }
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(CorpusError::InvalidFraction(val_fraction));
    }

    let mut by_topic: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (idx, example) in train_pool.iter().enumerate() {
        by_topic.entry(&example.topic).or_default().push(idx);
    }

    let mut val_indices = Vec::new();
    for (topic, mut indices) in by_topic {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &["split", topic]));
        indices.shuffle(&mut rng);
        let take = ((val_fraction * indices.len() as f64).ceil() as usize).min(indices.len());
        val_indices.extend_from_slice(&indices[..take]);
    }
    val_indices.sort_unstable();

    let mut validation = Vec::with_capacity(val_indices.len());
    let mut train = Vec::with_capacity(train_pool.len() - val_indices.len());
    let mut next_val = val_indices.iter().peekable();
    for (idx, example) in train_pool.iter().enumerate() {
        if next_val.peek() == Some(&&idx) {
            validation.push(example.clone());
            next_val.next();
        } else {
            train.push(example.clone());
        }
    }

    Ok(CorpusSplit {
        train,
        validation,
        test: Vec::new(),
        seed,
    })
}

/// Stratified (topic, label) subsample of the training set.
///
/// Sampling is nested: for a fixed seed, the ids selected at a smaller
/// fraction are a subset of those selected at any larger fraction, so
/// size-sweep curves compare paired subsets rather than independent draws.
pub fn subsample(
    train: &[StanceExample],
    fraction: f64,
    seed: u64,
) -> Result<Vec<StanceExample>, CorpusError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(CorpusError::InvalidFraction(fraction));
    }

    let mut strata: BTreeMap<(&str, StanceLabel), Vec<usize>> = BTreeMap::new();
    for (idx, example) in train.iter().enumerate() {
        strata
            .entry((&example.topic, example.gold))
            .or_default()
            .push(idx);
    }

    let mut keep = Vec::new();
    for ((topic, label), mut indices) in strata {
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(seed, &["subsample", topic, label.word()]));
        indices.shuffle(&mut rng);
        let take = ((fraction * indices.len() as f64).ceil() as usize).min(indices.len());
        keep.extend_from_slice(&indices[..take]);
    }
    keep.sort_unstable();
    Ok(keep.into_iter().map(|idx| train[idx].clone()).collect())
}

/// Drop examples whose topic is outside the evaluation topic set.
pub fn evaluation_examples(examples: &[StanceExample]) -> Vec<StanceExample> {
    examples
        .iter()
        .filter(|e| e.topic != EXCLUDED_EVAL_TOPIC)
        .cloned()
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct SplitRecord<'a> {
    id: &'a str,
    topic: &'a str,
    comment: &'a str,
    gold: StanceLabel,
    partition: &'a str,
}

/// Persist a split as JSON-lines records `{id, topic, comment, gold, partition}`.
pub fn write_split_jsonl<W: Write>(split: &CorpusSplit, mut writer: W) -> Result<(), CorpusError> {
    let parts = [
        ("train", &split.train),
        ("validation", &split.validation),
        ("test", &split.test),
    ];
    for (partition, examples) in parts {
        for example in examples.iter() {
            let record = SplitRecord {
                id: &example.id,
                topic: &example.topic,
                comment: &example.comment,
                gold: example.gold,
                partition,
            };
            serde_json::to_writer(&mut writer, &record)
                .map_err(std::io::Error::other)?;
            writer.write_all(b"\n")?;
        }
    }
    Ok(())
}

/// Read a split back from JSON-lines. The seed is not stored in the record
/// format; it lives in the resolved-config snapshot written next to outputs.
pub fn read_split_jsonl<R: BufRead>(reader: R) -> Result<CorpusSplit, CorpusError> {
    #[derive(Deserialize)]
    struct OwnedRecord {
        id: String,
        topic: String,
        comment: String,
        gold: StanceLabel,
        partition: String,
    }

    let mut split = CorpusSplit {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        seed: 0,
    };
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: OwnedRecord =
            serde_json::from_str(&line).map_err(|e| CorpusError::BadSplitRecord {
                line: idx + 1,
                message: e.to_string(),
            })?;
        let example = StanceExample {
            id: record.id,
            topic: record.topic,
            comment: record.comment,
            gold: record.gold,
        };
        match record.partition.as_str() {
            "train" => split.train.push(example),
            "validation" => split.validation.push(example),
            "test" => split.test.push(example),
            other => {
                return Err(CorpusError::BadSplitRecord {
                    line: idx + 1,
                    message: format!("unknown partition {other:?}"),
                })
            }
        }
    }
    Ok(split)
}

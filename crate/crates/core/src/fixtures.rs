//! Deterministic fixture corpora.
//!
//! `toy_corpus` is a 32-example set small enough for the tiny backend to
//! memorize within a couple hundred optimizer steps, used by the training
//! probes. `write_semeval_fixture` emits synthetic files in the official
//! tab-separated layout whose per-topic label counts match the published
//! statistics of the real corpus, so the ingestion and statistics paths can
//! be exercised without redistributing tweet text. Point
//! `STANCE_SEMEVAL_DIR` at the official files to run the same checks on the
//! real data.

use std::path::{Path, PathBuf};

use crate::corpus::{StanceExample, StanceLabel};

/// Environment variable naming a directory with the official corpus files
/// (`train.txt` and `test.txt` in the tab-separated layout).
pub const SEMEVAL_DIR_ENV: &str = "STANCE_SEMEVAL_DIR";

const TOY_TOPICS: [&str; 4] = ["cats", "tea", "rain", "chess"];

const FAVOR_TEMPLATES: [&str; 3] = [
    "{t} delights everyone",
    "{t} deserves praise",
    "{t} feels wonderful",
];
const AGAINST_TEMPLATES: [&str; 3] = [
    "{t} annoys everyone",
    "{t} deserves scorn",
    "{t} feels dreadful",
];
const NEUTRAL_TEMPLATES: [&str; 2] = ["{t} appears often", "{t} exists today"];

/// 32 examples over 4 topics: per topic 3 favor, 3 against, 2 neutral.
/// Every comment contains its topic word.
pub fn toy_corpus() -> Vec<StanceExample> {
    let mut examples = Vec::with_capacity(32);
    let mut next_id = 0usize;
    let mut push = |topic: &str, template: &str, gold: StanceLabel, examples: &mut Vec<StanceExample>| {
        examples.push(StanceExample {
            id: format!("toy-{next_id:03}"),
            topic: topic.to_string(),
            comment: template.replace("{t}", topic),
            gold,
        });
        next_id += 1;
    };
    for topic in TOY_TOPICS {
        for template in FAVOR_TEMPLATES {
            push(topic, template, StanceLabel::Favor, &mut examples);
        }
        for template in AGAINST_TEMPLATES {
            push(topic, template, StanceLabel::Against, &mut examples);
        }
        for template in NEUTRAL_TEMPLATES {
            push(topic, template, StanceLabel::Neutral, &mut examples);
        }
    }
    examples
}

/// Published per-topic (favor, against, neutral) counts for the six-topic
/// corpus the framework targets.
pub fn reference_topic_counts() -> [(&'static str, usize, usize, usize); 6] {
    [
        ("Donald Trump", 148, 299, 260),
        ("Hillary Clinton", 163, 565, 356),
        ("Feminist Movement", 268, 511, 170),
        ("Legalization of Abortion", 167, 544, 222),
        ("Atheism", 124, 464, 145),
        ("Climate Change is Concern", 335, 26, 203),
    ]
}

fn topic_slug(topic: &str) -> String {
    topic
        .split_whitespace()
        .map(|w| w.to_lowercase())
        .collect::<Vec<_>>()
        .join("-")
}

fn fixture_rows(topic: &str, label: StanceLabel, count: usize) -> Vec<String> {
    let slug = topic_slug(topic);
    let key = topic
        .split_whitespace()
        .next()
        .unwrap_or("topic")
        .to_lowercase();
    // a per-label series letter keeps tweets unique across labels of the
    // same topic
    let series = match label {
        StanceLabel::Favor => "alpha",
        StanceLabel::Against => "bravo",
        StanceLabel::Neutral => "delta",
    };
    (0..count)
        .map(|i| {
            let id = format!("{slug}-{}-{i:04}", label.word());
            let tweet =
                format!("synthetic {key} post number {i} in series {series} with assorted musings #SemST");
            format!("{id}\t{topic}\t{tweet}\t{}", label.corpus_tag())
        })
        .collect()
}

/// Write synthetic `train.txt` and `test.txt` files whose combined per-topic
/// label counts equal [`reference_topic_counts`]. The Donald Trump topic has
/// no training rows, mirroring the official distribution. Returns the two
/// paths.
pub fn write_semeval_fixture(dir: &Path) -> std::io::Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let header = "ID\tTarget\tTweet\tStance";
    let mut train_rows = vec![header.to_string()];
    let mut test_rows = vec![header.to_string()];

    for (topic, favor, against, neutral) in reference_topic_counts() {
        for (label, count) in [
            (StanceLabel::Favor, favor),
            (StanceLabel::Against, against),
            (StanceLabel::Neutral, neutral),
        ] {
            let rows = fixture_rows(topic, label, count);
            if topic == crate::corpus::EXCLUDED_EVAL_TOPIC {
                test_rows.extend(rows);
            } else {
                let test_count = count / 4;
                let (test_part, train_part) = rows.split_at(test_count);
                test_rows.extend_from_slice(test_part);
                train_rows.extend_from_slice(train_part);
            }
        }
    }

    let train_path = dir.join("train.txt");
    let test_path = dir.join("test.txt");
    std::fs::write(&train_path, train_rows.join("\n") + "\n")?;
    std::fs::write(&test_path, test_rows.join("\n") + "\n")?;
    Ok((train_path, test_path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{compute_stats, parse_stance_file};

    #[test]
    fn toy_corpus_shape() {
        let corpus = toy_corpus();
        assert_eq!(corpus.len(), 32);
        let stats = compute_stats(&corpus);
        assert_eq!(stats.per_topic.len(), 4);
        for topic in TOY_TOPICS {
            let counts = stats.topic(topic);
            assert_eq!((counts.favor, counts.against, counts.neutral), (3, 3, 2));
        }
        // ids unique, comments mention their topic
        let mut ids: Vec<_> = corpus.iter().map(|e| &e.id).collect();
        ids.dedup();
        assert_eq!(ids.len(), 32);
        assert!(corpus.iter().all(|e| e.comment.contains(&e.topic)));
    }

    #[test]
    fn fixture_reproduces_reference_counts() {
        let dir = tempfile::tempdir().unwrap();
        let (train_path, test_path) = write_semeval_fixture(dir.path()).unwrap();
        let mut examples = parse_stance_file(&std::fs::read(&train_path).unwrap()).unwrap();
        examples.extend(parse_stance_file(&std::fs::read(&test_path).unwrap()).unwrap());
        let stats = compute_stats(&examples);
        for (topic, favor, against, neutral) in reference_topic_counts() {
            let counts = stats.topic(topic);
            assert_eq!(
                (counts.favor, counts.against, counts.neutral),
                (favor, against, neutral),
                "counts for {topic}"
            );
        }
    }
}

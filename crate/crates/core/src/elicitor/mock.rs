//! Deterministic offline completion client.
//!
//! The mock answers rationale prompts with the required answer stem plus a
//! short clause built from tokens of the comment, and classification prompts
//! with either a gold-oracle echo (when constructed from a labeled corpus)
//! or a hash-derived label. Identical prompts always produce identical
//! completions, which makes the whole elicitation pipeline reproducible
//! bit-for-bit without a network dependency.

use std::collections::HashMap;

use crate::corpus::{StanceExample, StanceLabel};
use crate::util::fnv1a64;

use super::client::{CompletionClient, CompletionError};

/// Clause templates deliberately avoid label words and the stance marker so
/// the generated text never confuses the downstream parser. They stay short:
/// the toy training probes memorize these as generation targets.
const CLAUSE_TEMPLATES: [&str; 4] = [
    "it cites {b}",
    "it notes {b}",
    "it flags {b}",
    "it reads {b}",
];

pub struct MockClient {
    gold: HashMap<String, StanceLabel>,
}

impl MockClient {
    pub fn new() -> Self {
        MockClient {
            gold: HashMap::new(),
        }
    }

    /// Attach a gold oracle keyed by comment text. Classification prompts
    /// echo the gold label when the comment shares a token with the topic,
    /// and answer neutral otherwise.
    pub fn with_gold_oracle(examples: &[StanceExample]) -> Self {
        MockClient {
            gold: examples
                .iter()
                .map(|e| (e.comment.clone(), e.gold))
                .collect(),
        }
    }

    fn answer_explain(&self, prompt: &str) -> String {
        let stem = extract_quoted_stem(prompt).unwrap_or_default();
        let comment = extract_field(prompt, "Comment: ").unwrap_or_default();
        format!("{stem} {}.", clause_for(&comment))
    }

    fn answer_classify(&self, prompt: &str) -> String {
        let topic = extract_field(prompt, "Topic: ").unwrap_or_default();
        let comment = extract_field(prompt, "Comment: ").unwrap_or_default();
        let label = match self.gold.get(&comment) {
            Some(&gold) if shares_token(&comment, &topic) => gold,
            Some(_) => StanceLabel::Neutral,
            None => {
                let h = fnv1a64(format!("{topic}\u{1}{comment}").as_bytes());
                StanceLabel::ALL[(h % 3) as usize]
            }
        };
        format!("Stance: {label}.")
    }
}

impl Default for MockClient {
    fn default() -> Self {
        Self::new()
    }
}

impl CompletionClient for MockClient {
    fn id(&self) -> &str {
        "mock"
    }

    fn complete(&self, prompt: &str, _max_tokens: usize) -> Result<String, CompletionError> {
        if prompt.contains("Your answer should begin with:") {
            Ok(self.answer_explain(prompt))
        } else {
            Ok(self.answer_classify(prompt))
        }
    }
}

fn extract_field(prompt: &str, marker: &str) -> Option<String> {
    prompt
        .lines()
        .find_map(|line| line.strip_prefix(marker))
        .map(|rest| rest.trim().to_string())
}

fn extract_quoted_stem(prompt: &str) -> Option<String> {
    let start = prompt.find("begin with: \"")? + "begin with: \"".len();
    let end = prompt[start..].find('"')? + start;
    Some(prompt[start..end].to_string())
}

fn content_tokens(text: &str) -> Vec<&str> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.len() >= 3)
        .collect()
}

fn clause_for(comment: &str) -> String {
    let tokens = content_tokens(comment);
    let b = tokens.last().copied().unwrap_or("the wording");
    let template = CLAUSE_TEMPLATES[(fnv1a64(comment.as_bytes()) % CLAUSE_TEMPLATES.len() as u64) as usize];
    template.replacen("{b}", &b.to_lowercase(), 1)
}

fn shares_token(comment: &str, topic: &str) -> bool {
    let comment_lower = comment.to_lowercase();
    let comment_tokens: Vec<&str> = content_tokens(&comment_lower);
    topic
        .to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.len() >= 3)
        .any(|t| comment_tokens.contains(&t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompts::{self, PromptKind};

    #[test]
    fn explain_completion_carries_the_stem() {
        let client = MockClient::new();
        let prompt = prompts::render(
            PromptKind::LabelConditionedExplain,
            "Atheism",
            "god is dead",
            Some(StanceLabel::Against),
        )
        .unwrap();
        let completion = client.complete(&prompt, 256).unwrap();
        assert!(
            completion.starts_with("The comment is classified as against towards Atheism because"),
            "unexpected completion {completion:?}"
        );
        // deterministic
        assert_eq!(completion, client.complete(&prompt, 256).unwrap());
    }

    #[test]
    fn classify_echoes_oracle_when_topic_token_present() {
        let examples = vec![StanceExample {
            id: "1".into(),
            topic: "Atheism".into(),
            comment: "atheism frees the mind".into(),
            gold: StanceLabel::Favor,
        }];
        let client = MockClient::with_gold_oracle(&examples);
        let prompt = prompts::render(
            PromptKind::ZeroShotClassify,
            "Atheism",
            "atheism frees the mind",
            None,
        )
        .unwrap();
        assert_eq!(client.complete(&prompt, 16).unwrap(), "Stance: favor.");
    }

    #[test]
    fn classify_answers_neutral_without_topic_token() {
        let examples = vec![StanceExample {
            id: "1".into(),
            topic: "Atheism".into(),
            comment: "nice weather today".into(),
            gold: StanceLabel::Favor,
        }];
        let client = MockClient::with_gold_oracle(&examples);
        let prompt =
            prompts::render(PromptKind::ZeroShotClassify, "Atheism", "nice weather today", None)
                .unwrap();
        assert_eq!(client.complete(&prompt, 16).unwrap(), "Stance: neutral.");
    }

    #[test]
    fn clause_avoids_parser_hazards() {
        for comment in ["a", "stance words everywhere", "x y z w", ""] {
            let clause = clause_for(comment);
            assert!(!clause.to_lowercase().contains("stance:"), "{clause}");
        }
    }
}

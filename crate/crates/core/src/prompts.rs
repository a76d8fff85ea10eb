//! Prompt templates: zero-shot classification, label-conditioned rationale
//! elicitation, and the unified instruction block used by instructed
//! text-to-text inputs.

use thiserror::Error;

use crate::corpus::StanceLabel;

/// Which template to render.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptKind {
    /// Classify the stance directly; the completion is expected to conclude
    /// with the label.
    ZeroShotClassify,
    /// Explain why the comment holds its (given) gold stance; the completion
    /// must begin with the fixed answer stem.
    LabelConditionedExplain,
    /// Unified instruction block whose completion carries both the stance
    /// and an explanation.
    UnifiedInstruction,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("label-conditioned prompt requires a gold label")]
    MissingGoldLabel,
    #[error("gold label is only accepted by the label-conditioned prompt")]
    UnexpectedGoldLabel,
}

const CLASSIFY_INSTRUCTION: &str = "Your task is to classify the stance of the comment on the topic as \"favor\", \"against\", or \"neutral\".";

const EXPLAIN_INSTRUCTION: &str = "Explain the stance of the comment towards the topic by analyzing its content and relation to the topic.";

/// The fixed answer stem a label-conditioned rationale must begin with.
pub fn rationale_stem(gold: StanceLabel, topic: &str) -> String {
    format!(
        "The comment is classified as {} towards {} because",
        gold.word(),
        topic
    )
}

/// A rationale decomposed at its answer stem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StemMatch {
    /// The stance word named by the stem's verdict slot.
    pub label: StanceLabel,
    /// The topic text between "towards" and "because".
    pub topic: String,
    /// Everything after "because".
    pub body: String,
}

/// Match a rationale against the answer stem, tolerating case and
/// surrounding whitespace. Returns `None` when the text does not begin with
/// the stem.
pub fn parse_rationale_stem(text: &str) -> Option<StemMatch> {
    static STEM: std::sync::OnceLock<regex::Regex> = std::sync::OnceLock::new();
    let re = STEM.get_or_init(|| {
        regex::RegexBuilder::new(
            r"^\s*the\s+comment\s+is\s+classified\s+as\s+(favor|against|neutral)\s+towards\s+(.+?)\s+because\b[ \t]*(.*)$",
        )
        .case_insensitive(true)
        .dot_matches_new_line(true)
        .build()
        .expect("stem regex is valid")
    });
    let caps = re.captures(text)?;
    Some(StemMatch {
        label: StanceLabel::from_word(&caps[1])?,
        topic: caps[2].trim().to_string(),
        body: caps[3].trim().to_string(),
    })
}

/// Instruction block shared by instructed training inputs: the task
/// instruction followed by the filled topic and comment lines, no trailing
/// output cues.
pub fn instruction_block(topic: &str, comment: &str) -> String {
    format!("{CLASSIFY_INSTRUCTION}\nTopic: {topic}\nComment: {comment}")
}

/// Render a prompt. `gold` is required for [`PromptKind::LabelConditionedExplain`]
/// and rejected for the other kinds.
pub fn render(
    kind: PromptKind,
    topic: &str,
    comment: &str,
    gold: Option<StanceLabel>,
) -> Result<String, PromptError> {
    match kind {
        PromptKind::ZeroShotClassify => {
            if gold.is_some() {
                return Err(PromptError::UnexpectedGoldLabel);
            }
            Ok(format!(
                "{CLASSIFY_INSTRUCTION} Conclude with the label.\nTopic: {topic}\nComment: {comment}\nStance:"
            ))
        }
        PromptKind::LabelConditionedExplain => {
            let gold = gold.ok_or(PromptError::MissingGoldLabel)?;
            Ok(format!(
                "{EXPLAIN_INSTRUCTION}\nTopic: {topic}\nComment: {comment}\nYour answer should begin with: \"{}\"",
                rationale_stem(gold, topic)
            ))
        }
        PromptKind::UnifiedInstruction => {
            if gold.is_some() {
                return Err(PromptError::UnexpectedGoldLabel);
            }
            Ok(format!(
                "{}\nStance:\nExplain:",
                instruction_block(topic, comment)
            ))
        }
    }
}

//! Text-in/text-out encoding for the three finetuning paradigms and robust
//! parsing of generated text back to stance labels.
//!
//! Encoders map structured examples onto (input, target) text pairs:
//!
//! * ST-FT — input is topic and comment joined by an end-of-sentence
//!   separator (or the instruction block), target is the verbalizer word.
//! * ST-CoT — target is the rationale body with the label-revealing stem
//!   removed, followed by `Stance:` and the verbalizer word, restoring
//!   rationale-before-label ordering.
//! * MTL — two task-prefixed instances per example: `Stance:` with the
//!   verbalizer target and `Explain:` with the full rationale target.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{StanceExample, StanceLabel};
use crate::elicitor::RationalizedExample;
use crate::prompts;

/// The marker that separates a generated rationale from the verdict word.
/// The parser keys on this literal, so it is not configurable.
pub const STANCE_MARKER: &str = "Stance:";

/// Finetuning paradigm that produced a training instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Paradigm {
    StFt,
    StCot,
    Mtl,
}

impl Paradigm {
    pub const ALL: [Paradigm; 3] = [Paradigm::StFt, Paradigm::StCot, Paradigm::Mtl];

    pub fn name(self) -> &'static str {
        match self {
            Paradigm::StFt => "st-ft",
            Paradigm::StCot => "st-cot",
            Paradigm::Mtl => "mtl",
        }
    }
}

impl std::fmt::Display for Paradigm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Paradigm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "st-ft" | "stft" => Ok(Paradigm::StFt),
            "st-cot" | "stcot" => Ok(Paradigm::StCot),
            "mtl" => Ok(Paradigm::Mtl),
            other => Err(format!("unknown paradigm {other:?} (expected st-ft, st-cot, or mtl)")),
        }
    }
}

/// Which task a training instance supervises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskTag {
    StanceTask,
    RationaleTask,
}

/// One (input, target) text pair with its provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingInstance {
    pub source_id: String,
    pub paradigm: Paradigm,
    pub task: TaskTag,
    pub input_text: String,
    pub target_text: String,
}

/// Formatting knobs shared by all encoders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodeOptions {
    /// Use the instruction-block input format instead of `topic<sep>comment`.
    pub instructed: bool,
    /// End-of-sentence separator between topic and comment in the plain
    /// format. Matches the backend tokenizer's end-of-sequence string.
    pub separator: String,
    /// Task prefix for MTL stance instances.
    pub stance_prefix: String,
    /// Task prefix for MTL rationale instances.
    pub explain_prefix: String,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        EncodeOptions {
            instructed: false,
            separator: "</s>".to_string(),
            stance_prefix: "Stance:".to_string(),
            explain_prefix: "Explain:".to_string(),
        }
    }
}

impl EncodeOptions {
    pub fn instructed(mut self, value: bool) -> Self {
        self.instructed = value;
        self
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("rationale for example {id:?} does not match the answer stem")]
    StemNotFound { id: String },
}

/// Outcome of parsing a generated text: the recovered label (if any), the
/// rationale text preceding the stance marker (ST-CoT only), and the raw
/// generation. `failed` holds exactly when no label was recovered.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseOutcome {
    pub label: Option<StanceLabel>,
    pub rationale: Option<String>,
    pub failed: bool,
    pub raw: String,
}

impl ParseOutcome {
    fn parsed(label: StanceLabel, rationale: Option<String>, raw: &str) -> Self {
        ParseOutcome {
            label: Some(label),
            rationale,
            failed: false,
            raw: raw.to_string(),
        }
    }

    fn failure(raw: &str) -> Self {
        ParseOutcome {
            label: None,
            rationale: None,
            failed: true,
            raw: raw.to_string(),
        }
    }
}

fn base_input(example: &StanceExample, opts: &EncodeOptions) -> String {
    if opts.instructed {
        prompts::instruction_block(&example.topic, &example.comment)
    } else {
        format!("{}{}{}", example.topic, opts.separator, example.comment)
    }
}

/// Input text used at prediction time for a given paradigm. MTL predicts
/// through the stance-prefixed input only.
pub fn prediction_input(example: &StanceExample, paradigm: Paradigm, opts: &EncodeOptions) -> String {
    match paradigm {
        Paradigm::StFt | Paradigm::StCot => base_input(example, opts),
        Paradigm::Mtl => format!("{} {}", opts.stance_prefix, base_input(example, opts)),
    }
}

/// Single-task finetuning: target is the bare verbalizer word.
pub fn encode_st_ft(example: &StanceExample, opts: &EncodeOptions) -> TrainingInstance {
    TrainingInstance {
        source_id: example.id.clone(),
        paradigm: Paradigm::StFt,
        task: TaskTag::StanceTask,
        input_text: base_input(example, opts),
        target_text: example.gold.word().to_string(),
    }
}

/// Chain-of-thought finetuning: target is the stem-stripped rationale body
/// followed by the stance marker and the verbalizer word, so the model
/// generates its reasoning before the verdict.
pub fn encode_st_cot(
    rex: &RationalizedExample,
    opts: &EncodeOptions,
) -> Result<TrainingInstance, CodecError> {
    let stem = prompts::parse_rationale_stem(&rex.rationale).ok_or(CodecError::StemNotFound {
        id: rex.example.id.clone(),
    })?;
    let word = rex.example.gold.word();
    let target_text = if stem.body.is_empty() {
        format!("{STANCE_MARKER} {word}")
    } else {
        format!("{} {STANCE_MARKER} {word}", stem.body)
    };
    Ok(TrainingInstance {
        source_id: rex.example.id.clone(),
        paradigm: Paradigm::StCot,
        task: TaskTag::StanceTask,
        input_text: base_input(&rex.example, opts),
        target_text,
    })
}

/// MTL stance instance for an example with or without a rationale: prefixed
/// input, verbalizer-word target.
pub fn encode_mtl_stance(example: &StanceExample, opts: &EncodeOptions) -> TrainingInstance {
    TrainingInstance {
        source_id: example.id.clone(),
        paradigm: Paradigm::Mtl,
        task: TaskTag::StanceTask,
        input_text: format!("{} {}", opts.stance_prefix, base_input(example, opts)),
        target_text: example.gold.word().to_string(),
    }
}

/// Multitask learning: one stance-prefixed instance with the verbalizer
/// target and one explain-prefixed instance whose target is the full
/// rationale (stem kept as label-consistency supervision).
pub fn encode_mtl(
    rex: &RationalizedExample,
    opts: &EncodeOptions,
) -> Result<[TrainingInstance; 2], CodecError> {
    if prompts::parse_rationale_stem(&rex.rationale).is_none() {
        return Err(CodecError::StemNotFound {
            id: rex.example.id.clone(),
        });
    }
    let stance = encode_mtl_stance(&rex.example, opts);
    let rationale = TrainingInstance {
        source_id: rex.example.id.clone(),
        paradigm: Paradigm::Mtl,
        task: TaskTag::RationaleTask,
        input_text: format!("{} {}", opts.explain_prefix, base_input(&rex.example, opts)),
        target_text: rex.rationale.trim().to_string(),
    };
    Ok([stance, rationale])
}

fn strip_token_punctuation(token: &str) -> &str {
    token.trim_matches(|c: char| !c.is_alphanumeric())
}

fn label_after_marker(tail: &str) -> Option<StanceLabel> {
    let token = tail.split_whitespace().next()?;
    StanceLabel::from_word(strip_token_punctuation(token))
}

/// Recover a stance label from generated text.
///
/// Rule order: (1) the last occurrence of the `Stance:` marker
/// (case-insensitive) followed by a verbalizer word wins; (2) otherwise a
/// trimmed output equal to a verbalizer word (trailing punctuation ignored)
/// wins; (3) otherwise the text is scanned for standalone verbalizer tokens
/// and accepted only if exactly one distinct label word occurs. Failures are
/// data, not errors: the outcome's `failed` flag is set and no label is
/// returned. For ST-CoT, text before the marker is captured as the rationale.
pub fn parse_generation(raw: &str, paradigm: Paradigm) -> ParseOutcome {
    static MARKER: std::sync::OnceLock<regex::Regex> = std::sync::OnceLock::new();
    let marker = MARKER.get_or_init(|| {
        regex::RegexBuilder::new(r"stance:")
            .case_insensitive(true)
            .build()
            .expect("marker regex is valid")
    });

    // Rule 1: verdict after the final stance marker.
    if let Some(m) = marker.find_iter(raw).last() {
        if let Some(label) = label_after_marker(&raw[m.end()..]) {
            let rationale = match paradigm {
                Paradigm::StCot => {
                    let before = raw[..m.start()].trim();
                    (!before.is_empty()).then(|| before.to_string())
                }
                _ => None,
            };
            return ParseOutcome::parsed(label, rationale, raw);
        }
    }

    // Rule 2: the whole output is a single verbalizer word.
    if let Some(label) = StanceLabel::from_word(strip_token_punctuation(raw.trim())) {
        return ParseOutcome::parsed(label, None, raw);
    }

    // Rule 3: exactly one distinct label word anywhere in the text.
    let mut found: Option<StanceLabel> = None;
    for token in raw.split(|c: char| !c.is_alphanumeric()) {
        if let Some(label) = StanceLabel::from_word(token) {
            match found {
                None => found = Some(label),
                Some(prev) if prev == label => {}
                Some(_) => return ParseOutcome::failure(raw),
            }
        }
    }
    match found {
        Some(label) => ParseOutcome::parsed(label, None, raw),
        None => ParseOutcome::failure(raw),
    }
}

/// Persist instances as JSON-lines `{source_id, paradigm, task, input_text, target_text}`.
pub fn write_instances_jsonl<W: Write>(
    instances: &[TrainingInstance],
    mut writer: W,
) -> std::io::Result<()> {
    for instance in instances {
        serde_json::to_writer(&mut writer, instance)
            .map_err(std::io::Error::other)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elicitor::RationalizedExample;

    fn example(topic: &str, comment: &str, gold: StanceLabel) -> StanceExample {
        StanceExample {
            id: "e1".to_string(),
            topic: topic.to_string(),
            comment: comment.to_string(),
            gold,
        }
    }

    fn rationalized(topic: &str, comment: &str, gold: StanceLabel, body: &str) -> RationalizedExample {
        let example = example(topic, comment, gold);
        let rationale = format!("{} {body}", prompts::rationale_stem(gold, topic));
        RationalizedExample {
            example,
            rationale,
            service_id: "mock".to_string(),
            attempts: 1,
            created_at: "1970-01-01T00:00:00Z".to_string(),
        }
    }

    #[test]
    fn st_ft_plain_format() {
        let inst = encode_st_ft(
            &example("Atheism", "god is dead", StanceLabel::Against),
            &EncodeOptions::default(),
        );
        assert_eq!(inst.input_text, "Atheism</s>god is dead");
        assert_eq!(inst.target_text, "against");
        assert_eq!(inst.task, TaskTag::StanceTask);
    }

    #[test]
    fn st_ft_instructed_format() {
        let inst = encode_st_ft(
            &example("Atheism", "god is dead", StanceLabel::Against),
            &EncodeOptions::default().instructed(true),
        );
        assert!(inst.input_text.contains("classify the stance of the comment"));
        assert!(inst.input_text.contains("Topic: Atheism"));
        assert_eq!(inst.target_text, "against");
    }

    #[test]
    fn st_ft_targets_are_verbalizer_words() {
        for gold in StanceLabel::ALL {
            let inst = encode_st_ft(&example("T", "c", gold), &EncodeOptions::default());
            assert!(["favor", "against", "neutral"].contains(&inst.target_text.as_str()));
        }
    }

    #[test]
    fn st_cot_strips_stem_and_appends_verdict() {
        let rex = rationalized("Atheism", "god is dead", StanceLabel::Against, "it mocks belief");
        let inst = encode_st_cot(&rex, &EncodeOptions::default()).unwrap();
        assert_eq!(inst.target_text, "it mocks belief Stance: against");
        let outcome = parse_generation(&inst.target_text, Paradigm::StCot);
        assert_eq!(outcome.label, Some(StanceLabel::Against));
        assert_eq!(outcome.rationale.as_deref(), Some("it mocks belief"));
    }

    #[test]
    fn st_cot_missing_stem_is_error() {
        let mut rex = rationalized("Atheism", "x", StanceLabel::Favor, "body");
        rex.rationale = "no stem here".to_string();
        assert!(matches!(
            encode_st_cot(&rex, &EncodeOptions::default()),
            Err(CodecError::StemNotFound { .. })
        ));
    }

    #[test]
    fn mtl_produces_paired_instances() {
        let rex = rationalized("Atheism", "god is dead", StanceLabel::Favor, "it praises faith");
        let [stance, rationale] = encode_mtl(&rex, &EncodeOptions::default()).unwrap();
        assert_eq!(stance.task, TaskTag::StanceTask);
        assert_eq!(rationale.task, TaskTag::RationaleTask);
        assert_eq!(stance.source_id, rationale.source_id);
        assert_eq!(stance.target_text, "favor");
        assert!(stance.input_text.starts_with("Stance: "));
        assert!(rationale.input_text.starts_with("Explain: "));
        assert!(rationale.target_text.starts_with("The comment is classified as"));
        // prefix exclusivity
        assert!(!stance.input_text.starts_with("Explain:"));
        assert!(!rationale.input_text.starts_with("Stance:"));
    }

    #[test]
    fn parse_bare_word() {
        let outcome = parse_generation("against", Paradigm::StFt);
        assert_eq!(outcome.label, Some(StanceLabel::Against));
        assert!(!outcome.failed);
    }

    #[test]
    fn parse_marker_case_insensitive() {
        let outcome = parse_generation("Stance: FAVOR.", Paradigm::StFt);
        assert_eq!(outcome.label, Some(StanceLabel::Favor));
        let outcome = parse_generation("blah sTANCE: neutral", Paradigm::StFt);
        assert_eq!(outcome.label, Some(StanceLabel::Neutral));
    }

    #[test]
    fn parse_prefers_final_marker() {
        let raw = "the stance: favor claim is wrong Stance: against";
        let outcome = parse_generation(raw, Paradigm::StCot);
        assert_eq!(outcome.label, Some(StanceLabel::Against));
        assert_eq!(outcome.rationale.as_deref(), Some("the stance: favor claim is wrong"));
    }

    #[test]
    fn parse_ambiguous_tokens_fail() {
        let outcome = parse_generation("could be favor or against", Paradigm::StFt);
        assert!(outcome.failed);
        assert_eq!(outcome.label, None);
    }

    #[test]
    fn parse_single_standalone_token() {
        let outcome = parse_generation("I lean towards favor overall, yes favor", Paradigm::StFt);
        assert_eq!(outcome.label, Some(StanceLabel::Favor));
    }

    #[test]
    fn parse_no_label_fails() {
        let outcome = parse_generation("cannot decide", Paradigm::StFt);
        assert!(outcome.failed);
        let outcome = parse_generation("", Paradigm::StFt);
        assert!(outcome.failed);
    }

    #[test]
    fn parse_marker_without_label_falls_through() {
        // marker followed by noise, but a single standalone label elsewhere
        let outcome = parse_generation("neutral thoughts here Stance: unclear", Paradigm::StFt);
        assert_eq!(outcome.label, Some(StanceLabel::Neutral));
    }

    #[test]
    fn round_trip_all_paradigms_and_formats() {
        for gold in StanceLabel::ALL {
            for instructed in [false, true] {
                let opts = EncodeOptions::default().instructed(instructed);
                let ex = example("Climate Change is Concern", "storms are worse", gold);
                let rex = rationalized(
                    "Climate Change is Concern",
                    "storms are worse",
                    gold,
                    "it cites worsening storms",
                );

                let st_ft = encode_st_ft(&ex, &opts);
                assert_eq!(parse_generation(&st_ft.target_text, Paradigm::StFt).label, Some(gold));

                let st_cot = encode_st_cot(&rex, &opts).unwrap();
                assert_eq!(parse_generation(&st_cot.target_text, Paradigm::StCot).label, Some(gold));

                let [mtl_stance, _] = encode_mtl(&rex, &opts).unwrap();
                assert_eq!(parse_generation(&mtl_stance.target_text, Paradigm::Mtl).label, Some(gold));
            }
        }
    }
}

//! Evaluation: per-class precision/recall/F1, the favor/against macro-F1
//! (`F_avg`), per-topic breakdowns, parse-failure accounting, and mean/std
//! aggregation across seeded runs.
//!
//! A failed parse counts as a prediction matching no class: it costs the
//! gold class a true positive without granting any class a false positive.
//! Neutral examples stay in the confusion matrix but `F_avg` averages the
//! favor and against F1 scores only.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::ParseOutcome;
use crate::corpus::StanceLabel;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("golds, outcomes, and topics must have equal lengths ({golds}, {outcomes}, {topics})")]
    LengthMismatch {
        golds: usize,
        outcomes: usize,
        topics: usize,
    },
    #[error("cannot score an empty input")]
    EmptyInput,
}

/// Precision, recall, and F1 for one class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Full scoring report for one prediction run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub favor: ClassMetrics,
    pub against: ClassMetrics,
    pub neutral: ClassMetrics,
    /// Mean of the favor and against F1 scores.
    pub f_avg: f64,
    /// Per-topic `F_avg`; `None` marks topics with no favor/against support
    /// anywhere in their confusion matrix (undefined, not zero).
    pub per_topic: BTreeMap<String, Option<f64>>,
    pub parse_failures: usize,
    pub parse_failure_rate: f64,
    pub n: usize,
}

impl EvalReport {
    pub fn class(&self, label: StanceLabel) -> ClassMetrics {
        match label {
            StanceLabel::Favor => self.favor,
            StanceLabel::Against => self.against,
            StanceLabel::Neutral => self.neutral,
        }
    }

    /// CSV with per-class rows `{class, precision, recall, f1}` followed by
    /// summary rows for `f_avg`, the parse-failure rate, and `n`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record(["class", "precision", "recall", "f1"])?;
        for label in StanceLabel::ALL {
            let m = self.class(label);
            csv.write_record([
                label.word(),
                &format!("{:.6}", m.precision),
                &format!("{:.6}", m.recall),
                &format!("{:.6}", m.f1),
            ])?;
        }
        csv.write_record(["f_avg", &format!("{:.6}", self.f_avg), "", ""])?;
        csv.write_record([
            "parse_failure_rate",
            &format!("{:.6}", self.parse_failure_rate),
            "",
            "",
        ])?;
        csv.write_record(["n", &self.n.to_string(), "", ""])?;
        csv.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    tp: [usize; 3],
    fp: [usize; 3],
    fn_: [usize; 3],
    failures: usize,
    n: usize,
}

fn class_index(label: StanceLabel) -> usize {
    match label {
        StanceLabel::Favor => 0,
        StanceLabel::Against => 1,
        StanceLabel::Neutral => 2,
    }
}

impl Tally {
    fn observe(&mut self, gold: StanceLabel, outcome: &ParseOutcome) {
        self.n += 1;
        match outcome.label {
            Some(pred) if pred == gold => self.tp[class_index(gold)] += 1,
            Some(pred) => {
                self.fp[class_index(pred)] += 1;
                self.fn_[class_index(gold)] += 1;
            }
            None => {
                // failed parse: matches no class
                self.failures += 1;
                self.fn_[class_index(gold)] += 1;
            }
        }
    }

    fn metrics(&self, label: StanceLabel) -> ClassMetrics {
        let i = class_index(label);
        let precision = ratio(self.tp[i], self.tp[i] + self.fp[i]);
        let recall = ratio(self.tp[i], self.tp[i] + self.fn_[i]);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ClassMetrics {
            precision,
            recall,
            f1,
        }
    }

    fn f_avg(&self) -> f64 {
        (self.metrics(StanceLabel::Favor).f1 + self.metrics(StanceLabel::Against).f1) / 2.0
    }

    /// True when the favor and against rows and columns are entirely empty,
    /// in which case `F_avg` is undefined rather than zero.
    fn scored_classes_unsupported(&self) -> bool {
        let favor = class_index(StanceLabel::Favor);
        let against = class_index(StanceLabel::Against);
        [favor, against]
            .iter()
            .all(|&i| self.tp[i] + self.fp[i] + self.fn_[i] == 0)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn check_inputs(
    golds: &[StanceLabel],
    outcomes: &[ParseOutcome],
    topics: &[String],
) -> Result<(), EvalError> {
    if golds.len() != outcomes.len() || golds.len() != topics.len() {
        return Err(EvalError::LengthMismatch {
            golds: golds.len(),
            outcomes: outcomes.len(),
            topics: topics.len(),
        });
    }
    if golds.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    Ok(())
}

/// Score predictions against gold labels, pooled over all topics, with the
/// per-topic breakdown included in the report.
pub fn score(
    golds: &[StanceLabel],
    outcomes: &[ParseOutcome],
    topics: &[String],
) -> Result<EvalReport, EvalError> {
    check_inputs(golds, outcomes, topics)?;
    let mut pooled = Tally::default();
    let mut by_topic: BTreeMap<&str, Tally> = BTreeMap::new();
    for ((gold, outcome), topic) in golds.iter().zip(outcomes).zip(topics) {
        pooled.observe(*gold, outcome);
        by_topic.entry(topic).or_default().observe(*gold, outcome);
    }
    let per_topic = by_topic
        .into_iter()
        .map(|(topic, tally)| {
            let value = if tally.scored_classes_unsupported() {
                None
            } else {
                Some(tally.f_avg())
            };
            (topic.to_string(), value)
        })
        .collect();
    Ok(EvalReport {
        favor: pooled.metrics(StanceLabel::Favor),
        against: pooled.metrics(StanceLabel::Against),
        neutral: pooled.metrics(StanceLabel::Neutral),
        f_avg: pooled.f_avg(),
        per_topic,
        parse_failures: pooled.failures,
        parse_failure_rate: pooled.failures as f64 / pooled.n as f64,
        n: pooled.n,
    })
}

/// Per-topic `F_avg` only; `None` marks topics with no favor/against support.
pub fn per_topic(
    golds: &[StanceLabel],
    outcomes: &[ParseOutcome],
    topics: &[String],
) -> Result<BTreeMap<String, Option<f64>>, EvalError> {
    Ok(score(golds, outcomes, topics)?.per_topic)
}

/// Mean and sample standard deviation of one metric across runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        var.sqrt()
    };
    MeanStd { mean, std }
}

/// Cross-run aggregate of evaluation reports from one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunAggregate {
    pub runs: usize,
    /// Set when the aggregate covers a single run, whose deviation is 0 by
    /// convention.
    pub single_run: bool,
    pub f_avg: MeanStd,
    pub favor_f1: MeanStd,
    pub against_f1: MeanStd,
    pub neutral_f1: MeanStd,
    pub parse_failure_rate: MeanStd,
}

/// Aggregate reports with mean and sample standard deviation (n-1
/// denominator; 0 for a single run).
pub fn aggregate(reports: &[EvalReport]) -> Result<RunAggregate, EvalError> {
    if reports.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let collect = |f: fn(&EvalReport) -> f64| -> Vec<f64> { reports.iter().map(f).collect() };
    Ok(RunAggregate {
        runs: reports.len(),
        single_run: reports.len() == 1,
        f_avg: mean_std(&collect(|r| r.f_avg)),
        favor_f1: mean_std(&collect(|r| r.favor.f1)),
        against_f1: mean_std(&collect(|r| r.against.f1)),
        neutral_f1: mean_std(&collect(|r| r.neutral.f1)),
        parse_failure_rate: mean_std(&collect(|r| r.parse_failure_rate)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ok(label: StanceLabel) -> ParseOutcome {
        ParseOutcome {
            label: Some(label),
            rationale: None,
            failed: false,
            raw: label.word().to_string(),
        }
    }

    fn failed() -> ParseOutcome {
        ParseOutcome {
            label: None,
            rationale: None,
            failed: true,
            raw: "???".to_string(),
        }
    }

    fn topics(n: usize) -> Vec<String> {
        vec!["T".to_string(); n]
    }

    #[test]
    fn perfect_predictions_score_one() {
        let golds = vec![StanceLabel::Favor, StanceLabel::Against, StanceLabel::Neutral];
        let outcomes: Vec<_> = golds.iter().map(|&g| ok(g)).collect();
        let report = score(&golds, &outcomes, &topics(3)).unwrap();
        assert_eq!(report.f_avg, 1.0);
        assert_eq!(report.parse_failure_rate, 0.0);
    }

    #[test]
    fn all_neutral_predictions_score_zero() {
        let golds = vec![StanceLabel::Favor, StanceLabel::Against, StanceLabel::Neutral];
        let outcomes = vec![ok(StanceLabel::Neutral); 3];
        let report = score(&golds, &outcomes, &topics(3)).unwrap();
        assert_eq!(report.favor.f1, 0.0);
        assert_eq!(report.against.f1, 0.0);
        assert_eq!(report.f_avg, 0.0);
    }

    #[test]
    fn hand_counted_case_is_seven_twelfths() {
        // favor: tp=1 fp=1 fn=1 -> P=R=1/2, F1=1/2
        // against: tp=1 fp=1 fn=0 -> P=1/2, R=1, F1=2/3
        let golds = vec![
            StanceLabel::Favor,
            StanceLabel::Against,
            StanceLabel::Neutral,
            StanceLabel::Favor,
        ];
        let outcomes = vec![
            ok(StanceLabel::Favor),
            ok(StanceLabel::Against),
            ok(StanceLabel::Favor),
            ok(StanceLabel::Against),
        ];
        let report = score(&golds, &outcomes, &topics(4)).unwrap();
        assert!((report.favor.f1 - 0.5).abs() < 1e-12);
        assert!((report.against.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((report.f_avg - 7.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn failed_parses_cost_recall_not_precision() {
        let golds = vec![StanceLabel::Favor, StanceLabel::Favor];
        let outcomes = vec![ok(StanceLabel::Favor), failed()];
        let report = score(&golds, &outcomes, &topics(2)).unwrap();
        assert_eq!(report.favor.precision, 1.0);
        assert_eq!(report.favor.recall, 0.5);
        assert_eq!(report.parse_failures, 1);
        assert_eq!(report.parse_failure_rate, 0.5);
    }

    #[test]
    fn length_mismatch_and_empty_are_errors() {
        let golds = vec![StanceLabel::Favor];
        assert!(matches!(
            score(&golds, &[], &topics(1)),
            Err(EvalError::LengthMismatch { .. })
        ));
        assert_eq!(score(&[], &[], &[]), Err(EvalError::EmptyInput));
    }

    #[test]
    fn per_topic_partition_identity() {
        let golds = vec![StanceLabel::Favor, StanceLabel::Against];
        let outcomes = vec![ok(StanceLabel::Favor), ok(StanceLabel::Favor)];
        let report = score(&golds, &outcomes, &topics(2)).unwrap();
        assert_eq!(report.per_topic.len(), 1);
        assert_eq!(report.per_topic["T"], Some(report.f_avg));
    }

    #[test]
    fn neutral_only_topic_is_undefined() {
        let golds = vec![StanceLabel::Neutral, StanceLabel::Favor];
        let outcomes = vec![ok(StanceLabel::Neutral), ok(StanceLabel::Favor)];
        let topics = vec!["quiet".to_string(), "loud".to_string()];
        let report = score(&golds, &outcomes, &topics).unwrap();
        assert_eq!(report.per_topic["quiet"], None);
        assert!(report.per_topic["loud"].is_some());
    }

    #[test]
    fn aggregate_textbook_sample_std() {
        let golds = vec![StanceLabel::Favor];
        let outcomes = vec![ok(StanceLabel::Favor)];
        let base = score(&golds, &outcomes, &topics(1)).unwrap();
        let mut reports = Vec::new();
        for f in [0.6, 0.7, 0.8] {
            let mut r = base.clone();
            r.f_avg = f;
            reports.push(r);
        }
        let agg = aggregate(&reports).unwrap();
        assert!((agg.f_avg.mean - 0.7).abs() < 1e-12);
        assert!((agg.f_avg.std - 0.1).abs() < 1e-12);
        assert!(!agg.single_run);
    }

    #[test]
    fn aggregate_identical_runs_has_zero_std() {
        let golds = vec![StanceLabel::Favor];
        let outcomes = vec![ok(StanceLabel::Favor)];
        let report = score(&golds, &outcomes, &topics(1)).unwrap();
        let agg = aggregate(&[report.clone(), report.clone(), report]).unwrap();
        assert_eq!(agg.f_avg.std, 0.0);
    }

    #[test]
    fn aggregate_single_run_is_flagged() {
        let golds = vec![StanceLabel::Favor];
        let outcomes = vec![ok(StanceLabel::Favor)];
        let report = score(&golds, &outcomes, &topics(1)).unwrap();
        let agg = aggregate(&[report]).unwrap();
        assert!(agg.single_run);
        assert_eq!(agg.f_avg.std, 0.0);
        assert!(matches!(aggregate(&[]), Err(EvalError::EmptyInput)));
    }
}

//! Result rendering: markdown tables in the `mean±std` percent convention
//! and CSV plot data, plus the `stance report` command over stored results.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};

use stance_core::codec::Paradigm;
use stance_core::evaluator::MeanStd;

use crate::args::{ReportArgs, ReportFormat};
use crate::runspec::RunSpec;

use super::baseline::BaselineReport;
use super::sweep::SweepResult;

/// `0.7472 ± 0.0034` -> `74.72±0.34` (percent, two decimals).
pub fn format_percent(value: MeanStd) -> String {
    format!("{:.2}±{:.2}", value.mean * 100.0, value.std * 100.0)
}

/// Plot CSV: `axis,paradigm,backend,mean,std`, one row per grid cell with
/// data (failed cells are listed in the table, not the plot).
pub fn plot_csv(result: &SweepResult) -> String {
    let mut out = String::from("axis,paradigm,backend,mean,std\n");
    for cell in &result.cells {
        if let Some(aggregate) = &cell.aggregate {
            out.push_str(&format!(
                "{},{},{},{:.6},{:.6}\n",
                cell.axis, cell.paradigm, result.backend, aggregate.f_avg.mean, aggregate.f_avg.std
            ));
        }
    }
    out
}

fn paradigm_order(result: &SweepResult) -> Vec<Paradigm> {
    let mut order = Vec::new();
    for cell in &result.cells {
        if !order.contains(&cell.paradigm) {
            order.push(cell.paradigm);
        }
    }
    order
}

/// Markdown for one sweep: the grid table (rows = axis, columns =
/// paradigms), a summary table in the published shape (rows = paradigm,
/// columns = backend, best grid cell per paradigm), argmax notes, and the
/// reference-value footer.
pub fn sweep_markdown(result: &SweepResult) -> String {
    let paradigms = paradigm_order(result);
    let mut md = format!(
        "## {} sweep — backend {}, seeds {:?}\n\n",
        result.axis_label, result.backend, result.seeds
    );

    md.push_str(&format!("| {} |", result.axis_label));
    for paradigm in &paradigms {
        md.push_str(&format!(" {paradigm} |"));
    }
    md.push('\n');
    md.push_str("|---|");
    md.push_str(&"---|".repeat(paradigms.len()));
    md.push('\n');

    let mut axes: Vec<f64> = Vec::new();
    for cell in &result.cells {
        if !axes.iter().any(|a| a == &cell.axis) {
            axes.push(cell.axis);
        }
    }
    for axis in &axes {
        md.push_str(&format!("| {axis} |"));
        for paradigm in &paradigms {
            let cell = result
                .cells
                .iter()
                .find(|c| c.axis == *axis && c.paradigm == *paradigm);
            let rendered = match cell.and_then(|c| c.aggregate.as_ref()) {
                Some(aggregate) => format_percent(aggregate.f_avg),
                None => "failed".to_string(),
            };
            md.push_str(&format!(" {rendered} |"));
        }
        md.push('\n');
    }

    md.push_str("\n### Best grid cell per paradigm\n\n| paradigm | ");
    md.push_str(&format!("{} |\n|---|---|\n", result.backend));
    for paradigm in &paradigms {
        let best = result
            .cells
            .iter()
            .filter(|c| c.paradigm == *paradigm)
            .filter_map(|c| c.aggregate.as_ref().map(|a| (c.axis, a.f_avg)))
            .max_by(|a, b| a.1.mean.total_cmp(&b.1.mean));
        match best {
            Some((axis, f_avg)) => md.push_str(&format!(
                "| {paradigm} | {} (at {} {axis}) |\n",
                format_percent(f_avg),
                result.axis_label
            )),
            None => md.push_str(&format!("| {paradigm} | failed |\n")),
        }
    }

    if let Some(note) = &result.argmax_test {
        md.push_str(&format!(
            "\n- argmax ({}): {} {} = {} with mean {:.2}\n",
            note.criterion, result.axis_label, note.axis, note.paradigm, note.mean * 100.0
        ));
    }
    if let Some(note) = &result.argmax_validation {
        md.push_str(&format!(
            "- argmax ({}): {} {} = {} with mean {:.2}\n",
            note.criterion, result.axis_label, note.axis, note.paradigm, note.mean * 100.0
        ));
    }
    if !result.failures.is_empty() {
        md.push_str(&format!("\n{} cell(s) failed; see sweep_result.json.\n", result.failures.len()));
    }

    md.push_str("\nReference values (labels, not targets):\n");
    for note in &result.reference_notes {
        md.push_str(&format!("- {note}\n"));
    }
    md
}

/// Markdown for a zero-shot baseline report.
pub fn baseline_markdown(report: &BaselineReport) -> String {
    let mut md = format!(
        "## zero-shot baseline — service {}, seeds {:?}\n\n| paradigm | {} |\n|---|---|\n| zero-shot | {} |\n",
        report.service_id,
        report.seeds,
        report.service_id,
        format_percent(report.aggregate.f_avg)
    );
    md.push_str(&format!(
        "\n- parse failure rate: {:.2}%\n- reference: {:.2} ({})\n",
        report.aggregate.parse_failure_rate.mean * 100.0,
        report.reference_f_avg_percent,
        report.reference_note
    ));
    md
}

enum StoredResult {
    Sweep(Box<SweepResult>),
    Baseline(Box<BaselineReport>),
    Eval(Box<stance_core::evaluator::EvalReport>),
}

fn load_stored(path: &PathBuf) -> Result<StoredResult> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(sweep) = serde_json::from_slice::<SweepResult>(&bytes) {
        return Ok(StoredResult::Sweep(Box::new(sweep)));
    }
    if let Ok(baseline) = serde_json::from_slice::<BaselineReport>(&bytes) {
        return Ok(StoredResult::Baseline(Box::new(baseline)));
    }
    if let Ok(eval) = serde_json::from_slice::<stance_core::evaluator::EvalReport>(&bytes) {
        return Ok(StoredResult::Eval(Box::new(eval)));
    }
    bail!(
        "{} is not a recognized result file (expected sweep_result.json, baseline_report.json, or an eval report)",
        path.display()
    )
}

pub fn run(args: ReportArgs) -> Result<i32> {
    let run_dir_flag = args.common.run_dir.clone();
    let spec = RunSpec::resolve("report", args.common)?;
    if args.inputs.is_empty() {
        bail!("at least one stored result file is required");
    }
    let dir = spec.run_dir(run_dir_flag.as_deref(), false);
    std::fs::create_dir_all(&dir)?;
    spec.write_snapshot(&dir)?;

    let mut markdown = String::new();
    let mut plot = String::from("axis,paradigm,backend,mean,std\n");
    for path in &args.inputs {
        match load_stored(path)? {
            StoredResult::Sweep(sweep) => {
                markdown.push_str(&sweep_markdown(&sweep));
                markdown.push('\n');
                for line in plot_csv(&sweep).lines().skip(1) {
                    plot.push_str(line);
                    plot.push('\n');
                }
            }
            StoredResult::Baseline(baseline) => {
                markdown.push_str(&baseline_markdown(&baseline));
                markdown.push('\n');
                plot.push_str(&format!(
                    ",zero-shot,{},{:.6},{:.6}\n",
                    baseline.service_id, baseline.aggregate.f_avg.mean, baseline.aggregate.f_avg.std
                ));
            }
            StoredResult::Eval(report) => {
                markdown.push_str(&format!(
                    "## evaluation — {} examples\n\n| class | precision | recall | F1 |\n|---|---|---|---|\n",
                    report.n
                ));
                for label in stance_core::corpus::StanceLabel::ALL {
                    let m = report.class(label);
                    markdown.push_str(&format!(
                        "| {label} | {:.4} | {:.4} | {:.4} |\n",
                        m.precision, m.recall, m.f1
                    ));
                }
                markdown.push_str(&format!(
                    "\n- F_avg: {:.2}\n- parse failure rate: {:.2}%\n\n",
                    report.f_avg * 100.0,
                    report.parse_failure_rate * 100.0
                ));
            }
        }
    }

    if matches!(args.format, ReportFormat::Markdown | ReportFormat::Both) {
        let path = dir.join("report.md");
        std::fs::write(&path, &markdown)?;
        println!("markdown -> {}", path.display());
    }
    if matches!(args.format, ReportFormat::Csv | ReportFormat::Both) {
        let path = dir.join("plot.csv");
        std::fs::write(&path, &plot)?;
        println!("plot csv -> {}", path.display());
    }
    print!("{markdown}");
    Ok(0)
}

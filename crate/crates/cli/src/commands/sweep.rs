//! Sweep runners: the alpha grid (MTL) and the training-size grid.
//!
//! Cells run in parallel up to the configured worker count, each with its
//! own backend instance. Cell manifests are written atomically; rerunning a
//! sweep into the same directory skips cells whose manifests are present
//! and valid, so a killed sweep resumes where it stopped. Failed cells are
//! recorded and the sweep continues; the exit code is nonzero iff at least
//! one cell ultimately failed.

use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

use stance_core::codec::Paradigm;
use stance_core::corpus::subsample;
use stance_core::evaluator::{self, EvalReport, RunAggregate};
use stance_core::trainer::Trainer;

use crate::args::CommonArgs;
use crate::runspec::{
    load_data, make_backend, sweep_paradigms, write_json_atomic, LoadedData, RunSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Alpha,
    Size,
}

impl SweepKind {
    fn name(self) -> &'static str {
        match self {
            SweepKind::Alpha => "alpha",
            SweepKind::Size => "size",
        }
    }

    fn axis_label(self) -> &'static str {
        match self {
            SweepKind::Alpha => "alpha",
            SweepKind::Size => "fraction",
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct CellKey {
    axis: f64,
    paradigm: Paradigm,
    seed: u64,
}

impl CellKey {
    fn label(&self, kind: SweepKind) -> String {
        let prefix = match kind {
            SweepKind::Alpha => "a",
            SweepKind::Size => "f",
        };
        format!("{prefix}{:.2}_{}_s{}", self.axis, self.paradigm, self.seed)
    }
}

/// Everything one finished (or failed) cell records.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellManifest {
    pub axis: f64,
    pub paradigm: Paradigm,
    pub seed: u64,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub f_avg: Option<f64>,
    pub val_f_avg: Option<f64>,
    pub report: Option<EvalReport>,
    pub config_fingerprint: String,
    pub corpus_fingerprint: String,
    pub backend_id: String,
}

/// Aggregate of one (axis, paradigm) grid cell across seeds. `aggregate`
/// is absent when every seed failed; the cell still appears in tables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellAggregate {
    pub axis: f64,
    pub paradigm: Paradigm,
    pub ok_seeds: usize,
    pub failed_seeds: usize,
    pub aggregate: Option<RunAggregate>,
    pub mean_val_f_avg: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellFailure {
    pub axis: f64,
    pub paradigm: Paradigm,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArgmaxNote {
    pub paradigm: Paradigm,
    pub axis: f64,
    pub mean: f64,
    pub criterion: String,
}

/// A completed sweep: one aggregate per (axis value x paradigm), failure
/// notes, and the argmax locations (test-grid and validation-selected,
/// labeled — the original tuning protocol is unstated).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub kind: String,
    pub axis_label: String,
    pub backend: String,
    pub seeds: Vec<u64>,
    pub cells: Vec<CellAggregate>,
    pub failures: Vec<CellFailure>,
    pub argmax_test: Option<ArgmaxNote>,
    pub argmax_validation: Option<ArgmaxNote>,
    pub reference_notes: Vec<String>,
    pub executed_cells: usize,
    pub skipped_cells: usize,
}

pub fn run_alpha(args: CommonArgs) -> Result<i32> {
    if let Some(paradigm) = args.paradigm {
        if paradigm != Paradigm::Mtl {
            bail!("sweep-alpha varies the MTL objective; --paradigm {paradigm} is not applicable");
        }
    }
    let run_dir_flag = args.run_dir.clone();
    let mut spec = RunSpec::resolve("sweep-alpha", args)?;
    spec.train.paradigm = Paradigm::Mtl;
    run_sweep(spec, SweepKind::Alpha, run_dir_flag)
}

pub fn run_size(args: CommonArgs) -> Result<i32> {
    let paradigms = sweep_paradigms(args.paradigm);
    let run_dir_flag = args.run_dir.clone();
    let spec = RunSpec::resolve("sweep-size", args)?;
    run_sweep_with_paradigms(spec, SweepKind::Size, run_dir_flag, paradigms)
}

fn run_sweep(spec: RunSpec, kind: SweepKind, run_dir_flag: Option<PathBuf>) -> Result<i32> {
    let paradigms = vec![spec.train.paradigm];
    run_sweep_with_paradigms(spec, kind, run_dir_flag, paradigms)
}

fn run_sweep_with_paradigms(
    mut spec: RunSpec,
    kind: SweepKind,
    run_dir_flag: Option<PathBuf>,
    paradigms: Vec<Paradigm>,
) -> Result<i32> {
    let data = load_data(&super::data_path(&spec)?)?;
    let corpus_fingerprint = data.fingerprint();
    spec.corpus_fingerprint = Some(corpus_fingerprint.clone());

    let dir = spec.run_dir(run_dir_flag.as_deref(), true);
    std::fs::create_dir_all(dir.join("cells"))?;
    spec.write_snapshot(&dir)?;

    let needs_rationales = match kind {
        SweepKind::Alpha => true,
        SweepKind::Size => paradigms
            .iter()
            .any(|p| matches!(p, Paradigm::StCot | Paradigm::Mtl)),
    };
    let store = super::ensure_rationale_store(&spec, &data, needs_rationales)?;

    let axis_values: Vec<f64> = match kind {
        SweepKind::Alpha => spec.alphas.clone(),
        SweepKind::Size => spec.fractions.clone(),
    };
    let mut grid = Vec::new();
    for &axis in &axis_values {
        for &paradigm in &paradigms {
            for &seed in &spec.seeds {
                grid.push(CellKey {
                    axis,
                    paradigm,
                    seed,
                });
            }
        }
    }
    println!(
        "{} sweep: {} axis values x {} paradigms x {} seeds = {} cells ({} workers)",
        kind.name(),
        axis_values.len(),
        paradigms.len(),
        spec.seeds.len(),
        grid.len(),
        spec.workers
    );

    let config_fingerprint = spec.fingerprint();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()?;
    let manifests: Vec<(CellManifest, bool)> = pool.install(|| {
        use rayon::prelude::*;
        grid.par_iter()
            .map(|key| {
                let cell_dir = dir.join("cells").join(key.label(kind));
                let manifest_path = cell_dir.join("manifest.json");
                if let Some(existing) =
                    reusable_manifest(&manifest_path, &config_fingerprint, &corpus_fingerprint)
                {
                    log::info!("skipping completed cell {}", key.label(kind));
                    return (existing, false);
                }
                let manifest = run_cell(
                    &spec,
                    kind,
                    *key,
                    &data,
                    store.as_ref(),
                    &cell_dir,
                    &config_fingerprint,
                    &corpus_fingerprint,
                );
                if let Err(err) = write_json_atomic(&manifest_path, &manifest) {
                    log::error!("failed to persist cell manifest: {err}");
                }
                (manifest, true)
            })
            .collect()
    });

    let executed = manifests.iter().filter(|(_, fresh)| *fresh).count();
    let skipped = manifests.len() - executed;
    let manifests: Vec<CellManifest> = manifests.into_iter().map(|(m, _)| m).collect();

    let result = aggregate_sweep(
        kind,
        &spec,
        &axis_values,
        &paradigms,
        manifests,
        executed,
        skipped,
    )?;

    write_json_atomic(&dir.join("sweep_result.json"), &result)?;
    let plot = super::report::plot_csv(&result);
    std::fs::write(dir.join("plot.csv"), &plot)?;
    let table = super::report::sweep_markdown(&result);
    std::fs::write(dir.join("table.md"), &table)?;

    println!("{table}");
    if !result.failures.is_empty() {
        eprintln!("{} cells ultimately failed:", result.failures.len());
        for failure in &result.failures {
            eprintln!(
                "  {}={} {} seed {}: {}",
                result.axis_label, failure.axis, failure.paradigm, failure.seed, failure.error
            );
        }
    }
    println!(
        "cells: {} executed, {} resumed; outputs -> {}",
        result.executed_cells,
        result.skipped_cells,
        dir.display()
    );
    Ok(if result.failures.is_empty() { 0 } else { 1 })
}

fn reusable_manifest(
    path: &Path,
    config_fingerprint: &str,
    corpus_fingerprint: &str,
) -> Option<CellManifest> {
    let bytes = std::fs::read(path).ok()?;
    let manifest: CellManifest = serde_json::from_slice(&bytes).ok()?;
    (manifest.status == "ok"
        && manifest.config_fingerprint == config_fingerprint
        && manifest.corpus_fingerprint == corpus_fingerprint)
        .then_some(manifest)
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    spec: &RunSpec,
    kind: SweepKind,
    key: CellKey,
    data: &LoadedData,
    store: Option<&stance_core::elicitor::RationaleStore>,
    cell_dir: &Path,
    config_fingerprint: &str,
    corpus_fingerprint: &str,
) -> CellManifest {
    let mut manifest = CellManifest {
        axis: key.axis,
        paradigm: key.paradigm,
        seed: key.seed,
        status: "failed".to_string(),
        error: None,
        f_avg: None,
        val_f_avg: None,
        report: None,
        config_fingerprint: config_fingerprint.to_string(),
        corpus_fingerprint: corpus_fingerprint.to_string(),
        backend_id: spec.backend.clone(),
    };
    match cell_inner(spec, kind, key, data, store, cell_dir) {
        Ok((report, val_f_avg, backend_id)) => {
            manifest.status = "ok".to_string();
            manifest.f_avg = Some(report.f_avg);
            manifest.val_f_avg = val_f_avg;
            manifest.report = Some(report);
            manifest.backend_id = backend_id;
        }
        Err(err) => {
            log::error!("cell {} failed: {err:#}", key.label(kind));
            manifest.error = Some(format!("{err:#}"));
        }
    }
    manifest
}

fn cell_inner(
    spec: &RunSpec,
    kind: SweepKind,
    key: CellKey,
    data: &LoadedData,
    store: Option<&stance_core::elicitor::RationaleStore>,
    cell_dir: &Path,
) -> Result<(EvalReport, Option<f64>, String)> {
    let mut config = spec.train.clone();
    config.paradigm = key.paradigm;
    config.seed = key.seed;
    match kind {
        SweepKind::Alpha => config.alpha = key.axis,
        SweepKind::Size => config.train_fraction = key.axis,
    }

    let mut split = data.split_for_seed(spec.val_fraction, key.seed)?;
    if kind == SweepKind::Size && config.train_fraction < 1.0 {
        // subsample here (nested per seed across fractions) so the trainer
        // sees the already-reduced pool
        split.train = subsample(&split.train, config.train_fraction, key.seed)?;
        config.train_fraction = 1.0;
    }

    let needs_store = matches!(key.paradigm, Paradigm::StCot | Paradigm::Mtl);
    let store = if needs_store {
        Some(store.ok_or_else(|| anyhow::anyhow!("rationale store required but missing"))?)
    } else {
        None
    };

    let mut backend = make_backend(&spec.backend, key.seed)?;
    let trainer = Trainer::new(config.clone())
        .with_encode_options(spec.encode.clone())
        .with_output_dir(cell_dir);
    let record = trainer.run(backend.as_mut(), &split, store)?;
    let val_f_avg = record.best.as_ref().map(|b| b.val_f_avg);

    if split.test.is_empty() {
        bail!("cannot evaluate a sweep cell without a test partition");
    }
    let report = super::evaluate_backend(
        backend.as_ref(),
        &split.test,
        key.paradigm,
        &config,
        &spec.encode,
    )?;
    Ok((report, val_f_avg, backend.id()))
}

fn aggregate_sweep(
    kind: SweepKind,
    spec: &RunSpec,
    axis_values: &[f64],
    paradigms: &[Paradigm],
    manifests: Vec<CellManifest>,
    executed: usize,
    skipped: usize,
) -> Result<SweepResult> {
    let mut cells = Vec::new();
    let mut failures = Vec::new();
    for &axis in axis_values {
        for &paradigm in paradigms {
            let mine: Vec<&CellManifest> = manifests
                .iter()
                .filter(|m| m.axis == axis && m.paradigm == paradigm)
                .collect();
            let ok: Vec<&CellManifest> = mine
                .iter()
                .copied()
                .filter(|m| m.status == "ok")
                .collect();
            for failed in mine.iter().filter(|m| m.status != "ok") {
                failures.push(CellFailure {
                    axis,
                    paradigm,
                    seed: failed.seed,
                    error: failed
                        .error
                        .clone()
                        .unwrap_or_else(|| "unknown error".to_string()),
                });
            }
            let reports: Vec<EvalReport> = ok
                .iter()
                .filter_map(|m| m.report.clone())
                .collect();
            let aggregate = if reports.is_empty() {
                None
            } else {
                Some(evaluator::aggregate(&reports)?)
            };
            let vals: Vec<f64> = ok.iter().filter_map(|m| m.val_f_avg).collect();
            let mean_val_f_avg =
                (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64);
            cells.push(CellAggregate {
                axis,
                paradigm,
                ok_seeds: ok.len(),
                failed_seeds: mine.len() - ok.len(),
                aggregate,
                mean_val_f_avg,
            });
        }
    }

    let argmax_test = cells
        .iter()
        .filter_map(|cell| cell.aggregate.as_ref().map(|a| (cell, a.f_avg.mean)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(cell, mean)| ArgmaxNote {
            paradigm: cell.paradigm,
            axis: cell.axis,
            mean,
            criterion: "highest mean test F_avg on the grid".to_string(),
        });
    let argmax_validation = cells
        .iter()
        .filter_map(|cell| cell.mean_val_f_avg.map(|v| (cell, v)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(cell, mean)| ArgmaxNote {
            paradigm: cell.paradigm,
            axis: cell.axis,
            mean,
            criterion: "highest mean validation F_avg (tuning-style selection)".to_string(),
        });

    Ok(SweepResult {
        kind: kind.name().to_string(),
        axis_label: kind.axis_label().to_string(),
        backend: spec.backend.clone(),
        seeds: spec.seeds.clone(),
        cells,
        failures,
        argmax_test,
        argmax_validation,
        reference_notes: super::REFERENCE_NOTES.iter().map(|s| s.to_string()).collect(),
        executed_cells: executed,
        skipped_cells: skipped,
    })
}

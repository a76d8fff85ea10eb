//! `stance eval`: score a saved checkpoint on the test set.

use anyhow::{Context, Result};

use stance_core::trainer::{load_checkpoint, manifest_path_for, CheckpointManifest};

use crate::args::EvalArgs;
use crate::runspec::{load_data, make_backend, RunSpec};

pub fn run(args: EvalArgs) -> Result<i32> {
    let run_dir_flag = args.common.run_dir.clone();
    let mut spec = RunSpec::resolve("eval", args.common)?;
    let data = load_data(&super::data_path(&spec)?)?;
    spec.corpus_fingerprint = Some(data.fingerprint());

    let manifest_path = manifest_path_for(&args.checkpoint);
    let manifest: CheckpointManifest = serde_json::from_slice(
        &std::fs::read(&manifest_path)
            .with_context(|| format!("reading checkpoint manifest {}", manifest_path.display()))?,
    )?;
    let mut backend = make_backend(&manifest.backend_id, manifest.config.seed)?;
    load_checkpoint(&args.checkpoint, backend.as_mut())?;

    if let Some(fingerprint) = &spec.corpus_fingerprint {
        if *fingerprint != manifest.corpus_fingerprint {
            log::warn!(
                "checkpoint was trained on corpus {} but evaluating corpus {}",
                manifest.corpus_fingerprint,
                fingerprint
            );
        }
    }

    let dir = spec.run_dir(run_dir_flag.as_deref(), false);
    spec.write_snapshot(&dir)?;

    let test = if data.test.is_empty() {
        anyhow::bail!("the loaded data has no test partition");
    } else {
        &data.test
    };
    let report = super::evaluate_backend(
        backend.as_ref(),
        test,
        manifest.config.paradigm,
        &manifest.config,
        &spec.encode,
    )?;
    super::write_eval_outputs(&dir, "eval_report", &report)?;

    println!(
        "checkpoint {} (epoch {}, val F_avg {:.4})",
        args.checkpoint.display(),
        manifest.epoch,
        manifest.val_f_avg
    );
    println!(
        "test F_avg {:.4} over {} examples; per-topic: {}",
        report.f_avg,
        report.n,
        report
            .per_topic
            .iter()
            .map(|(topic, value)| match value {
                Some(v) => format!("{topic} {v:.4}"),
                None => format!("{topic} n/a"),
            })
            .collect::<Vec<_>>()
            .join(", ")
    );
    println!("outputs -> {}", dir.display());
    Ok(0)
}

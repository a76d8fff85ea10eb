//! `stance train`: one training run plus test-set evaluation.

use anyhow::Result;

use stance_core::codec::Paradigm;
use stance_core::trainer::Trainer;

use crate::args::CommonArgs;
use crate::runspec::{load_data, make_backend, write_json_atomic, RunSpec};

pub fn run(args: CommonArgs) -> Result<i32> {
    let run_dir_flag = args.run_dir.clone();
    let mut spec = RunSpec::resolve("train", args)?;
    let data = load_data(&super::data_path(&spec)?)?;
    spec.corpus_fingerprint = Some(data.fingerprint());

    let dir = spec.run_dir(run_dir_flag.as_deref(), false);
    spec.write_snapshot(&dir)?;

    let needs_rationales = matches!(spec.train.paradigm, Paradigm::StCot | Paradigm::Mtl);
    let store = super::ensure_rationale_store(&spec, &data, needs_rationales)?;

    let split = data.split_for_seed(spec.val_fraction, spec.train.seed)?;
    let mut backend = make_backend(&spec.backend, spec.train.seed)?;
    let trainer = Trainer::new(spec.train.clone())
        .with_encode_options(spec.encode.clone())
        .with_output_dir(&dir);
    let record = trainer.run(backend.as_mut(), &split, store.as_ref())?;
    write_json_atomic(&dir.join("train_record.json"), &record)?;

    if let Some(best) = &record.best {
        println!(
            "best epoch {} with validation F_avg {:.4} (checkpoint {})",
            best.epoch,
            best.val_f_avg,
            best.path
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_else(|| "in memory".to_string())
        );
    }
    if record.excluded_missing_rationale + record.excluded_invalid_rationale > 0 {
        println!(
            "excluded from rationale-dependent instances: {} missing, {} invalid",
            record.excluded_missing_rationale, record.excluded_invalid_rationale
        );
    }
    if record.alpha_used.is_none() && spec.train.paradigm != Paradigm::Mtl {
        println!("alpha ignored (paradigm {})", spec.train.paradigm);
    }

    if !split.test.is_empty() {
        let report = super::evaluate_backend(
            backend.as_ref(),
            &split.test,
            spec.train.paradigm,
            &spec.train,
            &spec.encode,
        )?;
        super::write_eval_outputs(&dir, "test_report", &report)?;
        println!(
            "test F_avg {:.4} (favor F1 {:.4}, against F1 {:.4}, parse failures {:.2}%)",
            report.f_avg,
            report.favor.f1,
            report.against.f1,
            report.parse_failure_rate * 100.0
        );
    }
    println!("outputs -> {}", dir.display());
    Ok(0)
}

//! `stance ingest`: parse raw corpus files, build the split, emit the
//! JSON-lines partitions and per-topic statistics CSV.

use anyhow::{Context, Result};

use stance_core::corpus::{compute_stats, write_split_jsonl};

use crate::args::CommonArgs;
use crate::runspec::{load_data, RunSpec};

pub fn run(args: CommonArgs) -> Result<i32> {
    let run_dir_flag = args.run_dir.clone();
    let mut spec = RunSpec::resolve("ingest", args)?;
    let data = load_data(&super::data_path(&spec)?)?;
    spec.corpus_fingerprint = Some(data.fingerprint());

    let dir = spec.run_dir(run_dir_flag.as_deref(), false);
    std::fs::create_dir_all(&dir)?;
    spec.write_snapshot(&dir)?;

    let stats = compute_stats(&data.all);
    let stats_path = dir.join("stats.csv");
    let file = std::fs::File::create(&stats_path)
        .with_context(|| format!("creating {}", stats_path.display()))?;
    stats.write_csv(file)?;

    let split = data.split_for_seed(spec.val_fraction, spec.train.seed)?;
    let split_path = dir.join("split.jsonl");
    let file = std::fs::File::create(&split_path)?;
    write_split_jsonl(&split, std::io::BufWriter::new(file))?;

    println!("ingested {} examples across {} topics", data.all.len(), stats.per_topic.len());
    for (topic, counts) in &stats.per_topic {
        println!("  {topic}: favor {}, against {}, neutral {}", counts.favor, counts.against, counts.neutral);
    }
    let totals = stats.totals();
    println!("  total: favor {}, against {}, neutral {}", totals.favor, totals.against, totals.neutral);
    println!(
        "split (seed {}): {} train / {} validation / {} test -> {}",
        split.seed,
        split.train.len(),
        split.validation.len(),
        split.test.len(),
        split_path.display()
    );
    println!("stats -> {}", stats_path.display());
    Ok(0)
}

//! `stance elicit`: build the rationale cache for the training pool.

use anyhow::Result;

use stance_core::elicitor::{build_rationale_store, RationaleStore};

use crate::args::CommonArgs;
use crate::runspec::{load_data, RunSpec};

pub fn run(args: CommonArgs) -> Result<i32> {
    let run_dir_flag = args.run_dir.clone();
    let mut spec = RunSpec::resolve("elicit", args)?;
    let data = load_data(&super::data_path(&spec)?)?;
    spec.corpus_fingerprint = Some(data.fingerprint());

    let dir = spec.run_dir(run_dir_flag.as_deref(), false);
    spec.write_snapshot(&dir)?;

    let cache = super::cache_path(&spec);
    let client = spec.completion_client(None)?;
    let summary = build_rationale_store(
        &data.train_pool,
        client.as_ref(),
        &cache,
        &spec.elicitor_config(),
    )?;

    let store = RationaleStore::load(&cache)?;
    let violations = store.validate();
    println!(
        "rationale store {}: {} cached, {} newly elicited, {} failed, {} stored total",
        cache.display(),
        summary.cached,
        summary.newly_elicited,
        summary.failed,
        store.len()
    );
    if violations.is_empty() {
        println!("stem-and-label scan: no violations");
    } else {
        for v in &violations {
            eprintln!("stem violation for {}: {}", v.id, v.issue);
        }
        anyhow::bail!("{} stored rationales violate the stem invariant", violations.len());
    }
    Ok(0)
}

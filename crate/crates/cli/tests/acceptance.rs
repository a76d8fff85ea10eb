//! Acceptance suite: one check per release criterion, each printing a
//! PASS line with its measured evidence. Run with
//! `cargo test -p stance-cli --test acceptance`.

use std::path::Path;
use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use stance_core::backend::{ModelBackend, SeqPair, TinyBackend, TinyConfig};
use stance_core::codec::{
    encode_mtl, encode_mtl_stance, encode_st_cot, encode_st_ft, parse_generation, EncodeOptions,
    Paradigm, ParseOutcome, TrainingInstance,
};
use stance_core::corpus::{
    compute_stats, make_split, parse_stance_file, subsample, CorpusSplit, StanceExample,
    StanceLabel,
};
use stance_core::elicitor::{build_rationale_store, ElicitorConfig, MockClient, RationaleStore};
use stance_core::evaluator::{self, EvalReport};
use stance_core::fixtures::{
    reference_topic_counts, toy_corpus, write_semeval_fixture, SEMEVAL_DIR_ENV,
};
use stance_core::prompts::rationale_stem;
use stance_core::trainer::{mtl_combine_loss, predict, TrainConfig, Trainer};
use stance_core::util::derive_seed;

fn pass(id: &str, detail: &str) {
    println!("[ACCEPTANCE] {id}: PASS — {detail}");
}

fn toy_store(dir: &Path, corpus: &[StanceExample]) -> RationaleStore {
    let cache = dir.join("rationales.jsonl");
    build_rationale_store(
        corpus,
        &MockClient::new(),
        &cache,
        &ElicitorConfig::default().immediate(),
    )
    .unwrap();
    RationaleStore::load(&cache).unwrap()
}

// ---------------------------------------------------------------------------
// A1: scorer equivalence against a brute-force confusion-matrix counter
// ---------------------------------------------------------------------------

/// Independent oracle: direct counting, no shared code with the evaluator.
struct BruteForce {
    tp: [f64; 3],
    fp: [f64; 3],
    fn_: [f64; 3],
    failures: usize,
    n: usize,
}

fn brute_force(golds: &[StanceLabel], preds: &[Option<StanceLabel>]) -> BruteForce {
    let idx = |l: StanceLabel| match l {
        StanceLabel::Favor => 0,
        StanceLabel::Against => 1,
        StanceLabel::Neutral => 2,
    };
    let mut out = BruteForce {
        tp: [0.0; 3],
        fp: [0.0; 3],
        fn_: [0.0; 3],
        failures: 0,
        n: golds.len(),
    };
    for (g, p) in golds.iter().zip(preds) {
        match p {
            Some(p) if p == g => out.tp[idx(*g)] += 1.0,
            Some(p) => {
                out.fp[idx(*p)] += 1.0;
                out.fn_[idx(*g)] += 1.0;
            }
            None => {
                out.failures += 1;
                out.fn_[idx(*g)] += 1.0;
            }
        }
    }
    out
}

impl BruteForce {
    fn prf(&self, i: usize) -> (f64, f64, f64) {
        let p = if self.tp[i] + self.fp[i] == 0.0 {
            0.0
        } else {
            self.tp[i] / (self.tp[i] + self.fp[i])
        };
        let r = if self.tp[i] + self.fn_[i] == 0.0 {
            0.0
        } else {
            self.tp[i] / (self.tp[i] + self.fn_[i])
        };
        let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        (p, r, f1)
    }
}

#[test]
fn a01_metric_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xA1);
    let labels = StanceLabel::ALL;
    for case in 0..1000 {
        let n = rng.gen_range(1..=50);
        let golds: Vec<StanceLabel> = (0..n).map(|_| labels[rng.gen_range(0..3)]).collect();
        let preds: Vec<Option<StanceLabel>> = (0..n)
            .map(|_| {
                if rng.gen_bool(0.1) {
                    None // forced parse failure
                } else {
                    Some(labels[rng.gen_range(0..3)])
                }
            })
            .collect();
        let outcomes: Vec<ParseOutcome> = preds
            .iter()
            .map(|p| ParseOutcome {
                label: *p,
                rationale: None,
                failed: p.is_none(),
                raw: String::new(),
            })
            .collect();
        let topics = vec!["T".to_string(); n];

        let report = evaluator::score(&golds, &outcomes, &topics).unwrap();
        let oracle = brute_force(&golds, &preds);

        for (i, label) in labels.into_iter().enumerate() {
            let (p, r, f1) = oracle.prf(i);
            let m = report.class(label);
            assert!((m.precision - p).abs() < 1e-9, "case {case}: precision {label}");
            assert!((m.recall - r).abs() < 1e-9, "case {case}: recall {label}");
            assert!((m.f1 - f1).abs() < 1e-9, "case {case}: f1 {label}");
        }
        let f_avg = (oracle.prf(0).2 + oracle.prf(1).2) / 2.0;
        assert!((report.f_avg - f_avg).abs() < 1e-9, "case {case}: f_avg");
        let rate = oracle.failures as f64 / oracle.n as f64;
        assert!((report.parse_failure_rate - rate).abs() < 1e-9, "case {case}: failure rate");
    }
    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    pass(
        "A1 metric-oracle-equivalence",
        &format!("1000 randomized cases within 1e-9 in {elapsed:.2?}"),
    );
}

// ---------------------------------------------------------------------------
// A2: hand-verified metric case
// ---------------------------------------------------------------------------

#[test]
fn a02_hand_verified_f_avg() {
    let golds = [
        StanceLabel::Favor,
        StanceLabel::Against,
        StanceLabel::Neutral,
        StanceLabel::Favor,
    ];
    let preds = [
        StanceLabel::Favor,
        StanceLabel::Against,
        StanceLabel::Favor,
        StanceLabel::Against,
    ];
    let outcomes: Vec<ParseOutcome> = preds
        .iter()
        .map(|p| ParseOutcome {
            label: Some(*p),
            rationale: None,
            failed: false,
            raw: String::new(),
        })
        .collect();
    let topics = vec!["T".to_string(); 4];
    let report = evaluator::score(&golds, &outcomes, &topics).unwrap();
    assert!(
        (report.f_avg - 7.0 / 12.0).abs() < 1e-12,
        "f_avg was {}",
        report.f_avg
    );
    pass("A2 hand-verified-metric", &format!("f_avg = {} = 7/12", report.f_avg));
}

// ---------------------------------------------------------------------------
// A3: MTL at alpha=1 walks the same stance-loss trace as ST-FT
// ---------------------------------------------------------------------------

#[test]
fn a03_mtl_alpha_one_degeneracy() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let corpus = toy_corpus();
    let store = toy_store(dir.path(), &corpus);
    let opts = EncodeOptions::default();

    // identical stance instances for both runs; rationale instances only
    // feed the (weight-zero) MTL side stream
    let stance: Vec<TrainingInstance> =
        corpus.iter().map(|e| encode_mtl_stance(e, &opts)).collect();
    let mut mixed = stance.clone();
    for example in &corpus {
        let rex = store.rationalized(example).unwrap();
        mixed.push(encode_mtl(&rex, &opts).unwrap()[1].clone());
    }

    let base = TrainConfig {
        learning_rate: 1e-2,
        epochs: 25, // 2 steps per epoch -> 50 steps
        seed: 99,
        ..TrainConfig::default()
    };
    let st_ft_config = TrainConfig {
        paradigm: Paradigm::StFt,
        batch_size: 16,
        ..base.clone()
    };
    let mtl_config = TrainConfig {
        paradigm: Paradigm::Mtl,
        alpha: 1.0,
        batch_size: 32, // 16 stance + 16 rationale per step
        ..base
    };

    let backend_config = TinyConfig::default().with_seed(3);
    let mut st_ft_backend = TinyBackend::new(backend_config);
    let st_ft_record = Trainer::new(st_ft_config)
        .fit_instances(&mut st_ft_backend, &stance, &[], "toy".to_string())
        .unwrap();
    let mut mtl_backend = TinyBackend::new(backend_config);
    let mtl_record = Trainer::new(mtl_config)
        .fit_instances(&mut mtl_backend, &mixed, &[], "toy".to_string())
        .unwrap();

    let st_ft_trace: Vec<f64> = st_ft_record.step_losses().map(|s| s.stance_loss).collect();
    let mtl_trace: Vec<f64> = mtl_record.step_losses().map(|s| s.stance_loss).collect();
    assert_eq!(st_ft_trace.len(), 50);
    assert_eq!(mtl_trace.len(), 50);
    let mut max_diff = 0.0f64;
    for (a, b) in st_ft_trace.iter().zip(&mtl_trace) {
        max_diff = max_diff.max((a - b).abs());
    }
    assert!(max_diff < 1e-6, "stance-loss traces diverged by {max_diff}");
    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
    pass(
        "A3 mtl-alpha-one-degeneracy",
        &format!("50-step trace max diff {max_diff:.2e} in {elapsed:.2?}"),
    );
}

// ---------------------------------------------------------------------------
// A4: the combined-loss formula on a 9x9 grid
// ---------------------------------------------------------------------------

#[test]
fn a04_loss_formula_grid() {
    let mut checked = 0;
    for ai in 1..=9 {
        let alpha = ai as f64 / 10.0;
        for li in 1..=9 {
            let stance = 0.3 * li as f64;
            let rationale = 7.7 - 0.7 * li as f64;
            let breakdown = mtl_combine_loss(stance, rationale, alpha).unwrap();
            let expected = alpha * stance + (1.0 - alpha) * rationale;
            assert!(
                (breakdown.combined - expected).abs() <= 1e-9,
                "alpha {alpha} stance {stance} rationale {rationale}"
            );
            checked += 1;
        }
    }
    assert_eq!(checked, 81);
    pass("A4 loss-formula", "81 grid points within 1e-9");
}

// ---------------------------------------------------------------------------
// A5: overfit probe — every paradigm memorizes the 32-example toy corpus
// ---------------------------------------------------------------------------

#[test]
fn a05_overfit_probe() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let corpus = toy_corpus();
    let store = toy_store(dir.path(), &corpus);
    let split = CorpusSplit {
        train: corpus.clone(),
        validation: Vec::new(),
        test: Vec::new(),
        seed: 0,
    };

    for paradigm in Paradigm::ALL {
        let epochs = match paradigm {
            Paradigm::Mtl => 100, // 2 optimizer steps per epoch
            _ => 200,             // 1 optimizer step per epoch
        };
        let config = TrainConfig {
            paradigm,
            alpha: 0.5,
            batch_size: 32,
            learning_rate: 3e-2,
            epochs,
            seed: 13,
            ..TrainConfig::default()
        };
        let mut backend = TinyBackend::new(TinyConfig {
            embed_dim: 16,
            hidden_dim: 48,
            seed: 13,
        });
        let record = Trainer::new(config.clone())
            .run(&mut backend, &split, Some(&store))
            .unwrap();
        let steps: usize = record.epochs.iter().map(|e| e.steps.len()).sum();
        assert!(steps <= 200, "{paradigm}: used {steps} optimizer steps");

        let outcomes = predict(&backend, &corpus, paradigm, &config, &config.encode_options()).unwrap();
        let correct = outcomes
            .iter()
            .zip(&corpus)
            .filter(|(o, e)| o.label == Some(e.gold))
            .count();
        let accuracy = correct as f64 / corpus.len() as f64;
        assert!(
            accuracy >= 0.95,
            "{paradigm}: parsed training accuracy {accuracy:.3} after {steps} steps"
        );
        println!("  {paradigm}: {correct}/32 after {steps} steps");
    }
    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(600), "took {elapsed:?}");
    pass(
        "A5 overfit-probe",
        &format!("all paradigms >= 95% within 200 steps in {elapsed:.2?}"),
    );
}

// ---------------------------------------------------------------------------
// A6: analytic gradients of the combined MTL loss vs finite differences
// ---------------------------------------------------------------------------

#[test]
fn a06_gradient_check() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = toy_corpus();
    let store = toy_store(dir.path(), &corpus);
    let opts = EncodeOptions::default();
    let alpha = 0.3;

    let mut backend = TinyBackend::new(TinyConfig::default().with_seed(21));
    let tokenize = |backend: &TinyBackend, instances: &[TrainingInstance]| -> Vec<SeqPair> {
        instances
            .iter()
            .map(|i| SeqPair {
                input: backend.tokenize(&i.input_text),
                target: backend.tokenize(&i.target_text),
            })
            .collect()
    };
    let stance: Vec<TrainingInstance> = corpus[..8]
        .iter()
        .map(|e| encode_mtl_stance(e, &opts))
        .collect();
    let rationale: Vec<TrainingInstance> = corpus[..8]
        .iter()
        .map(|e| encode_mtl(&store.rationalized(e).unwrap(), &opts).unwrap()[1].clone())
        .collect();
    let stance_pairs = tokenize(&backend, &stance);
    let rationale_pairs = tokenize(&backend, &rationale);

    backend.accumulate_loss(&stance_pairs, alpha).unwrap();
    backend.accumulate_loss(&rationale_pairs, 1.0 - alpha).unwrap();
    let grad = backend.gradient();
    let theta = backend.params();

    let combined_at = |backend: &mut TinyBackend, params: &[f64]| -> f64 {
        backend.set_params(params).unwrap();
        let s = backend.eval_loss(&stance_pairs).unwrap();
        let r = backend.eval_loss(&rationale_pairs).unwrap();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        alpha * mean(&s) + (1.0 - alpha) * mean(&r)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(0xA6);
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for direction_idx in 0..10 {
        let mut direction: Vec<f64> = (0..theta.len()).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
        direction.iter_mut().for_each(|x| *x /= norm);

        let analytic: f64 = grad.iter().zip(&direction).map(|(g, d)| g * d).sum();
        let plus: Vec<f64> = theta.iter().zip(&direction).map(|(p, d)| p + eps * d).collect();
        let minus: Vec<f64> = theta.iter().zip(&direction).map(|(p, d)| p - eps * d).collect();
        let numeric = (combined_at(&mut backend, &plus) - combined_at(&mut backend, &minus)) / (2.0 * eps);

        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12);
        worst = worst.max(rel);
        assert!(
            rel < 1e-3,
            "direction {direction_idx}: analytic {analytic} vs numeric {numeric} (rel {rel:.2e})"
        );
    }
    backend.set_params(&theta).unwrap();
    pass(
        "A6 gradient-check",
        &format!("10 directions, worst relative error {worst:.2e}"),
    );
}

// ---------------------------------------------------------------------------
// A7: codec round trip and parser fuzzing
// ---------------------------------------------------------------------------

#[test]
fn a07_codec_round_trip_and_fuzz() {
    let mut combinations = 0;
    for gold in StanceLabel::ALL {
        for instructed in [false, true] {
            let opts = EncodeOptions::default().instructed(instructed);
            let example = StanceExample {
                id: "rt".to_string(),
                topic: "Feminist Movement".to_string(),
                comment: "equal pay matters".to_string(),
                gold,
            };
            let rex = stance_core::elicitor::RationalizedExample {
                rationale: format!(
                    "{} it argues for workplace equality",
                    rationale_stem(gold, &example.topic)
                ),
                example: example.clone(),
                service_id: "mock".to_string(),
                attempts: 1,
                created_at: String::new(),
            };
            let targets = [
                (encode_st_ft(&example, &opts).target_text, Paradigm::StFt),
                (encode_st_cot(&rex, &opts).unwrap().target_text, Paradigm::StCot),
                (encode_mtl(&rex, &opts).unwrap()[0].target_text.clone(), Paradigm::Mtl),
            ];
            for (target, paradigm) in targets {
                let outcome = parse_generation(&target, paradigm);
                assert_eq!(outcome.label, Some(gold), "{paradigm} {instructed} {gold}");
                assert!(!outcome.failed);
                combinations += 1;
            }
        }
    }
    assert_eq!(combinations, 18);

    // 10k random strings: the parser must never panic and must keep its
    // outcome invariant
    let mut rng = ChaCha8Rng::seed_from_u64(0xA7);
    for _ in 0..10_000 {
        let len = rng.gen_range(0..120);
        let raw: String = (0..len)
            .map(|_| {
                // bias toward ASCII with occasional arbitrary unicode
                if rng.gen_bool(0.9) {
                    char::from(rng.gen_range(b' '..=b'~'))
                } else {
                    char::from_u32(rng.gen_range(0x20..0x2FFFF)).unwrap_or('\u{fffd}')
                }
            })
            .collect();
        let paradigm = Paradigm::ALL[rng.gen_range(0..3)];
        let outcome = parse_generation(&raw, paradigm);
        assert_eq!(outcome.failed, outcome.label.is_none());
    }
    pass(
        "A7 codec-round-trip",
        "18/18 encode->parse recoveries; 10000-string fuzz clean",
    );
}

// ---------------------------------------------------------------------------
// A8: corpus fidelity to the published per-topic counts, plus split and
// nested-subsample invariants over 100 seeded trials
// ---------------------------------------------------------------------------

#[test]
fn a08_corpus_fidelity() {
    // the official corpus is not redistributable; the bundled fixture
    // reproduces its published per-topic counts in the same file layout.
    // point STANCE_SEMEVAL_DIR at the official files to check them instead.
    let fixture_dir = tempfile::tempdir().unwrap();
    let (source, train_path, test_path) = match std::env::var(SEMEVAL_DIR_ENV) {
        Ok(dir) if !dir.trim().is_empty() => {
            let dir = std::path::PathBuf::from(dir);
            ("official files", dir.join("train.txt"), dir.join("test.txt"))
        }
        _ => {
            let (train, test) = write_semeval_fixture(fixture_dir.path()).unwrap();
            ("synthetic fixture", train, test)
        }
    };
    let mut examples = parse_stance_file(&std::fs::read(&train_path).unwrap()).unwrap();
    let train_len = examples.len();
    examples.extend(parse_stance_file(&std::fs::read(&test_path).unwrap()).unwrap());
    let stats = compute_stats(&examples);
    for (topic, favor, against, neutral) in reference_topic_counts() {
        let counts = stats.topic(topic);
        assert_eq!(
            (counts.favor, counts.against, counts.neutral),
            (favor, against, neutral),
            "{topic} counts"
        );
    }

    let train_pool = stance_core::corpus::evaluation_examples(&examples[..train_len]);
    for trial in 0..100 {
        let seed = derive_seed(0xA8, &["trial", &trial.to_string()]);
        let split = make_split(&train_pool, 0.1, seed).unwrap();
        assert_eq!(split.train.len() + split.validation.len(), train_pool.len());
        let val_ids: std::collections::BTreeSet<&str> =
            split.validation.iter().map(|e| e.id.as_str()).collect();
        assert!(split.train.iter().all(|e| !val_ids.contains(e.id.as_str())));
        let topics: std::collections::BTreeSet<&str> =
            train_pool.iter().map(|e| e.topic.as_str()).collect();
        for topic in topics {
            assert!(
                split.validation.iter().any(|e| e.topic == topic),
                "trial {trial}: topic {topic} missing from validation"
            );
        }

        let small = subsample(&split.train, 0.1, seed).unwrap();
        let large = subsample(&split.train, 0.35, seed).unwrap();
        let small_ids: std::collections::BTreeSet<&str> =
            small.iter().map(|e| e.id.as_str()).collect();
        let large_ids: std::collections::BTreeSet<&str> =
            large.iter().map(|e| e.id.as_str()).collect();
        assert!(
            small_ids.is_subset(&large_ids),
            "trial {trial}: nested subsample violated"
        );
    }
    pass(
        "A8 corpus-fidelity",
        &format!("all 18 reference cells exact ({source}); 100 seeded split/subsample trials clean"),
    );
}

// ---------------------------------------------------------------------------
// A9: elicitation pipeline with the mock client
// ---------------------------------------------------------------------------

#[test]
fn a09_elicitation_pipeline() {
    let corpus_dir = tempfile::tempdir().unwrap();
    let (train_path, _) = write_semeval_fixture(corpus_dir.path()).unwrap();
    let mut examples = toy_corpus();
    examples.extend(
        parse_stance_file(&std::fs::read(&train_path).unwrap())
            .unwrap()
            .into_iter()
            .take(200),
    );

    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("rationales.jsonl");
    let config = ElicitorConfig::default().immediate();
    let summary = build_rationale_store(&examples, &MockClient::new(), &cache, &config).unwrap();
    assert_eq!(summary.newly_elicited, examples.len());
    assert_eq!(summary.failed, 0);

    let store = RationaleStore::load(&cache).unwrap();
    assert_eq!(store.len(), examples.len());
    let violations = store.validate();
    assert!(violations.is_empty(), "violations: {violations:?}");

    let before = std::fs::read(&cache).unwrap();
    let rerun = build_rationale_store(&examples, &MockClient::new(), &cache, &config).unwrap();
    assert_eq!(rerun.cached, examples.len());
    assert_eq!(rerun.newly_elicited, 0);
    assert_eq!(std::fs::read(&cache).unwrap(), before);
    pass(
        "A9 elicitation-pipeline",
        &format!("{} rationales, 0 stem violations, idempotent rerun", store.len()),
    );
}

// ---------------------------------------------------------------------------
// A10: published numbers are labeled reference values; the pretrained-backend
// ordering check runs only where such a backend exists (non-fatal)
// ---------------------------------------------------------------------------

#[test]
fn a10_reference_value_labeling() {
    use stance_cli::commands::sweep::{CellAggregate, SweepResult};

    let report = EvalReport {
        favor: Default::default(),
        against: Default::default(),
        neutral: Default::default(),
        f_avg: 0.5,
        per_topic: Default::default(),
        parse_failures: 0,
        parse_failure_rate: 0.0,
        n: 4,
    };
    let aggregate = evaluator::aggregate(&[report]).unwrap();
    let result = SweepResult {
        kind: "alpha".to_string(),
        axis_label: "alpha".to_string(),
        backend: "tiny".to_string(),
        seeds: vec![13],
        cells: vec![CellAggregate {
            axis: 0.5,
            paradigm: Paradigm::Mtl,
            ok_seeds: 1,
            failed_seeds: 0,
            aggregate: Some(aggregate),
            mean_val_f_avg: Some(0.4),
        }],
        failures: Vec::new(),
        argmax_test: None,
        argmax_validation: None,
        reference_notes: stance_cli::commands::REFERENCE_NOTES
            .iter()
            .map(|s| s.to_string())
            .collect(),
        executed_cells: 1,
        skipped_cells: 0,
    };
    let markdown = stance_cli::commands::report::sweep_markdown(&result);
    assert!(markdown.contains("Reference values (labels, not targets):"));
    assert!(markdown.contains("79.72"), "large-backbone MTL reference missing");
    assert!(markdown.contains("70.15"), "service baseline reference missing");
    assert!(markdown.contains("not reproducible"), "reference labeling missing");
    assert!(markdown.contains("0.5 (small backbone), 0.2 (base and large backbones)"));

    // the soft ordering check needs a real pretrained backend, which this
    // environment cannot host; it runs only when one is plugged in
    match std::env::var("STANCE_PRETRAINED_BACKEND") {
        Ok(id) if stance_cli::runspec::make_backend(&id, 13).is_ok() => {
            let ordering = pretrained_ordering_check(&id);
            // reported, non-fatal: seed noise at 10% data is expected
            println!(
                "  soft check (pretrained {id}): mean F_avg MTL >= ST-CoT is {ordering}"
            );
        }
        _ => {
            println!(
                "  soft check SKIPPED (non-fatal): no pretrained backend is available in this \
                 environment; set STANCE_PRETRAINED_BACKEND to a registered backend to run it"
            );
        }
    }
    pass(
        "A10 reference-value-labeling",
        "published numbers rendered as labeled references",
    );
}

fn pretrained_ordering_check(backend_id: &str) -> bool {
    let dir = tempfile::tempdir().unwrap();
    let (train_path, test_path) = write_semeval_fixture(dir.path()).unwrap();
    let train = parse_stance_file(&std::fs::read(train_path).unwrap()).unwrap();
    let test = parse_stance_file(&std::fs::read(test_path).unwrap()).unwrap();
    let train = stance_core::corpus::evaluation_examples(&train);
    let test = stance_core::corpus::evaluation_examples(&test);
    let store = toy_store(dir.path(), &train);

    let mut means = std::collections::HashMap::new();
    for paradigm in [Paradigm::Mtl, Paradigm::StCot] {
        let mut scores = Vec::new();
        for seed in [13u64, 42, 87] {
            let config = TrainConfig {
                paradigm,
                train_fraction: 0.1,
                seed,
                ..TrainConfig::default()
            };
            let split = make_split(&train, 0.1, seed)
                .unwrap()
                .attach_test(test.clone())
                .unwrap();
            let mut backend = stance_cli::runspec::make_backend(backend_id, seed).unwrap();
            Trainer::new(config.clone())
                .run(backend.as_mut(), &split, Some(&store))
                .unwrap();
            let outcomes = predict(
                backend.as_ref(),
                &split.test,
                paradigm,
                &config,
                &config.encode_options(),
            )
            .unwrap();
            let golds: Vec<_> = split.test.iter().map(|e| e.gold).collect();
            let topics: Vec<_> = split.test.iter().map(|e| e.topic.clone()).collect();
            scores.push(evaluator::score(&golds, &outcomes, &topics).unwrap().f_avg);
        }
        means.insert(paradigm, scores.iter().sum::<f64>() / scores.len() as f64);
    }
    means[&Paradigm::Mtl] >= means[&Paradigm::StCot]
}

// ---------------------------------------------------------------------------
// A11: full alpha sweep mechanics through the binary, with resume
// ---------------------------------------------------------------------------

#[test]
fn a11_sweep_mechanics_and_resume() {
    let bin = env!("CARGO_BIN_EXE_stance");
    let dir = tempfile::tempdir().unwrap();
    let data_dir = dir.path().join("data");
    write_semeval_fixture(&data_dir).unwrap();
    let run_dir = dir.path().join("sweep");
    let cache = dir.path().join("rationales.jsonl");

    let sweep_cmd = |run_dir: &Path| {
        let mut cmd = std::process::Command::new(bin);
        cmd.args([
            "sweep-alpha",
            "--data",
            data_dir.to_str().unwrap(),
            "--cache",
            cache.to_str().unwrap(),
            "--out",
            dir.path().join("out").to_str().unwrap(),
            "--run-dir",
            run_dir.to_str().unwrap(),
            "--mock-llm",
            "--epochs",
            "1",
            "--batch-size",
            "32",
            "--lr",
            "0.02",
            "--train-fraction",
            "0.05",
            "--max-gen-len",
            "16",
            "--workers",
            "4",
        ]);
        cmd
    };

    // full 9 x 3 grid
    let output = sweep_cmd(&run_dir).output().unwrap();
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(
        output.status.success(),
        "sweep failed:\n{stdout}\n{}",
        String::from_utf8_lossy(&output.stderr)
    );
    assert!(stdout.contains("9 axis values x 1 paradigms x 3 seeds = 27 cells"));

    let plot = std::fs::read_to_string(run_dir.join("plot.csv")).unwrap();
    let data_rows: Vec<&str> = plot.lines().skip(1).filter(|l| !l.is_empty()).collect();
    assert_eq!(data_rows.len(), 9, "plot CSV rows:\n{plot}");
    let table = std::fs::read_to_string(run_dir.join("table.md")).unwrap();
    assert!(table.contains("| alpha | mtl |"));
    assert!(table.contains("| 0.1 |") && table.contains("| 0.9 |"));

    // simulate a killed sweep: drop some cell states, corrupt another, rerun
    let cells_dir = run_dir.join("cells");
    let mut cells: Vec<_> = std::fs::read_dir(&cells_dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    cells.sort();
    assert_eq!(cells.len(), 27);
    for cell in cells.iter().take(5) {
        std::fs::remove_file(cell.join("manifest.json")).unwrap();
    }
    std::fs::write(cells[5].join("manifest.json"), "{ truncated").unwrap();

    let output = sweep_cmd(&run_dir).output().unwrap();
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(output.status.success(), "resume failed:\n{stdout}");
    assert!(
        stdout.contains("cells: 6 executed, 21 resumed"),
        "unexpected resume accounting:\n{stdout}"
    );

    // a mid-run kill must leave a resumable directory behind
    let killed_dir = dir.path().join("sweep-killed");
    let mut child = sweep_cmd(&killed_dir)
        .stdout(std::process::Stdio::null())
        .stderr(std::process::Stdio::null())
        .spawn()
        .unwrap();
    std::thread::sleep(Duration::from_millis(1200));
    let _ = child.kill();
    let _ = child.wait();
    let output = sweep_cmd(&killed_dir).output().unwrap();
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(output.status.success(), "post-kill rerun failed:\n{stdout}");
    let plot = std::fs::read_to_string(killed_dir.join("plot.csv")).unwrap();
    assert_eq!(plot.lines().skip(1).filter(|l| !l.is_empty()).count(), 9);

    pass(
        "A11 sweep-mechanics",
        "27-cell sweep emitted 9-row plot CSV and table; resumed after cell loss and after kill",
    );
}

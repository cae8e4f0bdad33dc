//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any required criterion fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use pdisc_core::augment::{balance_corpus_with_report, AugmentationPlan, FixtureLexicon};
use pdisc_core::corpus::{
    load_corpus, stratified_split, synth_corpus, synth_corpus_counts, Cell, Corpus, CorpusFormat, InfoType, SplitSet,
    TweetRecord,
};
use pdisc_core::evalmetrics::{classification_report, roc_one_vs_all, roc_points, ConfusionMatrix};
use pdisc_core::lingfeat::{build_tag_vocab, DepTagSequence, DeviceVocab, DEP_LABELS};
use pdisc_core::nnmodel::{
    build_model, evaluate_loss, joint_loss, train, EncoderBackend, Featurizer, ForwardMode, ModelConfig, ModelState,
    StubEncoder, TensorSet, TrainConfig, Vocabs,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Outcome = Result<String, String>;

fn pdisc(args: &[&str], dir: &Path) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_pdisc"))
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "`pdisc {}` exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr).trim()
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn read_json(path: &Path) -> Result<Value, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn end_to_end(dir: &Path, seed: &str) -> Result<Value, String> {
    pdisc(&["synth", "--n-per-cell", "100", "--seed", seed, "--out", "corpus.jsonl"], dir)?;
    pdisc(
        &[
            "train", "--data", "corpus.jsonl", "--out", "ckpt", "--epochs", "5", "--batch-size", "64",
            "--learning-rate", "5e-4", "--seed", seed,
        ],
        dir,
    )?;
    pdisc(&["evaluate", "--data", "corpus.jsonl", "--checkpoint", "ckpt"], dir)?;
    read_json(&dir.join("ckpt/metrics.json"))
}

fn learnability() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let metrics = end_to_end(dir.path(), "7")?;
    let secs = start.elapsed().as_secs_f64();
    let type_acc = metrics["type_report"]["accuracy"].as_f64().ok_or("no type accuracy")?;
    let disc_acc = metrics["disclosure_report"]["accuracy"].as_f64().ok_or("no disclosure accuracy")?;
    let n = metrics["n_samples"].as_u64().unwrap_or(0);
    let detail = format!("type {type_acc:.3}, disclosure {disc_acc:.3} on {n} held-out records in {secs:.1}s");
    check(n == 60, format!("expected a 60-record test split; {detail}"))?;
    check(type_acc >= 0.90 && disc_acc >= 0.90, detail.clone())?;
    check(secs < 300.0, detail.clone())?;
    Ok(detail)
}

fn stub_encoder(dim: usize) -> Arc<dyn EncoderBackend> {
    Arc::new(StubEncoder::new(4096, dim, 0).unwrap())
}

fn setup(records: &[TweetRecord], cfg: ModelConfig, seed: u64) -> (ModelState, Featurizer) {
    let featurizer = Featurizer::stub(&cfg);
    let vocabs = featurizer.fit_vocabs(records).unwrap();
    let cfg = vocabs.apply_to(cfg);
    let encoder = stub_encoder(cfg.encoder_out_dim);
    (build_model(cfg, encoder, vocabs, seed).unwrap(), featurizer)
}

fn train_only(records: Vec<TweetRecord>) -> SplitSet {
    SplitSet {
        train: Corpus::new(records, "acceptance").unwrap(),
        validation: Corpus::empty("acceptance"),
        test: Corpus::empty("acceptance"),
        seed: 0,
    }
}

fn frozen_encoder() -> Outcome {
    let splits = train_only(synth_corpus(20, 3).map_err(|e| e.to_string())?.into_records());
    let (state, featurizer) = setup(splits.train.records(), ModelConfig::default(), 3);
    let before = state.encoder().parameter_checksum();
    let (state, _) = train(state, &splits, &TrainConfig::default(), &featurizer).map_err(|e| e.to_string())?;
    let after = state.encoder().parameter_checksum();
    check(before == after, format!("checksum changed: {before} -> {after}"))?;
    Ok(format!("checksum {}... unchanged", &after[..16]))
}

fn tiny_overfit() -> Outcome {
    let records: Vec<TweetRecord> = synth_corpus(6, 5).unwrap().into_records().into_iter().take(32).collect();
    let splits = train_only(records);
    let (state, featurizer) = setup(splits.train.records(), ModelConfig::default(), 5);
    let initial = evaluate_loss(&state, splits.train.records(), &featurizer).unwrap().total;
    let tcfg = TrainConfig {
        epochs: 200,
        seed: 5,
        ..TrainConfig::default()
    };
    let (state, history) = train(state, &splits, &tcfg, &featurizer).map_err(|e| e.to_string())?;
    let steps: usize = history.epochs.iter().map(|e| e.steps).sum();
    let last = evaluate_loss(&state, splits.train.records(), &featurizer).unwrap().total;
    let detail = format!("loss {initial:.4} -> {last:.4} ({:.1}%) after {steps} steps", 100.0 * last / initial);
    check(steps == 200 && last <= 0.2 * initial, detail.clone())?;
    Ok(detail)
}

fn gradient_check() -> Outcome {
    let records: Vec<TweetRecord> = synth_corpus(1, 3).unwrap().into_records().into_iter().take(4).collect();
    let cfg = ModelConfig {
        encoder_out_dim: 8,
        dp_embed_dim: 2,
        recurrent_units: 3,
        meta_dense_units: 2,
        dp_max_len: 8,
        ..ModelConfig::default()
    };
    let (mut state, featurizer) = setup(&records, cfg, 3);
    let batch = featurizer.batch(&records, &state.vocabs, 3).unwrap();
    let prepared = state.prepare(&batch).unwrap();
    let mode = ForwardMode::Train { dropout_seed: 17 };
    let (_, grads) = state.loss_and_gradients(&prepared, mode).unwrap();
    let loss_at = |s: &ModelState| {
        let preds = s.forward_prepared(&prepared, mode).unwrap();
        joint_loss(&preds, &prepared.y_type, &prepared.y_disc).unwrap().total
    };
    let analytic: Vec<(String, Vec<f64>)> =
        grads.tensors().into_iter().map(|(n, t)| (n, t.iter().copied().collect())).collect();
    let h = 1e-4;
    let (mut worst, mut worst_at, mut count) = (0.0f64, String::new(), 0usize);
    for (ti, (name, values)) in analytic.iter().enumerate() {
        for (k, &a) in values.iter().enumerate() {
            let nudge = |s: &mut ModelState, delta: f64| {
                let mut tensors = s.params.tensors_mut();
                *tensors[ti].1.iter_mut().nth(k).unwrap() += delta;
            };
            nudge(&mut state, h);
            let up = loss_at(&state);
            nudge(&mut state, -2.0 * h);
            let down = loss_at(&state);
            nudge(&mut state, h);
            let numeric = (up - down) / (2.0 * h);
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
            if rel > worst {
                worst = rel;
                worst_at = format!("{name}[{k}]");
            }
            count += 1;
        }
    }
    let detail = format!("{count} entries over {} tensors, worst relative error {worst:.2e} at {worst_at}", analytic.len());
    check(worst < 1e-3, detail.clone())?;
    Ok(detail)
}

fn shapes() -> Outcome {
    let cfg = ModelConfig::default();
    check(
        cfg.concat1_dim() == 800 && cfg.concat2_dim() == 832,
        format!("concat widths {} / {}", cfg.concat1_dim(), cfg.concat2_dim()),
    )?;
    let names: Vec<String> = (0..117).map(|i| format!("client-{i}")).collect();
    let vocabs = Vocabs {
        tags: build_tag_vocab(&[DepTagSequence {
            tags: DEP_LABELS.iter().map(|s| s.to_string()).collect(),
        }]),
        devices: DeviceVocab::from_names(names.iter().map(String::as_str)),
    };
    check(vocabs.devices.len() == 118, format!("{} devices", vocabs.devices.len()))?;
    let cfg = vocabs.apply_to(cfg);
    let state = build_model(cfg, stub_encoder(768), vocabs, 0).map_err(|e| e.to_string())?;
    let meta = state.params.meta.as_ref().ok_or("no metadata branch")?;
    let head = state.params.type_head.kernel.dim();
    let disc = state.params.disclosure_head.kernel.dim();
    check(
        meta.kernel.dim() == (149, 32) && head == (832, 3) && disc == (832, 1),
        format!("meta {:?}, type head {head:?}, disclosure head {disc:?}", meta.kernel.dim()),
    )?;
    Ok("concat 800 -> 832, meta dense 149 -> 32 with 118 devices".into())
}

fn pairwise_auc(y: &[bool], s: &[f64]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &yi) in y.iter().enumerate() {
        for (j, &yj) in y.iter().enumerate() {
            if yi && !yj {
                pairs += 1.0;
                wins += if s[i] > s[j] {
                    1.0
                } else if s[i] == s[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    wins / pairs
}

fn metric_oracles() -> Outcome {
    let cm = ConfusionMatrix {
        labels: vec!["neg".into(), "pos".into()],
        counts: vec![vec![8, 2], vec![1, 9]],
    };
    let r = classification_report(&cm).map_err(|e| e.to_string())?;
    let (p0, r0, p1, r1) = (8.0 / 9.0, 0.8, 9.0 / 11.0, 0.9);
    let exact = r.classes[0].precision == p0
        && r.classes[0].recall == r0
        && r.classes[1].precision == p1
        && r.classes[1].recall == r1
        && r.classes[0].f1 == 2.0 * p0 * r0 / (p0 + r0)
        && r.classes[1].f1 == 2.0 * p1 * r1 / (p1 + r1)
        && r.accuracy == 0.85
        && r.classes[0].support == 10
        && r.classes[1].support == 10;
    check(exact, format!("report mismatch: {r:?}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut checked, mut worst) = (0, 0.0f64);
    while checked < 1000 {
        let n = rng.random_range(2..=200);
        let y: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        if y.iter().all(|&b| b) || y.iter().all(|&b| !b) {
            continue;
        }
        let s: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..25u32)) / 25.0).collect();
        let auc = roc_points(&y, &s).map_err(|e| e.to_string())?.auc;
        worst = worst.max((auc - pairwise_auc(&y, &s)).abs());
        checked += 1;
    }
    check(worst < 1e-9, format!("AUC deviates by {worst:e}"))?;

    for _ in 0..50 {
        let n = rng.random_range(4..100);
        let mut y: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
        y[0] = 0;
        y[1] = 1;
        let p1: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let probs: Vec<Vec<f64>> = p1.iter().map(|&q| vec![1.0 - q, q]).collect();
        let curves = roc_one_vs_all(&y, &probs).map_err(|e| e.to_string())?;
        let binary = roc_points(&y.iter().map(|&c| c == 1).collect::<Vec<_>>(), &p1).map_err(|e| e.to_string())?;
        check(curves[1] == binary, "two-class one-vs-all differs from binary ROC")?;
    }
    Ok(format!("8-2-1-9 report exact; 1000 AUCs within {worst:.1e}; K=2 one-vs-all == binary"))
}

fn cell(info_type: InfoType, disclosure: bool) -> Cell {
    Cell { info_type, disclosure }
}

fn augmentation() -> Outcome {
    let counts = BTreeMap::from([
        (cell(InfoType::Health, true), 807),
        (cell(InfoType::Health, false), 1193),
        (cell(InfoType::Finance, true), 769),
        (cell(InfoType::Finance, false), 1231),
        (cell(InfoType::Relationship, true), 1201),
        (cell(InfoType::Relationship, false), 799),
    ]);
    let corpus = synth_corpus_counts(&counts, 3, 0.0).map_err(|e| e.to_string())?;
    let plan = AugmentationPlan::uniform(900, 11).map_err(|e| e.to_string())?;
    let (out, deltas) =
        balance_corpus_with_report(&corpus, &plan, &FixtureLexicon::bundled()).map_err(|e| e.to_string())?;
    let added = |c| deltas[&c].augmented;
    let got = (
        added(cell(InfoType::Health, true)),
        added(cell(InfoType::Finance, true)),
        added(cell(InfoType::Relationship, false)),
    );
    check(out.len() == 5400, format!("{} records", out.len()))?;
    check(out.cell_counts().values().all(|&n| n == 900), format!("{:?}", out.cell_counts()))?;
    check(got == (93, 131, 101), format!("augmented {got:?}"))?;
    Ok(format!("5400 records, 900 per cell, augmented {}/{}/{}", got.0, got.1, got.2))
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    end_to_end(a.path(), "13")?;
    end_to_end(b.path(), "13")?;
    let read = |d: &Path| std::fs::read(d.join("ckpt/metrics.json")).map_err(|e| e.to_string());
    let (x, y) = (read(a.path())?, read(b.path())?);
    check(x == y, "metrics.json differs between runs")?;
    Ok(format!("metrics.json identical ({} bytes)", x.len()))
}

fn ablation() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    pdisc(
        &["synth", "--n-per-cell", "300", "--ambiguous-share", "0.5", "--seed", "7", "--out", "confusable.jsonl"],
        d,
    )?;
    let common = ["--data", "confusable.jsonl", "--epochs", "20", "--seed", "7"];
    let mut args = vec!["ablate", "--out", "ablation.csv", "--variants", "full,no_metadata,no_dp,encoder_only"];
    args.extend(common);
    pdisc(&args, d)?;
    let mut args = vec!["baseline", "--out", "baselines.json"];
    args.extend(common);
    pdisc(&args, d)?;

    let csv = std::fs::read_to_string(d.join("ablation.csv")).map_err(|e| e.to_string())?;
    let mut lines = csv.lines();
    check(lines.next() == Some("variant,type_acc,disc_acc,params"), "bad header")?;
    let mut rows: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        rows.insert(f[0].to_string(), (f[2].parse().map_err(|_| "bad disc_acc")?, f[3].parse().map_err(|_| "bad params")?));
    }
    check(rows.len() == 4, format!("{} rows", rows.len()))?;

    // expected counts from the vocabularies the run fits on its training split
    let cfg = ModelConfig::default();
    let tcfg = TrainConfig {
        seed: 7,
        ..TrainConfig::default()
    };
    let corpus = load_corpus(&d.join("confusable.jsonl"), CorpusFormat::Jsonl).map_err(|e| e.to_string())?;
    let splits = stratified_split(&corpus, tcfg.test_fraction, tcfg.validation_fraction, tcfg.seed)
        .map_err(|e| e.to_string())?;
    let vocabs = Featurizer::stub(&cfg).fit_vocabs(splits.train.records()).map_err(|e| e.to_string())?;
    let (e, u, k) = (cfg.dp_embed_dim, cfg.recurrent_units, cfg.meta_dense_units);
    let dp = vocabs.tags.len() * e + 4 * u * (e + u + 1);
    let meta = vocabs.devices.one_hot_dim() * k + k;
    let heads = |w: usize| w * 3 + 3 + w + 1;
    let enc = cfg.encoder_out_dim;
    let expected = BTreeMap::from([
        ("full".to_string(), dp + meta + heads(enc + u + k)),
        ("no_metadata".to_string(), dp + heads(enc + u)),
        ("no_dp".to_string(), meta + heads(enc + k)),
        ("encoder_only".to_string(), heads(enc)),
    ]);
    let counts: BTreeMap<String, usize> = rows.iter().map(|(v, r)| (v.clone(), r.1)).collect();
    check(counts == expected, format!("parameter counts {counts:?}, expected {expected:?}"))?;
    let (full, no_meta, no_dp, enc) = (
        counts["full"],
        counts["no_metadata"],
        counts["no_dp"],
        counts["encoder_only"],
    );

    let baselines = read_json(&d.join("baselines.json"))?;
    let acc = |name: &str| -> Option<f64> {
        baselines.as_array()?.iter().find(|r| r["name"] == name)?["accuracy"].as_f64()
    };
    let (full_acc, enc_acc) = (rows["full"].0, rows["encoder_only"].0);
    let (bl_full, bow) = (acc("full").ok_or("no full baseline")?, acc("bow").ok_or("no bow baseline")?);
    let detail = format!(
        "params full {full}, no_metadata {no_meta}, no_dp {no_dp}, encoder_only {enc}; disclosure full {full_acc:.3} vs encoder_only {enc_acc:.3}; bow {bow:.3} vs full {bl_full:.3}"
    );
    check(full_acc >= enc_acc, detail.clone())?;
    check(bow < bl_full, detail.clone())?;
    Ok(detail)
}

#[cfg(feature = "pretrained")]
fn pretrained() -> Option<Outcome> {
    use pdisc_core::pretrained::{cached_model_dir, BertEncoder, WordPieceTokenizer, DEFAULT_MODEL};
    use pdisc_core::textprep::{tokenize_encode, TokenizerBackend};

    let dir = cached_model_dir(DEFAULT_MODEL).filter(|d| d.is_dir())?;
    Some((|| {
        let tokenizer = WordPieceTokenizer::load(&dir).map_err(|e| e.to_string())?;
        let encoder = BertEncoder::load(&dir).map_err(|e| e.to_string())?;
        let input = tokenize_encode("I was at the clinic today.", &tokenizer, 16).map_err(|e| e.to_string())?;
        let n = input.real_len();
        check(
            input.token_ids[0] == tokenizer.cls_id() && input.token_ids[n - 1] == tokenizer.sep_id(),
            "ids are not [CLS]/[SEP] framed",
        )?;
        let pooled = encoder.encode(&input).map_err(|e| e.to_string())?;
        check(pooled.len() == 768, format!("pooled width {}", pooled.len()))?;
        let vocab = tokenizer.vocab_size();
        check(vocab == 30_000, format!("tokenizer vocabulary has {vocab} entries, expected 30000"))?;
        Ok(format!("{DEFAULT_MODEL}: framed ids, pooled 768, vocabulary {vocab}"))
    })())
}

#[cfg(not(feature = "pretrained"))]
fn pretrained() -> Option<Outcome> {
    None
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("synthetic learnability", learnability),
        ("frozen encoder", frozen_encoder),
        ("tiny overfit", tiny_overfit),
        ("gradient check", gradient_check),
        ("shapes", shapes),
        ("metric oracles", metric_oracles),
        ("augmentation arithmetic", augmentation),
        ("determinism", determinism),
        ("ablation harness", ablation),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {detail}", i + 1);
            }
        }
    }
    match pretrained() {
        Some(Ok(detail)) => println!("criterion 10 PASS pretrained smoke test: {detail}"),
        Some(Err(detail)) => {
            failed += 1;
            println!("criterion 10 FAIL pretrained smoke test: {detail}");
        }
        None => println!(
            "criterion 10 SKIP pretrained smoke test: opt-in, needs `--features pretrained` and a cached model under $PDISC_CACHE"
        ),
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

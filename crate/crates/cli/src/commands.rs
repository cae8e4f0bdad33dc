use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use pdisc_core::augment::{balance_corpus_with_report, AugmentationPlan, FixtureLexicon, Lexicon, WordNetLexicon};
use pdisc_core::corpus::{
    load_corpus, parse_timestamp, stratified_split, synth_corpus_with, Corpus, CorpusFormat, InfoType,
    SplitSet, TweetRecord,
};
use pdisc_core::evalmetrics::{
    baseline_bow, baseline_rnn, evaluate_model, run_ablation, save_baselines, BaselineResult, METRICS_FILE,
};
use pdisc_core::nnmodel::{
    build_model, load_checkpoint, predict_batch, save_checkpoint, train, BackendInfo, Featurizer, ModelState,
    TrainConfig, Variant,
};
use serde::Serialize;

use crate::backends::{check_matches, featurizer, text_backend};
use crate::config::{LexiconKind, RunConfig};
use crate::error::CliError;

fn load_data(cfg: &RunConfig) -> Result<Corpus, CliError> {
    let path = cfg.require_data()?;
    Ok(load_corpus(path, CorpusFormat::from_path(path))?)
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display()))),
        _ => Ok(()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    ensure_parent(path)?;
    fs::write(path, text).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn save_corpus(corpus: &Corpus, path: &Path) -> Result<(), CliError> {
    ensure_parent(path)?;
    Ok(corpus.save_jsonl(path)?)
}

fn note(msg: impl AsRef<str>) {
    eprintln!("{}", msg.as_ref());
}

fn split(corpus: &Corpus, tcfg: &TrainConfig) -> Result<SplitSet, CliError> {
    Ok(stratified_split(corpus, tcfg.test_fraction, tcfg.validation_fraction, tcfg.seed)?)
}

pub fn ingest(cfg: &RunConfig) -> Result<(), CliError> {
    let corpus = load_data(cfg)?;
    let out = cfg.require_out()?;
    save_corpus(&corpus, out)?;
    note(format!("wrote {} records to {}", corpus.len(), out.display()));
    Ok(())
}

pub fn synth(cfg: &RunConfig) -> Result<(), CliError> {
    let out = cfg.require_out()?;
    let n = cfg.n_per_cell.unwrap_or(100);
    let corpus = synth_corpus_with(n, cfg.seed(), cfg.ambiguous_share.unwrap_or(0.0))?;
    save_corpus(&corpus, out)?;
    note(format!("wrote {} records to {}", corpus.len(), out.display()));
    Ok(())
}

fn lexicon(cfg: &RunConfig) -> Result<Box<dyn Lexicon>, CliError> {
    match cfg.lexicon.unwrap_or_default() {
        LexiconKind::Fixture => Ok(Box::new(match &cfg.lexicon_file {
            Some(path) => FixtureLexicon::load(path)?,
            None => FixtureLexicon::bundled(),
        })),
        LexiconKind::Real => {
            let (Some(dict), Some(domains)) = (&cfg.wordnet_dir, &cfg.wordnet_domains) else {
                return Err(CliError::Validation(
                    "the real lexicon needs `wordnet_dir` and `wordnet_domains` in the config".into(),
                ));
            };
            Ok(Box::new(WordNetLexicon::load(dict, domains)?))
        }
    }
}

pub fn augment(cfg: &RunConfig) -> Result<(), CliError> {
    let corpus = load_data(cfg)?;
    let out = cfg.require_out()?;
    let per_cell = match cfg.per_cell {
        Some(n) => n,
        None => corpus
            .cell_counts()
            .values()
            .copied()
            .max()
            .ok_or_else(|| CliError::Validation("input corpus is empty".into()))?,
    };
    let plan = AugmentationPlan::uniform(per_cell, cfg.seed())?;
    let lexicon = lexicon(cfg)?;
    let (balanced, deltas) = balance_corpus_with_report(&corpus, &plan, lexicon.as_ref())?;
    save_corpus(&balanced, out)?;
    for (cell, d) in &deltas {
        note(format!(
            "{cell}: {} -> {} (+{} augmented, -{} dropped)",
            d.before, d.after, d.augmented, d.dropped
        ));
    }
    Ok(())
}

struct Prepared {
    splits: SplitSet,
    tcfg: TrainConfig,
    featurizer: Featurizer,
    state: ModelState,
}

/// Splits the data, fits vocabularies on the training part and builds an
/// untrained model.
fn prepare(cfg: &RunConfig) -> Result<Prepared, CliError> {
    let corpus = load_data(cfg)?;
    let tcfg = cfg.train_config();
    tcfg.validate()?;
    let splits = split(&corpus, &tcfg)?;
    let model = cfg.model_config();
    let text = text_backend(cfg, model.encoder_out_dim)?;
    let featurizer = featurizer(cfg, &model, text.tokenizer)?;
    let vocabs = featurizer.fit_vocabs(splits.train.records())?;
    let state = build_model(vocabs.apply_to(model), text.encoder, vocabs, tcfg.seed)?;
    Ok(Prepared {
        splits,
        tcfg,
        featurizer,
        state,
    })
}

pub fn train_cmd(cfg: &RunConfig) -> Result<(), CliError> {
    let out = cfg.require_out()?.to_path_buf();
    let p = prepare(cfg)?;
    let (state, history) = train(p.state, &p.splits, &p.tcfg, &p.featurizer)?;
    save_checkpoint(&state, &p.featurizer, &out)?;
    if let Some(last) = history.epochs.last() {
        println!("{}", serde_json::to_string(last).map_err(pdisc_core::Error::from)?);
    }
    note(format!(
        "trained {} epochs on {} records; checkpoint in {}",
        history.len(),
        p.splits.train.len(),
        out.display()
    ));
    Ok(())
}

/// Loads a checkpoint with backends matching the ones it was trained with.
fn restore(cfg: &RunConfig) -> Result<(ModelState, Featurizer), CliError> {
    let dir = cfg.require_checkpoint()?;
    let info = BackendInfo::load(dir)?;
    let text = text_backend(cfg, info.encoder_dim)?;
    let state = load_checkpoint(dir, text.encoder)?;
    let featurizer = featurizer(cfg, &state.config, text.tokenizer)?;
    check_matches(&info, &featurizer)?;
    Ok((state, featurizer))
}

pub fn evaluate(cfg: &RunConfig) -> Result<(), CliError> {
    let (state, featurizer) = restore(cfg)?;
    let corpus = load_data(cfg)?;
    // The held-out part is re-derived from the split settings saved with
    // the checkpoint.
    let splits = split(&corpus, &state.train_config)?;
    let report = evaluate_model(&state, &splits.test, &featurizer)?;
    let out = match &cfg.out {
        Some(p) => p.clone(),
        None => cfg.require_checkpoint()?.join(METRICS_FILE),
    };
    write_text(&out, &report.to_json_string()?)?;
    println!(
        "{}",
        serde_json::json!({
            "n_samples": report.n_samples,
            "type_accuracy": report.type_report.accuracy,
            "disclosure_accuracy": report.disclosure_report.accuracy,
            "disclosure_auc": report.disclosure_roc.auc,
        })
    );
    note(format!("metrics written to {}", out.display()));
    Ok(())
}

#[derive(Serialize)]
struct PredictionLine<'a> {
    id: &'a str,
    info_type: InfoType,
    disclosure: u8,
    type_probs: &'a [f64],
    disclosure_prob: f64,
}

pub struct SingleInput {
    pub text: Option<String>,
    pub device: Option<String>,
    pub time: Option<String>,
}

pub fn predict(cfg: &RunConfig, single: &SingleInput) -> Result<(), CliError> {
    let records = match (&single.text, &cfg.data) {
        (Some(text), _) => {
            let device = single.device.clone().unwrap_or_default();
            let time = single
                .time
                .as_deref()
                .ok_or_else(|| CliError::Validation("--time is required with --text".into()))?;
            vec![TweetRecord {
                id: "input".into(),
                text: text.clone(),
                created_at: Some(parse_timestamp(time)?),
                device,
                // not used for prediction
                info_type: InfoType::Health,
                votes: Vec::new(),
                disclosure: None,
                augmented_from: None,
            }]
        }
        (None, Some(_)) => load_data(cfg)?.into_records(),
        (None, None) => return Err(CliError::Validation("give --data or --text/--device/--time".into())),
    };
    let (state, featurizer) = restore(cfg)?;
    let preds = predict_batch(&state, &records, &featurizer)?;
    let mut out = String::new();
    for (record, p) in records.iter().zip(&preds) {
        let line = PredictionLine {
            id: &record.id,
            info_type: p.info_type,
            disclosure: u8::from(p.disclosure),
            type_probs: &p.prediction.type_probs,
            disclosure_prob: p.prediction.disclosure_prob,
        };
        out.push_str(&serde_json::to_string(&line).map_err(pdisc_core::Error::from)?);
        out.push('\n');
    }
    match &cfg.out {
        Some(path) => write_text(path, &out),
        None => std::io::stdout()
            .write_all(out.as_bytes())
            .map_err(|e| CliError::Runtime(format!("cannot write predictions: {e}"))),
    }
}

pub fn ablate(cfg: &RunConfig) -> Result<(), CliError> {
    let out = cfg.require_out()?.to_path_buf();
    let variants = cfg.variants.clone().unwrap_or_else(|| Variant::ALL.to_vec());
    let p = prepare(cfg)?;
    let base = cfg.model_config();
    let table = run_ablation(&p.splits, &variants, &base, &p.tcfg, &p.featurizer, p.state.encoder().clone())?;
    write_text(&out, &table.to_csv_string()?)?;
    for row in &table.rows {
        note(format!(
            "{:<13} type {:.4}  disclosure {:.4}  params {}",
            row.variant.as_str(),
            row.type_acc,
            row.disc_acc,
            row.params
        ));
    }
    Ok(())
}

pub fn baseline(cfg: &RunConfig) -> Result<(), CliError> {
    let out: PathBuf = cfg.require_out()?.to_path_buf();
    let p = prepare(cfg)?;
    let model_cfg = p.state.config.clone();
    let (state, _) = train(p.state, &p.splits, &p.tcfg, &p.featurizer)?;
    let full = evaluate_model(&state, &p.splits.test, &p.featurizer)?;
    let results = vec![
        BaselineResult {
            name: "full".into(),
            accuracy: full.disclosure_report.accuracy,
            report: full.disclosure_report,
            confusion: full.disclosure_confusion,
        },
        baseline_bow(&p.splits, &p.tcfg)?,
        baseline_rnn(&p.splits, &model_cfg, &p.tcfg)?,
    ];
    ensure_parent(&out)?;
    save_baselines(&results, &out)?;
    let summary: BTreeMap<&str, f64> = results.iter().map(|r| (r.name.as_str(), r.accuracy)).collect();
    note(format!("disclosure accuracy: {summary:?}"));
    Ok(())
}


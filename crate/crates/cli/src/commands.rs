use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use idiomshot::predictions::oneshot_rows;
use idiomshot::zeroshot::threshold_label;
use idiomshot::{
    build_pairs, build_report, build_support_index, evaluate_oneshot, load_corpus, load_model, load_table,
    majority_vote, parse_predictions, split_stats, train_classifier, train_head, validate_zero_shot_disjoint,
    ClassifierConfig, Corpus, EmbeddingProvider, EnsembleConfig, Error, HashedNgramEncoder, Label, PredictionMode,
    PredictionRow, Result, SavedModel, SplitKind, TableProvider,
};
use serde::Serialize;

use crate::config::{EmbeddingsConfig, MemberConfig, ProviderKind, RunConfig, RunMode};
use crate::output::Outputs;

/// What a command produced: text for standard output, warnings for
/// standard error, and the files it wrote.
#[derive(Debug, Default)]
pub struct Summary {
    pub stdout: String,
    pub warnings: Vec<String>,
    pub written: Vec<PathBuf>,
}

struct Provider {
    inner: Box<dyn EmbeddingProvider>,
    description: serde_json::Value,
}

fn open_provider(config: &EmbeddingsConfig) -> Result<Provider> {
    match config.provider {
        ProviderKind::Hashed => {
            let encoder = HashedNgramEncoder::new(config.hashed.clone(), config.context_mode)?;
            let description = serde_json::json!({
                "provider": "hashed",
                "context_mode": config.context_mode,
                "hashed": config.hashed,
            });
            Ok(Provider { inner: Box::new(encoder), description })
        }
        ProviderKind::Table => {
            let (first, rest) = config
                .tables
                .split_first()
                .ok_or_else(|| Error::Config("embeddings.tables is empty".into()))?;
            let mut table = load_table(first)?;
            for path in rest {
                table.merge(load_table(path)?)?;
            }
            let description = serde_json::json!({
                "provider": "table",
                "dimension": table.dimension(),
                "meta": table.meta(),
            });
            Ok(Provider { inner: Box::new(TableProvider::new(table)), description })
        }
    }
}

fn load_split(config: &RunConfig, split: SplitKind) -> Result<Corpus> {
    load_corpus(config.data.require(split)?, &config.schema, split)
}

fn check_dimension(model: &SavedModel, provider: &Provider, what: &str) -> Result<()> {
    let (expected, got) = (model.input_dim(), provider.inner.dimension());
    if expected != got {
        return Err(Error::Config(format!(
            "{what} expects {expected}-dimensional embeddings but the provider gives {got}"
        )));
    }
    Ok(())
}

fn write_snapshot(config: &RunConfig, outputs: &mut Outputs) -> Result<()> {
    outputs.write(&config.out_dir.join("resolved_config.toml"), &config.to_toml())
}

/// Split statistics as JSON. Reads `path` if given, else the configured
/// file for `split`.
pub fn cmd_stats(config: &RunConfig, split: SplitKind, path: Option<&Path>) -> Result<Summary> {
    let corpus = match path {
        Some(p) => load_corpus(p, &config.schema, split)?,
        None => load_split(config, split)?,
    };
    let stats = serde_json::to_string_pretty(&split_stats(&corpus)).expect("stats serialize");
    Ok(Summary { stdout: stats + "\n", ..Default::default() })
}

#[derive(Debug, Default, Serialize)]
pub struct SplitValidation {
    /// Evaluation split → MWEs it shares with the zero-shot training split.
    pub zero_shot_overlap: BTreeMap<String, Vec<String>>,
    /// Evaluation split → MWEs without one-shot support samples.
    pub missing_support: BTreeMap<String, Vec<String>>,
}

impl SplitValidation {
    pub fn is_valid(&self) -> bool {
        self.zero_shot_overlap.values().all(Vec::is_empty) && self.missing_support.values().all(Vec::is_empty)
    }
}

/// Checks every configured evaluation split against the zero-shot training
/// split (no shared MWEs) and the one-shot split (every MWE supported).
/// Fails with a data error listing the violations.
pub fn cmd_validate_splits(config: &RunConfig) -> Result<Summary> {
    let zero = config.data.zero_shot_train.as_ref().map(|_| load_split(config, SplitKind::ZeroShotTrain)).transpose()?;
    let one = config.data.one_shot_train.as_ref().map(|_| load_split(config, SplitKind::OneShotTrain)).transpose()?;
    let index = one.as_ref().map(build_support_index).transpose()?;
    let mut report = SplitValidation::default();
    let mut checked = 0;
    for split in [SplitKind::Dev, SplitKind::Test] {
        if config.data.path(split).is_none() {
            continue;
        }
        let eval = load_split(config, split)?;
        if let Some(zero) = &zero {
            let overlap = validate_zero_shot_disjoint(zero, &eval).overlap.into_iter().collect();
            report.zero_shot_overlap.insert(split.as_str().into(), overlap);
            checked += 1;
        }
        if let Some(index) = &index {
            report.missing_support.insert(split.as_str().into(), index.missing_mwes(&eval));
            checked += 1;
        }
    }
    if checked == 0 {
        return Err(Error::Config(
            "validate-splits needs data.dev or data.test plus data.zero_shot_train or data.one_shot_train".into(),
        ));
    }
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    if !report.is_valid() {
        return Err(Error::Invalid(format!("split validation failed:\n{json}")));
    }
    Ok(Summary { stdout: json, ..Default::default() })
}

fn classifier_config(config: &RunConfig, seed: u64) -> ClassifierConfig {
    let mut train = config.train.clone();
    train.seed = seed;
    ClassifierConfig { hidden: config.classifier.hidden.clone(), train }
}

fn train_member(config: &RunConfig, member: &MemberConfig, corpus: &Corpus) -> Result<(SavedModel, String)> {
    let provider = open_provider(member.embeddings.as_ref().unwrap_or(&config.embeddings))?;
    let clf_config = classifier_config(config, member.seed.unwrap_or(config.train.seed));
    let (clf, log) = train_classifier(corpus, provider.inner.as_ref(), &clf_config)?;
    let saved = SavedModel::from_classifier(&clf, clf_config.train, Some(provider.description));
    Ok((saved, log.to_tsv()))
}

fn ensemble_members(config: &RunConfig) -> Result<&[MemberConfig]> {
    let members = &config.ensemble.members;
    EnsembleConfig { members: members.iter().map(|m| m.id.clone()).collect() }.validate()?;
    Ok(members)
}

fn train_into(config: &RunConfig, outputs: &mut Outputs) -> Result<()> {
    match config.mode {
        RunMode::OneShot => {
            let corpus = load_split(config, SplitKind::OneShotTrain)?;
            let provider = open_provider(&config.embeddings)?;
            let pairs = build_pairs(&corpus)?;
            let (head, log) = train_head(config.head, &corpus, &pairs, provider.inner.as_ref(), &config.train)?;
            let saved = SavedModel::from_head(&head, config.train.clone(), Some(provider.description));
            outputs.write(&config.model_path(), &saved.to_text())?;
            outputs.write(&config.out_dir.join("training_log.tsv"), &log.to_tsv())?;
        }
        RunMode::ZeroShot => {
            let corpus = load_split(config, SplitKind::ZeroShotTrain)?;
            let provider = open_provider(&config.embeddings)?;
            let clf_config = classifier_config(config, config.train.seed);
            let (clf, log) = train_classifier(&corpus, provider.inner.as_ref(), &clf_config)?;
            let saved = SavedModel::from_classifier(&clf, clf_config.train, Some(provider.description));
            outputs.write(&config.model_path(), &saved.to_text())?;
            outputs.write(&config.out_dir.join("training_log.tsv"), &log.to_tsv())?;
        }
        RunMode::Ensemble => {
            let members = ensemble_members(config)?;
            let corpus = load_split(config, SplitKind::ZeroShotTrain)?;
            // Members are independent, so each trains on its own thread.
            let results: Vec<Result<(SavedModel, String)>> = std::thread::scope(|scope| {
                let handles: Vec<_> = members
                    .iter()
                    .map(|m| scope.spawn(|| train_member(config, m, &corpus)))
                    .collect();
                handles.into_iter().map(|h| h.join().expect("member training panicked")).collect()
            });
            for (member, result) in members.iter().zip(results) {
                let (saved, log) = result?;
                let path = config.member_model_path(&member.id);
                outputs.write(&path, &saved.to_text())?;
                outputs.write(&path.with_extension("log.tsv"), &log)?;
            }
        }
        RunMode::Eval => return Err(Error::Config("mode `eval` has nothing to train".into())),
    }
    Ok(())
}

/// Trains the model selected by `mode` and writes it with its training log
/// and the resolved configuration.
pub fn cmd_train(config: &RunConfig) -> Result<Summary> {
    let mut outputs = Outputs::new();
    write_snapshot(config, &mut outputs)?;
    train_into(config, &mut outputs)?;
    Ok(Summary { written: outputs.commit(), ..Default::default() })
}

fn zero_shot_overlap_warning(config: &RunConfig, eval: &Corpus) -> Result<Option<String>> {
    if config.data.zero_shot_train.is_none() {
        return Ok(None);
    }
    let zero = load_split(config, SplitKind::ZeroShotTrain)?;
    let report = validate_zero_shot_disjoint(&zero, eval);
    Ok((!report.is_disjoint()).then(|| {
        format!(
            "{} MWEs of the {} split also occur in the zero-shot training split",
            report.overlap.len(),
            eval.split()
        )
    }))
}

fn classifier_row(sample: &idiomshot::Sample, label: Label, score: f64, mode: PredictionMode) -> PredictionRow {
    PredictionRow {
        id: sample.id.clone(),
        language: sample.language.clone(),
        mwe: sample.mwe.clone(),
        label,
        score,
        mode,
        support_id: String::new(),
    }
}

/// Probability of the predicted class.
fn label_confidence(probability: f64, label: Label) -> f64 {
    match label {
        Label::Idiomatic => probability,
        Label::Literal => 1.0 - probability,
    }
}

fn predict_into(config: &RunConfig, outputs: &mut Outputs, warnings: &mut Vec<String>) -> Result<()> {
    let split = SplitKind::from(config.data.eval_split);
    let eval = load_split(config, split)?;
    let rows = match config.mode {
        RunMode::OneShot => {
            let provider = open_provider(&config.embeddings)?;
            let saved = load_model(config.model_path())?;
            check_dimension(&saved, &provider, "the model")?;
            let head = saved.into_head()?;
            let index = build_support_index(&load_split(config, SplitKind::OneShotTrain)?)?;
            let preds = evaluate_oneshot(&eval, &index, &head, provider.inner.as_ref())?;
            oneshot_rows(&eval, &preds)?
        }
        RunMode::ZeroShot => {
            warnings.extend(zero_shot_overlap_warning(config, &eval)?);
            let provider = open_provider(&config.embeddings)?;
            let saved = load_model(config.model_path())?;
            check_dimension(&saved, &provider, "the model")?;
            let clf = saved.into_classifier()?;
            eval.samples()
                .iter()
                .map(|s| {
                    let e = provider.inner.embed(split, s)?;
                    let p = clf.probability(e.as_slice())?;
                    let label = threshold_label(p, config.predict.threshold);
                    Ok(classifier_row(s, label, label_confidence(p, label), PredictionMode::Classifier))
                })
                .collect::<Result<Vec<_>>>()?
        }
        RunMode::Ensemble => {
            warnings.extend(zero_shot_overlap_warning(config, &eval)?);
            let members = ensemble_members(config)?;
            let mut votes: Vec<Vec<Label>> = vec![Vec::with_capacity(members.len()); eval.len()];
            for m in members {
                let provider = open_provider(m.embeddings.as_ref().unwrap_or(&config.embeddings))?;
                let saved = load_model(config.member_model_path(&m.id))?;
                check_dimension(&saved, &provider, &format!("member `{}`", m.id))?;
                let clf = saved.into_classifier()?;
                for (s, v) in eval.samples().iter().zip(&mut votes) {
                    let p = clf.probability(provider.inner.embed(split, s)?.as_slice())?;
                    v.push(threshold_label(p, config.predict.threshold));
                }
            }
            let mut sidecar = String::from("id");
            for m in members {
                sidecar.push('\t');
                sidecar.push_str(&m.id);
            }
            sidecar.push_str("\tensemble\n");
            let mut rows = Vec::with_capacity(eval.len());
            for (s, v) in eval.samples().iter().zip(&votes) {
                let label = majority_vote(v)?;
                let agree = v.iter().filter(|&&x| x == label).count() as f64 / v.len() as f64;
                rows.push(classifier_row(s, label, agree, PredictionMode::Ensemble));
                sidecar.push_str(&s.id);
                for x in v {
                    sidecar.push('\t');
                    sidecar.push_str(x.as_str());
                }
                sidecar.push('\t');
                sidecar.push_str(label.as_str());
                sidecar.push('\n');
            }
            outputs.write(&config.out_dir.join("votes.tsv"), &sidecar)?;
            rows
        }
        RunMode::Eval => return Err(Error::Config("mode `eval` does not predict; use the eval command".into())),
    };
    outputs.write(&config.predictions_path(), &idiomshot::write_predictions(&rows))
}

/// Labels every sample of the evaluation split and writes the prediction
/// TSV (plus `votes.tsv` in ensemble mode).
pub fn cmd_predict(config: &RunConfig) -> Result<Summary> {
    let mut outputs = Outputs::new();
    let mut warnings = Vec::new();
    write_snapshot(config, &mut outputs)?;
    predict_into(config, &mut outputs, &mut warnings)?;
    Ok(Summary { warnings, written: outputs.commit(), ..Default::default() })
}

/// Trains every ensemble member, then predicts with the majority vote.
pub fn cmd_ensemble(config: &RunConfig) -> Result<Summary> {
    let mut config = config.clone();
    config.mode = RunMode::Ensemble;
    let mut outputs = Outputs::new();
    let mut warnings = Vec::new();
    write_snapshot(&config, &mut outputs)?;
    train_into(&config, &mut outputs)?;
    predict_into(&config, &mut outputs, &mut warnings)?;
    Ok(Summary { warnings, written: outputs.commit(), ..Default::default() })
}

fn default_setting(rows: &[PredictionRow]) -> &'static str {
    match rows.first().map(|r| r.mode) {
        Some(PredictionMode::Classifier) => "zero-shot",
        Some(PredictionMode::Ensemble) => "ensemble",
        _ => "one-shot",
    }
}

/// Scores the prediction file against the gold labels of the evaluation
/// split; writes `report.json` and `report.txt` and prints the table.
pub fn cmd_eval(config: &RunConfig) -> Result<Summary> {
    let path = config.predictions_path();
    let text = std::fs::read_to_string(&path).map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
    let rows = parse_predictions(&text)?;
    let gold = load_split(config, config.data.eval_split.into())?;
    let setting = config.eval.setting.clone().unwrap_or_else(|| default_setting(&rows).to_string());
    let report = build_report(&rows, &gold, &setting, config.eval.group_by_language)?;
    let table = report.to_text();
    let mut outputs = Outputs::new();
    write_snapshot(config, &mut outputs)?;
    outputs.write(&config.out_dir.join("report.json"), &(report.to_json() + "\n"))?;
    outputs.write(&config.out_dir.join("report.txt"), &table)?;
    Ok(Summary { stdout: table, written: outputs.commit(), ..Default::default() })
}

//! Browser demo: the one-shot inference rule, hashed n-gram similarity and
//! synthetic training curves. Each export takes plain values and returns a
//! JSON string; failures come back as `{"error": "..."}`.

use idiomshot::synth::{generate, SynthConfig};
use idiomshot::{
    build_pairs, build_support_index, choose, evaluate_oneshot, macro_f1, predict_zeroshot, train_classifier,
    train_head, ClassifierConfig, ContextMode, HashedNgramConfig, HashedNgramEncoder, HeadConfig, HeadKind, Label,
    SplitKind, TableProvider, TrainConfig, WinningMode, DEFAULT_THRESHOLD,
};
use serde::Serialize;
use wasm_bindgen::prelude::wasm_bindgen;

#[derive(Debug, Serialize)]
pub struct Candidate {
    pub support: usize,
    pub score: f64,
    pub label: Label,
    pub mode: WinningMode,
    pub winner: bool,
}

#[derive(Debug, Serialize)]
pub struct RuleOutcome {
    pub label: Label,
    pub score: f64,
    pub mode: WinningMode,
    pub support: usize,
    pub candidates: Vec<Candidate>,
}

/// Applies the similarity/dissimilarity rule to support scores `s_i` with
/// support labels given as `Idiomatic`/`Literal` (any case).
pub fn explore_rule(scores: &[f64], labels: &[String]) -> Result<RuleOutcome, String> {
    if scores.len() != labels.len() {
        return Err(format!("{} scores for {} labels", scores.len(), labels.len()));
    }
    if scores.is_empty() {
        return Err("add at least one support sample".into());
    }
    if let Some(s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(format!("score {s} is outside [0, 1]"));
    }
    let scored = scores
        .iter()
        .zip(labels)
        .map(|(&s, l)| Ok((s, l.parse::<Label>().map_err(|e| e.to_string())?)))
        .collect::<Result<Vec<_>, String>>()?;
    let best = choose(&scored).expect("non-empty");
    let candidates = scored
        .iter()
        .enumerate()
        .flat_map(|(i, &(s, label))| {
            [(s, label, WinningMode::Similar), (1.0 - s, label.opposite(), WinningMode::Dissimilar)].map(
                |(score, label, mode)| Candidate {
                    support: i,
                    score,
                    label,
                    mode,
                    winner: i == best.support && mode == best.mode,
                },
            )
        })
        .collect();
    Ok(RuleOutcome { label: best.label, score: best.score, mode: best.mode, support: best.support, candidates })
}

#[derive(Debug, Serialize)]
pub struct Similarity {
    pub cosine: f64,
    pub active_buckets: [usize; 2],
    pub shared_buckets: usize,
}

/// Cosine similarity of the hashed character n-gram embeddings of two texts.
pub fn hashed_similarity(a: &str, b: &str, dimension: usize) -> Result<Similarity, String> {
    let config = HashedNgramConfig { dimension, ..HashedNgramConfig::default() };
    let encoder = HashedNgramEncoder::new(config, ContextMode::TargetOnly).map_err(|e| e.to_string())?;
    let (ea, eb) = (encoder.encode(a), encoder.encode(b));
    let (ea, eb) = (ea.as_slice(), eb.as_slice());
    let dot: f64 = ea.iter().zip(eb).map(|(x, y)| x * y).sum();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let denom = norm(ea) * norm(eb);
    let active = |v: &[f64]| v.iter().filter(|x| **x != 0.0).count();
    Ok(Similarity {
        cosine: if denom == 0.0 { 0.0 } else { dot / denom },
        active_buckets: [active(ea), active(eb)],
        shared_buckets: ea.iter().zip(eb).filter(|(x, y)| **x != 0.0 && **y != 0.0).count(),
    })
}

#[derive(Debug, Serialize)]
pub struct Curve {
    pub epoch_loss: Vec<f64>,
    pub one_shot_f1: f64,
    pub zero_shot_f1: f64,
}

/// Trains a pair head and a zero-shot classifier on a small synthetic corpus
/// and reports the head's loss per epoch with both query macro-F1 scores.
pub fn training_curve(
    kind: &str,
    epochs: usize,
    learning_rate: f64,
    polarity_bias: f64,
    seed: u64,
) -> Result<Curve, String> {
    let kind = match kind.to_ascii_lowercase().as_str() {
        "siamese" => HeadKind::Siamese,
        "relation" => HeadKind::Relation,
        other => return Err(format!("unknown head `{other}`")),
    };
    if epochs > 200 {
        return Err("at most 200 epochs in the demo".into());
    }
    let synth = generate(&SynthConfig {
        mwes: 8,
        zero_shot_mwes: 8,
        dimension: 32,
        idiom_axes: 4,
        one_shot_per_class: 3,
        query_per_class: 5,
        zero_shot_per_class: 6,
        polarity_bias,
        seed,
        ..SynthConfig::default()
    })
    .map_err(|e| e.to_string())?;
    let provider = TableProvider::new(synth.table.clone());
    let mut train = TrainConfig { epochs, batch_size: 16, seed, ..TrainConfig::default() };
    train.optimizer.learning_rate = learning_rate;
    let err = |e: idiomshot::Error| e.to_string();

    let pairs = build_pairs(&synth.one_shot_train).map_err(err)?;
    let head = HeadConfig { kind, ..HeadConfig::default() };
    let (model, log) = train_head(head, &synth.one_shot_train, &pairs, &provider, &train).map_err(err)?;
    let index = build_support_index(&synth.one_shot_train).map_err(err)?;
    let gold: Vec<Label> = synth.queries.samples().iter().map(|s| s.label.expect("labeled")).collect();
    let one_shot: Vec<Label> = evaluate_oneshot(&synth.queries, &index, &model, &provider)
        .map_err(err)?
        .into_iter()
        .map(|p| p.label)
        .collect();

    let clf_config = ClassifierConfig { hidden: vec![16], train };
    let (clf, _) = train_classifier(&synth.zero_shot_train, &provider, &clf_config).map_err(err)?;
    let zero_shot = synth
        .queries
        .samples()
        .iter()
        .map(|s| predict_zeroshot(s, SplitKind::Dev, &clf, &provider, DEFAULT_THRESHOLD).map(|p| p.label))
        .collect::<idiomshot::Result<Vec<_>>>()
        .map_err(err)?;
    Ok(Curve {
        epoch_loss: log.epoch_loss,
        one_shot_f1: macro_f1(&one_shot, &gold).map_err(err)?,
        zero_shot_f1: macro_f1(&zero_shot, &gold).map_err(err)?,
    })
}

fn to_json<T: Serialize>(result: Result<T, String>) -> String {
    match result {
        Ok(v) => serde_json::to_string(&v).expect("serializes"),
        Err(e) => serde_json::json!({ "error": e }).to_string(),
    }
}

#[wasm_bindgen(js_name = exploreRule)]
pub fn explore_rule_js(scores: Vec<f64>, labels: Vec<String>) -> String {
    to_json(explore_rule(&scores, &labels))
}

#[wasm_bindgen(js_name = hashedSimilarity)]
pub fn hashed_similarity_js(a: &str, b: &str, dimension: usize) -> String {
    to_json(hashed_similarity(a, b, dimension))
}

#[wasm_bindgen(js_name = trainingCurve)]
pub fn training_curve_js(kind: &str, epochs: usize, learning_rate: f64, polarity_bias: f64, seed: u64) -> String {
    to_json(training_curve(kind, epochs, learning_rate, polarity_bias, seed))
}

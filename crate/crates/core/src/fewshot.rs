//! One-shot idiomaticity detection by comparing a query sentence with the
//! labeled support sentences of the same MWE.
//!
//! A pair head scores two embeddings `e_i`, `e_j` as
//! `s = g(O(e_i, e_j))` in `(0, 1)`, where `s` estimates the probability that
//! both sentences use the MWE in the same sense:
//!
//! * **Siamese**: `O` is an element-wise difference and `g` a single dense
//!   layer with sigmoid output. Trained with binary cross-entropy.
//! * **Relation**: `O` is concatenation and `g` is a dense
//!   `2d → d → d/2 → 1` network, ReLU hidden layers, sigmoid output.
//!   Trained with mean squared error.
//!
//! At inference every support sample contributes two candidates: its
//! similarity `s` voting for its own label, and its dissimilarity `1 - s`
//! voting for the opposite label. The highest candidate wins, which lets a
//! support set holding only one class still predict either label.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Label, Sample, SplitKind, SupportIndex};
use crate::embedding::{EmbeddingProvider, EmbeddingVector};
use crate::error::{Error, Result};
use crate::nn::{Activation, LayerSpec, Loss, Mlp, Rng};
use crate::train::{fit, TrainConfig, TrainingLog};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    Siamese,
    Relation,
}

impl HeadKind {
    pub fn loss(self) -> Loss {
        match self {
            HeadKind::Siamese => Loss::Bce,
            HeadKind::Relation => Loss::Mse,
        }
    }
}

/// Element-wise comparison used by the Siamese head.
///
/// With the signed difference a single dense layer computes
/// `σ(w·(e_i − e_j) + b)`, so `s(i, j)` and `s(j, i)` always straddle `σ(b)`:
/// it cannot score both orientations of a mixed-class pair below 0.5 while
/// scoring same-class pairs above it. The absolute difference is symmetric
/// and does not have that limitation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiameseOperator {
    #[default]
    AbsoluteDifference,
    SignedDifference,
}

/// A pair-scoring network together with its combination operator.
#[derive(Debug, Clone, PartialEq)]
pub struct PairHead {
    kind: HeadKind,
    operator: SiameseOperator,
    mlp: Mlp,
    dim: usize,
}

impl PairHead {
    /// Layer layout for embeddings of dimension `dim`.
    pub fn architecture(kind: HeadKind, dim: usize, dropout: f64) -> Vec<LayerSpec> {
        let dense = |input, output, activation, dropout| LayerSpec { input, output, activation, dropout };
        match kind {
            HeadKind::Siamese => vec![dense(dim, 1, Activation::Sigmoid, 0.0)],
            HeadKind::Relation => {
                let half = (dim / 2).max(1);
                vec![
                    dense(2 * dim, dim, Activation::Relu, dropout),
                    dense(dim, half, Activation::Relu, dropout),
                    dense(half, 1, Activation::Sigmoid, 0.0),
                ]
            }
        }
    }

    pub fn init(kind: HeadKind, operator: SiameseOperator, dim: usize, dropout: f64, rng: &mut Rng) -> Result<Self> {
        let mlp = Mlp::init(&PairHead::architecture(kind, dim, dropout), rng)?;
        PairHead::from_mlp(kind, operator, mlp)
    }

    /// Wraps an existing network, checking that its layout fits `kind`.
    pub fn from_mlp(kind: HeadKind, operator: SiameseOperator, mlp: Mlp) -> Result<Self> {
        let dim = match kind {
            HeadKind::Siamese => mlp.input_dim(),
            HeadKind::Relation => mlp.input_dim() / 2,
        };
        let expected = PairHead::architecture(kind, dim, 0.0);
        let matches = mlp.specs().len() == expected.len()
            && mlp.specs().iter().zip(&expected).all(|(a, b)| {
                (a.input, a.output, a.activation) == (b.input, b.output, b.activation)
            });
        if dim == 0 || !matches {
            return Err(Error::Invalid(format!("network layout does not match a {kind:?} head")));
        }
        Ok(PairHead { kind, operator, mlp, dim })
    }

    pub fn kind(&self) -> HeadKind {
        self.kind
    }

    pub fn operator(&self) -> SiameseOperator {
        self.operator
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn mlp_mut(&mut self) -> &mut Mlp {
        &mut self.mlp
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The operator `O(e_i, e_j)`.
    pub fn combine(&self, left: &[f64], right: &[f64]) -> Result<Vec<f64>> {
        for v in [left, right] {
            if v.len() != self.dim {
                return Err(Error::Dimension { expected: self.dim, got: v.len() });
            }
        }
        Ok(match (self.kind, self.operator) {
            (HeadKind::Siamese, SiameseOperator::SignedDifference) => {
                left.iter().zip(right).map(|(a, b)| a - b).collect()
            }
            (HeadKind::Siamese, SiameseOperator::AbsoluteDifference) => {
                left.iter().zip(right).map(|(a, b)| (a - b).abs()).collect()
            }
            (HeadKind::Relation, _) => left.iter().chain(right).copied().collect(),
        })
    }

    /// Eval-mode similarity score `s` of an ordered pair.
    pub fn score(&self, left: &EmbeddingVector, right: &EmbeddingVector) -> Result<f64> {
        let x = self.combine(left.as_slice(), right.as_slice())?;
        Ok(self.mlp.predict(&x)?[0])
    }
}

/// Similarity score of `(e_i, e_j)` under `head`.
pub fn score(head: &PairHead, e_i: &EmbeddingVector, e_j: &EmbeddingVector) -> Result<f64> {
    head.score(e_i, e_j)
}

/// Two samples of the same MWE, by index into their corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PairExample {
    pub left: usize,
    pub right: usize,
    pub same_class: bool,
}

/// Every unordered pair of distinct samples sharing an MWE, each once, with
/// the earlier sample on the left. Pairs are grouped by MWE in order of first
/// appearance.
pub fn build_pairs(corpus: &Corpus) -> Result<Vec<PairExample>> {
    let mut groups: Vec<Vec<(usize, Label)>> = Vec::new();
    let mut group_of: HashMap<&str, usize> = HashMap::new();
    for (i, s) in corpus.samples().iter().enumerate() {
        let label = s.require_label()?;
        let g = *group_of.entry(s.mwe.as_str()).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push((i, label));
    }
    let mut pairs = Vec::new();
    for members in &groups {
        for (a, &(left, left_label)) in members.iter().enumerate() {
            for &(right, right_label) in &members[a + 1..] {
                pairs.push(PairExample {
                    left,
                    right,
                    same_class: left_label == right_label,
                });
            }
        }
    }
    Ok(pairs)
}

/// Embeds every sample of `corpus` once.
pub(crate) fn embed_corpus(corpus: &Corpus, provider: &dyn EmbeddingProvider) -> Result<Vec<EmbeddingVector>> {
    corpus
        .samples()
        .iter()
        .map(|s| provider.embed(corpus.split(), s))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeadConfig {
    pub kind: HeadKind,
    /// Ignored by the Relation head.
    pub siamese_operator: SiameseOperator,
}

impl Default for HeadConfig {
    fn default() -> Self {
        HeadConfig { kind: HeadKind::Relation, siamese_operator: SiameseOperator::default() }
    }
}

/// Trains a pair head on `pairs` drawn from `corpus`.
///
/// Pairs are reshuffled every epoch. Siamese pairs additionally get a random
/// orientation each epoch; Relation pairs keep corpus order.
pub fn train_head(
    head: HeadConfig,
    corpus: &Corpus,
    pairs: &[PairExample],
    provider: &dyn EmbeddingProvider,
    config: &TrainConfig,
) -> Result<(PairHead, TrainingLog)> {
    if pairs.is_empty() {
        return Err(Error::Invalid("no training pairs: every MWE has a single sample".into()));
    }
    config.validate()?;
    let embeddings = embed_corpus(corpus, provider)?;
    let mut rng = Rng::new(config.seed);
    let mut model = PairHead::init(head.kind, head.siamese_operator, provider.dimension(), config.dropout, &mut rng)?;

    let inputs: Vec<(Vec<f64>, Vec<f64>, bool)> = pairs
        .iter()
        .map(|p| {
            let (l, r) = (&embeddings[p.left], &embeddings[p.right]);
            let forward = model.combine(l.as_slice(), r.as_slice())?;
            let backward = match head.kind {
                HeadKind::Siamese => model.combine(r.as_slice(), l.as_slice())?,
                HeadKind::Relation => Vec::new(),
            };
            Ok((forward, backward, p.same_class))
        })
        .collect::<Result<_>>()?;

    let kind = head.kind;
    let loss = kind.loss();
    let log = fit(&mut model.mlp, inputs.len(), loss, config, &mut rng, |i, rng| {
        let (forward, backward, same) = &inputs[i];
        let flip = kind == HeadKind::Siamese && rng.bernoulli(0.5);
        (if flip { backward.clone() } else { forward.clone() }, *same)
    })?;
    Ok((model, log))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WinningMode {
    Similar,
    Dissimilar,
}

/// Outcome of the max-of-similarity/dissimilarity rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPrediction {
    pub query_id: String,
    pub label: Label,
    pub score: f64,
    pub mode: WinningMode,
    pub support_id: String,
}

/// The winning candidate among `(s, support label)` scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Choice {
    pub support: usize,
    pub label: Label,
    pub score: f64,
    pub mode: WinningMode,
}

/// Picks the largest of `s_i` (→ `label_i`) and `1 - s_i` (→ opposite) over
/// all supports. Exact ties prefer similarity over dissimilarity, then the
/// earlier support. `None` for an empty slice.
pub fn choose(scored: &[(f64, Label)]) -> Option<Choice> {
    let mut best: Option<Choice> = None;
    for (support, &(s, label)) in scored.iter().enumerate() {
        let candidates = [
            Choice { support, label, score: s, mode: WinningMode::Similar },
            Choice { support, label: label.opposite(), score: 1.0 - s, mode: WinningMode::Dissimilar },
        ];
        for c in candidates {
            let better = match &best {
                None => true,
                Some(b) => {
                    c.score > b.score
                        || (c.score == b.score && c.mode == WinningMode::Similar && b.mode == WinningMode::Dissimilar)
                }
            };
            if better {
                best = Some(c);
            }
        }
    }
    best
}

/// Classifies `query` against its support set.
///
/// Support samples are looked up in the one-shot training split; the support
/// sample is always the left argument of the head.
pub fn predict_oneshot(
    query: &Sample,
    query_split: SplitKind,
    support: &[Sample],
    head: &PairHead,
    provider: &dyn EmbeddingProvider,
) -> Result<ScoredPrediction> {
    if support.is_empty() {
        return Err(Error::EmptySupport { mwe: query.mwe.clone() });
    }
    if let Some(s) = support.iter().find(|s| s.mwe != query.mwe) {
        return Err(Error::Contract(format!(
            "support `{}` has mwe `{}` but query `{}` has `{}`",
            s.id, s.mwe, query.id, query.mwe
        )));
    }
    let q = provider.embed(query_split, query)?;
    let scored = support
        .iter()
        .map(|s| {
            let label = s.label.ok_or_else(|| Error::Contract(format!("support `{}` is unlabeled", s.id)))?;
            let e = provider.embed(SplitKind::OneShotTrain, s)?;
            Ok((head.score(&e, &q)?, label))
        })
        .collect::<Result<Vec<_>>>()?;
    let choice = choose(&scored).expect("support is non-empty");
    Ok(ScoredPrediction {
        query_id: query.id.clone(),
        label: choice.label,
        score: choice.score,
        mode: choice.mode,
        support_id: support[choice.support].id.clone(),
    })
}

/// One prediction per query sample, in corpus order.
pub fn evaluate_oneshot(
    queries: &Corpus,
    index: &SupportIndex,
    head: &PairHead,
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<ScoredPrediction>> {
    let missing = index.missing_mwes(queries);
    if !missing.is_empty() {
        return Err(Error::MissingSupport { mwes: missing });
    }
    queries
        .samples()
        .iter()
        .map(|q| {
            let support = index.get(&q.mwe).unwrap_or_default();
            predict_oneshot(q, queries.split(), support, head, provider)
        })
        .collect()
}

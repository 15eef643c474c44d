//! Zero-shot baseline: a binary classifier head over sentence embeddings,
//! trained on MWEs disjoint from the evaluation MWEs, and hard majority
//! voting across several such classifiers.

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Label, Sample, SplitKind};
use crate::embedding::EmbeddingProvider;
use crate::error::{Error, Result};
use crate::fewshot::embed_corpus;
use crate::nn::{Activation, LayerSpec, Loss, Mlp, Rng};
use crate::train::{fit, TrainConfig, TrainingLog};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierConfig {
    /// Widths of the ReLU hidden layers. Empty means logistic regression.
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default)]
    pub train: TrainConfig,
}

fn default_hidden() -> Vec<usize> {
    vec![64]
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            hidden: default_hidden(),
            train: TrainConfig::default(),
        }
    }
}

/// An embedding → P(Idiomatic) network with a single sigmoid output.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    mlp: Mlp,
}

impl Classifier {
    pub fn architecture(dim: usize, hidden: &[usize], dropout: f64) -> Vec<LayerSpec> {
        let mut specs = Vec::with_capacity(hidden.len() + 1);
        let mut input = dim;
        for &width in hidden {
            specs.push(LayerSpec { input, output: width, activation: Activation::Relu, dropout });
            input = width;
        }
        specs.push(LayerSpec { input, output: 1, activation: Activation::Sigmoid, dropout: 0.0 });
        specs
    }

    pub fn from_mlp(mlp: Mlp) -> Result<Self> {
        let last = mlp.layers().last().expect("networks have a layer").spec;
        if last.output != 1 || last.activation != Activation::Sigmoid {
            return Err(Error::Invalid("classifier must end in a single sigmoid unit".into()));
        }
        Ok(Classifier { mlp })
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn probability(&self, embedding: &[f64]) -> Result<f64> {
        Ok(self.mlp.predict(embedding)?[0])
    }
}

/// Trains with binary cross-entropy, Idiomatic as the positive class.
pub fn train_classifier(
    train: &Corpus,
    provider: &dyn EmbeddingProvider,
    config: &ClassifierConfig,
) -> Result<(Classifier, TrainingLog)> {
    if train.is_empty() {
        return Err(Error::Invalid("cannot train a classifier on an empty corpus".into()));
    }
    if config.hidden.contains(&0) {
        return Err(Error::Config("hidden widths must be positive".into()));
    }
    config.train.validate()?;
    let labels = train
        .samples()
        .iter()
        .map(Sample::require_label)
        .collect::<Result<Vec<_>>>()?;
    let embeddings = embed_corpus(train, provider)?;

    let mut rng = Rng::new(config.train.seed);
    let specs = Classifier::architecture(provider.dimension(), &config.hidden, config.train.dropout);
    let mut mlp = Mlp::init(&specs, &mut rng)?;
    let log = fit(&mut mlp, embeddings.len(), Loss::Bce, &config.train, &mut rng, |i, _| {
        (embeddings[i].as_slice().to_vec(), labels[i] == Label::Idiomatic)
    })?;
    Ok((Classifier { mlp }, log))
}

/// `Idiomatic` iff `probability >= threshold`.
pub fn threshold_label(probability: f64, threshold: f64) -> Label {
    if probability >= threshold {
        Label::Idiomatic
    } else {
        Label::Literal
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroShotPrediction {
    pub label: Label,
    pub probability: f64,
}

pub fn predict_zeroshot(
    sample: &Sample,
    split: SplitKind,
    classifier: &Classifier,
    provider: &dyn EmbeddingProvider,
    threshold: f64,
) -> Result<ZeroShotPrediction> {
    let e = provider.embed(split, sample)?;
    let probability = classifier.probability(e.as_slice())?;
    Ok(ZeroShotPrediction {
        label: threshold_label(probability, threshold),
        probability,
    })
}

/// Ordered ensemble member ids; the count must be odd and at least 3.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub members: Vec<String>,
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        check_vote_count(self.members.len())
    }
}

fn check_vote_count(n: usize) -> Result<()> {
    if n < 3 || n % 2 == 0 {
        return Err(Error::Config(format!("majority vote needs an odd number ≥ 3 of voters, got {n}")));
    }
    Ok(())
}

/// Hard-label majority. Ties cannot occur since the count is odd.
pub fn majority_vote(votes: &[Label]) -> Result<Label> {
    check_vote_count(votes.len())?;
    let idiomatic = votes.iter().filter(|&&v| v == Label::Idiomatic).count();
    Ok(if 2 * idiomatic > votes.len() {
        Label::Idiomatic
    } else {
        Label::Literal
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{EmbeddingTable, TableMeta, TableProvider};
    use crate::nn::AdamWConfig;
    use crate::nn::Rng;
    use proptest::prelude::*;
    use Label::{Idiomatic as I, Literal as L};

    fn separable() -> (Corpus, TableProvider) {
        let mut rng = Rng::new(3);
        let mut table = EmbeddingTable::new(6, TableMeta::default()).unwrap();
        let mut samples = Vec::new();
        for k in 0..60 {
            let label = if k % 2 == 0 { I } else { L };
            let sign = if label == I { 1.0 } else { -1.0 };
            let v: Vec<f32> = (0..6).map(|d| (if d < 2 { 2.0 * sign } else { 0.0 } + 0.5 * rng.normal()) as f32).collect();
            let id = format!("z{k}");
            table.insert(SplitKind::ZeroShotTrain, id.clone(), v).unwrap();
            samples.push(Sample {
                id,
                language: "EN".into(),
                mwe: format!("m{}", k % 7),
                prev_ctx: String::new(),
                target: "t".into(),
                next_ctx: String::new(),
                label: Some(label),
            });
        }
        (Corpus::new(SplitKind::ZeroShotTrain, samples).unwrap(), TableProvider::new(table))
    }

    fn fast_config(epochs: usize, seed: u64) -> ClassifierConfig {
        ClassifierConfig {
            hidden: vec![8],
            train: TrainConfig {
                epochs,
                batch_size: 8,
                seed,
                optimizer: AdamWConfig { learning_rate: 1e-2, ..Default::default() },
                ..Default::default()
            },
        }
    }

    #[test]
    fn learns_separable_embeddings() {
        let (c, p) = separable();
        let (clf, log) = train_classifier(&c, &p, &fast_config(50, 1)).unwrap();
        assert_eq!(log.epoch_loss.len(), 50);
        let correct = c
            .samples()
            .iter()
            .filter(|s| predict_zeroshot(s, c.split(), &clf, &p, DEFAULT_THRESHOLD).unwrap().label == s.label.unwrap())
            .count();
        assert!(correct as f64 / c.len() as f64 >= 0.99, "{correct}");
    }

    #[test]
    fn zero_epochs_and_determinism() {
        let (c, p) = separable();
        let (untrained, _) = train_classifier(&c, &p, &fast_config(0, 7)).unwrap();
        let init = Mlp::init(&Classifier::architecture(6, &[8], 0.5), &mut Rng::new(7)).unwrap();
        assert_eq!(untrained.mlp(), &init);
        let (a, _) = train_classifier(&c, &p, &fast_config(5, 7)).unwrap();
        let (b, _) = train_classifier(&c, &p, &fast_config(5, 7)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_corpus_rejected() {
        let (_, p) = separable();
        let empty = Corpus::new(SplitKind::ZeroShotTrain, vec![]).unwrap();
        assert!(train_classifier(&empty, &p, &fast_config(1, 0)).is_err());
    }

    #[test]
    fn threshold_boundary() {
        assert_eq!(threshold_label(0.5, 0.5), I);
        assert_eq!(threshold_label(0.49, 0.5), L);
    }

    #[test]
    fn probability_matches_forward_oracle() {
        let mut rng = Rng::new(12);
        let clf = Classifier::from_mlp(Mlp::init(&Classifier::architecture(3, &[4], 0.5), &mut rng).unwrap()).unwrap();
        let x = [0.2, -0.7, 1.1];
        let [hidden, out] = clf.mlp().layers() else { panic!() };
        let h: Vec<f64> = (0..4)
            .map(|o| (hidden.bias[o] + (0..3).map(|i| hidden.weight[o * 3 + i] * x[i]).sum::<f64>()).max(0.0))
            .collect();
        let z = out.bias[0] + (0..4).map(|i| out.weight[i] * h[i]).sum::<f64>();
        let oracle = 1.0 / (1.0 + (-z).exp());
        assert!((clf.probability(&x).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn classifier_needs_sigmoid_unit() {
        let specs = [LayerSpec { input: 2, output: 2, activation: Activation::Sigmoid, dropout: 0.0 }];
        assert!(Classifier::from_mlp(Mlp::zeros(&specs).unwrap()).is_err());
    }

    #[test]
    fn majority_examples() {
        assert_eq!(majority_vote(&[I, I, L]).unwrap(), I);
        assert_eq!(majority_vote(&[L, L, L]).unwrap(), L);
        assert!(majority_vote(&[I, L]).is_err());
        assert!(majority_vote(&[I, L, I, L]).is_err());
        assert!(majority_vote(&[I]).is_err());
        assert!(EnsembleConfig { members: vec!["a".into(), "b".into()] }.validate().is_err());
        assert!(EnsembleConfig { members: vec!["a".into(), "b".into(), "c".into()] }.validate().is_ok());
    }

    fn arb_votes() -> impl Strategy<Value = Vec<Label>> {
        prop::sample::select(vec![3usize, 5, 7, 9])
            .prop_flat_map(|n| prop::collection::vec(prop::sample::select(vec![I, L]), n))
    }

    proptest! {
        #[test]
        fn majority_matches_counting_oracle(votes in arb_votes()) {
            let (mut i, mut l) = (0, 0);
            for v in &votes {
                match v { I => i += 1, L => l += 1 }
            }
            let oracle = if i > l { I } else { L };
            prop_assert_eq!(majority_vote(&votes).unwrap(), oracle);
        }

        #[test]
        fn majority_is_permutation_invariant(votes in arb_votes(), seed: u64) {
            let mut shuffled = votes.clone();
            Rng::new(seed).shuffle(&mut shuffled);
            prop_assert_eq!(majority_vote(&votes).unwrap(), majority_vote(&shuffled).unwrap());
        }

        #[test]
        fn unanimous_vote_wins(label in prop::sample::select(vec![I, L]), n in prop::sample::select(vec![3usize, 5, 7])) {
            prop_assert_eq!(majority_vote(&vec![label; n]).unwrap(), label);
        }

        #[test]
        fn raising_threshold_never_makes_idiomatic(p in 0.0f64..=1.0, t1 in 0.0f64..=1.0, t2 in 0.0f64..=1.0) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            if threshold_label(p, lo) == L {
                prop_assert_eq!(threshold_label(p, hi), L);
            }
        }
    }
}

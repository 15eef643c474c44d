//! Synthetic corpora with Gaussian sense clusters, for tests and demos.
//!
//! Every MWE `m` has a base point `c_m` and a polarity `p_m ∈ {+1, −1}`. Its
//! idiomatic and literal clusters are centered at `c_m ± p_m·(δσ/2)·u`, where
//! `u` is a unit vector spread evenly over the first `idiom_axes` dimensions
//! and `δ` is the separation in units of the noise scale `σ`. Base points are
//! zero on those axes.
//!
//! Because the sign of `u` flips between MWEs, a classifier that never sees
//! an MWE can only guess its polarity from the majority. `polarity_bias`
//! controls that majority: 1.0 makes every MWE agree, 0.5 makes the zero-shot
//! signal vanish. Pair heads only need to tell whether two samples sit on
//! the same side, which does not depend on polarity.

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Label, Sample, SplitKind};
use crate::embedding::{EmbeddingTable, TableMeta};
use crate::error::{Error, Result};
use crate::nn::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    /// MWEs in the one-shot train and query splits.
    pub mwes: usize,
    /// Disjoint MWEs for the zero-shot train split.
    pub zero_shot_mwes: usize,
    pub dimension: usize,
    pub idiom_axes: usize,
    /// Distance between the two cluster centers, in units of `sigma`.
    pub separation: f64,
    pub sigma: f64,
    /// Standard deviation of base points off the idiom axes.
    pub base_scale: f64,
    /// Probability that an MWE has positive polarity.
    pub polarity_bias: f64,
    pub one_shot_per_class: usize,
    pub query_per_class: usize,
    pub zero_shot_per_class: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            mwes: 20,
            zero_shot_mwes: 20,
            dimension: 256,
            idiom_axes: 8,
            separation: 6.0,
            sigma: 1.0,
            base_scale: 2.0,
            polarity_bias: 0.75,
            one_shot_per_class: 5,
            query_per_class: 5,
            zero_shot_per_class: 10,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mwes == 0 || self.dimension == 0 {
            return Err(Error::Config("mwes and dimension must be positive".into()));
        }
        if self.idiom_axes == 0 || self.idiom_axes > self.dimension {
            return Err(Error::Config(format!("idiom_axes must lie in 1..={}", self.dimension)));
        }
        if !(self.sigma > 0.0) || !(self.separation >= 0.0) || !(self.base_scale >= 0.0) {
            return Err(Error::Config("sigma must be positive, separation and base_scale non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.polarity_bias) {
            return Err(Error::Config("polarity_bias must lie in [0, 1]".into()));
        }
        if self.one_shot_per_class == 0 || self.query_per_class == 0 {
            return Err(Error::Config("one-shot and query splits need samples of both classes".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub zero_shot_train: Corpus,
    pub one_shot_train: Corpus,
    /// Held-out queries for the one-shot MWEs, as the dev split.
    pub queries: Corpus,
    pub table: EmbeddingTable,
    /// Polarity of each one-shot MWE, in order.
    pub polarities: Vec<bool>,
}

struct Mwe {
    name: String,
    language: &'static str,
    base: Vec<f64>,
    positive: bool,
}

impl Mwe {
    fn draw(name: String, language: &'static str, config: &SynthConfig, rng: &mut Rng) -> Self {
        let base = (0..config.dimension)
            .map(|d| if d < config.idiom_axes { 0.0 } else { config.base_scale * rng.normal() })
            .collect();
        Mwe { name, language, base, positive: rng.bernoulli(config.polarity_bias) }
    }

    fn point(&self, label: Label, config: &SynthConfig, rng: &mut Rng) -> Vec<f32> {
        let side = if (label == Label::Idiomatic) == self.positive { 1.0 } else { -1.0 };
        let shift = side * config.separation * config.sigma / 2.0 / (config.idiom_axes as f64).sqrt();
        self.base
            .iter()
            .enumerate()
            .map(|(d, b)| {
                let center = if d < config.idiom_axes { shift } else { *b };
                (center + config.sigma * rng.normal()) as f32
            })
            .collect()
    }
}

fn emit(
    mwes: &[Mwe],
    per_class: usize,
    split: SplitKind,
    config: &SynthConfig,
    table: &mut EmbeddingTable,
    rng: &mut Rng,
) -> Result<Corpus> {
    let mut samples = Vec::new();
    for mwe in mwes {
        for k in 0..2 * per_class {
            let label = if k % 2 == 0 { Label::Idiomatic } else { Label::Literal };
            let id = format!("{}-{}-{k}", split.as_str(), mwe.name);
            table.insert(split, id.clone(), mwe.point(label, config, rng))?;
            samples.push(Sample {
                target: format!("{} sample {k}", mwe.name),
                id,
                language: mwe.language.into(),
                mwe: mwe.name.clone(),
                prev_ctx: String::new(),
                next_ctx: String::new(),
                label: Some(label),
            });
        }
    }
    Corpus::new(split, samples)
}

/// Draws all splits and their embedding table from `config.seed`.
pub fn generate(config: &SynthConfig) -> Result<SynthCorpus> {
    config.validate()?;
    let mut rng = Rng::new(config.seed);
    let language = |i: usize| if i % 2 == 0 { "EN" } else { "PT" };
    let one_shot: Vec<Mwe> = (0..config.mwes)
        .map(|i| Mwe::draw(format!("mwe{i:02}"), language(i), config, &mut rng))
        .collect();
    let zero_shot: Vec<Mwe> = (0..config.zero_shot_mwes)
        .map(|i| Mwe::draw(format!("zs{i:02}"), language(i), config, &mut rng))
        .collect();

    let meta = TableMeta {
        source_model: "synthetic".into(),
        pooling: "none".into(),
        context_mode: "target-only".into(),
        extra: [("generator".to_string(), serde_json::to_value(config).expect("config serializes"))]
            .into_iter()
            .collect(),
    };
    let mut table = EmbeddingTable::new(config.dimension, meta)?;
    let zero_shot_train =
        emit(&zero_shot, config.zero_shot_per_class, SplitKind::ZeroShotTrain, config, &mut table, &mut rng)?;
    let one_shot_train =
        emit(&one_shot, config.one_shot_per_class, SplitKind::OneShotTrain, config, &mut table, &mut rng)?;
    let queries = emit(&one_shot, config.query_per_class, SplitKind::Dev, config, &mut table, &mut rng)?;
    Ok(SynthCorpus {
        zero_shot_train,
        one_shot_train,
        queries,
        table,
        polarities: one_shot.iter().map(|m| m.positive).collect(),
    })
}

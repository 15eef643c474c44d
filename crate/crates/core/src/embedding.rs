//! Sentence embedding providers.
//!
//! A provider maps a sample to a fixed-dimension vector. Two are built in:
//!
//! * [`TableProvider`] serves precomputed vectors from an [`EmbeddingTable`]
//!   file, typically exported from a pretrained multilingual encoder.
//! * [`HashedNgramEncoder`] hashes character n-grams into signed buckets. It
//!   needs no model files and is used for tests and offline runs.
//!
//! # Table file format
//!
//! ```text
//! #dim<TAB>d
//! #meta<TAB>{"source_model":...,"pooling":...,"context_mode":...}
//! split<TAB>id<TAB>v1<TAB>...<TAB>vd
//! ```
//!
//! Values are 32-bit floats printed in their shortest round-trip decimal form,
//! so loading and re-writing a table reproduces it byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::hash::Hasher;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::corpus::{Sample, SplitKind};
use crate::error::{Error, Result};

/// A finite embedding vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: format!("embedding component {i}"),
            });
        }
        Ok(EmbeddingVector(values))
    }

    pub fn zeros(dim: usize) -> Self {
        EmbeddingVector(vec![0.0; dim])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Which sample text fields feed the encoder.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContextMode {
    #[default]
    TargetOnly,
    /// Previous sentence, target, next sentence joined by single spaces.
    WithContext,
}

impl ContextMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ContextMode::TargetOnly => "target-only",
            ContextMode::WithContext => "with-context",
        }
    }
}

pub fn sample_text(sample: &Sample, mode: ContextMode) -> String {
    match mode {
        ContextMode::TargetOnly => sample.target.clone(),
        ContextMode::WithContext => [&sample.prev_ctx, &sample.target, &sample.next_ctx]
            .into_iter()
            .filter(|s| !s.is_empty())
            .map(String::as_str)
            .collect::<Vec<_>>()
            .join(" "),
    }
}

/// Source of sentence embeddings.
pub trait EmbeddingProvider: Send + Sync {
    fn dimension(&self) -> usize;

    /// Embedding of `sample`, drawn from the corpus split `split`.
    fn embed(&self, split: SplitKind, sample: &Sample) -> Result<EmbeddingVector>;
}

/// Descriptive metadata stored on the second line of a table file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TableMeta {
    #[serde(default)]
    pub source_model: String,
    #[serde(default)]
    pub pooling: String,
    #[serde(default)]
    pub context_mode: String,
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

/// Precomputed embeddings keyed by (split, sample id).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dimension: usize,
    meta: TableMeta,
    entries: IndexMap<(SplitKind, String), Vec<f32>>,
}

impl EmbeddingTable {
    pub fn new(dimension: usize, meta: TableMeta) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::Invalid("embedding dimension must be positive".into()));
        }
        Ok(EmbeddingTable {
            dimension,
            meta,
            entries: IndexMap::new(),
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn meta(&self) -> &TableMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, split: SplitKind, id: impl Into<String>, values: Vec<f32>) -> Result<()> {
        let id = id.into();
        if values.len() != self.dimension {
            return Err(Error::Dimension {
                expected: self.dimension,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: format!("embedding ({split}, {id})"),
            });
        }
        match self.entries.entry((split, id)) {
            indexmap::map::Entry::Occupied(e) => Err(Error::Invalid(format!(
                "duplicate embedding key ({}, {})",
                e.key().0,
                e.key().1
            ))),
            indexmap::map::Entry::Vacant(e) => {
                e.insert(values);
                Ok(())
            }
        }
    }

    pub fn get(&self, split: SplitKind, id: &str) -> Option<&[f32]> {
        // IndexMap lookups need an owned key; tables are small enough.
        self.entries.get(&(split, id.to_string())).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (SplitKind, &str, &[f32])> {
        self.entries.iter().map(|((s, id), v)| (*s, id.as_str(), v.as_slice()))
    }

    /// Appends all rows of `other`. Dimensions must agree and keys must not collide.
    pub fn merge(&mut self, other: EmbeddingTable) -> Result<()> {
        if other.dimension != self.dimension {
            return Err(Error::Dimension {
                expected: self.dimension,
                got: other.dimension,
            });
        }
        for ((split, id), v) in other.entries {
            self.insert(split, id, v)?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let meta = serde_json::to_string(&self.meta).expect("metadata is plain json");
        let mut out = format!("#dim\t{}\n#meta\t{meta}\n", self.dimension);
        for ((split, id), values) in &self.entries {
            out.push_str(split.as_str());
            out.push('\t');
            out.push_str(id);
            for v in values {
                write!(out, "\t{v:?}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

pub fn parse_table(text: &str) -> Result<EmbeddingTable> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let format_err = |line: usize, message: String| Error::Format { line, message };

    let (_, dim_line) = lines.next().ok_or_else(|| format_err(1, "empty table file".into()))?;
    let dimension: usize = dim_line
        .strip_prefix("#dim\t")
        .and_then(|d| d.trim().parse().ok())
        .filter(|&d| d > 0)
        .ok_or_else(|| format_err(1, "expected `#dim<TAB>d` with d > 0".into()))?;

    let (_, meta_line) = lines.next().ok_or_else(|| format_err(2, "missing #meta line".into()))?;
    let meta: TableMeta = meta_line
        .strip_prefix("#meta\t")
        .ok_or_else(|| format_err(2, "expected `#meta<TAB>json`".into()))
        .and_then(|j| serde_json::from_str(j).map_err(|e| format_err(2, format!("bad metadata: {e}"))))?;

    let mut table = EmbeddingTable::new(dimension, meta)?;
    for (line, row) in lines {
        if row.is_empty() {
            continue;
        }
        let mut fields = row.split('\t');
        let split: SplitKind = fields
            .next()
            .unwrap_or_default()
            .parse()
            .map_err(|e: Error| format_err(line, e.to_string()))?;
        let id = fields
            .next()
            .filter(|id| !id.is_empty())
            .ok_or_else(|| format_err(line, "missing sample id".into()))?;
        let values = fields
            .map(|f| match f.parse::<f32>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(format_err(line, format!("row `{id}`: bad value `{f}`"))),
            })
            .collect::<Result<Vec<f32>>>()?;
        if values.len() != dimension {
            return Err(format_err(
                line,
                format!("row `{id}`: expected {dimension} values, found {}", values.len()),
            ));
        }
        if table.get(split, id).is_some() {
            return Err(format_err(line, format!("duplicate key ({split}, {id})")));
        }
        table.insert(split, id, values)?;
    }
    Ok(table)
}

pub fn load_table(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_table(&text)
}

/// Serves vectors from a table, widened to 64-bit.
#[derive(Debug, Clone)]
pub struct TableProvider {
    table: EmbeddingTable,
}

impl TableProvider {
    pub fn new(table: EmbeddingTable) -> Self {
        TableProvider { table }
    }

    pub fn table(&self) -> &EmbeddingTable {
        &self.table
    }
}

impl EmbeddingProvider for TableProvider {
    fn dimension(&self) -> usize {
        self.table.dimension()
    }

    fn embed(&self, split: SplitKind, sample: &Sample) -> Result<EmbeddingVector> {
        let values = self
            .table
            .get(split, &sample.id)
            .ok_or_else(|| Error::MissingEmbedding {
                split,
                id: sample.id.clone(),
            })?;
        Ok(EmbeddingVector(values.iter().map(|&v| f64::from(v)).collect()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HashedNgramConfig {
    pub dimension: usize,
    pub ngram_sizes: Vec<usize>,
    pub seed: u64,
    pub normalize: bool,
}

impl Default for HashedNgramConfig {
    fn default() -> Self {
        HashedNgramConfig {
            dimension: 256,
            ngram_sizes: vec![3, 4],
            seed: 0,
            normalize: true,
        }
    }
}

impl HashedNgramConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::Config("hashed encoder dimension must be ≥ 1".into()));
        }
        if self.ngram_sizes.is_empty() || self.ngram_sizes.contains(&0) {
            return Err(Error::Config("n-gram sizes must be non-empty and ≥ 1".into()));
        }
        Ok(())
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;

/// Stable seeded 64-bit hash of an n-gram.
///
/// FNV-1a over the UTF-8 bytes, with the seed XORed into the offset basis,
/// followed by the SplitMix64 finalizer so that every output bit depends on
/// the whole input. Identical on every platform and toolchain.
pub fn ngram_hash(ngram: &str, seed: u64) -> u64 {
    let mut hasher = fnv::FnvHasher::with_key(FNV_OFFSET ^ seed);
    hasher.write(ngram.as_bytes());
    let mut z = hasher.finish();
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashes the character n-grams of `text` into signed buckets.
///
/// Each n-gram adds `+1` or `-1` (bit 63 of its hash set means `-1`) to
/// bucket `hash % dimension`. With `normalize` on, a non-zero result is
/// scaled to unit Euclidean norm.
pub fn hashed_ngram_encode(text: &str, config: &HashedNgramConfig) -> EmbeddingVector {
    let mut values = vec![0.0; config.dimension];
    let chars: Vec<char> = text.chars().collect();
    let mut gram = String::new();
    for &n in &config.ngram_sizes {
        for window in chars.windows(n) {
            gram.clear();
            gram.extend(window);
            let h = ngram_hash(&gram, config.seed);
            let bucket = (h % config.dimension as u64) as usize;
            values[bucket] += if h >> 63 == 1 { -1.0 } else { 1.0 };
        }
    }
    if config.normalize {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            values.iter_mut().for_each(|v| *v /= norm);
        }
    }
    EmbeddingVector(values)
}

#[derive(Debug, Clone)]
pub struct HashedNgramEncoder {
    config: HashedNgramConfig,
    context: ContextMode,
}

impl HashedNgramEncoder {
    pub fn new(config: HashedNgramConfig, context: ContextMode) -> Result<Self> {
        config.validate()?;
        Ok(HashedNgramEncoder { config, context })
    }

    pub fn config(&self) -> &HashedNgramConfig {
        &self.config
    }

    pub fn encode(&self, text: &str) -> EmbeddingVector {
        hashed_ngram_encode(text, &self.config)
    }
}

impl EmbeddingProvider for HashedNgramEncoder {
    fn dimension(&self) -> usize {
        self.config.dimension
    }

    fn embed(&self, _split: SplitKind, sample: &Sample) -> Result<EmbeddingVector> {
        Ok(self.encode(&sample_text(sample, self.context)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(id: &str, target: &str) -> Sample {
        Sample {
            id: id.into(),
            language: "EN".into(),
            mwe: "m".into(),
            prev_ctx: "Before.".into(),
            target: target.into(),
            next_ctx: "After.".into(),
            label: None,
        }
    }

    #[test]
    fn small_table_parses() {
        let text = "#dim\t4\n#meta\t{\"source_model\":\"x\",\"pooling\":\"mean\",\"context_mode\":\"target-only\"}\n\
                    dev\ta\t1.0\t2.0\t3.0\t4.0\ndev\tb\t0.5\t-0.25\t0.0\t1e-7\n";
        let table = parse_table(text).unwrap();
        assert_eq!(table.len(), 2);
        assert_eq!(table.get(SplitKind::Dev, "b").unwrap(), &[0.5, -0.25, 0.0, 1e-7]);
        assert_eq!(table.meta().pooling, "mean");
        assert_eq!(table.to_text(), text);
    }

    #[test]
    fn short_row_names_row() {
        let text = "#dim\t4\n#meta\t{}\ndev\ta\t1.0\t2.0\t3.0\n";
        match parse_table(text) {
            Err(Error::Format { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("`a`"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_key_rejected() {
        let text = "#dim\t1\n#meta\t{}\ndev\ta\t1.0\ndev\ta\t2.0\n";
        assert!(matches!(parse_table(text), Err(Error::Format { line: 4, .. })));
        // same id in another split is a different key
        let text = "#dim\t1\n#meta\t{}\ndev\ta\t1.0\ntest\ta\t2.0\n";
        assert_eq!(parse_table(text).unwrap().len(), 2);
    }

    #[test]
    fn bad_header_rejected() {
        assert!(parse_table("").is_err());
        assert!(parse_table("#dim\t0\n#meta\t{}\n").is_err());
        assert!(parse_table("#dim\t3\n").is_err());
        assert!(parse_table("#dim\t1\n#meta\t{}\ndev\ta\tNaN\n").is_err());
    }

    #[test]
    fn unknown_meta_keys_survive() {
        let text = "#dim\t1\n#meta\t{\"source_model\":\"m\",\"pooling\":\"\",\"context_mode\":\"\",\"max_len\":128}\n";
        let table = parse_table(text).unwrap();
        assert_eq!(table.meta().extra["max_len"], 128);
        assert_eq!(table.to_text(), text);
    }

    #[test]
    fn table_provider_lookup() {
        let mut table = EmbeddingTable::new(2, TableMeta::default()).unwrap();
        table.insert(SplitKind::Dev, "a", vec![0.1, -2.0]).unwrap();
        let provider = TableProvider::new(table);
        let v = provider.embed(SplitKind::Dev, &sample("a", "t")).unwrap();
        assert_eq!(v.as_slice(), &[f64::from(0.1f32), -2.0]);
        match provider.embed(SplitKind::Test, &sample("a", "t")) {
            Err(Error::MissingEmbedding { split, id }) => {
                assert_eq!((split, id.as_str()), (SplitKind::Test, "a"))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_text_is_zero_vector() {
        for normalize in [false, true] {
            let config = HashedNgramConfig { normalize, ..Default::default() };
            let v = hashed_ngram_encode("", &config);
            assert!(v.as_slice().iter().all(|&x| x == 0.0));
            assert_eq!(v.len(), 256);
        }
        // shorter than every n-gram size
        let v = hashed_ngram_encode("ab", &HashedNgramConfig::default());
        assert_eq!(v.norm(), 0.0);
    }

    /// Independent enumeration: collect every n-gram by byte-free substring
    /// slicing on char boundaries, then bucket them.
    fn oracle_encode(text: &str, config: &HashedNgramConfig) -> Vec<f64> {
        let boundaries: Vec<usize> = text
            .char_indices()
            .map(|(i, _)| i)
            .chain(std::iter::once(text.len()))
            .collect();
        let mut counts = vec![0i64; config.dimension];
        for &n in &config.ngram_sizes {
            for start in 0..boundaries.len() {
                let Some(&end) = boundaries.get(start + n) else { break };
                let h = ngram_hash(&text[boundaries[start]..end], config.seed);
                let sign = if h & (1 << 63) != 0 { -1 } else { 1 };
                counts[(h % config.dimension as u64) as usize] += sign;
            }
        }
        let norm = (counts.iter().map(|c| c * c).sum::<i64>() as f64).sqrt();
        counts
            .iter()
            .map(|&c| if config.normalize && norm > 0.0 { c as f64 / norm } else { c as f64 })
            .collect()
    }

    #[test]
    fn encoder_matches_enumeration_oracle() {
        let config = HashedNgramConfig { dimension: 32, ngram_sizes: vec![2, 3, 5], seed: 7, normalize: false };
        for text in ["He spilled the beans.", "pão duro", "kick the bucket", "a"] {
            assert_eq!(hashed_ngram_encode(text, &config).as_slice(), oracle_encode(text, &config).as_slice());
        }
        let config = HashedNgramConfig::default();
        let got = hashed_ngram_encode("It was raining cats and dogs.", &config);
        let want = oracle_encode("It was raining cats and dogs.", &config);
        for (g, w) in got.as_slice().iter().zip(&want) {
            assert!((g - w).abs() < 1e-15);
        }
    }

    #[test]
    fn hash_is_stable() {
        fn finalize(mut z: u64) -> u64 {
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
            z ^ (z >> 31)
        }
        // Published FNV-1a 64 test vectors for "", "a" and "foobar".
        assert_eq!(ngram_hash("", 0), finalize(0xcbf2_9ce4_8422_2325));
        assert_eq!(ngram_hash("a", 0), finalize(0xaf63_dc4c_8601_ec8c));
        assert_eq!(ngram_hash("foobar", 0), finalize(0x8594_4171_f739_67e8));
        assert_ne!(ngram_hash("abc", 0), ngram_hash("abc", 1));
        assert_ne!(ngram_hash("abc", 0), ngram_hash("abd", 0));
    }

    #[test]
    fn hashed_provider_ignores_id_and_language() {
        let enc = HashedNgramEncoder::new(HashedNgramConfig::default(), ContextMode::TargetOnly).unwrap();
        let a = sample("a", "He let the cat out of the bag.");
        let mut b = a.clone();
        b.id = "zz".into();
        b.language = "PT".into();
        assert_eq!(enc.embed(SplitKind::Dev, &a).unwrap(), enc.embed(SplitKind::Test, &b).unwrap());
        assert_eq!(enc.embed(SplitKind::Dev, &a).unwrap(), enc.embed(SplitKind::Dev, &a).unwrap());
    }

    #[test]
    fn context_mode_joins_with_single_spaces() {
        let s = sample("a", "Target.");
        assert_eq!(sample_text(&s, ContextMode::TargetOnly), "Target.");
        assert_eq!(sample_text(&s, ContextMode::WithContext), "Before. Target. After.");
        let mut bare = s.clone();
        bare.prev_ctx.clear();
        assert_eq!(sample_text(&bare, ContextMode::WithContext), "Target. After.");
    }

    #[test]
    fn invalid_config_rejected() {
        let bad = HashedNgramConfig { ngram_sizes: vec![], ..Default::default() };
        assert!(HashedNgramEncoder::new(bad, ContextMode::TargetOnly).is_err());
        let bad = HashedNgramConfig { dimension: 0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    fn arb_table() -> impl Strategy<Value = EmbeddingTable> {
        (1usize..6).prop_flat_map(|dim| {
            prop::collection::vec(
                (
                    prop::sample::select(SplitKind::ALL.to_vec()),
                    prop::collection::vec(
                        any::<u32>().prop_map(f32::from_bits).prop_filter("finite", |v| v.is_finite()),
                        dim,
                    ),
                ),
                0..10,
            )
            .prop_map(move |rows| {
                let meta = TableMeta { source_model: "random".into(), ..Default::default() };
                let mut table = EmbeddingTable::new(dim, meta).unwrap();
                for (i, (split, v)) in rows.into_iter().enumerate() {
                    table.insert(split, format!("s{i}"), v).unwrap();
                }
                table
            })
        })
    }

    proptest! {
        #[test]
        fn table_text_round_trip_is_exact(table in arb_table()) {
            let text = table.to_text();
            let back = parse_table(&text).unwrap();
            prop_assert_eq!(back.to_text(), text);
            for (split, id, v) in table.iter() {
                let got = back.get(split, id).unwrap();
                prop_assert!(got.iter().zip(v).all(|(a, b)| a.to_bits() == b.to_bits()));
            }
        }

        #[test]
        fn normalized_encoding_has_unit_norm(text in "\\PC{1,40}") {
            let v = hashed_ngram_encode(&text, &HashedNgramConfig { ngram_sizes: vec![1, 3], ..Default::default() });
            prop_assert!((v.norm() - 1.0).abs() < 1e-9);
        }
    }
}

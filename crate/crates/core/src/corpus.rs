//! MWE corpus loading, split statistics and split validation.
//!
//! Corpora are UTF-8 tab-separated files with one header row. Column names
//! are not fixed; a [`ColumnSchema`] maps header names to sample fields and
//! raw label strings to [`Label`] values, so label polarity is always explicit.
//!
//! All text fields are trimmed of leading and trailing whitespace on load.
//! Nothing else is normalized.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gold label of a sample: whether the MWE is used idiomatically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Idiomatic,
    Literal,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Idiomatic, Label::Literal];

    pub fn opposite(self) -> Label {
        match self {
            Label::Idiomatic => Label::Literal,
            Label::Literal => Label::Idiomatic,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Idiomatic => "Idiomatic",
            Label::Literal => "Literal",
        }
    }

    /// Binary target used by the classifier heads: Idiomatic is 1.
    pub fn target(self) -> f64 {
        match self {
            Label::Idiomatic => 1.0,
            Label::Literal => 0.0,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "idiomatic" => Ok(Label::Idiomatic),
            "literal" => Ok(Label::Literal),
            _ => Err(Error::Invalid(format!("unknown label `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitKind {
    ZeroShotTrain,
    OneShotTrain,
    Dev,
    Test,
}

impl SplitKind {
    pub const ALL: [SplitKind; 4] = [
        SplitKind::ZeroShotTrain,
        SplitKind::OneShotTrain,
        SplitKind::Dev,
        SplitKind::Test,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitKind::ZeroShotTrain => "zero_shot_train",
            SplitKind::OneShotTrain => "one_shot_train",
            SplitKind::Dev => "dev",
            SplitKind::Test => "test",
        }
    }
}

impl fmt::Display for SplitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SplitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let normalized = s.replace('-', "_");
        SplitKind::ALL
            .into_iter()
            .find(|k| k.as_str() == normalized)
            .ok_or_else(|| Error::Invalid(format!("unknown split `{s}`")))
    }
}

/// One corpus row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub language: String,
    pub mwe: String,
    pub prev_ctx: String,
    pub target: String,
    pub next_ctx: String,
    pub label: Option<Label>,
}

impl Sample {
    /// Label, or [`Error::Unlabeled`] for samples that must carry one.
    pub fn require_label(&self) -> Result<Label> {
        self.label.ok_or_else(|| Error::Unlabeled {
            id: self.id.clone(),
        })
    }
}

/// Maps header names to sample fields, and raw label strings to labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ColumnSchema {
    pub id: String,
    pub language: String,
    pub mwe: String,
    pub prev: String,
    pub target: String,
    pub next: String,
    /// Label column. May be absent from the header of test files only.
    pub label: String,
    pub label_map: BTreeMap<String, Label>,
}

impl Default for ColumnSchema {
    /// Column names of the SemEval-2022 Task 2 subtask A release, where
    /// `0` marks idiomatic usage and `1` marks literal usage.
    fn default() -> Self {
        ColumnSchema {
            id: "ID".into(),
            language: "Language".into(),
            mwe: "MWE".into(),
            prev: "Previous".into(),
            target: "Target".into(),
            next: "Next".into(),
            label: "Label".into(),
            label_map: BTreeMap::from([
                ("0".to_string(), Label::Idiomatic),
                ("1".to_string(), Label::Literal),
            ]),
        }
    }
}

impl ColumnSchema {
    /// Raw string written for `label`: the smallest raw key mapping to it.
    fn raw_label(&self, label: Label) -> Result<&str> {
        self.label_map
            .iter()
            .find(|(_, l)| **l == label)
            .map(|(raw, _)| raw.as_str())
            .ok_or_else(|| Error::Config(format!("label map has no entry for {label}")))
    }
}

/// An ordered, id-unique collection of samples from one split.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    split: SplitKind,
    samples: Vec<Sample>,
    by_id: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(split: SplitKind, samples: Vec<Sample>) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(samples.len());
        for (i, s) in samples.iter().enumerate() {
            if by_id.insert(s.id.clone(), i).is_some() {
                return Err(Error::DuplicateId {
                    id: s.id.clone(),
                    line: i + 2,
                });
            }
        }
        Ok(Corpus {
            split,
            samples,
            by_id,
        })
    }

    pub fn split(&self) -> SplitKind {
        self.split
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Sample> {
        self.by_id.get(id).map(|&i| &self.samples[i])
    }

    /// Distinct MWE strings.
    pub fn mwes(&self) -> BTreeSet<&str> {
        self.samples.iter().map(|s| s.mwe.as_str()).collect()
    }
}

pub fn load_corpus(path: impl AsRef<Path>, schema: &ColumnSchema, split: SplitKind) -> Result<Corpus> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&text, schema, split)
}

struct ColumnIndex {
    id: usize,
    language: usize,
    mwe: usize,
    prev: usize,
    target: usize,
    next: usize,
    label: Option<usize>,
}

pub fn parse_corpus(text: &str, schema: &ColumnSchema, split: SplitKind) -> Result<Corpus> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut lines = text.lines().enumerate();
    let header: Vec<&str> = match lines.next() {
        Some((_, h)) => h.split('\t').map(str::trim).collect(),
        None => return Err(Error::Data { line: 1, message: "missing header row".into() }),
    };
    let find = |name: &str| {
        header.iter().position(|h| *h == name).ok_or_else(|| Error::MissingColumn {
            column: name.to_string(),
        })
    };
    let cols = ColumnIndex {
        id: find(&schema.id)?,
        language: find(&schema.language)?,
        mwe: find(&schema.mwe)?,
        prev: find(&schema.prev)?,
        target: find(&schema.target)?,
        next: find(&schema.next)?,
        label: match find(&schema.label) {
            Ok(i) => Some(i),
            Err(_) if split == SplitKind::Test => None,
            Err(e) => return Err(e),
        },
    };

    let mut samples = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        if fields.len() != header.len() {
            return Err(Error::Data {
                line,
                message: format!("expected {} fields, found {}", header.len(), fields.len()),
            });
        }
        let field = |i: usize| fields[i].trim().to_string();

        let label = match cols.label.map(|i| fields[i].trim()) {
            Some(raw) if !raw.is_empty() => Some(*schema.label_map.get(raw).ok_or_else(|| Error::Data {
                line,
                message: format!("label `{raw}` not in label map"),
            })?),
            _ if split == SplitKind::Test => None,
            _ => return Err(Error::Data { line, message: "missing label".into() }),
        };
        let sample = Sample {
            id: field(cols.id),
            language: field(cols.language),
            mwe: field(cols.mwe),
            prev_ctx: field(cols.prev),
            target: field(cols.target),
            next_ctx: field(cols.next),
            label,
        };
        if sample.id.is_empty() {
            return Err(Error::Data { line, message: "empty id".into() });
        }
        if sample.mwe.is_empty() {
            return Err(Error::Data { line, message: "empty mwe".into() });
        }
        if sample.target.is_empty() {
            return Err(Error::Data { line, message: "empty target sentence".into() });
        }
        if seen.insert(sample.id.clone(), line).is_some() {
            return Err(Error::DuplicateId { id: sample.id, line });
        }
        samples.push(sample);
    }
    Corpus::new(split, samples)
}

/// Serializes a corpus back to TSV using the schema's column names.
///
/// Columns are written in schema order: id, language, mwe, prev, target, next, label.
pub fn write_corpus(corpus: &Corpus, schema: &ColumnSchema) -> Result<String> {
    let mut out = [
        &schema.id,
        &schema.language,
        &schema.mwe,
        &schema.prev,
        &schema.target,
        &schema.next,
        &schema.label,
    ]
    .map(String::as_str)
    .join("\t");
    out.push('\n');
    for s in corpus.samples() {
        let label = match s.label {
            Some(l) => schema.raw_label(l)?,
            None => "",
        };
        let fields = [
            s.id.as_str(),
            &s.language,
            &s.mwe,
            &s.prev_ctx,
            &s.target,
            &s.next_ctx,
            label,
        ];
        if let Some(bad) = fields.iter().find(|f| f.contains(['\t', '\n', '\r'])) {
            return Err(Error::Invalid(format!(
                "sample `{}`: field {bad:?} contains a tab or line break",
                s.id
            )));
        }
        out.push_str(&fields.join("\t"));
        out.push('\n');
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitStats {
    pub sample_count: usize,
    pub mwe_count: usize,
    pub per_language: BTreeMap<String, usize>,
    /// Counts over labeled samples only.
    pub per_label: BTreeMap<Label, usize>,
}

pub fn split_stats(corpus: &Corpus) -> SplitStats {
    let mut per_language = BTreeMap::new();
    let mut per_label = BTreeMap::new();
    for s in corpus.samples() {
        *per_language.entry(s.language.clone()).or_insert(0) += 1;
        if let Some(l) = s.label {
            *per_label.entry(l).or_insert(0) += 1;
        }
    }
    SplitStats {
        sample_count: corpus.len(),
        mwe_count: corpus.mwes().len(),
        per_language,
        per_label,
    }
}

/// Outcome of the zero-shot disjointness check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisjointnessReport {
    pub overlap: BTreeSet<String>,
}

impl DisjointnessReport {
    pub fn is_disjoint(&self) -> bool {
        self.overlap.is_empty()
    }
}

/// The zero-shot setting requires that no evaluation MWE appears in training.
pub fn validate_zero_shot_disjoint(train: &Corpus, eval: &Corpus) -> DisjointnessReport {
    let train_mwes = train.mwes();
    let overlap = eval
        .mwes()
        .intersection(&train_mwes)
        .map(|m| m.to_string())
        .collect();
    DisjointnessReport { overlap }
}

/// Labeled one-shot samples grouped by exact MWE string.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SupportIndex {
    by_mwe: BTreeMap<String, Vec<Sample>>,
}

impl SupportIndex {
    pub fn get(&self, mwe: &str) -> Option<&[Sample]> {
        self.by_mwe.get(mwe).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.by_mwe.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_mwe.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[Sample])> {
        self.by_mwe.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// MWEs of `queries` with no entry in the index, sorted.
    pub fn missing_mwes(&self, queries: &Corpus) -> Vec<String> {
        queries
            .mwes()
            .into_iter()
            .filter(|m| !self.by_mwe.contains_key(*m))
            .map(str::to_string)
            .collect()
    }
}

pub fn build_support_index(oneshot: &Corpus) -> Result<SupportIndex> {
    let mut by_mwe: BTreeMap<String, Vec<Sample>> = BTreeMap::new();
    for s in oneshot.samples() {
        s.require_label()?;
        by_mwe.entry(s.mwe.clone()).or_default().push(s.clone());
    }
    Ok(SupportIndex { by_mwe })
}

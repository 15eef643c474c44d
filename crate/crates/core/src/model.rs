//! Saved network files.
//!
//! Layout:
//!
//! ```text
//! #model\t{json header}
//! weight\t<layer>\t<out>\t<in>
//! <in values>            (one line per output unit)
//! bias\t<layer>\t<out>
//! <out values>
//! ...
//! ```
//!
//! Values are tab-separated and written in shortest round-trip decimal form,
//! so loading a file and saving it again reproduces it byte for byte.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fewshot::{HeadKind, PairHead, SiameseOperator};
use crate::nn::{DenseLayer, LayerSpec, Mlp};
use crate::train::TrainConfig;
use crate::zeroshot::Classifier;

pub const MODEL_FORMAT: &str = "idiomshot-model/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelKind {
    Siamese { operator: SiameseOperator },
    Relation,
    Classifier,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Siamese { .. } => "siamese",
            ModelKind::Relation => "relation",
            ModelKind::Classifier => "classifier",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelHeader {
    pub format: String,
    pub model: ModelKind,
    pub architecture: Vec<LayerSpec>,
    pub training: TrainConfig,
    /// Free-form description of the embeddings the model was trained on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub header: ModelHeader,
    pub mlp: Mlp,
}

impl SavedModel {
    pub fn new(model: ModelKind, mlp: Mlp, training: TrainConfig, embedding: Option<serde_json::Value>) -> Self {
        SavedModel {
            header: ModelHeader {
                format: MODEL_FORMAT.to_string(),
                model,
                architecture: mlp.specs(),
                training,
                embedding,
            },
            mlp,
        }
    }

    pub fn from_head(head: &PairHead, training: TrainConfig, embedding: Option<serde_json::Value>) -> Self {
        let kind = match head.kind() {
            HeadKind::Siamese => ModelKind::Siamese { operator: head.operator() },
            HeadKind::Relation => ModelKind::Relation,
        };
        SavedModel::new(kind, head.mlp().clone(), training, embedding)
    }

    pub fn from_classifier(clf: &Classifier, training: TrainConfig, embedding: Option<serde_json::Value>) -> Self {
        SavedModel::new(ModelKind::Classifier, clf.mlp().clone(), training, embedding)
    }

    pub fn into_head(self) -> Result<PairHead> {
        match self.header.model {
            ModelKind::Siamese { operator } => PairHead::from_mlp(HeadKind::Siamese, operator, self.mlp),
            ModelKind::Relation => PairHead::from_mlp(HeadKind::Relation, SiameseOperator::default(), self.mlp),
            ModelKind::Classifier => Err(Error::Config("expected a pair head, found a classifier model".into())),
        }
    }

    pub fn into_classifier(self) -> Result<Classifier> {
        match self.header.model {
            ModelKind::Classifier => Classifier::from_mlp(self.mlp),
            other => Err(Error::Config(format!("expected a classifier, found a {} model", other.name()))),
        }
    }

    /// Embedding dimension the network consumes.
    pub fn input_dim(&self) -> usize {
        match self.header.model {
            ModelKind::Relation => self.mlp.input_dim() / 2,
            _ => self.mlp.input_dim(),
        }
    }

    pub fn to_text(&self) -> String {
        let header = serde_json::to_string(&self.header).expect("header serializes");
        let mut out = format!("#model\t{header}\n");
        for (i, layer) in self.mlp.layers().iter().enumerate() {
            let LayerSpec { input, output, .. } = layer.spec;
            writeln!(out, "weight\t{i}\t{output}\t{input}").unwrap();
            for o in 0..output {
                write_row(&mut out, layer.weight_row(o));
            }
            writeln!(out, "bias\t{i}\t{output}").unwrap();
            write_row(&mut out, &layer.bias);
        }
        out
    }
}

fn write_row(out: &mut String, values: &[f64]) {
    for (k, v) in values.iter().enumerate() {
        if k > 0 {
            out.push('\t');
        }
        write!(out, "{v:?}").unwrap();
    }
    out.push('\n');
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        match self.inner.next() {
            Some((i, l)) => Ok((i + 1, l)),
            None => Err(Error::Format { line: 0, message: format!("unexpected end of file, expected {what}") }),
        }
    }
}

fn format_err(line: usize, message: impl Into<String>) -> Error {
    Error::Format { line, message: message.into() }
}

fn parse_values(line: usize, text: &str, expected: usize) -> Result<Vec<f64>> {
    let values = text
        .split('\t')
        .map(|f| {
            let v: f64 = f.parse().map_err(|_| format_err(line, format!("bad number `{f}`")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(format_err(line, format!("non-finite value `{f}`")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    if values.len() != expected {
        return Err(format_err(line, format!("expected {expected} values, found {}", values.len())));
    }
    Ok(values)
}

fn expect_tag(line: usize, text: &str, fields: &[String]) -> Result<()> {
    if text != fields.join("\t") {
        return Err(format_err(line, format!("expected `{}`, found `{text}`", fields.join(" "))));
    }
    Ok(())
}

pub fn parse_model(text: &str) -> Result<SavedModel> {
    let mut lines = Lines { inner: text.lines().enumerate() };
    let (n, first) = lines.next("model header")?;
    let json = first
        .strip_prefix("#model\t")
        .ok_or_else(|| format_err(n, "first line must start with `#model`"))?;
    let header: ModelHeader =
        serde_json::from_str(json).map_err(|e| format_err(n, format!("invalid header: {e}")))?;
    if header.format != MODEL_FORMAT {
        return Err(format_err(n, format!("unsupported format `{}`", header.format)));
    }
    if header.architecture.is_empty() {
        return Err(format_err(n, "architecture has no layers"));
    }

    let mut layers = Vec::with_capacity(header.architecture.len());
    for (i, spec) in header.architecture.iter().enumerate() {
        let (n, tag) = lines.next("weight block")?;
        expect_tag(n, tag, &["weight".into(), i.to_string(), spec.output.to_string(), spec.input.to_string()])?;
        let mut weight = Vec::with_capacity(spec.input * spec.output);
        for _ in 0..spec.output {
            let (n, row) = lines.next("weight row")?;
            weight.extend(parse_values(n, row, spec.input)?);
        }
        let (n, tag) = lines.next("bias block")?;
        expect_tag(n, tag, &["bias".into(), i.to_string(), spec.output.to_string()])?;
        let (n, row) = lines.next("bias row")?;
        let bias = parse_values(n, row, spec.output)?;
        layers.push(DenseLayer { spec: *spec, weight, bias });
    }
    if let Ok((n, extra)) = lines.next("") {
        if !extra.is_empty() {
            return Err(format_err(n, "trailing content after the last layer"));
        }
    }
    let mlp = Mlp::from_layers(layers)?;
    let model = SavedModel { header, mlp };
    // Reject layouts the kind cannot use.
    match model.header.model {
        ModelKind::Classifier => {
            model.clone().into_classifier()?;
        }
        _ => {
            model.clone().into_head()?;
        }
    }
    Ok(model)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SavedModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(&text)
}

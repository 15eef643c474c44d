//! Run configuration: a TOML document checked against [`RunConfig`] before
//! any work starts, with `key.path=value` overrides applied on top.

use std::path::{Path, PathBuf};

use idiomshot::{
    ColumnSchema, ContextMode, Error, HashedNgramConfig, HeadConfig, Result, SplitKind, TrainConfig,
    DEFAULT_THRESHOLD,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    ZeroShot,
    #[default]
    OneShot,
    Ensemble,
    Eval,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub zero_shot_train: Option<PathBuf>,
    pub one_shot_train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    /// Split that `predict` and `eval` run on: `dev` or `test`.
    pub eval_split: EvalSplit,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalSplit {
    #[default]
    Dev,
    Test,
}

impl From<EvalSplit> for SplitKind {
    fn from(s: EvalSplit) -> Self {
        match s {
            EvalSplit::Dev => SplitKind::Dev,
            EvalSplit::Test => SplitKind::Test,
        }
    }
}

impl DataConfig {
    pub fn path(&self, split: SplitKind) -> Option<&Path> {
        match split {
            SplitKind::ZeroShotTrain => self.zero_shot_train.as_deref(),
            SplitKind::OneShotTrain => self.one_shot_train.as_deref(),
            SplitKind::Dev => self.dev.as_deref(),
            SplitKind::Test => self.test.as_deref(),
        }
    }

    /// The configured path for `split`, which must exist.
    pub fn require(&self, split: SplitKind) -> Result<&Path> {
        let path = self
            .path(split)
            .ok_or_else(|| Error::Config(format!("data.{} is not set", split.as_str())))?;
        if !path.exists() {
            return Err(Error::Config(format!("data.{}: {} does not exist", split.as_str(), path.display())));
        }
        Ok(path)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderKind {
    #[default]
    Hashed,
    Table,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbeddingsConfig {
    pub provider: ProviderKind,
    /// Table files, merged in order. Used by the `table` provider.
    pub tables: Vec<PathBuf>,
    /// Text fed to the `hashed` provider.
    pub context_mode: ContextMode,
    pub hashed: HashedNgramConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierSection {
    pub hidden: Vec<usize>,
}

impl Default for ClassifierSection {
    fn default() -> Self {
        ClassifierSection { hidden: idiomshot::ClassifierConfig::default().hidden }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictConfig {
    /// Model to load; defaults to `<out_dir>/model.txt`.
    pub model: Option<PathBuf>,
    pub threshold: f64,
}

impl Default for PredictConfig {
    fn default() -> Self {
        PredictConfig { model: None, threshold: DEFAULT_THRESHOLD }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Prediction file to score; defaults to `<out_dir>/predictions.tsv`.
    pub predictions: Option<PathBuf>,
    pub group_by_language: bool,
    /// Row label in the text table; defaults to the model kind.
    pub setting: Option<String>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { predictions: None, group_by_language: true, setting: None }
    }
}

/// One zero-shot classifier of an ensemble. Unset fields inherit the run's
/// embeddings and training seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemberConfig {
    pub id: String,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub embeddings: Option<EmbeddingsConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleSection {
    pub members: Vec<MemberConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub mode: RunMode,
    pub out_dir: PathBuf,
    pub data: DataConfig,
    pub schema: ColumnSchema,
    pub embeddings: EmbeddingsConfig,
    pub head: HeadConfig,
    pub classifier: ClassifierSection,
    pub train: TrainConfig,
    pub predict: PredictConfig,
    pub eval: EvalConfig,
    pub ensemble: EnsembleSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: RunMode::default(),
            out_dir: PathBuf::from("run"),
            data: DataConfig::default(),
            schema: ColumnSchema::default(),
            embeddings: EmbeddingsConfig::default(),
            head: HeadConfig::default(),
            classifier: ClassifierSection::default(),
            train: TrainConfig::default(),
            predict: PredictConfig::default(),
            eval: EvalConfig::default(),
            ensemble: EnsembleSection::default(),
        }
    }
}

/// Parses `value` as a TOML value, falling back to a bare string.
fn parse_value(value: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()))
}

/// Applies one `dotted.key=value` override to a raw document.
pub fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override key `{key}`")));
    }
    let (last, parents) = parts.split_last().expect("split yields one part");
    let mut table = doc;
    for part in parents {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override `{key}`: `{part}` is not a table")))?;
    }
    table.insert(last.to_string(), parse_value(value.trim()));
    Ok(())
}

impl RunConfig {
    /// Reads `path` (if any), applies `overrides` in order, checks the result
    /// against the schema and makes relative paths absolute. Paths resolve
    /// against the config file's directory, or the working directory when
    /// there is no file.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
        let mut doc = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::Io { path: p.display().to_string(), source: e })?;
                toml::from_str::<toml::Table>(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let mut config: RunConfig = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let base = match path.and_then(Path::parent) {
            Some(dir) if !dir.as_os_str().is_empty() => dir.to_path_buf(),
            _ => std::env::current_dir().map_err(|e| Error::Io { path: ".".into(), source: e })?,
        };
        config.resolve_paths(&base);
        config.materialize();
        config.validate()?;
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out_dir);
        let d = &mut self.data;
        for p in [&mut d.zero_shot_train, &mut d.one_shot_train, &mut d.dev, &mut d.test]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        self.embeddings.tables.iter_mut().for_each(fix);
        for m in &mut self.ensemble.members {
            if let Some(e) = &mut m.embeddings {
                e.tables.iter_mut().for_each(fix);
            }
        }
        self.predict.model.iter_mut().for_each(fix);
        self.eval.predictions.iter_mut().for_each(fix);
    }

    /// Fills every inherited member setting so the snapshot is explicit.
    fn materialize(&mut self) {
        for m in &mut self.ensemble.members {
            m.seed.get_or_insert(self.train.seed);
            m.embeddings.get_or_insert_with(|| self.embeddings.clone());
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if !(0.0..=1.0).contains(&self.predict.threshold) {
            return Err(Error::Config("predict.threshold must lie in [0, 1]".into()));
        }
        let mut ids = std::collections::BTreeSet::new();
        for m in &self.ensemble.members {
            if m.id.is_empty() || m.id.contains(['/', '\\', '\t']) || !ids.insert(m.id.as_str()) {
                return Err(Error::Config(format!("ensemble member id `{}` is empty, repeated or not a plain name", m.id)));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn model_path(&self) -> PathBuf {
        self.predict.model.clone().unwrap_or_else(|| self.out_dir.join("model.txt"))
    }

    pub fn predictions_path(&self) -> PathBuf {
        self.eval.predictions.clone().unwrap_or_else(|| self.out_dir.join("predictions.tsv"))
    }

    pub fn member_model_path(&self, id: &str) -> PathBuf {
        self.out_dir.join("members").join(format!("{id}.txt"))
    }
}

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use idiomshot::synth::{generate, SynthConfig, SynthCorpus};
use idiomshot::{write_corpus, ColumnSchema};
use idiomshot_cli::RunConfig;

/// Writes the splits and embedding table of `config` into `dir`, plus a
/// `run.toml` using the table provider. Returns the generated corpus.
pub fn write_synth(dir: &Path, config: &SynthConfig, extra_toml: &str) -> SynthCorpus {
    let synth = generate(config).unwrap();
    let schema = ColumnSchema::default();
    for (name, corpus) in [
        ("zero_shot_train.tsv", &synth.zero_shot_train),
        ("one_shot_train.tsv", &synth.one_shot_train),
        ("dev.tsv", &synth.queries),
    ] {
        std::fs::write(dir.join(name), write_corpus(corpus, &schema).unwrap()).unwrap();
    }
    std::fs::write(dir.join("embeddings.tsv"), synth.table.to_text()).unwrap();
    let toml = format!(
        r#"out_dir = "out"

[data]
zero_shot_train = "zero_shot_train.tsv"
one_shot_train = "one_shot_train.tsv"
dev = "dev.tsv"

[embeddings]
provider = "table"
tables = ["embeddings.tsv"]

{extra_toml}
"#
    );
    std::fs::write(dir.join("run.toml"), toml).unwrap();
    synth
}

/// A small corpus that trains in well under a second.
pub fn small_synth() -> SynthConfig {
    SynthConfig {
        mwes: 4,
        zero_shot_mwes: 4,
        dimension: 16,
        idiom_axes: 2,
        one_shot_per_class: 2,
        query_per_class: 2,
        zero_shot_per_class: 4,
        ..Default::default()
    }
}

pub fn load(dir: &Path, overrides: &[&str]) -> RunConfig {
    let overrides: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    RunConfig::load(Some(&dir.join("run.toml")), &overrides).unwrap()
}

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_idiomshot"))
}

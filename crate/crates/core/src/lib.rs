//! Idiomatic multiword-expression detection: a zero-shot classifier baseline
//! and one-shot Siamese/Relation pair heads over sentence embeddings.
//!
//! Embeddings come from an [`EmbeddingProvider`]: either a precomputed
//! [`EmbeddingTable`] file or the built-in [`HashedNgramEncoder`].

pub mod corpus;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod fewshot;
pub mod model;
pub mod nn;
pub mod predictions;
pub mod synth;
pub mod train;
pub mod zeroshot;

pub use corpus::{
    build_support_index, load_corpus, parse_corpus, split_stats, validate_zero_shot_disjoint, write_corpus,
    ColumnSchema, Corpus, Label, Sample, SplitKind, SplitStats, SupportIndex,
};
pub use embedding::{
    load_table, parse_table, ContextMode, EmbeddingProvider, EmbeddingTable, EmbeddingVector, HashedNgramConfig,
    HashedNgramEncoder, TableMeta, TableProvider,
};
pub use error::{Error, ErrorClass, Result};
pub use eval::{build_report, macro_f1, render_table, EvalReport, TableRow};
pub use fewshot::{
    build_pairs, choose, evaluate_oneshot, predict_oneshot, train_head, HeadConfig, HeadKind, PairExample, PairHead,
    ScoredPrediction, SiameseOperator, WinningMode,
};
pub use model::{load_model, parse_model, ModelKind, SavedModel};
pub use predictions::{parse_predictions, write_predictions, PredictionMode, PredictionRow};
pub use train::{TrainConfig, TrainingLog};
pub use zeroshot::{
    majority_vote, predict_zeroshot, train_classifier, Classifier, ClassifierConfig, EnsembleConfig,
    ZeroShotPrediction, DEFAULT_THRESHOLD,
};

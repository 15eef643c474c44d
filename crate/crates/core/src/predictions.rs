//! Prediction TSV shared by the one-shot, zero-shot and ensemble paths.
//!
//! Columns: `id, language, mwe, predicted_label, winning_score, winning_mode,
//! support_id`. `winning_mode` is `similar` or `dissimilar` for one-shot
//! predictions and `classifier` or `ensemble` otherwise, in which case
//! `support_id` is empty.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Label};
use crate::error::{Error, Result};
use crate::fewshot::{ScoredPrediction, WinningMode};

pub const PREDICTION_COLUMNS: [&str; 7] = [
    "id",
    "language",
    "mwe",
    "predicted_label",
    "winning_score",
    "winning_mode",
    "support_id",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictionMode {
    Similar,
    Dissimilar,
    Classifier,
    Ensemble,
}

impl PredictionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PredictionMode::Similar => "similar",
            PredictionMode::Dissimilar => "dissimilar",
            PredictionMode::Classifier => "classifier",
            PredictionMode::Ensemble => "ensemble",
        }
    }
}

impl From<WinningMode> for PredictionMode {
    fn from(m: WinningMode) -> Self {
        match m {
            WinningMode::Similar => PredictionMode::Similar,
            WinningMode::Dissimilar => PredictionMode::Dissimilar,
        }
    }
}

impl fmt::Display for PredictionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PredictionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            PredictionMode::Similar,
            PredictionMode::Dissimilar,
            PredictionMode::Classifier,
            PredictionMode::Ensemble,
        ]
        .into_iter()
        .find(|m| m.as_str() == s)
        .ok_or_else(|| Error::Invalid(format!("unknown winning mode `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub id: String,
    pub language: String,
    pub mwe: String,
    pub label: Label,
    pub score: f64,
    pub mode: PredictionMode,
    pub support_id: String,
}

/// Joins one-shot predictions with their query samples.
pub fn oneshot_rows(queries: &Corpus, predictions: &[ScoredPrediction]) -> Result<Vec<PredictionRow>> {
    predictions
        .iter()
        .map(|p| {
            let q = queries
                .get(&p.query_id)
                .ok_or_else(|| Error::Invalid(format!("prediction for unknown sample `{}`", p.query_id)))?;
            Ok(PredictionRow {
                id: q.id.clone(),
                language: q.language.clone(),
                mwe: q.mwe.clone(),
                label: p.label,
                score: p.score,
                mode: p.mode.into(),
                support_id: p.support_id.clone(),
            })
        })
        .collect()
}

pub fn write_predictions(rows: &[PredictionRow]) -> String {
    let mut out = PREDICTION_COLUMNS.join("\t");
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{:?}\t{}\t{}\n",
            r.id, r.language, r.mwe, r.label, r.score, r.mode, r.support_id
        ));
    }
    out
}

pub fn parse_predictions(text: &str) -> Result<Vec<PredictionRow>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let header = lines.next().map(|(_, h)| h.trim_end_matches('\r'));
    if header != Some(PREDICTION_COLUMNS.join("\t").as_str()) {
        return Err(Error::Format {
            line: 1,
            message: format!("expected header `{}`", PREDICTION_COLUMNS.join("\\t")),
        });
    }
    let mut rows = Vec::new();
    for (line, raw) in lines {
        let raw = raw.trim_end_matches('\r');
        if raw.is_empty() {
            continue;
        }
        let bad = |message: String| Error::Format { line, message };
        let f: Vec<&str> = raw.split('\t').collect();
        if f.len() != PREDICTION_COLUMNS.len() {
            return Err(bad(format!("expected {} fields, found {}", PREDICTION_COLUMNS.len(), f.len())));
        }
        let score: f64 = f[4].parse().map_err(|_| bad(format!("bad score `{}`", f[4])))?;
        if !(0.0..=1.0).contains(&score) {
            return Err(bad(format!("score {score} outside [0, 1]")));
        }
        rows.push(PredictionRow {
            id: f[0].to_string(),
            language: f[1].to_string(),
            mwe: f[2].to_string(),
            label: f[3].parse().map_err(|e: Error| bad(e.to_string()))?,
            score,
            mode: f[5].parse().map_err(|e: Error| bad(e.to_string()))?,
            support_id: f[6].to_string(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_row() -> impl Strategy<Value = PredictionRow> {
        (
            "[a-z0-9]{1,6}",
            prop::sample::select(vec!["EN", "PT", "GL"]),
            "[a-z]{1,5}( [a-z]{1,5})?",
            prop::sample::select(vec![Label::Idiomatic, Label::Literal]),
            0.0f64..=1.0,
            prop::sample::select(vec![
                PredictionMode::Similar,
                PredictionMode::Dissimilar,
                PredictionMode::Classifier,
                PredictionMode::Ensemble,
            ]),
            "[a-z0-9]{0,4}",
        )
            .prop_map(|(id, language, mwe, label, score, mode, support_id)| PredictionRow {
                id,
                language: language.into(),
                mwe,
                label,
                score,
                mode,
                support_id,
            })
    }

    proptest! {
        #[test]
        fn tsv_round_trip(rows in prop::collection::vec(arb_row(), 0..8)) {
            let text = write_predictions(&rows);
            prop_assert_eq!(parse_predictions(&text).unwrap(), rows);
        }
    }

    #[test]
    fn malformed_rows_rejected() {
        let header = PREDICTION_COLUMNS.join("\t");
        assert!(parse_predictions("id\tlabel\n").is_err());
        for body in [
            "a\tEN\tm\tIdiomatic\t0.5\tsimilar",
            "a\tEN\tm\tIdiomatic\tabc\tsimilar\ts",
            "a\tEN\tm\tIdiomatic\t1.5\tsimilar\ts",
            "a\tEN\tm\tMaybe\t0.5\tsimilar\ts",
            "a\tEN\tm\tIdiomatic\t0.5\tguess\ts",
        ] {
            let err = parse_predictions(&format!("{header}\n{body}\n")).unwrap_err();
            assert!(matches!(err, Error::Format { line: 2, .. }), "{body}: {err}");
        }
    }
}

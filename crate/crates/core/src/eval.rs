//! Macro-F1 scoring and per-language reports.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Label};
use crate::error::{Error, Result};
use crate::predictions::PredictionRow;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold members of the class.
    pub support: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision, recall and F1 of both classes. Undefined ratios are 0.
pub fn class_metrics(preds: &[Label], golds: &[Label]) -> Result<BTreeMap<Label, ClassMetrics>> {
    if preds.len() != golds.len() {
        return Err(Error::Invalid(format!(
            "{} predictions for {} gold labels",
            preds.len(),
            golds.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::Invalid("cannot score an empty prediction set".into()));
    }
    Ok(Label::ALL
        .into_iter()
        .map(|class| {
            let tp = preds.iter().zip(golds).filter(|(p, g)| **p == class && **g == class).count();
            let predicted = preds.iter().filter(|p| **p == class).count();
            let support = golds.iter().filter(|g| **g == class).count();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            // 2PR/(P+R) reduces to 2tp/(predicted + support), which avoids
            // rounding in the intermediate ratios.
            let f1 = ratio(2 * tp, predicted + support);
            (class, ClassMetrics { precision, recall, f1, support })
        })
        .collect())
}

/// Unweighted mean of the two per-class F1 scores.
pub fn macro_f1(preds: &[Label], golds: &[Label]) -> Result<f64> {
    let per_class = class_metrics(preds, golds)?;
    Ok(per_class.values().map(|m| m.f1).sum::<f64>() / per_class.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceScores {
    pub count: usize,
    pub macro_f1: f64,
    pub per_class: BTreeMap<Label, ClassMetrics>,
}

impl SliceScores {
    fn score(preds: &[Label], golds: &[Label]) -> Result<Self> {
        let per_class = class_metrics(preds, golds)?;
        let macro_f1 = per_class.values().map(|m| m.f1).sum::<f64>() / per_class.len() as f64;
        Ok(SliceScores { count: preds.len(), macro_f1, per_class })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    /// Languages present, sorted.
    pub languages: Vec<String>,
    pub overall: SliceScores,
    /// Empty unless grouping by language was requested.
    pub per_language: BTreeMap<String, SliceScores>,
}

/// Scores `predictions` against the labels of `gold`.
///
/// Each prediction id must name a labeled sample of `gold`; the language is
/// taken from the gold sample.
pub fn build_report(
    predictions: &[PredictionRow],
    gold: &Corpus,
    model: &str,
    group_by_language: bool,
) -> Result<EvalReport> {
    let mut seen = HashSet::new();
    let mut by_language: BTreeMap<String, (Vec<Label>, Vec<Label>)> = BTreeMap::new();
    let (mut preds, mut golds) = (Vec::new(), Vec::new());
    for p in predictions {
        let sample = gold
            .get(&p.id)
            .ok_or_else(|| Error::Invalid(format!("prediction for unknown sample `{}`", p.id)))?;
        let label = sample.require_label()?;
        if !seen.insert(p.id.as_str()) {
            return Err(Error::Invalid(format!("duplicate prediction for `{}`", p.id)));
        }
        preds.push(p.label);
        golds.push(label);
        let slot = by_language.entry(sample.language.clone()).or_default();
        slot.0.push(p.label);
        slot.1.push(label);
    }
    let overall = SliceScores::score(&preds, &golds)?;
    let languages = by_language.keys().cloned().collect();
    let per_language = if group_by_language {
        by_language
            .iter()
            .map(|(lang, (p, g))| Ok((lang.clone(), SliceScores::score(p, g)?)))
            .collect::<Result<_>>()?
    } else {
        BTreeMap::new()
    };
    Ok(EvalReport { model: model.to_string(), languages, overall, per_language })
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per language, then the overall row labeled with all languages.
    pub fn table_rows(&self) -> Vec<TableRow> {
        let mut rows: Vec<TableRow> = self
            .per_language
            .iter()
            .map(|(lang, s)| TableRow { setting: self.model.clone(), language: lang.clone(), f1: s.macro_f1 })
            .collect();
        rows.push(TableRow {
            setting: self.model.clone(),
            language: self.languages.join(","),
            f1: self.overall.macro_f1,
        });
        rows
    }

    pub fn to_text(&self) -> String {
        render_table(&self.table_rows())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub setting: String,
    pub language: String,
    pub f1: f64,
}

/// Left-aligned text table with `Setting`, `Language` and `F1` columns,
/// F1 to four decimals.
pub fn render_table(rows: &[TableRow]) -> String {
    let cells: Vec<[String; 3]> = rows
        .iter()
        .map(|r| [r.setting.clone(), r.language.clone(), format!("{:.4}", r.f1)])
        .collect();
    let header = ["Setting", "Language", "F1"].map(String::from);
    let mut widths = header.clone().map(|h| h.chars().count());
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |row: &[String; 3]| {
        let padded: Vec<String> = row.iter().zip(widths).map(|(c, w)| format!("{c:<w$}")).collect();
        padded.join("  ").trim_end().to_string()
    };
    let mut out = line(&header);
    out.push('\n');
    out.push_str(&widths.map(|w| "-".repeat(w)).join("  "));
    out.push('\n');
    for row in &cells {
        out.push_str(&line(row));
        out.push('\n');
    }
    out
}

//! Versioned JSON reports written by each pipeline stage, and the merged
//! comparison tables. Tables copy values from the reports verbatim; the only
//! transformation is formatting.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::complete::{BoundResult, CompletionMetrics, CompletionOptions, CompletionTally};
use crate::corpus::GeneratorConfig;
use crate::error::{Error, Result};
use crate::lm::{system_label, Ablation, ModelConfig, TrainingLog, Variant};
use crate::predict::{OovPolicy, PredictionMetrics};
use crate::write_atomic;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub schema_version: u32,
    pub seed: u64,
    pub generator: GeneratorConfig,
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
    pub vocab_size: usize,
    pub vocab_sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub schema_version: u32,
    pub variant: Variant,
    pub seed: u64,
    pub config: ModelConfig,
    pub vocab_sha256: String,
    pub checkpoint_sha256: String,
    pub n_train_docs: usize,
    pub n_dev_docs: usize,
    pub log: TrainingLog,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictReport {
    pub schema_version: u32,
    pub system: String,
    pub variant: Variant,
    pub ablation: Ablation,
    pub seed: u64,
    pub oov_policy: OovPolicy,
    pub n_docs: usize,
    pub metrics: PredictionMetrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompleteReport {
    pub schema_version: u32,
    pub system: String,
    pub variant: Variant,
    pub ablation: Ablation,
    pub seed: u64,
    pub options: CompletionOptions,
    pub n_docs: usize,
    pub tally: CompletionTally,
    pub metrics: CompletionMetrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub schema_version: u32,
    pub seed: u64,
    pub options: CompletionOptions,
    pub n_docs: usize,
    pub vocab_sha256: String,
    pub theoretical: BoundResult,
    pub vocabulary: BoundResult,
}

/// Any report, tagged by `kind`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Report {
    Corpus(CorpusReport),
    Train(TrainReport),
    Predict(PredictReport),
    Complete(CompleteReport),
    Bounds(BoundsReport),
}

// Decoded through `serde_json::Value` because serde's buffered tagged-enum
// path cannot read the integer keys of `recall_at`.
impl<'de> Deserialize<'de> for Report {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let mut value = serde_json::Value::deserialize(d)?;
        let kind =
            value.as_object_mut().and_then(|o| o.remove("kind")).ok_or_else(|| D::Error::missing_field("kind"))?;
        let r = match kind.as_str() {
            Some("corpus") => serde_json::from_value(value).map(Report::Corpus),
            Some("train") => serde_json::from_value(value).map(Report::Train),
            Some("predict") => serde_json::from_value(value).map(Report::Predict),
            Some("complete") => serde_json::from_value(value).map(Report::Complete),
            Some("bounds") => serde_json::from_value(value).map(Report::Bounds),
            _ => return Err(D::Error::custom(format!("unknown report kind {kind}"))),
        };
        r.map_err(D::Error::custom)
    }
}

impl Report {
    pub fn schema_version(&self) -> u32 {
        match self {
            Report::Corpus(r) => r.schema_version,
            Report::Train(r) => r.schema_version,
            Report::Predict(r) => r.schema_version,
            Report::Complete(r) => r.schema_version,
            Report::Bounds(r) => r.schema_version,
        }
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_json()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let report: Report = serde_json::from_slice(&std::fs::read(path)?)?;
        if report.schema_version() != SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "{}: schema version {} (expected {SCHEMA_VERSION})",
                path.display(),
                report.schema_version()
            )));
        }
        Ok(report)
    }
}

/// Row order of the comparison tables.
pub fn system_order() -> Vec<String> {
    let mut rows: Vec<String> = Variant::ALL.iter().map(|&v| system_label(v, Ablation::NONE)).collect();
    for (v, a) in [
        (Variant::Conditional, Ablation::KB),
        (Variant::Grounded, Ablation::VALUES),
        (Variant::ConditionalGrounded, Ablation::KB),
        (Variant::ConditionalGrounded, Ablation::VALUES),
    ] {
        rows.push(system_label(v, a));
    }
    rows
}

fn sort_key(system: &str) -> usize {
    system_order().iter().position(|s| s == system).unwrap_or(usize::MAX)
}

/// A formatted table; `cells` hold exact decimal renderings of report values
/// (or `n/a`).
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub title: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_owned(), |x| x.to_string())
}

fn percent(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_owned(), |x| format!("{:.2}", 100.0 * x))
}

impl Table {
    /// Aligned plain text; ratios shown as percentages with two decimals.
    pub fn to_text(&self, percent_columns: &[usize]) -> String {
        let display: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(i, c)| match c.parse::<f64>() {
                        Ok(x) if percent_columns.contains(&i) => percent(Some(x)),
                        Ok(x) => format!("{x:.3}"),
                        Err(_) => c.clone(),
                    })
                    .collect()
            })
            .collect();
        let mut widths: Vec<usize> = self.header.iter().map(|h| h.len()).collect();
        for row in &display {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let mut out = format!("{}\n", self.title);
        let line = |cells: &[String]| {
            let mut s = String::new();
            for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
                if i == 0 {
                    let _ = write!(s, "{c:<w$}");
                } else {
                    let _ = write!(s, "  {c:>w$}");
                }
            }
            s.trim_end().to_owned() + "\n"
        };
        out += &line(&self.header);
        out += &line(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>());
        for row in &display {
            out += &line(row);
        }
        out
    }

    /// CSV with full-precision values.
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",") + "\n";
        for row in &self.rows {
            out += &row.iter().map(|c| crate::predict::csv_field(c)).collect::<Vec<_>>().join(",");
            out.push('\n');
        }
        out
    }
}

/// Word-prediction table: MRR, Recall@k for every k present, perplexity.
pub fn prediction_table(reports: &[PredictReport]) -> Table {
    let mut reports: Vec<&PredictReport> = reports.iter().collect();
    reports.sort_by_key(|r| (sort_key(&r.system), r.system.clone(), r.seed));
    let ks: Vec<usize> = reports
        .iter()
        .flat_map(|r| r.metrics.recall_at.keys().copied())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut header = vec!["system".to_owned(), "seed".to_owned(), "MRR".to_owned()];
    header.extend(ks.iter().map(|k| format!("R@{k}")));
    header.push("perplexity".to_owned());
    let rows = reports
        .iter()
        .map(|r| {
            let mut row = vec![r.system.clone(), r.seed.to_string(), cell(Some(r.metrics.mrr))];
            row.extend(ks.iter().map(|k| cell(r.metrics.recall_at.get(k).copied())));
            row.push(cell(Some(r.metrics.perplexity)));
            row
        })
        .collect();
    Table { title: "Word prediction".to_owned(), header, rows }
}

/// Word-completion table with the bound rows at the bottom.
pub fn completion_table(reports: &[CompleteReport], bounds: &[BoundsReport]) -> Table {
    let mut reports: Vec<&CompleteReport> = reports.iter().collect();
    reports.sort_by_key(|r| (sort_key(&r.system), r.system.clone(), r.seed));
    let header = ["system", "seed", "KS", "UD", "precision", "recall", "F1"].map(str::to_owned).to_vec();
    let row = |system: &str, seed: u64, m: &CompletionMetrics| {
        vec![
            system.to_owned(),
            seed.to_string(),
            cell(Some(m.ks)),
            cell(m.ud),
            cell(m.precision),
            cell(Some(m.recall)),
            cell(Some(m.f1)),
        ]
    };
    let mut rows: Vec<Vec<String>> = reports.iter().map(|r| row(&r.system, r.seed, &r.metrics)).collect();
    for b in bounds {
        rows.push(row("vocabulary bound", b.seed, &b.vocabulary.metrics));
        rows.push(row("theoretical bound", b.seed, &b.theoretical.metrics));
    }
    Table { title: "Word completion".to_owned(), header, rows }
}

/// Percent-formatted columns of [`completion_table`] in text form.
pub const COMPLETION_PERCENT_COLUMNS: [usize; 4] = [2, 4, 5, 6];

/// Reports grouped for table building.
#[derive(Clone, Debug, Default)]
pub struct ReportSet {
    pub predict: Vec<PredictReport>,
    pub complete: Vec<CompleteReport>,
    pub bounds: Vec<BoundsReport>,
    pub train: BTreeMap<(String, u64), TrainReport>,
}

impl ReportSet {
    pub fn add(&mut self, report: Report) {
        match report {
            Report::Predict(r) => self.predict.push(r),
            Report::Complete(r) => self.complete.push(r),
            Report::Bounds(r) => self.bounds.push(r),
            Report::Corpus(_) => {}
            Report::Train(r) => {
                self.train.insert((r.variant.name().to_owned(), r.seed), r);
            }
        }
    }

    /// Text rendering of both tables.
    pub fn render_text(&self) -> String {
        let p = prediction_table(&self.predict);
        let pct: Vec<usize> = (2..p.header.len() - 1).collect();
        let mut out = p.to_text(&pct);
        out.push('\n');
        out += &completion_table(&self.complete, &self.bounds).to_text(&COMPLETION_PERCENT_COLUMNS);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn predict(system: &str, variant: Variant, ablation: Ablation, mrr: f64) -> PredictReport {
        PredictReport {
            schema_version: SCHEMA_VERSION,
            system: system.into(),
            variant,
            ablation,
            seed: 1,
            oov_policy: OovPolicy::Miss,
            n_docs: 3,
            metrics: PredictionMetrics {
                mrr,
                recall_at: BTreeMap::from([(1, 0.1), (5, 0.123456789012345)]),
                precision_at_1: 0.1,
                perplexity: 7.25,
                n_positions: 10,
                n_tokens: 11,
            },
        }
    }

    #[test]
    fn rows_follow_the_canonical_order() {
        assert_eq!(system_order(), ["baseline", "+c", "+g", "+c+g", "+c-kb", "+g-v", "+c+g-kb", "+c+g-v"]);
        let t = prediction_table(&[
            predict("+c+g-v", Variant::ConditionalGrounded, Ablation::VALUES, 0.3),
            predict("baseline", Variant::Baseline, Ablation::NONE, 0.2),
        ]);
        assert_eq!(t.rows[0][0], "baseline");
        assert_eq!(t.header, ["system", "seed", "MRR", "R@1", "R@5", "perplexity"]);
    }

    #[test]
    fn csv_values_round_trip_exactly() {
        let r = predict("+c", Variant::Conditional, Ablation::NONE, 1.0 / 3.0);
        let t = prediction_table(std::slice::from_ref(&r));
        let csv = t.to_csv();
        let fields: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(fields[2].parse::<f64>().unwrap(), r.metrics.mrr);
        assert_eq!(fields[4].parse::<f64>().unwrap(), r.metrics.recall_at[&5]);
        assert!(t.to_text(&[2, 3, 4]).contains("33.33"));
    }

    #[test]
    fn reports_round_trip_through_json() {
        let report = Report::Predict(predict("+g", Variant::Grounded, Ablation::NONE, 0.5));
        let bytes = report.to_json().unwrap();
        assert!(std::str::from_utf8(&bytes).unwrap().contains("\"kind\": \"predict\""));
        assert_eq!(serde_json::from_slice::<Report>(&bytes).unwrap(), report);
    }

    #[test]
    fn undefined_metrics_render_as_na() {
        let tally = CompletionTally { total_chars: 4, typed_keys: 4, words: 1, ..Default::default() };
        let r = CompleteReport {
            schema_version: SCHEMA_VERSION,
            system: "baseline".into(),
            variant: Variant::Baseline,
            ablation: Ablation::NONE,
            seed: 1,
            options: CompletionOptions::default(),
            n_docs: 1,
            tally,
            metrics: CompletionMetrics::from_tally(&tally),
        };
        let text = completion_table(&[r], &[]).to_text(&COMPLETION_PERCENT_COLUMNS);
        assert!(text.contains("n/a"));
    }
}

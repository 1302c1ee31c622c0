//! Word-prediction evaluation: rank of the true next word in the model's
//! suggestion list at every word position, summarized as MRR, Recall@k and
//! perplexity.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{EncodedDocument, TokenId};
use crate::error::{Error, Result};
use crate::lm::{Ablation, LanguageModel};
use crate::numgrad::cross_entropy;

pub const DEFAULT_KS: [usize; 5] = [1, 2, 3, 5, 10];

/// How targets that were out of vocabulary before masking are scored.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OovPolicy {
    /// OOV targets are misses and mask symbols are never suggested.
    #[default]
    Miss,
    /// The target is its mask symbol, ranked among all entries.
    Masked,
}

impl fmt::Display for OovPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OovPolicy::Miss => "miss",
            OovPolicy::Masked => "masked",
        })
    }
}

impl FromStr for OovPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "miss" => Ok(OovPolicy::Miss),
            "masked" => Ok(OovPolicy::Masked),
            other => Err(Error::InvalidConfig(format!("unknown oov policy {other:?}"))),
        }
    }
}

/// 1-based rank of `target` when entries are sorted by descending
/// probability, ties broken by ascending id.
pub fn rank_of(dist: &[f64], target: usize) -> usize {
    rank_among(dist, target, |_| true)
}

/// Like [`rank_of`] but only entries for which `eligible` holds take part.
pub fn rank_among(dist: &[f64], target: usize, eligible: impl Fn(usize) -> bool) -> usize {
    let pt = dist[target];
    1 + dist
        .iter()
        .enumerate()
        .filter(|&(j, &p)| j != target && eligible(j) && (p > pt || (p == pt && j < target)))
        .count()
}

/// The `k` best eligible ids, by descending probability then ascending id.
pub fn top_k(dist: &[f64], k: usize, eligible: impl Fn(usize) -> bool) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..dist.len()).filter(|&j| eligible(j)).collect();
    let by_rank = |a: &usize, b: &usize| dist[*b].total_cmp(&dist[*a]).then(a.cmp(b));
    if k < ids.len() {
        ids.select_nth_unstable_by(k, by_rank);
        ids.truncate(k);
    }
    ids.sort_by(by_rank);
    ids
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub doc_id: String,
    pub position: usize,
    pub target: TokenId,
    pub target_surface: String,
    /// The target surface was not in the vocabulary before masking.
    pub target_oov: bool,
    /// `None` is a miss.
    pub rank: Option<usize>,
    /// First suggestion shown to the user.
    pub top1: Option<TokenId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionMetrics {
    pub mrr: f64,
    pub recall_at: BTreeMap<usize, f64>,
    pub precision_at_1: f64,
    pub perplexity: f64,
    /// Word positions ranked (closing `<eos>` excluded).
    pub n_positions: usize,
    /// Positions scored for perplexity (closing `<eos>` included).
    pub n_tokens: usize,
}

impl PredictionMetrics {
    pub fn from_records(records: &[PredictionRecord], ks: &[usize], nll_total: f64, nll_count: usize) -> Result<Self> {
        if records.is_empty() || nll_count == 0 {
            return Err(Error::EmptyEvaluation("no word positions to rank"));
        }
        let n = records.len() as f64;
        let mrr = records.iter().map(|r| r.rank.map_or(0.0, |k| 1.0 / k as f64)).sum::<f64>() / n;
        let recall_at = ks
            .iter()
            .map(|&k| (k, records.iter().filter(|r| r.rank.is_some_and(|rank| rank <= k)).count() as f64 / n))
            .collect();
        // Counted from the first suggestion, independently of the ranks.
        let precision_at_1 = records.iter().filter(|r| r.rank.is_some() && r.top1 == Some(r.target)).count() as f64 / n;
        Ok(Self {
            mrr,
            recall_at,
            precision_at_1,
            perplexity: (nll_total / nll_count as f64).exp(),
            n_positions: records.len(),
            n_tokens: nll_count,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionEvaluation {
    pub metrics: PredictionMetrics,
    pub records: Vec<PredictionRecord>,
}

pub fn evaluate_prediction(
    model: &LanguageModel,
    docs: &[EncodedDocument],
    ablation: Ablation,
    policy: OovPolicy,
    ks: &[usize],
) -> Result<PredictionEvaluation> {
    let vocab = &model.vocab;
    let mut records = Vec::new();
    let (mut nll_total, mut nll_count) = (0.0, 0usize);
    for doc in docs.iter().filter(|d| !d.is_empty()) {
        model.teacher_forced(doc, ablation, |position, dist| {
            nll_total += cross_entropy(dist, model.target_at(doc, position));
            nll_count += 1;
            let Some(token) = doc.tokens.get(position) else { return };
            let target = token.vocab_id as usize;
            let target_oov = vocab.id(&token.surface).is_none();
            let (rank, top1) = match policy {
                OovPolicy::Miss => {
                    let word = |j: usize| !vocab.is_special(j as TokenId);
                    let rank = (!target_oov && word(target)).then(|| rank_among(dist, target, word));
                    (rank, top_k(dist, 1, word).first().copied())
                }
                OovPolicy::Masked => (Some(rank_of(dist, target)), top_k(dist, 1, |_| true).first().copied()),
            };
            records.push(PredictionRecord {
                doc_id: doc.id.clone(),
                position,
                target: token.vocab_id,
                target_surface: token.surface.clone(),
                target_oov,
                rank,
                top1: top1.map(|j| j as TokenId),
            });
        })?;
    }
    let metrics = PredictionMetrics::from_records(&records, ks, nll_total, nll_count)?;
    Ok(PredictionEvaluation { metrics, records })
}

/// Per-position CSV: `doc_id,position,target,rank` (`miss` for misses).
pub fn write_records_csv<W: Write>(mut out: W, records: &[PredictionRecord]) -> Result<()> {
    writeln!(out, "doc_id,position,target,rank")?;
    for r in records {
        let rank = r.rank.map_or_else(|| "miss".to_owned(), |k| k.to_string());
        writeln!(out, "{},{},{},{}", csv_field(&r.doc_id), r.position, csv_field(&r.target_surface), rank)?;
    }
    Ok(())
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

//! Inspection tools: ranked suggestion lists at a position, document
//! probabilities under rewritten numeric values, and per-word likelihood
//! ratios between two models.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize, Serializer};

use crate::corpus::{format_value, Document, EncodedDocument, KbTuple, KbValue, Slot, TokenId};
use crate::error::{Error, Result};
use crate::lm::{Ablation, LanguageModel};
use crate::numgrad::log_sum_exp;
use crate::predict::{csv_field, rank_of, top_k};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub word: String,
    pub probability: f64,
    pub rank: usize,
}

/// Rank of a watch word; serialized as the string `"oov"` when the word is
/// not in the vocabulary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WatchRank {
    Rank(usize),
    Oov,
}

impl Serialize for WatchRank {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            WatchRank::Rank(r) => s.serialize_u64(*r as u64),
            WatchRank::Oov => s.serialize_str("oov"),
        }
    }
}

impl std::fmt::Display for WatchRank {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WatchRank::Rank(r) => write!(f, "{r}"),
            WatchRank::Oov => f.write_str("oov"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WatchWord {
    pub word: String,
    pub rank: WatchRank,
    pub probability: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuggestionList {
    pub doc_id: String,
    pub position: usize,
    /// Surface actually found at `position` (`<eos>` at the end).
    pub target: String,
    pub suggestions: Vec<Suggestion>,
    pub watch: Vec<WatchWord>,
}

/// Top-`k` entries of the next-word distribution at `position`, given the
/// KB and the tokens strictly before it, plus the rank of every watch word.
pub fn suggestion_list(
    model: &LanguageModel,
    doc: &EncodedDocument,
    position: usize,
    k: usize,
    watch: &[String],
    ablation: Ablation,
) -> Result<SuggestionList> {
    if position > doc.len() {
        return Err(Error::InvalidConfig(format!(
            "position {position} outside document {} of {} tokens",
            doc.id,
            doc.len()
        )));
    }
    let state = model.state_after(&doc.kb, &doc.tokens[..position], ablation)?;
    let dist = model.distribution(&state);
    let vocab = &model.vocab;
    let suggestions = top_k(&dist, k, |_| true)
        .into_iter()
        .enumerate()
        .map(|(i, j)| Suggestion { word: vocab.surface(j as TokenId).to_owned(), probability: dist[j], rank: i + 1 })
        .collect();
    let watch = watch
        .iter()
        .map(|w| match vocab.id(w) {
            Some(id) => WatchWord {
                word: w.clone(),
                rank: WatchRank::Rank(rank_of(&dist, id as usize)),
                probability: Some(dist[id as usize]),
            },
            None => WatchWord { word: w.clone(), rank: WatchRank::Oov, probability: None },
        })
        .collect();
    let target =
        doc.tokens.get(position).map_or_else(|| vocab.surface(vocab.eos_id()).to_owned(), |t| t.surface.clone());
    Ok(SuggestionList { doc_id: doc.id.clone(), position, target, suggestions, watch })
}

/// A set of numeric values substituted into a document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueConfiguration {
    pub label: String,
    /// Attribute → value.
    pub values: BTreeMap<String, f64>,
}

/// Which word to place at a slot under which value configurations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubstitutionStudy {
    pub tokens: Vec<String>,
    pub kb: Vec<KbTuple>,
    /// In-text numerals rendering KB values; rewritten with them.
    #[serde(default)]
    pub numeric_slots: Vec<Slot>,
    /// Position of the word being substituted.
    pub slot: usize,
    pub candidates: Vec<String>,
    pub configurations: Vec<ValueConfiguration>,
}

impl SubstitutionStudy {
    pub fn for_document(
        doc: &Document,
        slot: usize,
        candidates: Vec<String>,
        configurations: Vec<ValueConfiguration>,
    ) -> Self {
        Self {
            tokens: doc.surfaces.clone(),
            kb: doc.kb.clone(),
            numeric_slots: doc.numeric_slots.clone(),
            slot,
            candidates,
            configurations,
        }
    }

    fn validate(&self, model: &LanguageModel) -> Result<()> {
        if self.candidates.is_empty() {
            return Err(Error::InvalidConfig("substitution study needs at least one candidate".into()));
        }
        if self.slot >= self.tokens.len() {
            return Err(Error::InvalidConfig(format!(
                "slot {} outside a document of {} tokens",
                self.slot,
                self.tokens.len()
            )));
        }
        if let Some(s) = self.numeric_slots.iter().find(|s| s.position >= self.tokens.len() || s.position == self.slot)
        {
            return Err(Error::InvalidConfig(format!("numeric slot at position {} is invalid", s.position)));
        }
        for c in &self.candidates {
            if !model.vocab.contains_word(c) {
                return Err(Error::OutOfVocabulary(c.clone()));
            }
        }
        for config in &self.configurations {
            if let Some((a, v)) = config.values.iter().find(|(_, v)| !v.is_finite()) {
                return Err(Error::InvalidConfig(format!("configuration {}: {a} = {v}", config.label)));
            }
        }
        Ok(())
    }

    /// The document with `config` applied and `candidate` at the slot.
    pub fn instantiate(&self, config: &ValueConfiguration, candidate: &str) -> Document {
        let mut tokens = self.tokens.clone();
        let mut kb = self.kb.clone();
        for (attribute, &value) in &config.values {
            match kb.iter_mut().find(|t| &t.attribute == attribute) {
                Some(t) => t.value = KbValue::Number(value),
                None => kb.push(KbTuple::number(attribute, value)),
            }
            for s in self.numeric_slots.iter().filter(|s| &s.attribute == attribute) {
                tokens[s.position] = format_value(value);
            }
        }
        tokens[self.slot] = candidate.to_owned();
        Document {
            id: format!("{}/{}", config.label, candidate),
            surfaces: tokens,
            kb,
            numeric_slots: self.numeric_slots.clone(),
            graded_slots: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubstitutionRow {
    pub label: String,
    pub values: BTreeMap<String, f64>,
    /// Document log probability per candidate.
    pub doc_log_probs: Vec<f64>,
    /// Document probabilities renormalized over the candidates.
    pub doc_probs: Vec<f64>,
    /// Next-word probability of each candidate at the slot.
    pub word_probs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubstitutionGrid {
    pub candidates: Vec<String>,
    pub rows: Vec<SubstitutionRow>,
}

pub fn substitution_study(
    model: &LanguageModel,
    study: &SubstitutionStudy,
    ablation: Ablation,
) -> Result<SubstitutionGrid> {
    study.validate(model)?;
    let mut rows = Vec::with_capacity(study.configurations.len());
    for config in &study.configurations {
        let mut doc_log_probs = Vec::with_capacity(study.candidates.len());
        let mut word_probs = Vec::with_capacity(study.candidates.len());
        for (i, candidate) in study.candidates.iter().enumerate() {
            let doc = study.instantiate(config, candidate).encode(&model.vocab);
            doc_log_probs.push(model.doc_log_probability(&doc, ablation)?);
            if i == 0 {
                // The context before the slot is the same for every candidate.
                let state = model.state_after(&doc.kb, &doc.tokens[..study.slot], ablation)?;
                let dist = model.distribution(&state);
                word_probs = study.candidates.iter().map(|c| dist[model.vocab.id(c).unwrap() as usize]).collect();
            }
        }
        let norm = log_sum_exp(&doc_log_probs);
        let doc_probs = doc_log_probs.iter().map(|lp| (lp - norm).exp()).collect();
        rows.push(SubstitutionRow {
            label: config.label.clone(),
            values: config.values.clone(),
            doc_log_probs,
            doc_probs,
            word_probs,
        });
    }
    Ok(SubstitutionGrid { candidates: study.candidates.clone(), rows })
}

/// Long-format CSV: `configuration,candidate,doc_log_prob,doc_prob,word_prob`.
pub fn write_grid_csv<W: Write>(mut out: W, grid: &SubstitutionGrid) -> Result<()> {
    writeln!(out, "configuration,candidate,doc_log_prob,doc_prob,word_prob")?;
    for row in &grid.rows {
        for (i, c) in grid.candidates.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{}",
                csv_field(&row.label),
                csv_field(c),
                row.doc_log_probs[i],
                row.doc_probs[i],
                row.word_probs[i]
            )?;
        }
    }
    Ok(())
}

/// Per-token `p_a / p_b`, closing `<eos>` last.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioSeries {
    pub doc_id: String,
    pub tokens: Vec<String>,
    pub log_ratios: Vec<f64>,
    pub ratios: Vec<f64>,
}

impl RatioSeries {
    /// `log Π ratio`, equal to `nll_b - nll_a`.
    pub fn log_product(&self) -> f64 {
        self.log_ratios.iter().sum()
    }
}

pub fn likelihood_ratio(
    model_a: &LanguageModel,
    model_b: &LanguageModel,
    doc: &Document,
    ablation_a: Ablation,
    ablation_b: Ablation,
) -> Result<RatioSeries> {
    if model_a.vocab.sha256() != model_b.vocab.sha256() {
        return Err(Error::VocabMismatch("likelihood ratio between models with different vocabularies".into()));
    }
    let encoded = doc.encode(&model_a.vocab);
    let pa = model_a.token_probabilities(&encoded, ablation_a)?;
    let pb = model_b.token_probabilities(&encoded, ablation_b)?;
    let log_ratios: Vec<f64> = pa.iter().zip(&pb).map(|(a, b)| a.ln() - b.ln()).collect();
    let ratios = log_ratios.iter().map(|l| l.exp()).collect();
    let mut tokens = doc.surfaces.clone();
    tokens.push(model_a.vocab.surface(model_a.vocab.eos_id()).to_owned());
    Ok(RatioSeries { doc_id: doc.id.clone(), tokens, log_ratios, ratios })
}

/// Two whitespace-separated columns per line (`position token ratio` after a
/// `#` header), directly plottable with gnuplot.
pub fn write_ratio_tsv<W: Write>(mut out: W, series: &RatioSeries) -> Result<()> {
    writeln!(out, "# position\ttoken\tratio")?;
    for (i, (t, r)) in series.tokens.iter().zip(&series.ratios).enumerate() {
        writeln!(out, "{i}\t{t}\t{r}")?;
    }
    Ok(())
}

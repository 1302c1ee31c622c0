//! Request and response types of the HTTP API and the transport-independent
//! handlers behind them. Every response is a pure function of the request
//! and the loaded checkpoints.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::complete::Lexicon;
use crate::corpus::{KbTuple, Token, TokenId};
use crate::error::Error;
use crate::lm::{load_model, Ablation, LanguageModel};
use crate::predict::top_k;
use crate::qualitative::{substitution_study, SubstitutionGrid, SubstitutionStudy, Suggestion};

/// File extension of checkpoints picked up by [`ModelRegistry::load_dir`].
pub const CHECKPOINT_EXT: &str = "ptlm";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictRequest {
    pub model_id: String,
    #[serde(default)]
    pub context_tokens: Vec<String>,
    #[serde(default)]
    pub kb: Vec<KbTuple>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub ablation: Ablation,
}

fn default_k() -> usize {
    5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuggestionResponse {
    pub model_id: String,
    pub ablation: Ablation,
    pub suggestions: Vec<Suggestion>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompleteRequest {
    pub model_id: String,
    #[serde(default)]
    pub context_tokens: Vec<String>,
    #[serde(default)]
    pub kb: Vec<KbTuple>,
    pub prefix: String,
    #[serde(default)]
    pub ablation: Ablation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompleteResponse {
    pub model_id: String,
    pub ablation: Ablation,
    pub suggestion: Option<String>,
    pub probability: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubstitutionRequest {
    pub model_id: String,
    #[serde(default)]
    pub ablation: Ablation,
    #[serde(flatten)]
    pub study: SubstitutionStudy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubstitutionResponse {
    pub model_id: String,
    pub ablation: Ablation,
    #[serde(flatten)]
    pub grid: SubstitutionGrid,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub model_id: String,
    pub variant: String,
    pub conditional: bool,
    pub grounded: bool,
    pub dim: usize,
    pub vocab_size: usize,
    pub vocab_sha256: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ServiceError {
    NotFound(String),
    BadRequest(String),
    Internal(String),
}

impl ServiceError {
    pub fn status(&self) -> u16 {
        match self {
            ServiceError::NotFound(_) => 404,
            ServiceError::BadRequest(_) => 400,
            ServiceError::Internal(_) => 500,
        }
    }

    /// `{"error": {"kind": ..., "message": ...}}`
    pub fn body(&self) -> serde_json::Value {
        let (kind, message) = match self {
            ServiceError::NotFound(m) => ("not_found", m),
            ServiceError::BadRequest(m) => ("bad_request", m),
            ServiceError::Internal(m) => ("internal", m),
        };
        serde_json::json!({ "error": { "kind": kind, "message": message } })
    }
}

impl fmt::Display for ServiceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ServiceError::NotFound(m) | ServiceError::BadRequest(m) | ServiceError::Internal(m) => f.write_str(m),
        }
    }
}

impl From<Error> for ServiceError {
    fn from(e: Error) -> Self {
        match e {
            Error::NonFinite(_) | Error::Io(_) | Error::Checkpoint(_) => ServiceError::Internal(e.to_string()),
            other => ServiceError::BadRequest(other.to_string()),
        }
    }
}

/// Decodes a JSON body; serde's message names the offending field.
pub fn parse_body<T: DeserializeOwned>(body: &[u8]) -> Result<T, ServiceError> {
    serde_json::from_slice(body).map_err(|e| ServiceError::BadRequest(format!("invalid request body: {e}")))
}

struct Entry {
    model: LanguageModel,
    lexicon: Lexicon,
}

/// Loaded checkpoints by id. Immutable once built.
#[derive(Clone, Default)]
pub struct ModelRegistry {
    models: BTreeMap<String, Arc<Entry>>,
}

impl ModelRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: impl Into<String>, model: LanguageModel) {
        let lexicon = Lexicon::new(&model.vocab);
        self.models.insert(id.into(), Arc::new(Entry { model, lexicon }));
    }

    /// Loads every `*.ptlm` file of `dir`; the id is the file stem.
    pub fn load_dir(dir: &Path) -> crate::Result<Self> {
        let mut registry = Self::new();
        let mut paths: Vec<_> = std::fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
        paths.sort();
        for path in paths {
            if path.extension().is_some_and(|e| e == CHECKPOINT_EXT) {
                let Some(id) = path.file_stem().and_then(|s| s.to_str()) else { continue };
                log::info!("loading model {id} from {}", path.display());
                registry.insert(id, load_model(&path)?);
            }
        }
        Ok(registry)
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    fn entry(&self, id: &str) -> Result<&Entry, ServiceError> {
        self.models.get(id).map(|e| &**e).ok_or_else(|| ServiceError::NotFound(format!("unknown model_id {id:?}")))
    }

    pub fn model(&self, id: &str) -> Option<&LanguageModel> {
        self.models.get(id).map(|e| &e.model)
    }

    pub fn models(&self) -> Vec<ModelInfo> {
        self.models
            .iter()
            .map(|(id, e)| {
                let c = &e.model.config;
                ModelInfo {
                    model_id: id.clone(),
                    variant: c.variant().name().to_owned(),
                    conditional: c.conditional,
                    grounded: c.grounded,
                    dim: c.dim,
                    vocab_size: e.model.vocab.len(),
                    vocab_sha256: e.model.vocab.sha256(),
                }
            })
            .collect()
    }

    fn next_word_distribution(
        model: &LanguageModel,
        context: &[String],
        kb: &[KbTuple],
        ablation: Ablation,
    ) -> Result<Vec<f64>, ServiceError> {
        let tokens: Vec<Token> = context.iter().map(|s| model.vocab.encode(s)).collect();
        let state = model.state_after(kb, &tokens, ablation)?;
        Ok(model.distribution(&state))
    }

    pub fn predict(&self, req: &PredictRequest) -> Result<SuggestionResponse, ServiceError> {
        let entry = self.entry(&req.model_id)?;
        if req.k == 0 {
            return Err(ServiceError::BadRequest("k must be at least 1".into()));
        }
        let model = &entry.model;
        let dist = Self::next_word_distribution(model, &req.context_tokens, &req.kb, req.ablation)?;
        let suggestions = top_k(&dist, req.k, |j| !model.vocab.is_special(j as TokenId))
            .into_iter()
            .enumerate()
            .map(|(i, j)| Suggestion {
                word: model.vocab.surface(j as TokenId).to_owned(),
                probability: dist[j],
                rank: i + 1,
            })
            .collect();
        Ok(SuggestionResponse { model_id: req.model_id.clone(), ablation: req.ablation, suggestions })
    }

    pub fn complete(&self, req: &CompleteRequest) -> Result<CompleteResponse, ServiceError> {
        let entry = self.entry(&req.model_id)?;
        if req.prefix.is_empty() {
            return Err(ServiceError::BadRequest("prefix must not be empty".into()));
        }
        let dist = Self::next_word_distribution(&entry.model, &req.context_tokens, &req.kb, req.ablation)?;
        let best = entry.lexicon.best_match(&req.prefix, &dist);
        Ok(CompleteResponse {
            model_id: req.model_id.clone(),
            ablation: req.ablation,
            suggestion: best.map(|(w, _)| w.to_owned()),
            probability: best.map(|(_, id)| dist[id as usize]),
        })
    }

    pub fn substitution(&self, req: &SubstitutionRequest) -> Result<SubstitutionResponse, ServiceError> {
        let entry = self.entry(&req.model_id)?;
        let grid = substitution_study(&entry.model, &req.study, req.ablation)?;
        Ok(SubstitutionResponse { model_id: req.model_id.clone(), ablation: req.ablation, grid })
    }
}

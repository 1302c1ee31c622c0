//! Checkpoint container.
//!
//! ```text
//! magic      4 bytes   "PTLM"
//! header_len u32 LE
//! header     JSON      {"version", "config", "vocab_sha256", "vocab"}
//! arrays     repeated, in declaration order:
//!     name_len u32 LE, name (UTF-8),
//!     ndim u32 LE, dims u64 LE × ndim,
//!     values f64 LE × Π dims
//! sha256     32 bytes  digest of everything above
//! ```
//!
//! `vocab` is the vocabulary file content; loading fails when its hash
//! disagrees with `vocab_sha256`.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::config::ModelConfig;
use super::model::{LanguageModel, Weights};
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"PTLM";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    config: ModelConfig,
    vocab_sha256: String,
    vocab: Value,
}

fn corrupt(what: impl std::fmt::Display) -> Error {
    Error::Checkpoint(what.to_string())
}

pub fn to_bytes(model: &LanguageModel) -> Result<Vec<u8>> {
    let header = Header {
        version: CHECKPOINT_VERSION,
        config: model.config.clone(),
        vocab_sha256: model.vocab.sha256(),
        vocab: model.vocab.to_json(),
    };
    let header = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(header.len() + 8 + model.weights.param_count() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for array in model.weights.arrays() {
        out.extend_from_slice(&(array.name.len() as u32).to_le_bytes());
        out.extend_from_slice(array.name.as_bytes());
        out.extend_from_slice(&(array.shape.len() as u32).to_le_bytes());
        for dim in &array.shape {
            out.extend_from_slice(&(*dim as u64).to_le_bytes());
        }
        for v in array.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    Ok(out)
}

struct Cursor<'a>(&'a [u8]);

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.0.len() < n {
            return Err(corrupt("truncated file"));
        }
        let (head, rest) = self.0.split_at(n);
        self.0 = rest;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<LanguageModel> {
    if bytes.get(..4) != Some(MAGIC.as_slice()) {
        return Err(corrupt("not a checkpoint (bad magic)"));
    }
    let Some(body_len) = bytes.len().checked_sub(32) else { return Err(corrupt("truncated file")) };
    let (body, digest) = bytes.split_at(body_len);
    if Sha256::digest(body).as_slice() != digest {
        return Err(corrupt("checksum mismatch"));
    }
    let mut cur = Cursor(&body[4..]);
    let header_len = cur.u32()? as usize;
    let header: Header = serde_json::from_slice(cur.take(header_len)?).map_err(|e| corrupt(format!("header: {e}")))?;
    if header.version != CHECKPOINT_VERSION {
        return Err(corrupt(format!("unsupported version {}", header.version)));
    }
    let vocab = Vocabulary::from_json(&header.vocab)?;
    if vocab.sha256() != header.vocab_sha256 {
        return Err(Error::VocabMismatch("embedded vocabulary does not match its hash".into()));
    }
    header.config.validate()?;
    let mut weights = Weights::init(&header.config, vocab.len());
    let expected: Vec<(String, Vec<usize>)> =
        weights.arrays().iter().map(|a| (a.name.to_owned(), a.shape.clone())).collect();
    for ((name, shape), slot) in expected.iter().zip(weights.arrays_mut()) {
        let name_len = cur.u32()? as usize;
        let found = std::str::from_utf8(cur.take(name_len)?).map_err(|_| corrupt("array name is not UTF-8"))?;
        if found != name {
            return Err(corrupt(format!("expected array {name}, found {found}")));
        }
        let ndim = cur.u32()? as usize;
        let dims = (0..ndim).map(|_| cur.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        if &dims != shape {
            return Err(corrupt(format!("array {name} has shape {dims:?}, expected {shape:?}")));
        }
        let raw = cur.take(slot.len() * 8)?;
        for (v, chunk) in slot.iter_mut().zip(raw.chunks_exact(8)) {
            *v = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        }
    }
    if !cur.0.is_empty() {
        return Err(corrupt(format!("{} trailing bytes", cur.0.len())));
    }
    Ok(LanguageModel { config: header.config, vocab, weights })
}

/// Writes atomically: a complete checkpoint replaces the old file or nothing
/// changes.
pub fn save_model(model: &LanguageModel, path: &Path) -> Result<()> {
    let bytes = to_bytes(model)?;
    crate::write_atomic(path, &bytes)
}

pub fn load_model(path: &Path) -> Result<LanguageModel> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    from_bytes(&bytes)
}

/// Loads a checkpoint and insists it was trained against `vocab`.
pub fn load_model_for(path: &Path, vocab: &Vocabulary) -> Result<LanguageModel> {
    let model = load_model(path)?;
    if model.vocab.sha256() != vocab.sha256() {
        return Err(Error::VocabMismatch(format!("{} was trained with a different vocabulary", path.display())));
    }
    Ok(model)
}

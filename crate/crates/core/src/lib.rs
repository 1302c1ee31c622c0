//! Word prediction and word completion with small LSTM language models
//! that can be conditioned on a knowledge base and grounded on the numeric
//! values mentioned in the text.
//!
//! * [`corpus`]: documents, KB lexicalization, vocabulary masking and a
//!   synthetic report generator.
//! * [`numgrad`]: the hand-differentiated numerics.
//! * [`lm`]: model variants, training, perplexity, checkpoints.
//! * [`predict`]: MRR / Recall@k evaluation.
//! * [`complete`]: the simulated typist, keystroke savings and bounds.
//! * [`qualitative`]: suggestion lists, value-substitution studies and
//!   likelihood-ratio series.
//! * [`service`]: request handlers behind the HTTP API.
//! * [`report`]: JSON reports and comparison tables.

pub mod complete;
pub mod corpus;
pub mod error;
pub mod lm;
pub mod numgrad;
pub mod predict;
pub mod qualitative;
pub mod report;
pub mod service;

use std::path::Path;

pub use error::{Error, Result};

/// Lower-case hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path.file_name().ok_or_else(|| Error::Format(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(".partial");
    let tmp = path.with_file_name(tmp_name);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

//! Documents, knowledge bases, vocabulary masking and the synthetic report
//! generator.

mod generator;
mod kb;
mod numeric;
mod vocab;

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use generator::{generate_corpus, AttributeKind, AttributeSpec, GeneratorConfig, GradeBand, GradeRule};
pub use kb::{lexicalize_kb, KbTuple, KbValue};
pub use numeric::{format_value, is_numeral, numeric_value, parse_numeric};
pub use vocab::{build_vocabulary, Token, TokenId, Vocabulary, EOS, NUM, UNK};

/// Links a token position to the KB attribute it renders or depends on.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub attribute: String,
    pub position: usize,
}

/// A whitespace-tokenized report with its knowledge base.
///
/// `numeric_slots` mark the in-text numerals that render a KB value;
/// `graded_slots` mark words whose choice depends on a KB value.
#[derive(Clone, Debug, PartialEq)]
pub struct Document {
    pub id: String,
    pub surfaces: Vec<String>,
    pub kb: Vec<KbTuple>,
    pub numeric_slots: Vec<Slot>,
    pub graded_slots: Vec<Slot>,
}

#[derive(Serialize, Deserialize)]
struct DocumentRecord {
    id: String,
    text: String,
    kb: Vec<KbTuple>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    numeric_slots: Vec<Slot>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    graded_slots: Vec<Slot>,
}

impl Document {
    pub fn from_text(id: &str, text: &str, kb: Vec<KbTuple>) -> Self {
        Self {
            id: id.to_owned(),
            surfaces: text.split_whitespace().map(str::to_owned).collect(),
            kb,
            numeric_slots: Vec::new(),
            graded_slots: Vec::new(),
        }
    }

    pub fn raw_text(&self) -> String {
        self.surfaces.join(" ")
    }

    pub fn encode(&self, vocab: &Vocabulary) -> EncodedDocument {
        EncodedDocument {
            id: self.id.clone(),
            tokens: self.surfaces.iter().map(|s| vocab.encode(s)).collect(),
            kb: self.kb.clone(),
        }
    }

    fn to_record(&self) -> DocumentRecord {
        DocumentRecord {
            id: self.id.clone(),
            text: self.raw_text(),
            kb: self.kb.clone(),
            numeric_slots: self.numeric_slots.clone(),
            graded_slots: self.graded_slots.clone(),
        }
    }

    fn from_record(r: DocumentRecord) -> Result<Self> {
        let mut doc = Self::from_text(&r.id, &r.text, r.kb);
        for slot in r.numeric_slots.iter().chain(&r.graded_slots) {
            if slot.position >= doc.surfaces.len() {
                return Err(Error::Format(format!("document {}: slot position {} out of range", r.id, slot.position)));
            }
        }
        doc.numeric_slots = r.numeric_slots;
        doc.graded_slots = r.graded_slots;
        Ok(doc)
    }
}

/// A document masked against a vocabulary.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedDocument {
    pub id: String,
    pub tokens: Vec<Token>,
    pub kb: Vec<KbTuple>,
}

impl EncodedDocument {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

pub fn encode_all(docs: &[Document], vocab: &Vocabulary) -> Vec<EncodedDocument> {
    docs.iter().map(|d| d.encode(vocab)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusSplit {
    pub train: Vec<Document>,
    pub dev: Vec<Document>,
    pub test: Vec<Document>,
    pub seed: u64,
}

/// Writes one JSON object per line.
pub fn write_jsonl<W: Write>(mut out: W, docs: &[Document]) -> Result<()> {
    for doc in docs {
        serde_json::to_writer(&mut out, &doc.to_record())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: DocumentRecord =
            serde_json::from_str(&line).map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1)))?;
        docs.push(Document::from_record(record)?);
    }
    Ok(docs)
}

pub fn save_documents(path: &Path, docs: &[Document]) -> Result<()> {
    let mut buf = Vec::new();
    write_jsonl(&mut buf, docs)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_documents(path: &Path) -> Result<Vec<Document>> {
    let file = std::fs::File::open(path)?;
    read_jsonl(std::io::BufReader::new(file))
}

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::numeric::numeric_value;
use super::Document;
use crate::error::{Error, Result};

pub const NUM: &str = "<num>";
pub const UNK: &str = "<unk>";
pub const EOS: &str = "<eos>";

const VOCAB_FILE_VERSION: u32 = 1;

/// Vocabulary index.
pub type TokenId = u32;

/// A surface form after masking, with its numeric value extracted from the
/// original (pre-masking) surface.
#[derive(Clone, Debug, PartialEq)]
pub struct Token {
    pub surface: String,
    pub vocab_id: TokenId,
    pub numeric_value: Option<f64>,
}

impl Token {
    pub fn is_numeric(&self) -> bool {
        self.numeric_value.is_some()
    }
}

/// The `V` most frequent training surfaces followed by the `<num>`, `<unk>`
/// and `<eos>` specials.
#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    entries: Vec<String>,
    index: HashMap<String, TokenId>,
    num: TokenId,
    unk: TokenId,
    eos: TokenId,
}

#[derive(Serialize, Deserialize)]
struct Specials {
    num: TokenId,
    unk: TokenId,
    eos: TokenId,
}

#[derive(Serialize, Deserialize)]
struct FileHeader {
    version: u32,
    specials: Specials,
}

impl Vocabulary {
    /// Builds a vocabulary from entries in id order. The three specials must
    /// be present and every entry unique.
    pub fn from_entries(entries: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(entries.len());
        for (id, entry) in entries.iter().enumerate() {
            if index.insert(entry.clone(), id as TokenId).is_some() {
                return Err(Error::Format(format!("duplicate vocabulary entry {entry:?}")));
            }
        }
        let special = |s: &str| index.get(s).copied().ok_or_else(|| Error::Format(format!("vocabulary lacks {s}")));
        let (num, unk, eos) = (special(NUM)?, special(UNK)?, special(EOS)?);
        Ok(Self { entries, index, num, unk, eos })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    pub fn id(&self, surface: &str) -> Option<TokenId> {
        self.index.get(surface).copied()
    }

    pub fn surface(&self, id: TokenId) -> &str {
        &self.entries[id as usize]
    }

    pub fn num_id(&self) -> TokenId {
        self.num
    }

    pub fn unk_id(&self) -> TokenId {
        self.unk
    }

    pub fn eos_id(&self) -> TokenId {
        self.eos
    }

    /// Mask symbols are never shown to a user as suggestions.
    pub fn is_special(&self, id: TokenId) -> bool {
        id == self.num || id == self.unk || id == self.eos
    }

    /// Whether `surface` is a real (non-special) vocabulary word.
    pub fn contains_word(&self, surface: &str) -> bool {
        self.id(surface).is_some_and(|id| !self.is_special(id))
    }

    /// Masks `surface`: in-vocabulary surfaces keep their id, OOV numerals
    /// become `<num>`, anything else `<unk>`.
    pub fn encode(&self, surface: &str) -> Token {
        let numeric_value = numeric_value(surface);
        let vocab_id = match self.id(surface) {
            Some(id) => id,
            None if numeric_value.is_some() => self.num,
            None => self.unk,
        };
        Token { surface: surface.to_owned(), vocab_id, numeric_value }
    }

    /// Token fed at the first position of every document.
    pub fn bos(&self) -> Token {
        Token { surface: EOS.to_owned(), vocab_id: self.eos, numeric_value: None }
    }

    /// SHA-256 over every entry followed by a line feed, hex encoded.
    pub fn sha256(&self) -> String {
        let mut hasher = Sha256::new();
        for entry in &self.entries {
            hasher.update(entry.as_bytes());
            hasher.update(b"\n");
        }
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// JSON array: a header object followed by the surfaces in id order.
    pub fn to_json(&self) -> Value {
        let header = FileHeader {
            version: VOCAB_FILE_VERSION,
            specials: Specials { num: self.num, unk: self.unk, eos: self.eos },
        };
        let mut items = vec![serde_json::to_value(header).expect("header serializes")];
        items.extend(self.entries.iter().cloned().map(Value::String));
        Value::Array(items)
    }

    pub fn from_json(value: &Value) -> Result<Self> {
        let items = value.as_array().ok_or_else(|| Error::Format("vocabulary file must be a JSON array".into()))?;
        let (header, rest) =
            items.split_first().ok_or_else(|| Error::Format("vocabulary file lacks its header".into()))?;
        let header: FileHeader = serde_json::from_value(header.clone())?;
        if header.version != VOCAB_FILE_VERSION {
            return Err(Error::Format(format!("unsupported vocabulary version {}", header.version)));
        }
        let entries = rest
            .iter()
            .map(|v| {
                v.as_str().map(str::to_owned).ok_or_else(|| Error::Format("vocabulary entries must be strings".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        let vocab = Self::from_entries(entries)?;
        let s = &header.specials;
        if (s.num, s.unk, s.eos) != (vocab.num, vocab.unk, vocab.eos) {
            return Err(Error::Format("vocabulary header disagrees with special ids".into()));
        }
        Ok(vocab)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(&self.to_json())? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let value: Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Self::from_json(&value)
    }
}

/// The `budget` most frequent surfaces of the training documents (ties
/// broken by ascending surface) plus the three specials.
pub fn build_vocabulary(train: &[Document], budget: usize) -> Result<Vocabulary> {
    if budget == 0 {
        return Err(Error::InvalidConfig("vocabulary budget must be at least 1".into()));
    }
    if train.is_empty() || train.iter().all(|d| d.surfaces.is_empty()) {
        return Err(Error::EmptyCorpus);
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for surface in train.iter().flat_map(|d| d.surfaces.iter()) {
        if ![NUM, UNK, EOS].contains(&surface.as_str()) {
            *counts.entry(surface).or_default() += 1;
        }
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let mut entries: Vec<String> = ranked.into_iter().take(budget).map(|(s, _)| s.to_owned()).collect();
    entries.extend([NUM, UNK, EOS].map(str::to_owned));
    Vocabulary::from_entries(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(text: &str) -> Document {
        Document::from_text("d", text, Vec::new())
    }

    #[test]
    fn single_most_frequent() {
        let v = build_vocabulary(&[doc("a a b")], 1).unwrap();
        assert_eq!(v.entries(), ["a", NUM, UNK, EOS]);
    }

    #[test]
    fn ties_break_lexicographically() {
        let v = build_vocabulary(&[doc("b a")], 2).unwrap();
        assert_eq!(&v.entries()[..2], ["a", "b"]);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(matches!(build_vocabulary(&[], 5), Err(Error::EmptyCorpus)));
        assert!(matches!(build_vocabulary(&[doc("")], 5), Err(Error::EmptyCorpus)));
        assert!(build_vocabulary(&[doc("a")], 0).is_err());
    }

    #[test]
    fn masking_rules() {
        let v = build_vocabulary(&[doc("the the cat")], 1).unwrap();
        let t = v.encode("57");
        assert_eq!((t.vocab_id, t.numeric_value), (v.num_id(), Some(57.0)));
        let t = v.encode("zebra");
        assert_eq!((t.vocab_id, t.numeric_value), (v.unk_id(), None));
        let t = v.encode("the");
        assert_eq!((t.vocab_id, t.numeric_value), (v.id("the").unwrap(), None));
    }

    #[test]
    fn in_vocab_numeral_keeps_id_and_value() {
        let v = build_vocabulary(&[doc("61 61 x")], 1).unwrap();
        let t = v.encode("61");
        assert_eq!(t.vocab_id, 0);
        assert_eq!(t.numeric_value, Some(61.0));
    }

    #[test]
    fn encode_is_idempotent_on_masks() {
        let v = build_vocabulary(&[doc("a")], 1).unwrap();
        for s in [NUM, UNK, EOS, "a", "zz", "3"] {
            let once = v.encode(s);
            assert_eq!(v.encode(v.surface(once.vocab_id)).vocab_id, once.vocab_id);
        }
    }

    #[test]
    fn json_file_round_trip() {
        let v = build_vocabulary(&[doc("x y y z")], 10).unwrap();
        let json = v.to_json();
        assert_eq!(json[0]["version"], 1);
        assert_eq!(Vocabulary::from_json(&json).unwrap(), v);
        assert_eq!(v.sha256().len(), 64);
    }
}

use serde::{Deserialize, Serialize};

use super::numeric::format_value;
use crate::error::{Error, Result};

/// Value of a knowledge-base attribute. Serialized as a JSON string, number
/// or `null`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KbValue {
    Number(f64),
    Text(String),
    Missing,
}

impl KbValue {
    pub fn is_missing(&self) -> bool {
        matches!(self, KbValue::Missing)
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            KbValue::Number(v) => Some(*v),
            _ => None,
        }
    }

    /// Surface tokens for the value; `None` when missing.
    pub fn render(&self) -> Option<Vec<String>> {
        match self {
            KbValue::Number(v) => Some(vec![format_value(*v)]),
            KbValue::Text(s) => Some(s.split_whitespace().map(str::to_owned).collect()),
            KbValue::Missing => None,
        }
    }
}

/// One `<attribute, value>` pair of a document's knowledge base.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawKbTuple")]
pub struct KbTuple {
    pub attribute: String,
    pub value: KbValue,
}

#[derive(Deserialize)]
struct RawKbTuple {
    attribute: String,
    value: KbValue,
}

impl TryFrom<RawKbTuple> for KbTuple {
    type Error = Error;

    fn try_from(raw: RawKbTuple) -> Result<Self> {
        KbTuple::new(raw.attribute, raw.value)
    }
}

impl KbTuple {
    pub fn new(attribute: impl Into<String>, value: KbValue) -> Result<Self> {
        let attribute = attribute.into();
        if attribute.is_empty() || attribute.chars().any(char::is_whitespace) {
            return Err(Error::Format(format!("invalid KB attribute name {attribute:?}")));
        }
        Ok(Self { attribute, value })
    }

    pub fn number(attribute: &str, value: f64) -> Self {
        Self::new(attribute, KbValue::Number(value)).expect("valid attribute")
    }

    pub fn text(attribute: &str, value: &str) -> Self {
        Self::new(attribute, KbValue::Text(value.to_owned())).expect("valid attribute")
    }

    pub fn missing(attribute: &str) -> Self {
        Self::new(attribute, KbValue::Missing).expect("valid attribute")
    }
}

/// Renders a knowledge base as the token stream `attribute : value ...`,
/// skipping tuples whose value is missing.
pub fn lexicalize_kb(kb: &[KbTuple]) -> Vec<String> {
    let mut out = Vec::with_capacity(kb.len() * 3);
    for tuple in kb {
        if let Some(value) = tuple.value.render() {
            out.push(tuple.attribute.clone());
            out.push(":".to_owned());
            out.extend(value);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexicalizes_attribute_colon_value() {
        assert_eq!(lexicalize_kb(&[KbTuple::number("lv_size", 61.0)]), ["lv_size", ":", "61"]);
        assert!(lexicalize_kb(&[]).is_empty());
    }

    #[test]
    fn missing_values_are_skipped() {
        let kb = [KbTuple::missing("ef"), KbTuple::number("lv_size", 61.0)];
        assert_eq!(lexicalize_kb(&kb), ["lv_size", ":", "61"]);
    }

    #[test]
    fn missing_is_not_empty_string() {
        let missing: KbTuple = serde_json::from_str(r#"{"attribute":"a","value":null}"#).unwrap();
        let empty: KbTuple = serde_json::from_str(r#"{"attribute":"a","value":""}"#).unwrap();
        assert_eq!(missing.value, KbValue::Missing);
        assert_eq!(empty.value, KbValue::Text(String::new()));
        assert_ne!(missing, empty);
        assert_eq!(serde_json::to_string(&missing).unwrap(), r#"{"attribute":"a","value":null}"#);
    }

    #[test]
    fn rejects_bad_attribute_names() {
        assert!(KbTuple::new("", KbValue::Missing).is_err());
        assert!(KbTuple::new("lv size", KbValue::Missing).is_err());
        assert!(serde_json::from_str::<KbTuple>(r#"{"attribute":"a b","value":1}"#).is_err());
        assert!(KbTuple::new("lv_size", KbValue::Missing).is_ok());
    }
}

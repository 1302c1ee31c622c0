//! Deterministic templated echocardiography-style reports.
//!
//! Every document draws a knowledge base from the configured schema and
//! renders it through fixed sentence templates. Graded words ("non",
//! "mildly", "severely", ...) are functions of a KB measurement through a
//! [`GradeRule`], optionally perturbed with probability `grade_noise`.
//! Some graded words precede the numeral they depend on, so only the KB can
//! explain them; others follow it.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::kb::{KbTuple, KbValue};
use super::numeric::format_value;
use super::{CorpusSplit, Document, Slot};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum AttributeKind {
    Integer {
        min: i64,
        max: i64,
    },
    /// Sampled on a grid of tenths.
    Decimal {
        min: f64,
        max: f64,
    },
    Choice {
        options: Vec<String>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    pub kind: AttributeKind,
    #[serde(default)]
    pub missing_rate: f64,
}

/// `word` applies to values below `upper` (or up to it when `inclusive`);
/// the last band of a rule has no upper bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradeBand {
    pub word: String,
    pub upper: Option<f64>,
    #[serde(default)]
    pub inclusive: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradeRule {
    pub attribute: String,
    pub bands: Vec<GradeBand>,
}

impl GradeRule {
    pub fn grade(&self, value: f64) -> &str {
        self.bands
            .iter()
            .find(|b| match b.upper {
                Some(u) if b.inclusive => value <= u,
                Some(u) => value < u,
                None => true,
            })
            .or(self.bands.last())
            .map(|b| b.word.as_str())
            .unwrap_or("")
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.bands.iter().map(|b| b.word.as_str())
    }

    fn validate(&self) -> Result<()> {
        let ok = self.bands.last().is_some_and(|b| b.upper.is_none())
            && self.bands[..self.bands.len() - 1].iter().all(|b| b.upper.is_some())
            && self.bands.iter().all(|b| !b.word.is_empty() && !b.word.contains(char::is_whitespace));
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("malformed grade rule for {}", self.attribute)))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub n_documents: usize,
    pub train_fraction: f64,
    pub dev_fraction: f64,
    pub schema: Vec<AttributeSpec>,
    pub rules: Vec<GradeRule>,
    /// Probability that a graded word is drawn uniformly from its rule
    /// instead of following the measurement.
    pub grade_noise: f64,
    /// Probability of a free-text comment sentence with rare words.
    pub comment_rate: f64,
}

fn band(word: &str, upper: Option<f64>, inclusive: bool) -> GradeBand {
    GradeBand { word: word.to_owned(), upper, inclusive }
}

fn choice(options: &[&str]) -> AttributeKind {
    AttributeKind::Choice { options: options.iter().map(|s| s.to_string()).collect() }
}

fn attr(name: &str, kind: AttributeKind, missing_rate: f64) -> AttributeSpec {
    AttributeSpec { name: name.to_owned(), kind, missing_rate }
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        let graded = |attribute: &str, bands: Vec<GradeBand>| GradeRule { attribute: attribute.to_owned(), bands };
        Self {
            n_documents: 1000,
            train_fraction: 0.8,
            dev_fraction: 0.1,
            schema: vec![
                attr("indication", choice(&["breathlessness", "murmur", "palpitations", "syncope", "follow-up"]), 0.1),
                attr("age", AttributeKind::Integer { min: 18, max: 95 }, 0.05),
                attr("sex", choice(&["male", "female"]), 0.05),
                attr("lvidd", AttributeKind::Integer { min: 38, max: 72 }, 0.05),
                attr("lv_ef", AttributeKind::Integer { min: 15, max: 75 }, 0.05),
                attr("ivsd", AttributeKind::Decimal { min: 0.6, max: 1.9 }, 0.05),
                attr("la_diameter", AttributeKind::Decimal { min: 2.5, max: 5.5 }, 0.05),
                attr("mr", choice(&["no", "trivial", "mild", "moderate", "severe"]), 0.05),
                attr("rhythm", choice(&["sinus", "af"]), 0.05),
            ],
            rules: vec![
                graded(
                    "lv_ef",
                    vec![
                        band("severely", Some(40.0), false),
                        band("mildly", Some(55.0), true),
                        band("non", None, false),
                    ],
                ),
                graded(
                    "lvidd",
                    vec![
                        band("non", Some(56.0), true),
                        band("mildly", Some(62.0), true),
                        band("severely", None, false),
                    ],
                ),
                graded(
                    "ivsd",
                    vec![band("no", Some(1.1), true), band("mild", Some(1.4), true), band("severe", None, false)],
                ),
                graded(
                    "la_diameter",
                    vec![band("non", Some(4.0), true), band("mildly", Some(4.6), true), band("severely", None, false)],
                ),
            ],
            grade_noise: 0.05,
            comment_rate: 0.3,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let invalid = |m: &str| Err(Error::InvalidConfig(m.to_owned()));
        if self.n_documents == 0 {
            return invalid("n_documents must be positive");
        }
        if self.schema.is_empty() {
            return invalid("attribute schema is empty");
        }
        let fractions = [self.train_fraction, self.dev_fraction, self.grade_noise, self.comment_rate];
        if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) || self.train_fraction + self.dev_fraction > 1.0 {
            return invalid("fractions and rates must lie in [0, 1]");
        }
        for spec in &self.schema {
            KbTuple::new(spec.name.clone(), KbValue::Missing)?;
            let ok = match &spec.kind {
                AttributeKind::Integer { min, max } => min <= max,
                AttributeKind::Decimal { min, max } => min <= max && min.is_finite() && max.is_finite(),
                AttributeKind::Choice { options } => {
                    !options.is_empty() && options.iter().all(|o| !o.is_empty() && !o.contains(char::is_whitespace))
                }
            };
            if !ok || !(0.0..=1.0).contains(&spec.missing_rate) {
                return Err(Error::InvalidConfig(format!("bad attribute spec {}", spec.name)));
            }
        }
        for rule in &self.rules {
            rule.validate()?;
            if !self.schema.iter().any(|s| s.name == rule.attribute) {
                return Err(Error::InvalidConfig(format!("rule for unknown attribute {}", rule.attribute)));
            }
        }
        Ok(())
    }

    pub fn rule(&self, attribute: &str) -> Option<&GradeRule> {
        self.rules.iter().find(|r| r.attribute == attribute)
    }
}

const IMAGE_QUALITY: [&str; 3] = ["good", "adequate", "poor"];

const COMMENT_WORDS: [&str; 60] = [
    "previous",
    "study",
    "compared",
    "unchanged",
    "since",
    "last",
    "scan",
    "limited",
    "views",
    "patient",
    "obese",
    "ventilated",
    "agitated",
    "contrast",
    "used",
    "apical",
    "windows",
    "subcostal",
    "only",
    "difficult",
    "echo",
    "requested",
    "by",
    "cardiology",
    "team",
    "clinic",
    "ward",
    "urgent",
    "routine",
    "review",
    "pacemaker",
    "lead",
    "seen",
    "right",
    "heart",
    "normal",
    "size",
    "aortic",
    "root",
    "mildly",
    "prosthetic",
    "valve",
    "functioning",
    "well",
    "gradient",
    "low",
    "high",
    "pressure",
    "estimated",
    "pulmonary",
    "tricuspid",
    "regurgitation",
    "trace",
    "ivc",
    "collapses",
    "small",
    "thrombus",
    "excluded",
    "bubble",
    "negative",
];

struct Builder<'a> {
    surfaces: Vec<String>,
    numeric_slots: Vec<Slot>,
    graded_slots: Vec<Slot>,
    values: BTreeMap<&'a str, KbValue>,
    config: &'a GeneratorConfig,
}

impl<'a> Builder<'a> {
    fn words(&mut self, text: &str) {
        self.surfaces.extend(text.split_whitespace().map(str::to_owned));
    }

    fn numeral(&mut self, attribute: &str, value: f64) {
        self.numeric_slots.push(Slot { attribute: attribute.to_owned(), position: self.surfaces.len() });
        self.surfaces.push(format_value(value));
    }

    fn graded(&mut self, attribute: &str, value: f64, rng: &mut ChaCha8Rng) {
        let rule = self.config.rule(attribute).expect("graded templates require a rule");
        let word = if rng.random_bool(self.config.grade_noise) {
            rule.bands.choose(rng).map(|b| b.word.clone()).unwrap_or_default()
        } else {
            rule.grade(value).to_owned()
        };
        self.graded_slots.push(Slot { attribute: attribute.to_owned(), position: self.surfaces.len() });
        self.surfaces.push(word);
    }

    fn number(&self, attribute: &str) -> Option<f64> {
        self.values.get(attribute).and_then(KbValue::as_number)
    }

    fn text(&self, attribute: &str) -> Option<String> {
        match self.values.get(attribute) {
            Some(KbValue::Text(s)) => Some(s.clone()),
            _ => None,
        }
    }

    fn present(&self, attribute: &str) -> bool {
        self.values.contains_key(attribute)
    }

    fn has_rule(&self, attribute: &str) -> bool {
        self.config.rule(attribute).is_some()
    }
}

fn sample_value(kind: &AttributeKind, rng: &mut ChaCha8Rng) -> KbValue {
    match kind {
        AttributeKind::Integer { min, max } => KbValue::Number(rng.random_range(*min..=*max) as f64),
        AttributeKind::Decimal { min, max } => {
            let (lo, hi) = ((min * 10.0).round() as i64, (max * 10.0).round() as i64);
            KbValue::Number(rng.random_range(lo..=hi) as f64 / 10.0)
        }
        AttributeKind::Choice { options } => KbValue::Text(options.choose(rng).cloned().unwrap_or_default()),
    }
}

const TEMPLATED: [&str; 9] = ["indication", "age", "sex", "lvidd", "lv_ef", "ivsd", "la_diameter", "mr", "rhythm"];

fn render_document(config: &GeneratorConfig, id: String, rng: &mut ChaCha8Rng) -> Document {
    let mut kb = Vec::with_capacity(config.schema.len());
    let mut values = BTreeMap::new();
    for spec in &config.schema {
        let value = if rng.random_bool(spec.missing_rate) { KbValue::Missing } else { sample_value(&spec.kind, rng) };
        if !value.is_missing() {
            values.insert(spec.name.as_str(), value.clone());
        }
        kb.push(KbTuple { attribute: spec.name.clone(), value });
    }
    let mut b = Builder { surfaces: Vec::new(), numeric_slots: Vec::new(), graded_slots: Vec::new(), values, config };

    if b.present("indication") {
        match b.text("indication") {
            Some(t) => b.words(&format!("indication : {t} .")),
            None => b.words("indication : not stated ."),
        }
    }
    if let Some(age) = b.number("age") {
        b.numeral("age", age);
        b.words("year old patient .");
    }
    if let (Some(v), true) = (b.number("lvidd"), b.has_rule("lvidd")) {
        b.words("the left ventricle is");
        b.graded("lvidd", v, rng);
        b.words("dilated , lvidd");
        b.numeral("lvidd", v);
        b.words("mm .");
    } else if config.schema.iter().any(|s| s.name == "lvidd") {
        b.words("the left ventricle was not measured .");
    }
    if let (Some(v), true) = (b.number("lv_ef"), b.has_rule("lv_ef")) {
        b.words("ejection fraction");
        b.numeral("lv_ef", v);
        b.words("% , systolic function is");
        b.graded("lv_ef", v, rng);
        b.words("impaired .");
    } else if config.schema.iter().any(|s| s.name == "lv_ef") {
        b.words("systolic function was not assessed .");
    }
    if let (Some(v), true) = (b.number("ivsd"), b.has_rule("ivsd")) {
        b.words("septum");
        b.numeral("ivsd", v);
        b.words("cm with");
        b.graded("ivsd", v, rng);
        b.words("hypertrophy .");
    }
    if let (Some(v), true) = (b.number("la_diameter"), b.has_rule("la_diameter")) {
        b.words("the left atrium is");
        b.graded("la_diameter", v, rng);
        b.words("dilated at");
        b.numeral("la_diameter", v);
        b.words("cm .");
    }
    if let Some(mr) = b.text("mr") {
        b.words(&format!("there is {mr} mitral regurgitation ."));
        if mr == "severe" {
            b.words("surgical review is advised .");
        }
    }
    if config.schema.iter().any(|s| s.name == "rhythm" || s.name == "sex") {
        let subject = match b.text("sex").as_deref() {
            Some("male") => "he",
            Some("female") => "she",
            _ => "the patient",
        };
        let rhythm = match b.text("rhythm").as_deref() {
            Some("sinus") => "sinus rhythm".to_owned(),
            Some("af") => "atrial fibrillation".to_owned(),
            Some(other) => other.to_owned(),
            None => "an undetermined rhythm".to_owned(),
        };
        b.words(&format!("{subject} is in {rhythm} ."));
    }
    // Attributes without a dedicated template.
    for spec in &config.schema {
        if TEMPLATED.contains(&spec.name.as_str()) {
            continue;
        }
        let value = b.values.get(spec.name.as_str()).cloned();
        match value {
            Some(KbValue::Number(v)) => {
                b.words(&format!("{} :", spec.name));
                if b.has_rule(&spec.name) {
                    b.graded(&spec.name, v, rng);
                }
                b.numeral(&spec.name, v);
                b.words(".");
            }
            Some(KbValue::Text(t)) => b.words(&format!("{} : {t} .", spec.name)),
            _ => {}
        }
    }
    let quality = IMAGE_QUALITY.choose(rng).copied().unwrap_or("good");
    b.words(&format!("image quality is {quality} ."));
    if rng.random_bool(config.comment_rate) {
        b.words("note :");
        let n = rng.random_range(2..=5);
        for _ in 0..n {
            let w = COMMENT_WORDS.choose(rng).copied().unwrap_or("none");
            b.words(w);
        }
        b.words(".");
    }

    Document { id, surfaces: b.surfaces, kb, numeric_slots: b.numeric_slots, graded_slots: b.graded_slots }
}

fn split_key(seed: u64, id: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(id.as_bytes());
    h.finalize().into()
}

/// Generates `config.n_documents` reports and splits them into
/// train/dev/test. Identical `(config, seed)` give identical corpora.
pub fn generate_corpus(config: &GeneratorConfig, seed: u64) -> Result<CorpusSplit> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let docs: Vec<Document> =
        (0..config.n_documents).map(|i| render_document(config, format!("s{seed}-{i:05}"), &mut rng)).collect();

    // Rank by a keyed hash of the id and cut at the configured fractions.
    let mut order: Vec<usize> = (0..docs.len()).collect();
    order.sort_by_cached_key(|&i| split_key(seed, &docs[i].id));
    let n = docs.len() as f64;
    let n_train = (n * config.train_fraction + 1e-9).floor() as usize;
    let n_dev = ((n * config.dev_fraction + 1e-9).floor() as usize).min(docs.len() - n_train);
    let mut assignment = vec![0u8; docs.len()];
    for (rank, &i) in order.iter().enumerate() {
        assignment[i] = if rank < n_train {
            0
        } else if rank < n_train + n_dev {
            1
        } else {
            2
        };
    }
    let mut split = CorpusSplit { train: Vec::new(), dev: Vec::new(), test: Vec::new(), seed };
    for (doc, part) in docs.into_iter().zip(assignment) {
        match part {
            0 => split.train.push(doc),
            1 => split.dev.push(doc),
            _ => split.test.push(doc),
        }
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{is_numeral, parse_numeric, write_jsonl};
    use std::collections::HashSet;

    fn small(n: usize) -> GeneratorConfig {
        GeneratorConfig { n_documents: n, ..Default::default() }
    }

    fn bytes(split: &CorpusSplit) -> Vec<u8> {
        let mut buf = Vec::new();
        for part in [&split.train, &split.dev, &split.test] {
            write_jsonl(&mut buf, part).unwrap();
        }
        buf
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_corpus(&small(50), 1).unwrap();
        let b = generate_corpus(&small(50), 1).unwrap();
        assert_eq!(bytes(&a), bytes(&b));
        let c = generate_corpus(&small(50), 2).unwrap();
        let ids_a: HashSet<_> = a.train.iter().map(|d| d.id.clone()).collect();
        assert!(c.train.iter().all(|d| !ids_a.contains(&d.id)));
    }

    #[test]
    fn split_sizes() {
        let s = generate_corpus(&small(1000), 3).unwrap();
        assert_eq!((s.train.len(), s.dev.len(), s.test.len()), (800, 100, 100));
        let mut ids = HashSet::new();
        for d in s.train.iter().chain(&s.dev).chain(&s.test) {
            assert!(ids.insert(d.id.clone()));
        }
    }

    #[test]
    fn threshold_rule_example() {
        let cfg = GeneratorConfig::default();
        let rule = cfg.rule("lv_ef").unwrap();
        assert_eq!(rule.grade(61.0), "non");
        assert_eq!(rule.grade(55.0), "mildly");
        assert_eq!(rule.grade(40.0), "mildly");
        assert_eq!(rule.grade(39.0), "severely");
    }

    #[test]
    fn graded_word_follows_measurement_without_noise() {
        let cfg = GeneratorConfig { grade_noise: 0.0, ..small(200) };
        let s = generate_corpus(&cfg, 9).unwrap();
        let mut seen = 0;
        for doc in s.train.iter().chain(&s.dev).chain(&s.test) {
            for slot in &doc.graded_slots {
                let value = doc.kb.iter().find(|t| t.attribute == slot.attribute).unwrap().value.as_number().unwrap();
                assert_eq!(doc.surfaces[slot.position], cfg.rule(&slot.attribute).unwrap().grade(value));
                seen += 1;
            }
        }
        assert!(seen > 500);
    }

    #[test]
    fn numeric_slots_render_kb_values() {
        let s = generate_corpus(&small(100), 4).unwrap();
        for doc in &s.train {
            assert!(!doc.numeric_slots.is_empty());
            for slot in &doc.numeric_slots {
                let surface = &doc.surfaces[slot.position];
                assert!(is_numeral(surface));
                let kb = doc.kb.iter().find(|t| t.attribute == slot.attribute).unwrap();
                assert_eq!(kb.value.as_number(), Some(parse_numeric(surface)));
            }
            assert!(doc.surfaces.iter().all(|s| !s.is_empty() && !s.contains(char::is_whitespace)));
        }
    }

    #[test]
    fn invalid_configs() {
        assert!(generate_corpus(&small(0), 1).is_err());
        let cfg = GeneratorConfig { schema: Vec::new(), rules: Vec::new(), ..Default::default() };
        assert!(generate_corpus(&cfg, 1).is_err());
    }

    #[test]
    fn generic_attributes_render() {
        let cfg = GeneratorConfig {
            schema: vec![attr("bp_sys", AttributeKind::Integer { min: 90, max: 180 }, 0.0)],
            rules: vec![GradeRule {
                attribute: "bp_sys".into(),
                bands: vec![band("normal", Some(140.0), false), band("high", None, false)],
            }],
            ..small(5)
        };
        let s = generate_corpus(&cfg, 1).unwrap();
        let d = &s.train[0];
        assert_eq!(d.surfaces[0], "bp_sys");
        assert_eq!(d.graded_slots.len(), 1);
        assert_eq!(d.numeric_slots.len(), 1);
    }
}

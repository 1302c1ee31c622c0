use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Embedding and hidden dimension.
    pub dim: usize,
    /// Number of frequent training surfaces kept in the vocabulary.
    pub vocab_budget: usize,
    pub conditional: bool,
    pub grounded: bool,
    pub epochs: usize,
    /// Documents per AdaDelta update.
    pub minibatch: usize,
    /// Steps after which gradients stop flowing backwards in time.
    pub bptt_limit: usize,
    pub seed: u64,
    /// Multiplier applied to numeric values before they enter the network.
    pub value_scale: f64,
    pub init_scale: f64,
    pub rho: f64,
    pub epsilon: f64,
    pub shuffle: bool,
    /// Encoder reads the decoder's input embeddings instead of its own.
    pub share_embeddings: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            dim: 50,
            vocab_budget: 1000,
            conditional: false,
            grounded: false,
            epochs: 20,
            minibatch: 64,
            bptt_limit: 256,
            seed: 1,
            value_scale: 1.0,
            init_scale: 0.08,
            rho: crate::numgrad::adadelta::DEFAULT_RHO,
            epsilon: crate::numgrad::adadelta::DEFAULT_EPSILON,
            shuffle: true,
            share_embeddings: true,
        }
    }
}

impl ModelConfig {
    pub fn for_variant(variant: Variant) -> Self {
        let mut c = Self::default();
        c.set_variant(variant);
        c
    }

    pub fn set_variant(&mut self, variant: Variant) {
        self.conditional = variant.conditional();
        self.grounded = variant.grounded();
    }

    pub fn variant(&self) -> Variant {
        Variant::from_flags(self.conditional, self.grounded)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.dim == 0 || self.vocab_budget == 0 || self.epochs == 0 || self.minibatch == 0 || self.bptt_limit == 0 {
            return bad("dim, vocab_budget, epochs, minibatch and bptt_limit must be at least 1".into());
        }
        if !self.value_scale.is_finite() || self.init_scale.is_nan() || self.init_scale <= 0.0 {
            return bad(format!("value_scale {} / init_scale {}", self.value_scale, self.init_scale));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) || self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return bad(format!("rho {} / epsilon {}", self.rho, self.epsilon));
        }
        Ok(())
    }
}

/// The four model families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "baseline")]
    Baseline,
    #[serde(rename = "c")]
    Conditional,
    #[serde(rename = "g")]
    Grounded,
    #[serde(rename = "c+g")]
    ConditionalGrounded,
}

impl Variant {
    pub const ALL: [Variant; 4] =
        [Variant::Baseline, Variant::Conditional, Variant::Grounded, Variant::ConditionalGrounded];

    pub fn from_flags(conditional: bool, grounded: bool) -> Self {
        match (conditional, grounded) {
            (false, false) => Variant::Baseline,
            (true, false) => Variant::Conditional,
            (false, true) => Variant::Grounded,
            (true, true) => Variant::ConditionalGrounded,
        }
    }

    pub fn conditional(self) -> bool {
        matches!(self, Variant::Conditional | Variant::ConditionalGrounded)
    }

    pub fn grounded(self) -> bool {
        matches!(self, Variant::Grounded | Variant::ConditionalGrounded)
    }

    /// Command-line spelling: `baseline`, `c`, `g`, `c+g`.
    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Conditional => "c",
            Variant::Grounded => "g",
            Variant::ConditionalGrounded => "c+g",
        }
    }

    /// Table label: `baseline`, `+c`, `+g`, `+c+g`.
    pub fn label(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Conditional => "+c",
            Variant::Grounded => "+g",
            Variant::ConditionalGrounded => "+c+g",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" | "base" => Ok(Variant::Baseline),
            "c" | "+c" => Ok(Variant::Conditional),
            "g" | "+g" => Ok(Variant::Grounded),
            "c+g" | "+c+g" | "cg" => Ok(Variant::ConditionalGrounded),
            other => Err(Error::InvalidConfig(format!("unknown variant {other:?}"))),
        }
    }
}

/// Test-time removal of model inputs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Ablation {
    /// Skip the KB encoder (`-kb`).
    #[serde(default)]
    pub ignore_kb: bool,
    /// Feed zero for every numeric value (`-v`).
    #[serde(default)]
    pub ignore_values: bool,
}

impl Ablation {
    pub const NONE: Ablation = Ablation { ignore_kb: false, ignore_values: false };
    pub const KB: Ablation = Ablation { ignore_kb: true, ignore_values: false };
    pub const VALUES: Ablation = Ablation { ignore_kb: false, ignore_values: true };

    /// `""`, `"-kb"`, `"-v"` or `"-kb-v"`.
    pub fn suffix(self) -> &'static str {
        match (self.ignore_kb, self.ignore_values) {
            (false, false) => "",
            (true, false) => "-kb",
            (false, true) => "-v",
            (true, true) => "-kb-v",
        }
    }

    pub fn name(self) -> &'static str {
        match (self.ignore_kb, self.ignore_values) {
            (false, false) => "none",
            (true, false) => "kb",
            (false, true) => "v",
            (true, true) => "kb+v",
        }
    }

    /// Flags that do nothing for a model of the given variant.
    pub fn inert_flags(self, variant: Variant) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.ignore_kb && !variant.conditional() {
            out.push("ignore_kb");
        }
        if self.ignore_values && !variant.grounded() {
            out.push("ignore_values");
        }
        out
    }
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" | "" => Ok(Ablation::NONE),
            "kb" | "-kb" => Ok(Ablation::KB),
            "v" | "-v" => Ok(Ablation::VALUES),
            "kb+v" | "-kb-v" => Ok(Ablation { ignore_kb: true, ignore_values: true }),
            other => Err(Error::InvalidConfig(format!("unknown ablation {other:?}"))),
        }
    }
}

/// Row label such as `+c+g-kb`.
pub fn system_label(variant: Variant, ablation: Ablation) -> String {
    format!("{}{}", variant.label(), ablation.suffix())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_setup() {
        let c = ModelConfig::default();
        assert_eq!((c.dim, c.vocab_budget, c.epochs, c.minibatch), (50, 1000, 20, 64));
        assert_eq!((c.rho, c.epsilon, c.value_scale), (0.95, 1e-6, 1.0));
        c.validate().unwrap();
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
            assert_eq!(v.label().parse::<Variant>().unwrap(), v);
            assert_eq!(Variant::from_flags(v.conditional(), v.grounded()), v);
        }
        assert!("x".parse::<Variant>().is_err());
    }

    #[test]
    fn labels() {
        assert_eq!(system_label(Variant::ConditionalGrounded, Ablation::KB), "+c+g-kb");
        assert_eq!(system_label(Variant::Grounded, Ablation::VALUES), "+g-v");
        assert_eq!(system_label(Variant::Baseline, Ablation::NONE), "baseline");
        assert_eq!(Ablation::KB.inert_flags(Variant::Grounded), vec!["ignore_kb"]);
    }

    #[test]
    fn invalid_configs() {
        for c in [
            ModelConfig { dim: 0, ..Default::default() },
            ModelConfig { minibatch: 0, ..Default::default() },
            ModelConfig { rho: 1.0, ..Default::default() },
        ] {
            assert!(c.validate().is_err());
        }
    }
}

//! Run configuration. Precedence: command-line flags, then `PREDTEXT_*`
//! environment variables (both resolved by clap), then the JSON config file,
//! then built-in defaults.

use std::path::Path;

use anyhow::{Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use predtext::complete::CompletionOptions;
use predtext::corpus::GeneratorConfig;
use predtext::lm::{Ablation, ModelConfig, Variant};
use predtext::predict::{OovPolicy, DEFAULT_KS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    pub ks: Vec<usize>,
    pub oov_policy: OovPolicy,
    pub count_accept_key: bool,
    pub ablation: Ablation,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { ks: DEFAULT_KS.to_vec(), oov_policy: OovPolicy::Miss, count_accept_key: false, ablation: Ablation::NONE }
    }
}

impl EvalOptions {
    pub fn completion(&self) -> CompletionOptions {
        CompletionOptions { count_accept_key: self.count_accept_key }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub model: ModelConfig,
    pub eval: EvalOptions,
    pub generator: GeneratorConfig,
    pub listen: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            model: ModelConfig::default(),
            eval: EvalOptions::default(),
            generator: GeneratorConfig::default(),
            listen: "127.0.0.1:8080".to_owned(),
        }
    }
}

fn parse_ks(s: &str) -> Result<Vec<usize>, String> {
    let ks: Vec<usize> =
        s.split(',').map(|k| k.trim().parse::<usize>().map_err(|e| format!("{k:?}: {e}"))).collect::<Result<_, _>>()?;
    if ks.is_empty() || ks.contains(&0) {
        return Err("k values must be positive".into());
    }
    Ok(ks)
}

/// Flags shared by every subcommand. Unset flags leave the file value.
#[derive(Args, Clone, Debug, Default)]
pub struct ConfigArgs {
    /// JSON run configuration.
    #[arg(long, global = true, env = "PREDTEXT_CONFIG")]
    pub config: Option<std::path::PathBuf>,
    #[arg(long, global = true, env = "PREDTEXT_SEED")]
    pub seed: Option<u64>,
    #[arg(long, global = true, env = "PREDTEXT_VARIANT", value_parser = |s: &str| s.parse::<Variant>().map_err(|e| e.to_string()))]
    pub variant: Option<Variant>,
    #[arg(long, global = true, env = "PREDTEXT_ABLATION", value_parser = |s: &str| s.parse::<Ablation>().map_err(|e| e.to_string()))]
    pub ablation: Option<Ablation>,
    #[arg(long, global = true, env = "PREDTEXT_DIM")]
    pub dim: Option<usize>,
    #[arg(long, global = true, env = "PREDTEXT_VOCAB_BUDGET")]
    pub vocab_budget: Option<usize>,
    #[arg(long, global = true, env = "PREDTEXT_EPOCHS")]
    pub epochs: Option<usize>,
    #[arg(long, global = true, env = "PREDTEXT_MINIBATCH")]
    pub minibatch: Option<usize>,
    #[arg(long, global = true, env = "PREDTEXT_VALUE_SCALE")]
    pub value_scale: Option<f64>,
    /// Comma-separated Recall@k cut-offs.
    #[arg(long = "k", global = true, env = "PREDTEXT_K", value_parser = parse_ks)]
    pub ks: Option<Vec<usize>>,
    #[arg(long, global = true, env = "PREDTEXT_OOV_POLICY", value_parser = |s: &str| s.parse::<OovPolicy>().map_err(|e| e.to_string()))]
    pub oov_policy: Option<OovPolicy>,
    /// Charge one keystroke per accepted completion.
    #[arg(long, global = true, env = "PREDTEXT_COUNT_ACCEPT_KEY")]
    pub count_accept_key: bool,
    /// Number of generated documents.
    #[arg(long, global = true, env = "PREDTEXT_DOCUMENTS")]
    pub documents: Option<usize>,
    #[arg(long, global = true, env = "PREDTEXT_LISTEN")]
    pub listen: Option<String>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => load_file(path)?,
            None => RunConfig::default(),
        };
        self.apply(&mut config);
        config.model.validate()?;
        config.generator.validate()?;
        Ok(config)
    }

    fn apply(&self, c: &mut RunConfig) {
        if let Some(seed) = self.seed {
            c.seed = seed;
        }
        c.model.seed = c.seed;
        if let Some(v) = self.variant {
            c.model.set_variant(v);
        }
        if let Some(a) = self.ablation {
            c.eval.ablation = a;
        }
        if let Some(d) = self.dim {
            c.model.dim = d;
        }
        if let Some(v) = self.vocab_budget {
            c.model.vocab_budget = v;
        }
        if let Some(e) = self.epochs {
            c.model.epochs = e;
        }
        if let Some(m) = self.minibatch {
            c.model.minibatch = m;
        }
        if let Some(s) = self.value_scale {
            c.model.value_scale = s;
        }
        if let Some(ks) = &self.ks {
            c.eval.ks = ks.clone();
        }
        if let Some(p) = self.oov_policy {
            c.eval.oov_policy = p;
        }
        if self.count_accept_key {
            c.eval.count_accept_key = true;
        }
        if let Some(n) = self.documents {
            c.generator.n_documents = n;
        }
        if let Some(l) = &self.listen {
            c.listen = l.clone();
        }
    }
}

fn load_file(path: &Path) -> Result<RunConfig> {
    let bytes = std::fs::read(path).with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_slice(&bytes).with_context(|| format!("parsing config {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"seed": 7, "model": {"dim": 12, "epochs": 3}, "eval": {"ks": [1, 4]}}"#).unwrap();
        let args = ConfigArgs { config: Some(path.clone()), epochs: Some(5), ..Default::default() };
        let c = args.resolve().unwrap();
        assert_eq!((c.seed, c.model.seed, c.model.dim, c.model.epochs), (7, 7, 12, 5));
        assert_eq!(c.eval.ks, [1, 4]);
        assert_eq!(c.model.minibatch, 64);

        std::fs::write(&path, r#"{"sede": 7}"#).unwrap();
        assert!(ConfigArgs { config: Some(path), ..Default::default() }.resolve().is_err());
    }

    #[test]
    fn defaults() {
        let c = ConfigArgs::default().resolve().unwrap();
        assert_eq!((c.model.dim, c.model.vocab_budget, c.model.epochs, c.model.minibatch), (50, 1000, 20, 64));
        assert_eq!(c.eval.ks, DEFAULT_KS);
    }

    #[test]
    fn k_list_parsing() {
        assert_eq!(parse_ks("1,2, 10").unwrap(), [1, 2, 10]);
        assert!(parse_ks("0,1").is_err());
        assert!(parse_ks("a").is_err());
    }
}

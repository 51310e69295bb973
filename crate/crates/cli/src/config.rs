//! Run configuration: defaults, then a `key = value` file, then
//! `DERIVGEN_<KEY>` environment variables, then `--set key=value` flags.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use derivgen::data::{LexiconMode, SplitRatios};
use derivgen::decoder::DecoderMode;
use derivgen::encoder::VariantConfig;
use derivgen::model::ModelConfig;
use derivgen::ngram::KnConfig;
use derivgen::optim::SgdMomentum;
use derivgen::train::TrainConfig;
use serde::{Deserialize, Serialize};

pub const ENV_PREFIX: &str = "DERIVGEN_";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub variant: String,
    pub hidden: usize,
    pub layers: usize,
    pub char_dim: usize,
    pub word_dim: usize,
    pub pos_dim: usize,
    pub decoder: DecoderMode,
    pub max_len_slack: usize,
    pub lr: f64,
    pub momentum: f64,
    /// Gradient-norm clip; 0 disables clipping. Without it the default
    /// learning rate and momentum overflow within the first epoch.
    pub clip: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    /// `hashed` or a path to a text word-vector file.
    pub embeddings: String,
    pub embedding_seed: u64,
    pub alpha: f64,
    pub lexicon: LexiconMode,
    pub train_ratio: f64,
    pub dev_ratio: f64,
    pub test_ratio: f64,
    pub unk_threshold: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let m = ModelConfig::default();
        let o = SgdMomentum::default();
        let t = TrainConfig::default();
        let r = SplitRatios::default();
        RunConfig {
            variant: m.variant.name(),
            hidden: m.hidden,
            layers: m.layers,
            char_dim: m.char_dim,
            word_dim: m.word_dim,
            pos_dim: m.pos_dim,
            decoder: m.decoder,
            max_len_slack: m.max_len_slack,
            lr: o.lr,
            momentum: o.momentum,
            clip: 5.0,
            max_epochs: t.max_epochs,
            patience: t.patience,
            seed: t.seed,
            embeddings: "hashed".into(),
            embedding_seed: 0,
            alpha: 5.0,
            lexicon: LexiconMode::Shared,
            train_ratio: r.train,
            dev_ratio: r.dev,
            test_ratio: r.test,
            unk_threshold: KnConfig::default().unk_max_count,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow::anyhow!("invalid value `{value}` for `{key}`: {e}"))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "variant" => self.variant = v.to_owned(),
            "hidden" => self.hidden = parse(key, v)?,
            "layers" => self.layers = parse(key, v)?,
            "char_dim" => self.char_dim = parse(key, v)?,
            "word_dim" => self.word_dim = parse(key, v)?,
            "pos_dim" => self.pos_dim = parse(key, v)?,
            "decoder" => self.decoder = parse(key, v)?,
            "max_len_slack" => self.max_len_slack = parse(key, v)?,
            "lr" => self.lr = parse(key, v)?,
            "momentum" => self.momentum = parse(key, v)?,
            "clip" => self.clip = parse(key, v)?,
            "max_epochs" => self.max_epochs = parse(key, v)?,
            "patience" => self.patience = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "embeddings" => self.embeddings = v.to_owned(),
            "embedding_seed" => self.embedding_seed = parse(key, v)?,
            "alpha" => self.alpha = parse(key, v)?,
            "lexicon" => self.lexicon = parse(key, v)?,
            "train_ratio" => self.train_ratio = parse(key, v)?,
            "dev_ratio" => self.dev_ratio = parse(key, v)?,
            "test_ratio" => self.test_ratio = parse(key, v)?,
            "unk_threshold" => self.unk_threshold = parse(key, v)?,
            _ => bail!("unknown configuration key `{key}`"),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').with_context(|| {
                format!("{}:{}: expected `key = value`", path.display(), n + 1)
            })?;
            self.set(k.trim(), v)
                .with_context(|| format!("{}:{}", path.display(), n + 1))?;
        }
        Ok(())
    }

    pub fn apply_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) -> Result<()> {
        let mut found: BTreeMap<String, String> = BTreeMap::new();
        for (k, v) in vars {
            if let Some(key) = k.strip_prefix(ENV_PREFIX) {
                found.insert(key.to_ascii_lowercase(), v);
            }
        }
        for (k, v) in found {
            self.set(&k, &v)
                .with_context(|| format!("environment variable {ENV_PREFIX}{}", k.to_ascii_uppercase()))?;
        }
        Ok(())
    }

    pub fn apply_overrides(&mut self, pairs: &[String]) -> Result<()> {
        for p in pairs {
            let (k, v) = p
                .split_once('=')
                .with_context(|| format!("--set expects key=value, got `{p}`"))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.model()?;
        for (name, v) in [("lr", self.lr), ("momentum", self.momentum), ("clip", self.clip), ("alpha", self.alpha)] {
            if !v.is_finite() || v < 0.0 {
                bail!("`{name}` must be a non-negative number, got {v}");
            }
        }
        if self.momentum >= 1.0 {
            bail!("`momentum` must be below 1, got {}", self.momentum);
        }
        if self.max_epochs == 0 {
            bail!("`max_epochs` must be positive");
        }
        self.ratios().validate()?;
        Ok(())
    }

    pub fn model(&self) -> Result<ModelConfig> {
        let variant = VariantConfig::parse(&self.variant)
            .map_err(|e| anyhow::anyhow!("invalid value for `variant`: {e}"))?;
        let cfg = ModelConfig {
            variant,
            hidden: self.hidden,
            layers: self.layers,
            char_dim: self.char_dim,
            word_dim: self.word_dim,
            pos_dim: self.pos_dim,
            decoder: self.decoder,
            max_len_slack: self.max_len_slack,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn training(&self) -> TrainConfig {
        TrainConfig {
            optimizer: SgdMomentum {
                lr: self.lr,
                momentum: self.momentum,
                clip_norm: (self.clip > 0.0).then_some(self.clip),
            },
            max_epochs: self.max_epochs,
            patience: self.patience,
            seed: self.seed,
            target_accuracy: None,
        }
    }

    pub fn ratios(&self) -> SplitRatios {
        SplitRatios {
            train: self.train_ratio,
            dev: self.dev_ratio,
            test: self.test_ratio,
        }
    }

    pub fn kn(&self) -> KnConfig {
        KnConfig {
            unk_max_count: self.unk_threshold,
        }
    }
}

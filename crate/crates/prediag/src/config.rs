//! TOML configuration. Every key is optional; relative paths are taken
//! relative to the directory holding the config file.

use std::path::{Path, PathBuf};

use prediag_core::dialogue::ChatSettings;
use prediag_core::matcher::{ResponsePolicy, SimilarityScore, DEFAULT_THRESHOLD};
use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub similarity_threshold: f64,
    /// One stopword per line; the built-in list when absent.
    pub stopwords: Option<PathBuf>,
    /// Slot and prompt rules; the built-in rules when absent.
    pub rules: Option<PathBuf>,
    pub model_dir: PathBuf,
    pub listen: String,
    /// Statement store written by `train-chat` and read by `serve`.
    pub store: PathBuf,
    pub response_policy: ResponsePolicy,
    pub session_idle_minutes: u64,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            similarity_threshold: DEFAULT_THRESHOLD,
            stopwords: None,
            rules: None,
            model_dir: PathBuf::from("models"),
            listen: "127.0.0.1:8080".into(),
            store: PathBuf::from("store.jsonl"),
            response_policy: ResponsePolicy::First,
            session_idle_minutes: 30,
            seed: 0,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        let mut cfg: Config = toml::from_str(&text).map_err(|source| Error::Toml {
            path: path.into(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        rebase(&mut cfg.model_dir);
        rebase(&mut cfg.store);
        cfg.stopwords.as_mut().map(rebase);
        cfg.rules.as_mut().map(rebase);
        cfg.validate()?;
        Ok(cfg)
    }

    /// The file if given, defaults otherwise.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn validate(&self) -> Result<()> {
        SimilarityScore::new(self.similarity_threshold).map_err(|_| {
            Error::Config(format!(
                "similarity_threshold {} is outside [0, 1]",
                self.similarity_threshold
            ))
        })?;
        Ok(())
    }

    pub fn chat_settings(&self) -> Result<ChatSettings> {
        self.validate()?;
        Ok(ChatSettings {
            threshold: SimilarityScore::new(self.similarity_threshold).expect("validated"),
            policy: self.response_policy,
            ..ChatSettings::default()
        })
    }
}

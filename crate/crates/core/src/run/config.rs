use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::DEFAULT_SPLIT;
use crate::demo::LoopConfig;
use crate::eval::HitCounting;
use crate::infer::{Ablation, InferenceMode};
use crate::llm::{ProviderConfig, ProviderKind};
use crate::retrieval::RetrievalConfig;

use super::RunError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderKind {
    Hash,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedderConfig {
    pub kind: EmbedderKind,
    pub url: String,
    pub timeout_secs: f64,
    /// Use the hash embedder when the service cannot be reached.
    pub fallback_to_hash: bool,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self {
            kind: EmbedderKind::Hash,
            url: "http://127.0.0.1:8088".into(),
            timeout_secs: 30.0,
            fallback_to_hash: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct InferenceConfig {
    pub mode: InferenceMode,
    pub ablation: Ablation,
    pub counting: HitCounting,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            mode: InferenceMode::Dicl,
            ablation: Ablation::default(),
            counting: HitCounting::Literal,
        }
    }
}

/// Everything that determines a run's artifacts. Stored verbatim as
/// `config.json` in the run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub split: [f64; 3],
    pub seed: u64,
    pub retrieval: RetrievalConfig,
    pub embedder: EmbedderConfig,
    pub loops: LoopConfig,
    pub inference: InferenceConfig,
    pub generator: ProviderConfig,
    /// Rater providers; a mock rater without its own script uses the
    /// generator's.
    pub rater1: ProviderConfig,
    pub rater2: ProviderConfig,
    pub rater_repetitions: u32,
    /// Directory of template overrides.
    pub prompts_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::new(),
            split: DEFAULT_SPLIT,
            seed: 0,
            retrieval: RetrievalConfig::default(),
            embedder: EmbedderConfig::default(),
            loops: LoopConfig::default(),
            inference: InferenceConfig::default(),
            generator: ProviderConfig::default(),
            rater1: ProviderConfig::default(),
            rater2: ProviderConfig::default(),
            rater_repetitions: 3,
            prompts_dir: None,
        }
    }
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if !p.as_os_str().is_empty() && p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    /// Reads a TOML config; relative paths are taken relative to its folder.
    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        resolve(base, &mut cfg.dataset);
        if let Some(p) = &mut cfg.prompts_dir {
            resolve(base, p);
        }
        for role in [&mut cfg.generator, &mut cfg.rater1, &mut cfg.rater2] {
            if let Some(p) = &mut role.mock_script {
                resolve(base, p);
            }
            if let Some(p) = &mut role.replay_log {
                resolve(base, p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        if self.dataset.as_os_str().is_empty() {
            return Err(RunError::Config("no dataset configured".into()));
        }
        if self.retrieval.k == 0 {
            return Err(RunError::Config("k must be at least 1".into()));
        }
        if self.rater_repetitions == 0 {
            return Err(RunError::Config("rater_repetitions must be at least 1".into()));
        }
        for role in [&self.generator, &self.rater1, &self.rater2] {
            role.validate()?;
        }
        Ok(())
    }

    /// Use a mock script for the generator and both raters.
    pub fn with_mock_script(mut self, script: &Path) -> Self {
        for role in [&mut self.generator, &mut self.rater1, &mut self.rater2] {
            role.kind = ProviderKind::Mock;
            role.mock_script = Some(script.to_path_buf());
        }
        self
    }

    pub fn with_provider_kind(mut self, kind: ProviderKind) -> Self {
        for role in [&mut self.generator, &mut self.rater1, &mut self.rater2] {
            role.kind = kind;
        }
        self
    }

    /// Canonical JSON form, as written to `config.json`.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable") + "\n"
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

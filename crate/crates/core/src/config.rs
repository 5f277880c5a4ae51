//! Pipeline configuration: one TOML document, unknown keys rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::action::ActionConfig;
use crate::eval::{BenchConfig, NoiseConfig, StageConfig};
use crate::model::ClientConfig;
use crate::perception::RouterConfig;
use crate::reasoning::ReasoningConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config value out of range: {0}")]
    Range(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub kb_dir: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub router: RouterConfig,
    pub reasoning: ReasoningConfig,
    pub action: ActionConfig,
    pub client: ClientConfig,
    pub eval: BenchConfig,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        Self::from_toml(&text)
    }

    pub fn stages(&self) -> StageConfig {
        StageConfig { router: self.router.clone(), reasoning: self.reasoning.clone(), action: self.action.clone() }
    }

    /// First 16 hex digits of the SHA-256 of the resolved config as JSON.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))[..16].to_string()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let range = |ok: bool, what: &str| if ok { Ok(()) } else { Err(ConfigError::Range(what.to_string())) };
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        range(unit(self.router.delta_sim), "router.delta_sim must lie in [0, 1]")?;
        range(self.router.cache_capacity > 0, "router.cache_capacity must be positive")?;
        let r = &self.reasoning;
        range(r.window.window_len_ms > 0, "reasoning.window.window_len_ms must be positive")?;
        range(r.window.stride_ms.is_none_or(|s| s > 0), "reasoning.window.stride_ms must be positive")?;
        range(r.solve.lambda_w >= 0.0 && r.solve.lambda_a >= 0.0, "lambda_w and lambda_a must be >= 0")?;
        range(r.prune.theta_prune >= 0.0, "reasoning.prune.theta_prune must be >= 0")?;
        let p = [r.penalties.w, r.penalties.a];
        range(p.iter().all(|f| f.prior >= 0.0 && f.rev >= 0.0 && f.bg >= 0.0), "penalties must be >= 0")?;
        range(r.solve.rho_init > 0.0 && r.solve.rho_mult > 1.0, "rho_init must be > 0 and rho_mult > 1")?;
        range(self.action.navigator.top_k >= 1, "action.navigator.top_k must be >= 1")?;
        range(unit(self.action.matching.min_similarity), "action.matching.min_similarity must lie in [0, 1]")?;
        range(unit(self.action.matching.margin), "action.matching.margin must lie in [0, 1]")?;
        range(self.eval.memory_budget_mb > 0.0, "eval.memory_budget_mb must be positive")?;
        for &level in &self.eval.noise_levels {
            NoiseConfig::new(level, 0, self.eval.suite.profile).map_err(|e| ConfigError::Range(e.to_string()))?;
        }
        Ok(())
    }
}

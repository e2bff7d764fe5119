//! Posterior checkpoints as versioned JSON, so a fitted surrogate can be
//! reloaded without refitting.

use std::fs;
use std::path::Path;

use bvo_core::surrogate::{LikelihoodConfig, MlpArchitecture, Standardizer, VariationalPosterior};
use serde::{Deserialize, Serialize};

use crate::{HarnessError, Result};

pub const CHECKPOINT_SCHEMA: &str = "bvo-posterior";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorCheckpoint {
    pub schema: String,
    pub version: u32,
    pub arch: MlpArchitecture,
    pub posterior: VariationalPosterior,
    pub likelihood: LikelihoodConfig,
    pub standardizer: Standardizer,
}

impl PosteriorCheckpoint {
    pub fn new(
        arch: MlpArchitecture,
        posterior: VariationalPosterior,
        likelihood: LikelihoodConfig,
        standardizer: Standardizer,
    ) -> Result<Self> {
        posterior.validate(&arch)?;
        Ok(Self {
            schema: CHECKPOINT_SCHEMA.into(),
            version: CHECKPOINT_VERSION,
            arch,
            posterior,
            likelihood,
            standardizer,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).expect("checkpoint serializes");
        fs::write(path, text).map_err(|e| HarnessError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| HarnessError::format(path, e))?;
        if value.get("schema").and_then(|s| s.as_str()) != Some(CHECKPOINT_SCHEMA) {
            return Err(HarnessError::format(path, "not a posterior checkpoint"));
        }
        let found = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if found != CHECKPOINT_VERSION {
            return Err(HarnessError::Version { what: "checkpoint", found, expected: CHECKPOINT_VERSION });
        }
        let ck: Self = serde_json::from_value(value).map_err(|e| HarnessError::format(path, e))?;
        ck.posterior.validate(&ck.arch)?;
        Ok(ck)
    }
}

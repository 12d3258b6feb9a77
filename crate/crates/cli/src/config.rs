//! JSON run configuration. Every field is optional so one file can serve
//! several subcommands; command-line flags win over file values.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stampwait::experiments::{Budget, SweepSpec};
use stampwait::sim::NoiseModel;
use stampwait::{Error, Result, SystemConfig};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: Option<SystemConfig>,
    /// Threshold ξ for `simulate --policy single|rr`.
    pub threshold: Option<f64>,
    /// Trial counts for `simulate --policy as`.
    pub schedule: Option<Vec<u32>>,
    pub seed: Option<u64>,
    /// Deliveries (single) or cycles (rr, as).
    pub epochs: Option<u64>,
    pub noise: Option<NoiseModel>,
    pub budget: Option<Budget>,
    pub sweep: Option<SweepSpec>,
    pub service_parameter_is_rate: Option<bool>,
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let cfg: Self = serde_json::from_str(&text)?;
        if let Some(s) = &cfg.system {
            s.validate()?;
        }
        Ok(cfg)
    }

    pub fn load_opt(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn system(&self) -> Result<SystemConfig> {
        self.system
            .clone()
            .ok_or_else(|| Error::InvalidConfig("config has no \"system\" section".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"sead": 3}"#).is_err());
        let c: RunConfig = serde_json::from_str(r#"{"seed": 3, "noise": "uniform"}"#).unwrap();
        assert_eq!(c.seed, Some(3));
        assert_eq!(c.noise, Some(NoiseModel::Uniform));
    }

    #[test]
    fn system_section_is_validated() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        let text = r#"{"system": {"processes": [{"rate": -1, "recovery": {"kind": "exponential_decay", "rate": 1}}],
                       "service": {"kind": "exponential", "mean": 1}}}"#;
        fs::write(&p, text).unwrap();
        assert!(matches!(RunConfig::load(&p), Err(Error::InvalidParameter { .. })));
    }
}

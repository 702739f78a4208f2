//! Effective run settings: command-line flags over a JSON config file over
//! defaults.

use std::path::Path;

use anyhow::{bail, Context, Result};
use craft_core::clustering::{HdbscanParams, DEFAULT_MIN_CLUSTER_SIZE};
use craft_core::distributions::LocationRule;
use craft_core::features::FeatureConfig;
use craft_core::kpca::DEFAULT_RETAIN;
use craft_core::pipeline::PipelineConfig;
use craft_core::power_scaling::DEFAULT_GAMMA;
use craft_core::spectra_prep::SeparationConfig;
use serde::{Deserialize, Serialize};

/// Keys accepted in a config file; every one mirrors a flag.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub min_cluster_size: Option<usize>,
    pub min_samples: Option<usize>,
    pub scan: Option<String>,
    pub retain: Option<f64>,
    pub kernel_gamma: Option<f64>,
    pub power_gamma: Option<f64>,
    pub no_separate: Option<bool>,
    pub min_improvement: Option<f64>,
    pub thresholds: Option<usize>,
    pub per_type: Option<usize>,
    pub with_split: Option<bool>,
    pub matched: Option<bool>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<ConfigFile> {
        let Some(path) = path else {
            return Ok(ConfigFile::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Flags win over file values.
    pub fn overlay(self, flags: ConfigFile) -> ConfigFile {
        ConfigFile {
            seed: flags.seed.or(self.seed),
            jobs: flags.jobs.or(self.jobs),
            min_cluster_size: flags.min_cluster_size.or(self.min_cluster_size),
            min_samples: flags.min_samples.or(self.min_samples),
            scan: flags.scan.or(self.scan),
            retain: flags.retain.or(self.retain),
            kernel_gamma: flags.kernel_gamma.or(self.kernel_gamma),
            power_gamma: flags.power_gamma.or(self.power_gamma),
            no_separate: flags.no_separate.or(self.no_separate),
            min_improvement: flags.min_improvement.or(self.min_improvement),
            thresholds: flags.thresholds.or(self.thresholds),
            per_type: flags.per_type.or(self.per_type),
            with_split: flags.with_split.or(self.with_split),
            matched: flags.matched.or(self.matched),
        }
    }
}

/// Settings after defaults are filled in. Recorded in every manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub seed: u64,
    pub jobs: usize,
    pub min_cluster_size: usize,
    pub min_samples: Option<usize>,
    pub scan: Option<(usize, usize)>,
    pub retain: f64,
    pub kernel_gamma: Option<f64>,
    pub power_gamma: f64,
    pub separate: bool,
    pub min_improvement: f64,
    pub thresholds: usize,
    pub per_type: usize,
    pub with_split: bool,
    /// Score against the best one-to-one pairing when no mask is given.
    pub matched: bool,
}

impl Settings {
    pub fn resolve(c: ConfigFile) -> Result<Settings> {
        let s = Settings {
            seed: c.seed.unwrap_or(0),
            jobs: c.jobs.unwrap_or(1),
            min_cluster_size: c.min_cluster_size.unwrap_or(DEFAULT_MIN_CLUSTER_SIZE),
            min_samples: c.min_samples,
            scan: c.scan.as_deref().map(parse_scan).transpose()?,
            retain: c.retain.unwrap_or(DEFAULT_RETAIN),
            kernel_gamma: c.kernel_gamma,
            power_gamma: c.power_gamma.unwrap_or(DEFAULT_GAMMA),
            separate: !c.no_separate.unwrap_or(false),
            min_improvement: c.min_improvement.unwrap_or(SeparationConfig::default().min_improvement),
            thresholds: c.thresholds.unwrap_or(20),
            per_type: c.per_type.unwrap_or(30),
            with_split: c.with_split.unwrap_or(false),
            matched: c.matched.unwrap_or(false),
        };
        if s.jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        if s.min_cluster_size < 2 {
            bail!("--min-cluster-size must be at least 2");
        }
        if !(s.retain > 0.0 && s.retain <= 1.0) {
            bail!("--retain must lie in (0, 1], got {}", s.retain);
        }
        if s.thresholds == 0 {
            bail!("--thresholds must be at least 1");
        }
        if s.per_type == 0 {
            bail!("--per-type must be at least 1");
        }
        Ok(s)
    }

    pub fn separation(&self) -> SeparationConfig {
        SeparationConfig { min_improvement: self.min_improvement, ..SeparationConfig::default() }
    }

    pub fn features(&self) -> FeatureConfig {
        FeatureConfig { power_gamma: self.power_gamma, location_rule: LocationRule::Significant }
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            features: self.features(),
            separation: self.separate.then(|| self.separation()),
            retain: self.retain,
            kernel_gamma: self.kernel_gamma,
            hdbscan: HdbscanParams {
                min_samples: self.min_samples,
                ..HdbscanParams::new(self.min_cluster_size)
            },
        }
    }
}

/// Parses `A..B` (inclusive) into a size range.
pub fn parse_scan(text: &str) -> Result<(usize, usize)> {
    let Some((a, b)) = text.split_once("..") else {
        bail!("scan range must look like A..B, got `{text}`");
    };
    let a: usize = a.trim().parse().with_context(|| format!("scan start `{a}`"))?;
    let b: usize = b.trim().parse().with_context(|| format!("scan end `{b}`"))?;
    if a < 2 || b < a {
        bail!("scan range needs 2 <= A <= B, got {a}..{b}");
    }
    Ok((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scan_ranges() {
        assert_eq!(parse_scan("2..30").unwrap(), (2, 30));
        assert!(parse_scan("1..5").is_err());
        assert!(parse_scan("5..3").is_err());
        assert!(parse_scan("7").is_err());
    }

    #[test]
    fn flags_override_file() {
        let file = ConfigFile { seed: Some(3), retain: Some(0.9), ..Default::default() };
        let flags = ConfigFile { seed: Some(5), ..Default::default() };
        let s = Settings::resolve(file.overlay(flags)).unwrap();
        assert_eq!((s.seed, s.retain, s.jobs), (5, 0.9, 1));
    }

    #[test]
    fn unknown_config_key_rejected() {
        assert!(serde_json::from_str::<ConfigFile>(r#"{"sead": 1}"#).is_err());
    }
}

//! Sequential end-to-end pipeline: preparation, features, reduction and
//! clustering.

use serde::{Deserialize, Serialize};

use crate::clustering::{hdbscan_fit, soft_memberships, ClusterModel, HdbscanParams};
use crate::data_model::SourceRecord;
use crate::error::Result;
use crate::features::{compute_features_with, standardize, FeatureConfig, FeatureVector, Standardized};
use crate::kpca::{kpca_reduce, ReducedMatrix, DEFAULT_RETAIN};
use crate::spectra_prep::{separate_with, SeparationConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub features: FeatureConfig,
    /// Spectrum separation thresholds; `None` skips separation.
    pub separation: Option<SeparationConfig>,
    pub retain: f64,
    pub kernel_gamma: Option<f64>,
    pub hdbscan: HdbscanParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            features: FeatureConfig::default(),
            separation: Some(SeparationConfig::default()),
            retain: DEFAULT_RETAIN,
            kernel_gamma: None,
            hdbscan: HdbscanParams::default(),
        }
    }
}

/// Splits two-mechanism spectra; records that cannot be evaluated stay intact.
pub fn prepare(records: &[SourceRecord], config: &SeparationConfig) -> Vec<SourceRecord> {
    records
        .iter()
        .flat_map(|r| separate_with(r, config).map(|s| s.records).unwrap_or_else(|_| vec![r.clone()]))
        .collect()
}

/// Log-transformed feature rows in input order.
pub fn feature_matrix(features: &[FeatureVector]) -> Vec<Vec<f64>> {
    features.iter().map(|f| f.log_transform().values.to_vec()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterStage {
    pub standardized: Standardized,
    pub reduced: ReducedMatrix,
    pub model: ClusterModel,
    pub soft: Vec<Vec<f64>>,
}

/// Standardizes the log-transformed features, reduces them and clusters.
pub fn cluster_features(features: &[FeatureVector], config: &PipelineConfig) -> Result<ClusterStage> {
    let standardized = standardize(&feature_matrix(features))?;
    let reduced = kpca_reduce(&standardized.data, config.kernel_gamma, config.retain)?;
    let model = hdbscan_fit(&reduced.scores, &config.hdbscan)?;
    let soft = soft_memberships(&model, &reduced.scores)?;
    Ok(ClusterStage { standardized, reduced, model, soft })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub records: Vec<SourceRecord>,
    pub features: Vec<FeatureVector>,
    pub clusters: ClusterStage,
}

pub fn run(records: &[SourceRecord], config: &PipelineConfig) -> Result<PipelineOutput> {
    let records = match &config.separation {
        Some(s) => prepare(records, s),
        None => records.to_vec(),
    };
    let features: Vec<FeatureVector> = records.iter().map(|r| compute_features_with(r, &config.features)).collect();
    let clusters = cluster_features(&features, config)?;
    Ok(PipelineOutput { records, features, clusters })
}

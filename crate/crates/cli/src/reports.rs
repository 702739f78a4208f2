//! Report file formats.

use std::collections::BTreeMap;

use anyhow::Result;
use craft_core::canonical::format_f64;
use craft_core::clustering::{ClusterModel, ScanPoint};
use craft_core::evaluation::{ConfusionMatrix, ThresholdPoint};
use craft_core::features::{FeatureVector, FEATURE_NAMES};
use craft_core::kpca::ReducedMatrix;
use craft_core::pipeline::ClusterStage;
use serde::{Deserialize, Serialize};

fn csv_text(header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn opt(v: Option<f64>) -> String {
    v.map(format_f64).unwrap_or_default()
}

/// One row per source: id, the raw features in table order and the
/// degraded features as `name: reason` joined by `; `.
pub fn features_csv(features: &[FeatureVector]) -> Result<String> {
    let mut header = vec!["id".to_string()];
    header.extend(FEATURE_NAMES.iter().map(|s| s.to_string()));
    header.push("flags".into());
    let rows: Vec<Vec<String>> = features
        .iter()
        .map(|f| {
            let mut row = vec![f.id.clone()];
            row.extend(f.values.iter().map(|v| format_f64(*v)));
            row.push(f.flags.iter().map(|(k, v)| format!("{k}: {v}")).collect::<Vec<_>>().join("; "));
            row
        })
        .collect();
    csv_text(&header, &rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceCluster {
    pub id: String,
    pub label: i64,
    pub confidence: f64,
    /// Cluster id → membership probability.
    pub soft: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reduction {
    pub kernel_gamma: f64,
    pub n_components: usize,
    pub retained_fraction: f64,
    pub explained: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scan {
    pub points: Vec<ScanPoint>,
    pub knee: Option<usize>,
}

/// Contents of `clusters.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub n_clusters: usize,
    pub sources: Vec<SourceCluster>,
    pub reduction: Reduction,
    /// The fitted model, including the flat condensed-tree edge list.
    pub model: ClusterModel,
    pub scan: Option<Scan>,
}

impl ClusterReport {
    pub fn new(ids: &[String], stage: &ClusterStage, scan: Option<Scan>) -> ClusterReport {
        let model = &stage.model;
        let sources = ids
            .iter()
            .enumerate()
            .map(|(p, id)| SourceCluster {
                id: id.clone(),
                label: model.labels[p],
                confidence: model.confidence[p],
                soft: model
                    .cluster_ids
                    .iter()
                    .zip(&stage.soft[p])
                    .map(|(c, v)| (c.to_string(), *v))
                    .collect(),
            })
            .collect();
        ClusterReport {
            n_clusters: model.n_clusters(),
            sources,
            reduction: reduction(&stage.reduced),
            model: model.clone(),
            scan,
        }
    }

    pub fn ids(&self) -> Vec<String> {
        self.sources.iter().map(|s| s.id.clone()).collect()
    }
}

fn reduction(r: &ReducedMatrix) -> Reduction {
    Reduction {
        kernel_gamma: r.kernel_gamma,
        n_components: r.n_components(),
        retained_fraction: r.retained_fraction,
        explained: r.explained.clone(),
    }
}

pub fn scan_csv(scan: &[ScanPoint]) -> Result<String> {
    let rows: Vec<Vec<String>> = scan.iter().map(|p| vec![p.size.to_string(), p.n_clusters.to_string()]).collect();
    csv_text(&["min_cluster_size".into(), "n_clusters".into()], &rows)
}

/// Counts with one row per label and one column per cluster, noise last.
pub fn confusion_csv(cm: &ConfusionMatrix) -> Result<String> {
    let mut header = vec!["label".to_string()];
    header.extend(cm.cols.iter().map(|c| if *c < 0 { "noise".to_string() } else { c.to_string() }));
    let rows: Vec<Vec<String>> = cm
        .rows
        .iter()
        .zip(&cm.counts)
        .map(|(label, counts)| std::iter::once(label.clone()).chain(counts.iter().map(|c| c.to_string())).collect())
        .collect();
    csv_text(&header, &rows)
}

pub fn threshold_csv(curve: &[ThresholdPoint]) -> Result<String> {
    let header: Vec<String> = ["threshold", "retained", "total", "retained_fraction", "n_correct", "accuracy"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<Vec<String>> = curve
        .iter()
        .map(|p| {
            vec![
                format_f64(p.threshold),
                p.retained.to_string(),
                p.total.to_string(),
                format_f64(p.retained_fraction),
                p.n_correct.to_string(),
                opt(p.accuracy),
            ]
        })
        .collect();
    csv_text(&header, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_with_commas_are_quoted() {
        let mut f = FeatureVector {
            id: "s".into(),
            values: [0.5; FEATURE_NAMES.len()],
            flags: BTreeMap::new(),
            aux: Default::default(),
        };
        f.flags.insert("k_st".into(), "too few peaks, need 3".into());
        let text = features_csv(&[f]).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("id,scal_st,"));
        assert!(lines.next().unwrap().ends_with(",\"k_st: too few peaks, need 3\""));
    }

    #[test]
    fn threshold_rows() {
        let p = ThresholdPoint {
            threshold: 0.1,
            retained: 0,
            total: 4,
            retained_fraction: 0.0,
            n_correct: 0,
            accuracy: None,
        };
        assert_eq!(threshold_csv(&[p]).unwrap().lines().nth(1), Some("0.1,0,4,0.0,0,"));
    }
}

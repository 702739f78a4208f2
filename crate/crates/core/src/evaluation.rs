//! Comparison of a clustering with expert labels and the feature
//! correlation hierarchy.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::clustering::{ClusterModel, NOISE};
use crate::error::{Error, Result};
use crate::numeric::pearson;

/// Label × cluster counts. The last column always holds noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub rows: Vec<String>,
    /// Cluster ids followed by [`NOISE`].
    pub cols: Vec<i64>,
    pub counts: Vec<Vec<usize>>,
    pub mean_confidence: Vec<Vec<Option<f64>>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn row_of(&self, label: &str) -> Option<usize> {
        self.rows.iter().position(|r| r == label)
    }

    pub fn col_of(&self, cluster: i64) -> Option<usize> {
        self.cols.iter().position(|c| *c == cluster)
    }
}

/// Counts and mean confidences of labelled sources per (label, cluster).
/// Unlabelled sources are skipped.
pub fn confusion(labels: &[Option<String>], model: &ClusterModel) -> Result<ConfusionMatrix> {
    if labels.len() != model.n_points() {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {} clustered sources",
            labels.len(),
            model.n_points()
        )));
    }
    let rows: Vec<String> = labels.iter().flatten().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    if rows.is_empty() {
        return Err(Error::InsufficientData("no labelled source".into()));
    }
    let mut cols = model.cluster_ids.clone();
    cols.push(NOISE);
    let mut counts = vec![vec![0usize; cols.len()]; rows.len()];
    let mut sums = vec![vec![0.0; cols.len()]; rows.len()];
    for (p, label) in labels.iter().enumerate() {
        let Some(label) = label else { continue };
        let r = rows.binary_search(label).expect("row exists");
        let c = cols
            .iter()
            .position(|c| *c == model.labels[p])
            .ok_or_else(|| Error::invalid("model", format!("unknown cluster {}", model.labels[p])))?;
        counts[r][c] += 1;
        sums[r][c] += model.confidence[p];
    }
    let mean_confidence = counts
        .iter()
        .zip(&sums)
        .map(|(cr, sr)| cr.iter().zip(sr).map(|(c, s)| (*c > 0).then(|| s / *c as f64)).collect())
        .collect();
    Ok(ConfusionMatrix { rows, cols, counts, mean_confidence })
}

/// Expert judgement of which clusters count as correct for each label;
/// `-1` marks noise as acceptable.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CorrectMask(pub BTreeMap<String, Vec<i64>>);

impl CorrectMask {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Cell-wise mask aligned with `cm`. Labels missing from the mask have
    /// no correct cell.
    pub fn cells(&self, cm: &ConfusionMatrix) -> Result<Vec<Vec<bool>>> {
        let mut out = vec![vec![false; cm.cols.len()]; cm.rows.len()];
        for (label, clusters) in &self.0 {
            let r = cm
                .row_of(label)
                .ok_or_else(|| Error::invalid("mask", format!("unknown label `{label}`")))?;
            for c in clusters {
                let k = cm
                    .col_of(*c)
                    .ok_or_else(|| Error::invalid("mask", format!("unknown cluster {c} for label `{label}`")))?;
                out[r][k] = true;
            }
        }
        Ok(out)
    }

    pub fn is_correct(&self, label: &str, cluster: i64) -> bool {
        self.0.get(label).is_some_and(|cs| cs.contains(&cluster))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub n_correct: usize,
    pub n_wrong: usize,
    pub fraction: f64,
}

impl Accuracy {
    pub fn from_counts(n_correct: usize, total: usize) -> Result<Self> {
        if total == 0 || n_correct > total {
            return Err(Error::invalid("counts", format!("{n_correct} correct of {total}")));
        }
        Ok(Accuracy {
            n_correct,
            n_wrong: total - n_correct,
            fraction: n_correct as f64 / total as f64,
        })
    }

    pub fn percent(&self) -> f64 {
        100.0 * self.fraction
    }

    /// Percentage cut (not rounded) after `decimals` decimals.
    pub fn percent_truncated(&self, decimals: u32) -> f64 {
        let scale = 10f64.powi(decimals as i32);
        // the nudge keeps exact decimal values such as 28.00 from flooring down
        ((self.percent() * scale) + 1e-9).floor() / scale
    }
}

pub fn accuracy(cm: &ConfusionMatrix, mask: &[Vec<bool>]) -> Result<Accuracy> {
    if mask.len() != cm.rows.len() || mask.iter().any(|r| r.len() != cm.cols.len()) {
        return Err(Error::ShapeMismatch("mask does not match the confusion matrix".into()));
    }
    let correct = cm
        .counts
        .iter()
        .zip(mask)
        .flat_map(|(cr, mr)| cr.iter().zip(mr).filter(|(_, m)| **m).map(|(c, _)| *c))
        .sum();
    Accuracy::from_counts(correct, cm.total())
}

/// Per-source correctness; `None` for unlabelled sources.
pub fn correctness(labels: &[Option<String>], model: &ClusterModel, mask: &CorrectMask) -> Vec<Option<bool>> {
    labels
        .iter()
        .zip(&model.labels)
        .map(|(l, c)| l.as_ref().map(|l| mask.is_correct(l, *c)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPoint {
    pub threshold: f64,
    pub retained: usize,
    pub total: usize,
    pub retained_fraction: f64,
    pub n_correct: usize,
    /// Share of correct sources among the retained ones; `None` if none retained.
    pub accuracy: Option<f64>,
}

/// Retention and accuracy of the predictions with confidence `>= t`.
pub fn threshold_curve(confidence: &[f64], correct: &[bool], thresholds: &[f64]) -> Result<Vec<ThresholdPoint>> {
    if confidence.is_empty() {
        return Err(Error::InsufficientData("empty confidence list".into()));
    }
    if confidence.len() != correct.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} confidences for {} correctness values",
            confidence.len(),
            correct.len()
        )));
    }
    let total = confidence.len();
    Ok(thresholds
        .iter()
        .map(|&t| {
            let (retained, n_correct) = confidence
                .iter()
                .zip(correct)
                .filter(|(c, _)| **c >= t)
                .fold((0, 0), |(r, k), (_, ok)| (r + 1, k + usize::from(*ok)));
            ThresholdPoint {
                threshold: t,
                retained,
                total,
                retained_fraction: retained as f64 / total as f64,
                n_correct,
                accuracy: (retained > 0).then(|| n_correct as f64 / retained as f64),
            }
        })
        .collect())
}

/// Evenly spaced thresholds `0, 1/steps, …, 1`.
pub fn default_thresholds(steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| i as f64 / steps as f64).collect()
}

/// Accuracy when each cluster is credited with its most frequent label.
/// Noise counts as wrong. Diagnostic only.
pub fn majority_accuracy(cm: &ConfusionMatrix) -> Result<Accuracy> {
    let noise = cm.cols.len() - 1;
    let correct = (0..noise).map(|c| cm.counts.iter().map(|r| r[c]).max().unwrap_or(0)).sum();
    Accuracy::from_counts(correct, cm.total())
}

/// Best one-to-one pairing of labels and clusters as a mask. Noise and
/// unpaired clusters count as wrong. Diagnostic only.
pub fn matched_mask(cm: &ConfusionMatrix) -> Result<CorrectMask> {
    let n_labels = cm.rows.len();
    if n_labels > 20 {
        return Err(Error::invalid("labels", "more than 20 labels for exact matching"));
    }
    let n_clusters = cm.cols.len() - 1;
    let states = 1usize << n_labels;
    // best[c][used]: most correct sources over the first c clusters
    let mut best = vec![vec![i64::MIN; states]; n_clusters + 1];
    best[0][0] = 0;
    for c in 0..n_clusters {
        let (done, rest) = best.split_at_mut(c + 1);
        let (prev, next) = (&done[c], &mut rest[0]);
        next.copy_from_slice(prev);
        for used in 0..states {
            if prev[used] == i64::MIN {
                continue;
            }
            for (t, row) in cm.counts.iter().enumerate() {
                if used & (1 << t) == 0 {
                    let s = used | (1 << t);
                    next[s] = next[s].max(prev[used] + row[c] as i64);
                }
            }
        }
    }
    let mut used = (0..states).fold(0, |b, s| if best[n_clusters][s] > best[n_clusters][b] { s } else { b });
    let mut mask = CorrectMask::default();
    for c in (0..n_clusters).rev() {
        if best[c][used] == best[c + 1][used] {
            continue;
        }
        let t = (0..n_labels)
            .find(|&t| {
                used & (1 << t) != 0
                    && best[c][used ^ (1 << t)] != i64::MIN
                    && best[c][used ^ (1 << t)] + cm.counts[t][c] as i64 == best[c + 1][used]
            })
            .expect("a predecessor state exists");
        mask.0.insert(cm.rows[t].clone(), vec![cm.cols[c]]);
        used ^= 1 << t;
    }
    Ok(mask)
}

/// Accuracy under the best one-to-one pairing of labels and clusters.
pub fn matched_accuracy(cm: &ConfusionMatrix) -> Result<Accuracy> {
    accuracy(cm, &matched_mask(cm)?.cells(cm)?)
}

/// Mean feature vector of the members of each cluster (noise excluded).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterMean {
    pub cluster: i64,
    pub size: usize,
    pub mean: Vec<f64>,
}

pub fn cluster_means(matrix: &[Vec<f64>], model: &ClusterModel) -> Result<Vec<ClusterMean>> {
    if matrix.len() != model.n_points() {
        return Err(Error::ShapeMismatch(format!(
            "{} feature rows for {} clustered sources",
            matrix.len(),
            model.n_points()
        )));
    }
    let d = matrix.first().map(Vec::len).unwrap_or(0);
    Ok(model
        .cluster_ids
        .iter()
        .map(|&c| {
            let rows: Vec<&Vec<f64>> = matrix.iter().zip(&model.labels).filter(|(_, l)| **l == c).map(|(r, _)| r).collect();
            let mean = (0..d)
                .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / rows.len().max(1) as f64)
                .collect();
            ClusterMean { cluster: c, size: rows.len(), mean }
        })
        .collect())
}

/// Node of the feature dendrogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DendrogramNode {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub feature: Option<String>,
    pub height: f64,
    pub size: usize,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub children: Vec<DendrogramNode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DendrogramMerge {
    /// Node ids: features `0..k`, merge `i` creates node `k + i`.
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub features: Vec<String>,
    /// Zero-variance features left out of the hierarchy.
    pub excluded: Vec<String>,
    pub merges: Vec<DendrogramMerge>,
    pub root: DendrogramNode,
}

/// Correlation distance `1 − ρ` between feature columns.
pub fn correlation_distances(columns: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = columns.len();
    let mut d = vec![vec![0.0; k]; k];
    for a in 0..k {
        for b in (a + 1)..k {
            let rho = pearson(&columns[a], &columns[b]).unwrap_or(0.0);
            d[a][b] = 1.0 - rho;
            d[b][a] = d[a][b];
        }
    }
    d
}

/// Average-linkage agglomeration of a distance matrix. Ties merge the
/// pair with the smallest node ids first.
pub fn upgma(dist: &[Vec<f64>]) -> Vec<DendrogramMerge> {
    let k = dist.len();
    let mut d: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for a in 0..k {
        for b in (a + 1)..k {
            d.insert((a, b), dist[a][b]);
        }
    }
    let mut size: BTreeMap<usize, usize> = (0..k).map(|i| (i, 1)).collect();
    let mut merges = Vec::with_capacity(k.saturating_sub(1));
    for step in 0..k.saturating_sub(1) {
        let (&(a, b), &h) = d
            .iter()
            .min_by(|x, y| x.1.total_cmp(y.1).then(x.0.cmp(y.0)))
            .expect("pairs remain");
        let node = k + step;
        let (na, nb) = (size[&a], size[&b]);
        let others: Vec<usize> = size.keys().copied().filter(|x| *x != a && *x != b).collect();
        for o in others {
            let da = d.remove(&(o.min(a), o.max(a))).unwrap();
            let db = d.remove(&(o.min(b), o.max(b))).unwrap();
            d.insert((o, node), (na as f64 * da + nb as f64 * db) / (na + nb) as f64);
        }
        d.remove(&(a, b));
        size.remove(&a);
        size.remove(&b);
        size.insert(node, na + nb);
        merges.push(DendrogramMerge { left: a, right: b, height: h, size: na + nb });
    }
    merges
}

/// UPGMA hierarchy of the feature columns of `matrix` under correlation
/// distance.
pub fn feature_hierarchy(matrix: &[Vec<f64>], names: &[&str]) -> Result<Dendrogram> {
    let d = names.len();
    if matrix.iter().any(|r| r.len() != d) {
        return Err(Error::ShapeMismatch("rows do not match the feature names".into()));
    }
    let mut features = Vec::new();
    let mut excluded = Vec::new();
    let mut columns = Vec::new();
    for (j, name) in names.iter().enumerate() {
        let col: Vec<f64> = matrix.iter().map(|r| r[j]).collect();
        if col.len() >= 2 && crate::numeric::population_std(&col) > 0.0 {
            features.push(name.to_string());
            columns.push(col);
        } else {
            excluded.push(name.to_string());
        }
    }
    if features.len() < 2 {
        return Err(Error::ZeroVariance(format!(
            "{} feature columns with nonzero variance, need 2",
            features.len()
        )));
    }
    let merges = upgma(&correlation_distances(&columns));
    let k = features.len();
    let mut nodes: Vec<Option<DendrogramNode>> = features
        .iter()
        .map(|f| Some(DendrogramNode { feature: Some(f.clone()), height: 0.0, size: 1, children: Vec::new() }))
        .collect();
    for m in &merges {
        let left = nodes[m.left].take().expect("node merged once");
        let right = nodes[m.right].take().expect("node merged once");
        nodes.push(Some(DendrogramNode { feature: None, height: m.height, size: m.size, children: vec![left, right] }));
    }
    let root = nodes.pop().flatten().expect("root");
    debug_assert_eq!(root.size, k);
    Ok(Dendrogram { features, excluded, merges, root })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(labels: Vec<i64>, k: usize) -> ClusterModel {
        let n = labels.len();
        ClusterModel {
            confidence: labels.iter().map(|l| if *l == NOISE { 0.0 } else { 0.5 }).collect(),
            labels,
            hierarchy: Vec::new(),
            cluster_ids: (0..k as i64).collect(),
            cluster_nodes: (0..k).map(|c| n + 1 + c).collect(),
            point_lambda: vec![0.0; n],
            min_cluster_size: 2,
            min_samples: 2,
        }
    }

    fn s(v: &[&str]) -> Vec<Option<String>> {
        v.iter().map(|x| Some(x.to_string())).collect()
    }

    #[test]
    fn perfect_clustering_is_diagonal() {
        let m = model(vec![0, 0, 1, 1], 2);
        let cm = confusion(&s(&["a", "a", "b", "b"]), &m).unwrap();
        assert_eq!(cm.counts, vec![vec![2, 0, 0], vec![0, 2, 0]]);
        assert_eq!(cm.mean_confidence[0][0], Some(0.5));
        assert_eq!(cm.mean_confidence[0][1], None);
        assert_eq!(cm.total(), 4);
    }

    #[test]
    fn all_noise_goes_to_noise_column() {
        let m = model(vec![NOISE; 3], 0);
        let cm = confusion(&s(&["a", "b", "a"]), &m).unwrap();
        assert_eq!(cm.cols, vec![NOISE]);
        assert_eq!(cm.counts, vec![vec![2], vec![1]]);
    }

    #[test]
    fn mask_and_accuracy() {
        let m = model(vec![0, 0, 1, NOISE], 2);
        let cm = confusion(&s(&["a", "a", "b", "b"]), &m).unwrap();
        let mask = CorrectMask::from_json(r#"{"a": [0], "b": [1]}"#).unwrap();
        let acc = accuracy(&cm, &mask.cells(&cm).unwrap()).unwrap();
        assert_eq!((acc.n_correct, acc.n_wrong), (3, 1));
        let bad = CorrectMask::from_json(r#"{"c": [0]}"#).unwrap();
        assert!(bad.cells(&cm).is_err());
        let bad = CorrectMask::from_json(r#"{"a": [7]}"#).unwrap();
        assert!(bad.cells(&cm).is_err());
        let all = vec![vec![true; 3]; 2];
        assert_eq!(accuracy(&cm, &all).unwrap().fraction, 1.0);
        assert!(accuracy(&cm, &[vec![true; 3]]).is_err());
    }

    #[test]
    fn threshold_zero_keeps_everything() {
        let c = [0.0, 0.2, 0.9, 0.5];
        let ok = [false, true, true, false];
        let t = threshold_curve(&c, &ok, &[0.0, 0.3, 1.0]).unwrap();
        assert_eq!(t[0].retained_fraction, 1.0);
        assert_eq!(t[0].accuracy, Some(0.5));
        assert_eq!((t[1].retained, t[1].n_correct), (2, 1));
        assert_eq!(t[2].accuracy, None);
    }

    #[test]
    fn matched_accuracy_is_one_to_one() {
        let m = model(vec![0, 0, 1, 1, 1, 2], 3);
        let cm = confusion(&s(&["a", "a", "a", "a", "b", "b"]), &m).unwrap();
        // majority credits "a" to clusters 0 and 1
        assert_eq!(majority_accuracy(&cm).unwrap().n_correct, 5);
        assert_eq!(matched_accuracy(&cm).unwrap().n_correct, 3);
        let mask = matched_mask(&cm).unwrap();
        assert_eq!(mask.0.len(), 2);
        assert_ne!(mask.0["a"], mask.0["b"]);
    }

    #[test]
    fn duplicated_column_merges_first_at_zero() {
        let m = vec![vec![1.0, 1.0, 5.0], vec![2.0, 2.0, 3.0], vec![4.0, 4.0, 4.0], vec![3.0, 3.0, 1.0]];
        let d = feature_hierarchy(&m, &["a", "b", "c"]).unwrap();
        assert_eq!((d.merges[0].left, d.merges[0].right), (0, 1));
        assert!(d.merges[0].height.abs() < 1e-12);
        assert_eq!(d.root.size, 3);
    }

    #[test]
    fn constant_columns_excluded() {
        let m = vec![vec![1.0, 0.0, 2.0], vec![2.0, 0.0, 1.0], vec![3.0, 0.0, 5.0]];
        let d = feature_hierarchy(&m, &["a", "z", "c"]).unwrap();
        assert_eq!(d.excluded, vec!["z".to_string()]);
        assert!(feature_hierarchy(&m, &["a", "z"]).is_err());
    }

    #[test]
    fn means_exclude_noise() {
        let m = model(vec![0, 0, NOISE], 1);
        let x = vec![vec![1.0, 2.0], vec![3.0, 6.0], vec![100.0, 100.0]];
        let means = cluster_means(&x, &m).unwrap();
        assert_eq!(means[0].mean, vec![2.0, 4.0]);
        assert_eq!(means[0].size, 2);
    }
}

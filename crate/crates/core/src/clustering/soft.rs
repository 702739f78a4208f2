//! Soft membership of every point in every selected cluster.

use super::mst::euclidean;
use super::tree::TreeIndex;
use super::{ClusterModel, NOISE};
use crate::error::{Error, Result};

/// Points of the leaf clusters below `node` that persist longest.
fn exemplars(index: &TreeIndex, model: &ClusterModel, node: usize) -> Vec<usize> {
    let mut leaves: Vec<usize> = index
        .descendants(node)
        .into_iter()
        .filter(|c| index.children[*c].is_empty())
        .collect();
    if leaves.is_empty() {
        leaves.push(node);
    }
    let mut out = Vec::new();
    for leaf in leaves {
        let pts: Vec<usize> = (0..index.n_points).filter(|p| index.parent[*p] == leaf).collect();
        let top = pts.iter().map(|p| model.point_lambda[*p]).fold(f64::NEG_INFINITY, f64::max);
        out.extend(pts.into_iter().filter(|p| model.point_lambda[*p] == top));
    }
    out.sort_unstable();
    out
}

/// Lambda at which point `p` joins the branch of `cluster`.
fn merge_lambda(index: &TreeIndex, model: &ClusterModel, p: usize, cluster: usize) -> f64 {
    let home = index.parent[p];
    if index.is_ancestor_or_self(cluster, home) {
        return model.point_lambda[p];
    }
    // climb from the cluster until the branch contains the point
    let mut node = cluster;
    while !index.is_ancestor_or_self(index.parent[node], home) {
        node = index.parent[node];
    }
    index.birth[node].min(model.point_lambda[p])
}

fn relative(lambda: f64, max: f64) -> f64 {
    if lambda == max || max == 0.0 {
        1.0
    } else if max.is_infinite() {
        if lambda.is_infinite() {
            1.0
        } else {
            0.0
        }
    } else {
        (lambda / max).min(1.0)
    }
}

/// Probability of each point belonging to each cluster (columns in
/// cluster-id order).
///
/// The score of a cluster is the inverse distance to its nearest exemplar
/// times the relative lambda at which the point joins the cluster's branch.
/// Rows are normalized to sum to one; for clustered points the own cluster
/// is always the row maximum.
pub fn soft_memberships(model: &ClusterModel, points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = model.n_points();
    if points.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "model fitted on {n} points, got {}",
            points.len()
        )));
    }
    let k = model.n_clusters();
    if k == 0 {
        return Ok(vec![Vec::new(); n]);
    }
    let index = TreeIndex::new(&model.hierarchy, n);
    let ex: Vec<Vec<usize>> = model.cluster_nodes.iter().map(|c| exemplars(&index, model, *c)).collect();
    let max_lambda: Vec<f64> = ex
        .iter()
        .map(|e| e.iter().map(|p| model.point_lambda[*p]).fold(0.0, f64::max))
        .collect();

    let mut out = Vec::with_capacity(n);
    for p in 0..n {
        let dist: Vec<f64> = ex
            .iter()
            .map(|e| e.iter().map(|q| euclidean(&points[p], &points[*q])).fold(f64::INFINITY, f64::min))
            .collect();
        let tree_part: Vec<f64> = (0..k)
            .map(|c| relative(merge_lambda(&index, model, p, model.cluster_nodes[c]), max_lambda[c]))
            .collect();
        let mut row: Vec<f64> = if dist.iter().any(|d| *d == 0.0) {
            dist.iter().map(|d| if *d == 0.0 { 1.0 } else { 0.0 }).collect()
        } else {
            dist.iter().zip(&tree_part).map(|(d, t)| t / d).collect()
        };
        if row.iter().sum::<f64>() <= 0.0 || !row.iter().all(|v| v.is_finite()) {
            row = dist.iter().map(|d| if d.is_finite() { 1.0 / d.max(f64::MIN_POSITIVE) } else { 0.0 }).collect();
        }
        let s: f64 = row.iter().sum();
        if s > 0.0 && s.is_finite() {
            row.iter_mut().for_each(|v| *v /= s);
        } else {
            row = vec![1.0 / k as f64; k];
        }
        let label = model.labels[p];
        if label != NOISE {
            let own = label as usize;
            let top = (0..k).fold(own, |b, c| if row[c] > row[b] { c } else { b });
            row.swap(own, top);
        }
        out.push(row);
    }
    Ok(out)
}

//! Density-based hierarchical clustering (HDBSCAN) over a point matrix.

pub mod mst;
pub mod scan;
pub mod soft;
pub mod tree;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use mst::{core_distances, mutual_reachability, prim_mst, MstEdge};
pub use scan::{cluster_count_scan, knee, ScanPoint};
pub use soft::soft_memberships;
pub use tree::{ClusterSelection, CondensedEdge};

/// Default minimum cluster size.
pub const DEFAULT_MIN_CLUSTER_SIZE: usize = 7;

/// Label of points outside every cluster.
pub const NOISE: i64 = -1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HdbscanParams {
    pub min_cluster_size: usize,
    /// Neighbour count of the core distance; `None` uses `min_cluster_size`.
    pub min_samples: Option<usize>,
    pub selection: ClusterSelection,
}

impl Default for HdbscanParams {
    fn default() -> Self {
        HdbscanParams::new(DEFAULT_MIN_CLUSTER_SIZE)
    }
}

impl HdbscanParams {
    pub fn new(min_cluster_size: usize) -> Self {
        HdbscanParams {
            min_cluster_size,
            min_samples: None,
            selection: ClusterSelection::ExcessOfMass,
        }
    }

    pub fn effective_min_samples(&self) -> usize {
        self.min_samples.unwrap_or(self.min_cluster_size)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    /// Cluster id per point, [`NOISE`] for noise.
    pub labels: Vec<i64>,
    /// Membership strength in `[0, 1]`; 0 for noise.
    pub confidence: Vec<f64>,
    pub hierarchy: Vec<CondensedEdge>,
    pub cluster_ids: Vec<i64>,
    /// Condensed-tree node of each cluster id.
    pub cluster_nodes: Vec<usize>,
    /// Lambda at which each point left the tree.
    pub point_lambda: Vec<f64>,
    pub min_cluster_size: usize,
    pub min_samples: usize,
}

impl ClusterModel {
    pub fn n_clusters(&self) -> usize {
        self.cluster_ids.len()
    }

    pub fn n_points(&self) -> usize {
        self.labels.len()
    }
}

fn check_points(points: &[Vec<f64>]) -> Result<()> {
    let d = points.first().map(Vec::len).unwrap_or(0);
    if points.iter().any(|p| p.len() != d) {
        return Err(Error::ShapeMismatch("points of unequal dimension".into()));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("points", "non-finite coordinate"));
    }
    Ok(())
}

pub fn hdbscan_fit(points: &[Vec<f64>], params: &HdbscanParams) -> Result<ClusterModel> {
    let n = points.len();
    let mcs = params.min_cluster_size;
    let min_samples = params.effective_min_samples();
    if mcs < 2 {
        return Err(Error::invalid("min_cluster_size", format!("must be >= 2, got {mcs}")));
    }
    if n <= mcs {
        return Err(Error::InsufficientData(format!("{n} points for min_cluster_size {mcs}")));
    }
    if min_samples < 1 {
        return Err(Error::invalid("min_samples", "must be >= 1"));
    }
    check_points(points)?;

    let core = core_distances(points, min_samples);
    let edges = prim_mst(points, &core);
    let merges = tree::single_linkage(n, &edges);
    let hierarchy = tree::condense(&merges, n, mcs);
    let index = tree::TreeIndex::new(&hierarchy, n);
    let selected = tree::select_clusters(&index, params.selection);

    let mut point_lambda = vec![0.0; n];
    for e in hierarchy.iter().filter(|e| e.child < n) {
        point_lambda[e.child] = e.lambda;
    }

    // owning selected node per point
    let owner: Vec<Option<usize>> = (0..n)
        .map(|p| {
            let mut node = index.parent[p];
            loop {
                if selected.contains(&node) {
                    return Some(node);
                }
                if node == index.root() {
                    return None;
                }
                node = index.parent[node];
            }
        })
        .collect();

    let root_selected = selected == [index.root()];
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); selected.len()];
    for (p, o) in owner.iter().enumerate() {
        if let Some(o) = o {
            let slot = selected.iter().position(|s| s == o).unwrap();
            members[slot].push(p);
        }
    }
    // a cluster dies at the largest lambda among its direct children
    let max_lambda: Vec<f64> = selected
        .iter()
        .map(|&node| {
            hierarchy
                .iter()
                .filter(|e| e.parent == node)
                .map(|e| e.lambda)
                .fold(0.0, f64::max)
        })
        .collect();
    if root_selected {
        // a lone root keeps only the points that persist to the end
        let top = max_lambda[0];
        members[0].retain(|p| point_lambda[*p] >= top);
    }

    // canonical numbering by first member
    let mut order: Vec<usize> = (0..selected.len()).filter(|k| !members[*k].is_empty()).collect();
    order.sort_by_key(|k| members[*k][0]);
    let mut labels = vec![NOISE; n];
    let mut confidence = vec![0.0; n];
    let mut cluster_nodes = Vec::with_capacity(order.len());
    for (id, &k) in order.iter().enumerate() {
        cluster_nodes.push(selected[k]);
        for &p in &members[k] {
            labels[p] = id as i64;
            confidence[p] = membership_strength(point_lambda[p], max_lambda[k]);
        }
    }
    Ok(ClusterModel {
        labels,
        confidence,
        hierarchy,
        cluster_ids: (0..order.len() as i64).collect(),
        cluster_nodes,
        point_lambda,
        min_cluster_size: mcs,
        min_samples,
    })
}

fn membership_strength(lambda: f64, max_lambda: f64) -> f64 {
    if max_lambda == 0.0 || lambda == max_lambda {
        1.0
    } else if max_lambda.is_infinite() {
        0.0
    } else {
        (lambda / max_lambda).min(1.0)
    }
}

/// Nested view of the condensed tree: clusters with their point members
/// and child clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyNode {
    pub node: usize,
    /// Cluster id when this node was selected.
    pub cluster: Option<i64>,
    pub birth_lambda: f64,
    pub size: usize,
    pub stability: f64,
    pub points: Vec<usize>,
    pub children: Vec<HierarchyNode>,
}

pub fn hierarchy_tree(model: &ClusterModel) -> HierarchyNode {
    let n = model.n_points();
    let index = tree::TreeIndex::new(&model.hierarchy, n);
    fn build(index: &tree::TreeIndex, model: &ClusterModel, node: usize) -> HierarchyNode {
        let points: Vec<usize> = model
            .hierarchy
            .iter()
            .filter(|e| e.parent == node && e.child < index.n_points)
            .map(|e| e.child)
            .collect();
        let children: Vec<HierarchyNode> = index.children[node].iter().map(|c| build(index, model, *c)).collect();
        let size = points.len() + children.iter().map(|c| c.size).sum::<usize>();
        HierarchyNode {
            node,
            cluster: model.cluster_nodes.iter().position(|c| *c == node).map(|k| k as i64),
            birth_lambda: index.birth[node],
            size,
            stability: index.stability[node],
            points,
            children,
        }
    }
    build(&index, model, index.root())
}

//! Single-linkage dendrogram, condensed tree and cluster selection.

use serde::{Deserialize, Serialize};

use super::mst::MstEdge;

/// Merge of two nodes of the single-linkage dendrogram; node `n + i` is
/// created by row `i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    pub size: usize,
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..2 * n).collect(),
            size: (0..2 * n).map(|i| usize::from(i < n)).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
}

/// Builds the dendrogram from MST edges sorted by weight.
pub fn single_linkage(n: usize, edges: &[MstEdge]) -> Vec<Merge> {
    let mut uf = UnionFind::new(n);
    let mut merges = Vec::with_capacity(edges.len());
    for (i, e) in edges.iter().enumerate() {
        let ra = uf.find(e.a);
        let rb = uf.find(e.b);
        let node = n + i;
        let size = uf.size[ra] + uf.size[rb];
        uf.parent[ra] = node;
        uf.parent[rb] = node;
        uf.size[node] = size;
        merges.push(Merge {
            left: ra.min(rb),
            right: ra.max(rb),
            distance: e.weight,
            size,
        });
    }
    merges
}

/// Edge of the condensed tree. Points keep their index; clusters are
/// numbered from `n` with the root at `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CondensedEdge {
    pub parent: usize,
    pub child: usize,
    pub lambda: f64,
    pub child_size: usize,
}

fn lambda_of(distance: f64) -> f64 {
    if distance > 0.0 {
        1.0 / distance
    } else {
        f64::INFINITY
    }
}

/// `a − b` with equal infinities treated as no difference.
pub(crate) fn lambda_diff(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        a - b
    }
}

fn node_size(merges: &[Merge], n: usize, node: usize) -> usize {
    if node < n {
        1
    } else {
        merges[node - n].size
    }
}

fn leaves(merges: &[Merge], n: usize, node: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut stack = vec![node];
    while let Some(x) = stack.pop() {
        if x < n {
            out.push(x);
        } else {
            let m = merges[x - n];
            stack.push(m.right);
            stack.push(m.left);
        }
    }
    out.sort_unstable();
    out
}

/// Condenses the dendrogram: splits where a side has fewer than
/// `min_cluster_size` points become points falling out of the parent.
pub fn condense(merges: &[Merge], n: usize, min_cluster_size: usize) -> Vec<CondensedEdge> {
    let mut out = Vec::new();
    if merges.is_empty() {
        return out;
    }
    let root = n + merges.len() - 1;
    let mut relabel = vec![0usize; root + 1];
    relabel[root] = n;
    let mut next = n + 1;
    let mut queue = std::collections::VecDeque::from([root]);
    while let Some(node) = queue.pop_front() {
        let m = merges[node - n];
        let lambda = lambda_of(m.distance);
        let parent = relabel[node];
        let (ls, rs) = (node_size(merges, n, m.left), node_size(merges, n, m.right));
        let fall_out = |out: &mut Vec<CondensedEdge>, child: usize| {
            for p in leaves(merges, n, child) {
                out.push(CondensedEdge { parent, child: p, lambda, child_size: 1 });
            }
        };
        if ls >= min_cluster_size && rs >= min_cluster_size {
            for (child, size) in [(m.left, ls), (m.right, rs)] {
                relabel[child] = next;
                out.push(CondensedEdge { parent, child: next, lambda, child_size: size });
                next += 1;
                queue.push_back(child);
            }
        } else {
            for (child, size) in [(m.left, ls), (m.right, rs)] {
                if size >= min_cluster_size {
                    relabel[child] = parent;
                    queue.push_back(child);
                } else {
                    fall_out(&mut out, child);
                }
            }
        }
    }
    out
}

/// Condensed-tree queries used by selection and labelling.
pub struct TreeIndex {
    pub n_points: usize,
    pub n_clusters: usize,
    /// Parent cluster of every point and cluster (root maps to itself).
    pub parent: Vec<usize>,
    /// Lambda at which each node left its parent (0 for the root).
    pub birth: Vec<f64>,
    pub children: Vec<Vec<usize>>,
    pub stability: Vec<f64>,
}

impl TreeIndex {
    pub fn new(edges: &[CondensedEdge], n_points: usize) -> Self {
        let n_clusters = edges
            .iter()
            .map(|e| e.parent.max(e.child) + 1)
            .max()
            .unwrap_or(n_points + 1)
            .max(n_points + 1)
            - n_points;
        let total = n_points + n_clusters;
        let root = n_points;
        let mut parent = vec![root; total];
        let mut birth = vec![0.0; total];
        let mut children = vec![Vec::new(); total];
        for e in edges {
            parent[e.child] = e.parent;
            birth[e.child] = e.lambda;
            if e.child >= n_points {
                children[e.parent].push(e.child);
            }
        }
        let mut stability = vec![0.0; total];
        for e in edges {
            stability[e.parent] += lambda_diff(e.lambda, birth[e.parent]) * e.child_size as f64;
        }
        TreeIndex { n_points, n_clusters, parent, birth, children, stability }
    }

    pub fn root(&self) -> usize {
        self.n_points
    }

    pub fn clusters(&self) -> std::ops::Range<usize> {
        self.n_points..self.n_points + self.n_clusters
    }

    pub fn is_ancestor_or_self(&self, ancestor: usize, mut node: usize) -> bool {
        loop {
            if node == ancestor {
                return true;
            }
            if node == self.root() {
                return false;
            }
            node = self.parent[node];
        }
    }

    pub fn descendants(&self, cluster: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = self.children[cluster].clone();
        while let Some(c) = stack.pop() {
            out.push(c);
            stack.extend(self.children[c].iter().copied());
        }
        out
    }
}

/// How clusters are picked from the condensed tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterSelection {
    /// Maximize total stability (excess of mass).
    #[default]
    ExcessOfMass,
    /// Take every leaf of the condensed tree.
    Leaf,
}

/// Selected cluster nodes, ascending. The root is only chosen when the tree
/// never splits.
pub fn select_clusters(tree: &TreeIndex, selection: ClusterSelection) -> Vec<usize> {
    let root = tree.root();
    if tree.children[root].is_empty() {
        return vec![root];
    }
    let candidates: Vec<usize> = tree.clusters().filter(|c| *c != root).collect();
    let mut selected = vec![false; tree.n_points + tree.n_clusters];
    match selection {
        ClusterSelection::Leaf => {
            for &c in &candidates {
                selected[c] = tree.children[c].is_empty();
            }
        }
        ClusterSelection::ExcessOfMass => {
            let mut stability = tree.stability.clone();
            for &c in &candidates {
                selected[c] = true;
            }
            // children always carry larger ids than their parents
            for &c in candidates.iter().rev() {
                let sub: f64 = tree.children[c].iter().map(|k| stability[*k]).sum();
                if sub > stability[c] {
                    selected[c] = false;
                    stability[c] = sub;
                } else {
                    for d in tree.descendants(c) {
                        selected[d] = false;
                    }
                }
            }
        }
    }
    candidates.into_iter().filter(|c| selected[*c]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_linkage_sizes() {
        let edges = vec![
            MstEdge { a: 0, b: 1, weight: 1.0 },
            MstEdge { a: 2, b: 3, weight: 1.5 },
            MstEdge { a: 1, b: 2, weight: 4.0 },
        ];
        let m = single_linkage(4, &edges);
        assert_eq!(m[0], Merge { left: 0, right: 1, distance: 1.0, size: 2 });
        assert_eq!(m[1], Merge { left: 2, right: 3, distance: 1.5, size: 2 });
        assert_eq!(m[2], Merge { left: 4, right: 5, distance: 4.0, size: 4 });
    }

    #[test]
    fn condensing_small_splits_drops_points() {
        let edges = vec![
            MstEdge { a: 0, b: 1, weight: 1.0 },
            MstEdge { a: 2, b: 3, weight: 1.5 },
            MstEdge { a: 1, b: 2, weight: 4.0 },
        ];
        let m = single_linkage(4, &edges);
        let c = condense(&m, 4, 2);
        assert_eq!(c.len(), 6);
        assert_eq!(c[0], CondensedEdge { parent: 4, child: 5, lambda: 0.25, child_size: 2 });
        let c = condense(&m, 4, 3);
        assert!(c.iter().all(|e| e.parent == 4 && e.child_size == 1));
    }
}

//! Core distances, mutual reachability and the exact minimum spanning tree.

use serde::{Deserialize, Serialize};

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Distance of every point to its `min_samples`-th nearest neighbour, the
/// point itself counted as the first.
pub fn core_distances(points: &[Vec<f64>], min_samples: usize) -> Vec<f64> {
    let k = min_samples.clamp(1, points.len().max(1));
    points
        .iter()
        .map(|p| {
            let mut d: Vec<f64> = points.iter().map(|q| euclidean(p, q)).collect();
            d.select_nth_unstable_by(k - 1, f64::total_cmp);
            d[k - 1]
        })
        .collect()
}

pub fn mutual_reachability(points: &[Vec<f64>], core: &[f64], a: usize, b: usize) -> f64 {
    euclidean(&points[a], &points[b]).max(core[a]).max(core[b])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MstEdge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Prim's algorithm on the complete mutual-reachability graph.
///
/// Ties in mutual reachability are broken by the plain distance, then by
/// index, so the tree does not depend on row order unless distances tie.
/// Edges come back sorted by the same key.
pub fn prim_mst(points: &[Vec<f64>], core: &[f64]) -> Vec<MstEdge> {
    let n = points.len();
    if n < 2 {
        return Vec::new();
    }
    let less = |x: (f64, f64), y: (f64, f64)| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)).is_lt();
    let mut in_tree = vec![false; n];
    let mut best = vec![(f64::INFINITY, f64::INFINITY); n];
    let mut from = vec![0usize; n];
    let mut keyed = Vec::with_capacity(n - 1);
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let mut next = usize::MAX;
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            let d = euclidean(&points[current], &points[v]);
            let k = (d.max(core[current]).max(core[v]), d);
            if less(k, best[v]) || (k == best[v] && current < from[v]) {
                best[v] = k;
                from[v] = current;
            }
            if next == usize::MAX || less(best[v], best[next]) {
                next = v;
            }
        }
        in_tree[next] = true;
        let edge = MstEdge { a: from[next].min(next), b: from[next].max(next), weight: best[next].0 };
        keyed.push((best[next].1, edge));
        current = next;
    }
    keyed.sort_by(|(dx, x), (dy, y)| {
        x.weight.total_cmp(&y.weight).then(dx.total_cmp(dy)).then(x.a.cmp(&y.a)).then(x.b.cmp(&y.b))
    });
    keyed.into_iter().map(|(_, e)| e).collect()
}

pub fn sort_edges(edges: &mut [MstEdge]) {
    edges.sort_by(|x, y| x.weight.total_cmp(&y.weight).then(x.a.cmp(&y.a)).then(x.b.cmp(&y.b)));
}

//! Brute-force oracles shared by the cross-check and acceptance tests.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Maximal runs of defined values.
pub fn spans(row: &[Option<f64>]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < row.len() {
        if row[i].is_none() {
            i += 1;
            continue;
        }
        let s = i;
        while i < row.len() && row[i].is_some() {
            i += 1;
        }
        out.push((s, i));
    }
    out
}

/// Local maxima (plateau midpoints) with their prominence, by direct search.
pub fn brute_peaks(row: &[Option<f64>]) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    for (s, e) in spans(row) {
        let v: Vec<f64> = row[s..e].iter().map(|x| x.unwrap()).collect();
        let n = v.len();
        let mut i = 1;
        while i + 1 < n {
            if v[i] > v[i - 1] {
                let mut j = i;
                while j + 1 < n && v[j + 1] == v[i] {
                    j += 1;
                }
                if j + 1 < n && v[j + 1] < v[i] {
                    let mid = (i + j) / 2;
                    let h = v[mid];
                    let mut left_min = h;
                    for k in (0..mid).rev() {
                        if v[k] > h {
                            break;
                        }
                        left_min = left_min.min(v[k]);
                    }
                    let mut right_min = h;
                    for &x in &v[mid + 1..] {
                        if x > h {
                            break;
                        }
                        right_min = right_min.min(x);
                    }
                    out.push((s + mid, h - left_min.max(right_min)));
                }
                i = j + 1;
            } else {
                i += 1;
            }
        }
    }
    out
}

pub fn random_row(rng: &mut ChaCha8Rng) -> Vec<Option<f64>> {
    let n = rng.random_range(3..60);
    (0..n)
        .map(|_| {
            if rng.random_bool(0.08) {
                None
            } else {
                // half-dB quantization produces plateaus
                Some((rng.random_range(0.0..20.0f64) * 2.0).round() / 2.0)
            }
        })
        .collect()
}

/// Sorted MST weights of the mutual-reachability graph by Kruskal's algorithm.
pub fn kruskal_weights(points: &[Vec<f64>], min_samples: usize) -> Vec<f64> {
    let n = points.len();
    let dist = |a: usize, b: usize| -> f64 {
        points[a].iter().zip(&points[b]).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    };
    let core: Vec<f64> = (0..n)
        .map(|i| {
            let mut d: Vec<f64> = (0..n).map(|j| dist(i, j)).collect();
            d.sort_by(|a, b| a.total_cmp(b));
            d[min_samples - 1]
        })
        .collect();
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            edges.push((dist(a, b).max(core[a]).max(core[b]), a, b));
        }
    }
    edges.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut comp: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    for (w, a, b) in edges {
        let (ca, cb) = (comp[a], comp[b]);
        if ca != cb {
            for c in comp.iter_mut() {
                if *c == cb {
                    *c = ca;
                }
            }
            out.push(w);
        }
    }
    out
}

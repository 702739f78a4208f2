//! Cluster count as a function of the minimum cluster size.

use serde::{Deserialize, Serialize};

use super::{hdbscan_fit, ClusterSelection, HdbscanParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub size: usize,
    pub n_clusters: usize,
}

/// Fits one model per size with `min_samples` equal to the size.
pub fn cluster_count_scan(points: &[Vec<f64>], sizes: &[usize]) -> Result<Vec<ScanPoint>> {
    let n = points.len();
    sizes
        .iter()
        .map(|&size| {
            if size < 2 || size + 1 > n {
                return Err(Error::invalid("sizes", format!("{size} outside [2, {}]", n.saturating_sub(1))));
            }
            let params = HdbscanParams {
                min_cluster_size: size,
                min_samples: None,
                selection: ClusterSelection::ExcessOfMass,
            };
            Ok(ScanPoint { size, n_clusters: hdbscan_fit(points, &params)?.n_clusters() })
        })
        .collect()
}

/// Size after which the cluster count only decreases slightly.
///
/// With backward differences `d_k = count[k−1] − count[k]`, the knee is the
/// size just before the first drop after the steepest one that is smaller
/// than 10% of the steepest drop.
pub fn knee(scan: &[ScanPoint]) -> Option<usize> {
    let first = scan.first()?;
    if scan.len() < 2 {
        return Some(first.size);
    }
    let d: Vec<f64> = scan
        .windows(2)
        .map(|w| w[0].n_clusters as f64 - w[1].n_clusters as f64)
        .collect();
    let (k_max, d_max) = d
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (k, v)| if *v > acc.1 { (k, *v) } else { acc });
    if d_max <= 0.0 {
        return Some(first.size);
    }
    // d[k] is the drop into scan[k + 1]
    (k_max + 1..d.len())
        .find(|&k| d[k] < 0.1 * d_max)
        .map(|k| scan[k].size)
        .or(Some(scan[scan.len() - 1].size))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(counts: &[(usize, usize)]) -> Vec<ScanPoint> {
        counts.iter().map(|&(size, n_clusters)| ScanPoint { size, n_clusters }).collect()
    }

    #[test]
    fn knee_after_steep_drop() {
        let s = pts(&[(2, 40), (3, 25), (4, 16), (5, 11), (6, 10), (7, 10), (8, 9)]);
        // drops 15, 9, 5, 1, 0, 1: first below 1.5 after the max is 1 (into size 6)
        assert_eq!(knee(&s), Some(5));
    }

    #[test]
    fn flat_counts_pick_first_size() {
        let s = pts(&[(2, 3), (3, 3), (4, 3)]);
        assert_eq!(knee(&s), Some(2));
        assert_eq!(knee(&[]), None);
    }
}

//! RBF kernel principal component analysis.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default fraction of kernel variance to keep.
pub const DEFAULT_RETAIN: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedMatrix {
    /// `n × k` component scores.
    pub scores: Vec<Vec<f64>>,
    /// All clipped eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// Share of the total variance of each retained component.
    pub explained: Vec<f64>,
    pub retained_fraction: f64,
    pub kernel_gamma: f64,
}

impl ReducedMatrix {
    pub fn n_components(&self) -> usize {
        self.explained.len()
    }
}

fn check_matrix(x: &[Vec<f64>]) -> Result<usize> {
    let d = x.first().map(Vec::len).unwrap_or(0);
    if x.iter().any(|r| r.len() != d) {
        return Err(Error::ShapeMismatch("rows of unequal length".into()));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("matrix", "non-finite entry"));
    }
    Ok(d)
}

/// `exp(−γ·|xi − xj|²)` for all pairs.
pub fn rbf_kernel(x: &[Vec<f64>], gamma: f64) -> DMatrix<f64> {
    let n = x.len();
    DMatrix::from_fn(n, n, |i, j| {
        let d2: f64 = x[i].iter().zip(&x[j]).map(|(a, b)| (a - b).powi(2)).sum();
        (-gamma * d2).exp()
    })
}

/// `K − 1K − K1 + 1K1` with `1` the matrix of entries `1/n`.
pub fn center_kernel(k: &DMatrix<f64>) -> DMatrix<f64> {
    let n = k.nrows();
    let row_means: Vec<f64> = (0..n).map(|i| k.row(i).sum() / n as f64).collect();
    let col_means: Vec<f64> = (0..n).map(|j| k.column(j).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    DMatrix::from_fn(n, n, |i, j| k[(i, j)] - row_means[i] - col_means[j] + grand)
}

/// Projects `x` onto the leading kernel principal components whose
/// eigenvalues add up to at least `retain` of the total.
///
/// `kernel_gamma` defaults to `1/d`. Eigenvectors are oriented so their
/// largest-magnitude entry is positive. Rows are decomposed in
/// lexicographic order, so permuting the input permutes the scores exactly.
pub fn kpca_reduce(x: &[Vec<f64>], kernel_gamma: Option<f64>, retain: f64) -> Result<ReducedMatrix> {
    let n = x.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!("{n} rows, need 3")));
    }
    if !(retain > 0.0 && retain <= 1.0) {
        return Err(Error::invalid("retain", format!("must lie in (0, 1], got {retain}")));
    }
    let d = check_matrix(x)?;
    let gamma = kernel_gamma.unwrap_or(1.0 / d.max(1) as f64);
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::invalid("kernel_gamma", format!("must be positive, got {gamma}")));
    }
    let mut rows: Vec<usize> = (0..n).collect();
    rows.sort_by(|&a, &b| {
        x[a].iter().zip(&x[b]).map(|(p, q)| p.total_cmp(q)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    });
    let sorted: Vec<Vec<f64>> = rows.iter().map(|&i| x[i].clone()).collect();
    let kc = center_kernel(&rbf_kernel(&sorted, gamma));
    let eig = SymmetricEigen::try_new(kc, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Eigen("symmetric eigensolver did not converge".into()))?;

    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    if top <= 0.0 {
        return Err(Error::Degenerate("all rows are identical".into()));
    }
    let floor = top * 1e-12;
    let mut order: Vec<usize> = (0..n).collect();
    let clipped: Vec<f64> = eig.eigenvalues.iter().map(|&v| if v > floor { v } else { 0.0 }).collect();
    order.sort_by(|&a, &b| clipped[b].total_cmp(&clipped[a]).then(a.cmp(&b)));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| clipped[i]).collect();
    let total: f64 = eigenvalues.iter().sum();

    let mut k = 0;
    let mut acc = 0.0;
    while k < n && eigenvalues[k] > 0.0 && acc < retain * total * (1.0 - 1e-12) {
        acc += eigenvalues[k];
        k += 1;
    }

    let mut scores = vec![vec![0.0; k]; n];
    for (c, &i) in order.iter().take(k).enumerate() {
        let v = eig.eigenvectors.column(i);
        let pivot = v.iter().cloned().fold(0.0f64, |m, e| if e.abs() > m.abs() { e } else { m });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        let s = eigenvalues[c].sqrt() * sign;
        for (r, &i) in rows.iter().enumerate() {
            scores[i][c] = v[r] * s;
        }
    }
    Ok(ReducedMatrix {
        scores,
        explained: eigenvalues[..k].iter().map(|v| v / total).collect(),
        retained_fraction: acc / total,
        eigenvalues,
        kernel_gamma: gamma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equilateral_triangle_has_double_eigenvalue() {
        let s = 1.3;
        let x = vec![
            vec![0.0, 0.0],
            vec![s, 0.0],
            vec![0.5 * s, 0.75f64.sqrt() * s],
        ];
        let r = kpca_reduce(&x, Some(0.4), 1.0).unwrap();
        let e = (-0.4 * s * s).exp();
        assert_eq!(r.n_components(), 2);
        assert!((r.eigenvalues[0] - (1.0 - e)).abs() < 1e-12);
        assert!((r.eigenvalues[1] - (1.0 - e)).abs() < 1e-12);
        assert_eq!(r.eigenvalues[2], 0.0);
    }

    #[test]
    fn identical_rows_are_degenerate() {
        let x = vec![vec![1.0, 2.0]; 4];
        assert!(matches!(kpca_reduce(&x, None, 0.95), Err(Error::Degenerate(_))));
    }

    #[test]
    fn duplicated_rows_share_scores() {
        let x = vec![vec![0.0, 1.0], vec![2.0, 0.5], vec![0.0, 1.0], vec![-1.0, 3.0]];
        let r = kpca_reduce(&x, None, 1.0).unwrap();
        for (a, b) in r.scores[0].iter().zip(&r.scores[2]) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}

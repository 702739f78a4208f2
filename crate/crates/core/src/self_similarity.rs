//! Cross-Mach spectral collapse and the generalized normalization exponent.

use serde::{Deserialize, Serialize};

use crate::data_model::SourceRecord;
use crate::error::{Error, Result};
use crate::numeric::{golden_max, mean, pearson, population_std, student_t_two_sided};
use crate::spectra_prep::{to_log_grid, FrequencyType, SpectrumSet};
use crate::tonality::detect_peaks;

/// Upper end of the exponent search.
pub const M_MAX: f64 = 2.0;
/// Exponent grid step.
pub const M_STEP: f64 = 0.01;
/// Minimum prominence of a secondary maximum of the scal curve.
pub const M_PROMINENCE: f64 = 0.1;
/// Exponents above this are accepted directly as flow-scaling exponent.
pub const M_ST_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalResult {
    pub scal: f64,
    pub corr_mean: f64,
    pub corr_std: f64,
    pub p_mean: f64,
    pub n_pairs: usize,
}

impl ScalResult {
    /// Value exported as a feature, clamped to `[0, 1]`.
    pub fn feature_value(&self) -> f64 {
        self.scal.clamp(0.0, 1.0)
    }
}

/// Pearson coefficient and two-sided p-value over the pairs where both
/// entries are defined.
pub fn pearson_with_p(a: &[Option<f64>], b: &[Option<f64>]) -> Result<(f64, f64)> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!("rows of length {} and {}", a.len(), b.len())));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = a
        .iter()
        .zip(b)
        .filter_map(|(u, v)| Some(((*u)?, (*v)?)))
        .unzip();
    let n = x.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!("{n} shared defined bins, need 3")));
    }
    let rho = pearson(&x, &y).ok_or_else(|| Error::ZeroVariance("correlated row".into()))?;
    let df = (n - 2) as f64;
    let denom = 1.0 - rho * rho;
    let t = if denom <= 0.0 {
        f64::INFINITY
    } else {
        rho.abs() * (df / denom).sqrt()
    };
    Ok((rho, student_t_two_sided(t, df)))
}

/// Broadband self-similarity of all Mach rows of `set`.
pub fn scal(set: &SpectrumSet) -> Result<ScalResult> {
    let j = set.n_rows();
    if j < 2 {
        return Err(Error::InsufficientData(format!("{j} Mach rows, need 2")));
    }
    let mut rhos = Vec::with_capacity(j * (j - 1) / 2);
    let mut ps = Vec::with_capacity(rhos.capacity());
    for a in 0..j {
        for b in (a + 1)..j {
            let (rho, p) = pearson_with_p(&set.psd[a], &set.psd[b])?;
            rhos.push(rho);
            ps.push(p);
        }
    }
    let corr_mean = mean(&rhos);
    let corr_std = population_std(&rhos);
    let p_mean = mean(&ps);
    Ok(ScalResult {
        scal: (corr_mean - corr_std) * (1.0 - p_mean),
        corr_mean,
        corr_std,
        p_mean,
        n_pairs: rhos.len(),
    })
}

/// Self-similarity under the generalized frequency `f·D0/(M^m·a)`.
pub fn scal_at(record: &SourceRecord, m: f64) -> Result<ScalResult> {
    scal(&to_log_grid(record, FrequencyType::Generalized(m))?)
}

/// Self-similarity for each exponent of `m_grid`; `None` where it is undefined.
pub fn scal_curve(record: &SourceRecord, m_grid: &[f64]) -> Result<Vec<Option<ScalResult>>> {
    if m_grid.is_empty() {
        return Err(Error::invalid("m_grid", "empty"));
    }
    if m_grid.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
        return Err(Error::invalid("m_grid", "exponents must be finite and nonnegative"));
    }
    if m_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("m_grid", "must be strictly increasing"));
    }
    Ok(m_grid.iter().map(|&m| scal_at(record, m).ok()).collect())
}

/// The default exponent grid `0, 0.01, …, 2`.
pub fn default_m_grid() -> Vec<f64> {
    let n = (M_MAX / M_STEP).round() as usize;
    (0..=n).map(|k| k as f64 * M_STEP).collect()
}

/// Exponent analysis of one source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentAnalysis {
    pub m_star: f64,
    pub scal_at_m_star: f64,
    pub m_st: f64,
    pub m_grid: Vec<f64>,
    /// Scal on `m_grid`, zero where undefined.
    pub curve: Vec<f64>,
}

fn scal_or_neg_inf(record: &SourceRecord, m: f64) -> f64 {
    scal_at(record, m).map(|r| r.scal).unwrap_or(f64::NEG_INFINITY)
}

/// Computes `m*` and `m_St` from one sweep of the exponent grid.
pub fn analyze_exponent(record: &SourceRecord) -> Result<ExponentAnalysis> {
    let m_grid = default_m_grid();
    let results = scal_curve(record, &m_grid)?;
    let values: Vec<Option<f64>> = results.iter().map(|r| r.map(|r| r.scal)).collect();
    let (k_best, v_best) = values
        .iter()
        .enumerate()
        .filter_map(|(k, v)| v.map(|v| (k, v)))
        .fold(None, |best: Option<(usize, f64)>, (k, v)| match best {
            Some((_, bv)) if bv >= v => best,
            _ => Some((k, v)),
        })
        .ok_or_else(|| Error::InsufficientData(format!("source `{}`: scal undefined for every m", record.id)))?;

    let lo = m_grid[k_best.saturating_sub(1)];
    let hi = m_grid[(k_best + 1).min(m_grid.len() - 1)];
    let (m_ref, v_ref) = golden_max(|m| scal_or_neg_inf(record, m), lo, hi, 1e-3);
    let (m_star, scal_star) = if v_ref > v_best {
        (m_ref, v_ref)
    } else {
        (m_grid[k_best], v_best)
    };

    let m_st = if m_star > M_ST_THRESHOLD {
        m_star
    } else {
        let start = m_grid.partition_point(|m| *m < M_ST_THRESHOLD - 1e-12);
        secondary_maximum(&m_grid[start..], &values[start..]).unwrap_or(1.0)
    };

    Ok(ExponentAnalysis {
        m_star,
        scal_at_m_star: scal_star,
        m_st,
        curve: values.iter().map(|v| v.unwrap_or(0.0)).collect(),
        m_grid,
    })
}

/// Location of the most prominent interior maximum of a curve segment.
pub fn secondary_maximum(m_grid: &[f64], values: &[Option<f64>]) -> Option<f64> {
    detect_peaks(values, M_PROMINENCE)
        .into_iter()
        .fold(None, |best: Option<(usize, f64)>, p| match best {
            Some((_, bp)) if bp >= p.prominence => best,
            _ => Some((p.index, p.prominence)),
        })
        .map(|(k, _)| m_grid[k])
}

pub fn m_star(record: &SourceRecord) -> Result<f64> {
    analyze_exponent(record).map(|a| a.m_star)
}

pub fn m_st(record: &SourceRecord) -> Result<f64> {
    analyze_exponent(record).map(|a| a.m_st)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set_from(rows: Vec<Vec<Option<f64>>>) -> SpectrumSet {
        let n = rows[0].len();
        SpectrumSet {
            freq_type: FrequencyType::Strouhal,
            grid: (0..n).map(|k| 2f64.powf(k as f64 / 12.0)).collect(),
            machs: (0..rows.len()).map(|j| 0.1 + 0.02 * j as f64).collect(),
            psd: rows,
        }
    }

    #[test]
    fn self_and_anti_correlation() {
        let a: Vec<Option<f64>> = (0..20).map(|i| Some((i as f64 * 0.3).sin() + i as f64 * 0.1)).collect();
        let (rho, p) = pearson_with_p(&a, &a).unwrap();
        assert!((rho - 1.0).abs() < 1e-12);
        assert!(p < 1e-12);
        let b: Vec<Option<f64>> = a.iter().map(|v| v.map(|v| 7.0 - v)).collect();
        let (rho, _) = pearson_with_p(&a, &b).unwrap();
        assert!((rho + 1.0).abs() < 1e-12);
    }

    #[test]
    fn undefined_pairs_are_dropped() {
        let a = vec![Some(1.0), None, Some(3.0), Some(2.0), Some(5.0)];
        let b = vec![Some(2.0), Some(9.0), None, Some(4.0), Some(10.0)];
        let (rho, _) = pearson_with_p(&a, &b).unwrap();
        assert!((rho - 1.0).abs() < 1e-12);
        let c = vec![Some(1.0), None, None, None, Some(2.0)];
        assert!(pearson_with_p(&a, &c).is_err());
    }

    #[test]
    fn identical_rows_collapse() {
        let row: Vec<Option<f64>> = (0..40).map(|i| Some(50.0 - 0.3 * i as f64 + (i as f64).cos())).collect();
        let r = scal(&set_from(vec![row.clone(); 6])).unwrap();
        assert_eq!(r.n_pairs, 15);
        assert!((r.scal - 1.0).abs() < 1e-6);
    }

    #[test]
    fn constant_rows_are_undefined() {
        let r = scal(&set_from(vec![vec![Some(3.0); 10]; 3]));
        assert!(matches!(r, Err(Error::ZeroVariance(_))));
    }

    #[test]
    fn secondary_maximum_picks_most_prominent() {
        let grid: Vec<f64> = (0..9).map(|k| 0.5 + 0.1 * k as f64).collect();
        let v = [0.1, 0.3, 0.15, 0.2, 0.6, 0.2, 0.25, 0.2, 0.5];
        let values: Vec<Option<f64>> = v.iter().map(|x| Some(*x)).collect();
        assert!((secondary_maximum(&grid, &values).unwrap() - 0.9).abs() < 1e-12);
        let flat = vec![Some(0.2); 9];
        assert_eq!(secondary_maximum(&grid, &flat), None);
    }
}

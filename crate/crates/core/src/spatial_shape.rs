//! Source movement, spatial extent and broadband spectrum shape.

use serde::{Deserialize, Serialize};

use crate::data_model::SourceRecord;
use crate::error::{Error, Result};
use crate::numeric::{fit_line, mean};
use crate::spectra_prep::SpectrumSet;

/// Mean displacement per unit Mach between consecutive positions.
pub fn source_movement(record: &SourceRecord) -> Result<f64> {
    let positions = record.positions.as_deref().unwrap_or(&[]);
    if positions.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "source `{}`: {} positions, need 2",
            record.id,
            positions.len()
        )));
    }
    let rates: Vec<f64> = positions
        .windows(2)
        .map(|w| {
            let d = (w[1].x1 - w[0].x1).hypot(w[1].x2 - w[0].x2);
            d / (w[1].mach - w[0].mach)
        })
        .collect();
    Ok(mean(&rates))
}

fn sigmas(record: &SourceRecord) -> Result<(f64, f64)> {
    match (record.sigma_x1, record.sigma_x2) {
        (Some(a), Some(b)) if a > 0.0 && b > 0.0 => Ok((a, b)),
        _ => Err(Error::validation(&record.id, "sigma_x1/sigma_x2", "both required and positive")),
    }
}

/// Area `2π·σ1·σ2` of the normalized spatial distribution.
pub fn pdf_area(record: &SourceRecord) -> Result<f64> {
    let (a, b) = sigmas(record)?;
    Ok(2.0 * std::f64::consts::PI * a * b)
}

/// Elongation `max(σ1/σ2, σ2/σ1) − 1`; zero for a point-like source.
pub fn shape_ratio(record: &SourceRecord) -> Result<f64> {
    let (a, b) = sigmas(record)?;
    Ok((a / b).max(b / a) - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regression {
    /// Mach-averaged slope in dB per decade of normalized frequency.
    pub slope: f64,
    pub r2: f64,
}

/// Per-row line fit of level against `log10` frequency, averaged over rows.
/// Rows with fewer than two defined bins are skipped.
pub fn spectrum_regression(set: &SpectrumSet) -> Result<Regression> {
    let mut slopes = Vec::new();
    let mut r2s = Vec::new();
    for row in &set.psd {
        let (x, y): (Vec<f64>, Vec<f64>) = row
            .iter()
            .zip(&set.grid)
            .filter_map(|(v, f)| v.map(|v| (f.log10(), v)))
            .unzip();
        if let Ok(fit) = fit_line(&x, &y) {
            slopes.push(fit.slope);
            r2s.push(fit.r2);
        }
    }
    if slopes.is_empty() {
        return Err(Error::InsufficientData("no row has 2 defined bins".into()));
    }
    Ok(Regression {
        slope: mean(&slopes),
        r2: mean(&r2s),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreqStats {
    pub mean: f64,
    pub std: f64,
    /// Mach-averaged frequency of the maximum level.
    pub at_max: f64,
}

/// Frequency interval statistics over each row's defined bins.
pub fn freq_stats(set: &SpectrumSet) -> Result<FreqStats> {
    let supports: Vec<Vec<(f64, f64)>> = set
        .psd
        .iter()
        .map(|row| row.iter().zip(&set.grid).filter_map(|(v, f)| v.map(|v| (*f, v))).collect())
        .collect();
    if supports.is_empty() || supports.iter().any(Vec::is_empty) {
        return Err(Error::InsufficientData("empty spectrum row".into()));
    }
    let j = supports.len() as f64;
    let row_mean = |q: &[(f64, f64)]| q.iter().map(|p| p.0).sum::<f64>() / q.len() as f64;
    let f_mean = supports.iter().map(|q| row_mean(q)).sum::<f64>() / j;
    let var = supports
        .iter()
        .map(|q| q.iter().map(|p| (p.0 - f_mean).powi(2)).sum::<f64>() / q.len() as f64)
        .sum::<f64>()
        / j;
    let at_max = supports
        .iter()
        .map(|q| {
            q.iter()
                .fold((f64::NAN, f64::NEG_INFINITY), |acc, p| if p.1 > acc.1 { *p } else { acc })
                .0
        })
        .sum::<f64>()
        / j;
    Ok(FreqStats { mean: f_mean, std: var.sqrt(), at_max })
}

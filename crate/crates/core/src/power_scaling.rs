//! Mach power-law exponent of the PSD levels.

use crate::error::{Error, Result};
use crate::numeric::{db_sum, fit_line, golden_min, mean, population_std};
use crate::spectra_prep::SpectrumSet;

/// Default exponent of the level weights.
pub const DEFAULT_GAMMA: f64 = 10.0;
/// Upper bound of the exponent search.
pub const N_MAX: f64 = 10.0;

/// Removes the `M^n` power law from every row.
pub fn scaled_psd(set: &SpectrumSet, n: f64) -> SpectrumSet {
    let mut out = set.clone();
    for (row, m) in out.psd.iter_mut().zip(&set.machs) {
        let shift = n * 10.0 * m.log10();
        for v in row.iter_mut().flatten() {
            *v -= shift;
        }
    }
    out
}

/// Bins defined in at least two rows, with their defined values and the
/// matching `10·log10(M)` offsets.
struct Collapse {
    levels: Vec<Vec<f64>>,
    offsets: Vec<Vec<f64>>,
    log_weights: Vec<f64>,
}

impl Collapse {
    fn new(set: &SpectrumSet, gamma: f64) -> Result<Self> {
        let db_m: Vec<f64> = set.machs.iter().map(|m| 10.0 * m.log10()).collect();
        let mut levels = Vec::new();
        let mut offsets = Vec::new();
        let mut log_weights = Vec::new();
        for i in 0..set.n_bins() {
            let (lv, off): (Vec<f64>, Vec<f64>) = set
                .psd
                .iter()
                .zip(&db_m)
                .filter_map(|(row, d)| row[i].map(|v| (v, *d)))
                .unzip();
            if lv.len() < 2 {
                continue;
            }
            log_weights.push(gamma * (mean(&lv).max(0.0) + 1.0).ln());
            levels.push(lv);
            offsets.push(off);
        }
        if levels.is_empty() {
            return Err(Error::InsufficientData("no bin is defined in 2 or more Mach rows".into()));
        }
        // weights relative to the largest one keep the sum finite for large gamma
        let top = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for w in &mut log_weights {
            *w = (*w - top).exp();
        }
        Ok(Collapse { levels, offsets, log_weights })
    }

    fn objective(&self, n: f64) -> f64 {
        let mut buf = Vec::new();
        self.levels
            .iter()
            .zip(&self.offsets)
            .zip(&self.log_weights)
            .map(|((lv, off), w)| {
                buf.clear();
                buf.extend(lv.iter().zip(off).map(|(v, d)| v - n * d));
                population_std(&buf) * w
            })
            .sum()
    }
}

/// Weighted spread of the power-scaled rows as a function of `n`.
pub fn collapse_objective(set: &SpectrumSet, gamma: f64, n: f64) -> Result<f64> {
    Ok(Collapse::new(set, gamma)?.objective(n))
}

/// Exponent `n` in `[0, N_MAX]` that best collapses the power-scaled rows.
///
/// Each bin contributes the spread of its levels across Mach rows, weighted
/// by `(max(mean level, 0) + 1)^gamma`. The spread of `v − n·d` is convex in
/// `n`, so the weighted sum is convex and golden-section search finds the
/// global minimum.
pub fn fit_power_exponent(set: &SpectrumSet, gamma: f64) -> Result<f64> {
    if set.n_rows() < 2 {
        return Err(Error::InsufficientData(format!("{} Mach rows, need 2", set.n_rows())));
    }
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::invalid("gamma", format!("must be finite and >= 0, got {gamma}")));
    }
    let c = Collapse::new(set, gamma)?;
    let (n, fx) = golden_min(|n| c.objective(n), 0.0, N_MAX, 1e-3);
    // the bracket ends themselves are never evaluated by the search
    let candidates = [(0.0, c.objective(0.0)), (N_MAX, c.objective(N_MAX)), (n, fx)];
    Ok(candidates
        .iter()
        .fold((n, fx), |best, &(x, v)| if v < best.1 { (x, v) } else { best })
        .0)
}

/// Slope of the overall level of each row against `10·log10(M)`.
pub fn oaspl_exponent(set: &SpectrumSet) -> Result<f64> {
    if set.n_rows() < 2 {
        return Err(Error::InsufficientData(format!("{} Mach rows, need 2", set.n_rows())));
    }
    let oaspl: Vec<f64> = set
        .psd
        .iter()
        .map(|row| db_sum(row.iter().flatten().cloned()).ok_or_else(|| Error::InsufficientData("empty row".into())))
        .collect::<Result<_>>()?;
    let x: Vec<f64> = set.machs.iter().map(|m| 10.0 * m.log10()).collect();
    Ok(fit_line(&x, &oaspl)?.slope)
}

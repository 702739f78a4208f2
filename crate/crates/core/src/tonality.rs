//! Peak detection on gridded spectra and the tonal features derived from it.

use serde::{Deserialize, Serialize};

use crate::distributions::{fit_gamma_with, fit_lognormal_with, GammaFit, LocationRule, LogNormalFit};
use crate::error::{Error, Result};
use crate::spectra_prep::{SpectrumSet, BINS_PER_OCTAVE};

/// Minimum prominence of a tone in dB.
pub const MIN_PROMINENCE_DB: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    /// Bin of the maximum (middle bin of a plateau, rounded down).
    pub index: usize,
    pub height: f64,
    pub prominence: f64,
    pub left_base: usize,
    pub right_base: usize,
    /// First and last bin at or above half prominence.
    pub interval: (usize, usize),
    /// Interpolated width at half prominence, in bins.
    pub width: f64,
}

impl Peak {
    pub fn width_octaves(&self) -> f64 {
        self.width / BINS_PER_OCTAVE as f64
    }
}

/// Maximal runs of defined values as inclusive index pairs.
pub fn defined_spans(row: &[Option<f64>]) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, v) in row.iter().enumerate() {
        match (v.is_some(), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                spans.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push((s, row.len() - 1));
    }
    spans
}

/// Local maxima of one span, plateaus reduced to their middle bin.
fn local_maxima(x: &[f64]) -> Vec<usize> {
    let n = x.len();
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if x[i - 1] < x[i] {
            let mut ahead = i + 1;
            while ahead + 1 < n && x[ahead] == x[i] {
                ahead += 1;
            }
            if x[ahead] < x[i] {
                out.push((i + ahead - 1) / 2);
                i = ahead;
                continue;
            }
        }
        i += 1;
    }
    out
}

fn measure(x: &[f64], p: usize) -> (f64, usize, usize) {
    let h = x[p];
    let (mut left_min, mut left_base) = (h, p);
    let mut i = p;
    while i > 0 && x[i - 1] <= h {
        i -= 1;
        if x[i] < left_min {
            left_min = x[i];
            left_base = i;
        }
    }
    let (mut right_min, mut right_base) = (h, p);
    let mut i = p;
    while i + 1 < x.len() && x[i + 1] <= h {
        i += 1;
        if x[i] < right_min {
            right_min = x[i];
            right_base = i;
        }
    }
    (h - left_min.max(right_min), left_base, right_base)
}

fn half_width(x: &[f64], p: usize, prominence: f64, lb: usize, rb: usize) -> ((usize, usize), f64) {
    let level = x[p] - 0.5 * prominence;
    let mut i = p;
    while i > lb && x[i] > level {
        i -= 1;
    }
    let left_bin = if x[i] >= level { i } else { i + 1 };
    let left_ip = if x[i] < level {
        i as f64 + (level - x[i]) / (x[i + 1] - x[i])
    } else {
        i as f64
    };
    let mut j = p;
    while j < rb && x[j] > level {
        j += 1;
    }
    let right_bin = if x[j] >= level { j } else { j - 1 };
    let right_ip = if x[j] < level {
        j as f64 - (level - x[j]) / (x[j - 1] - x[j])
    } else {
        j as f64
    };
    ((left_bin, right_bin), right_ip - left_ip)
}

/// Finds peaks of `row` with at least `min_prominence`.
///
/// Each contiguous defined span is treated as a separate signal whose ends
/// are never peaks. Prominence is the height above the higher of the two
/// lowest points between the peak and the nearest higher point (or span end)
/// on either side; the width is taken at half that prominence.
pub fn detect_peaks(row: &[Option<f64>], min_prominence: f64) -> Vec<Peak> {
    let mut peaks = Vec::new();
    for (s, e) in defined_spans(row) {
        let x: Vec<f64> = row[s..=e].iter().map(|v| v.unwrap_or(f64::NAN)).collect();
        for p in local_maxima(&x) {
            let (prominence, lb, rb) = measure(&x, p);
            if prominence < min_prominence {
                continue;
            }
            let ((l, r), width) = half_width(&x, p, prominence, lb, rb);
            peaks.push(Peak {
                index: s + p,
                height: x[p],
                prominence,
                left_base: s + lb,
                right_base: s + rb,
                interval: (s + l, s + r),
                width,
            });
        }
    }
    peaks
}

/// Peaks of every Mach row of a spectrum set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakSet {
    pub peaks: Vec<Vec<Peak>>,
    /// Per row, whether each bin lies inside some peak-width interval.
    pub members: Vec<Vec<bool>>,
}

pub fn peak_set(set: &SpectrumSet, min_prominence: f64) -> PeakSet {
    let mut peaks = Vec::with_capacity(set.n_rows());
    let mut members = Vec::with_capacity(set.n_rows());
    for row in &set.psd {
        let found = detect_peaks(row, min_prominence);
        let mut mask = vec![false; row.len()];
        for p in &found {
            mask[p.interval.0..=p.interval.1].iter_mut().for_each(|m| *m = true);
        }
        peaks.push(found);
        members.push(mask);
    }
    PeakSet { peaks, members }
}

/// Peak statistics of one source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakFeatures {
    /// Mach-averaged number of peaks.
    pub mean_count: f64,
    /// Log-normal fit of the peak frequencies (shape, median, location).
    pub frequency: LogNormalFit,
    /// Gamma fit of the peak widths in octaves.
    pub width: GammaFit,
    /// Gamma fit of the peak prominences in dB.
    pub prominence: GammaFit,
}

/// Peak count and distribution fits pooled over all Mach rows.
///
/// With one pooled peak or none every fit is reported as zero. A fit that
/// fails on more peaks is returned as an error.
pub fn peak_features(set: &SpectrumSet, rule: LocationRule) -> Result<PeakFeatures> {
    if set.n_rows() == 0 {
        return Err(Error::InsufficientData("no Mach rows".into()));
    }
    let ps = peak_set(set, MIN_PROMINENCE_DB);
    let total: usize = ps.peaks.iter().map(Vec::len).sum();
    let mean_count = total as f64 / set.n_rows() as f64;
    if total <= 1 {
        return Ok(PeakFeatures {
            mean_count,
            frequency: LogNormalFit::default(),
            width: GammaFit::default(),
            prominence: GammaFit::default(),
        });
    }
    let pooled = |f: &dyn Fn(&Peak) -> f64| -> Vec<f64> { ps.peaks.iter().flatten().map(f).collect() };
    Ok(PeakFeatures {
        mean_count,
        frequency: fit_lognormal_with(&pooled(&|p| set.grid[p.index]), rule)?,
        width: fit_gamma_with(&pooled(&|p| p.width_octaves()), rule)?,
        prominence: fit_gamma_with(&pooled(&|p| p.prominence), rule)?,
    })
}

/// Cross-Mach tone alignment: the average, over bins covered by some peak,
/// of the fraction of other rows sharing a peak there.
pub fn tone_scal(set: &SpectrumSet) -> Result<f64> {
    let j = set.n_rows();
    if j < 2 {
        return Err(Error::InsufficientData(format!("{j} Mach rows, need 2")));
    }
    let ps = peak_set(set, MIN_PROMINENCE_DB);
    let (mut sum, mut covered) = (0.0, 0usize);
    for i in 0..set.n_bins() {
        let e = ps.members.iter().filter(|m| m[i]).count();
        if e > 0 {
            sum += (e - 1) as f64 / (j - 1) as f64;
            covered += 1;
        }
    }
    Ok(if covered == 0 { 0.0 } else { sum / covered as f64 })
}

/// Mach-averaged fraction of linear power inside peak-width intervals.
pub fn tone_intensity(set: &SpectrumSet) -> Result<f64> {
    if set.n_rows() == 0 {
        return Err(Error::InsufficientData("no Mach rows".into()));
    }
    let ps = peak_set(set, MIN_PROMINENCE_DB);
    let mut acc = 0.0;
    for (row, mask) in set.psd.iter().zip(&ps.members) {
        let max = row.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
        let (mut tonal, mut all) = (0.0, 0.0);
        for (v, inside) in row.iter().zip(mask) {
            if let Some(v) = v {
                let w = 10f64.powf((v - max) / 10.0);
                all += w;
                if *inside {
                    tonal += w;
                }
            }
        }
        if all > 0.0 {
            acc += tonal / all;
        }
    }
    Ok(acc / set.n_rows() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(v: &[f64]) -> Vec<Option<f64>> {
        v.iter().map(|x| Some(*x)).collect()
    }

    #[test]
    fn monotone_row_has_no_peaks() {
        let r = row(&(0..20).map(|i| i as f64).collect::<Vec<_>>());
        assert!(detect_peaks(&r, 0.0).is_empty());
    }

    #[test]
    fn triangular_bump() {
        let r = row(&[0.0, 0.0, 2.5, 5.0, 7.5, 10.0, 7.5, 5.0, 2.5, 0.0, 0.0]);
        let p = detect_peaks(&r, MIN_PROMINENCE_DB);
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].index, 5);
        assert_eq!(p[0].prominence, 10.0);
        assert_eq!(p[0].interval, (3, 7));
        assert!((p[0].width - 4.0).abs() < 1e-12);
    }

    #[test]
    fn two_bumps_measured_to_saddle() {
        let r = row(&[0.0, 10.0, 5.0, 8.0, 0.0]);
        let p = detect_peaks(&r, MIN_PROMINENCE_DB);
        assert_eq!(p.len(), 2);
        assert_eq!(p[0].prominence, 10.0);
        assert_eq!(p[1].prominence, 3.0);
        assert_eq!(p[1].left_base, 2);
    }

    #[test]
    fn plateau_and_span_edges() {
        let r = row(&[0.0, 4.0, 4.0, 4.0, 4.0, 0.0]);
        let p = detect_peaks(&r, 0.0);
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].index, 2);
        // maximum at a gap edge is not a peak
        let r = vec![Some(0.0), Some(5.0), None, Some(6.0), Some(1.0)];
        assert!(detect_peaks(&r, 0.0).is_empty());
    }

    #[test]
    fn sub_threshold_bump_is_dropped() {
        let r = row(&[0.0, 0.0, 2.9, 0.0, 0.0, 6.0, 0.0, 0.0]);
        let p = detect_peaks(&r, MIN_PROMINENCE_DB);
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].index, 5);
    }

    fn set_of(rows: Vec<Vec<Option<f64>>>) -> SpectrumSet {
        let n = rows[0].len();
        SpectrumSet {
            freq_type: crate::spectra_prep::FrequencyType::Strouhal,
            grid: (0..n).map(|k| 2f64.powf(k as f64 / 12.0)).collect(),
            machs: (0..rows.len()).map(|j| 0.1 + 0.01 * j as f64).collect(),
            psd: rows,
        }
    }

    #[test]
    fn shared_peaks_give_full_alignment() {
        let r = row(&[0.0, 0.0, 10.0, 0.0, 0.0, 0.0, 12.0, 0.0, 0.0]);
        assert_eq!(tone_scal(&set_of(vec![r.clone(); 4])).unwrap(), 1.0);
        let flat = row(&[0.0; 9]);
        let s = tone_scal(&set_of(vec![r, flat.clone(), flat])).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn intensity_bounds() {
        let flat = row(&[1.0; 9]);
        assert_eq!(tone_intensity(&set_of(vec![flat])).unwrap(), 0.0);
    }

    #[test]
    fn pooled_single_peak_zeroes_fits() {
        let r = row(&[0.0, 0.0, 10.0, 0.0, 0.0]);
        let flat = row(&[0.0; 5]);
        let f = peak_features(&set_of(vec![r, flat]), LocationRule::Mle).unwrap();
        assert_eq!(f.mean_count, 0.5);
        assert_eq!(f.width, GammaFit::default());
        assert_eq!(f.frequency, LogNormalFit::default());
    }
}

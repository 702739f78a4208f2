//! Logarithmic normalized-frequency grids and two-mechanism spectrum separation.

use serde::{Deserialize, Serialize};

use crate::data_model::{Band, Scaling, SourceRecord, SplitInfo};
use crate::error::{Error, Result};
use crate::self_similarity::scal;

/// Grid resolution in bins per octave.
pub const BINS_PER_OCTAVE: usize = 12;

/// Matching tolerance on the natural-log frequency axis.
const LOG_TOL: f64 = 1e-9;

/// How raw frequencies are normalized before gridding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "m", rename_all = "lowercase")]
pub enum FrequencyType {
    /// Raw frequency in Hz.
    Absolute,
    /// `f·D0/a`
    Helmholtz,
    /// `f·D0/(M·a)`
    Strouhal,
    /// `f·D0/(M^m·a)` for the given exponent `m`.
    Generalized(f64),
}

impl FrequencyType {
    /// Mach exponent of the normalization, `None` for absolute frequency.
    pub fn exponent(self) -> Option<f64> {
        match self {
            FrequencyType::Absolute => None,
            FrequencyType::Helmholtz => Some(0.0),
            FrequencyType::Strouhal => Some(1.0),
            FrequencyType::Generalized(m) => Some(m),
        }
    }

    /// Factor mapping Hz to this frequency type for one run.
    pub fn scale(self, d0: f64, mach: f64, speed_of_sound: f64) -> f64 {
        match self.exponent() {
            None => 1.0,
            Some(m) => d0 / (mach.powf(m) * speed_of_sound),
        }
    }

    fn check(self) -> Result<()> {
        if let FrequencyType::Generalized(m) = self {
            if !(m.is_finite() && m >= 0.0) {
                return Err(Error::invalid("m", format!("exponent must be finite and >= 0, got {m}")));
            }
        }
        Ok(())
    }
}

impl From<Scaling> for FrequencyType {
    fn from(s: Scaling) -> Self {
        match s {
            Scaling::Strouhal => FrequencyType::Strouhal,
            Scaling::Helmholtz => FrequencyType::Helmholtz,
        }
    }
}

/// PSD rows of one source on a shared geometric frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSet {
    pub freq_type: FrequencyType,
    /// Normalized frequency of each bin; adjacent bins differ by `2^(1/12)`.
    pub grid: Vec<f64>,
    pub machs: Vec<f64>,
    /// `psd[j][i]`: level of Mach row `j` at bin `i`.
    pub psd: Vec<Vec<Option<f64>>>,
}

impl SpectrumSet {
    pub fn n_rows(&self) -> usize {
        self.psd.len()
    }

    pub fn n_bins(&self) -> usize {
        self.grid.len()
    }

    /// Copy restricted to the bins in `range`.
    pub fn slice_bins(&self, range: std::ops::Range<usize>) -> SpectrumSet {
        SpectrumSet {
            freq_type: self.freq_type,
            grid: self.grid[range.clone()].to_vec(),
            machs: self.machs.clone(),
            psd: self.psd.iter().map(|row| row[range.clone()].to_vec()).collect(),
        }
    }

    /// Number of rows defined at each bin.
    pub fn coverage(&self) -> Vec<usize> {
        (0..self.n_bins())
            .map(|i| self.psd.iter().filter(|row| row[i].is_some()).count())
            .collect()
    }
}

fn geometric_grid(start: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| start * 2f64.powf(k as f64 / BINS_PER_OCTAVE as f64))
        .collect()
}

/// Interpolates every sample of `record` onto a logarithmic grid of the given
/// frequency type.
///
/// Interpolation is linear in (log-frequency, dB) and only bridges pairs of
/// raw points that are adjacent and both defined; everything else stays
/// undefined. The grid starts at the smallest defined normalized frequency of
/// the record and spans the union of all supports.
pub fn to_log_grid(record: &SourceRecord, freq_type: FrequencyType) -> Result<SpectrumSet> {
    freq_type.check()?;
    let mut logs: Vec<Vec<f64>> = Vec::with_capacity(record.samples.len());
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in &record.samples {
        if s.defined_count() < 2 {
            return Err(Error::InsufficientData(format!(
                "source `{}`: Mach {} has fewer than 2 defined values",
                record.id, s.mach
            )));
        }
        let scale = freq_type.scale(record.d0, s.mach, s.speed_of_sound);
        let x: Vec<f64> = s.freqs.iter().map(|f| (f * scale).ln()).collect();
        for (xi, v) in x.iter().zip(&s.psd) {
            if v.is_some() {
                lo = lo.min(*xi);
                hi = hi.max(*xi);
            }
        }
        logs.push(x);
    }
    let octaves = (hi - lo) / std::f64::consts::LN_2;
    let n_bins = (octaves * BINS_PER_OCTAVE as f64 + 1e-9).floor() as usize + 1;
    let grid = geometric_grid(lo.exp(), n_bins);
    let grid_log: Vec<f64> = grid.iter().map(|g| g.ln()).collect();

    let psd = record
        .samples
        .iter()
        .zip(&logs)
        .map(|(s, x)| interpolate_row(x, &s.psd, &grid_log))
        .collect();
    Ok(SpectrumSet {
        freq_type,
        grid,
        machs: record.machs(),
        psd,
    })
}

fn interpolate_row(x: &[f64], y: &[Option<f64>], targets: &[f64]) -> Vec<Option<f64>> {
    let n = x.len();
    let mut out = Vec::with_capacity(targets.len());
    let mut i = 0usize;
    for &t in targets {
        while i + 1 < n && x[i + 1] < t - LOG_TOL {
            i += 1;
        }
        let value = if (t - x[i]).abs() <= LOG_TOL {
            y[i]
        } else if i + 1 < n && (t - x[i + 1]).abs() <= LOG_TOL {
            y[i + 1]
        } else if i + 1 < n && x[i] < t && t < x[i + 1] {
            match (y[i], y[i + 1]) {
                (Some(a), Some(b)) => {
                    let w = (t - x[i]) / (x[i + 1] - x[i]);
                    Some(a + w * (b - a))
                }
                _ => None,
            }
        } else {
            None
        };
        out.push(value);
    }
    out
}

/// Thresholds of the separation rules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationConfig {
    /// Minimum extent of the region where all Mach rows overlap.
    pub min_overlap_octaves: f64,
    /// Minimum extent of each sub-spectrum.
    pub min_sub_octaves: f64,
    /// Required relative gain of the best mixed case over the best same-type case.
    pub min_improvement: f64,
}

impl Default for SeparationConfig {
    fn default() -> Self {
        SeparationConfig {
            min_overlap_octaves: 2.0,
            min_sub_octaves: 0.5,
            min_improvement: 0.10,
        }
    }
}

/// Frequency types of the low and high sub-spectra.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitCase {
    StSt,
    StHe,
    HeSt,
    HeHe,
}

impl SplitCase {
    pub const ALL: [SplitCase; 4] = [SplitCase::StSt, SplitCase::StHe, SplitCase::HeSt, SplitCase::HeHe];

    pub fn low(self) -> Scaling {
        match self {
            SplitCase::StSt | SplitCase::StHe => Scaling::Strouhal,
            SplitCase::HeSt | SplitCase::HeHe => Scaling::Helmholtz,
        }
    }

    pub fn high(self) -> Scaling {
        match self {
            SplitCase::StSt | SplitCase::HeSt => Scaling::Strouhal,
            SplitCase::StHe | SplitCase::HeHe => Scaling::Helmholtz,
        }
    }

    pub fn is_mixed(self) -> bool {
        self.low() != self.high()
    }
}

/// Mean self-similarity of the sub-spectra for every candidate cut and case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationSweep {
    /// Extent of the all-Mach overlap on the Helmholtz grid.
    pub overlap_octaves: f64,
    /// Candidate cuts on the Helmholtz axis.
    pub cuts_he: Vec<f64>,
    /// Helmholtz grid bin index of each candidate cut.
    pub cut_bins: Vec<usize>,
    /// `mean_scal[case][k]`, cases ordered as [`SplitCase::ALL`].
    pub mean_scal: [Vec<f64>; 4],
}

impl SeparationSweep {
    /// Best `(cut index, value)` of one case.
    pub fn best_of(&self, case: SplitCase) -> Option<(usize, f64)> {
        let row = &self.mean_scal[case as usize];
        row.iter()
            .enumerate()
            .fold(None, |best: Option<(usize, f64)>, (k, &v)| match best {
                Some((_, bv)) if bv >= v => best,
                _ => Some((k, v)),
            })
    }

    /// Global optimum over all cuts and cases; ties keep the earlier case.
    pub fn optimum(&self) -> Option<(SplitCase, usize, f64)> {
        let mut best: Option<(SplitCase, usize, f64)> = None;
        for case in SplitCase::ALL {
            if let Some((k, v)) = self.best_of(case) {
                if best.map_or(true, |(_, _, bv)| v > bv) {
                    best = Some((case, k, v));
                }
            }
        }
        best
    }

    /// Best mean self-similarity among the same-type cases.
    pub fn best_same(&self) -> f64 {
        [SplitCase::StSt, SplitCase::HeHe]
            .iter()
            .filter_map(|c| self.best_of(*c).map(|(_, v)| v))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Why a spectrum was left intact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KeepReason {
    AlreadySplit,
    SingleMach,
    OverlapTooShort,
    NoCandidateCut,
    SameScaling,
    InsufficientImprovement { improvement: f64 },
    SubSpectrumTooShort,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SplitDecision {
    Split { case: SplitCase, cut_he: f64, cut_bin: usize, improvement: f64 },
    Keep(KeepReason),
}

/// Relative gain of `mixed` over `same`; infinite when `same` is not positive.
pub fn improvement(mixed: f64, same: f64) -> f64 {
    if same > 0.0 {
        mixed / same - 1.0
    } else if mixed > same {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Applies the scaling and improvement rules to a completed sweep.
pub fn decide(sweep: &SeparationSweep, config: &SeparationConfig) -> SplitDecision {
    if sweep.overlap_octaves + 1e-9 < config.min_overlap_octaves {
        return SplitDecision::Keep(KeepReason::OverlapTooShort);
    }
    let Some((case, k, value)) = sweep.optimum() else {
        return SplitDecision::Keep(KeepReason::NoCandidateCut);
    };
    if !case.is_mixed() {
        return SplitDecision::Keep(KeepReason::SameScaling);
    }
    let gain = improvement(value, sweep.best_same());
    if gain < config.min_improvement {
        return SplitDecision::Keep(KeepReason::InsufficientImprovement { improvement: gain });
    }
    SplitDecision::Split {
        case,
        cut_he: sweep.cuts_he[k],
        cut_bin: sweep.cut_bins[k],
        improvement: gain,
    }
}

fn scal_or_zero(set: &SpectrumSet) -> f64 {
    scal(set).map(|r| r.scal).unwrap_or(0.0)
}

/// Bins of `grid` strictly below `cut`.
fn split_index(grid: &[f64], cut: f64) -> usize {
    grid.partition_point(|g| *g < cut * (1.0 - 1e-12))
}

/// Sweeps every admissible cut on the Helmholtz grid and evaluates the four
/// low/high frequency-type cases.
pub fn separation_sweep(record: &SourceRecord, config: &SeparationConfig) -> Result<SeparationSweep> {
    let he = to_log_grid(record, FrequencyType::Helmholtz)?;
    let st = to_log_grid(record, FrequencyType::Strouhal)?;
    let n_rows = he.n_rows();
    let full: Vec<usize> = he
        .coverage()
        .iter()
        .enumerate()
        .filter(|(_, c)| **c == n_rows)
        .map(|(i, _)| i)
        .collect();
    let mut sweep = SeparationSweep {
        overlap_octaves: 0.0,
        cuts_he: Vec::new(),
        cut_bins: Vec::new(),
        mean_scal: Default::default(),
    };
    let (Some(&first), Some(&last)) = (full.first(), full.last()) else {
        return Ok(sweep);
    };
    let per_octave = BINS_PER_OCTAVE as f64;
    sweep.overlap_octaves = (last - first) as f64 / per_octave;
    let min_bins = (config.min_sub_octaves * per_octave).ceil() as usize;
    let mean_mach = record.mean_mach();
    for k in (first + min_bins + 1)..=last.saturating_sub(min_bins) {
        let cut_he = he.grid[k];
        let cut_st = cut_he / mean_mach;
        let he_split = split_index(&he.grid, cut_he);
        let st_split = split_index(&st.grid, cut_st);
        let he_low = scal_or_zero(&he.slice_bins(0..he_split));
        let he_high = scal_or_zero(&he.slice_bins(he_split..he.n_bins()));
        let st_low = scal_or_zero(&st.slice_bins(0..st_split));
        let st_high = scal_or_zero(&st.slice_bins(st_split..st.n_bins()));
        for case in SplitCase::ALL {
            let low = if case.low() == Scaling::Strouhal { st_low } else { he_low };
            let high = if case.high() == Scaling::Strouhal { st_high } else { he_high };
            sweep.mean_scal[case as usize].push(0.5 * (low + high));
        }
        sweep.cuts_he.push(cut_he);
        sweep.cut_bins.push(k);
    }
    Ok(sweep)
}

/// Copy of `record` keeping only the part of each spectrum on one side of
/// the cut, measured in the given scaling.
fn sub_record(
    record: &SourceRecord,
    band: Band,
    scaling: Scaling,
    cut_he: f64,
) -> Option<SourceRecord> {
    let freq_type = FrequencyType::from(scaling);
    let cut = match scaling {
        Scaling::Helmholtz => cut_he,
        Scaling::Strouhal => cut_he / record.mean_mach(),
    };
    let mut samples = Vec::new();
    for s in &record.samples {
        let scale = freq_type.scale(record.d0, s.mach, s.speed_of_sound);
        let mut sample = s.clone();
        for (f, v) in sample.freqs.iter().zip(sample.psd.iter_mut()) {
            let below = f * scale < cut * (1.0 - 1e-12);
            if below != (band == Band::Low) {
                *v = None;
            }
        }
        if sample.defined_count() >= 2 {
            samples.push(sample);
        }
    }
    if samples.is_empty() {
        return None;
    }
    let positions = record.positions.as_ref().map(|ps| {
        ps.iter()
            .filter(|p| samples.iter().any(|s| (s.mach - p.mach).abs() < 1e-9))
            .copied()
            .collect()
    });
    let suffix = match band {
        Band::Low => "low",
        Band::High => "high",
    };
    Some(SourceRecord {
        id: format!("{}#{}", record.id, suffix),
        samples,
        positions,
        split: Some(SplitInfo {
            parent: record.id.clone(),
            band,
            scaling,
            cut_he,
            shared_spatial: true,
        }),
        ..record.clone()
    })
}

fn spans_octaves(record: &SourceRecord, scaling: Scaling, min_octaves: f64) -> bool {
    let Ok(set) = to_log_grid(record, scaling.into()) else {
        return false;
    };
    let covered: Vec<usize> = set
        .coverage()
        .iter()
        .enumerate()
        .filter(|(_, c)| **c >= 2.min(set.n_rows()))
        .map(|(i, _)| i)
        .collect();
    match (covered.first(), covered.last()) {
        (Some(a), Some(b)) => (b - a) as f64 / BINS_PER_OCTAVE as f64 + 1e-9 >= min_octaves,
        _ => false,
    }
}

/// Separation result with the evidence behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct Separation {
    pub decision: SplitDecision,
    pub sweep: Option<SeparationSweep>,
    pub records: Vec<SourceRecord>,
}

/// Splits a spectrum showing different scaling below and above some cut
/// into two sub-sources, or returns it unchanged.
pub fn separate_with(record: &SourceRecord, config: &SeparationConfig) -> Result<Separation> {
    let keep = |reason, sweep| Separation {
        decision: SplitDecision::Keep(reason),
        sweep,
        records: vec![record.clone()],
    };
    if record.split.is_some() {
        return Ok(keep(KeepReason::AlreadySplit, None));
    }
    if record.samples.len() < 2 {
        return Ok(keep(KeepReason::SingleMach, None));
    }
    let sweep = separation_sweep(record, config)?;
    let decision = decide(&sweep, config);
    let SplitDecision::Split { case, cut_he, .. } = decision else {
        let SplitDecision::Keep(reason) = decision else { unreachable!() };
        return Ok(keep(reason, Some(sweep)));
    };
    let low = sub_record(record, Band::Low, case.low(), cut_he);
    let high = sub_record(record, Band::High, case.high(), cut_he);
    match (low, high) {
        (Some(low), Some(high))
            if spans_octaves(&low, case.low(), config.min_sub_octaves)
                && spans_octaves(&high, case.high(), config.min_sub_octaves) =>
        {
            Ok(Separation {
                decision,
                sweep: Some(sweep),
                records: vec![low, high],
            })
        }
        _ => Ok(keep(KeepReason::SubSpectrumTooShort, Some(sweep))),
    }
}

/// Returns one intact record or its two sub-sources. Never fails: any error
/// while evaluating the rules leaves the record intact.
pub fn separate_spectrum(record: &SourceRecord) -> Vec<SourceRecord> {
    match separate_with(record, &SeparationConfig::default()) {
        Ok(sep) => sep.records,
        Err(_) => vec![record.clone()],
    }
}

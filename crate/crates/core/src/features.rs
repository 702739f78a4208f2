//! Per-source feature vector, its log transform and column standardization.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data_model::SourceRecord;
use crate::distributions::LocationRule;
use crate::error::{Error, Result};
use crate::power_scaling::{fit_power_exponent, oaspl_exponent, DEFAULT_GAMMA};
use crate::self_similarity::{analyze_exponent, scal};
use crate::spatial_shape::{freq_stats, pdf_area, shape_ratio, source_movement, spectrum_regression};
use crate::spectra_prep::{to_log_grid, FrequencyType, SpectrumSet};
use crate::tonality::{peak_features, tone_intensity, tone_scal};

pub const N_FEATURES: usize = 26;

/// Column names in table order.
pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "scal_st", "scal_he", "m_star", "n_st", "n_he", "peak_count", "k_st", "theta_st", "l_st", "k_w", "theta_w",
    "l_w", "k_p", "theta_p", "l_p", "scal_p_st", "scal_p_he", "prop_p", "delta_l", "area", "r_sigma", "slope", "r2",
    "st_mean", "st_std", "st_lmax",
];

/// Whether each feature enters clustering as `log10(|v| + 1)`.
pub const LOG_FEATURES: [bool; N_FEATURES] = [
    false, false, false, false, false, true, true, true, true, true, true, true, true, true, false, false, false,
    false, false, false, true, true, false, true, true, true,
];

/// Features whose declared range is `[0, 1]`.
const UNIT_RANGE: [usize; 6] = [0, 1, 15, 16, 17, 22];

pub fn feature_index(name: &str) -> Option<usize> {
    FEATURE_NAMES.iter().position(|n| *n == name)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub id: String,
    pub values: [f64; N_FEATURES],
    /// Degraded features (set to zero) and the reason.
    pub flags: BTreeMap<String, String>,
    pub aux: FeatureAux,
}

/// Intermediate quantities kept alongside the features.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureAux {
    /// Exponent used for all Strouhal-type features.
    pub m_st: f64,
    pub n_oaspl: Option<f64>,
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        feature_index(name).map(|i| self.values[i])
    }

    fn set(&mut self, index: usize, value: Result<f64>) {
        match value {
            Ok(v) if v.is_finite() => self.values[index] = v,
            Ok(v) => self.degrade(index, format!("non-finite value {v}")),
            Err(e) => self.degrade(index, e.to_string()),
        }
    }

    fn degrade(&mut self, index: usize, reason: String) {
        self.values[index] = 0.0;
        self.flags.insert(FEATURE_NAMES[index].to_string(), reason);
    }

    /// Copy with the log columns mapped through `log10(|v| + 1)`.
    pub fn log_transform(&self) -> FeatureVector {
        let mut out = self.clone();
        for (v, is_log) in out.values.iter_mut().zip(LOG_FEATURES) {
            if is_log {
                *v = (v.abs() + 1.0).log10();
            }
        }
        out
    }
}

/// Tunables of feature extraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Level-weight exponent of the power-scaling fit.
    pub power_gamma: f64,
    /// Location choice of the tonal distribution fits.
    #[serde(default)]
    pub location_rule: LocationRule,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig { power_gamma: DEFAULT_GAMMA, location_rule: LocationRule::Significant }
    }
}

pub fn compute_features(record: &SourceRecord) -> FeatureVector {
    compute_features_with(record, &FeatureConfig::default())
}

/// Computes every feature of one source. A failing feature is set to zero
/// and flagged instead of failing the whole vector.
pub fn compute_features_with(record: &SourceRecord, config: &FeatureConfig) -> FeatureVector {
    let mut fv = FeatureVector {
        id: record.id.clone(),
        values: [0.0; N_FEATURES],
        flags: BTreeMap::new(),
        aux: FeatureAux { m_st: 1.0, n_oaspl: None },
    };
    let idx = |name| feature_index(name).expect("known feature");

    match analyze_exponent(record) {
        Ok(a) => {
            fv.set(idx("m_star"), Ok(a.m_star));
            fv.aux.m_st = a.m_st;
        }
        Err(e) => fv.degrade(idx("m_star"), e.to_string()),
    }

    let st = to_log_grid(record, FrequencyType::Generalized(fv.aux.m_st));
    let he = to_log_grid(record, FrequencyType::Helmholtz);
    let (st, he) = match (st, he) {
        (Ok(st), Ok(he)) => (st, he),
        (Err(e), _) | (_, Err(e)) => {
            let reason = e.to_string();
            for name in FEATURE_NAMES {
                if !matches!(name, "m_star" | "delta_l" | "area" | "r_sigma") {
                    fv.degrade(idx(name), reason.clone());
                }
            }
            spatial(&mut fv, record);
            return fv;
        }
    };

    fv.set(idx("scal_st"), scal(&st).map(|r| r.feature_value()));
    fv.set(idx("scal_he"), scal(&he).map(|r| r.feature_value()));
    fv.set(idx("n_st"), fit_power_exponent(&st, config.power_gamma));
    fv.set(idx("n_he"), fit_power_exponent(&he, config.power_gamma));
    fv.aux.n_oaspl = oaspl_exponent(&st).ok();

    tonal(&mut fv, &st, config.location_rule);
    fv.set(idx("scal_p_st"), tone_scal(&st));
    fv.set(idx("scal_p_he"), tone_scal(&he));
    fv.set(idx("prop_p"), tone_intensity(&st));

    spatial(&mut fv, record);

    match spectrum_regression(&st) {
        Ok(r) => {
            fv.set(idx("slope"), Ok(r.slope));
            fv.set(idx("r2"), Ok(r.r2));
        }
        Err(e) => {
            fv.degrade(idx("slope"), e.to_string());
            fv.degrade(idx("r2"), e.to_string());
        }
    }
    let names = ["st_mean", "st_std", "st_lmax"];
    match freq_stats(&st) {
        Ok(s) => {
            for (name, v) in names.iter().zip([s.mean, s.std, s.at_max]) {
                fv.set(idx(name), Ok(v));
            }
        }
        Err(e) => names.iter().for_each(|n| fv.degrade(idx(n), e.to_string())),
    }

    for i in UNIT_RANGE {
        fv.values[i] = fv.values[i].clamp(0.0, 1.0);
    }
    fv
}

fn tonal(fv: &mut FeatureVector, st: &SpectrumSet, rule: LocationRule) {
    let names = [
        "peak_count", "k_st", "theta_st", "l_st", "k_w", "theta_w", "l_w", "k_p", "theta_p", "l_p",
    ];
    match peak_features(st, rule) {
        Ok(p) => {
            let values = [
                p.mean_count,
                p.frequency.shape,
                p.frequency.scale,
                p.frequency.l,
                p.width.k,
                p.width.theta,
                p.width.l,
                p.prominence.k,
                p.prominence.theta,
                p.prominence.l,
            ];
            for (name, v) in names.iter().zip(values) {
                fv.set(feature_index(name).unwrap(), Ok(v));
            }
        }
        Err(e) => {
            // the count survives a failed fit
            let count = crate::tonality::peak_set(st, crate::tonality::MIN_PROMINENCE_DB)
                .peaks
                .iter()
                .map(Vec::len)
                .sum::<usize>() as f64
                / st.n_rows().max(1) as f64;
            fv.set(feature_index("peak_count").unwrap(), Ok(count));
            for name in &names[1..] {
                fv.degrade(feature_index(name).unwrap(), e.to_string());
            }
        }
    }
}

fn spatial(fv: &mut FeatureVector, record: &SourceRecord) {
    fv.set(feature_index("delta_l").unwrap(), source_movement(record));
    fv.set(feature_index("area").unwrap(), pdf_area(record));
    fv.set(feature_index("r_sigma").unwrap(), shape_ratio(record));
}

/// Column-standardized matrix with the statistics used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardized {
    pub data: Vec<Vec<f64>>,
    pub means: Vec<f64>,
    /// Population standard deviations; 1 for constant columns.
    pub stds: Vec<f64>,
}

pub fn standardize(matrix: &[Vec<f64>]) -> Result<Standardized> {
    let n = matrix.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("{n} rows, need 2")));
    }
    let d = matrix[0].len();
    if matrix.iter().any(|r| r.len() != d) {
        return Err(Error::ShapeMismatch("rows of unequal length".into()));
    }
    if matrix.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("matrix", "non-finite entry"));
    }
    let mut means = vec![0.0; d];
    let mut stds = vec![1.0; d];
    for c in 0..d {
        let col: Vec<f64> = matrix.iter().map(|r| r[c]).collect();
        means[c] = crate::numeric::mean(&col);
        let s = crate::numeric::population_std(&col);
        if s > 1e-12 * means[c].abs().max(1.0) {
            stds[c] = s;
        }
    }
    let data = matrix
        .iter()
        .map(|r| r.iter().enumerate().map(|(c, v)| (v - means[c]) / stds[c]).collect())
        .collect();
    Ok(Standardized { data, means, stds })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_columns() {
        assert_eq!(FEATURE_NAMES.len(), N_FEATURES);
        assert_eq!(LOG_FEATURES.iter().filter(|b| **b).count(), 14);
        assert!(!LOG_FEATURES[feature_index("l_p").unwrap()]);
        assert!(LOG_FEATURES[feature_index("l_w").unwrap()]);
        assert!(LOG_FEATURES[feature_index("slope").unwrap()]);
    }

    #[test]
    fn log_transform_values() {
        let mut fv = FeatureVector {
            id: "x".into(),
            values: [0.0; N_FEATURES],
            flags: BTreeMap::new(),
            aux: FeatureAux::default(),
        };
        let t = fv.log_transform();
        assert!(t.values.iter().all(|v| *v == 0.0));
        fv.values = [9.0; N_FEATURES];
        fv.values[feature_index("slope").unwrap()] = -9.0;
        let t = fv.log_transform();
        for (i, v) in t.values.iter().enumerate() {
            let expected = if LOG_FEATURES[i] { 1.0 } else { 9.0 };
            assert_eq!(*v, expected, "{}", FEATURE_NAMES[i]);
        }
    }

    #[test]
    fn standardize_two_rows() {
        let s = standardize(&[vec![1.0, 5.0], vec![3.0, 5.0]]).unwrap();
        assert_eq!(s.data, vec![vec![-1.0, 0.0], vec![1.0, 0.0]]);
        assert_eq!(s.stds[1], 1.0);
        assert!(standardize(&[vec![1.0]]).is_err());
    }
}

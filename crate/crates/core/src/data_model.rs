//! Sources, spectra and the bundle file format.
//!
//! A bundle is a UTF-8 JSON document
//! `{"dataset": str, "d0_m": number, "sources": [...]}`. Each source carries
//! its spectra at several Mach numbers; missing PSD values are `null` on disk
//! and `None` in memory.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::canonical;
use crate::error::{Error, Result};

/// Tolerance used when matching Mach numbers between samples and positions.
const MACH_MATCH_TOL: f64 = 1e-9;

/// One measured spectrum of a source at a single Mach number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSample {
    pub mach: f64,
    /// Speed of sound of this run in m/s.
    pub speed_of_sound: f64,
    /// Frequencies in Hz, strictly increasing.
    pub freqs: Vec<f64>,
    /// PSD in dB (arbitrary but consistent reference); `None` marks a missing value.
    pub psd: Vec<Option<f64>>,
}

impl SpectrumSample {
    pub fn defined_count(&self) -> usize {
        self.psd.iter().filter(|v| v.is_some()).count()
    }
}

/// Source position in the focus plane at one Mach number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub mach: f64,
    pub x1: f64,
    pub x2: f64,
}

/// Frequency scaling used for one half of a separated spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scaling {
    Strouhal,
    Helmholtz,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Low,
    High,
}

/// Provenance of a sub-source produced by spectrum separation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub parent: String,
    pub band: Band,
    pub scaling: Scaling,
    /// Cut position on the Helmholtz axis.
    pub cut_he: f64,
    /// Positions and spatial widths are copied from the parent, not re-estimated.
    pub shared_spatial: bool,
}

/// One aeroacoustic source: a region of interest at one angle of attack and
/// one Reynolds configuration, observed at several Mach numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default)]
    pub dataset: String,
    /// Reference length in metres.
    #[serde(rename = "d0_m", default)]
    pub d0: f64,
    #[serde(rename = "alpha_deg", default)]
    pub alpha: f64,
    #[serde(default)]
    pub reynolds_mean: f64,
    #[serde(rename = "temperature_k", default)]
    pub temperature: f64,
    #[serde(rename = "pressure_pa", default)]
    pub pressure: f64,
    pub samples: Vec<SpectrumSample>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<Position>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_x1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_x2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitInfo>,
}

impl SourceRecord {
    pub fn machs(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.mach).collect()
    }

    pub fn mean_mach(&self) -> f64 {
        self.samples.iter().map(|s| s.mach).sum::<f64>() / self.samples.len() as f64
    }

    /// Checks every invariant of the record and its samples.
    pub fn validate(&self) -> Result<()> {
        let id = self.id.as_str();
        if self.id.is_empty() {
            return Err(Error::validation(id, "id", "empty source id"));
        }
        if !(self.d0.is_finite() && self.d0 > 0.0) {
            return Err(Error::validation(id, "d0_m", format!("must be positive, got {}", self.d0)));
        }
        if self.samples.is_empty() {
            return Err(Error::validation(id, "samples", "at least one sample required"));
        }
        for (j, s) in self.samples.iter().enumerate() {
            let field = |name: &str| format!("samples[{j}].{name}");
            if !(s.mach > 0.0 && s.mach < 1.0) {
                return Err(Error::validation(id, field("mach"), format!("{} outside (0, 1)", s.mach)));
            }
            if !(s.speed_of_sound.is_finite() && s.speed_of_sound > 0.0) {
                return Err(Error::validation(id, field("speed_of_sound"), "must be positive"));
            }
            if s.freqs.len() != s.psd.len() {
                return Err(Error::validation(
                    id,
                    field("psd"),
                    format!("length {} differs from freqs length {}", s.psd.len(), s.freqs.len()),
                ));
            }
            if s.freqs.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
                return Err(Error::validation(id, field("freqs"), "frequencies must be positive and finite"));
            }
            if s.freqs.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::validation(id, field("freqs"), "not strictly increasing"));
            }
            if s.psd.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::validation(id, field("psd"), "defined values must be finite"));
            }
            if s.defined_count() < 2 {
                return Err(Error::validation(id, field("psd"), "fewer than 2 defined values"));
            }
        }
        if self.samples.windows(2).any(|w| w[1].mach <= w[0].mach) {
            return Err(Error::validation(id, "samples.mach", "Mach numbers must be unique and increasing"));
        }
        if let Some(positions) = &self.positions {
            for p in positions {
                if !(p.x1.is_finite() && p.x2.is_finite()) {
                    return Err(Error::validation(id, "positions", "non-finite coordinate"));
                }
                if !self.samples.iter().any(|s| (s.mach - p.mach).abs() <= MACH_MATCH_TOL) {
                    return Err(Error::validation(
                        id,
                        "positions",
                        format!("Mach {} has no spectrum sample", p.mach),
                    ));
                }
            }
        }
        for (name, sigma) in [("sigma_x1", self.sigma_x1), ("sigma_x2", self.sigma_x2)] {
            if let Some(s) = sigma {
                if !(s.is_finite() && s > 0.0) {
                    return Err(Error::validation(id, name, format!("must be positive, got {s}")));
                }
            }
        }
        Ok(())
    }
}

/// Dynamic viscosity and density of the test medium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    /// Dynamic viscosity in Pa·s.
    pub mu: f64,
    /// Density in kg/m³.
    pub rho: f64,
}

impl FlowConfig {
    pub fn new(mu: f64, rho: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::invalid("mu", "dynamic viscosity must be positive"));
        }
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::invalid("rho", "density must be positive"));
        }
        Ok(FlowConfig { mu, rho })
    }

    /// Dry air as an ideal gas with Sutherland's viscosity law.
    pub fn air(temperature: f64, pressure: f64) -> Result<Self> {
        const R_AIR: f64 = 287.058;
        const MU_REF: f64 = 1.716e-5;
        const T_REF: f64 = 273.15;
        const SUTHERLAND: f64 = 110.4;
        if !(temperature > 0.0 && pressure > 0.0) {
            return Err(Error::invalid("temperature", "temperature and pressure must be positive"));
        }
        let mu = MU_REF * (temperature / T_REF).powf(1.5) * (T_REF + SUTHERLAND)
            / (temperature + SUTHERLAND);
        FlowConfig::new(mu, pressure / (R_AIR * temperature))
    }
}

/// Speed of sound of dry air at the given temperature.
pub fn air_speed_of_sound(temperature: f64) -> f64 {
    (1.4 * 287.058 * temperature).sqrt()
}

/// Re = ρ·M·a·D0/μ, with M·a the flow speed.
pub fn reynolds_number(flow: FlowConfig, mach: f64, speed_of_sound: f64, d0: f64) -> Result<f64> {
    for (name, v) in [
        ("mu", flow.mu),
        ("rho", flow.rho),
        ("mach", mach),
        ("speed_of_sound", speed_of_sound),
        ("d0", d0),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::invalid(name, format!("must be positive, got {v}")));
        }
    }
    Ok(flow.rho * mach * speed_of_sound * d0 / flow.mu)
}

/// A collection of sources sharing a dataset name and reference length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bundle {
    pub dataset: String,
    pub d0_m: f64,
    pub sources: Vec<SourceRecord>,
}

impl Bundle {
    /// Parses bundle text, fills per-source defaults from the top level and
    /// validates every record.
    pub fn from_json(text: &str) -> Result<Bundle> {
        let mut bundle: Bundle = serde_json::from_str(text)?;
        for src in &mut bundle.sources {
            if src.dataset.is_empty() {
                src.dataset = bundle.dataset.clone();
            }
            if src.d0 == 0.0 {
                src.d0 = bundle.d0_m;
            }
            src.validate()?;
        }
        Ok(bundle)
    }

    pub fn to_json(&self) -> Result<String> {
        canonical::to_string(self)
    }

    pub fn load(path: &Path) -> Result<Bundle> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Bundle::from_json(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Reads and validates all sources of a bundle file.
pub fn load_bundle(path: &Path) -> Result<Vec<SourceRecord>> {
    Ok(Bundle::load(path)?.sources)
}

/// Writes a bundle file with sorted keys and nine significant digits.
pub fn write_bundle(path: &Path, bundle: &Bundle) -> Result<()> {
    bundle.write(path)
}

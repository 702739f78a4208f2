//! Seeded synthetic sources built from phenomenological archetypes.
//!
//! A spectrum at Mach `M` is
//! `G(f̂) + n·10·log10(M) + tones + noise` with `f̂ = f·D0/(M^m·a)`, sampled on
//! a fixed logarithmic band of absolute frequencies. An optional upper
//! mechanism replaces the spectrum above a Helmholtz-number cut.
//!
//! Per-instance jitter in [`generate_dataset`] is drawn uniformly within the
//! bounds of [`Jitter`]; the defaults are
//!
//! | quantity | bound |
//! |---|---|
//! | `m_true` | ±0.04 (absolute) |
//! | `n_true` | ±0.3 (absolute) |
//! | knot and hump frequencies, tone frequencies | ±8% (relative) |
//! | hump height, tone prominence | ±15% (relative) |
//! | σ, movement rate | ±15% (relative) |

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data_model::{reynolds_number, Bundle, FlowConfig, Position, SourceRecord, SpectrumSample};
use crate::error::{Error, Result};

const CATALOG_JSON: &str = include_str!("../data/archetypes.json");

/// Measurement setup shared by all generated sources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Setup {
    pub d0_m: f64,
    pub speed_of_sound: f64,
    pub temperature_k: f64,
    pub pressure_pa: f64,
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub points_per_octave: usize,
    pub machs: Vec<f64>,
}

impl Setup {
    pub fn freqs(&self) -> Vec<f64> {
        let octaves = (self.f_max_hz / self.f_min_hz).log2();
        let n = (octaves * self.points_per_octave as f64 + 1e-9).floor() as usize + 1;
        (0..n)
            .map(|k| self.f_min_hz * 2f64.powf(k as f64 / self.points_per_octave as f64))
            .collect()
    }
}

impl Default for Setup {
    fn default() -> Self {
        catalog().setup
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hump {
    /// Center in normalized frequency.
    pub center: f64,
    /// Standard deviation in octaves.
    pub width_octaves: f64,
    pub height_db: f64,
}

/// Piecewise linear in `log10 f̂` through `knots`, extrapolated with the end
/// slopes, plus an optional Gaussian hump in `log2 f̂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Broadband {
    pub knots: Vec<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hump: Option<Hump>,
}

impl Broadband {
    pub fn level(&self, f: f64) -> f64 {
        let x = f.log10();
        let k = &self.knots;
        let base = if k.len() == 1 {
            k[0].1
        } else {
            let i = k[..k.len() - 1]
                .iter()
                .rposition(|(kf, _)| kf.log10() <= x)
                .unwrap_or(0)
                .min(k.len() - 2);
            let (x0, y0) = (k[i].0.log10(), k[i].1);
            let (x1, y1) = (k[i + 1].0.log10(), k[i + 1].1);
            y0 + (x - x0) * (y1 - y0) / (x1 - x0)
        };
        base + self.hump.map_or(0.0, |h| gaussian_octaves(f, h.center, h.width_octaves, h.height_db))
    }
}

fn gaussian_octaves(f: f64, center: f64, width: f64, height: f64) -> f64 {
    let d = (f / center).log2() / width;
    height * (-0.5 * d * d).exp()
}

fn default_tone_width() -> f64 {
    0.08
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tone {
    /// Center in the tone's normalized frequency.
    pub freq: f64,
    pub prominence_db: f64,
    #[serde(default = "default_tone_width")]
    pub width_octaves: f64,
    /// Normalization exponent of this tone; defaults to the mechanism's.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
}

/// One scaling mechanism: its exponents, broadband shape and tones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mechanism {
    pub m_true: f64,
    pub n_true: f64,
    pub broadband: Broadband,
    #[serde(default)]
    pub tones: Vec<Tone>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpperMechanism {
    /// Helmholtz number above which `upper` replaces the main mechanism.
    pub cut_he: f64,
    pub upper: Mechanism,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Archetype {
    pub name: String,
    #[serde(flatten)]
    pub mechanism: Mechanism,
    pub noise_db: f64,
    /// Fraction of the lowest frequency points left undefined.
    pub missing_rate: f64,
    #[serde(default)]
    pub position: (f64, f64),
    /// Streamwise drift in meters per unit Mach.
    pub movement_rate: f64,
    pub sigma_x1: f64,
    pub sigma_x2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<UpperMechanism>,
}

fn check_mechanism(name: &str, m: &Mechanism) -> Result<()> {
    let bad = |reason: &str| Err(Error::validation(name, "archetype", reason));
    if !(m.m_true >= 0.0 && m.n_true >= 0.0) {
        return bad("m_true and n_true must be >= 0");
    }
    let k = &m.broadband.knots;
    if k.is_empty() || k.iter().any(|(f, l)| !(*f > 0.0 && l.is_finite())) {
        return bad("broadband knots need positive frequencies and finite levels");
    }
    if k.windows(2).any(|w| w[1].0 <= w[0].0) {
        return bad("broadband knots must be strictly increasing");
    }
    if let Some(h) = m.broadband.hump {
        if !(h.center > 0.0 && h.width_octaves > 0.0 && h.height_db.is_finite()) {
            return bad("invalid hump");
        }
    }
    for t in &m.tones {
        if !(t.freq > 0.0 && t.width_octaves > 0.0 && t.prominence_db >= 0.0 && t.m.map_or(true, |m| m >= 0.0)) {
            return bad("invalid tone");
        }
    }
    Ok(())
}

impl Archetype {
    pub fn validate(&self) -> Result<()> {
        check_mechanism(&self.name, &self.mechanism)?;
        let bad = |reason: &str| Err(Error::validation(&self.name, "archetype", reason));
        if !(self.noise_db >= 0.0 && self.movement_rate >= 0.0) {
            return bad("rates must be >= 0");
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return bad("missing_rate must lie in [0, 1)");
        }
        if !(self.sigma_x1 > 0.0 && self.sigma_x2 > 0.0) {
            return bad("sigmas must be positive");
        }
        if let Some(s) = &self.split {
            if !(s.cut_he > 0.0) {
                return bad("cut_he must be positive");
            }
            check_mechanism(&self.name, &s.upper)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub version: u32,
    pub setup: Setup,
    pub archetypes: Vec<Archetype>,
}

impl Catalog {
    pub fn get(&self, name: &str) -> Option<&Archetype> {
        self.archetypes.iter().find(|a| a.name == name)
    }

    /// Archetypes without an upper mechanism.
    pub fn single_mechanism(&self) -> Vec<Archetype> {
        self.archetypes.iter().filter(|a| a.split.is_none()).cloned().collect()
    }
}

/// The bundled archetype catalog.
pub fn catalog() -> Catalog {
    serde_json::from_str(CATALOG_JSON).expect("bundled catalog parses")
}

fn mechanism_level(mech: &Mechanism, f: f64, mach: f64, setup: &Setup) -> f64 {
    let norm = |m: f64| f * setup.d0_m / (mach.powf(m) * setup.speed_of_sound);
    let mut level = mech.broadband.level(norm(mech.m_true)) + mech.n_true * 10.0 * mach.log10();
    for t in &mech.tones {
        let fh = norm(t.m.unwrap_or(mech.m_true));
        level += gaussian_octaves(fh, t.freq, t.width_octaves, t.prominence_db);
    }
    level
}

/// Generates one source at the given Machs with the catalog setup.
pub fn generate(archetype: &Archetype, machs: &[f64], seed: u64) -> Result<SourceRecord> {
    generate_with(archetype, machs, seed, &Setup::default(), &archetype.name)
}

pub fn generate_with(archetype: &Archetype, machs: &[f64], seed: u64, setup: &Setup, id: &str) -> Result<SourceRecord> {
    archetype.validate()?;
    if machs.is_empty() {
        return Err(Error::invalid("machs", "need at least one Mach number"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, archetype.noise_db).map_err(|e| Error::invalid("noise_db", e.to_string()))?;
    let freqs = setup.freqs();
    let n_missing = (archetype.missing_rate * freqs.len() as f64).round() as usize;
    let samples = machs
        .iter()
        .map(|&mach| {
            let psd = freqs
                .iter()
                .enumerate()
                .map(|(i, &f)| {
                    let he = f * setup.d0_m / setup.speed_of_sound;
                    let mech = match &archetype.split {
                        Some(s) if he >= s.cut_he => &s.upper,
                        _ => &archetype.mechanism,
                    };
                    let v = mechanism_level(mech, f, mach, setup) + noise.sample(&mut rng);
                    (i >= n_missing).then_some(v)
                })
                .collect();
            SpectrumSample { mach, speed_of_sound: setup.speed_of_sound, freqs: freqs.clone(), psd }
        })
        .collect();
    let (x0, y0) = archetype.position;
    let positions = machs
        .iter()
        .map(|&mach| Position { mach, x1: x0 + archetype.movement_rate * (mach - machs[0]), x2: y0 })
        .collect();
    let flow = FlowConfig::air(setup.temperature_k, setup.pressure_pa)?;
    let mean_mach = machs.iter().sum::<f64>() / machs.len() as f64;
    let record = SourceRecord {
        id: id.to_string(),
        label: Some(archetype.name.clone()),
        dataset: "synthetic".into(),
        d0: setup.d0_m,
        alpha: 0.0,
        reynolds_mean: reynolds_number(flow, mean_mach, setup.speed_of_sound, setup.d0_m)?,
        temperature: setup.temperature_k,
        pressure: setup.pressure_pa,
        samples,
        positions: Some(positions),
        sigma_x1: Some(archetype.sigma_x1),
        sigma_x2: Some(archetype.sigma_x2),
        split: None,
    };
    record.validate()?;
    Ok(record)
}

/// Bounds of the per-instance parameter jitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jitter {
    pub m: f64,
    pub n: f64,
    pub freq: f64,
    pub level: f64,
    pub spatial: f64,
}

impl Default for Jitter {
    fn default() -> Self {
        Jitter { m: 0.04, n: 0.3, freq: 0.08, level: 0.15, spatial: 0.15 }
    }
}

impl Jitter {
    pub fn none() -> Self {
        Jitter { m: 0.0, n: 0.0, freq: 0.0, level: 0.0, spatial: 0.0 }
    }
}

fn uniform(rng: &mut ChaCha8Rng, bound: f64) -> f64 {
    if bound > 0.0 {
        rng.random_range(-bound..=bound)
    } else {
        0.0
    }
}

fn jitter_mechanism(mech: &Mechanism, j: &Jitter, rng: &mut ChaCha8Rng) -> Mechanism {
    let mut out = mech.clone();
    out.m_true = (mech.m_true + uniform(rng, j.m)).max(0.0);
    out.n_true = (mech.n_true + uniform(rng, j.n)).max(0.0);
    let shift = 1.0 + uniform(rng, j.freq);
    out.broadband.knots.iter_mut().for_each(|k| k.0 *= shift);
    if let Some(h) = out.broadband.hump.as_mut() {
        h.center *= 1.0 + uniform(rng, j.freq);
        h.height_db *= 1.0 + uniform(rng, j.level);
    }
    for t in &mut out.tones {
        t.freq *= 1.0 + uniform(rng, j.freq);
        t.prominence_db *= 1.0 + uniform(rng, j.level);
    }
    out
}

/// One archetype instance with jittered parameters.
pub fn jittered(archetype: &Archetype, jitter: &Jitter, rng: &mut ChaCha8Rng) -> Archetype {
    let mut a = archetype.clone();
    a.mechanism = jitter_mechanism(&archetype.mechanism, jitter, rng);
    if let Some(s) = a.split.as_mut() {
        s.upper = jitter_mechanism(&s.upper, jitter, rng);
    }
    a.sigma_x1 *= 1.0 + uniform(rng, jitter.spatial);
    a.sigma_x2 *= 1.0 + uniform(rng, jitter.spatial);
    a.movement_rate *= 1.0 + uniform(rng, jitter.spatial);
    a
}

/// `per_type` jittered instances of every archetype, labelled by archetype
/// name, plus the `{id: label}` map.
pub fn generate_dataset(
    archetypes: &[Archetype],
    per_type: usize,
    setup: &Setup,
    seed: u64,
    jitter: &Jitter,
) -> Result<(Bundle, BTreeMap<String, String>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sources = Vec::with_capacity(archetypes.len() * per_type);
    let mut labels = BTreeMap::new();
    for arch in archetypes {
        for i in 0..per_type {
            let instance = jittered(arch, jitter, &mut rng);
            let id = format!("{}-{:03}", arch.name, i);
            let record = generate_with(&instance, &setup.machs, rng.random(), setup, &id)?;
            labels.insert(id, arch.name.clone());
            sources.push(record);
        }
    }
    Ok((
        Bundle { dataset: "synthetic".into(), d0_m: setup.d0_m, sources },
        labels,
    ))
}

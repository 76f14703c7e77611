//! INI-style configuration with explicit unit suffixes.
//!
//! Grammar per line: `key = number [+- number] [unit]` under a `[section]`
//! header. Every known key declares a dimension; a missing or mismatched
//! unit is an error, and so is any unknown section or key — misspellings
//! must never silently fall back to defaults.

use std::collections::BTreeMap;
use std::fmt;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;

use ionsim_core::analysis::ImprovedScenario;
use ionsim_core::atom::LevelSplittings;
use ionsim_core::collection::CollectionGeometry;
use ionsim_core::montecarlo::{ExperimentConfig, ScenarioTag};
use ionsim_core::protocol::{MicrowavePulse, ProtocolSequence, SequenceStep, StatePrepConfig};
use ionsim_core::spectrometer::{ClassificationMatrix, GratingSpec, SpotPair, ThroughputChain};
use ionsim_core::uncertainty::Measured;

pub const DEFAULT_CONFIG: &str = include_str!("../../../configs/default.ini");

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Time,
    Frequency,
    Length,
    LinesPerLength,
    Angle,
    Dimensionless,
    Count,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Kind::Time => "time (s, ms, us, ns)",
            Kind::Frequency => "frequency (hz, khz, mhz, ghz, thz)",
            Kind::Length => "length (m, mm, um, nm)",
            Kind::LinesPerLength => "line density (per_mm, per_m)",
            Kind::Angle => "angle (deg, rad)",
            Kind::Dimensionless => "dimensionless (no unit)",
            Kind::Count => "integer count (no unit)",
        };
        f.write_str(s)
    }
}

/// (section, key, dimension) for every legal entry.
const SCHEMA: &[(&str, &str, Kind)] = &[
    ("atom", "ground_hyperfine", Kind::Frequency),
    ("atom", "excited_hyperfine", Kind::Frequency),
    ("atom", "optical_carrier", Kind::Frequency),
    ("atom", "zeeman_shift_per_mf", Kind::Frequency),
    ("protocol", "pump_duration", Kind::Time),
    ("protocol", "pump_fidelity", Kind::Dimensionless),
    ("protocol", "microwave_pi_time", Kind::Time),
    ("protocol", "microwave_detuning", Kind::Frequency),
    ("protocol", "microwave_drive", Kind::Frequency),
    ("protocol", "excitation_pulse", Kind::Time),
    ("protocol", "photon_gate", Kind::Time),
    ("protocol", "readout_window", Kind::Time),
    ("protocol", "cycle_time", Kind::Time),
    ("protocol", "excited_lifetime", Kind::Time),
    ("protocol", "generation_target", Kind::Dimensionless),
    ("collection", "mirror_width", Kind::Length),
    ("collection", "mirror_height", Kind::Length),
    ("collection", "mirror_distance", Kind::Length),
    ("collection", "numerical_aperture", Kind::Dimensionless),
    ("collection", "fibre_efficiency", Kind::Dimensionless),
    ("collection", "pi_leak_fraction", Kind::Dimensionless),
    ("spectrometer", "line_density", Kind::LinesPerLength),
    ("spectrometer", "ruled_width", Kind::Length),
    ("spectrometer", "ruled_height", Kind::Length),
    ("spectrometer", "operating_angle", Kind::Angle),
    ("spectrometer", "diffraction_order", Kind::Count),
    ("spectrometer", "beam_diameter", Kind::Length),
    ("spectrometer", "wavelength", Kind::Length),
    ("spectrometer", "spot_diameter_1", Kind::Length),
    ("spectrometer", "spot_diameter_2", Kind::Length),
    ("spectrometer", "spot_separation", Kind::Length),
    ("spectrometer", "fidelity_nu0", Kind::Dimensionless),
    ("spectrometer", "fidelity_nu1", Kind::Dimensionless),
    ("spectrometer", "stage_fibre_coupling", Kind::Dimensionless),
    ("spectrometer", "stage_grating_optics", Kind::Dimensionless),
    ("spectrometer", "stage_detector_qe", Kind::Dimensionless),
    ("spectrometer", "gate_dark_rate", Kind::Frequency),
    ("readout", "bright_rate", Kind::Frequency),
    ("readout", "threshold", Kind::Count),
    ("readout", "fidelity_up", Kind::Dimensionless),
    ("readout", "fidelity_down", Kind::Dimensionless),
    ("montecarlo", "shots", Kind::Count),
    ("montecarlo", "seed", Kind::Count),
    ("montecarlo", "prep_fidelity", Kind::Dimensionless),
    ("montecarlo", "photon_generation", Kind::Dimensionless),
    ("montecarlo", "spectrometer_quoted", Kind::Dimensionless),
    ("scenario", "prep_fidelity", Kind::Dimensionless),
    ("scenario", "readout_fidelity", Kind::Dimensionless),
    ("scenario", "readout_window", Kind::Time),
    ("scenario", "grating_efficiency", Kind::Dimensionless),
    ("scenario", "sigma_collection", Kind::Dimensionless),
    ("scenario", "spot_fidelity", Kind::Dimensionless),
];

fn unit_factor(kind: Kind, unit: &str) -> Option<f64> {
    match (kind, unit) {
        (Kind::Time, "s") => Some(1.0),
        (Kind::Time, "ms") => Some(1e-3),
        (Kind::Time, "us") => Some(1e-6),
        (Kind::Time, "ns") => Some(1e-9),
        (Kind::Frequency, "hz") => Some(1.0),
        (Kind::Frequency, "khz") => Some(1e3),
        (Kind::Frequency, "mhz") => Some(1e6),
        (Kind::Frequency, "ghz") => Some(1e9),
        (Kind::Frequency, "thz") => Some(1e12),
        (Kind::Length, "m") => Some(1.0),
        (Kind::Length, "mm") => Some(1e-3),
        (Kind::Length, "um") => Some(1e-6),
        (Kind::Length, "nm") => Some(1e-9),
        (Kind::LinesPerLength, "per_m") => Some(1.0),
        (Kind::LinesPerLength, "per_mm") => Some(1e3),
        (Kind::Angle, "rad") => Some(1.0),
        (Kind::Angle, "deg") => Some(std::f64::consts::PI / 180.0),
        _ => None,
    }
}

/// One parsed value in SI units.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Entry {
    pub value: f64,
    pub sigma: f64,
}

impl Entry {
    pub fn measured(&self) -> Measured {
        Measured::new(self.value, self.sigma)
    }
}

fn parse_value(kind: Kind, raw: &str, at: &str) -> Result<Entry> {
    let mut tokens: Vec<&str> = raw.split_whitespace().collect();
    if tokens.is_empty() {
        bail!("{at}: empty value");
    }
    // trailing unit token, if the dimension wants one
    let unit_scale = match kind {
        Kind::Dimensionless | Kind::Count => {
            if tokens.last().map(|t| t.parse::<f64>().is_err()) == Some(true)
                && *tokens.last().unwrap() != "+-"
            {
                bail!(
                    "{at}: unexpected unit `{}` on a {kind} value",
                    tokens.last().unwrap()
                );
            }
            1.0
        }
        _ => {
            let unit = tokens
                .pop()
                .filter(|t| t.parse::<f64>().is_err())
                .ok_or_else(|| anyhow!("{at}: missing unit; expected {kind}"))?;
            unit_factor(kind, unit)
                .ok_or_else(|| anyhow!("{at}: unit `{unit}` does not measure {kind}"))?
        }
    };
    let (num, sigma) = match tokens.len() {
        1 => (tokens[0], None),
        3 if tokens[1] == "+-" => (tokens[0], Some(tokens[2])),
        _ => bail!("{at}: expected `number [+- number] [unit]`, got `{raw}`"),
    };
    let value: f64 = num.parse().with_context(|| format!("{at}: bad number `{num}`"))?;
    let sigma: f64 = match sigma {
        Some(s) => s.parse().with_context(|| format!("{at}: bad uncertainty `{s}`"))?,
        None => 0.0,
    };
    if kind == Kind::Count && (value.fract() != 0.0 || value < 0.0 || sigma != 0.0) {
        bail!("{at}: expected a plain non-negative integer");
    }
    Ok(Entry { value: value * unit_scale, sigma: sigma * unit_scale })
}

/// Parse one INI document into (section, key) → Entry, validating every
/// key against the schema.
fn parse_ini(text: &str, origin: &str) -> Result<BTreeMap<(String, String), Entry>> {
    let mut out = BTreeMap::new();
    let mut section = String::new();
    for (lineno, raw_line) in text.lines().enumerate() {
        let line = match raw_line.find('#') {
            Some(idx) => &raw_line[..idx],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let at = format!("{origin}:{}", lineno + 1);
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| anyhow!("{at}: unterminated section header"))?
                .trim();
            if !SCHEMA.iter().any(|(s, _, _)| *s == name) {
                bail!("{at}: unknown section `[{name}]`");
            }
            section = name.to_string();
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("{at}: expected `key = value`"))?;
        let key = key.trim();
        if section.is_empty() {
            bail!("{at}: key `{key}` before any [section] header");
        }
        let kind = SCHEMA
            .iter()
            .find(|(s, k, _)| *s == section && *k == key)
            .map(|(_, _, kind)| *kind)
            .ok_or_else(|| anyhow!("{at}: unknown key `{section}.{key}`"))?;
        let entry = parse_value(kind, value.trim(), &format!("{at} ({section}.{key})"))?;
        out.insert((section.clone(), key.to_string()), entry);
    }
    Ok(out)
}

/// Fully resolved configuration: built-in defaults overridden key-by-key
/// by an optional user file.
#[derive(Clone, Debug)]
pub struct Config {
    entries: BTreeMap<(String, String), Entry>,
    pub source: String,
}

impl Serialize for Config {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut nested: BTreeMap<&str, BTreeMap<&str, Entry>> = BTreeMap::new();
        for ((section, key), entry) in &self.entries {
            nested.entry(section).or_default().insert(key, *entry);
        }
        nested.serialize(serializer)
    }
}

impl Config {
    pub fn load(user_path: Option<&std::path::Path>) -> Result<Self> {
        let mut entries = parse_ini(DEFAULT_CONFIG, "<built-in defaults>")?;
        let source = match user_path {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                let overrides = parse_ini(&text, &path.display().to_string())?;
                entries.extend(overrides);
                path.display().to_string()
            }
            None => "<built-in defaults>".to_string(),
        };
        Ok(Self { entries, source })
    }

    fn entry(&self, section: &str, key: &str) -> Entry {
        // the built-in defaults cover the whole schema, so lookups of
        // schema keys cannot miss
        self.entries[&(section.to_string(), key.to_string())]
    }

    pub fn get(&self, section: &str, key: &str) -> f64 {
        self.entry(section, key).value
    }

    pub fn get_measured(&self, section: &str, key: &str) -> Measured {
        self.entry(section, key).measured()
    }

    pub fn splittings(&self) -> LevelSplittings {
        LevelSplittings {
            ground_hyperfine_hz: self.get("atom", "ground_hyperfine"),
            excited_hyperfine_hz: self.get("atom", "excited_hyperfine"),
            optical_carrier_hz: self.get("atom", "optical_carrier"),
            zeeman_per_mf_hz: self.get("atom", "zeeman_shift_per_mf"),
        }
    }

    pub fn microwave(&self) -> MicrowavePulse {
        let duration = self.get("protocol", "microwave_pi_time");
        MicrowavePulse {
            rabi_rad_per_s: std::f64::consts::PI / duration,
            detuning_hz: self.get("protocol", "microwave_detuning"),
            duration_s: duration,
            drive_hz: self.get("protocol", "microwave_drive"),
        }
    }

    pub fn state_prep(&self) -> StatePrepConfig {
        StatePrepConfig {
            pump_fidelity: self.get("protocol", "pump_fidelity"),
            microwave: self.microwave(),
        }
    }

    pub fn sequence(&self) -> ProtocolSequence {
        let steps = vec![
            SequenceStep { name: "optical pump".into(), duration_s: self.get("protocol", "pump_duration") },
            SequenceStep { name: "microwave pi-pulse".into(), duration_s: self.get("protocol", "microwave_pi_time") },
            SequenceStep { name: "optical excitation".into(), duration_s: self.get("protocol", "excitation_pulse") },
            SequenceStep { name: "photon gate".into(), duration_s: self.get("protocol", "photon_gate") },
            SequenceStep { name: "state readout".into(), duration_s: self.get("protocol", "readout_window") },
        ];
        let active: f64 = steps.iter().map(|s| s.duration_s).sum();
        ProtocolSequence { steps, dead_time_s: self.get("protocol", "cycle_time") - active }
    }

    pub fn collection_geometry(&self) -> CollectionGeometry {
        CollectionGeometry {
            width_m: self.get("collection", "mirror_width"),
            height_m: self.get("collection", "mirror_height"),
            distance_m: self.get("collection", "mirror_distance"),
            numerical_aperture: self.get("collection", "numerical_aperture"),
        }
    }

    pub fn grating(&self) -> GratingSpec {
        GratingSpec {
            lines_per_m: self.get("spectrometer", "line_density"),
            ruled_width_m: self.get("spectrometer", "ruled_width"),
            ruled_height_m: self.get("spectrometer", "ruled_height"),
            operating_angle_rad: self.get("spectrometer", "operating_angle"),
            order: self.get("spectrometer", "diffraction_order") as u32,
            beam_diameter_m: self.get("spectrometer", "beam_diameter"),
        }
    }

    pub fn spots(&self) -> SpotPair {
        SpotPair {
            diameter_1_m: self.get("spectrometer", "spot_diameter_1"),
            diameter_2_m: self.get("spectrometer", "spot_diameter_2"),
            separation_m: self.get("spectrometer", "spot_separation"),
        }
    }

    pub fn classification(&self) -> ClassificationMatrix {
        ClassificationMatrix {
            p_correct_nu0: self.get("spectrometer", "fidelity_nu0"),
            p_correct_nu1: self.get("spectrometer", "fidelity_nu1"),
        }
    }

    pub fn throughput(&self) -> ThroughputChain {
        ThroughputChain {
            stages: vec![
                ("fibre coupling".into(), self.get_measured("spectrometer", "stage_fibre_coupling")),
                ("grating + optics".into(), self.get_measured("spectrometer", "stage_grating_optics")),
                ("detector quantum efficiency".into(), self.get_measured("spectrometer", "stage_detector_qe")),
            ],
        }
    }

    /// The quoted per-shot coincidence budget stages.
    pub fn budget_stages(&self) -> Vec<(String, Measured)> {
        vec![
            ("state preparation".into(), self.get_measured("montecarlo", "prep_fidelity")),
            ("photon generation".into(), self.get_measured("montecarlo", "photon_generation")),
            ("ion-to-fibre collection".into(), self.get_measured("collection", "fibre_efficiency")),
            ("spectrometer efficiency".into(), self.get_measured("montecarlo", "spectrometer_quoted")),
        ]
    }

    pub fn experiment(&self, seed: Option<u64>, shots: Option<u64>, diagnostics: bool) -> ExperimentConfig {
        ExperimentConfig {
            shots: shots.unwrap_or(self.get("montecarlo", "shots") as u64),
            master_seed: seed.unwrap_or(self.get("montecarlo", "seed") as u64),
            prep_fidelity: self.get("montecarlo", "prep_fidelity"),
            photon_generation_total: self.get("montecarlo", "photon_generation"),
            fibre_efficiency: self.get("collection", "fibre_efficiency"),
            pi_leak_fraction: self.get("collection", "pi_leak_fraction"),
            spectrometer_efficiency: self.throughput().efficiency().value,
            gate_dark_probability: self.get("spectrometer", "gate_dark_rate")
                * self.get("protocol", "photon_gate"),
            classification: self.classification(),
            readout_fidelity_up: self.get("readout", "fidelity_up"),
            readout_fidelity_down: self.get("readout", "fidelity_down"),
            cycle_time_s: self.get("protocol", "cycle_time"),
            diagnostics,
            scenario: ScenarioTag::PaperDefault,
        }
    }

    pub fn improved_scenario(&self) -> ImprovedScenario {
        ImprovedScenario {
            prep_fidelity: self.get("scenario", "prep_fidelity"),
            photon_generation_total: self.get("montecarlo", "photon_generation"),
            sigma_collection: self.get("scenario", "sigma_collection"),
            grating_efficiency: self.get("scenario", "grating_efficiency"),
            readout_fidelity: self.get("scenario", "readout_fidelity"),
            readout_window_s: self.get("scenario", "readout_window"),
            spot_fidelity: self.get("scenario", "spot_fidelity"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_and_cover_schema() {
        let cfg = Config::load(None).unwrap();
        for (section, key, _) in SCHEMA {
            let _ = cfg.get(section, key);
        }
        assert_eq!(cfg.get("protocol", "excitation_pulse"), 51e-9);
        assert_eq!(cfg.get("spectrometer", "line_density"), 4320e3);
        assert_eq!(cfg.get("atom", "ground_hyperfine"), 12.6428e9);
        let fibre = cfg.get_measured("collection", "fibre_efficiency");
        assert_eq!((fibre.value, fibre.sigma), (0.027, 0.003));
    }

    #[test]
    fn unknown_key_is_an_error() {
        let err = parse_ini("[atom]\nground_hyperfien = 12.6 ghz\n", "test").unwrap_err();
        assert!(err.to_string().contains("ground_hyperfien"), "{err}");
    }

    #[test]
    fn unknown_section_is_an_error() {
        let err = parse_ini("[atoms]\n", "test").unwrap_err();
        assert!(err.to_string().contains("atoms"));
    }

    #[test]
    fn wrong_dimension_unit_is_an_error() {
        let err = parse_ini("[protocol]\npump_duration = 10 ghz\n", "test").unwrap_err();
        assert!(err.to_string().contains("ghz"), "{err}");
    }

    #[test]
    fn missing_unit_is_an_error() {
        let err = parse_ini("[protocol]\npump_duration = 10\n", "test").unwrap_err();
        assert!(err.to_string().contains("missing unit"), "{err}");
    }

    #[test]
    fn uncertainty_syntax_parses() {
        let map = parse_ini("[montecarlo]\nprep_fidelity = 0.91 +- 0.04\n", "test").unwrap();
        let e = map[&("montecarlo".to_string(), "prep_fidelity".to_string())];
        assert_eq!((e.value, e.sigma), (0.91, 0.04));
    }

    #[test]
    fn unit_scales_apply_to_value_and_sigma() {
        let map = parse_ini("[spectrometer]\nspot_separation = 82.0 +- 0.2 um\n", "test").unwrap();
        let e = map[&("spectrometer".to_string(), "spot_separation".to_string())];
        assert!((e.value - 82.0e-6).abs() < 1e-18);
        assert!((e.sigma - 0.2e-6).abs() < 1e-18);
    }
}

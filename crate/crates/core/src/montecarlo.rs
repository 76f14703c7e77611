//! Shot-level simulation of the full experiment.
//!
//! Each shot walks the classical probability pipeline in stage order:
//! preparation → photon branch → fibre collection → spectrometer survival →
//! spectrometer classification → ion readout. Coherences never enter any
//! measured quantity here; the stage probabilities come from the
//! master-equation engine and the measured hardware parameters.
//!
//! Randomness is counter-based per (shot, stage), so a run is bit-identical
//! for a given (config, seed) regardless of worker count, and the
//! conditioned sampler (`importance_mode`) reproduces `run_shot` exactly
//! when the click probability is 1.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::readout::IonState;
use crate::rng::ShotStreams;
use crate::spectrometer::{classify_photon, ClassificationMatrix, PhotonState};

#[derive(Debug, Error)]
pub enum MonteCarloError {
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScenarioTag {
    PaperDefault,
    ImprovedProjection,
    Custom,
}

/// Stage probabilities and run bookkeeping for one simulated session.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub shots: u64,
    pub master_seed: u64,
    /// Probability the ion is ready in S|1,-1⟩ after pump + microwave.
    pub prep_fidelity: f64,
    /// Total probability that a prepared shot yields a collectible qubit
    /// photon, split equally between the ν₁ and ν₀ branches.
    pub photon_generation_total: f64,
    pub fibre_efficiency: f64,
    /// Residual π-channel light admitted past the geometry + polarizer,
    /// as a fraction of the fibre efficiency. 0 drops π light entirely.
    pub pi_leak_fraction: f64,
    pub spectrometer_efficiency: f64,
    /// Probability of a detector dark count inside the photon gate,
    /// per shot (gate duration × dark rate). 0 disables false clicks.
    pub gate_dark_probability: f64,
    pub classification: ClassificationMatrix,
    pub readout_fidelity_up: f64,
    pub readout_fidelity_down: f64,
    pub cycle_time_s: f64,
    /// Retain true branch labels on records for error attribution.
    pub diagnostics: bool,
    pub scenario: ScenarioTag,
}

impl ExperimentConfig {
    /// Stage values of the published run. The photon stage is the 11.6%
    /// budget figure for generating a qubit photon, the spectrometer stage
    /// the product of its measured throughput chain.
    pub fn paper_default() -> Self {
        Self {
            shots: 14_883_327,
            master_seed: 20_060,
            prep_fidelity: 0.91,
            photon_generation_total: 0.116,
            fibre_efficiency: 0.027,
            pi_leak_fraction: 0.0,
            spectrometer_efficiency: 0.79 * 0.25 * 0.19,
            gate_dark_probability: 0.0,
            classification: ClassificationMatrix::paper_default(),
            readout_fidelity_up: 0.955,
            readout_fidelity_down: 0.973,
            cycle_time_s: 1411e-6,
            diagnostics: false,
            scenario: ScenarioTag::PaperDefault,
        }
    }

    pub fn validate(&self) -> Result<(), MonteCarloError> {
        if self.shots == 0 {
            return Err(MonteCarloError::InvalidConfig("shots must be >= 1".into()));
        }
        let probs = [
            ("prep_fidelity", self.prep_fidelity),
            ("photon_generation_total", self.photon_generation_total),
            ("fibre_efficiency", self.fibre_efficiency),
            ("pi_leak_fraction", self.pi_leak_fraction),
            ("spectrometer_efficiency", self.spectrometer_efficiency),
            ("gate_dark_probability", self.gate_dark_probability),
            ("classification nu0", self.classification.p_correct_nu0),
            ("classification nu1", self.classification.p_correct_nu1),
            ("readout_fidelity_up", self.readout_fidelity_up),
            ("readout_fidelity_down", self.readout_fidelity_down),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(MonteCarloError::InvalidConfig(format!(
                    "{name} = {p} outside [0, 1]"
                )));
            }
        }
        if self.cycle_time_s <= 0.0 {
            return Err(MonteCarloError::InvalidConfig("cycle_time must be positive".into()));
        }
        Ok(())
    }

    /// Per-shot probability that a real photon produces a click.
    fn photon_click_probability(&self) -> f64 {
        let qubit = self.prep_fidelity
            * self.photon_generation_total
            * self.fibre_efficiency
            * self.spectrometer_efficiency;
        let pi = self.prep_fidelity
            * (1.0 - self.photon_generation_total)
            * self.pi_leak_fraction
            * self.fibre_efficiency
            * self.spectrometer_efficiency;
        qubit + pi
    }

    /// Analytic per-shot click probability of this pipeline; a dark count
    /// can fire only when no photon click occurred.
    pub fn analytic_click_probability(&self) -> f64 {
        let photon = self.photon_click_probability();
        photon + (1.0 - photon) * self.gate_dark_probability
    }
}

/// Where the shot truly ended up, before any detector lied about it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrueState {
    /// Pump or transfer failed; ion still in |↓⟩, pulse did nothing.
    NotPrepared,
    /// Prepared but the pulse cycle returned the ion to S|1,-1⟩.
    PreparedNoPhoton,
    /// A qubit photon of this frequency exists; the ion is in the
    /// matching qubit state.
    Photon(PhotonState),
    /// Residual π-channel photon reached the spectrometer.
    PiLeak,
    /// A detector dark count fired inside the gate; `bright` records
    /// whether the ion fluoresces at readout.
    DarkCount { bright: bool },
}

impl TrueState {
    /// Whether the ion fluoresces during readout (any F=1 ground state).
    pub fn is_bright(&self) -> bool {
        match self {
            TrueState::NotPrepared => false,
            TrueState::PreparedNoPhoton | TrueState::PiLeak => true,
            TrueState::Photon(PhotonState::Nu1) => true,
            TrueState::Photon(PhotonState::Nu0) => false,
            TrueState::DarkCount { bright } => *bright,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhotonOutcome {
    Nu0Click,
    Nu1Click,
    NoClick,
}

impl PhotonOutcome {
    pub fn is_click(&self) -> bool {
        *self != PhotonOutcome::NoClick
    }

    pub fn as_state(&self) -> Option<PhotonState> {
        match self {
            PhotonOutcome::Nu0Click => Some(PhotonState::Nu0),
            PhotonOutcome::Nu1Click => Some(PhotonState::Nu1),
            PhotonOutcome::NoClick => None,
        }
    }
}

impl From<PhotonState> for PhotonOutcome {
    fn from(s: PhotonState) -> Self {
        match s {
            PhotonState::Nu0 => PhotonOutcome::Nu0Click,
            PhotonState::Nu1 => PhotonOutcome::Nu1Click,
        }
    }
}

/// One experimental shot: spectrometer outcome, ion readout, timing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClickRecord {
    pub shot: u64,
    pub photon: PhotonOutcome,
    pub ion: IonState,
    pub timestamp_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<TrueState>,
}

// stage ids addressing the per-shot randomness windows
const STAGE_PREP: u32 = 0;
const STAGE_BRANCH: u32 = 1;
const STAGE_COLLECT: u32 = 2;
const STAGE_SURVIVE: u32 = 3;
const STAGE_CLASSIFY: u32 = 4;
const STAGE_READOUT: u32 = 5;
const STAGE_GATE_DARK: u32 = 6;

fn readout_draw(
    cfg: &ExperimentConfig,
    streams: &ShotStreams,
    shot: u64,
    truth: TrueState,
) -> IonState {
    let u: f64 = streams.stage_rng(shot, STAGE_READOUT).random();
    if truth.is_bright() {
        if u < cfg.readout_fidelity_up {
            IonState::Up
        } else {
            IonState::Down
        }
    } else if u < cfg.readout_fidelity_down {
        IonState::Down
    } else {
        IonState::Up
    }
}

/// Simulate one shot of the protocol.
pub fn run_shot(cfg: &ExperimentConfig, streams: &ShotStreams, shot: u64) -> ClickRecord {
    let prepared = streams.stage_rng(shot, STAGE_PREP).random::<f64>() < cfg.prep_fidelity;
    let truth = if prepared {
        let u: f64 = streams.stage_rng(shot, STAGE_BRANCH).random();
        let p_each = 0.5 * cfg.photon_generation_total;
        if u < p_each {
            TrueState::Photon(PhotonState::Nu1)
        } else if u < 2.0 * p_each {
            TrueState::Photon(PhotonState::Nu0)
        } else {
            TrueState::PreparedNoPhoton
        }
    } else {
        TrueState::NotPrepared
    };

    let photon = match truth {
        TrueState::Photon(state) => {
            let collected =
                streams.stage_rng(shot, STAGE_COLLECT).random::<f64>() < cfg.fibre_efficiency;
            let survived = collected
                && streams.stage_rng(shot, STAGE_SURVIVE).random::<f64>()
                    < cfg.spectrometer_efficiency;
            if survived {
                let mut rng = streams.stage_rng(shot, STAGE_CLASSIFY);
                classify_photon(state, &cfg.classification, &mut rng).into()
            } else {
                PhotonOutcome::NoClick
            }
        }
        TrueState::PreparedNoPhoton if cfg.pi_leak_fraction > 0.0 => {
            // contamination path: a pi photon sneaks past geometry+polarizer
            let collected = streams.stage_rng(shot, STAGE_COLLECT).random::<f64>()
                < cfg.pi_leak_fraction * cfg.fibre_efficiency;
            let survived = collected
                && streams.stage_rng(shot, STAGE_SURVIVE).random::<f64>()
                    < cfg.spectrometer_efficiency;
            if survived {
                // its spot lands between the two pinholes: coin-flip outcome
                if streams.stage_rng(shot, STAGE_CLASSIFY).random::<f64>() < 0.5 {
                    PhotonOutcome::Nu1Click
                } else {
                    PhotonOutcome::Nu0Click
                }
            } else {
                PhotonOutcome::NoClick
            }
        }
        _ => PhotonOutcome::NoClick,
    };

    let mut truth = match (truth, photon) {
        (TrueState::PreparedNoPhoton, p) if p.is_click() => TrueState::PiLeak,
        (t, _) => t,
    };
    let mut photon = photon;
    if photon == PhotonOutcome::NoClick
        && cfg.gate_dark_probability > 0.0
        && streams.stage_rng(shot, STAGE_GATE_DARK).random::<f64>() < cfg.gate_dark_probability
    {
        photon = if streams.stage_rng(shot, STAGE_CLASSIFY).random::<f64>() < 0.5 {
            PhotonOutcome::Nu1Click
        } else {
            PhotonOutcome::Nu0Click
        };
        truth = TrueState::DarkCount { bright: truth.is_bright() };
    }
    let ion = readout_draw(cfg, streams, shot, truth);
    ClickRecord {
        shot,
        photon,
        ion,
        timestamp_s: shot as f64 * cfg.cycle_time_s,
        truth: cfg.diagnostics.then_some(truth),
    }
}

/// Aggregate description of one run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub shots: u64,
    pub clicks: u64,
    pub nu0_clicks: u64,
    pub nu1_clicks: u64,
    pub empirical_click_rate: f64,
    pub analytic_click_probability: f64,
    pub expected_clicks: f64,
    pub master_seed: u64,
}

/// Run the configured number of shots, in shot-index order, optionally
/// fanning out over `workers` threads. The record stream is identical for
/// any worker count.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    workers: usize,
) -> Result<(Vec<ClickRecord>, RunSummary), MonteCarloError> {
    cfg.validate()?;
    let streams = ShotStreams::new(cfg.master_seed);
    let records: Vec<ClickRecord> = if workers <= 1 {
        (0..cfg.shots).map(|s| run_shot(cfg, &streams, s)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| MonteCarloError::InvalidConfig(format!("thread pool: {e}")))?;
        pool.install(|| {
            (0..cfg.shots)
                .into_par_iter()
                .map(|s| run_shot(cfg, &streams, s))
                .collect()
        })
    };
    let summary = summarize(cfg, &records);
    Ok((records, summary))
}

pub fn summarize(cfg: &ExperimentConfig, records: &[ClickRecord]) -> RunSummary {
    let clicks = records.iter().filter(|r| r.photon.is_click()).count() as u64;
    let nu0 = records.iter().filter(|r| r.photon == PhotonOutcome::Nu0Click).count() as u64;
    let nu1 = records.iter().filter(|r| r.photon == PhotonOutcome::Nu1Click).count() as u64;
    let analytic = cfg.analytic_click_probability();
    RunSummary {
        shots: cfg.shots,
        clicks,
        nu0_clicks: nu0,
        nu1_clicks: nu1,
        empirical_click_rate: clicks as f64 / records.len().max(1) as f64,
        analytic_click_probability: analytic,
        expected_clicks: analytic * cfg.shots as f64,
        master_seed: cfg.master_seed,
    }
}

/// Sample only shots that produce a click, with the exact conditional
/// distributions of the full pipeline. Shot indices advance by geometric
/// gaps at the analytic click probability, so timestamps remain those of a
/// plausible full run.
pub fn importance_mode(
    cfg: &ExperimentConfig,
    n_clicks: u64,
) -> Result<Vec<ClickRecord>, MonteCarloError> {
    cfg.validate()?;
    let p_click = cfg.analytic_click_probability();
    if p_click <= 0.0 {
        return Err(MonteCarloError::InvalidConfig(
            "click probability is zero; nothing to condition on".into(),
        ));
    }
    let streams = ShotStreams::new(cfg.master_seed);

    // absolute weights of the disjoint click paths
    let fs = cfg.fibre_efficiency * cfg.spectrometer_efficiency;
    let p_each = 0.5 * cfg.photon_generation_total;
    let w_nu1 = cfg.prep_fidelity * p_each * fs;
    let w_nu0 = w_nu1;
    let w_pi = cfg.prep_fidelity
        * (1.0 - cfg.photon_generation_total)
        * cfg.pi_leak_fraction
        * fs;
    // a dark count fires only on shots with no photon click; split its
    // weight by whether the underlying ion state fluoresces at readout
    let p_photon_click = cfg.photon_click_probability();
    let bright_no_click = cfg.prep_fidelity
        * (1.0 - cfg.photon_generation_total)
        * (1.0 - cfg.pi_leak_fraction * fs)
        + cfg.prep_fidelity * p_each * (1.0 - fs);
    let dark_no_click = (1.0 - cfg.prep_fidelity) + cfg.prep_fidelity * p_each * (1.0 - fs);
    let w_dark_bright = bright_no_click * cfg.gate_dark_probability;
    let w_dark_dark = dark_no_click * cfg.gate_dark_probability;
    debug_assert!(
        ((1.0 - p_photon_click) - (bright_no_click + dark_no_click)).abs() < 1e-12
    );
    let w_total = w_nu1 + w_nu0 + w_pi + w_dark_bright + w_dark_dark;
    let thresholds = [
        w_nu1 / w_total,
        (w_nu1 + w_nu0) / w_total,
        (w_nu1 + w_nu0 + w_pi) / w_total,
        (w_nu1 + w_nu0 + w_pi + w_dark_bright) / w_total,
    ];

    let mut records = Vec::with_capacity(n_clicks as usize);
    let mut shot_cursor: u64 = 0;
    for k in 0..n_clicks {
        let gap = if p_click >= 1.0 {
            1
        } else {
            let u: f64 = streams.aux_rng(k).random();
            1 + ((1.0 - u).ln() / (1.0 - p_click).ln()).floor() as u64
        };
        let shot = shot_cursor + gap - 1;
        shot_cursor = shot + 1;

        // replay the shot's own stage draws, mapped to their conditional laws
        let u_branch: f64 = streams.stage_rng(shot, STAGE_BRANCH).random();
        let truth = if u_branch < thresholds[0] {
            TrueState::Photon(PhotonState::Nu1)
        } else if u_branch < thresholds[1] {
            TrueState::Photon(PhotonState::Nu0)
        } else if u_branch < thresholds[2] {
            TrueState::PiLeak
        } else if u_branch < thresholds[3] {
            TrueState::DarkCount { bright: true }
        } else {
            TrueState::DarkCount { bright: false }
        };
        let photon = match truth {
            TrueState::Photon(state) => {
                let mut rng = streams.stage_rng(shot, STAGE_CLASSIFY);
                classify_photon(state, &cfg.classification, &mut rng).into()
            }
            _ => {
                if streams.stage_rng(shot, STAGE_CLASSIFY).random::<f64>() < 0.5 {
                    PhotonOutcome::Nu1Click
                } else {
                    PhotonOutcome::Nu0Click
                }
            }
        };
        let ion = readout_draw(cfg, &streams, shot, truth);
        records.push(ClickRecord {
            shot,
            photon,
            ion,
            timestamp_s: shot as f64 * cfg.cycle_time_s,
            truth: cfg.diagnostics.then_some(truth),
        });
    }
    Ok(records)
}

/// Fixed-schema CSV export (diagnostic labels are never included).
pub fn records_to_csv(records: &[ClickRecord]) -> String {
    let mut out = String::with_capacity(32 * records.len() + 32);
    out.push_str("shot,photon,ion,timestamp\n");
    for r in records {
        let photon = match r.photon {
            PhotonOutcome::Nu0Click => "nu0",
            PhotonOutcome::Nu1Click => "nu1",
            PhotonOutcome::NoClick => "none",
        };
        let ion = match r.ion {
            IonState::Up => "up",
            IonState::Down => "down",
        };
        out.push_str(&format!("{},{},{},{:.9}\n", r.shot, photon, ion, r.timestamp_s));
    }
    out
}

/// JSON-lines export; includes truth labels when diagnostics were enabled.
pub fn records_to_jsonl(records: &[ClickRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_ones_config() -> ExperimentConfig {
        ExperimentConfig {
            shots: 500,
            prep_fidelity: 1.0,
            photon_generation_total: 1.0,
            fibre_efficiency: 1.0,
            spectrometer_efficiency: 1.0,
            classification: ClassificationMatrix::ideal(),
            readout_fidelity_up: 1.0,
            readout_fidelity_down: 1.0,
            diagnostics: true,
            ..ExperimentConfig::paper_default()
        }
    }

    #[test]
    fn perfect_pipeline_is_perfectly_correlated() {
        let cfg = all_ones_config();
        let (records, summary) = run_experiment(&cfg, 1).unwrap();
        assert_eq!(summary.clicks, cfg.shots);
        for r in &records {
            match r.photon {
                PhotonOutcome::Nu1Click => assert_eq!(r.ion, IonState::Up),
                PhotonOutcome::Nu0Click => assert_eq!(r.ion, IonState::Down),
                PhotonOutcome::NoClick => panic!("no-click in a lossless pipeline"),
            }
        }
    }

    #[test]
    fn shots_zero_rejected_one_allowed() {
        let mut cfg = ExperimentConfig::paper_default();
        cfg.shots = 0;
        assert!(run_experiment(&cfg, 1).is_err());
        cfg.shots = 1;
        let (records, _) = run_experiment(&cfg, 1).unwrap();
        assert_eq!(records.len(), 1);
    }

    #[test]
    fn timestamps_strictly_increase_by_cycle() {
        let mut cfg = ExperimentConfig::paper_default();
        cfg.shots = 50;
        let (records, _) = run_experiment(&cfg, 1).unwrap();
        for w in records.windows(2) {
            let dt = w[1].timestamp_s - w[0].timestamp_s;
            assert!((dt - cfg.cycle_time_s).abs() < 1e-12);
        }
    }

    #[test]
    fn worker_count_does_not_change_the_stream() {
        let mut cfg = ExperimentConfig::paper_default();
        cfg.shots = 20_000;
        cfg.photon_generation_total = 0.5;
        cfg.fibre_efficiency = 0.5;
        cfg.spectrometer_efficiency = 0.5;
        let (seq, _) = run_experiment(&cfg, 1).unwrap();
        let (par, _) = run_experiment(&cfg, 8).unwrap();
        assert_eq!(seq, par);
        assert_eq!(records_to_csv(&seq), records_to_csv(&par));
    }

    #[test]
    fn stage_marginals_match_configuration() {
        let mut cfg = ExperimentConfig::paper_default();
        cfg.shots = 1_000_000;
        cfg.diagnostics = true;
        let (records, _) = run_experiment(&cfg, 4).unwrap();
        let n = cfg.shots as f64;
        let three_sigma = |p: f64| 3.0 * (p * (1.0 - p) / n).sqrt();

        let prepared = records
            .iter()
            .filter(|r| r.truth != Some(TrueState::NotPrepared))
            .count() as f64
            / n;
        assert!((prepared - cfg.prep_fidelity).abs() <= three_sigma(cfg.prep_fidelity));

        let photon = records
            .iter()
            .filter(|r| matches!(r.truth, Some(TrueState::Photon(_))))
            .count() as f64
            / n;
        let p_photon = cfg.prep_fidelity * cfg.photon_generation_total;
        assert!((photon - p_photon).abs() <= three_sigma(p_photon));

        let clicks = records.iter().filter(|r| r.photon.is_click()).count() as f64 / n;
        let p_click = cfg.analytic_click_probability();
        assert!((clicks - p_click).abs() <= three_sigma(p_click));
    }

    #[test]
    fn no_click_readout_marginal_reflects_prepared_mixture() {
        let mut cfg = ExperimentConfig::paper_default();
        cfg.shots = 400_000;
        let (records, _) = run_experiment(&cfg, 4).unwrap();
        let no_click: Vec<&ClickRecord> =
            records.iter().filter(|r| !r.photon.is_click()).collect();
        // bright fraction among no-click shots: prepared-without-photon and
        // the nu1 branch are bright, failed prep and the nu0 branch are dark
        let p_each = 0.5 * cfg.photon_generation_total * cfg.prep_fidelity;
        let loss = 1.0 - cfg.fibre_efficiency * cfg.spectrometer_efficiency;
        let p_no_click = 1.0 - cfg.analytic_click_probability();
        let p_bright = (cfg.prep_fidelity * (1.0 - cfg.photon_generation_total)
            + p_each * loss)
            / p_no_click;
        let p_up_expected = p_bright * cfg.readout_fidelity_up
            + (1.0 - p_bright) * (1.0 - cfg.readout_fidelity_down);
        let up = no_click.iter().filter(|r| r.ion == IonState::Up).count() as f64
            / no_click.len() as f64;
        let sigma = (p_up_expected * (1.0 - p_up_expected) / no_click.len() as f64).sqrt();
        assert!((up - p_up_expected).abs() <= 3.0 * sigma, "{up} vs {p_up_expected}");
    }

    #[test]
    fn importance_mode_equals_run_shot_at_unit_click_probability() {
        let mut cfg = all_ones_config();
        cfg.classification = ClassificationMatrix::paper_default();
        cfg.readout_fidelity_up = 0.9;
        cfg.readout_fidelity_down = 0.8;
        assert_eq!(cfg.analytic_click_probability(), 1.0);
        let streams = ShotStreams::new(cfg.master_seed);
        let full: Vec<ClickRecord> =
            (0..cfg.shots).map(|s| run_shot(&cfg, &streams, s)).collect();
        let conditioned = importance_mode(&cfg, cfg.shots).unwrap();
        assert_eq!(full, conditioned);
    }

    #[test]
    fn dark_counts_fire_on_otherwise_empty_shots() {
        let mut cfg = ExperimentConfig::paper_default();
        cfg.shots = 200_000;
        cfg.photon_generation_total = 0.0;
        cfg.gate_dark_probability = 0.25;
        cfg.diagnostics = true;
        let (records, summary) = run_experiment(&cfg, 4).unwrap();
        let n = cfg.shots as f64;
        let sigma = (0.25 * 0.75 / n).sqrt();
        assert!((summary.empirical_click_rate - 0.25).abs() <= 3.0 * sigma);
        let clicks: Vec<&ClickRecord> =
            records.iter().filter(|r| r.photon.is_click()).collect();
        assert!(clicks
            .iter()
            .all(|r| matches!(r.truth, Some(TrueState::DarkCount { .. }))));
        // false clicks land on either detector with equal probability
        let nu1 = clicks.iter().filter(|r| r.photon == PhotonOutcome::Nu1Click).count() as f64;
        let m = clicks.len() as f64;
        assert!((nu1 / m - 0.5).abs() <= 3.0 * (0.25 / m).sqrt());
        // and their ion marginal reflects the prepared mixture (all shots
        // are photonless, so bright = prepared)
        let up = clicks.iter().filter(|r| r.ion == IonState::Up).count() as f64 / m;
        let p_bright = cfg.prep_fidelity;
        let p_up = p_bright * cfg.readout_fidelity_up
            + (1.0 - p_bright) * (1.0 - cfg.readout_fidelity_down);
        assert!((up - p_up).abs() <= 3.0 * (p_up * (1.0 - p_up) / m).sqrt());
    }

    #[test]
    fn importance_mode_matches_full_pipeline_distribution() {
        // boosted stage probabilities so the full pipeline clicks often,
        // with both contamination paths enabled
        let mut cfg = ExperimentConfig::paper_default();
        cfg.shots = 120_000;
        cfg.prep_fidelity = 0.9;
        cfg.photon_generation_total = 0.5;
        cfg.fibre_efficiency = 0.5;
        cfg.spectrometer_efficiency = 0.5;
        cfg.pi_leak_fraction = 0.2;
        cfg.gate_dark_probability = 0.03;
        let (records, _) = run_experiment(&cfg, 4).unwrap();
        let full: Vec<&ClickRecord> = records.iter().filter(|r| r.photon.is_click()).collect();
        let mut cfg2 = cfg.clone();
        cfg2.master_seed ^= 0xDEAD_BEEF;
        let cond = importance_mode(&cfg2, full.len() as u64).unwrap();

        let cells = |rs: &[&ClickRecord]| {
            let mut c = [0f64; 4];
            for r in rs {
                let i = match (r.photon, r.ion) {
                    (PhotonOutcome::Nu0Click, IonState::Down) => 0,
                    (PhotonOutcome::Nu0Click, IonState::Up) => 1,
                    (PhotonOutcome::Nu1Click, IonState::Down) => 2,
                    (PhotonOutcome::Nu1Click, IonState::Up) => 3,
                    _ => unreachable!("clicks only"),
                };
                c[i] += 1.0;
            }
            c
        };
        let a = cells(&full);
        let cond_refs: Vec<&ClickRecord> = cond.iter().collect();
        let b = cells(&cond_refs);
        // two-sample chi-squared homogeneity test over the four cells
        let (na, nb): (f64, f64) = (a.iter().sum(), b.iter().sum());
        let mut chi2 = 0.0;
        for i in 0..4 {
            let pooled = (a[i] + b[i]) / (na + nb);
            for (obs, n) in [(a[i], na), (b[i], nb)] {
                let expect = pooled * n;
                chi2 += (obs - expect).powi(2) / expect;
            }
        }
        // dof = 3: chi2 > 11.34 would reject at p = 0.01
        assert!(chi2 < 11.34, "chi2 = {chi2}, cells {a:?} vs {b:?}");
    }

    #[test]
    fn csv_has_fixed_schema() {
        let mut cfg = all_ones_config();
        cfg.shots = 3;
        let (records, _) = run_experiment(&cfg, 1).unwrap();
        let csv = records_to_csv(&records);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("shot,photon,ion,timestamp"));
        assert_eq!(lines.count(), 3);
        // truth labels stay out of the CSV even with diagnostics on
        assert!(!csv.contains("Prepared"));
    }

    #[test]
    fn jsonl_round_trips_and_hides_truth_when_disabled() {
        let mut cfg = ExperimentConfig::paper_default();
        cfg.shots = 200;
        cfg.photon_generation_total = 0.9;
        cfg.fibre_efficiency = 0.9;
        cfg.spectrometer_efficiency = 0.9;
        let (records, _) = run_experiment(&cfg, 1).unwrap();
        let jsonl = records_to_jsonl(&records);
        assert!(!jsonl.contains("truth"));
        let parsed: Vec<ClickRecord> = jsonl
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(parsed, records);
    }
}

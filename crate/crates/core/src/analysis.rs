//! Turns click records into the headline numbers: the 2×2 correlation
//! matrix with binomial errors, multiplicative efficiency budgets with
//! quadrature uncertainty, per-source error attribution, and projections
//! for the upgraded-apparatus scenario.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::montecarlo::{ClickRecord, IonState, PhotonOutcome, TrueState};
use crate::uncertainty::Measured;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("no clicks in the record stream; nothing to correlate")]
    ZeroClicks,
    #[error("records lack diagnostic truth labels; rerun with diagnostics enabled")]
    MissingDiagnostics,
    #[error("invalid budget stage {name}: value {value} outside (0, 1]")]
    InvalidStage { name: String, value: f64 },
    #[error("budget needs at least one stage")]
    EmptyBudget,
}

pub fn binomial_sigma(p: f64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        (p * (1.0 - p) / n as f64).sqrt()
    }
}

/// Click tallies by (detected photon, ion readout).
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct CorrelationCounts {
    pub nu0_down: u64,
    pub nu0_up: u64,
    pub nu1_down: u64,
    pub nu1_up: u64,
}

impl CorrelationCounts {
    pub fn total(&self) -> u64 {
        self.nu0_down + self.nu0_up + self.nu1_down + self.nu1_up
    }
}

/// The logic-basis correlation matrix with conditional fidelities.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub counts: CorrelationCounts,
    /// P(↓ | ν₀ detected), with binomial standard error.
    pub fidelity_nu0: Measured,
    /// P(↑ | ν₁ detected).
    pub fidelity_nu1: Measured,
    /// Mean of the two conditionals; its error is half the quadrature sum
    /// of the column errors.
    pub average_fidelity: Measured,
}

pub fn correlation_matrix(records: &[ClickRecord]) -> Result<CorrelationMatrix, AnalysisError> {
    let mut counts = CorrelationCounts::default();
    for r in records {
        match (r.photon, r.ion) {
            (PhotonOutcome::Nu0Click, IonState::Down) => counts.nu0_down += 1,
            (PhotonOutcome::Nu0Click, IonState::Up) => counts.nu0_up += 1,
            (PhotonOutcome::Nu1Click, IonState::Down) => counts.nu1_down += 1,
            (PhotonOutcome::Nu1Click, IonState::Up) => counts.nu1_up += 1,
            (PhotonOutcome::NoClick, _) => {}
        }
    }
    if counts.total() == 0 {
        return Err(AnalysisError::ZeroClicks);
    }
    let column = |correct: u64, wrong: u64| -> Measured {
        let n = correct + wrong;
        if n == 0 {
            return Measured::exact(f64::NAN);
        }
        let p = correct as f64 / n as f64;
        Measured::new(p, binomial_sigma(p, n))
    };
    let fid_nu0 = column(counts.nu0_down, counts.nu0_up);
    let fid_nu1 = column(counts.nu1_up, counts.nu1_down);
    let average = Measured::new(
        0.5 * (fid_nu0.value + fid_nu1.value),
        0.5 * (fid_nu0.sigma.powi(2) + fid_nu1.sigma.powi(2)).sqrt(),
    );
    Ok(CorrelationMatrix {
        counts,
        fidelity_nu0: fid_nu0,
        fidelity_nu1: fid_nu1,
        average_fidelity: average,
    })
}

/// Ordered multiplicative stages with quadrature-propagated uncertainty.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EfficiencyBudget {
    pub stages: Vec<(String, Measured)>,
    pub product: Measured,
}

pub fn compose_budget(stages: &[(String, Measured)]) -> Result<EfficiencyBudget, AnalysisError> {
    if stages.is_empty() {
        return Err(AnalysisError::EmptyBudget);
    }
    for (name, m) in stages {
        if !(m.value > 0.0 && m.value <= 1.0) {
            return Err(AnalysisError::InvalidStage { name: name.clone(), value: m.value });
        }
    }
    let values: Vec<Measured> = stages.iter().map(|(_, m)| *m).collect();
    Ok(EfficiencyBudget { stages: stages.to_vec(), product: Measured::product(&values) })
}

/// The published coincidence budget: preparation, photon generation,
/// fibre collection, spectrometer throughput.
pub fn paper_budget_stages() -> Vec<(String, Measured)> {
    vec![
        ("state preparation".into(), Measured::new(0.91, 0.04)),
        ("photon generation".into(), Measured::new(0.116, 0.004)),
        ("ion-to-fibre collection".into(), Measured::new(0.027, 0.003)),
        ("spectrometer efficiency".into(), Measured::new(0.037, 0.005)),
    ]
}

/// Per-source infidelity attribution over clicked records.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub clicks: u64,
    /// Fraction of clicks whose correlation matched the ideal outcome.
    pub correct_fraction: f64,
    /// Fraction of clicks where the spectrometer reported the wrong
    /// frequency state (and the readout did not mask it).
    pub spectrometer: f64,
    /// Fraction where the ion readout was the first wrong stage.
    pub readout: f64,
    /// Wrong correlations from clicks with no qubit-photon truth:
    /// π-channel leakage or detector dark counts.
    pub contamination: f64,
}

/// Attribute each wrong-correlation click to the first stage whose sampled
/// outcome diverged from the truth label. Records must carry diagnostics.
///
/// A click where both the spectrometer and the readout flipped looks
/// correctly correlated and is counted in `correct_fraction`.
pub fn error_budget(records: &[ClickRecord]) -> Result<ErrorBudget, AnalysisError> {
    let mut clicks = 0u64;
    let mut wrong_spectrometer = 0u64;
    let mut wrong_readout = 0u64;
    let mut wrong_contamination = 0u64;
    let mut correct = 0u64;
    for r in records.iter().filter(|r| r.photon.is_click()) {
        clicks += 1;
        let truth = r.truth.ok_or(AnalysisError::MissingDiagnostics)?;
        let ideal = matches!(
            (r.photon, r.ion),
            (PhotonOutcome::Nu0Click, IonState::Down) | (PhotonOutcome::Nu1Click, IonState::Up)
        );
        if ideal {
            correct += 1;
            continue;
        }
        match truth {
            TrueState::Photon(true_photon) => {
                if r.photon.as_state() != Some(true_photon) {
                    wrong_spectrometer += 1;
                } else {
                    wrong_readout += 1;
                }
            }
            TrueState::PiLeak | TrueState::DarkCount { .. } => wrong_contamination += 1,
            // clicks cannot arise from these branches
            TrueState::NotPrepared | TrueState::PreparedNoPhoton => wrong_contamination += 1,
        }
    }
    if clicks == 0 {
        return Err(AnalysisError::ZeroClicks);
    }
    let frac = |n: u64| n as f64 / clicks as f64;
    Ok(ErrorBudget {
        clicks,
        correct_fraction: frac(correct),
        spectrometer: frac(wrong_spectrometer),
        readout: frac(wrong_readout),
        contamination: frac(wrong_contamination),
    })
}

/// Stage substitutions for the upgraded-apparatus projection.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ImprovedScenario {
    pub prep_fidelity: f64,
    pub photon_generation_total: f64,
    /// Mirror capture on the σ pattern for direct free-space collection
    /// into the grating (no fibre), as quoted for the hardware.
    pub sigma_collection: f64,
    /// Ideal first-order diffraction efficiency with matched polarization.
    pub grating_efficiency: f64,
    pub readout_fidelity: f64,
    pub readout_window_s: f64,
    /// Frequency-discrimination fidelity with diffraction-limited spots.
    pub spot_fidelity: f64,
}

impl ImprovedScenario {
    pub fn paper_projection() -> Self {
        Self {
            prep_fidelity: 1.0,
            photon_generation_total: 0.116,
            sigma_collection: 0.143,
            grating_efficiency: 0.55,
            readout_fidelity: 0.994,
            readout_window_s: 176e-6,
            spot_fidelity: 0.999,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioProjection {
    pub fidelity: f64,
    pub cycle_time_s: f64,
    pub cycle_rate_hz: f64,
    pub success_rate_hz: f64,
    pub rate_stages: Vec<(String, f64)>,
    /// Every substituted value, logged so the projection can be audited.
    pub assumptions: Vec<String>,
    pub assumption_dependent: bool,
}

/// Project fidelity and success rate for the upgraded apparatus:
/// detector quantum efficiency is deliberately left out of the rate, and
/// the readout window change sets the cycle rate.
pub fn improvement_scenario(s: &ImprovedScenario) -> ScenarioProjection {
    let rate_stages: Vec<(String, f64)> = vec![
        ("state preparation".into(), s.prep_fidelity),
        ("photon generation".into(), s.photon_generation_total),
        ("free-space sigma collection".into(), s.sigma_collection),
        ("grating efficiency".into(), s.grating_efficiency),
    ];
    // pump 10 us + microwave 17 us + pulse 51 ns + gate 200 ns + readout
    let cycle_time_s = 10e-6 + 17e-6 + 51e-9 + 200e-9 + s.readout_window_s;
    let cycle_rate_hz = 1.0 / cycle_time_s;
    let per_shot: f64 = rate_stages.iter().map(|(_, v)| v).product();
    let fidelity = s.readout_fidelity * s.spot_fidelity;
    let assumptions = vec![
        format!("state preparation -> {}", s.prep_fidelity),
        format!("photon generation per pulse -> {}", s.photon_generation_total),
        format!(
            "fibre path removed; direct sigma-pattern mirror capture -> {}",
            s.sigma_collection
        ),
        format!("grating efficiency -> {}", s.grating_efficiency),
        format!(
            "readout -> {} in {:.0} us",
            s.readout_fidelity,
            s.readout_window_s * 1e6
        ),
        format!("spot discrimination fidelity -> {}", s.spot_fidelity),
        "detector quantum efficiency excluded from the rate".into(),
    ];
    ScenarioProjection {
        fidelity,
        cycle_time_s,
        cycle_rate_hz,
        success_rate_hz: cycle_rate_hz * per_shot,
        rate_stages,
        assumptions,
        assumption_dependent: true,
    }
}

/// The unchanged apparatus expressed the same way, for the identity check.
pub fn baseline_projection() -> ScenarioProjection {
    let stages = paper_budget_stages();
    let budget = compose_budget(&stages).expect("paper stages are valid");
    let cycle_time_s = crate::protocol::PAPER_CYCLE_S;
    let cycle_rate_hz = 1.0 / cycle_time_s;
    ScenarioProjection {
        fidelity: 0.5 * (0.955 + 0.973) * 0.5 * (0.980 + 0.972),
        cycle_time_s,
        cycle_rate_hz,
        success_rate_hz: cycle_rate_hz * budget.product.value,
        rate_stages: stages.iter().map(|(n, m)| (n.clone(), m.value)).collect(),
        assumptions: vec!["no substitutions".into()],
        assumption_dependent: false,
    }
}

/// Grouped-bar SVG of the conditional correlation matrix with the ideal
/// outcome drawn as wireframes.
pub fn correlation_svg(matrix: &CorrelationMatrix) -> String {
    let c = &matrix.counts;
    let n0 = (c.nu0_down + c.nu0_up).max(1) as f64;
    let n1 = (c.nu1_down + c.nu1_up).max(1) as f64;
    // bars: (label, observed conditional probability, ideal value)
    let bars = [
        ("P(dn|nu0)", c.nu0_down as f64 / n0, 1.0),
        ("P(up|nu0)", c.nu0_up as f64 / n0, 0.0),
        ("P(dn|nu1)", c.nu1_down as f64 / n1, 0.0),
        ("P(up|nu1)", c.nu1_up as f64 / n1, 1.0),
    ];
    let (w, h, margin, base) = (460.0, 320.0, 50.0, 270.0);
    let scale = 200.0;
    let bar_w = 60.0;
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\">\n"
    ));
    svg.push_str(&format!(
        "  <text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\" \
         text-anchor=\"middle\">Ion-photon correlations ({} clicks)</text>\n",
        w / 2.0,
        matrix.counts.total()
    ));
    // axis
    svg.push_str(&format!(
        "  <line x1=\"{margin}\" y1=\"{base}\" x2=\"{}\" y2=\"{base}\" stroke=\"black\"/>\n",
        w - margin
    ));
    svg.push_str(&format!(
        "  <line x1=\"{margin}\" y1=\"{base}\" x2=\"{margin}\" y2=\"{}\" stroke=\"black\"/>\n",
        base - scale
    ));
    for tick in [0.0, 0.5, 1.0] {
        let y = base - tick * scale;
        svg.push_str(&format!(
            "  <line x1=\"{}\" y1=\"{y}\" x2=\"{margin}\" y2=\"{y}\" stroke=\"black\"/>\n\
             \x20 <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"end\">{tick:.1}</text>\n",
            margin - 5.0,
            margin - 9.0,
            y + 4.0
        ));
    }
    for (i, (label, observed, ideal)) in bars.iter().enumerate() {
        // extra gap between the nu0 and nu1 groups
        let x = margin + 20.0 + i as f64 * (bar_w + 18.0) + if i >= 2 { 24.0 } else { 0.0 };
        let bar_h = observed * scale;
        svg.push_str(&format!(
            "  <rect x=\"{x}\" y=\"{}\" width=\"{bar_w}\" height=\"{bar_h:.2}\" \
             fill=\"#4878a8\"/>\n",
            base - bar_h
        ));
        // ideal outcome as a wireframe
        let ideal_h = (ideal * scale).max(1.0);
        svg.push_str(&format!(
            "  <rect x=\"{x}\" y=\"{}\" width=\"{bar_w}\" height=\"{ideal_h:.2}\" fill=\"none\" \
             stroke=\"#303030\" stroke-dasharray=\"4 3\"/>\n",
            base - ideal_h
        ));
        svg.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"middle\">{label}</text>\n",
            x + bar_w / 2.0,
            base + 16.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"middle\">{observed:.3}</text>\n",
            x + bar_w / 2.0,
            (base - bar_h - 6.0).min(base - 6.0)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

//! The UV hyperfine spectrometer: grating geometry, resolving power,
//! Gaussian-spot classification statistics, and throughput.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::uncertainty::Measured;

#[derive(Debug, Error)]
pub enum SpectrometerError {
    #[error("unphysical grating geometry: m*lambda*rho/2 = {0} exceeds 1")]
    UnphysicalLittrow(f64),
    #[error("invalid {what}: {detail}")]
    Invalid { what: &'static str, detail: String },
}

/// The holographic grating and its illumination.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GratingSpec {
    pub lines_per_m: f64,
    pub ruled_width_m: f64,
    pub ruled_height_m: f64,
    /// Mount angle of the grating as operated ("near Littrow"), radians.
    pub operating_angle_rad: f64,
    pub order: u32,
    pub beam_diameter_m: f64,
}

impl GratingSpec {
    /// 4320 lines/mm, 128 mm × 102 mm, 59° mount, first order, 22 mm beam.
    pub fn paper_default() -> Self {
        Self {
            lines_per_m: 4320e3,
            ruled_width_m: 0.128,
            ruled_height_m: 0.102,
            operating_angle_rad: 59f64.to_radians(),
            order: 1,
            beam_diameter_m: 0.022,
        }
    }

    pub fn validate(&self) -> Result<(), SpectrometerError> {
        if self.lines_per_m <= 0.0 {
            return Err(SpectrometerError::Invalid {
                what: "grating",
                detail: "line density must be positive".into(),
            });
        }
        if self.beam_diameter_m > self.ruled_width_m {
            return Err(SpectrometerError::Invalid {
                what: "grating",
                detail: format!(
                    "beam diameter {} exceeds ruled width {}",
                    self.beam_diameter_m, self.ruled_width_m
                ),
            });
        }
        Ok(())
    }
}

/// Littrow angle arcsin(m·λ·ρ/2) in radians. The quoted operating angle sits
/// a few degrees away ("near Littrow"); the gap is reported by the caller.
pub fn littrow_angle(grating: &GratingSpec, wavelength_m: f64) -> Result<f64, SpectrometerError> {
    grating.validate()?;
    let arg = grating.order as f64 * wavelength_m * grating.lines_per_m / 2.0;
    if arg > 1.0 {
        return Err(SpectrometerError::UnphysicalLittrow(arg));
    }
    Ok(arg.asin())
}

/// Resolving power R = m × (illuminated line count).
pub fn resolving_power(grating: &GratingSpec) -> f64 {
    grating.order as f64 * grating.beam_diameter_m * grating.lines_per_m
}

/// The two focused spots of the frequency-split beams on the camera.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SpotPair {
    /// 1/e² intensity diameters, metres.
    pub diameter_1_m: f64,
    pub diameter_2_m: f64,
    pub separation_m: f64,
}

impl SpotPair {
    pub fn paper_default() -> Self {
        Self { diameter_1_m: 47.4e-6, diameter_2_m: 46.6e-6, separation_m: 82.0e-6 }
    }

    pub fn mean_radius_m(&self) -> f64 {
        0.25 * (self.diameter_1_m + self.diameter_2_m)
    }

    /// Centre separation in units of the mean 1/e² radius.
    pub fn separation_radii(&self) -> f64 {
        self.separation_m / self.mean_radius_m()
    }

    pub fn validate(&self) -> Result<(), SpectrometerError> {
        if self.diameter_1_m <= 0.0 || self.diameter_2_m <= 0.0 || self.separation_m < 0.0 {
            return Err(SpectrometerError::Invalid {
                what: "spot pair",
                detail: "diameters must be positive, separation non-negative".into(),
            });
        }
        Ok(())
    }
}

/// Frequency resolution implied by the measured spots: the known line
/// separation divided by the separation in mean-radius units.
pub fn resolution_from_spots(spots: &SpotPair, frequency_separation_hz: f64) -> f64 {
    frequency_separation_hz / spots.separation_radii()
}

/// Cross-talk between the two spots at the detection plane: the power
/// fraction of each Gaussian falling on the wrong side of the midline
/// between the centres, averaged over the two spots. Reported as an
/// infidelity bound on frequency-state discrimination.
///
/// For a 1/e² radius w the wrong-side fraction is erfc(s/(√2·w))/2; the
/// closed form is cross-checked against a 2-D quadrature oracle in the
/// test suite.
pub fn gaussian_overlap_infidelity(spots: &SpotPair) -> f64 {
    let s = spots.separation_m;
    let f = |w: f64| 0.5 * erfc(s / (std::f64::consts::SQRT_2 * w));
    0.5 * (f(0.5 * spots.diameter_1_m) + f(0.5 * spots.diameter_2_m))
}

/// The spectrometer's two photonic-qubit states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhotonState {
    /// Lower frequency, paired with |↓⟩.
    Nu0,
    /// Upper frequency, paired with |↑⟩.
    Nu1,
}

/// Conditional detection fidelities given a click. Misclassification is
/// separate from throughput: this matrix only decides which PMT fires.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ClassificationMatrix {
    pub p_correct_nu0: f64,
    pub p_correct_nu1: f64,
}

impl ClassificationMatrix {
    pub fn paper_default() -> Self {
        Self { p_correct_nu0: 0.980, p_correct_nu1: 0.972 }
    }

    pub fn ideal() -> Self {
        Self { p_correct_nu0: 1.0, p_correct_nu1: 1.0 }
    }

    pub fn validate(&self) -> Result<(), SpectrometerError> {
        for p in [self.p_correct_nu0, self.p_correct_nu1] {
            if !(0.5..=1.0).contains(&p) {
                return Err(SpectrometerError::Invalid {
                    what: "classification matrix",
                    detail: format!("diagonal entry {p} outside [0.5, 1]"),
                });
            }
        }
        Ok(())
    }

    pub fn p_correct(&self, state: PhotonState) -> f64 {
        match state {
            PhotonState::Nu0 => self.p_correct_nu0,
            PhotonState::Nu1 => self.p_correct_nu1,
        }
    }
}

/// Bernoulli draw of the detected state given the true one.
pub fn classify_photon<R: Rng + ?Sized>(
    true_state: PhotonState,
    matrix: &ClassificationMatrix,
    rng: &mut R,
) -> PhotonState {
    let correct = rng.random::<f64>() < matrix.p_correct(true_state);
    match (true_state, correct) {
        (s, true) => s,
        (PhotonState::Nu0, false) => PhotonState::Nu1,
        (PhotonState::Nu1, false) => PhotonState::Nu0,
    }
}

/// Ordered loss stages from the fibre tip to a PMT click.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThroughputChain {
    pub stages: Vec<(String, Measured)>,
}

impl ThroughputChain {
    /// 79(2)% fibre coupling, 25(3)% grating + optics, 19% PMT quantum
    /// efficiency.
    pub fn paper_default() -> Self {
        Self {
            stages: vec![
                ("fibre coupling".into(), Measured::new(0.79, 0.02)),
                ("grating + optics".into(), Measured::new(0.25, 0.03)),
                ("detector quantum efficiency".into(), Measured::exact(0.19)),
            ],
        }
    }

    pub fn validate(&self) -> Result<(), SpectrometerError> {
        for (name, m) in &self.stages {
            if !(m.value > 0.0 && m.value <= 1.0) {
                return Err(SpectrometerError::Invalid {
                    what: "throughput stage",
                    detail: format!("{name} = {} outside (0, 1]", m.value),
                });
            }
        }
        Ok(())
    }

    /// Product of the stages with quadrature-propagated uncertainty.
    pub fn efficiency(&self) -> Measured {
        let values: Vec<Measured> = self.stages.iter().map(|(_, m)| *m).collect();
        Measured::product(&values)
    }
}

/// Bernoulli survival of one photon through the whole chain.
pub fn detection_survival<R: Rng + ?Sized>(chain: &ThroughputChain, rng: &mut R) -> bool {
    rng.random::<f64>() < chain.efficiency().value
}

//! Level structure, transition data, and dipole branching for the eight
//! hyperfine sublevels of the ²S₁/₂ and ²P₁/₂ manifolds of ¹⁷¹Yb⁺.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const NUM_LEVELS: usize = 8;

/// Canonical basis indices.
pub const S00: usize = 0;
pub const S1M1: usize = 1;
pub const S10: usize = 2;
pub const S11: usize = 3;
pub const P00: usize = 4;
pub const P1M1: usize = 5;
pub const P10: usize = 6;
pub const P11: usize = 7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Manifold {
    /// ²S₁/₂
    Ground,
    /// ²P₁/₂
    Excited,
}

/// One hyperfine sublevel |F, mF⟩ of either manifold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HyperfineLevel {
    pub manifold: Manifold,
    pub f: u8,
    pub m_f: i8,
}

#[derive(Debug, Error, PartialEq)]
pub enum AtomError {
    #[error("invalid hyperfine level: F={f}, mF={m_f} (need F in {{0,1}}, |mF| <= F)")]
    InvalidLevel { f: u8, m_f: i8 },
    #[error("branching table requires an excited-manifold level, got {0}")]
    NotExcited(HyperfineLevel),
}

impl HyperfineLevel {
    pub fn new(manifold: Manifold, f: u8, m_f: i8) -> Result<Self, AtomError> {
        if f > 1 || m_f.unsigned_abs() > f {
            return Err(AtomError::InvalidLevel { f, m_f });
        }
        Ok(Self { manifold, f, m_f })
    }

    pub const fn ground(f: u8, m_f: i8) -> Self {
        Self { manifold: Manifold::Ground, f, m_f }
    }

    pub const fn excited(f: u8, m_f: i8) -> Self {
        Self { manifold: Manifold::Excited, f, m_f }
    }
}

impl std::fmt::Display for HyperfineLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let m = match self.manifold {
            Manifold::Ground => 'S',
            Manifold::Excited => 'P',
        };
        write!(f, "{m}|{},{:+}>", self.f, self.m_f)
    }
}

/// The eight levels in canonical order with stable index lookup.
///
/// Order: S|0,0⟩, S|1,-1⟩, S|1,0⟩, S|1,+1⟩, P|0,0⟩, P|1,-1⟩, P|1,0⟩, P|1,+1⟩.
#[derive(Clone, Debug)]
pub struct Basis {
    levels: [HyperfineLevel; NUM_LEVELS],
}

pub fn build_basis() -> Basis {
    Basis {
        levels: [
            HyperfineLevel::ground(0, 0),
            HyperfineLevel::ground(1, -1),
            HyperfineLevel::ground(1, 0),
            HyperfineLevel::ground(1, 1),
            HyperfineLevel::excited(0, 0),
            HyperfineLevel::excited(1, -1),
            HyperfineLevel::excited(1, 0),
            HyperfineLevel::excited(1, 1),
        ],
    }
}

impl Basis {
    pub fn levels(&self) -> &[HyperfineLevel; NUM_LEVELS] {
        &self.levels
    }

    pub fn level(&self, index: usize) -> HyperfineLevel {
        self.levels[index]
    }

    pub fn index_of(&self, level: &HyperfineLevel) -> Option<usize> {
        self.levels.iter().position(|l| l == level)
    }
}

impl Default for Basis {
    fn default() -> Self {
        build_basis()
    }
}

/// A dipole decay channel P|F',mF'⟩ → S|F,mF⟩ emitting polarization q,
/// with q = mF(upper) − mF(lower).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionChannel {
    pub upper: HyperfineLevel,
    pub lower: HyperfineLevel,
    pub polarization: i8,
    pub branching: f64,
}

/// All dipole-allowed decay destinations of `upper` with branching
/// fractions. Every allowed channel of this manifold pair carries exactly
/// 1/3; the fractions are fixed constants cross-checked against an
/// angular-momentum oracle in the test suite.
pub fn branching_table(upper: HyperfineLevel) -> Result<Vec<TransitionChannel>, AtomError> {
    if upper.manifold != Manifold::Excited {
        return Err(AtomError::NotExcited(upper));
    }
    let basis = build_basis();
    let mut out = Vec::with_capacity(3);
    for lower in basis.levels().iter().take(4) {
        if !dipole_allowed(upper, *lower) {
            continue;
        }
        out.push(TransitionChannel {
            upper,
            lower: *lower,
            polarization: upper.m_f - lower.m_f,
            branching: 1.0 / 3.0,
        });
    }
    Ok(out)
}

/// Selection rules for an electric-dipole S↔P channel: |ΔF| ≤ 1,
/// |ΔmF| ≤ 1, no F=0 → F=0, and no F=1,mF=0 → F=1,mF=0 (its angular
/// coupling coefficient vanishes).
pub fn dipole_allowed(upper: HyperfineLevel, lower: HyperfineLevel) -> bool {
    upper.manifold == Manifold::Excited
        && lower.manifold == Manifold::Ground
        && (upper.f as i8 - lower.f as i8).abs() <= 1
        && (upper.m_f - lower.m_f).abs() <= 1
        && !(upper.f == 0 && lower.f == 0)
        && !(upper.f == lower.f && upper.m_f == 0 && lower.m_f == 0)
}

/// The twelve decay channels of the full P manifold.
pub fn all_decay_channels() -> Vec<TransitionChannel> {
    let basis = build_basis();
    basis.levels()[4..]
        .iter()
        .flat_map(|u| branching_table(*u).expect("excited level"))
        .collect()
}

/// Hyperfine splittings and the optical carrier, plus a linear Zeeman knob.
///
/// Level frequencies (Hz) relative to S|0,0⟩ = 0:
/// S|1,mF⟩ at ground_hyperfine + mF·zeeman, P|0,0⟩ at optical_carrier,
/// P|1,mF⟩ at optical_carrier + excited_hyperfine + mF·zeeman.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LevelSplittings {
    pub ground_hyperfine_hz: f64,
    pub excited_hyperfine_hz: f64,
    pub optical_carrier_hz: f64,
    pub zeeman_per_mf_hz: f64,
}

impl Default for LevelSplittings {
    fn default() -> Self {
        Self {
            ground_hyperfine_hz: 12.6428e9,
            excited_hyperfine_hz: 2.1e9,
            optical_carrier_hz: 811.3e12,
            zeeman_per_mf_hz: 0.0,
        }
    }
}

impl LevelSplittings {
    pub fn validate(&self) -> Result<(), String> {
        if self.ground_hyperfine_hz <= 0.0
            || self.excited_hyperfine_hz <= 0.0
            || self.optical_carrier_hz <= 0.0
        {
            return Err("splittings must be positive".into());
        }
        Ok(())
    }

    /// Frequency of a level relative to S|0,0⟩, including the Zeeman offset.
    pub fn level_frequency_hz(&self, level: HyperfineLevel) -> f64 {
        let zeeman = self.zeeman_per_mf_hz * level.m_f as f64;
        match (level.manifold, level.f) {
            (Manifold::Ground, 0) => 0.0,
            (Manifold::Ground, _) => self.ground_hyperfine_hz + zeeman,
            (Manifold::Excited, 0) => self.optical_carrier_hz,
            (Manifold::Excited, _) => {
                self.optical_carrier_hz + self.excited_hyperfine_hz + zeeman
            }
        }
    }

    /// Resonance frequency of a channel (upper minus lower), Hz.
    pub fn resonance_hz(&self, upper: HyperfineLevel, lower: HyperfineLevel) -> f64 {
        self.level_frequency_hz(upper) - self.level_frequency_hz(lower)
    }
}

/// Signed detuning (Hz) of a drive at `drive_hz` from the channel's
/// resonance, composed from the hyperfine and Zeeman offsets.
pub fn transition_detuning(
    channel: &TransitionChannel,
    drive_hz: f64,
    splittings: &LevelSplittings,
) -> f64 {
    drive_hz - splittings.resonance_hz(channel.upper, channel.lower)
}

//! Desk-scale simulator for an ion-photon frequency-qubit correlation
//! experiment: an eight-level ¹⁷¹Yb⁺ master-equation engine, the optical
//! collection and grating-spectrometer measurement chain, shot-level Monte
//! Carlo data generation, and the statistics that turn click records into
//! fidelities, rates, and uncertainty budgets.
//!
//! Internal unit conventions, used everywhere unless a name says otherwise:
//! seconds for time, Hz for plain frequencies, rad/s for Rabi (angular)
//! frequencies, metres for lengths, radians for angles.

pub mod analysis;
pub mod atom;
pub mod collection;
pub mod lindblad;
pub mod montecarlo;
pub mod protocol;
pub mod quad;
pub mod readout;
pub mod rng;
pub mod spectrometer;
pub mod uncertainty;

pub use atom::{Basis, HyperfineLevel, LevelSplittings, Manifold, TransitionChannel};
pub use lindblad::{CollapseSet, DensityMatrix, DriveTerm, EvolutionResult};
pub use montecarlo::{ClickRecord, ExperimentConfig, IonState, PhotonOutcome};
pub use spectrometer::PhotonState;
pub use uncertainty::Measured;

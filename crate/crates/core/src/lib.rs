//! Photon-counting statistics and classical Fisher information for detuning
//! estimation with a Mach-Zehnder interferometer that has a two-level atomic
//! ensemble in one arm, plus particle-swarm search for the N-photon probe
//! state with the largest peak Fisher information.
//!
//! Pipeline: [`medium::Medium::arm_response`] →
//! [`interferometer::detection_distribution`] →
//! [`fisher::fisher_information`]. SI units throughout; detunings in rad/s,
//! Fisher information in s².

#[cfg(feature = "cli")]
pub mod cli;
pub mod error;
pub mod fisher;
pub mod interferometer;
pub mod medium;
pub mod pso;
pub mod states;

pub use error::{Error, Result};
pub use fisher::{
    copies_fisher, cramer_rao_bound, fisher_curve, fisher_information, DetuningGrid, FisherCurve,
};
pub use interferometer::oracle::distribution_oracle;
pub use interferometer::{detection_distribution, OutcomeDistribution, ProbeState};
pub use medium::{ArmResponse, FrequencyModel, Medium, Susceptibility};
pub use pso::{optimize_state, PsoConfig, PsoResult};
pub use states::{all_in_ensemble_arm, noon_state};

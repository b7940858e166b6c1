//! Zero-photon and single-photon subtraction on photon-number statistics.
//!
//! The analytic side ([`states`], [`channels`], [`detectors`],
//! [`conditioning`]) evaluates heralded outputs exactly on truncated
//! distributions. [`montecarlo`] replays the counting experiment pulse by
//! pulse and estimates `K` from click rates, and [`sweeps`] tabulates both
//! against reflectance or heralding efficiency.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channels;
pub mod conditioning;
pub mod config;
pub mod detectors;
mod error;
mod math;
pub mod montecarlo;
pub mod states;
pub mod sweeps;

pub use channels::{beamsplitter_joint, loss_channel, JointDistribution, Reflectance};
pub use conditioning::{
    initial_slope, k_click, k_closed_form, relative_attenuation, sps_condition, zps_condition,
    ClosedFormKind, ClosedFormParams, ConditionedOutput, LossBudget,
};
pub use config::RunConfig;
pub use detectors::{no_click_probability, per_pulse_dark_prob, DetectorModel};
pub use error::{Error, Result};
pub use montecarlo::{estimate_k, simulate, ExperimentConfig, KEstimate, TagStream};
pub use states::{PhotonDistribution, PureAmplitudes, StateMoments, StateSpec};
pub use sweeps::{SweepSpec, Table};

/// Version string written into run metadata.
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

//! Amplitude-exact simulation and analytics for quantum secret sharing over
//! {0, pi}-modulated high-dimensional time-bin entanglement.
//!
//! The crate is organized along the protocol's moving parts:
//!
//! * [`statevec`] — exact complex-amplitude states and the one-bit-delay
//!   interferometer; every probability the simulator samples from is computed
//!   here, which also makes it the verification oracle.
//! * [`source`] — packet generation: dimensions, phase patterns, pump
//!   phases, Poissonian pair emission.
//! * [`channel`] — per-arm loss, measurement sampling, dark counts.
//! * [`protocol`] — the six-step session: sifting, key derivation and
//!   reconstruction, QBER estimation, count-rate and detection-slot
//!   monitoring.
//! * [`adversary`] — intercept-resend eavesdroppers, the beam-splitting
//!   attack, and the dishonest-recipient single/sequential resend cheats.
//! * [`analytics`] — closed-form slot statistics, attack rates, and the
//!   security-threshold curves.
//! * [`harness`] — seeded multi-trial Monte Carlo with analytic comparison
//!   reports.
//! * [`validation`] — bundled estimator-vs-closed-form suites.

pub mod adversary;
pub mod analytics;
pub mod channel;
pub mod error;
pub mod harness;
pub mod protocol;
pub mod source;
pub mod stats;
pub mod statevec;
pub mod validation;

pub use adversary::AdversaryModel;
pub use channel::{ChannelConfig, ClickCause, ClickRecord, Party};
pub use error::{Error, Result};
pub use harness::{Aggregate, ComparisonReport, Estimate, Scenario, TrialsOutcome};
pub use protocol::{
    AbortFlags, KeyBits, MonitorConfig, SessionParams, SessionReport, SessionResult,
};
pub use source::{DimensionDistribution, PacketSpec, Scheme, SlotRole, SourceConfig};
pub use statevec::{Amplitude, PairState, Phase, PhotonState, Port};

//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by simulator configuration and bookkeeping.
///
/// Physics kernels (interferometer application, distribution extraction) are
/// total functions and do not appear here; errors are reserved for invalid
/// configuration and protocol bookkeeping violations.
#[derive(Debug, Error)]
pub enum Error {
    /// Packet dimension below the minimum of two occupied slots.
    #[error("invalid packet dimension {dim}: need N >= 2")]
    InvalidDimension { dim: usize },

    /// A configuration value outside its admissible range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A closed-form parameter outside its mathematical domain.
    #[error("parameter out of domain: {0}")]
    Domain(String),

    /// A sifted slot could not be attributed to any generated packet.
    #[error("bookkeeping error: sifted slot {slot} lies outside every packet")]
    SlotOutsidePackets { slot: i64 },

    /// A recipient's port record is missing for a sifted signal slot.
    #[error("incomplete data: missing {party} port for sifted slot {slot}")]
    MissingPort { party: &'static str, slot: i64 },

    /// QBER estimation was asked to operate on an empty test set.
    #[error("estimation error: empty test subset (key length {key_len})")]
    EmptyTestSet { key_len: usize },

    /// The requested sequential attack cannot run on the configured packets.
    #[error("attack infeasible: sequence length {n} exceeds every packet dimension")]
    AttackInfeasible { n: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

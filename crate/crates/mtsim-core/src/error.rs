//! Crate-wide error type.

use crate::device::TierKind;

/// Errors produced by simulator configuration, file parsing, and the
/// analytical model.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A device or hierarchy parameter violates its invariants.
    #[error("invalid device spec: {0}")]
    InvalidDevice(String),

    /// A generator, engine, or tuner parameter is out of range.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A snapshot does not fit the pools it is loaded into.
    #[error("snapshot exceeds {tier} capacity: {blocks} blocks > {slots} slots")]
    SnapshotCapacity {
        tier: TierKind,
        blocks: usize,
        slots: usize,
    },

    /// The replayed trace references more blocks than the lowest tier holds.
    #[error("trace footprint {footprint_blocks} blocks exceeds SSD capacity of {ssd_slots} blocks")]
    FootprintExceedsSsd {
        footprint_blocks: u64,
        ssd_slots: u64,
    },

    /// A text input (trace, snapshot, catalog) failed to parse.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A parsed value is syntactically fine but semantically invalid.
    #[error("validation error at line {line}: {message}")]
    Validation { line: usize, message: String },

    /// The hit-ratio model was given an inconsistent curve.
    #[error("hit-ratio model: {0}")]
    Model(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

//! Power-constrained resource management for multicores with reconfigurable
//! cores and a way-partitioned last-level cache.
//!
//! The crate simulates the hardware with synthetic ground-truth profiles,
//! reconstructs per-application behaviour from sparse samples with matrix
//! factorization, searches joint configurations with parallel dynamically
//! dimensioned search, and replays quantum-by-quantum timelines for several
//! resource managers.

// Validation guards are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config_space;
pub mod error;
pub mod experiment;
pub mod reconstruct;
pub mod runtime;
pub mod sampling;
pub mod search;
pub mod surrogate;
pub mod workload;

pub use config_space::{ConfigSpace, CoreClass, CoreConfig, HeteroSpace, Space};
pub use error::{Error, Result};
pub use workload::{AppKind, AppProfile, Scenario, ScenarioBuilder, Schedule};

use sha2::{Digest, Sha256};

/// First 8 bytes of the SHA-256 of `bytes`, as 16 hex digits.
pub fn short_hash(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().take(8).map(|b| format!("{b:02x}")).collect()
}

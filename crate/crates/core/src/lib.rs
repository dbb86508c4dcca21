//! Deterministic core of a collaborative hybrid-assignment detection
//! trainer: one-to-one Hungarian matching, one-to-many label assigners,
//! collaborative target and positive-query construction, multi-term loss
//! aggregation, and training diagnostics (discriminability maps,
//! foreground/background activation curves, matching instability).
//!
//! Everything here is a pure function of its inputs; concurrent use across
//! images requires no synchronization.

pub mod assigners;
pub mod collab;
pub mod diagnostics;
mod error;
pub mod geometry;
pub mod losses;
pub mod matcher;
pub mod priors;

pub use error::{Error, Result};

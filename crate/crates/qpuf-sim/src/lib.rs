//! Simulator and evaluation harness for noise-based quantum physically
//! unclonable functions (QPUFs).
//!
//! The crate models open-system qubit registers as density matrices and
//! provides:
//!
//! - exact linear algebra over complex matrices ([`linalg`]),
//! - density-matrix states with fidelity / trace-distance metrics ([`qstate`]),
//! - Kraus channels, Choi matrices and readout-error models ([`channel`]),
//! - a small circuit IR with exact branch enumeration, sampling, noise
//!   insertion and topology-aware routing ([`circuit`]),
//! - Lindblad evolution via dense Liouvillians, Trotter splitting and
//!   quantum-trajectory unraveling ([`lindblad`]),
//! - three QPUF constructions driven by challenge strings ([`qpuf`]),
//! - uniformity / uniqueness / reliability metrics ([`metrics`]),
//! - state and process tomography with cost accounting ([`tomography`]),
//! - calibration-derived backend noise profiles ([`profile`]),
//! - a deterministic experiment harness and CLI backend ([`harness`]).
//!
//! Bit-order convention used everywhere: qubit 0 is the most significant
//! bit of a basis-state index and the leftmost character of a bitstring.

pub mod channel;
pub mod circuit;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod lindblad;
pub mod metrics;
pub mod profile;
pub mod qpuf;
pub mod qstate;
pub mod seeds;
pub mod tomography;

pub use error::QpufError;

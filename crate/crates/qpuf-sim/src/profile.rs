//! Synthetic backend noise profiles.
//!
//! Three built-in profiles (`athens`, `santiago`, `melbourne`) model
//! decommissioned superconducting devices from their published
//! calibration statistics: per-qubit relaxation time `T1`, coherence
//! time `T2`, and readout error are drawn from truncated normal
//! distributions matching the reported mean / min / max / standard
//! deviation, with a fixed per-profile seed so the synthesized qubits
//! are bit-stable across runs. Per-qubit raw calibration data is not
//! available, so these profiles are honest *synthetic* reconstructions
//! of the published aggregate statistics, not device snapshots.
//!
//! A profile translates into simulation noise in two ways:
//! - [`BackendProfile::gate_noise`] — idling noise over a gate
//!   duration `d`: amplitude damping `1 − e^{−d/T1}` composed after
//!   phase damping `½(1 − e^{−d/T_φ})`, with the pure-dephasing time
//!   `T_φ` from `1/T_φ = 1/T2 − 1/(2·T1)`;
//! - [`BackendProfile::readout_noise`] — per-qubit symmetric
//!   classical bit flips at the calibrated readout-error rate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::channel::{KrausChannel, ReadoutMatrix};
use crate::circuit::route::Topology;
use crate::error::{QpufError, Result};
use crate::seeds::hash64;

/// Physicality slack for the `T2 ≤ 2·T1` check.
const PHYSICALITY_TOL: f64 = 1e-9;

/// Calibration data for one qubit. Times are in microseconds; the
/// readout error is a fraction in `[0, 0.5]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitCalibration {
    pub t1_us: f64,
    pub t2_us: f64,
    pub readout_error: f64,
}

/// Gate and readout durations in microseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateDurations {
    /// Single-qubit gate duration.
    pub t1q_us: f64,
    /// Two-qubit gate duration.
    pub t2q_us: f64,
    /// Readout duration.
    pub tro_us: f64,
}

impl Default for GateDurations {
    fn default() -> Self {
        Self {
            t1q_us: 0.05,
            t2q_us: 0.3,
            tro_us: 1.0,
        }
    }
}

/// A named backend noise profile: topology plus per-qubit calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct BackendProfile {
    name: String,
    topology: Topology,
    qubits: Vec<QubitCalibration>,
    durations: GateDurations,
}

/// Serialized form of a profile (topology flattened to an edge list).
#[derive(Serialize, Deserialize)]
struct ProfileFile {
    name: String,
    n_qubits: usize,
    edges: Vec<(usize, usize)>,
    qubits: Vec<QubitCalibration>,
    durations: GateDurations,
}

/// Pure-dephasing time from `1/T_φ = 1/T2 − 1/(2·T1)`.
///
/// Returns `f64::INFINITY` when `T2` saturates the `2·T1` limit (no
/// pure dephasing beyond relaxation).
///
/// # Errors
///
/// Returns [`QpufError::InvalidParameter`] for non-positive times.
pub fn pure_dephasing_time(t1_us: f64, t2_us: f64) -> Result<f64> {
    if t1_us <= 0.0 || t2_us <= 0.0 {
        return Err(QpufError::InvalidParameter(format!(
            "coherence times must be positive, got T1={t1_us}, T2={t2_us}"
        )));
    }
    let rate = 1.0 / t2_us - 1.0 / (2.0 * t1_us);
    if rate <= 1e-12 {
        Ok(f64::INFINITY)
    } else {
        Ok(1.0 / rate)
    }
}

impl BackendProfile {
    /// Builds a profile after validating per-qubit physicality:
    /// positive times, `T2 ≤ 2·T1` (within slack), readout error in
    /// `[0, 0.5]`, one calibration entry per topology qubit.
    ///
    /// # Errors
    ///
    /// Returns [`QpufError::InvalidParameter`] on any violated bound and
    /// [`QpufError::DimensionMismatch`] if the calibration list does not
    /// match the topology size.
    pub fn new(
        name: impl Into<String>,
        topology: Topology,
        qubits: Vec<QubitCalibration>,
        durations: GateDurations,
    ) -> Result<Self> {
        if qubits.len() != topology.n_qubits() {
            return Err(QpufError::DimensionMismatch(format!(
                "{} calibration entries for a {}-qubit topology",
                qubits.len(),
                topology.n_qubits()
            )));
        }
        for (q, cal) in qubits.iter().enumerate() {
            if cal.t1_us <= 0.0 || cal.t2_us <= 0.0 {
                return Err(QpufError::InvalidParameter(format!(
                    "qubit {q}: coherence times must be positive"
                )));
            }
            if cal.t2_us > 2.0 * cal.t1_us + PHYSICALITY_TOL {
                return Err(QpufError::InvalidParameter(format!(
                    "qubit {q}: T2 = {} exceeds 2·T1 = {}",
                    cal.t2_us,
                    2.0 * cal.t1_us
                )));
            }
            if !(0.0..=0.5).contains(&cal.readout_error) {
                return Err(QpufError::InvalidParameter(format!(
                    "qubit {q}: readout error {} outside [0, 0.5]",
                    cal.readout_error
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            topology,
            qubits,
            durations,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_qubits(&self) -> usize {
        self.qubits.len()
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn qubits(&self) -> &[QubitCalibration] {
        &self.qubits
    }

    pub fn durations(&self) -> &GateDurations {
        &self.durations
    }

    /// Idling-noise channel for one qubit over `duration_us`:
    /// amplitude damping `1 − e^{−d/T1}` after phase damping
    /// `½(1 − e^{−d/T_φ})`.
    ///
    /// # Errors
    ///
    /// Returns [`QpufError::InvalidParameter`] for a bad qubit index or
    /// negative duration.
    pub fn gate_noise(&self, qubit: usize, duration_us: f64) -> Result<KrausChannel> {
        let cal = self.qubits.get(qubit).ok_or_else(|| {
            QpufError::InvalidParameter(format!(
                "qubit {qubit} out of range for {}-qubit profile",
                self.qubits.len()
            ))
        })?;
        if duration_us < 0.0 || !duration_us.is_finite() {
            return Err(QpufError::InvalidParameter(format!(
                "gate duration must be non-negative, got {duration_us}"
            )));
        }
        let p = 1.0 - (-duration_us / cal.t1_us).exp();
        let t_phi = pure_dephasing_time(cal.t1_us, cal.t2_us)?;
        let q = if t_phi.is_infinite() {
            0.0
        } else {
            0.5 * (1.0 - (-duration_us / t_phi).exp())
        };
        KrausChannel::amplitude_damping(p)?.compose(&KrausChannel::phase_damping(q)?)
    }

    /// Readout-error model: independent symmetric per-qubit flips at the
    /// calibrated rates.
    pub fn readout_noise(&self) -> ReadoutMatrix {
        let probs: Vec<f64> = self.qubits.iter().map(|c| c.readout_error).collect();
        ReadoutMatrix::from_flip_probabilities(probs)
            .expect("calibrated readout errors are valid probabilities")
    }

    /// Serializes the profile to JSON.
    ///
    /// # Errors
    ///
    /// Propagates serializer failures.
    pub fn to_json(&self) -> Result<String> {
        let file = ProfileFile {
            name: self.name.clone(),
            n_qubits: self.n_qubits(),
            edges: self.topology.edges().collect(),
            qubits: self.qubits.clone(),
            durations: self.durations.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    /// Parses a profile from the JSON produced by [`Self::to_json`].
    ///
    /// # Errors
    ///
    /// Returns parse errors and the same validation errors as
    /// [`Self::new`].
    pub fn from_json(json: &str) -> Result<Self> {
        let file: ProfileFile = serde_json::from_str(json)?;
        let topology = Topology::from_edges(file.n_qubits, &file.edges)?;
        Self::new(file.name, topology, file.qubits, file.durations)
    }
}

/// Aggregate statistics for one calibration quantity.
struct Stats {
    mean: f64,
    min: f64,
    max: f64,
    std: f64,
}

/// Draws a normal sample truncated to `[min, max]` by rejection, with a
/// deterministic clamped fallback for pathological bounds.
fn truncated_normal(rng: &mut ChaCha8Rng, s: &Stats) -> f64 {
    let dist = Normal::new(s.mean, s.std).expect("positive std dev");
    for _ in 0..10_000 {
        let x = dist.sample(rng);
        if (s.min..=s.max).contains(&x) {
            return x;
        }
    }
    s.mean.clamp(s.min, s.max)
}

fn synthesize(
    name: &str,
    topology: Topology,
    t1: Stats,
    t2: Stats,
    readout_percent: Stats,
) -> BackendProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(hash64(&["profile", name]));
    let qubits: Vec<QubitCalibration> = (0..topology.n_qubits())
        .map(|_| {
            let t1_us = truncated_normal(&mut rng, &t1);
            let t2_sample = truncated_normal(&mut rng, &t2);
            // Enforce physicality against the sampled T1.
            let t2_us = t2_sample.min(2.0 * t1_us);
            let readout_error = truncated_normal(&mut rng, &readout_percent) / 100.0;
            QubitCalibration {
                t1_us,
                t2_us,
                readout_error,
            }
        })
        .collect();
    BackendProfile::new(name, topology, qubits, GateDurations::default())
        .expect("synthesized calibration satisfies the invariants")
}

/// Five-qubit device with a linear chain topology; moderate coherence,
/// occasionally poor readout.
pub fn athens() -> BackendProfile {
    synthesize(
        "athens",
        Topology::linear(5),
        Stats { mean: 75.78, min: 57.47, max: 103.87, std: 8.03 },
        Stats { mean: 90.46, min: 50.98, max: 125.23, std: 12.68 },
        Stats { mean: 2.45, min: 1.27, max: 24.06, std: 2.93 },
    )
}

/// Five-qubit device with a star topology (hub qubit 0); the longest
/// coherence times and lowest readout error of the three, with larger
/// qubit-to-qubit spread.
pub fn santiago() -> BackendProfile {
    synthesize(
        "santiago",
        Topology::star(5),
        Stats { mean: 133.14, min: 83.59, max: 163.19, std: 13.63 },
        Stats { mean: 123.33, min: 55.7, max: 165.09, std: 17.01 },
        Stats { mean: 1.95, min: 0.98, max: 5.59, std: 0.77 },
    )
}

/// Fifteen-qubit device with a ladder topology: chains 0–6 and 7–13
/// with rungs `(i, i+7)`, and qubit 14 hanging off qubit 13. Short
/// coherence and high readout error, but low variability.
pub fn melbourne() -> BackendProfile {
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for i in 0..6 {
        edges.push((i, i + 1));
        edges.push((7 + i, 7 + i + 1));
    }
    for i in 0..7 {
        edges.push((i, i + 7));
    }
    edges.push((13, 14));
    let topology = Topology::from_edges(15, &edges).expect("ladder topology is well formed");
    synthesize(
        "melbourne",
        topology,
        Stats { mean: 55.02, min: 47.78, max: 60.45, std: 2.04 },
        Stats { mean: 59.87, min: 44.39, max: 70.79, std: 4.73 },
        Stats { mean: 7.02, min: 4.1, max: 10.16, std: 1.09 },
    )
}

/// All built-in profiles, in fixed order.
pub fn builtin_profiles() -> Vec<BackendProfile> {
    vec![athens(), santiago(), melbourne()]
}

/// Documented `(quantity, min, max)` calibration bounds the built-in
/// profiles were synthesized within, with readout error as a fraction.
/// Histogram axes derived from these cover every synthesized qubit.
pub fn calibration_bounds(name: &str) -> Option<[(&'static str, f64, f64); 3]> {
    match name.to_ascii_lowercase().as_str() {
        "athens" => Some([
            ("t1_us", 57.47, 103.87),
            ("t2_us", 50.98, 125.23),
            ("readout_error", 0.0127, 0.2406),
        ]),
        "santiago" => Some([
            ("t1_us", 83.59, 163.19),
            ("t2_us", 55.7, 165.09),
            ("readout_error", 0.0098, 0.0559),
        ]),
        "melbourne" => Some([
            ("t1_us", 47.78, 60.45),
            ("t2_us", 44.39, 70.79),
            ("readout_error", 0.041, 0.1016),
        ]),
        _ => None,
    }
}

/// Looks up a built-in profile by case-insensitive name.
pub fn builtin_profile(name: &str) -> Option<BackendProfile> {
    let lower = name.to_ascii_lowercase();
    builtin_profiles().into_iter().find(|p| p.name() == lower)
}

//! QPUF instance generation and challenge evaluation.
//!
//! Three architectures share one lifecycle: [`qgen`] derives a secret
//! parameter bundle from a master seed, and [`qeval`] maps a challenge
//! bitstring to a majority-voted response bitstring plus the raw shot
//! histogram.
//!
//! - **D** ([`dqpuf`]): a fixed five-layer random circuit whose noise
//!   channels are modulated by the challenge.
//! - **MF** ([`mfqpuf`]): the same front end with mid-circuit
//!   measurements whose outcomes steer feedback gates.
//! - **L** ([`lqpuf`]): interleaved unitary blocks and continuous-time
//!   dissipative windows evolved as Lindblad dynamics.
//!
//! Evaluation is split in two: [`evaluate_exact`] produces the full
//! outcome distribution (expensive, once per instance/challenge pair),
//! and [`ExactEvaluation::sample`] draws shot histograms from it
//! (cheap, once per repetition seed). Attaching a [`BackendProfile`]
//! routes the circuit onto the device topology, inserts per-gate
//! decoherence channels from the qubit calibrations, and applies the
//! calibrated readout confusion map at sampling time.

pub mod dqpuf;
pub mod lqpuf;
pub mod mfqpuf;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::exec::{run_exact, sample_distribution, TerminalDistribution};
use crate::circuit::{route_circuit, Circuit, CircuitOp, Gate, NoiseKind};
use crate::channel::ReadoutMatrix;
use crate::error::{QpufError, Result};
use crate::lindblad::TrotterOrder;
use crate::profile::BackendProfile;
use crate::qstate::DensityMatrix;
use crate::seeds::child_seed;

pub use dqpuf::{dqpuf_build, dqpuf_noise_coeffs};
pub use lqpuf::{extract_rotation_encoding, lqpuf_eval, lqpuf_eval_reference};
pub use mfqpuf::mfqpuf_build;

/// Smallest supported register.
pub const MIN_QUBITS: usize = 2;
/// Lower bound of the sampled noise-rate interval.
pub const RATE_MIN: f64 = 0.001;
/// Upper bound of the sampled noise-rate interval.
pub const RATE_MAX: f64 = 0.05;
/// Magnitude bound for "small" rotations (post-processing layer,
/// feedback nudges, transverse-field strengths).
pub const SMALL_ANGLE_MAX: f64 = 0.1;
/// Default number of measurement-feedback rounds for MF instances.
pub const DEFAULT_FEEDBACK_ROUNDS: usize = 1;
/// Default number of unitary+dissipative blocks for L instances.
pub const DEFAULT_LINDBLAD_BLOCKS: usize = 2;
/// Default duration of each dissipative window, in generator time units.
pub const DEFAULT_WINDOW_TIME: f64 = 1.0;
/// Widest register a profile-attached circuit may touch after routing.
/// Keeps the density matrix (4^width entries) desk-sized even when the
/// router pulls in ancilla qubits for SWAP chains.
pub const PROFILE_WIDTH_LIMIT: usize = 10;
/// Relative half-width of the optional per-evaluation noise-rate
/// jitter: each rate is scaled by a uniform factor in [0.9, 1.1].
pub const RATE_JITTER: f64 = 0.1;

/// The three QPUF architectures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Arch {
    /// Dissipative: challenge-modulated noise channels around a fixed
    /// random circuit.
    D,
    /// Measurement-feedback: mid-circuit measurements steer feedback
    /// gates.
    Mf,
    /// Lindbladian: unitary blocks interleaved with continuous-time
    /// dissipative windows.
    L,
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arch::D => "D",
            Arch::Mf => "MF",
            Arch::L => "L",
        })
    }
}

impl FromStr for Arch {
    type Err = QpufError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "D" => Ok(Arch::D),
            "MF" => Ok(Arch::Mf),
            "L" => Ok(Arch::L),
            other => Err(QpufError::InvalidParameter(format!(
                "unknown architecture {other:?} (expected D, MF or L)"
            ))),
        }
    }
}

/// A challenge: one classical bit per register qubit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Challenge {
    bits: String,
}

impl Challenge {
    /// Validates and wraps a challenge bitstring.
    ///
    /// # Errors
    ///
    /// Returns [`QpufError::InvalidChallenge`] if `bits` is empty or
    /// contains characters other than `0`/`1`.
    pub fn new(bits: &str) -> Result<Self> {
        if bits.is_empty() {
            return Err(QpufError::InvalidChallenge(
                "challenge must contain at least one bit".into(),
            ));
        }
        if let Some(c) = bits.chars().find(|c| *c != '0' && *c != '1') {
            return Err(QpufError::InvalidChallenge(format!(
                "challenge may only contain 0/1, found {c:?}"
            )));
        }
        Ok(Self { bits: bits.to_string() })
    }

    pub fn bits(&self) -> &str {
        &self.bits
    }

    /// Number of bits (equals the register width it addresses).
    #[allow(clippy::len_without_is_empty)] // construction rejects ""
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    /// Count of `1` bits.
    pub fn ones(&self) -> usize {
        self.bits.bytes().filter(|&b| b == b'1').count()
    }

    /// Count of `0` bits.
    pub fn zeros(&self) -> usize {
        self.len() - self.ones()
    }

    /// Bit at position `i` (0 = leftmost = qubit 0).
    ///
    /// # Panics
    ///
    /// Panics if `i` is out of range.
    pub fn bit(&self, i: usize) -> u8 {
        if self.bits.as_bytes()[i] == b'1' {
            1
        } else {
            0
        }
    }
}

/// Rotation-gate axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RotationAxis {
    X,
    Y,
    Z,
}

impl RotationAxis {
    /// The rotation gate about this axis.
    pub fn gate(self, qubit: usize, angle: f64) -> Gate {
        match self {
            RotationAxis::X => Gate::Rx(qubit, angle),
            RotationAxis::Y => Gate::Ry(qubit, angle),
            RotationAxis::Z => Gate::Rz(qubit, angle),
        }
    }
}

/// Per-instance secrets shared by the D and MF circuit front ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseParams {
    /// Layer 1: one rotation (axis, angle in `[0, 2π)`) per qubit.
    pub layer1: Vec<(RotationAxis, f64)>,
    /// Layer 3: angle `θ_i` in `[0, 2π)` per qubit (consumed by the
    /// even-index rotation rule).
    pub layer3_thetas: Vec<f64>,
    /// Layer 5: one small rotation (axis, angle in `[−0.1, 0.1]`) per
    /// qubit.
    pub layer5: Vec<(RotationAxis, f64)>,
}

/// Feedback gate applied to odd-indexed targets when a mid-circuit
/// measurement reads 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OutcomeOneRule {
    Hadamard,
    /// `Rz` by the stored angle.
    PhaseRotation(f64),
}

/// Feedback gate applied to even-indexed targets when a mid-circuit
/// measurement reads 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OutcomeZeroRule {
    PhaseGate,
    /// Small `Rx` by the stored angle.
    SmallX(f64),
    /// Small `Ry` by the stored angle.
    SmallY(f64),
}

/// The per-instance feedback rule table (fixed at generation, applied
/// at every round).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRules {
    pub on_one: OutcomeOneRule,
    pub on_zero: OutcomeZeroRule,
}

/// Secrets of one unitary+dissipative block of an L instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LindbladBlock {
    /// Per-qubit `(Rx, Ry, Rz)` angles of the block's rotation layer.
    pub rotation_angles: Vec<[f64; 3]>,
    /// Per-qubit amplitude-damping rates of the dissipative window.
    pub damping_rates: Vec<f64>,
    /// Per-qubit dephasing rates of the dissipative window.
    pub dephasing_rates: Vec<f64>,
    /// Rate of the collective-Z jump (uniform weights `1/√n`).
    pub collective_rate: f64,
    /// Rate of the pairwise-ZZ jump (uniform weights over all pairs).
    pub pairwise_rate: f64,
    /// Transverse-field strengths `h_i` of the window Hamiltonian
    /// `Σ_i h_i X_i`.
    pub field: Vec<f64>,
}

/// Full secret bundle of an L instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LParams {
    pub blocks: Vec<LindbladBlock>,
    /// Final per-qubit `(Rx, Ry, Rz)` angles.
    pub final_angles: Vec<[f64; 3]>,
    /// Duration of each dissipative window.
    pub window_time: f64,
}

/// Architecture-specific secret parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum QpufParams {
    D(BaseParams),
    Mf {
        base: BaseParams,
        /// Number of measurement-feedback rounds (0 degenerates to D).
        rounds: usize,
        rules: FeedbackRules,
    },
    L(LParams),
}

/// A generated QPUF device: public identity plus secret parameters.
///
/// The parameters are fully reconstructible from `(arch, n_qubits,
/// master seed, device index)` via [`qgen`]; [`QpufInstance::export_json`]
/// serializes only a digest of them.
#[derive(Debug, Clone, PartialEq)]
pub struct QpufInstance {
    arch: Arch,
    n_qubits: usize,
    device_id: String,
    seed: u64,
    params: QpufParams,
}

impl QpufInstance {
    pub fn arch(&self) -> Arch {
        self.arch
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn device_id(&self) -> &str {
        &self.device_id
    }

    /// The derived per-instance seed all parameters were sampled from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &QpufParams {
        &self.params
    }

    /// Feedback rounds, for MF instances.
    pub fn feedback_rounds(&self) -> Option<usize> {
        match &self.params {
            QpufParams::Mf { rounds, .. } => Some(*rounds),
            _ => None,
        }
    }

    /// Returns the same MF instance reconfigured to `rounds` feedback
    /// rounds. The rule table and base layers are unchanged, so
    /// `rounds = 0` reproduces the D circuit of the same seed.
    ///
    /// # Errors
    ///
    /// Returns [`QpufError::InvalidParameter`] for non-MF instances.
    pub fn with_feedback_rounds(mut self, rounds: usize) -> Result<Self> {
        match &mut self.params {
            QpufParams::Mf { rounds: r, .. } => {
                *r = rounds;
                Ok(self)
            }
            _ => Err(QpufError::InvalidParameter(format!(
                "feedback rounds apply to MF instances, not {}",
                self.arch
            ))),
        }
    }

    /// Returns the same L instance reconfigured to `m` blocks. Blocks
    /// are sampled from per-block seed streams, so a shorter
    /// configuration is a prefix of a longer one.
    ///
    /// # Errors
    ///
    /// Returns [`QpufError::InvalidParameter`] for non-L instances or
    /// `m = 0`.
    pub fn with_lindblad_blocks(mut self, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(QpufError::InvalidParameter(
                "an L instance needs at least one block".into(),
            ));
        }
        match &mut self.params {
            QpufParams::L(p) => {
                *p = sample_l_params(self.seed, self.n_qubits, m);
                Ok(self)
            }
            _ => Err(QpufError::InvalidParameter(format!(
                "block count applies to L instances, not {}",
                self.arch
            ))),
        }
    }

    /// Public JSON export: identity fields plus a parameter digest.
    /// The expanded secret parameters are never serialized; they are
    /// re-derivable from the seed via [`qgen`].
    pub fn export_json(&self) -> String {
        let digest = crate::seeds::hash64(&["params", &format!("{:?}", self.params)]);
        serde_json::json!({
            "arch": self.arch.to_string(),
            "n_qubits": self.n_qubits,
            "device_id": self.device_id,
            "seed": self.seed,
            "params_digest": format!("{digest:016x}"),
        })
        .to_string()
    }
}

fn random_axis(rng: &mut ChaCha8Rng) -> RotationAxis {
    match rng.gen_range(0..3u8) {
        0 => RotationAxis::X,
        1 => RotationAxis::Y,
        _ => RotationAxis::Z,
    }
}

fn full_angle(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen::<f64>() * std::f64::consts::TAU
}

fn small_angle(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(-SMALL_ANGLE_MAX..=SMALL_ANGLE_MAX)
}

fn noise_rate(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(RATE_MIN..=RATE_MAX)
}

/// Samples the D/MF base layers from the instance seed. The stream is
/// architecture-independent, so D and MF instances of the same seed
/// share their static layers.
fn sample_base_params(seed: u64, n: usize) -> BaseParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layer1 = (0..n)
        .map(|_| {
            let axis = random_axis(&mut rng);
            (axis, full_angle(&mut rng))
        })
        .collect();
    let layer3_thetas = (0..n).map(|_| full_angle(&mut rng)).collect();
    let layer5 = (0..n)
        .map(|_| {
            let axis = random_axis(&mut rng);
            (axis, small_angle(&mut rng))
        })
        .collect();
    BaseParams {
        layer1,
        layer3_thetas,
        layer5,
    }
}

/// Samples the MF feedback rule table from a dedicated child stream.
fn sample_feedback_rules(seed: u64) -> FeedbackRules {
    let mut rng = ChaCha8Rng::seed_from_u64(child_seed(seed, &["mf"]));
    let on_one = if rng.gen_range(0..2u8) == 0 {
        OutcomeOneRule::Hadamard
    } else {
        OutcomeOneRule::PhaseRotation(full_angle(&mut rng))
    };
    let on_zero = match rng.gen_range(0..3u8) {
        0 => OutcomeZeroRule::PhaseGate,
        1 => OutcomeZeroRule::SmallX(small_angle(&mut rng)),
        _ => OutcomeZeroRule::SmallY(small_angle(&mut rng)),
    };
    FeedbackRules { on_one, on_zero }
}

/// Samples L-instance parameters. Each block draws from its own child
/// stream, so reconfiguring the block count preserves earlier blocks.
fn sample_l_params(seed: u64, n: usize, m: usize) -> LParams {
    let blocks = (0..m)
        .map(|k| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(child_seed(seed, &["l", &k.to_string()]));
            let rotation_angles = (0..n)
                .map(|_| {
                    [
                        full_angle(&mut rng),
                        full_angle(&mut rng),
                        full_angle(&mut rng),
                    ]
                })
                .collect();
            let damping_rates = (0..n).map(|_| noise_rate(&mut rng)).collect();
            let dephasing_rates = (0..n).map(|_| noise_rate(&mut rng)).collect();
            let collective_rate = noise_rate(&mut rng);
            let pairwise_rate = noise_rate(&mut rng);
            let field = (0..n).map(|_| small_angle(&mut rng)).collect();
            LindbladBlock {
                rotation_angles,
                damping_rates,
                dephasing_rates,
                collective_rate,
                pairwise_rate,
                field,
            }
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(child_seed(seed, &["l", "final"]));
    let final_angles = (0..n)
        .map(|_| {
            [
                full_angle(&mut rng),
                full_angle(&mut rng),
                full_angle(&mut rng),
            ]
        })
        .collect();
    LParams {
        blocks,
        final_angles,
        window_time: DEFAULT_WINDOW_TIME,
    }
}

/// Generates a QPUF instance deterministically from a master seed and
/// device index.
///
/// All randomness flows through labeled child streams of the derived
/// instance seed, so distinct indices yield statistically independent
/// parameter bundles and the same inputs always reproduce the same
/// device.
///
/// # Errors
///
/// Returns [`QpufError::InvalidParameter`] if `n_qubits < 2`.
pub fn qgen(arch: Arch, n_qubits: usize, master_seed: u64, device_index: u64) -> Result<QpufInstance> {
    if n_qubits < MIN_QUBITS {
        return Err(QpufError::InvalidParameter(format!(
            "a QPUF needs at least {MIN_QUBITS} qubits, got {n_qubits}"
        )));
    }
    let seed = child_seed(
        master_seed,
        &["instance", &n_qubits.to_string(), &device_index.to_string()],
    );
    let params = match arch {
        Arch::D => QpufParams::D(sample_base_params(seed, n_qubits)),
        Arch::Mf => QpufParams::Mf {
            base: sample_base_params(seed, n_qubits),
            rounds: DEFAULT_FEEDBACK_ROUNDS,
            rules: sample_feedback_rules(seed),
        },
        Arch::L => QpufParams::L(sample_l_params(seed, n_qubits, DEFAULT_LINDBLAD_BLOCKS)),
    };
    let device_id = format!("{arch}-{n_qubits}q-{device_index:03}-{seed:016x}");
    Ok(QpufInstance {
        arch,
        n_qubits,
        device_id,
        seed,
        params,
    })
}

/// A response: majority-voted bits plus the raw shot histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    bits: String,
    histogram: BTreeMap<String, u64>,
    shots: u64,
}

impl Response {
    /// Majority-votes a histogram of `width`-bit outcome strings. A
    /// position ties to 0 when exactly half the shots read 1.
    pub(crate) fn from_histogram(
        histogram: BTreeMap<String, u64>,
        shots: u64,
        width: usize,
    ) -> Self {
        let mut ones = vec![0u64; width];
        for (pattern, count) in &histogram {
            for (i, b) in pattern.bytes().enumerate() {
                if b == b'1' {
                    ones[i] += count;
                }
            }
        }
        let bits = ones
            .iter()
            .map(|&o| if 2 * o > shots { '1' } else { '0' })
            .collect();
        Self {
            bits,
            histogram,
            shots,
        }
    }

    /// Majority-voted response bits, one per measured qubit.
    pub fn bits(&self) -> &str {
        &self.bits
    }

    /// Shot counts per observed outcome pattern.
    pub fn histogram(&self) -> &BTreeMap<String, u64> {
        &self.histogram
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    /// Response bits as a `0/1` byte vector.
    pub fn bit_vec(&self) -> Vec<u8> {
        self.bits.bytes().map(|b| u8::from(b == b'1')).collect()
    }
}

/// The exact outcome distribution of one (instance, challenge,
/// profile) evaluation, reusable across sampling seeds.
#[derive(Debug, Clone)]
pub struct ExactEvaluation {
    state: DensityMatrix,
    distribution: TerminalDistribution,
    readout: Option<ReadoutMatrix>,
}

impl ExactEvaluation {
    /// The pre-measurement register state, reduced to the response
    /// qubits in response-bit order.
    pub fn state(&self) -> &DensityMatrix {
        &self.state
    }

    /// The exact terminal outcome distribution (before readout error).
    pub fn distribution(&self) -> &TerminalDistribution {
        &self.distribution
    }

    /// The attached readout confusion map, if a profile was supplied.
    pub fn readout(&self) -> Option<&ReadoutMatrix> {
        self.readout.as_ref()
    }

    /// Consumes the evaluation, yielding the pre-measurement state
    /// without a copy (the distribution and readout map are dropped).
    pub fn into_state(self) -> DensityMatrix {
        self.state
    }

    /// Draws a shot histogram and majority-votes it into a [`Response`].
    ///
    /// # Errors
    ///
    /// Propagates sampling errors (readout-width mismatch).
    pub fn sample(&self, shots: u64, seed: u64) -> Result<Response> {
        let run = sample_distribution(&self.distribution, shots, seed, self.readout.as_ref())?;
        Ok(Response::from_histogram(
            run.histogram,
            shots,
            self.distribution.slots.len(),
        ))
    }
}

/// Appends the standard challenge-modulated noise block: for each
/// qubit, depolarizing, then phase damping, then amplitude damping
/// (the composite channel applies them in that order).
pub(crate) fn push_noise_stack(c: &mut Circuit, coeffs: (f64, f64, f64)) -> Result<()> {
    let (gamma_amp, gamma_phase, p_depol) = coeffs;
    for qubit in 0..c.n_qubits() {
        c.push(CircuitOp::Noise {
            kind: NoiseKind::Depolarizing,
            strength: p_depol,
            qubit,
        })?;
        c.push(CircuitOp::Noise {
            kind: NoiseKind::PhaseDamping,
            strength: gamma_phase,
            qubit,
        })?;
        c.push(CircuitOp::Noise {
            kind: NoiseKind::AmplitudeDamping,
            strength: gamma_amp,
            qubit,
        })?;
    }
    Ok(())
}

/// A logical circuit rewritten for a hardware profile: routed onto the
/// device topology, compacted to the touched qubits, and interleaved
/// with calibration-derived decoherence channels.
pub(crate) struct AttachedCircuit {
    /// The compact-width noisy circuit.
    pub circuit: Circuit,
    /// Readout confusion map over the terminal slots, in slot order.
    pub readout: ReadoutMatrix,
    /// Compact qubit measured into each terminal slot, in slot order.
    pub response_qubits: Vec<usize>,
}

/// Routes `logical` onto the profile topology and inserts hardware
/// noise: a `T1`/`T2` decoherence channel after every gate operand
/// (gate-length dependent), idle decoherence on spectator qubits
/// during mid-circuit readout, and the per-qubit readout confusion map
/// for the terminal measurements.
///
/// The routed circuit is compacted to the physical qubits it actually
/// touches so the simulated register stays desk-sized; calibrations
/// keep addressing the original physical indices.
///
/// # Errors
///
/// Propagates routing failures; returns [`QpufError::TooManyQubits`]
/// if the touched register exceeds [`PROFILE_WIDTH_LIMIT`] and
/// [`QpufError::InvalidParameter`] if the circuit has no terminal
/// measurements.
pub(crate) fn attach_profile(
    logical: &Circuit,
    profile: &BackendProfile,
) -> Result<AttachedCircuit> {
    let routed = route_circuit(logical, profile.topology())?;
    let phys = routed.circuit;
    let ops = phys.ops();

    let mut touched: BTreeSet<usize> = BTreeSet::new();
    for op in ops {
        match op {
            CircuitOp::Gate(g) => touched.extend(g.qubits()),
            CircuitOp::Measure { qubit, .. } => {
                touched.insert(*qubit);
            }
            CircuitOp::Conditional { gates, .. } => {
                for g in gates {
                    touched.extend(g.qubits());
                }
            }
            CircuitOp::Noise { qubit, .. } => {
                touched.insert(*qubit);
            }
            CircuitOp::Channel { qubits, .. } => touched.extend(qubits.iter().copied()),
        }
    }
    if touched.len() > PROFILE_WIDTH_LIMIT {
        return Err(QpufError::TooManyQubits {
            requested: touched.len(),
            limit: PROFILE_WIDTH_LIMIT,
        });
    }
    let compact_to_phys: Vec<usize> = touched.iter().copied().collect();
    let phys_to_compact: BTreeMap<usize, usize> = compact_to_phys
        .iter()
        .enumerate()
        .map(|(c, &p)| (p, c))
        .collect();
    let width = compact_to_phys.len();
    let durations = profile.durations();

    // Trailing measurements are simultaneous readout; everything before
    // them is circuit time and accrues decoherence.
    let mut split = ops.len();
    while split > 0 && matches!(ops[split - 1], CircuitOp::Measure { .. }) {
        split -= 1;
    }

    let mut out = Circuit::new(width);
    let push_gate_noise = |out: &mut Circuit, g: &Gate| -> Result<()> {
        let duration = if g.is_two_qubit() {
            durations.t2q_us
        } else {
            durations.t1q_us
        };
        for q in g.qubits() {
            out.push(CircuitOp::Channel {
                channel: profile.gate_noise(compact_to_phys[q], duration)?,
                qubits: vec![q],
            })?;
        }
        Ok(())
    };
    for (i, op) in ops.iter().enumerate() {
        match op {
            CircuitOp::Gate(g) => {
                let cg = g.map_qubits(|q| phys_to_compact[&q]);
                out.gate(cg.clone())?;
                push_gate_noise(&mut out, &cg)?;
            }
            CircuitOp::Measure { qubit, slot } => {
                let cq = phys_to_compact[qubit];
                out.measure(cq, *slot)?;
                if i < split {
                    // Spectators idle (and decohere) for the readout
                    // duration of a mid-circuit measurement.
                    for q in 0..width {
                        if q != cq {
                            out.push(CircuitOp::Channel {
                                channel: profile
                                    .gate_noise(compact_to_phys[q], durations.tro_us)?,
                                qubits: vec![q],
                            })?;
                        }
                    }
                }
            }
            CircuitOp::Conditional { slot, value, gates } => {
                let cgates: Vec<Gate> = gates
                    .iter()
                    .map(|g| g.map_qubits(|q| phys_to_compact[&q]))
                    .collect();
                out.push(CircuitOp::Conditional {
                    slot: *slot,
                    value: *value,
                    gates: cgates.clone(),
                })?;
                // The feedback slot takes wall-clock time on every
                // branch, so its decoherence applies unconditionally.
                for g in &cgates {
                    push_gate_noise(&mut out, g)?;
                }
            }
            CircuitOp::Noise {
                kind,
                strength,
                qubit,
            } => out.push(CircuitOp::Noise {
                kind: *kind,
                strength: *strength,
                qubit: phys_to_compact[qubit],
            })?,
            CircuitOp::Channel { channel, qubits } => out.push(CircuitOp::Channel {
                channel: channel.clone(),
                qubits: qubits.iter().map(|q| phys_to_compact[q]).collect(),
            })?,
        }
    }

    let mut slot_to_phys: BTreeMap<usize, usize> = BTreeMap::new();
    for op in &ops[split..] {
        if let CircuitOp::Measure { qubit, slot } = op {
            slot_to_phys.insert(*slot, *qubit);
        }
    }
    if slot_to_phys.is_empty() {
        return Err(QpufError::InvalidParameter(
            "profile attachment requires terminal measurements".into(),
        ));
    }
    let response_qubits: Vec<usize> = slot_to_phys.values().map(|p| phys_to_compact[p]).collect();
    let flips: Vec<f64> = slot_to_phys
        .values()
        .map(|p| profile.qubits()[*p].readout_error)
        .collect();
    let readout = ReadoutMatrix::from_flip_probabilities(flips)?;
    Ok(AttachedCircuit {
        circuit: out,
        readout,
        response_qubits,
    })
}

/// Reorders register qubits: output qubit `i` is input qubit `perm[i]`.
fn permute_qubits(rho: &DensityMatrix, perm: &[usize]) -> DensityMatrix {
    let k = rho.n_qubits();
    debug_assert_eq!(perm.len(), k);
    let dim = rho.dim();
    let source_index = |out: usize| -> usize {
        let mut src = 0usize;
        for (i, &p) in perm.iter().enumerate() {
            if out & (1 << (k - 1 - i)) != 0 {
                src |= 1 << (k - 1 - p);
            }
        }
        src
    };
    let src_of: Vec<usize> = (0..dim).map(source_index).collect();
    let mut m = crate::linalg::ComplexMatrix::zeros(dim, dim);
    for a in 0..dim {
        for b in 0..dim {
            m.set(a, b, rho.matrix().get(src_of[a], src_of[b]));
        }
    }
    DensityMatrix::new_unchecked(k, m)
}

/// Reduces a register state to the listed qubits, re-ordered so output
/// qubit `i` is input qubit `keep[i]`.
fn reduce_to_response(full: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let reduced = full.partial_trace(keep)?;
    let mut sorted = keep.to_vec();
    sorted.sort_unstable();
    if sorted == keep {
        return Ok(reduced);
    }
    let perm: Vec<usize> = keep
        .iter()
        .map(|q| sorted.binary_search(q).expect("kept qubit present"))
        .collect();
    Ok(permute_qubits(&reduced, &perm))
}

/// Scales every architecture noise rate by an independent uniform
/// factor in `[1 − RATE_JITTER, 1 + RATE_JITTER]`, modeling run-to-run
/// drift of the physical noise environment.
fn jitter_factor(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(1.0 - RATE_JITTER..=1.0 + RATE_JITTER)
}

fn jittered_coeffs(coeffs: (f64, f64, f64), seed: u64) -> (f64, f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(child_seed(seed, &["jitter"]));
    (
        coeffs.0 * jitter_factor(&mut rng),
        coeffs.1 * jitter_factor(&mut rng),
        coeffs.2 * jitter_factor(&mut rng),
    )
}

fn jittered_l_params(params: &LParams, seed: u64) -> LParams {
    let mut rng = ChaCha8Rng::seed_from_u64(child_seed(seed, &["jitter"]));
    let mut out = params.clone();
    for block in &mut out.blocks {
        for r in &mut block.damping_rates {
            *r *= jitter_factor(&mut rng);
        }
        for r in &mut block.dephasing_rates {
            *r *= jitter_factor(&mut rng);
        }
        block.collective_rate *= jitter_factor(&mut rng);
        block.pairwise_rate *= jitter_factor(&mut rng);
    }
    out
}

fn evaluate_exact_impl(
    instance: &QpufInstance,
    challenge: &Challenge,
    profile: Option<&BackendProfile>,
    jitter_seed: Option<u64>,
    order: TrotterOrder,
    steps: usize,
) -> Result<ExactEvaluation> {
    let n = instance.n_qubits();
    if challenge.len() != n {
        return Err(QpufError::InvalidChallenge(format!(
            "challenge has {} bits, instance {} expects {n}",
            challenge.len(),
            instance.device_id()
        )));
    }
    match instance.params() {
        QpufParams::D(base) => {
            let mut coeffs = dqpuf_noise_coeffs(challenge);
            if let Some(seed) = jitter_seed {
                coeffs = jittered_coeffs(coeffs, seed);
            }
            let logical = dqpuf::dqpuf_circuit(base, n, challenge, coeffs)?;
            evaluate_circuit(&logical, n, profile)
        }
        QpufParams::Mf {
            base,
            rounds,
            rules,
        } => {
            let mut coeffs = dqpuf_noise_coeffs(challenge);
            if let Some(seed) = jitter_seed {
                coeffs = jittered_coeffs(coeffs, seed);
            }
            let logical = mfqpuf::mfqpuf_circuit(base, *rounds, rules, n, challenge, coeffs)?;
            evaluate_circuit(&logical, n, profile)
        }
        QpufParams::L(params) => {
            let effective;
            let params = match jitter_seed {
                Some(seed) => {
                    effective = jittered_l_params(params, seed);
                    &effective
                }
                None => params,
            };
            let state = lqpuf::lqpuf_state(params, n, challenge, None, profile, &|gen, rho, t| {
                gen.evolve_trotter(rho, t, order, Some(steps))
            })?;
            let distribution = TerminalDistribution {
                slots: (0..n).collect(),
                probabilities: state.diagonal_probabilities(),
            };
            let readout = match profile {
                None => None,
                Some(p) => {
                    if n > p.n_qubits() {
                        return Err(QpufError::InvalidParameter(format!(
                            "instance needs {n} qubits, profile {} has {}",
                            p.name(),
                            p.n_qubits()
                        )));
                    }
                    let flips: Vec<f64> =
                        (0..n).map(|q| p.qubits()[q].readout_error).collect();
                    Some(ReadoutMatrix::from_flip_probabilities(flips)?)
                }
            };
            Ok(ExactEvaluation {
                state,
                distribution,
                readout,
            })
        }
    }
}

/// Runs a D/MF logical circuit, ideally or against a profile, and
/// packages the distribution plus the reduced pre-measurement state.
fn evaluate_circuit(
    logical: &Circuit,
    n: usize,
    profile: Option<&BackendProfile>,
) -> Result<ExactEvaluation> {
    match profile {
        None => {
            let initial = DensityMatrix::basis(&"0".repeat(n))?;
            let exact = run_exact(logical, &initial)?;
            let state = exact.mixed_state();
            let distribution = exact.terminal.ok_or_else(|| {
                QpufError::InvalidParameter("QPUF circuit lacks terminal measurements".into())
            })?;
            Ok(ExactEvaluation {
                state,
                distribution,
                readout: None,
            })
        }
        Some(p) => {
            let attached = attach_profile(logical, p)?;
            let width = attached.circuit.n_qubits();
            let initial = DensityMatrix::basis(&"0".repeat(width))?;
            let exact = run_exact(&attached.circuit, &initial)?;
            let state = reduce_to_response(&exact.mixed_state(), &attached.response_qubits)?;
            let distribution = exact.terminal.ok_or_else(|| {
                QpufError::InvalidParameter("QPUF circuit lacks terminal measurements".into())
            })?;
            Ok(ExactEvaluation {
                state,
                distribution,
                readout: Some(attached.readout),
            })
        }
    }
}

/// Computes the exact outcome distribution of `instance` on
/// `challenge`, optionally attached to a hardware profile.
///
/// This is the expensive half of evaluation; sample the result as many
/// times as needed via [`ExactEvaluation::sample`].
///
/// # Errors
///
/// Returns [`QpufError::InvalidChallenge`] on a width mismatch and
/// propagates circuit, routing, and evolution errors.
pub fn evaluate_exact(
    instance: &QpufInstance,
    challenge: &Challenge,
    profile: Option<&BackendProfile>,
) -> Result<ExactEvaluation> {
    evaluate_exact_impl(
        instance,
        challenge,
        profile,
        None,
        lqpuf::WINDOW_TROTTER_ORDER,
        lqpuf::WINDOW_TROTTER_STEPS,
    )
}

/// [`evaluate_exact`] with every architecture noise rate scaled by an
/// independent uniform factor in `[0.9, 1.1]` drawn from `jitter_seed`,
/// emulating run-to-run drift. Off by default in all experiment
/// protocols; enable to stress reliability.
///
/// # Errors
///
/// As [`evaluate_exact`].
pub fn evaluate_exact_jittered(
    instance: &QpufInstance,
    challenge: &Challenge,
    profile: Option<&BackendProfile>,
    jitter_seed: u64,
) -> Result<ExactEvaluation> {
    evaluate_exact_impl(
        instance,
        challenge,
        profile,
        Some(jitter_seed),
        lqpuf::WINDOW_TROTTER_ORDER,
        lqpuf::WINDOW_TROTTER_STEPS,
    )
}

/// [`evaluate_exact`] with every knob explicit: optional hardware
/// profile, optional rate jitter, and the splitting order / step count
/// used for the dissipative windows (ignored by the gate-only
/// architectures). This is the single entry point the experiment
/// harness drives.
///
/// # Errors
///
/// As [`evaluate_exact`].
pub fn evaluate_exact_configured(
    instance: &QpufInstance,
    challenge: &Challenge,
    profile: Option<&BackendProfile>,
    jitter_seed: Option<u64>,
    order: TrotterOrder,
    steps: usize,
) -> Result<ExactEvaluation> {
    if steps == 0 {
        return Err(QpufError::InvalidParameter(
            "window evolution needs at least one splitting step".into(),
        ));
    }
    evaluate_exact_impl(instance, challenge, profile, jitter_seed, order, steps)
}

/// Applies the instance's challenge-parameterised pipeline to an
/// arbitrary input state instead of the all-zeros register: the
/// completely positive trace-preserving map implied by one evaluation,
/// exposed for process tomography. Terminal measurements are excluded;
/// mid-circuit feedback is averaged over its branches.
///
/// # Errors
///
/// Returns [`QpufError::InvalidChallenge`] on a width mismatch,
/// [`QpufError::DimensionMismatch`] when `input` has the wrong register
/// size, and propagates evolution errors.
pub fn apply_as_channel(
    instance: &QpufInstance,
    challenge: &Challenge,
    input: &DensityMatrix,
) -> Result<DensityMatrix> {
    let n = instance.n_qubits();
    if challenge.len() != n {
        return Err(QpufError::InvalidChallenge(format!(
            "challenge has {} bits, instance {} expects {n}",
            challenge.len(),
            instance.device_id()
        )));
    }
    if input.n_qubits() != n {
        return Err(QpufError::DimensionMismatch(format!(
            "input state has {} qubits, instance {} expects {n}",
            input.n_qubits(),
            instance.device_id()
        )));
    }
    match instance.params() {
        QpufParams::D(base) => {
            let coeffs = dqpuf_noise_coeffs(challenge);
            let logical = dqpuf::dqpuf_circuit(base, n, challenge, coeffs)?;
            apply_circuit_prefix(&logical, input)
        }
        QpufParams::Mf {
            base,
            rounds,
            rules,
        } => {
            let coeffs = dqpuf_noise_coeffs(challenge);
            let logical = mfqpuf::mfqpuf_circuit(base, *rounds, rules, n, challenge, coeffs)?;
            apply_circuit_prefix(&logical, input)
        }
        QpufParams::L(params) => lqpuf::lqpuf_state(
            params,
            n,
            challenge,
            Some(input),
            None,
            &|gen, rho, t| {
                gen.evolve_trotter(
                    rho,
                    t,
                    lqpuf::WINDOW_TROTTER_ORDER,
                    Some(lqpuf::WINDOW_TROTTER_STEPS),
                )
            },
        ),
    }
}

/// Runs `circuit` minus its trailing measurement run on `input` and
/// averages the surviving branches back into one density matrix.
fn apply_circuit_prefix(circuit: &Circuit, input: &DensityMatrix) -> Result<DensityMatrix> {
    let ops = circuit.ops();
    let mut split = ops.len();
    while split > 0 && matches!(ops[split - 1], CircuitOp::Measure { .. }) {
        split -= 1;
    }
    let mut prefix = Circuit::new(circuit.n_qubits());
    for op in &ops[..split] {
        prefix.push(op.clone())?;
    }
    Ok(run_exact(&prefix, input)?.mixed_state())
}

/// Evaluates a challenge: exact evolution, `shots` sampled
/// measurements, majority vote. Deterministic given `(instance,
/// challenge, shots, seed)`.
///
/// # Errors
///
/// As [`evaluate_exact`].
pub fn qeval(
    instance: &QpufInstance,
    challenge: &Challenge,
    shots: u64,
    seed: u64,
) -> Result<Response> {
    evaluate_exact(instance, challenge, None)?.sample(shots, seed)
}

/// [`qeval`] against an optional hardware profile.
///
/// # Errors
///
/// As [`evaluate_exact`].
pub fn qeval_on(
    instance: &QpufInstance,
    challenge: &Challenge,
    shots: u64,
    seed: u64,
    profile: Option<&BackendProfile>,
) -> Result<Response> {
    evaluate_exact(instance, challenge, profile)?.sample(shots, seed)
}

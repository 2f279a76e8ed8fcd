//! L-QPUF: unitary blocks interleaved with Lindblad windows.
//!
//! The challenge is X-encoded into the initial state, spread by a
//! Hadamard wall and a CX chain, and then pushed through `m` blocks,
//! each a secret rotation-plus-entangling layer followed by a
//! continuous-time dissipative window `e^{Lτ}`. The window generators
//! carry per-qubit amplitude damping and dephasing, a collective-Z
//! jump, a pairwise-ZZ jump, and a weak transverse field — all with
//! instance-secret rates, so the non-unitary part of the map is itself
//! part of the device fingerprint.
//!
//! Windows are evolved with the second-order Trotter splitting by
//! default; [`lqpuf_eval_reference`] swaps in dense exponentiation of
//! the full generator for cross-validation on small registers.

use crate::circuit::exec::apply_gate;
use crate::circuit::Gate;
use crate::error::{QpufError, Result};
use crate::lindblad::{Hamiltonian, JumpOperator, LindbladGenerator, TrotterOrder};
use crate::profile::BackendProfile;
use crate::qstate::DensityMatrix;

use super::{Challenge, LParams, LindbladBlock, QpufInstance, QpufParams};

/// Trotter order used for production window evolution.
pub const WINDOW_TROTTER_ORDER: TrotterOrder = TrotterOrder::Second;
/// Trotter step count per window. The window generators are weak
/// (rates ≤ 0.05, fields ≤ 0.1); measured against dense exponentiation
/// the splitting error is ≈ 4e-6 at 10 steps, so 32 steps keep the
/// whole evaluation within the `1e-6` accuracy contract with margin.
pub const WINDOW_TROTTER_STEPS: usize = 32;

/// How a window generator is integrated over the window time.
pub(crate) type WindowEvolver<'a> =
    &'a dyn Fn(&LindbladGenerator, &DensityMatrix, f64) -> Result<DensityMatrix>;

/// Builds the dissipative-window generator of one block: per-qubit
/// lowering and dephasing jumps, a uniform collective-Z jump
/// (weights `1/√n`), a uniform pairwise-ZZ jump (weights `1/√#pairs`),
/// and the transverse-field Hamiltonian `Σ_i h_i X_i`.
pub(crate) fn window_generator(block: &LindbladBlock, n: usize) -> Result<LindbladGenerator> {
    let mut jumps = Vec::with_capacity(2 * n + 2);
    for q in 0..n {
        jumps.push(JumpOperator::lowering(q, block.damping_rates[q]));
    }
    for q in 0..n {
        jumps.push(JumpOperator::dephasing(q, block.dephasing_rates[q]));
    }
    let w = 1.0 / (n as f64).sqrt();
    jumps.push(JumpOperator::collective_z(
        block.collective_rate,
        &vec![w; n],
    ));
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    if !pairs.is_empty() {
        let pw = 1.0 / (pairs.len() as f64).sqrt();
        let weighted: Vec<(usize, usize, f64)> =
            pairs.into_iter().map(|(i, j)| (i, j, pw)).collect();
        jumps.push(JumpOperator::pairwise_zz(block.pairwise_rate, &weighted));
    }
    LindbladGenerator::new(n, Hamiltonian::LocalX(block.field.clone()), jumps)
}

/// Applies one gate to the register, followed by the profile's
/// calibration-derived decoherence on each operand when hardware noise
/// is attached.
fn apply_gate_noisy(
    rho: &mut DensityMatrix,
    n: usize,
    g: &Gate,
    profile: Option<&BackendProfile>,
) -> Result<()> {
    apply_gate(rho.matrix_mut(), n, g);
    if let Some(p) = profile {
        let d = p.durations();
        let duration = if g.is_two_qubit() { d.t2q_us } else { d.t1q_us };
        for q in g.qubits() {
            p.gate_noise(q, duration)?.apply_to_qubit(rho, q)?;
        }
    }
    Ok(())
}

/// Runs the full L pipeline on a density matrix with a pluggable
/// window integrator.
///
/// The register starts in `initial` when given (the channel view used
/// by tomography) and in the all-zeros state otherwise; the challenge
/// encoding is part of the pipeline either way.
///
/// With a profile attached, gates acquire per-operand decoherence
/// channels; the dissipative windows are the device's own dynamics and
/// evolve unchanged. Qubits map to the profile's first `n` calibrated
/// qubits without routing, since the window evolution is native to the
/// register rather than compiled to hardware gates.
pub(crate) fn lqpuf_state(
    params: &LParams,
    n: usize,
    challenge: &Challenge,
    initial: Option<&DensityMatrix>,
    profile: Option<&BackendProfile>,
    evolve: WindowEvolver<'_>,
) -> Result<DensityMatrix> {
    if challenge.len() != n {
        return Err(QpufError::InvalidChallenge(format!(
            "challenge has {} bits, register has {n}",
            challenge.len()
        )));
    }
    if let Some(p) = profile {
        if n > p.n_qubits() {
            return Err(QpufError::InvalidParameter(format!(
                "register needs {n} qubits, profile {} has {}",
                p.name(),
                p.n_qubits()
            )));
        }
    }
    let mut rho = match initial {
        Some(state) => {
            if state.n_qubits() != n {
                return Err(QpufError::DimensionMismatch(format!(
                    "initial state has {} qubits, register has {n}",
                    state.n_qubits()
                )));
            }
            state.clone()
        }
        None => DensityMatrix::basis(&"0".repeat(n))?,
    };
    for i in 0..n {
        if challenge.bit(i) == 1 {
            apply_gate_noisy(&mut rho, n, &Gate::X(i), profile)?;
        }
    }
    for q in 0..n {
        apply_gate_noisy(&mut rho, n, &Gate::H(q), profile)?;
    }
    for q in 0..n.saturating_sub(1) {
        apply_gate_noisy(&mut rho, n, &Gate::Cx(q, q + 1), profile)?;
    }
    for (k, block) in params.blocks.iter().enumerate() {
        for (q, angles) in block.rotation_angles.iter().enumerate() {
            apply_gate_noisy(&mut rho, n, &Gate::Rx(q, angles[0]), profile)?;
            apply_gate_noisy(&mut rho, n, &Gate::Ry(q, angles[1]), profile)?;
            apply_gate_noisy(&mut rho, n, &Gate::Rz(q, angles[2]), profile)?;
        }
        // Entangling pattern alternates between block parities so
        // consecutive blocks couple different neighbour pairs.
        for q in ((k % 2)..n.saturating_sub(1)).step_by(2) {
            apply_gate_noisy(&mut rho, n, &Gate::Cx(q, q + 1), profile)?;
        }
        let gen = window_generator(block, n)?;
        rho = evolve(&gen, &rho, params.window_time)?;
    }
    for (q, angles) in params.final_angles.iter().enumerate() {
        apply_gate_noisy(&mut rho, n, &Gate::Rx(q, angles[0]), profile)?;
        apply_gate_noisy(&mut rho, n, &Gate::Ry(q, angles[1]), profile)?;
        apply_gate_noisy(&mut rho, n, &Gate::Rz(q, angles[2]), profile)?;
    }
    Ok(rho)
}

fn l_params(instance: &QpufInstance) -> Result<&LParams> {
    match instance.params() {
        QpufParams::L(p) => Ok(p),
        _ => Err(QpufError::InvalidParameter(format!(
            "lqpuf evaluation expects an L instance, got {}",
            instance.arch()
        ))),
    }
}

/// Evaluates the L pipeline to the pre-measurement density matrix,
/// integrating each dissipative window by second-order Trotter
/// splitting.
///
/// # Errors
///
/// Returns [`QpufError::InvalidParameter`] for non-L instances and
/// [`QpufError::InvalidChallenge`] on a width mismatch.
pub fn lqpuf_eval(instance: &QpufInstance, challenge: &Challenge) -> Result<DensityMatrix> {
    let params = l_params(instance)?;
    lqpuf_state(params, instance.n_qubits(), challenge, None, None, &|gen, rho, t| {
        gen.evolve_trotter(rho, t, WINDOW_TROTTER_ORDER, Some(WINDOW_TROTTER_STEPS))
    })
}

/// Reference evaluation: identical pipeline, but each window is
/// integrated by dense exponentiation of the full generator. Limited
/// to small registers; used to validate the Trotter path.
///
/// # Errors
///
/// As [`lqpuf_eval`], plus the dense-evolution size guard.
pub fn lqpuf_eval_reference(
    instance: &QpufInstance,
    challenge: &Challenge,
) -> Result<DensityMatrix> {
    let params = l_params(instance)?;
    lqpuf_state(params, instance.n_qubits(), challenge, None, None, &|gen, rho, t| {
        gen.evolve_dense(rho, t)
    })
}

/// Per-qubit `(θ_y, θ_z)` rotation angles that re-prepare each qubit's
/// reduced Bloch vector direction: `θ_y = arccos(r_z / ‖r‖)` and
/// `θ_z = atan2(r_y, r_x)`. A qubit at the Bloch-ball origin maps to
/// `(0, 0)` by convention.
///
/// This is the classical re-encoding hook for running the dissipative
/// pipeline's output through unitary-only hardware.
pub fn extract_rotation_encoding(rho: &DensityMatrix) -> Vec<(f64, f64)> {
    let n = rho.n_qubits();
    (0..n)
        .map(|q| {
            let reduced = rho
                .partial_trace(&[q])
                .expect("qubit index within register");
            let m = reduced.matrix();
            let rx = 2.0 * m.get(0, 1).re;
            let ry = -2.0 * m.get(0, 1).im;
            let rz = m.get(0, 0).re - m.get(1, 1).re;
            let norm = (rx * rx + ry * ry + rz * rz).sqrt();
            if norm < 1e-12 {
                return (0.0, 0.0);
            }
            let theta_y = (rz / norm).clamp(-1.0, 1.0).acos();
            let theta_z = ry.atan2(rx);
            (theta_y, theta_z)
        })
        .collect()
}

//! MF-QPUF: measurement-feedback circuits.
//!
//! The D-QPUF front end (layers 1–2) is followed by `f` feedback
//! rounds. Each round projectively measures one register qubit
//! mid-circuit and conditions a fixed per-instance gate rule on the
//! classical outcome: outcome 1 steers the odd-indexed qubits, outcome
//! 0 the even-indexed ones (the measured qubit sits out either way).
//! The rounds replace the static layer 3; with zero rounds the circuit
//! degenerates to the D-QPUF form. Each completed round is followed by
//! the same challenge-modulated noise block as the static layers.
//!
//! Mid-circuit measurement is itself a non-unitary primitive: averaged
//! over outcomes it dephases the measured qubit exactly, and the exact
//! executor's branch ledger grows as `2^f`.

use crate::circuit::{Circuit, CircuitOp, Gate};
use crate::error::{QpufError, Result};

use super::dqpuf::{dqpuf_circuit, push_layer1, push_layer2, push_layer4, push_layer5};
use super::{
    dqpuf_noise_coeffs, push_noise_stack, BaseParams, Challenge, FeedbackRules, OutcomeOneRule,
    OutcomeZeroRule, QpufInstance, QpufParams,
};

/// Register qubit measured in feedback round `k` (1-based): the middle
/// qubit first, then successive neighbours, wrapping around.
pub(crate) fn measured_qubit(n: usize, round: usize) -> usize {
    (n / 2 + (round - 1)) % n
}

fn outcome_one_gates(rules: &FeedbackRules, n: usize, measured: usize) -> Vec<Gate> {
    (0..n)
        .filter(|&q| q % 2 == 1 && q != measured)
        .map(|q| match rules.on_one {
            OutcomeOneRule::Hadamard => Gate::H(q),
            OutcomeOneRule::PhaseRotation(theta) => Gate::Rz(q, theta),
        })
        .collect()
}

fn outcome_zero_gates(rules: &FeedbackRules, n: usize, measured: usize) -> Vec<Gate> {
    (0..n)
        .filter(|&q| q % 2 == 0 && q != measured)
        .map(|q| match rules.on_zero {
            OutcomeZeroRule::PhaseGate => Gate::S(q),
            OutcomeZeroRule::SmallX(theta) => Gate::Rx(q, theta),
            OutcomeZeroRule::SmallY(theta) => Gate::Ry(q, theta),
        })
        .collect()
}

/// Assembles the MF circuit for explicit channel strengths.
///
/// Feedback round `k` stores its outcome in classical slot `n + k − 1`,
/// keeping slots `0..n` free for the terminal readout.
pub(crate) fn mfqpuf_circuit(
    base: &BaseParams,
    rounds: usize,
    rules: &FeedbackRules,
    n: usize,
    challenge: &Challenge,
    coeffs: (f64, f64, f64),
) -> Result<Circuit> {
    if rounds == 0 {
        return dqpuf_circuit(base, n, challenge, coeffs);
    }
    let mut c = Circuit::new(n);
    push_layer1(&mut c, base)?;
    push_noise_stack(&mut c, coeffs)?;
    push_layer2(&mut c)?;
    push_noise_stack(&mut c, coeffs)?;
    for k in 1..=rounds {
        let measured = measured_qubit(n, k);
        let slot = n + (k - 1);
        c.measure(measured, slot)?;
        let one_gates = outcome_one_gates(rules, n, measured);
        if !one_gates.is_empty() {
            c.push(CircuitOp::Conditional {
                slot,
                value: 1,
                gates: one_gates,
            })?;
        }
        let zero_gates = outcome_zero_gates(rules, n, measured);
        if !zero_gates.is_empty() {
            c.push(CircuitOp::Conditional {
                slot,
                value: 0,
                gates: zero_gates,
            })?;
        }
        push_noise_stack(&mut c, coeffs)?;
    }
    push_layer4(&mut c, challenge)?;
    push_noise_stack(&mut c, coeffs)?;
    push_layer5(&mut c, base)?;
    push_noise_stack(&mut c, coeffs)?;
    c.measure_all()?;
    Ok(c)
}

/// Builds the executable MF-QPUF circuit for a challenge.
///
/// # Errors
///
/// Returns [`QpufError::InvalidParameter`] for non-MF instances and
/// [`QpufError::InvalidChallenge`] on a width mismatch.
pub fn mfqpuf_build(instance: &QpufInstance, challenge: &Challenge) -> Result<Circuit> {
    let QpufParams::Mf {
        base,
        rounds,
        rules,
    } = instance.params()
    else {
        return Err(QpufError::InvalidParameter(format!(
            "mfqpuf_build expects an MF instance, got {}",
            instance.arch()
        )));
    };
    let n = instance.n_qubits();
    if challenge.len() != n {
        return Err(QpufError::InvalidChallenge(format!(
            "challenge has {} bits, instance expects {n}",
            challenge.len()
        )));
    }
    mfqpuf_circuit(base, *rounds, rules, n, challenge, dqpuf_noise_coeffs(challenge))
}

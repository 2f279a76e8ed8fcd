//! D-QPUF: a five-layer random circuit wrapped in challenge-modulated
//! dissipative channels.
//!
//! The unitary skeleton is fixed per instance; the challenge enters
//! through the noise-channel strengths and through the parity-selected
//! entangling pattern of layer 4. After every layer the standard noise
//! block (depolarizing, phase damping, amplitude damping per qubit) is
//! applied with the challenge-derived coefficients, which is what makes
//! the end-to-end map non-unitary.

use crate::circuit::{Circuit, Gate};
use crate::error::{QpufError, Result};

use super::{push_noise_stack, BaseParams, Challenge, QpufInstance, QpufParams};

/// Challenge-derived channel strengths `(γ_amp, γ_phase, p_depol)`.
///
/// Amplitude damping grows with the number of 1-bits (excited-state
/// preparations decay), phase damping with the number of 0-bits, and
/// the depolarizing weight cycles with the challenge length modulo 5.
pub fn dqpuf_noise_coeffs(challenge: &Challenge) -> (f64, f64, f64) {
    let gamma_amp = 0.01 + 0.005 * challenge.ones() as f64;
    let gamma_phase = 0.02 + 0.003 * challenge.zeros() as f64;
    let p_depol = 0.01 + 0.002 * (challenge.len() % 5) as f64;
    (gamma_amp, gamma_phase, p_depol)
}

/// Layer 1: the per-qubit instance-secret rotations.
pub(crate) fn push_layer1(c: &mut Circuit, base: &BaseParams) -> Result<()> {
    for (q, &(axis, angle)) in base.layer1.iter().enumerate() {
        c.gate(axis.gate(q, angle))?;
    }
    Ok(())
}

/// Layer 2: CX entanglement between neighbouring pairs (0,1), (2,3), …
pub(crate) fn push_layer2(c: &mut Circuit) -> Result<()> {
    let n = c.n_qubits();
    for q in (0..n.saturating_sub(1)).step_by(2) {
        c.gate(Gate::Cx(q, q + 1))?;
    }
    Ok(())
}

/// Layer 3: the index-mod-4 gate rule — odd indices get `H` (i ≡ 1) or
/// `S` (i ≡ 3), even indices get `Rz(θ_i)` (i ≡ 0) or `Ry(θ_i)` (i ≡ 2).
pub(crate) fn push_layer3(c: &mut Circuit, base: &BaseParams) -> Result<()> {
    for q in 0..c.n_qubits() {
        let g = match q % 4 {
            1 => Gate::H(q),
            3 => Gate::S(q),
            0 => Gate::Rz(q, base.layer3_thetas[q]),
            _ => Gate::Ry(q, base.layer3_thetas[q]),
        };
        c.gate(g)?;
    }
    Ok(())
}

/// Layer 4: the parity-adaptive entangling pattern. An even number of
/// 1-bits selects the chain `0→1→…→n−1`; an odd number selects the
/// star fanned out from qubit 0.
pub(crate) fn push_layer4(c: &mut Circuit, challenge: &Challenge) -> Result<()> {
    let n = c.n_qubits();
    if challenge.ones() % 2 == 0 {
        for q in 0..n - 1 {
            c.gate(Gate::Cx(q, q + 1))?;
        }
    } else {
        for t in 1..n {
            c.gate(Gate::Cx(0, t))?;
        }
    }
    Ok(())
}

/// Layer 5: the small post-processing rotations.
pub(crate) fn push_layer5(c: &mut Circuit, base: &BaseParams) -> Result<()> {
    for (q, &(axis, angle)) in base.layer5.iter().enumerate() {
        c.gate(axis.gate(q, angle))?;
    }
    Ok(())
}

/// Assembles the D circuit for explicit channel strengths. Used by
/// [`dqpuf_build`] with the challenge-derived coefficients, by the MF
/// builder for its zero-round degenerate case, and by tests with the
/// strengths zeroed to isolate the unitary skeleton.
pub(crate) fn dqpuf_circuit(
    base: &BaseParams,
    n: usize,
    challenge: &Challenge,
    coeffs: (f64, f64, f64),
) -> Result<Circuit> {
    let mut c = Circuit::new(n);
    push_layer1(&mut c, base)?;
    push_noise_stack(&mut c, coeffs)?;
    push_layer2(&mut c)?;
    push_noise_stack(&mut c, coeffs)?;
    push_layer3(&mut c, base)?;
    push_noise_stack(&mut c, coeffs)?;
    push_layer4(&mut c, challenge)?;
    push_noise_stack(&mut c, coeffs)?;
    push_layer5(&mut c, base)?;
    push_noise_stack(&mut c, coeffs)?;
    c.measure_all()?;
    Ok(c)
}

/// Builds the executable D-QPUF circuit for a challenge.
///
/// # Errors
///
/// Returns [`QpufError::InvalidParameter`] for non-D instances and
/// [`QpufError::InvalidChallenge`] on a width mismatch.
pub fn dqpuf_build(instance: &QpufInstance, challenge: &Challenge) -> Result<Circuit> {
    let QpufParams::D(base) = instance.params() else {
        return Err(QpufError::InvalidParameter(format!(
            "dqpuf_build expects a D instance, got {}",
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
    dqpuf_circuit(base, n, challenge, dqpuf_noise_coeffs(challenge))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{run_exact, CircuitOp, NoiseKind};
    use crate::qpuf::{qgen, Arch};
    use crate::qstate::DensityMatrix;
    use approx::assert_abs_diff_eq;

    fn challenge(bits: &str) -> Challenge {
        Challenge::new(bits).unwrap()
    }

    #[test]
    fn noise_coefficients_follow_the_published_formulas() {
        let (a, p, d) = dqpuf_noise_coeffs(&challenge("1010"));
        assert_abs_diff_eq!(a, 0.02, epsilon = 1e-12);
        assert_abs_diff_eq!(p, 0.026, epsilon = 1e-12);
        assert_abs_diff_eq!(d, 0.018, epsilon = 1e-12);

        let (a, p, d) = dqpuf_noise_coeffs(&challenge("0000"));
        assert_abs_diff_eq!(a, 0.01, epsilon = 1e-12);
        assert_abs_diff_eq!(p, 0.032, epsilon = 1e-12);
        assert_abs_diff_eq!(d, 0.018, epsilon = 1e-12);

        // Length 5 wraps the depolarizing term back to its base value.
        let (_, _, d) = dqpuf_noise_coeffs(&challenge("00000"));
        assert_abs_diff_eq!(d, 0.01, epsilon = 1e-12);
    }

    #[test]
    fn builder_validates_architecture_and_width() {
        let l = qgen(Arch::L, 4, 1, 0).unwrap();
        assert!(dqpuf_build(&l, &challenge("1010")).is_err());
        let d = qgen(Arch::D, 4, 1, 0).unwrap();
        assert!(dqpuf_build(&d, &challenge("10")).is_err());
        assert!(dqpuf_build(&d, &challenge("1010")).is_ok());
    }

    #[test]
    fn circuits_are_reproducible() {
        let inst = qgen(Arch::D, 4, 9, 3).unwrap();
        let ch = challenge("0110");
        assert_eq!(
            dqpuf_build(&inst, &ch).unwrap(),
            dqpuf_build(&inst, &ch).unwrap()
        );
    }

    fn cx_pairs(c: &Circuit) -> Vec<(usize, usize)> {
        c.ops()
            .iter()
            .filter_map(|op| match op {
                CircuitOp::Gate(Gate::Cx(a, b)) => Some((*a, *b)),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn challenge_parity_selects_chain_or_star_entanglement() {
        let inst = qgen(Arch::D, 4, 9, 0).unwrap();
        // Layer 2 always contributes (0,1), (2,3); layer 4 follows.
        let even = cx_pairs(&dqpuf_build(&inst, &challenge("0110")).unwrap());
        assert_eq!(even, vec![(0, 1), (2, 3), (0, 1), (1, 2), (2, 3)]);
        let odd = cx_pairs(&dqpuf_build(&inst, &challenge("0100")).unwrap());
        assert_eq!(odd, vec![(0, 1), (2, 3), (0, 1), (0, 2), (0, 3)]);
    }

    #[test]
    fn layer3_applies_the_index_mod4_rule() {
        let inst = qgen(Arch::D, 8, 9, 0).unwrap();
        let QpufParams::D(base) = inst.params() else {
            panic!("expected D params");
        };
        let c = dqpuf_build(&inst, &challenge("00000000")).unwrap();
        // The layer-3 run sits directly after the second noise block.
        let gates: Vec<&Gate> = c
            .ops()
            .iter()
            .filter_map(|op| match op {
                CircuitOp::Gate(g) => Some(g),
                _ => None,
            })
            .collect();
        // Layer 1: 8 rotations; layer 2: 4 CX; layer 3 occupies the
        // next 8 gates.
        let layer3 = &gates[12..20];
        for (i, g) in layer3.iter().enumerate() {
            match i % 4 {
                1 => assert!(matches!(g, Gate::H(q) if *q == i)),
                3 => assert!(matches!(g, Gate::S(q) if *q == i)),
                0 => assert!(
                    matches!(g, Gate::Rz(q, t) if *q == i && *t == base.layer3_thetas[i])
                ),
                _ => assert!(
                    matches!(g, Gate::Ry(q, t) if *q == i && *t == base.layer3_thetas[i])
                ),
            }
        }
    }

    #[test]
    fn noise_blocks_apply_depolarizing_then_phase_then_amplitude() {
        let inst = qgen(Arch::D, 2, 9, 0).unwrap();
        let c = dqpuf_build(&inst, &challenge("11")).unwrap();
        let (a, p, d) = dqpuf_noise_coeffs(&challenge("11"));
        // First noise block follows the two layer-1 gates.
        let block: Vec<(NoiseKind, f64, usize)> = c.ops()[2..8]
            .iter()
            .map(|op| match op {
                CircuitOp::Noise {
                    kind,
                    strength,
                    qubit,
                } => (*kind, *strength, *qubit),
                other => panic!("expected noise op, found {other:?}"),
            })
            .collect();
        assert_eq!(
            block,
            vec![
                (NoiseKind::Depolarizing, d, 0),
                (NoiseKind::PhaseDamping, p, 0),
                (NoiseKind::AmplitudeDamping, a, 0),
                (NoiseKind::Depolarizing, d, 1),
                (NoiseKind::PhaseDamping, p, 1),
                (NoiseKind::AmplitudeDamping, a, 1),
            ]
        );
    }

    #[test]
    fn zeroed_channel_strengths_leave_the_map_unitary() {
        let inst = qgen(Arch::D, 3, 9, 1).unwrap();
        let QpufParams::D(base) = inst.params() else {
            panic!("expected D params");
        };
        let ch = challenge("011");
        let c = dqpuf_circuit(base, 3, &ch, (0.0, 0.0, 0.0)).unwrap();
        let run = run_exact(&c, &DensityMatrix::basis("000").unwrap()).unwrap();
        assert_eq!(run.branches.len(), 1, "no mid-circuit measurements");
        assert_abs_diff_eq!(run.mixed_state().purity(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn default_channel_strengths_make_the_map_non_unitary() {
        let inst = qgen(Arch::D, 3, 9, 1).unwrap();
        let ch = challenge("011");
        let c = dqpuf_build(&inst, &ch).unwrap();
        let run = run_exact(&c, &DensityMatrix::basis("000").unwrap()).unwrap();
        assert!(
            run.mixed_state().purity() <= 1.0 - 1e-4,
            "purity {} betrays an effectively unitary map",
            run.mixed_state().purity()
        );
    }
}

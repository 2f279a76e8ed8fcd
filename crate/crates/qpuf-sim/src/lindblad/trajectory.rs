//! Monte-Carlo wave-function (quantum-trajectory) unraveling of a
//! Lindblad generator.
//!
//! Each trajectory evolves a pure state: per step of size `Δ`, jump `j`
//! fires with probability `p_j = Δ·⟨ψ|L_j†L_j|ψ⟩` (projecting onto
//! `L_j|ψ⟩` renormalized); otherwise the state follows the non-Hermitian
//! drift `exp(−i·H_eff·Δ)` with `H_eff = H − (i/2)·Σ L_j†L_j`,
//! renormalized. Averaging `|ψ⟩⟨ψ|` over trajectories converges to the
//! density-matrix solution at `O(Δ)` bias and `O(1/√N)` sampling noise.
//!
//! Trajectories are independent ChaCha streams of one seed, so results
//! are reproducible and independent of evaluation order.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{QpufError, Result};
use crate::linalg::{c64, ComplexMatrix};
use crate::lindblad::LindbladGenerator;
use crate::qstate::{DensityMatrix, PureState};

/// Per-step jump probability above which the first-order unraveling is
/// no longer trustworthy.
const MAX_STEP_JUMP_PROBABILITY: f64 = 0.1;

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// Averages `n_trajectories` Monte-Carlo wave-function runs of `gen`
/// from `psi0` over time `t` with `steps` uniform steps.
///
/// # Errors
///
/// Returns [`QpufError::DimensionMismatch`] on register mismatch,
/// [`QpufError::InvalidParameter`] for non-positive step or trajectory
/// counts or negative time, and [`QpufError::StepTooCoarse`] if the
/// total jump probability in any step exceeds 0.1 (increase `steps`).
pub fn trajectories(
    gen: &LindbladGenerator,
    psi0: &PureState,
    t: f64,
    steps: usize,
    n_trajectories: usize,
    seed: u64,
) -> Result<DensityMatrix> {
    if psi0.n_qubits() != gen.n_qubits() {
        return Err(QpufError::DimensionMismatch(format!(
            "generator acts on {} qubits, state has {}",
            gen.n_qubits(),
            psi0.n_qubits()
        )));
    }
    if t < 0.0 || !t.is_finite() {
        return Err(QpufError::InvalidParameter(format!(
            "evolution time must be non-negative, got {t}"
        )));
    }
    if steps == 0 || n_trajectories == 0 {
        return Err(QpufError::InvalidParameter(
            "steps and trajectory count must be positive".into(),
        ));
    }
    let n = gen.n_qubits();
    let dim = gen.dim();
    let dt = t / steps as f64;

    let jumps = gen.jump_matrices();
    // Drift propagator exp(−i·H_eff·Δ), H_eff = H − (i/2)·Σ L†L.
    let mut drift_exponent = gen.hamiltonian_matrix().scale(c64(0.0, -dt));
    for l in &jumps {
        let ll = l.adjoint().matmul(l);
        drift_exponent = drift_exponent.sub(&ll.scale(c64(dt / 2.0, 0.0)));
    }
    let drift = drift_exponent.expm();

    let mut sum = ComplexMatrix::zeros(dim, dim);
    for traj in 0..n_trajectories {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(traj as u64);
        let mut psi: Vec<Complex64> = psi0.amplitudes().to_vec();
        for _ in 0..steps {
            let candidates: Vec<Vec<Complex64>> =
                jumps.iter().map(|l| l.mul_vec(&psi)).collect();
            let probs: Vec<f64> = candidates
                .iter()
                .map(|v| dt * v.iter().map(|a| a.norm_sqr()).sum::<f64>())
                .collect();
            let p_total: f64 = probs.iter().sum();
            if p_total > MAX_STEP_JUMP_PROBABILITY {
                return Err(QpufError::StepTooCoarse { prob: p_total });
            }
            let u: f64 = rng.gen();
            let mut jumped = false;
            let mut acc = 0.0;
            for (v, &p) in candidates.iter().zip(&probs) {
                acc += p;
                if u < acc {
                    let nv = norm(v);
                    psi = v.iter().map(|a| a / nv).collect();
                    jumped = true;
                    break;
                }
            }
            if !jumped {
                let v = drift.mul_vec(&psi);
                let nv = norm(&v);
                psi = v.iter().map(|a| a / nv).collect();
            }
        }
        for (i, a) in psi.iter().enumerate() {
            for (j, b) in psi.iter().enumerate() {
                let cur = sum.get(i, j);
                sum.set(i, j, cur + a * b.conj());
            }
        }
    }
    let avg = sum.scale(c64(1.0 / n_trajectories as f64, 0.0));
    let sym = avg.add(&avg.adjoint()).scale(c64(0.5, 0.0));
    Ok(DensityMatrix::new_unchecked(n, sym))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::{Hamiltonian, JumpOperator};

    #[test]
    fn damping_trajectories_match_the_exponential_decay_law() {
        let gen = LindbladGenerator::new(
            1,
            Hamiltonian::Zero,
            vec![JumpOperator::lowering(0, 0.5)],
        )
        .expect("generator");
        let psi0 = PureState::basis("1").expect("state");
        let rho = trajectories(&gen, &psi0, 1.0, 200, 2000, 7).expect("trajectories");
        // Survival of the excited state: e^{-γt} = e^{-0.5}.
        let want = 0.6065306597126334;
        let got = rho.qubit_excited_probability(0);
        assert!(
            (got - want).abs() < 0.04,
            "excited population {got} too far from {want}"
        );
    }

    #[test]
    fn trajectory_average_approaches_the_dense_solution() {
        let gen = LindbladGenerator::new(
            1,
            Hamiltonian::LocalX(vec![0.9]),
            vec![
                JumpOperator::lowering(0, 0.6),
                JumpOperator::dephasing(0, 0.4),
            ],
        )
        .expect("generator");
        let psi0 = PureState::basis("1").expect("state");
        let want = gen
            .evolve_dense(&psi0.to_density(), 0.8)
            .expect("dense");
        let got = trajectories(&gen, &psi0, 0.8, 400, 2000, 11).expect("trajectories");
        assert!(
            got.matrix().max_abs_diff(want.matrix()) < 0.05,
            "trajectory average too far from dense solution"
        );
        got.validate().expect("valid state");
    }

    #[test]
    fn fixed_seed_is_reproducible_and_seeds_are_independent() {
        let gen = LindbladGenerator::new(
            1,
            Hamiltonian::Zero,
            vec![JumpOperator::lowering(0, 0.5)],
        )
        .expect("generator");
        let psi0 = PureState::basis("1").expect("state");
        let a = trajectories(&gen, &psi0, 1.0, 100, 50, 3).expect("run a");
        let b = trajectories(&gen, &psi0, 1.0, 100, 50, 3).expect("run b");
        assert_eq!(a.matrix().max_abs_diff(b.matrix()), 0.0);
        let c = trajectories(&gen, &psi0, 1.0, 100, 50, 4).expect("run c");
        assert!(a.matrix().max_abs_diff(c.matrix()) > 0.0);
    }

    #[test]
    fn coarse_steps_are_rejected() {
        let gen = LindbladGenerator::new(
            1,
            Hamiltonian::Zero,
            vec![JumpOperator::lowering(0, 50.0)],
        )
        .expect("generator");
        let psi0 = PureState::basis("1").expect("state");
        let err = trajectories(&gen, &psi0, 1.0, 100, 10, 1).unwrap_err();
        match err {
            QpufError::StepTooCoarse { prob } => {
                assert!((prob - 0.5).abs() < 1e-12, "unexpected probability {prob}")
            }
            other => panic!("expected StepTooCoarse, got {other:?}"),
        }
    }

    #[test]
    fn zero_jump_generator_is_unitary_evolution() {
        let gen = LindbladGenerator::new(1, Hamiltonian::LocalX(vec![0.7]), vec![])
            .expect("generator");
        let psi0 = PureState::basis("0").expect("state");
        let got = trajectories(&gen, &psi0, 1.0, 50, 3, 9).expect("trajectories");
        let want = gen.evolve_dense(&psi0.to_density(), 1.0).expect("dense");
        // No stochastic element remains: every trajectory is identical.
        assert!(got.matrix().max_abs_diff(want.matrix()) < 1e-6);
        assert!((got.purity() - 1.0).abs() < 1e-9);
    }
}

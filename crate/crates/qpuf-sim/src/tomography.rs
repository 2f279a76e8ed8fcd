//! State and process tomography at small register sizes, plus the
//! parameter-counting and sample-complexity estimates that quantify how
//! expensive a channel is to learn.
//!
//! State tomography measures every non-identity Pauli string, inverts
//! the expansion `ρ = (1/d)·Σ_P ⟨P⟩·P` linearly, and repairs the
//! estimate by eigenvalue clipping and trace renormalization. Process
//! tomography prepares the informationally complete product inputs
//! `{|0⟩, |1⟩, |+⟩, |+i⟩}^⊗n`, tomographs each output, assembles the
//! Choi matrix by expanding matrix units in that input basis, and
//! projects onto the completely positive, trace-preserving set by
//! alternating projections.
//!
//! Both reconstructions accept an exact-statistics mode (expectation
//! values read directly from the state) used to check the estimator
//! separately from shot noise, and a sampled mode with seeded binomial
//! shot noise per measurement setting.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::channel::apply_choi_matrix;
use crate::error::{QpufError, Result};
use crate::linalg::{c64, ComplexMatrix};
use crate::qstate::DensityMatrix;
use crate::seeds::child_seed;

/// Largest register accepted by state tomography (4ⁿ−1 settings).
pub const STATE_QUBIT_LIMIT: usize = 3;
/// Largest register accepted by process tomography (4ⁿ inputs, each
/// state-tomographed).
pub const PROCESS_QUBIT_LIMIT: usize = 2;

/// Shot statistics per measurement setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistics {
    /// Expectation values read exactly from the density matrix — an
    /// infinite-shot hook that isolates estimator correctness.
    Exact,
    /// Each setting estimated from this many binomially sampled shots.
    Shots(u64),
}

/// Channel families with distinct learning costs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    /// Reversible evolution: `d² − 1` real parameters.
    Unitary,
    /// General completely positive trace-preserving map:
    /// `d⁴ − d²` real parameters.
    Cptp,
}

/// Options bundle for a tomography run against a black-box target.
#[derive(Debug, Clone, Copy)]
pub struct TomographyJob {
    pub n_qubits: usize,
    pub statistics: Statistics,
    pub seed: u64,
}

impl TomographyJob {
    /// Runs state tomography against a black-box preparation.
    ///
    /// # Errors
    ///
    /// See [`state_tomography`].
    pub fn run_state<F>(&self, prepare: F) -> Result<DensityMatrix>
    where
        F: FnMut() -> Result<DensityMatrix>,
    {
        state_tomography(prepare, self.statistics, self.seed)
    }

    /// Runs process tomography against a black-box channel.
    ///
    /// # Errors
    ///
    /// See [`process_tomography`].
    pub fn run_process<F>(&self, channel: F) -> Result<ComplexMatrix>
    where
        F: FnMut(&DensityMatrix) -> Result<DensityMatrix>,
    {
        process_tomography(channel, self.n_qubits, self.statistics, self.seed)
    }
}

/// Number of real parameters identifying a channel of the given kind on
/// `n_qubits` qubits: `d² − 1` for unitaries, `d⁴ − d²` for general
/// CPTP maps (`d = 2ⁿ`).
pub fn parameter_count(kind: ChannelKind, n_qubits: usize) -> u64 {
    let d = 1u64 << n_qubits;
    let d2 = d * d;
    match kind {
        ChannelKind::Unitary => d2 - 1,
        ChannelKind::Cptp => d2 * d2 - d2,
    }
}

/// Experiments needed to learn `parameters` to accuracy `epsilon`:
/// `ceil(C·P/ε²)`.
///
/// # Errors
///
/// Returns [`QpufError::InvalidParameter`] unless `epsilon > 0` and
/// `constant > 0`.
pub fn sample_complexity(parameters: u64, epsilon: f64, constant: f64) -> Result<u64> {
    if epsilon <= 0.0 || !epsilon.is_finite() {
        return Err(QpufError::InvalidParameter(format!(
            "accuracy target must be positive, got {epsilon}"
        )));
    }
    if constant <= 0.0 || !constant.is_finite() {
        return Err(QpufError::InvalidParameter(format!(
            "method constant must be positive, got {constant}"
        )));
    }
    Ok((constant * parameters as f64 / (epsilon * epsilon)).ceil() as u64)
}

/// The 2×2 Pauli matrix for axis 0..4 = I, X, Y, Z.
fn pauli(axis: usize) -> ComplexMatrix {
    match axis {
        0 => ComplexMatrix::identity(2),
        1 => ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]),
        2 => ComplexMatrix::new(2, 2, vec![c64(0.0, 0.0), c64(0.0, -1.0), c64(0.0, 1.0), c64(0.0, 0.0)]),
        3 => ComplexMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]]),
        _ => unreachable!("Pauli axis out of range"),
    }
}

/// Tensor product of single-qubit Paulis, qubit 0 as the leading factor.
fn pauli_string(axes: &[usize]) -> ComplexMatrix {
    let mut m = pauli(axes[0]);
    for &a in &axes[1..] {
        m = m.kron(&pauli(a));
    }
    m
}

/// All base-4 digit strings of length `n` except all-zero (identity),
/// in counting order with qubit 0 as the most significant digit.
fn pauli_settings(n: usize) -> Vec<Vec<usize>> {
    let total = 4usize.pow(n as u32);
    (1..total)
        .map(|mut idx| {
            let mut axes = vec![0; n];
            for q in (0..n).rev() {
                axes[q] = idx % 4;
                idx /= 4;
            }
            axes
        })
        .collect()
}

/// Measures `⟨P⟩` either exactly or from binomial shot noise on the
/// ±1-outcome distribution.
fn estimate_expectation(
    rho: &DensityMatrix,
    observable: &ComplexMatrix,
    statistics: Statistics,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let exact = observable.matmul(rho.matrix()).trace().re;
    match statistics {
        Statistics::Exact => exact,
        Statistics::Shots(shots) => {
            let p_plus = ((1.0 + exact) / 2.0).clamp(0.0, 1.0);
            let dist = Binomial::new(shots, p_plus).expect("valid binomial");
            let k = dist.sample(rng);
            2.0 * (k as f64 / shots as f64) - 1.0
        }
    }
}

/// Clips negative eigenvalues to zero and renormalizes the trace,
/// returning a valid density matrix close to the Hermitian input.
fn repair_state(n_qubits: usize, estimate: &ComplexMatrix) -> DensityMatrix {
    let herm = estimate.add(&estimate.adjoint()).scale(c64(0.5, 0.0));
    let (vals, vecs) = herm.hermitian_eigen();
    let clipped: Vec<f64> = vals.iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if total <= 0.0 {
        return DensityMatrix::maximally_mixed(n_qubits);
    }
    let dim = herm.rows();
    let scaled = ComplexMatrix::from_fn(dim, dim, |i, j| {
        let mut acc = c64(0.0, 0.0);
        for k in 0..dim {
            acc += vecs.get(i, k) * (clipped[k] / total) * vecs.get(j, k).conj();
        }
        acc
    });
    DensityMatrix::new_unchecked(n_qubits, scaled)
}

/// Reconstructs a density matrix from Pauli expectation values of a
/// black-box preparation (one fresh preparation per setting).
///
/// # Errors
///
/// Returns [`QpufError::TooManyQubits`] beyond [`STATE_QUBIT_LIMIT`],
/// [`QpufError::InvalidParameter`] for zero shots, and propagates
/// preparation failures.
pub fn state_tomography<F>(
    mut prepare: F,
    statistics: Statistics,
    seed: u64,
) -> Result<DensityMatrix>
where
    F: FnMut() -> Result<DensityMatrix>,
{
    if let Statistics::Shots(0) = statistics {
        return Err(QpufError::InvalidParameter("shots must be positive".into()));
    }
    let first = prepare()?;
    let n = first.n_qubits();
    if n > STATE_QUBIT_LIMIT {
        return Err(QpufError::TooManyQubits {
            requested: n,
            limit: STATE_QUBIT_LIMIT,
        });
    }
    let dim = first.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // ρ = (1/d)·(I + Σ_{P≠I} ⟨P⟩·P); ⟨I⟩ = 1 needs no measurement.
    let mut estimate = ComplexMatrix::identity(dim);
    let mut state = Some(first);
    for axes in pauli_settings(n) {
        let rho = match state.take() {
            Some(s) => s,
            None => prepare()?,
        };
        let observable = pauli_string(&axes);
        let expectation = estimate_expectation(&rho, &observable, statistics, &mut rng);
        estimate = estimate.add(&observable.scale(c64(expectation, 0.0)));
    }
    estimate = estimate.scale(c64(1.0 / dim as f64, 0.0));
    Ok(repair_state(n, &estimate))
}

/// Trace over the output factor (most significant) of a `d²×d²` Choi
/// matrix, leaving the `d×d` input marginal.
fn trace_out_output(j: &ComplexMatrix, d: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(d, d, |b, dd| {
        let mut acc = c64(0.0, 0.0);
        for a in 0..d {
            acc += j.get(a * d + b, a * d + dd);
        }
        acc
    })
}

/// Orthogonal projection onto the trace-preserving affine subspace
/// `Tr_out(J) = I`.
fn project_trace_preserving(j: &ComplexMatrix, d: usize) -> ComplexMatrix {
    let marginal = trace_out_output(j, d);
    ComplexMatrix::from_fn(d * d, d * d, |row, col| {
        let (a, b) = (row / d, row % d);
        let (c, dd) = (col / d, col % d);
        let mut v = j.get(row, col);
        if a == c {
            let excess = marginal.get(b, dd) - if b == dd { c64(1.0, 0.0) } else { c64(0.0, 0.0) };
            v -= excess / d as f64;
        }
        v
    })
}

/// Projection onto the positive semidefinite cone (eigenvalue clipping).
fn project_psd(j: &ComplexMatrix) -> ComplexMatrix {
    let herm = j.add(&j.adjoint()).scale(c64(0.5, 0.0));
    let (vals, vecs) = herm.hermitian_eigen();
    let dim = herm.rows();
    ComplexMatrix::from_fn(dim, dim, |r, c| {
        let mut acc = c64(0.0, 0.0);
        for k in 0..dim {
            let v = vals[k].max(0.0);
            if v > 0.0 {
                acc += vecs.get(r, k) * v * vecs.get(c, k).conj();
            }
        }
        acc
    })
}

/// Single-qubit preparation states `|0⟩, |1⟩, |+⟩, |+i⟩` — together
/// informationally complete.
fn input_state_1q(kind: usize) -> ComplexMatrix {
    match kind {
        0 => ComplexMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, 0.0]]),
        1 => ComplexMatrix::from_real_rows(&[&[0.0, 0.0], &[0.0, 1.0]]),
        2 => ComplexMatrix::from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]]),
        3 => ComplexMatrix::new(
            2,
            2,
            vec![c64(0.5, 0.0), c64(0.0, -0.5), c64(0.0, 0.5), c64(0.5, 0.0)],
        ),
        _ => unreachable!("input state kind out of range"),
    }
}

/// Expansion of the single-qubit matrix unit `|b⟩⟨d|` in the four
/// preparation states, indexed `[b][d][state]`.
fn matrix_unit_coefficients() -> [[[Complex64; 4]; 2]; 2] {
    let z = c64(0.0, 0.0);
    let one = c64(1.0, 0.0);
    [
        [
            // |0⟩⟨0| = S0
            [one, z, z, z],
            // |0⟩⟨1| = −(1+i)/2·(S0+S1) + S2 + i·S3
            [c64(-0.5, -0.5), c64(-0.5, -0.5), one, c64(0.0, 1.0)],
        ],
        [
            // |1⟩⟨0| = −(1−i)/2·(S0+S1) + S2 − i·S3
            [c64(-0.5, 0.5), c64(-0.5, 0.5), one, c64(0.0, -1.0)],
            // |1⟩⟨1| = S1
            [z, one, z, z],
        ],
    ]
}

/// Reconstructs the Choi matrix of a black-box channel from tomographed
/// outputs on the informationally complete product-input set, then
/// projects onto the CPTP set by alternating PSD / trace-preserving
/// projections (≤ 200 rounds, stopping at 1e-9 movement).
///
/// # Errors
///
/// Returns [`QpufError::TooManyQubits`] beyond [`PROCESS_QUBIT_LIMIT`],
/// and propagates channel and tomography failures.
pub fn process_tomography<F>(
    mut channel: F,
    n_qubits: usize,
    statistics: Statistics,
    seed: u64,
) -> Result<ComplexMatrix>
where
    F: FnMut(&DensityMatrix) -> Result<DensityMatrix>,
{
    if n_qubits > PROCESS_QUBIT_LIMIT {
        return Err(QpufError::TooManyQubits {
            requested: n_qubits,
            limit: PROCESS_QUBIT_LIMIT,
        });
    }
    if n_qubits == 0 {
        return Err(QpufError::InvalidParameter("channel must act on at least one qubit".into()));
    }
    let d = 1usize << n_qubits;
    let n_inputs = 4usize.pow(n_qubits as u32);

    // Tomograph the channel output for every product input.
    let mut outputs: Vec<ComplexMatrix> = Vec::with_capacity(n_inputs);
    for t in 0..n_inputs {
        let mut input = ComplexMatrix::identity(1);
        let mut digits = t;
        let mut kinds = vec![0usize; n_qubits];
        for q in (0..n_qubits).rev() {
            kinds[q] = digits % 4;
            digits /= 4;
        }
        for &kind in &kinds {
            input = input.kron(&input_state_1q(kind));
        }
        let input_state = DensityMatrix::new_unchecked(n_qubits, input);
        let reconstructed = state_tomography(
            || channel(&input_state),
            statistics,
            child_seed(seed, &["input", &t.to_string()]),
        )?;
        outputs.push(reconstructed.matrix().clone());
    }

    // Assemble J[(a,b),(c,dd)] = Λ(|b⟩⟨dd|)[a,c] by expanding matrix
    // units in the preparation basis (coefficients multiply per qubit).
    let coeffs = matrix_unit_coefficients();
    let mut j = ComplexMatrix::zeros(d * d, d * d);
    for b in 0..d {
        for dd in 0..d {
            let mut lam = ComplexMatrix::zeros(d, d);
            for (t, output) in outputs.iter().enumerate() {
                let mut weight = c64(1.0, 0.0);
                let mut digits = t;
                for q in (0..n_qubits).rev() {
                    let kind = digits % 4;
                    digits /= 4;
                    let bq = (b >> (n_qubits - 1 - q)) & 1;
                    let dq = (dd >> (n_qubits - 1 - q)) & 1;
                    weight *= coeffs[bq][dq][kind];
                }
                if weight != c64(0.0, 0.0) {
                    lam = lam.add(&output.scale(weight));
                }
            }
            for a in 0..d {
                for c in 0..d {
                    j.set(a * d + b, c * d + dd, lam.get(a, c));
                }
            }
        }
    }

    // Alternating projections onto PSD ∩ trace-preserving.
    for _ in 0..200 {
        let next = project_trace_preserving(&project_psd(&j), d);
        let movement = next.max_abs_diff(&j);
        j = next;
        if movement < 1e-9 {
            break;
        }
    }
    Ok(j)
}

/// Extracts the affine Bloch-ball action `r ↦ M·r + t` of a
/// single-qubit channel from its Choi matrix: twelve real numbers, the
/// full parameter content of a general qubit channel.
///
/// # Errors
///
/// Returns [`QpufError::DimensionMismatch`] unless the Choi matrix is
/// 4×4 (single qubit).
pub fn affine_bloch_form(choi: &ComplexMatrix) -> Result<([[f64; 3]; 3], [f64; 3])> {
    if choi.rows() != 4 || choi.cols() != 4 {
        return Err(QpufError::DimensionMismatch(format!(
            "affine Bloch form requires a 4x4 single-qubit Choi matrix, got {}x{}",
            choi.rows(),
            choi.cols()
        )));
    }
    let images: Vec<ComplexMatrix> = (0..4)
        .map(|axis| apply_choi_matrix(choi, &pauli(axis)))
        .collect();
    let mut m = [[0.0; 3]; 3];
    let mut t = [0.0; 3];
    for i in 0..3 {
        let sigma_i = pauli(i + 1);
        t[i] = 0.5 * sigma_i.matmul(&images[0]).trace().re;
        for j in 0..3 {
            m[i][j] = 0.5 * sigma_i.matmul(&images[j + 1]).trace().re;
        }
    }
    Ok((m, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::KrausChannel;
    use crate::circuit::Gate;

    fn frobenius_err(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
        a.sub(b).frobenius_norm()
    }

    #[test]
    fn parameter_counts_match_the_learnability_analysis() {
        assert_eq!(parameter_count(ChannelKind::Unitary, 1), 3);
        assert_eq!(parameter_count(ChannelKind::Cptp, 1), 12);
        assert_eq!(parameter_count(ChannelKind::Cptp, 2), 240);
        // CPTP cost is exactly d² times the unitary cost.
        for n in 1..=3 {
            let d2 = 1u64 << (2 * n);
            assert_eq!(
                parameter_count(ChannelKind::Cptp, n),
                d2 * parameter_count(ChannelKind::Unitary, n)
            );
        }
    }

    #[test]
    fn sample_complexity_frozen_values_and_scaling() {
        assert_eq!(sample_complexity(12, 0.1, 1.0).expect("valid"), 1200);
        assert_eq!(sample_complexity(3, 0.1, 1.0).expect("valid"), 300);
        let base = sample_complexity(12, 0.2, 2.0).expect("valid");
        let halved = sample_complexity(12, 0.1, 2.0).expect("valid");
        assert_eq!(halved, 4 * base);
        assert!(sample_complexity(12, 0.0, 1.0).is_err());
        assert!(sample_complexity(12, 0.1, -1.0).is_err());
    }

    #[test]
    fn exact_state_tomography_inverts_exactly() {
        let targets = vec![
            DensityMatrix::basis("0").expect("state"),
            DensityMatrix::maximally_mixed(1),
            DensityMatrix::new(ComplexMatrix::new(
                2,
                2,
                vec![c64(0.7, 0.0), c64(0.1, 0.25), c64(0.1, -0.25), c64(0.3, 0.0)],
            ))
            .expect("state"),
            DensityMatrix::basis("10").expect("state"),
        ];
        for target in targets {
            let got = state_tomography(|| Ok(target.clone()), Statistics::Exact, 0)
                .expect("tomography");
            assert!(got.matrix().max_abs_diff(target.matrix()) < 1e-10);
        }
    }

    #[test]
    fn sampled_state_tomography_error_shrinks_as_root_shots() {
        let target = DensityMatrix::new(ComplexMatrix::new(
            2,
            2,
            vec![c64(0.65, 0.0), c64(0.2, 0.15), c64(0.2, -0.15), c64(0.35, 0.0)],
        ))
        .expect("state");
        let shot_grid = [1_000u64, 4_000, 16_000];
        let mut medians = Vec::new();
        for &shots in &shot_grid {
            let mut errs: Vec<f64> = (0..21)
                .map(|trial| {
                    let got = state_tomography(
                        || Ok(target.clone()),
                        Statistics::Shots(shots),
                        1000 + trial,
                    )
                    .expect("tomography");
                    frobenius_err(got.matrix(), target.matrix())
                })
                .collect();
            errs.sort_by(f64::total_cmp);
            medians.push(errs[10]);
        }
        let slope = {
            let xs: Vec<f64> = shot_grid.iter().map(|&s| (s as f64).ln()).collect();
            let ys: Vec<f64> = medians.iter().map(|&e| e.ln()).collect();
            let xm = xs.iter().sum::<f64>() / 3.0;
            let ym = ys.iter().sum::<f64>() / 3.0;
            let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
            let den: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
            num / den
        };
        assert!(
            (-0.65..=-0.35).contains(&slope),
            "shot-noise scaling slope {slope} not ≈ −1/2; medians {medians:?}"
        );
    }

    #[test]
    fn sampled_tomography_is_seed_deterministic() {
        let target = DensityMatrix::basis("1").expect("state");
        let a = state_tomography(|| Ok(target.clone()), Statistics::Shots(500), 42)
            .expect("tomography");
        let b = state_tomography(|| Ok(target.clone()), Statistics::Shots(500), 42)
            .expect("tomography");
        assert_eq!(a.matrix().max_abs_diff(b.matrix()), 0.0);
    }

    #[test]
    fn state_tomography_guards_register_size() {
        let err = state_tomography(
            || Ok(DensityMatrix::maximally_mixed(4)),
            Statistics::Exact,
            0,
        )
        .unwrap_err();
        assert!(matches!(err, QpufError::TooManyQubits { requested: 4, limit: 3 }));
    }

    #[test]
    fn exact_process_tomography_recovers_every_channel_constructor() {
        let h = Gate::H(0).matrix();
        let channels = vec![
            KrausChannel::identity(1),
            KrausChannel::amplitude_damping(0.3).expect("channel"),
            KrausChannel::phase_damping(0.2).expect("channel"),
            KrausChannel::depolarizing(0.3).expect("channel"),
            KrausChannel::from_unitary(h).expect("channel"),
        ];
        for ch in channels {
            let want = ch.choi();
            let got = process_tomography(|rho| ch.apply(rho), 1, Statistics::Exact, 0)
                .expect("tomography");
            assert!(
                got.max_abs_diff(&want) < 1e-8,
                "reconstruction error {} too large",
                got.max_abs_diff(&want)
            );
        }
    }

    #[test]
    fn exact_process_tomography_handles_two_qubit_channels() {
        let ch = KrausChannel::amplitude_damping(0.2)
            .expect("channel")
            .tensor(&KrausChannel::phase_damping(0.1).expect("channel"));
        let want = ch.choi();
        let got = process_tomography(|rho| ch.apply(rho), 2, Statistics::Exact, 0)
            .expect("tomography");
        assert!(got.max_abs_diff(&want) < 1e-7);
    }

    #[test]
    fn process_tomography_guards_register_size() {
        let err = process_tomography(
            |rho| Ok(rho.clone()),
            3,
            Statistics::Exact,
            0,
        )
        .unwrap_err();
        assert!(matches!(err, QpufError::TooManyQubits { requested: 3, limit: 2 }));
    }

    #[test]
    fn sampled_process_tomography_output_is_nearly_cptp() {
        let ch = KrausChannel::amplitude_damping(0.35).expect("channel");
        let j = process_tomography(|rho| ch.apply(rho), 1, Statistics::Shots(2000), 5)
            .expect("tomography");
        // PSD within projection tolerance.
        let herm = j.add(&j.adjoint()).scale(c64(0.5, 0.0));
        let (vals, _) = herm.hermitian_eigen();
        assert!(vals[0] > -1e-7, "most negative eigenvalue {}", vals[0]);
        // Trace-preserving within projection tolerance.
        let marginal = trace_out_output(&j, 2);
        assert!(marginal.max_abs_diff(&ComplexMatrix::identity(2)) < 1e-7);
    }

    #[test]
    fn twelve_parameter_channel_is_harder_to_learn_than_three() {
        // Same estimator, same shot budget; the generic (12-parameter)
        // noisy channel reconstructs with more error than the unitary
        // (3-parameter) target, whose extremal rank-1 Choi matrix the
        // PSD projection recovers especially well.
        let noisy = KrausChannel::amplitude_damping(0.3)
            .expect("channel")
            .compose(&KrausChannel::phase_damping(0.2).expect("channel"))
            .expect("compose")
            .compose(&KrausChannel::depolarizing(0.15).expect("channel"))
            .expect("compose");
        let unitary =
            KrausChannel::from_unitary(Gate::Rx(0, 0.7).matrix())
                .expect("channel");
        let mut errs_noisy = Vec::new();
        let mut errs_unitary = Vec::new();
        for trial in 0..20 {
            let jn = process_tomography(
                |rho| noisy.apply(rho),
                1,
                Statistics::Shots(800),
                9000 + trial,
            )
            .expect("tomography");
            errs_noisy.push(frobenius_err(&jn, &noisy.choi()));
            let ju = process_tomography(
                |rho| unitary.apply(rho),
                1,
                Statistics::Shots(800),
                9000 + trial,
            )
            .expect("tomography");
            errs_unitary.push(frobenius_err(&ju, &unitary.choi()));
        }
        errs_noisy.sort_by(f64::total_cmp);
        errs_unitary.sort_by(f64::total_cmp);
        assert!(
            errs_noisy[10] > errs_unitary[10],
            "median errors: noisy {} vs unitary {}",
            errs_noisy[10],
            errs_unitary[10]
        );
    }

    #[test]
    fn bloch_form_of_identity_and_rotation() {
        let (m, t) = affine_bloch_form(&KrausChannel::identity(1).choi()).expect("form");
        for i in 0..3 {
            assert!((t[i]).abs() < 1e-10);
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((m[i][j] - want).abs() < 1e-10);
            }
        }
        let rot = KrausChannel::from_unitary(Gate::Rx(0, 0.9).matrix())
            .expect("channel");
        let (m, t) = affine_bloch_form(&rot.choi()).expect("form");
        for ti in t {
            assert!(ti.abs() < 1e-9);
        }
        // M orthogonal with determinant +1.
        let mut gram = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                gram[i][j] = (0..3).map(|k| m[k][i] * m[k][j]).sum();
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[i][j] - want).abs() < 1e-9);
            }
        }
        let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        assert!((det - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bloch_form_of_amplitude_damping_is_the_textbook_affine_map() {
        let gamma = 0.4;
        let ch = KrausChannel::amplitude_damping(gamma).expect("channel");
        let (m, t) = affine_bloch_form(&ch.choi()).expect("form");
        let s = (1.0 - gamma).sqrt();
        let want_m = [[s, 0.0, 0.0], [0.0, s, 0.0], [0.0, 0.0, 1.0 - gamma]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((m[i][j] - want_m[i][j]).abs() < 1e-10, "M[{i}][{j}] = {}", m[i][j]);
            }
        }
        assert!((t[0]).abs() < 1e-10 && (t[1]).abs() < 1e-10);
        assert!((t[2] - gamma).abs() < 1e-10);
    }

    #[test]
    fn bloch_form_rejects_multi_qubit_choi() {
        let ch = KrausChannel::identity(2);
        assert!(affine_bloch_form(&ch.choi()).is_err());
    }
}

//! Markovian open-system dynamics: Lindblad generators with structured
//! jump operators, dense Liouvillian evolution, first-order small-step
//! Kraus channels, Trotter–Suzuki splitting ([`trotter`]) and
//! quantum-trajectory unraveling ([`trajectory`]).
//!
//! The master equation integrated throughout is
//!
//! ```text
//! dρ/dt = −i[H, ρ] + Σ_j ( L_j ρ L_j† − ½{L_j†L_j, ρ} )
//! ```
//!
//! with decay rates absorbed into the jump operators at construction
//! (`L ← √γ · L`), so a jump's squared amplitude carries its rate.

pub mod trajectory;
pub mod trotter;

pub use trajectory::trajectories;
pub use trotter::TrotterOrder;

use crate::error::{QpufError, Result};
use crate::linalg::{c64, ComplexMatrix};
use crate::qstate::DensityMatrix;

/// Dense Liouvillians and superoperator exponentials are only built for
/// registers up to this dimension (6 qubits): a `d² × d²` matrix beyond
/// that is no longer a sensible oracle.
pub const DENSE_DIM_LIMIT: usize = 64;

/// Target local error used by the default step-count rule.
const DEFAULT_STEP_TOL: f64 = 1e-6;

/// A jump (collapse) operator with its rate pre-absorbed.
#[derive(Debug, Clone, PartialEq)]
pub enum JumpOperator {
    /// `√γ |0⟩⟨1|` on one qubit: amplitude damping toward `|0⟩`.
    Lowering { qubit: usize, amplitude: f64 },
    /// `√γ Z` on one qubit: pure dephasing.
    Dephasing { qubit: usize, amplitude: f64 },
    /// `Σ_i a_i Z_i`: collective dephasing with per-qubit weights.
    CollectiveZ { amplitudes: Vec<f64> },
    /// `Σ_{(i,j)} a_ij Z_i Z_j`: pairwise correlated dephasing.
    PairwiseZZ { amplitudes: Vec<(usize, usize, f64)> },
    /// An arbitrary Hermitian jump operator on the full register.
    Hermitian { matrix: ComplexMatrix },
    /// An arbitrary jump operator on the full register.
    General { matrix: ComplexMatrix },
}

impl JumpOperator {
    /// Amplitude damping on `qubit` with rate `γ`.
    pub fn lowering(qubit: usize, rate: f64) -> Self {
        Self::Lowering {
            qubit,
            amplitude: rate.max(0.0).sqrt(),
        }
    }

    /// Pure dephasing on `qubit` with rate `γ`.
    pub fn dephasing(qubit: usize, rate: f64) -> Self {
        Self::Dephasing {
            qubit,
            amplitude: rate.max(0.0).sqrt(),
        }
    }

    /// Collective dephasing `√Γ Σ_i w_i Z_i`.
    pub fn collective_z(rate: f64, weights: &[f64]) -> Self {
        let r = rate.max(0.0).sqrt();
        Self::CollectiveZ {
            amplitudes: weights.iter().map(|w| r * w).collect(),
        }
    }

    /// Pairwise dephasing `√Γ Σ w_ij Z_i Z_j` over the listed pairs.
    pub fn pairwise_zz(rate: f64, weighted_pairs: &[(usize, usize, f64)]) -> Self {
        let r = rate.max(0.0).sqrt();
        Self::PairwiseZZ {
            amplitudes: weighted_pairs
                .iter()
                .map(|&(i, j, w)| (i, j, r * w))
                .collect(),
        }
    }

    /// Hermitian jump `√γ M` on the full register.
    pub fn hermitian(rate: f64, matrix: ComplexMatrix) -> Self {
        Self::Hermitian {
            matrix: matrix.scale(c64(rate.max(0.0).sqrt(), 0.0)),
        }
    }

    /// Arbitrary jump `√γ M` on the full register.
    pub fn general(rate: f64, matrix: ComplexMatrix) -> Self {
        Self::General {
            matrix: matrix.scale(c64(rate.max(0.0).sqrt(), 0.0)),
        }
    }

    /// Dense operator on the `n`-qubit register.
    pub fn matrix(&self, n: usize) -> ComplexMatrix {
        let dim = 1usize << n;
        match self {
            Self::Lowering { qubit, amplitude } => {
                let mut op = ComplexMatrix::zeros(2, 2);
                op.set(0, 1, c64(*amplitude, 0.0));
                crate::channel::embed_single_qubit(&op, n, *qubit)
            }
            Self::Dephasing { qubit, amplitude } => {
                let mut op = ComplexMatrix::zeros(2, 2);
                op.set(0, 0, c64(*amplitude, 0.0));
                op.set(1, 1, c64(-*amplitude, 0.0));
                crate::channel::embed_single_qubit(&op, n, *qubit)
            }
            Self::CollectiveZ { .. } | Self::PairwiseZZ { .. } => {
                let profile = self
                    .z_profile(n)
                    .expect("Z-family jump always has a profile");
                let mut m = ComplexMatrix::zeros(dim, dim);
                for (b, mu) in profile.iter().enumerate() {
                    m.set(b, b, c64(*mu, 0.0));
                }
                m
            }
            Self::Hermitian { matrix } | Self::General { matrix } => matrix.clone(),
        }
    }

    /// For jumps diagonal in the computational basis: the eigenvalue
    /// `μ_b` on each basis state `b`.
    pub fn z_profile(&self, n: usize) -> Option<Vec<f64>> {
        let dim = 1usize << n;
        let z = |b: usize, q: usize| -> f64 {
            if b & (1 << (n - 1 - q)) == 0 {
                1.0
            } else {
                -1.0
            }
        };
        match self {
            Self::Dephasing { qubit, amplitude } => {
                Some((0..dim).map(|b| amplitude * z(b, *qubit)).collect())
            }
            Self::CollectiveZ { amplitudes } => Some(
                (0..dim)
                    .map(|b| {
                        amplitudes
                            .iter()
                            .enumerate()
                            .map(|(q, a)| a * z(b, q))
                            .sum()
                    })
                    .collect(),
            ),
            Self::PairwiseZZ { amplitudes } => Some(
                (0..dim)
                    .map(|b| {
                        amplitudes
                            .iter()
                            .map(|&(i, j, a)| a * z(b, i) * z(b, j))
                            .sum()
                    })
                    .collect(),
            ),
            _ => None,
        }
    }
}

/// The coherent part of a generator.
#[derive(Debug, Clone, PartialEq)]
pub enum Hamiltonian {
    /// No coherent drive.
    Zero,
    /// `Σ_i h_i X_i`: a transverse field with per-qubit strengths.
    LocalX(Vec<f64>),
    /// An arbitrary Hermitian matrix on the full register.
    Dense(ComplexMatrix),
}

impl Hamiltonian {
    /// Dense matrix on the `n`-qubit register.
    pub fn matrix(&self, n: usize) -> ComplexMatrix {
        let dim = 1usize << n;
        match self {
            Self::Zero => ComplexMatrix::zeros(dim, dim),
            Self::LocalX(hs) => {
                let x = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
                let mut acc = ComplexMatrix::zeros(dim, dim);
                for (q, &h) in hs.iter().enumerate() {
                    if h != 0.0 {
                        acc = acc.add(
                            &crate::channel::embed_single_qubit(&x, n, q).scale(c64(h, 0.0)),
                        );
                    }
                }
                acc
            }
            Self::Dense(m) => m.clone(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Self::Zero => true,
            Self::LocalX(hs) => hs.iter().all(|&h| h == 0.0),
            Self::Dense(_) => false,
        }
    }
}

/// A Lindblad generator: Hamiltonian plus jump operators on a fixed
/// register width.
#[derive(Debug, Clone, PartialEq)]
pub struct LindbladGenerator {
    n_qubits: usize,
    hamiltonian: Hamiltonian,
    jumps: Vec<JumpOperator>,
}

impl LindbladGenerator {
    /// Builds and validates a generator.
    ///
    /// # Errors
    ///
    /// Returns [`QpufError::InvalidParameter`] for out-of-range qubit
    /// indices or weight-vector length mismatches,
    /// [`QpufError::DimensionMismatch`] for dense operators of the wrong
    /// shape, and [`QpufError::InvalidState`] if a declared Hermitian
    /// operator is not Hermitian within `1e-10`.
    pub fn new(
        n_qubits: usize,
        hamiltonian: Hamiltonian,
        jumps: Vec<JumpOperator>,
    ) -> Result<Self> {
        let dim = 1usize << n_qubits;
        match &hamiltonian {
            Hamiltonian::Zero => {}
            Hamiltonian::LocalX(hs) => {
                if hs.len() != n_qubits {
                    return Err(QpufError::InvalidParameter(format!(
                        "LocalX field has {} entries for {} qubits",
                        hs.len(),
                        n_qubits
                    )));
                }
            }
            Hamiltonian::Dense(m) => {
                if m.rows() != dim || m.cols() != dim {
                    return Err(QpufError::DimensionMismatch(format!(
                        "Hamiltonian is {}x{}, expected {dim}x{dim}",
                        m.rows(),
                        m.cols()
                    )));
                }
                if !m.is_hermitian(1e-10) {
                    return Err(QpufError::InvalidState(
                        "Hamiltonian must be Hermitian".into(),
                    ));
                }
            }
        }
        for j in &jumps {
            match j {
                JumpOperator::Lowering { qubit, .. } | JumpOperator::Dephasing { qubit, .. } => {
                    if *qubit >= n_qubits {
                        return Err(QpufError::InvalidParameter(format!(
                            "jump qubit {qubit} out of range"
                        )));
                    }
                }
                JumpOperator::CollectiveZ { amplitudes } => {
                    if amplitudes.len() != n_qubits {
                        return Err(QpufError::InvalidParameter(format!(
                            "collective-Z weights have {} entries for {} qubits",
                            amplitudes.len(),
                            n_qubits
                        )));
                    }
                }
                JumpOperator::PairwiseZZ { amplitudes } => {
                    for &(i, jx, _) in amplitudes {
                        if i >= n_qubits || jx >= n_qubits || i == jx {
                            return Err(QpufError::InvalidParameter(format!(
                                "pairwise-ZZ pair ({i}, {jx}) invalid for {n_qubits} qubits"
                            )));
                        }
                    }
                }
                JumpOperator::Hermitian { matrix } | JumpOperator::General { matrix } => {
                    if matrix.rows() != dim || matrix.cols() != dim {
                        return Err(QpufError::DimensionMismatch(format!(
                            "jump operator is {}x{}, expected {dim}x{dim}",
                            matrix.rows(),
                            matrix.cols()
                        )));
                    }
                    if matches!(j, JumpOperator::Hermitian { .. }) && !matrix.is_hermitian(1e-10)
                    {
                        return Err(QpufError::InvalidState(
                            "declared Hermitian jump operator is not Hermitian".into(),
                        ));
                    }
                }
            }
        }
        Ok(Self {
            n_qubits,
            hamiltonian,
            jumps,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn hamiltonian(&self) -> &Hamiltonian {
        &self.hamiltonian
    }

    pub fn jumps(&self) -> &[JumpOperator] {
        &self.jumps
    }

    /// Dense Hamiltonian matrix.
    pub fn hamiltonian_matrix(&self) -> ComplexMatrix {
        self.hamiltonian.matrix(self.n_qubits)
    }

    /// Dense jump matrices.
    pub fn jump_matrices(&self) -> Vec<ComplexMatrix> {
        self.jumps.iter().map(|j| j.matrix(self.n_qubits)).collect()
    }

    /// Dense Liouvillian in row-major vectorization:
    /// `𝓛 = −i(H⊗I − I⊗Hᵀ) + Σ_j [L⊗L* − ½(L†L)⊗I − ½ I⊗(L†L)ᵀ]`.
    ///
    /// # Errors
    ///
    /// Returns [`QpufError::TooManyQubits`] beyond [`DENSE_DIM_LIMIT`].
    pub fn liouvillian_dense(&self) -> Result<ComplexMatrix> {
        let dim = self.dim();
        if dim > DENSE_DIM_LIMIT {
            return Err(QpufError::TooManyQubits {
                requested: self.n_qubits,
                limit: DENSE_DIM_LIMIT.trailing_zeros() as usize,
            });
        }
        let eye = ComplexMatrix::identity(dim);
        let h = self.hamiltonian_matrix();
        let mut l = h
            .kron(&eye)
            .sub(&eye.kron(&h.transpose()))
            .scale(c64(0.0, -1.0));
        for jm in self.jump_matrices() {
            let jj = jm.adjoint().matmul(&jm);
            let term = jm
                .kron(&jm.conj())
                .sub(&jj.kron(&eye).scale(c64(0.5, 0.0)))
                .sub(&eye.kron(&jj.transpose()).scale(c64(0.5, 0.0)));
            l = l.add(&term);
        }
        Ok(l)
    }

    /// Exact evolution `ρ(t) = unvec(exp(𝓛 t) vec(ρ))` through the dense
    /// Liouvillian. The numerically exact oracle for the other
    /// integrators.
    ///
    /// # Errors
    ///
    /// Returns [`QpufError::TooManyQubits`] beyond [`DENSE_DIM_LIMIT`]
    /// and [`QpufError::DimensionMismatch`] on register mismatch.
    pub fn evolve_dense(&self, rho: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
        if rho.n_qubits() != self.n_qubits {
            return Err(QpufError::DimensionMismatch(format!(
                "generator acts on {} qubits, state has {}",
                self.n_qubits,
                rho.n_qubits()
            )));
        }
        let dim = self.dim();
        let propagator = self.liouvillian_dense()?.scale(c64(t, 0.0)).expm();
        let vec_out = propagator.mul_vec(rho.matrix().as_slice());
        let mut out = ComplexMatrix::new(dim, dim, vec_out);
        // Symmetrize away the exponential's numerical drift.
        out = out.add(&out.adjoint()).scale(c64(0.5, 0.0));
        Ok(DensityMatrix::new_unchecked(self.n_qubits, out))
    }

    /// First-order small-step Kraus channel for step `dt`:
    /// `K₀ = I − (iH + ½Σ L†L) dt`, `K_j = √dt · L_j`, with the whole
    /// set renormalized by `(Σ K†K)^{−1/2}` on the right so the result
    /// is exactly trace preserving (the raw set misses identity at
    /// `O(dt²)`).
    ///
    /// # Errors
    ///
    /// Returns [`QpufError::InvalidParameter`] for non-positive `dt` and
    /// propagates channel validation failures.
    pub fn small_step_kraus(&self, dt: f64) -> Result<crate::channel::KrausChannel> {
        if dt <= 0.0 || !dt.is_finite() {
            return Err(QpufError::InvalidParameter(format!(
                "step dt must be positive, got {dt}"
            )));
        }
        let dim = self.dim();
        let h = self.hamiltonian_matrix();
        let jms = self.jump_matrices();
        let mut effective = h.scale(c64(0.0, 1.0)); // iH
        for jm in &jms {
            effective = effective.add(&jm.adjoint().matmul(jm).scale(c64(0.5, 0.0)));
        }
        let k0 = ComplexMatrix::identity(dim).sub(&effective.scale(c64(dt, 0.0)));
        let mut ops = vec![k0];
        let root_dt = dt.sqrt();
        for jm in &jms {
            ops.push(jm.scale(c64(root_dt, 0.0)));
        }
        // Σ K†K = I + O(dt²); divide it out across the whole set.
        let mut total = ComplexMatrix::zeros(dim, dim);
        for k in &ops {
            total = total.add(&k.adjoint().matmul(k));
        }
        let (vals, vecs) = total.hermitian_eigen();
        let mut inv_sqrt = vecs.clone();
        for (k, &lambda) in vals.iter().enumerate() {
            let w = 1.0 / lambda.max(1e-300).sqrt();
            for i in 0..dim {
                let v = inv_sqrt.get(i, k) * c64(w, 0.0);
                inv_sqrt.set(i, k, v);
            }
        }
        let inv_sqrt = inv_sqrt.matmul(&vecs.adjoint());
        let ops = ops.into_iter().map(|k| k.matmul(&inv_sqrt)).collect();
        crate::channel::KrausChannel::new(ops)
    }

    /// Evolves by repeatedly applying the small-step channel
    /// (`steps` first-order steps of `t / steps`).
    ///
    /// # Errors
    ///
    /// Propagates [`LindbladGenerator::small_step_kraus`] errors.
    pub fn evolve_small_steps(
        &self,
        rho: &DensityMatrix,
        t: f64,
        steps: usize,
    ) -> Result<DensityMatrix> {
        let ch = self.small_step_kraus(t / steps as f64)?;
        let mut state = rho.clone();
        for _ in 0..steps {
            state = ch.apply(&state)?;
        }
        Ok(state)
    }

    /// Trotter–Suzuki evolution; see [`trotter::evolve_trotter`].
    ///
    /// # Errors
    ///
    /// See [`trotter::evolve_trotter`].
    pub fn evolve_trotter(
        &self,
        rho: &DensityMatrix,
        t: f64,
        order: TrotterOrder,
        steps: Option<usize>,
    ) -> Result<DensityMatrix> {
        trotter::evolve_trotter(self, rho, t, order, steps)
    }
}

/// Default step count for a horizon `t`: at least 20 steps, growing as
/// `t^{3/2} / √tol` with `tol = 1e-6` so the second-order global error
/// stays near `tol` for generators of unit scale.
pub fn default_steps(t: f64) -> usize {
    let by_error = t.abs().powf(1.5) / DEFAULT_STEP_TOL.sqrt();
    by_error.max(20.0).ceil() as usize
}

//! Quantum states of qubit registers: pure state vectors and density
//! matrices, with the distance measures used by the evaluation harness.
//!
//! Convention: qubit 0 is the most significant bit of a basis index, so
//! the basis state `|01⟩` of a 2-qubit register has index `0b01 = 1` and
//! qubit 0 is the leftmost character of the bitstring `"01"`.

use crate::error::{QpufError, Result};
use crate::linalg::{c64, ComplexMatrix};
use num_complex::Complex64;

/// Validation tolerance for hermiticity and unit trace.
pub const STATE_TOL: f64 = 1e-10;

/// A pure state of `n_qubits` qubits as a normalized amplitude vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl PureState {
    /// Builds a pure state from amplitudes, checking normalization
    /// within [`STATE_TOL`].
    ///
    /// # Errors
    ///
    /// Returns [`QpufError::DimensionMismatch`] if the length is not a
    /// power of two, and [`QpufError::InvalidState`] if the norm is not 1.
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        let dim = amplitudes.len();
        if dim == 0 || !dim.is_power_of_two() {
            return Err(QpufError::DimensionMismatch(format!(
                "amplitude vector length {dim} is not a power of two"
            )));
        }
        let norm_sqr: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sqr - 1.0).abs() > STATE_TOL {
            return Err(QpufError::InvalidState(format!(
                "pure state norm² = {norm_sqr}, expected 1"
            )));
        }
        Ok(Self {
            n_qubits: dim.trailing_zeros() as usize,
            amplitudes,
        })
    }

    /// The computational basis state `|bits⟩`, e.g. `"010"`.
    ///
    /// # Errors
    ///
    /// Returns [`QpufError::InvalidChallenge`] if `bits` contains
    /// characters other than `0`/`1` or is empty.
    pub fn basis(bits: &str) -> Result<Self> {
        let index = parse_bitstring(bits)?;
        let dim = 1usize << bits.len();
        let mut amplitudes = vec![c64(0.0, 0.0); dim];
        amplitudes[index] = c64(1.0, 0.0);
        Ok(Self {
            n_qubits: bits.len(),
            amplitudes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    /// Rank-one density matrix `|ψ⟩⟨ψ|`.
    pub fn to_density(&self) -> DensityMatrix {
        let dim = self.dim();
        let mat = ComplexMatrix::from_fn(dim, dim, |i, j| {
            self.amplitudes[i] * self.amplitudes[j].conj()
        });
        DensityMatrix {
            n_qubits: self.n_qubits,
            mat,
        }
    }
}

/// A density matrix of `n_qubits` qubits.
///
/// Valid instances are Hermitian, unit-trace and positive semidefinite
/// (within [`STATE_TOL`], eigenvalues ≥ −[`STATE_TOL`]).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    mat: ComplexMatrix,
}

impl DensityMatrix {
    /// Wraps a matrix as a density matrix after full validation.
    ///
    /// # Errors
    ///
    /// Returns [`QpufError::DimensionMismatch`] for non-square or
    /// non-power-of-two dimensions and [`QpufError::InvalidState`] if the
    /// matrix is not Hermitian, not unit trace, or has an eigenvalue
    /// below −[`STATE_TOL`].
    pub fn new(mat: ComplexMatrix) -> Result<Self> {
        if !mat.is_square() || !mat.rows().is_power_of_two() || mat.rows() == 0 {
            return Err(QpufError::DimensionMismatch(format!(
                "density matrix must be square with power-of-two dimension, got {}x{}",
                mat.rows(),
                mat.cols()
            )));
        }
        let out = Self {
            n_qubits: mat.rows().trailing_zeros() as usize,
            mat,
        };
        out.validate()?;
        Ok(out)
    }

    /// Wraps a matrix without validation.
    ///
    /// Intended for hot paths where the caller guarantees validity
    /// (e.g. output of a CPTP map applied to a valid state).
    pub fn new_unchecked(n_qubits: usize, mat: ComplexMatrix) -> Self {
        debug_assert_eq!(mat.rows(), 1 << n_qubits);
        debug_assert_eq!(mat.cols(), 1 << n_qubits);
        Self { n_qubits, mat }
    }

    /// The pure computational basis state `|bits⟩⟨bits|`.
    ///
    /// # Errors
    ///
    /// Returns [`QpufError::InvalidChallenge`] for malformed `bits`.
    pub fn basis(bits: &str) -> Result<Self> {
        Ok(PureState::basis(bits)?.to_density())
    }

    /// The maximally mixed state `I / 2ⁿ`.
    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        let mat = ComplexMatrix::identity(dim).scale(c64(1.0 / dim as f64, 0.0));
        Self { n_qubits, mat }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn matrix_mut(&mut self) -> &mut ComplexMatrix {
        &mut self.mat
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.mat
    }

    /// Checks hermiticity, unit trace and positive semidefiniteness.
    ///
    /// # Errors
    ///
    /// Returns [`QpufError::InvalidState`] describing the first violated
    /// property.
    pub fn validate(&self) -> Result<()> {
        if !self.mat.is_hermitian(STATE_TOL) {
            return Err(QpufError::InvalidState("matrix is not Hermitian".into()));
        }
        let tr = self.mat.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(QpufError::InvalidState(format!(
                "trace = {tr}, expected 1"
            )));
        }
        let (eigs, _) = self.mat.hermitian_eigen();
        if let Some(min) = eigs.first() {
            if *min < -STATE_TOL {
                return Err(QpufError::InvalidState(format!(
                    "negative eigenvalue {min}"
                )));
            }
        }
        Ok(())
    }

    /// Purity `Tr(ρ²)`; 1 for pure states, `1/2ⁿ` for maximally mixed.
    pub fn purity(&self) -> f64 {
        // Tr(ρ²) = Σ_{ij} ρ_ij ρ_ji = Σ_{ij} |ρ_ij|² for Hermitian ρ.
        self.mat.as_slice().iter().map(|a| a.norm_sqr()).sum()
    }

    /// Trace of the matrix (1 for valid states).
    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    /// Tensor product `self ⊗ other`; `self` becomes the leading
    /// (most significant) qubits of the combined register.
    pub fn tensor(&self, other: &Self) -> Self {
        Self {
            n_qubits: self.n_qubits + other.n_qubits,
            mat: self.mat.kron(&other.mat),
        }
    }

    /// Partial trace keeping the qubits listed in `keep` (any order;
    /// the output preserves their relative register order).
    ///
    /// # Errors
    ///
    /// Returns [`QpufError::InvalidParameter`] if `keep` contains
    /// duplicates or out-of-range qubit indices.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        let n = self.n_qubits;
        let mut keep_sorted: Vec<usize> = keep.to_vec();
        keep_sorted.sort_unstable();
        keep_sorted.dedup();
        if keep_sorted.len() != keep.len() {
            return Err(QpufError::InvalidParameter(
                "partial_trace: duplicate qubit in keep list".into(),
            ));
        }
        if keep_sorted.iter().any(|&q| q >= n) {
            return Err(QpufError::InvalidParameter(format!(
                "partial_trace: qubit index out of range for {n}-qubit state"
            )));
        }
        let k = keep_sorted.len();
        let dim = self.dim();
        let out_dim = 1usize << k;
        // Bit masks: qubit q occupies bit (n - 1 - q) of a basis index.
        let keep_bits: Vec<usize> = keep_sorted.iter().map(|&q| n - 1 - q).collect();
        let trace_mask: usize = {
            let keep_mask: usize = keep_bits.iter().map(|&b| 1usize << b).sum();
            (dim - 1) & !keep_mask
        };
        let compress = |idx: usize| -> usize {
            let mut out = 0usize;
            for (pos, &b) in keep_bits.iter().enumerate() {
                if idx & (1 << b) != 0 {
                    out |= 1 << (k - 1 - pos);
                }
            }
            out
        };
        let mut out = ComplexMatrix::zeros(out_dim, out_dim);
        let src = self.mat.as_slice();
        for i in 0..dim {
            let oi = compress(i);
            let ti = i & trace_mask;
            for j in 0..dim {
                if (j & trace_mask) != ti {
                    continue;
                }
                let oj = compress(j);
                let v = out.get(oi, oj) + src[i * dim + j];
                out.set(oi, oj, v);
            }
        }
        Ok(Self {
            n_qubits: k,
            mat: out,
        })
    }

    /// Diagonal of the density matrix: the Born-rule probability of each
    /// computational basis outcome, indexed by basis state.
    pub fn diagonal_probabilities(&self) -> Vec<f64> {
        let dim = self.dim();
        (0..dim).map(|i| self.mat.get(i, i).re.max(0.0)).collect()
    }

    /// Probability that measuring qubit `q` yields 1.
    ///
    /// # Panics
    ///
    /// Panics if `q` is out of range.
    pub fn qubit_excited_probability(&self, q: usize) -> f64 {
        assert!(q < self.n_qubits, "qubit index out of range");
        let bit = 1usize << (self.n_qubits - 1 - q);
        let dim = self.dim();
        (0..dim)
            .filter(|i| i & bit != 0)
            .map(|i| self.mat.get(i, i).re)
            .sum()
    }

    /// Uhlmann fidelity `F(ρ, σ) = (Tr √(√ρ σ √ρ))²`.
    ///
    /// Symmetric in its arguments; equals 1 iff the states coincide.
    ///
    /// # Errors
    ///
    /// Returns [`QpufError::DimensionMismatch`] if dimensions differ.
    pub fn fidelity(&self, other: &Self) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(QpufError::DimensionMismatch(format!(
                "fidelity: {} vs {} dimensional states",
                self.dim(),
                other.dim()
            )));
        }
        let sqrt_rho = psd_sqrt(&self.mat);
        let inner = sqrt_rho.matmul(other.matrix()).matmul(&sqrt_rho);
        // inner is Hermitian PSD up to numerical noise; clamp its spectrum.
        let (eigs, _) = inner.hermitian_eigen();
        let root_sum: f64 = eigs.iter().map(|&e| e.max(0.0).sqrt()).sum();
        Ok((root_sum * root_sum).min(1.0))
    }

    /// Trace distance `D(ρ, σ) = ½‖ρ − σ‖₁`.
    ///
    /// Between 0 and 1; 1 iff the states are perfectly distinguishable.
    ///
    /// # Errors
    ///
    /// Returns [`QpufError::DimensionMismatch`] if dimensions differ.
    pub fn trace_distance(&self, other: &Self) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(QpufError::DimensionMismatch(format!(
                "trace_distance: {} vs {} dimensional states",
                self.dim(),
                other.dim()
            )));
        }
        let diff = self.mat.sub(other.matrix());
        // The difference is Hermitian, so the singular values are the
        // absolute eigenvalues.
        let (eigs, _) = diff.hermitian_eigen();
        Ok(0.5 * eigs.iter().map(|e| e.abs()).sum::<f64>())
    }
}

/// Positive-semidefinite square root of a Hermitian PSD matrix, with
/// negative numerical noise in the spectrum clamped to zero.
fn psd_sqrt(m: &ComplexMatrix) -> ComplexMatrix {
    let (vals, vecs) = m.hermitian_eigen();
    let n = m.rows();
    let mut scaled = vecs.clone();
    for (k, &lambda) in vals.iter().enumerate() {
        let r = lambda.max(0.0).sqrt();
        for i in 0..n {
            let v = scaled.get(i, k) * r;
            scaled.set(i, k, v);
        }
    }
    scaled.matmul(&vecs.adjoint())
}

/// Parses a `{0,1}` bitstring into a basis index (qubit 0 = leftmost =
/// most significant bit).
///
/// # Errors
///
/// Returns [`QpufError::InvalidChallenge`] if the string is empty or
/// contains other characters.
pub fn parse_bitstring(bits: &str) -> Result<usize> {
    if bits.is_empty() {
        return Err(QpufError::InvalidChallenge("empty bitstring".into()));
    }
    let mut index = 0usize;
    for ch in bits.chars() {
        index <<= 1;
        match ch {
            '0' => {}
            '1' => index |= 1,
            other => {
                return Err(QpufError::InvalidChallenge(format!(
                    "bitstring may only contain 0/1, found {other:?}"
                )))
            }
        }
    }
    Ok(index)
}

/// Formats a basis index as an `n`-bit string (qubit 0 leftmost).
pub fn format_bitstring(index: usize, n: usize) -> String {
    (0..n)
        .map(|q| {
            if index & (1 << (n - 1 - q)) != 0 {
                '1'
            } else {
                '0'
            }
        })
        .collect()
}

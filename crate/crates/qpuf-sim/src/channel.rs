//! Quantum channels as Kraus operator sets, plus Choi-matrix
//! conversions, classical readout-error models and a diamond-norm
//! distinguishability measure for unitaries.
//!
//! A channel `Λ(ρ) = Σ_k K_k ρ K_k†` is completely positive by
//! construction; trace preservation (`Σ_k K_k† K_k = I`) is validated at
//! build time within [`CPTP_TOL`].
//!
//! Vectorization convention: `vec(ρ)[a·d + b] = ρ[a, b]` (row-major).
//! The superoperator of a channel is `Σ_k K_k ⊗ K_k*`, and its Choi
//! matrix is `J = Σ_k vec(K_k) vec(K_k)†` with the *output* index on the
//! most significant factor, so trace preservation reads
//! `Tr_out(J) = I` and channel application reads
//! `Λ(ρ) = Tr_in[J (I ⊗ ρᵀ)]`.

use crate::error::{QpufError, Result};
use crate::linalg::{c64, ComplexMatrix};
use crate::qstate::DensityMatrix;
use num_complex::Complex64;

/// Tolerance for the trace-preservation check `Σ K†K = I`.
pub const CPTP_TOL: f64 = 1e-10;

/// A completely positive trace-preserving map in Kraus form.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    n_qubits: usize,
    ops: Vec<ComplexMatrix>,
}

impl KrausChannel {
    /// Builds a channel from Kraus operators, validating shape and trace
    /// preservation.
    ///
    /// # Errors
    ///
    /// Returns [`QpufError::DimensionMismatch`] if the operators are not
    /// all square with one common power-of-two dimension, and
    /// [`QpufError::NotCptp`] if `Σ K†K` deviates from the identity by
    /// more than [`CPTP_TOL`] in any entry.
    pub fn new(ops: Vec<ComplexMatrix>) -> Result<Self> {
        if ops.is_empty() {
            return Err(QpufError::DimensionMismatch(
                "channel needs at least one Kraus operator".into(),
            ));
        }
        let dim = ops[0].rows();
        if !dim.is_power_of_two() || dim == 0 {
            return Err(QpufError::DimensionMismatch(format!(
                "Kraus dimension {dim} is not a power of two"
            )));
        }
        for op in &ops {
            if op.rows() != dim || op.cols() != dim {
                return Err(QpufError::DimensionMismatch(
                    "Kraus operators must share one square dimension".into(),
                ));
            }
        }
        let channel = Self {
            n_qubits: dim.trailing_zeros() as usize,
            ops,
        };
        let defect = channel.completeness_defect();
        if defect > CPTP_TOL {
            return Err(QpufError::NotCptp(format!(
                "Σ K†K deviates from identity by {defect:.3e}"
            )));
        }
        Ok(channel)
    }

    /// The identity channel on `n_qubits`.
    pub fn identity(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            ops: vec![ComplexMatrix::identity(1 << n_qubits)],
        }
    }

    /// Lifts a unitary `U` to the channel `ρ ↦ U ρ U†`.
    ///
    /// # Errors
    ///
    /// Returns [`QpufError::InvalidParameter`] if `U` is not unitary
    /// within [`CPTP_TOL`], and [`QpufError::DimensionMismatch`] for a
    /// non-square or non-power-of-two matrix.
    pub fn from_unitary(u: ComplexMatrix) -> Result<Self> {
        if !u.is_square() || !u.rows().is_power_of_two() || u.rows() == 0 {
            return Err(QpufError::DimensionMismatch(format!(
                "unitary must be square with power-of-two dimension, got {}x{}",
                u.rows(),
                u.cols()
            )));
        }
        let gram = u.adjoint().matmul(&u);
        let defect = gram.max_abs_diff(&ComplexMatrix::identity(u.rows()));
        if defect > CPTP_TOL {
            return Err(QpufError::InvalidParameter(format!(
                "matrix is not unitary: U†U deviates from identity by {defect:.3e}"
            )));
        }
        Ok(Self {
            n_qubits: u.rows().trailing_zeros() as usize,
            ops: vec![u],
        })
    }

    /// Single-qubit amplitude damping with decay probability `gamma`:
    /// `K₀ = [[1, 0], [0, √(1−γ)]]`, `K₁ = [[0, √γ], [0, 0]]`.
    ///
    /// # Errors
    ///
    /// Returns [`QpufError::InvalidParameter`] unless `0 ≤ γ ≤ 1`.
    pub fn amplitude_damping(gamma: f64) -> Result<Self> {
        check_unit_interval("amplitude damping γ", gamma)?;
        let k0 = ComplexMatrix::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => c64(1.0, 0.0),
            (1, 1) => c64((1.0 - gamma).sqrt(), 0.0),
            _ => c64(0.0, 0.0),
        });
        let mut k1 = ComplexMatrix::zeros(2, 2);
        k1.set(0, 1, c64(gamma.sqrt(), 0.0));
        Ok(Self {
            n_qubits: 1,
            ops: vec![k0, k1],
        })
    }

    /// Single-qubit phase damping with flip weight `q`:
    /// `K₀ = √(1−q) I`, `K₁ = √q Z`. Off-diagonals scale by `1 − 2q`.
    ///
    /// # Errors
    ///
    /// Returns [`QpufError::InvalidParameter`] unless `0 ≤ q ≤ 1`.
    pub fn phase_damping(q: f64) -> Result<Self> {
        check_unit_interval("phase damping q", q)?;
        let k0 = ComplexMatrix::identity(2).scale(c64((1.0 - q).sqrt(), 0.0));
        let mut k1 = ComplexMatrix::zeros(2, 2);
        k1.set(0, 0, c64(q.sqrt(), 0.0));
        k1.set(1, 1, c64(-q.sqrt(), 0.0));
        Ok(Self {
            n_qubits: 1,
            ops: vec![k0, k1],
        })
    }

    /// Single-qubit depolarizing channel
    /// `ρ ↦ (1−p) ρ + (p/3)(XρX + YρY + ZρZ)`.
    ///
    /// # Errors
    ///
    /// Returns [`QpufError::InvalidParameter`] unless `0 ≤ p ≤ 1`.
    pub fn depolarizing(p: f64) -> Result<Self> {
        check_unit_interval("depolarizing p", p)?;
        let w = (p / 3.0).sqrt();
        let mut x = ComplexMatrix::zeros(2, 2);
        x.set(0, 1, c64(w, 0.0));
        x.set(1, 0, c64(w, 0.0));
        let mut y = ComplexMatrix::zeros(2, 2);
        y.set(0, 1, c64(0.0, -w));
        y.set(1, 0, c64(0.0, w));
        let mut z = ComplexMatrix::zeros(2, 2);
        z.set(0, 0, c64(w, 0.0));
        z.set(1, 1, c64(-w, 0.0));
        let i = ComplexMatrix::identity(2).scale(c64((1.0 - p).sqrt(), 0.0));
        Ok(Self {
            n_qubits: 1,
            ops: vec![i, x, y, z],
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn ops(&self) -> &[ComplexMatrix] {
        &self.ops
    }

    /// Largest entry-wise deviation of `Σ K†K` from the identity.
    pub fn completeness_defect(&self) -> f64 {
        let dim = self.dim();
        let mut acc = ComplexMatrix::zeros(dim, dim);
        for k in &self.ops {
            acc = acc.add(&k.adjoint().matmul(k));
        }
        acc.max_abs_diff(&ComplexMatrix::identity(dim))
    }

    /// Applies the channel to a state of matching dimension.
    ///
    /// # Errors
    ///
    /// Returns [`QpufError::DimensionMismatch`] if the state has a
    /// different qubit count.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.n_qubits() != self.n_qubits {
            return Err(QpufError::DimensionMismatch(format!(
                "channel acts on {} qubits, state has {}",
                self.n_qubits,
                rho.n_qubits()
            )));
        }
        let dim = self.dim();
        let mut out = ComplexMatrix::zeros(dim, dim);
        for k in &self.ops {
            out = out.add(&k.matmul(rho.matrix()).matmul(&k.adjoint()));
        }
        Ok(DensityMatrix::new_unchecked(self.n_qubits, out))
    }

    /// Applies a single-qubit channel to qubit `q` of a larger register,
    /// in place, using the blocked 4×4 superoperator kernel (`O(4ⁿ)`
    /// scalar work instead of full `8ⁿ` matrix products).
    ///
    /// # Errors
    ///
    /// Returns [`QpufError::DimensionMismatch`] unless the channel is
    /// single-qubit, and [`QpufError::InvalidParameter`] if `q` is out of
    /// range.
    pub fn apply_to_qubit(&self, rho: &mut DensityMatrix, q: usize) -> Result<()> {
        if self.n_qubits != 1 {
            return Err(QpufError::DimensionMismatch(format!(
                "apply_to_qubit requires a 1-qubit channel, got {} qubits",
                self.n_qubits
            )));
        }
        let n = rho.n_qubits();
        if q >= n {
            return Err(QpufError::InvalidParameter(format!(
                "qubit {q} out of range for {n}-qubit state"
            )));
        }
        let s = superop_1q(&self.ops);
        apply_superop_1q(rho.matrix_mut(), n, q, &s);
        Ok(())
    }

    /// Sequential composition: `(self ∘ before)(ρ) = self(before(ρ))`.
    ///
    /// The Kraus set is the pairwise products `{A_i B_j}`.
    ///
    /// # Errors
    ///
    /// Returns [`QpufError::DimensionMismatch`] if qubit counts differ.
    pub fn compose(&self, before: &Self) -> Result<Self> {
        if self.n_qubits != before.n_qubits {
            return Err(QpufError::DimensionMismatch(format!(
                "compose: {} vs {} qubit channels",
                self.n_qubits, before.n_qubits
            )));
        }
        let mut ops = Vec::with_capacity(self.ops.len() * before.ops.len());
        for a in &self.ops {
            for b in &before.ops {
                ops.push(a.matmul(b));
            }
        }
        Ok(Self {
            n_qubits: self.n_qubits,
            ops,
        })
    }

    /// Parallel composition `self ⊗ other`; `self` acts on the leading
    /// (most significant) qubits.
    pub fn tensor(&self, other: &Self) -> Self {
        let mut ops = Vec::with_capacity(self.ops.len() * other.ops.len());
        for a in &self.ops {
            for b in &other.ops {
                ops.push(a.kron(b));
            }
        }
        Self {
            n_qubits: self.n_qubits + other.n_qubits,
            ops,
        }
    }

    /// Row-major-vec superoperator `Σ_k K_k ⊗ K_k*` of dimension `d²`.
    pub fn superoperator(&self) -> ComplexMatrix {
        let d2 = self.dim() * self.dim();
        let mut s = ComplexMatrix::zeros(d2, d2);
        for k in &self.ops {
            s = s.add(&k.kron(&k.conj()));
        }
        s
    }

    /// Choi matrix `J = Σ_k vec(K_k) vec(K_k)†` (output factor on the
    /// most significant index). For a trace-preserving channel the
    /// partial trace over the output factor is the identity.
    pub fn choi(&self) -> ComplexMatrix {
        let d = self.dim();
        let d2 = d * d;
        let mut j = ComplexMatrix::zeros(d2, d2);
        for k in &self.ops {
            let v = k.as_slice();
            for r in 0..d2 {
                for c in 0..d2 {
                    let cur = j.get(r, c);
                    j.set(r, c, cur + v[r] * v[c].conj());
                }
            }
        }
        j
    }

    /// Reconstructs a Kraus set from a Choi matrix by eigendecomposition:
    /// `K_k = √λ_k · unvec(v_k)` for eigenpairs with `λ_k > 1e-12`.
    ///
    /// # Errors
    ///
    /// Returns [`QpufError::DimensionMismatch`] for a non-square-of-power-
    /// of-two dimension, and [`QpufError::NotCptp`] if the reconstructed
    /// set is not trace preserving within [`CPTP_TOL`].
    pub fn from_choi(j: &ComplexMatrix) -> Result<Self> {
        let d2 = j.rows();
        if !j.is_square() {
            return Err(QpufError::DimensionMismatch("Choi matrix must be square".into()));
        }
        let d = (d2 as f64).sqrt().round() as usize;
        if d * d != d2 || !d.is_power_of_two() || d == 0 {
            return Err(QpufError::DimensionMismatch(format!(
                "Choi dimension {d2} is not the square of a power of two"
            )));
        }
        let (vals, vecs) = j.hermitian_eigen();
        let mut ops = Vec::new();
        for (k, &lambda) in vals.iter().enumerate() {
            if lambda <= 1e-12 {
                continue;
            }
            let w = lambda.sqrt();
            let op = ComplexMatrix::from_fn(d, d, |a, b| vecs.get(a * d + b, k) * w);
            ops.push(op);
        }
        Self::new(ops)
    }
}

/// Applies a channel given as a Choi matrix: `Λ(ρ) = Tr_in[J (I ⊗ ρᵀ)]`,
/// evaluated entry-wise as `Λ(ρ)[a,c] = Σ_{b,d} J[(a,b),(c,d)] ρ[b,d]`.
///
/// # Errors
///
/// Returns [`QpufError::DimensionMismatch`] if shapes are inconsistent.
pub fn apply_choi(j: &ComplexMatrix, rho: &DensityMatrix) -> Result<DensityMatrix> {
    let d = rho.dim();
    if j.rows() != d * d || !j.is_square() {
        return Err(QpufError::DimensionMismatch(format!(
            "Choi matrix is {}x{}, expected {}x{}",
            j.rows(),
            j.cols(),
            d * d,
            d * d
        )));
    }
    let out = apply_choi_matrix(j, rho.matrix());
    Ok(DensityMatrix::new_unchecked(rho.n_qubits(), out))
}

/// [`apply_choi`] on a raw operator (the channel action is linear, so it
/// extends beyond density matrices — e.g. to Pauli operators).
pub fn apply_choi_matrix(j: &ComplexMatrix, src: &ComplexMatrix) -> ComplexMatrix {
    let d = src.rows();
    debug_assert_eq!(j.rows(), d * d, "Choi / operator dimension mismatch");
    ComplexMatrix::from_fn(d, d, |a, c| {
        let mut acc = c64(0.0, 0.0);
        for b in 0..d {
            for dd in 0..d {
                acc += j.get(a * d + b, c * d + dd) * src.get(b, dd);
            }
        }
        acc
    })
}

/// Embeds a single-qubit operator at qubit `q` of an `n`-qubit register:
/// `I ⊗ … ⊗ op ⊗ … ⊗ I` with qubit 0 as the leading factor.
///
/// # Panics
///
/// Panics if `op` is not 2×2 or `q ≥ n`.
pub fn embed_single_qubit(op: &ComplexMatrix, n: usize, q: usize) -> ComplexMatrix {
    assert_eq!((op.rows(), op.cols()), (2, 2), "embed: operator must be 2x2");
    assert!(q < n, "embed: qubit out of range");
    let left = ComplexMatrix::identity(1 << q);
    let right = ComplexMatrix::identity(1 << (n - 1 - q));
    left.kron(op).kron(&right)
}

/// Embeds a `k`-qubit operator into an `n`-qubit register so that the
/// operator's qubit `i` acts on register qubit `qubits[i]` (targets need
/// not be contiguous or sorted); all other qubits see the identity.
///
/// # Panics
///
/// Panics if `op` is not `2^k × 2^k`, if any target repeats, or if a
/// target is out of range.
pub fn embed_operator(op: &ComplexMatrix, n: usize, qubits: &[usize]) -> ComplexMatrix {
    let k = qubits.len();
    assert_eq!(op.rows(), 1 << k, "embed: operator dimension mismatch");
    assert_eq!(op.cols(), 1 << k, "embed: operator dimension mismatch");
    let mut seen = std::collections::BTreeSet::new();
    for &q in qubits {
        assert!(q < n, "embed: qubit {q} out of range");
        assert!(seen.insert(q), "embed: duplicate target qubit {q}");
    }
    let dim = 1usize << n;
    // Register qubit q occupies bit (n − 1 − q); operator qubit i
    // occupies bit (k − 1 − i) of the small index.
    let bit_of = |q: usize| 1usize << (n - 1 - q);
    let target_mask: usize = qubits.iter().map(|&q| bit_of(q)).sum();
    let rest_mask = (dim - 1) & !target_mask;
    let gather = |idx: usize| -> usize {
        let mut small = 0usize;
        for (i, &q) in qubits.iter().enumerate() {
            if idx & bit_of(q) != 0 {
                small |= 1 << (k - 1 - i);
            }
        }
        small
    };
    let mut out = ComplexMatrix::zeros(dim, dim);
    for i in 0..dim {
        let rest = i & rest_mask;
        let a = gather(i);
        for j in 0..dim {
            if j & rest_mask != rest {
                continue;
            }
            out.set(i, j, op.get(a, gather(j)));
        }
    }
    out
}

/// Dense 4×4 superoperator of a single-qubit Kraus set, indexed as
/// `s[a·2 + b][c·2 + d] = Σ_k K[a,c]·conj(K[b,d])`, so that
/// `ρ'[a,b] = Σ_{c,d} s[(a,b)][(c,d)] ρ[c,d]`.
pub fn superop_1q(ops: &[ComplexMatrix]) -> [[Complex64; 4]; 4] {
    let mut s = [[c64(0.0, 0.0); 4]; 4];
    for k in ops {
        debug_assert_eq!((k.rows(), k.cols()), (2, 2));
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    for d in 0..2 {
                        s[a * 2 + b][c * 2 + d] += k.get(a, c) * k.get(b, d).conj();
                    }
                }
            }
        }
    }
    s
}

/// Composition of two 4×4 single-qubit superoperators:
/// `(after ∘ before)`.
pub fn compose_superop_1q(
    after: &[[Complex64; 4]; 4],
    before: &[[Complex64; 4]; 4],
) -> [[Complex64; 4]; 4] {
    let mut out = [[c64(0.0, 0.0); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let mut acc = c64(0.0, 0.0);
            for k in 0..4 {
                acc += after[i][k] * before[k][j];
            }
            out[i][j] = acc;
        }
    }
    out
}

/// Applies a single-qubit superoperator to qubit `q` of an `n`-qubit
/// density matrix, in place.
///
/// Basis indices are split as `i = x·2R + c·R + y` with `R = 2^(n−1−q)`,
/// so each `(x, y, X, Y)` tuple addresses one 2×2 block on which the
/// superoperator acts.
pub fn apply_superop_1q(mat: &mut ComplexMatrix, n: usize, q: usize, s: &[[Complex64; 4]; 4]) {
    let dim = 1usize << n;
    debug_assert_eq!(mat.rows(), dim);
    debug_assert_eq!(mat.cols(), dim);
    let r = 1usize << (n - 1 - q);
    let l = 1usize << q;
    let data = mat.as_mut_slice();
    for x in 0..l {
        let row_base = x * 2 * r;
        for y in 0..r {
            let i0 = (row_base + y) * dim;
            let i1 = (row_base + r + y) * dim;
            for bx in 0..l {
                let col_base = bx * 2 * r;
                for by in 0..r {
                    let j0 = col_base + by;
                    let j1 = col_base + r + by;
                    let m00 = data[i0 + j0];
                    let m01 = data[i0 + j1];
                    let m10 = data[i1 + j0];
                    let m11 = data[i1 + j1];
                    data[i0 + j0] =
                        s[0][0] * m00 + s[0][1] * m01 + s[0][2] * m10 + s[0][3] * m11;
                    data[i0 + j1] =
                        s[1][0] * m00 + s[1][1] * m01 + s[1][2] * m10 + s[1][3] * m11;
                    data[i1 + j0] =
                        s[2][0] * m00 + s[2][1] * m01 + s[2][2] * m10 + s[2][3] * m11;
                    data[i1 + j1] =
                        s[3][0] * m00 + s[3][1] * m01 + s[3][2] * m10 + s[3][3] * m11;
                }
            }
        }
    }
}

/// Classical readout-error model: independent symmetric bit flips per
/// qubit. As a matrix acting on probability vectors it is
/// column-stochastic: `R[observed][true] = Π_q (e_q or 1−e_q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutMatrix {
    flip_probabilities: Vec<f64>,
}

impl ReadoutMatrix {
    /// Error-free readout on `n_qubits`.
    pub fn identity(n_qubits: usize) -> Self {
        Self {
            flip_probabilities: vec![0.0; n_qubits],
        }
    }

    /// Builds from per-qubit flip probabilities.
    ///
    /// # Errors
    ///
    /// Returns [`QpufError::InvalidParameter`] if any probability is
    /// outside `[0, 1]`.
    pub fn from_flip_probabilities(flip_probabilities: Vec<f64>) -> Result<Self> {
        for &p in &flip_probabilities {
            check_unit_interval("readout flip probability", p)?;
        }
        Ok(Self { flip_probabilities })
    }

    pub fn n_qubits(&self) -> usize {
        self.flip_probabilities.len()
    }

    pub fn flip_probabilities(&self) -> &[f64] {
        &self.flip_probabilities
    }

    /// Applies the readout map to a probability vector over basis
    /// outcomes, in place (`O(n·2ⁿ)`).
    ///
    /// # Panics
    ///
    /// Panics if `probs.len() != 2^n_qubits`.
    pub fn apply(&self, probs: &mut [f64]) {
        let n = self.n_qubits();
        assert_eq!(probs.len(), 1 << n, "probability vector length mismatch");
        for (q, &e) in self.flip_probabilities.iter().enumerate() {
            if e == 0.0 {
                continue;
            }
            let bit = 1usize << (n - 1 - q);
            for i in 0..probs.len() {
                if i & bit == 0 {
                    let j = i | bit;
                    let pi = probs[i];
                    let pj = probs[j];
                    probs[i] = (1.0 - e) * pi + e * pj;
                    probs[j] = (1.0 - e) * pj + e * pi;
                }
            }
        }
    }

    /// Dense column-stochastic matrix `R[observed][true]`, row-major.
    pub fn dense(&self) -> Vec<f64> {
        let n = self.n_qubits();
        let dim = 1usize << n;
        let mut out = vec![0.0; dim * dim];
        for truth in 0..dim {
            for obs in 0..dim {
                let mut p = 1.0;
                for (q, &e) in self.flip_probabilities.iter().enumerate() {
                    let bit = 1usize << (n - 1 - q);
                    let flipped = (truth ^ obs) & bit != 0;
                    p *= if flipped { e } else { 1.0 - e };
                }
                out[obs * dim + truth] = p;
            }
        }
        out
    }
}

/// Worst-case distinguishability of two unitaries of equal dimension
/// `d`: `2·√(1 − |Tr(U†V)|² / d²)`. Zero iff the unitaries agree up to
/// global phase; 2 for perfectly distinguishable gates.
///
/// # Errors
///
/// Returns [`QpufError::DimensionMismatch`] if the shapes differ or the
/// inputs are not square.
pub fn unitary_distinguishability(u: &ComplexMatrix, v: &ComplexMatrix) -> Result<f64> {
    if !u.is_square() || u.rows() != v.rows() || v.rows() != v.cols() {
        return Err(QpufError::DimensionMismatch(
            "unitary_distinguishability expects square matrices of equal dimension".into(),
        ));
    }
    let d = u.rows() as f64;
    let overlap = u.adjoint().matmul(v).trace().norm() / d;
    Ok(2.0 * (1.0 - (overlap * overlap).min(1.0)).max(0.0).sqrt())
}

fn check_unit_interval(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) || !v.is_finite() {
        return Err(QpufError::InvalidParameter(format!(
            "{name} must lie in [0, 1], got {v}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::PureState;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_density(n_qubits: usize, rng: &mut ChaCha8Rng) -> DensityMatrix {
        let dim = 1usize << n_qubits;
        let g = ComplexMatrix::from_fn(dim, dim, |_, _| {
            c64(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let gg = g.matmul(&g.adjoint());
        let tr = gg.trace().re;
        DensityMatrix::new(gg.scale(c64(1.0 / tr, 0.0))).expect("state")
    }

    #[test]
    fn amplitude_damping_kraus_forms() {
        let ch = KrausChannel::amplitude_damping(0.3).expect("channel");
        let k0 = &ch.ops()[0];
        let k1 = &ch.ops()[1];
        assert_abs_diff_eq!(k0.get(0, 0).re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(k0.get(1, 1).re, 0.7_f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(k1.get(0, 1).re, 0.3_f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(ch.completeness_defect(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn amplitude_damping_decays_excited_population() {
        let gamma = 0.3;
        let ch = KrausChannel::amplitude_damping(gamma).expect("channel");
        let excited = DensityMatrix::basis("1").expect("basis");
        let out = ch.apply(&excited).expect("apply");
        assert_abs_diff_eq!(out.matrix().get(1, 1).re, 1.0 - gamma, epsilon = 1e-14);
        assert_abs_diff_eq!(out.matrix().get(0, 0).re, gamma, epsilon = 1e-14);
        // Coherences scale by √(1−γ).
        let plus = PureState::new(vec![
            c64(std::f64::consts::FRAC_1_SQRT_2, 0.0),
            c64(std::f64::consts::FRAC_1_SQRT_2, 0.0),
        ])
        .expect("plus state")
        .to_density();
        let out = ch.apply(&plus).expect("apply");
        assert_abs_diff_eq!(
            out.matrix().get(0, 1).re,
            0.5 * (1.0 - gamma).sqrt(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn amplitude_damping_composes_as_semigroup() {
        // AD(a) ∘ AD(b) = AD(1 − (1−a)(1−b)).
        let a = 0.2;
        let b = 0.35;
        let lhs = KrausChannel::amplitude_damping(a)
            .expect("channel")
            .compose(&KrausChannel::amplitude_damping(b).expect("channel"))
            .expect("compose");
        let rhs = KrausChannel::amplitude_damping(1.0 - (1.0 - a) * (1.0 - b)).expect("channel");
        assert!(lhs.superoperator().max_abs_diff(&rhs.superoperator()) < 1e-12);
    }

    #[test]
    fn phase_damping_scales_coherence() {
        let q = 0.25;
        let ch = KrausChannel::phase_damping(q).expect("channel");
        let plus = PureState::new(vec![
            c64(std::f64::consts::FRAC_1_SQRT_2, 0.0),
            c64(std::f64::consts::FRAC_1_SQRT_2, 0.0),
        ])
        .expect("plus")
        .to_density();
        let out = ch.apply(&plus).expect("apply");
        // Off-diagonal scales by 1 − 2q; populations untouched.
        assert_abs_diff_eq!(out.matrix().get(0, 1).re, 0.5 * (1.0 - 2.0 * q), epsilon = 1e-14);
        assert_abs_diff_eq!(out.matrix().get(0, 0).re, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn depolarizing_mixes_toward_identity() {
        let p = 0.3;
        let ch = KrausChannel::depolarizing(p).expect("channel");
        let zero = DensityMatrix::basis("0").expect("basis");
        let out = ch.apply(&zero).expect("apply");
        // |0⟩⟨0| ↦ (1 − 2p/3)|0⟩⟨0| + (2p/3)|1⟩⟨1|.
        assert_abs_diff_eq!(out.matrix().get(1, 1).re, 2.0 * p / 3.0, epsilon = 1e-14);
        // Fixed point: maximally mixed state.
        let mixed = DensityMatrix::maximally_mixed(1);
        let out = ch.apply(&mixed).expect("apply");
        assert!(out.matrix().max_abs_diff(mixed.matrix()) < 1e-14);
    }

    #[test]
    fn cptp_validation_rejects_incomplete_sets() {
        let bad = vec![ComplexMatrix::identity(2).scale(c64(0.9, 0.0))];
        assert!(matches!(KrausChannel::new(bad), Err(QpufError::NotCptp(_))));
        let half = KrausChannel::amplitude_damping(0.5).expect("channel");
        let truncated = vec![half.ops()[0].clone()];
        assert!(matches!(KrausChannel::new(truncated), Err(QpufError::NotCptp(_))));
    }

    #[test]
    fn from_unitary_validates() {
        let mut not_unitary = ComplexMatrix::identity(2);
        not_unitary.set(0, 1, c64(0.1, 0.0));
        assert!(KrausChannel::from_unitary(not_unitary).is_err());
        let h = ComplexMatrix::from_real_rows(&[
            &[std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2],
            &[std::f64::consts::FRAC_1_SQRT_2, -std::f64::consts::FRAC_1_SQRT_2],
        ]);
        let ch = KrausChannel::from_unitary(h).expect("hadamard channel");
        let zero = DensityMatrix::basis("0").expect("basis");
        let out = ch.apply(&zero).expect("apply");
        assert_abs_diff_eq!(out.matrix().get(0, 1).re, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn compose_matches_superoperator_product() {
        let ad = KrausChannel::amplitude_damping(0.2).expect("channel");
        let pd = KrausChannel::phase_damping(0.4).expect("channel");
        let chained = ad.compose(&pd).expect("compose");
        let want = ad.superoperator().matmul(&pd.superoperator());
        assert!(chained.superoperator().max_abs_diff(&want) < 1e-13);
    }

    #[test]
    fn tensor_acts_on_product_states() {
        let ad = KrausChannel::amplitude_damping(0.3).expect("channel");
        let id = KrausChannel::identity(1);
        let joint = ad.tensor(&id);
        assert_eq!(joint.n_qubits(), 2);
        let rho = DensityMatrix::basis("11").expect("basis");
        let out = joint.apply(&rho).expect("apply");
        // Qubit 0 decays, qubit 1 untouched.
        assert_abs_diff_eq!(out.qubit_excited_probability(0), 0.7, epsilon = 1e-14);
        assert_abs_diff_eq!(out.qubit_excited_probability(1), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn choi_trace_preservation_and_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ad = KrausChannel::amplitude_damping(0.3).expect("channel");
        let dep = KrausChannel::depolarizing(0.2).expect("channel");
        let two_qubit = ad.tensor(&dep);
        for ch in [&ad, &dep, &two_qubit] {
            let d = ch.dim();
            let j = ch.choi();
            // Partial trace over the output (most significant) factor is I.
            for b in 0..d {
                for dd in 0..d {
                    let mut acc = c64(0.0, 0.0);
                    for a in 0..d {
                        acc += j.get(a * d + b, a * d + dd);
                    }
                    let want = if b == dd { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(acc.re, want, epsilon = 1e-12);
                    assert_abs_diff_eq!(acc.im, 0.0, epsilon = 1e-12);
                }
            }
            // Choi application reproduces Kraus application.
            let rho = random_density(ch.n_qubits(), &mut rng);
            let via_kraus = ch.apply(&rho).expect("kraus apply");
            let via_choi = apply_choi(&j, &rho).expect("choi apply");
            assert!(via_kraus.matrix().max_abs_diff(via_choi.matrix()) < 1e-12);
        }
    }

    #[test]
    fn choi_round_trip_preserves_channel_action() {
        let ch = KrausChannel::amplitude_damping(0.45)
            .expect("channel")
            .compose(&KrausChannel::phase_damping(0.2).expect("channel"))
            .expect("compose");
        let back = KrausChannel::from_choi(&ch.choi()).expect("from choi");
        assert!(back.superoperator().max_abs_diff(&ch.superoperator()) < 1e-10);
    }

    #[test]
    fn single_qubit_kernel_matches_embedded_kraus_apply() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ch = KrausChannel::amplitude_damping(0.3)
            .expect("channel")
            .compose(&KrausChannel::depolarizing(0.15).expect("channel"))
            .expect("compose");
        for n in 1..=3 {
            for q in 0..n {
                let rho = random_density(n, &mut rng);
                // Reference: embed each Kraus operator into the full register.
                let embedded_ops: Vec<ComplexMatrix> = ch
                    .ops()
                    .iter()
                    .map(|k| embed_single_qubit(k, n, q))
                    .collect();
                let full = KrausChannel::new(embedded_ops).expect("embedded channel");
                let want = full.apply(&rho).expect("reference apply");
                let mut got = rho.clone();
                ch.apply_to_qubit(&mut got, q).expect("kernel apply");
                assert!(
                    got.matrix().max_abs_diff(want.matrix()) < 1e-12,
                    "kernel mismatch at n={n}, q={q}"
                );
            }
        }
    }

    #[test]
    fn superop_composition_matches_channel_composition() {
        let ad = KrausChannel::amplitude_damping(0.25).expect("channel");
        let pd = KrausChannel::phase_damping(0.1).expect("channel");
        let fused = compose_superop_1q(&superop_1q(ad.ops()), &superop_1q(pd.ops()));
        let composed = ad.compose(&pd).expect("compose");
        let direct = superop_1q(composed.ops());
        for i in 0..4 {
            for j in 0..4 {
                assert!((fused[i][j] - direct[i][j]).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn embed_operator_matches_kron_for_contiguous_targets() {
        let a = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let b = ComplexMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]]);
        let op = a.kron(&b);
        let got = embed_operator(&op, 3, &[1, 2]);
        let want = ComplexMatrix::identity(2).kron(&op);
        assert!(got.max_abs_diff(&want) < 1e-15);
        // Single-qubit special case agrees with the dedicated helper.
        let got1 = embed_operator(&a, 3, &[1]);
        assert!(got1.max_abs_diff(&embed_single_qubit(&a, 3, 1)) < 1e-15);
    }

    #[test]
    fn embed_operator_handles_reversed_targets() {
        // Embedding op on (q2, q1) equals embedding SWAP·op·SWAP on (q1, q2).
        let cx = ComplexMatrix::from_real_rows(&[
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
            &[0.0, 0.0, 1.0, 0.0],
        ]);
        let swap = ComplexMatrix::from_real_rows(&[
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
        ]);
        let got = embed_operator(&cx, 3, &[2, 1]);
        let want = embed_operator(&swap.matmul(&cx).matmul(&swap), 3, &[1, 2]);
        assert!(got.max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn readout_matrix_is_column_stochastic() {
        let r = ReadoutMatrix::from_flip_probabilities(vec![0.1, 0.2]).expect("readout");
        let dense = r.dense();
        let dim = 4;
        for truth in 0..dim {
            let col_sum: f64 = (0..dim).map(|obs| dense[obs * dim + truth]).sum();
            assert_abs_diff_eq!(col_sum, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn readout_apply_frozen_values() {
        let r = ReadoutMatrix::from_flip_probabilities(vec![0.1, 0.2]).expect("readout");
        let mut probs = vec![1.0, 0.0, 0.0, 0.0];
        r.apply(&mut probs);
        assert_abs_diff_eq!(probs[0], 0.72, epsilon = 1e-12); // 0.9 · 0.8
        assert_abs_diff_eq!(probs[1], 0.18, epsilon = 1e-12); // 0.9 · 0.2
        assert_abs_diff_eq!(probs[2], 0.08, epsilon = 1e-12); // 0.1 · 0.8
        assert_abs_diff_eq!(probs[3], 0.02, epsilon = 1e-12); // 0.1 · 0.2
        assert_abs_diff_eq!(probs.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn readout_apply_matches_dense_matrix() {
        let r = ReadoutMatrix::from_flip_probabilities(vec![0.05, 0.3, 0.12]).expect("readout");
        let dense = r.dense();
        let dim = 8;
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut probs: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
        let norm: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= norm);
        let want: Vec<f64> = (0..dim)
            .map(|obs| (0..dim).map(|t| dense[obs * dim + t] * probs[t]).sum())
            .collect();
        let mut got = probs.clone();
        r.apply(&mut got);
        for i in 0..dim {
            assert_abs_diff_eq!(got[i], want[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn unitary_distinguishability_frozen_values() {
        let i2 = ComplexMatrix::identity(2);
        let mut x = ComplexMatrix::zeros(2, 2);
        x.set(0, 1, c64(1.0, 0.0));
        x.set(1, 0, c64(1.0, 0.0));
        // Orthogonal-trace pair: maximal value 2.
        assert_abs_diff_eq!(
            unitary_distinguishability(&i2, &x).expect("value"),
            2.0,
            epsilon = 1e-14
        );
        // Identical gates: 0.
        assert_abs_diff_eq!(
            unitary_distinguishability(&x, &x).expect("value"),
            0.0,
            epsilon = 1e-14
        );
        // I vs diag(1, e^{iθ}) at θ = π/3: 2·sin(θ/2) = 1.
        let theta = std::f64::consts::FRAC_PI_3;
        let mut rz = ComplexMatrix::identity(2);
        rz.set(1, 1, c64(theta.cos(), theta.sin()));
        assert_abs_diff_eq!(
            unitary_distinguishability(&i2, &rz).expect("value"),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn channel_preserves_state_validity() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let ch = KrausChannel::depolarizing(0.4)
            .expect("channel")
            .compose(&KrausChannel::amplitude_damping(0.6).expect("channel"))
            .expect("compose");
        for _ in 0..10 {
            let rho = random_density(1, &mut rng);
            let out = ch.apply(&rho).expect("apply");
            out.validate().expect("output state valid");
        }
    }
}

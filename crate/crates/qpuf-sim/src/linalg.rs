//! Dense complex matrices in row-major layout.
//!
//! This module is the numeric core of the crate: a small, predictable
//! matrix type tuned for the register sizes the simulator targets
//! (dimension at most a few thousand). Hot paths elsewhere in the crate
//! index the backing storage directly; decompositions (Hermitian
//! eigensolve, singular values, matrix exponential) are delegated to
//! `nalgebra` on cold paths.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Shorthand constructor for a complex scalar.
#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Dense complex matrix, row-major: entry `(i, j)` lives at `i * cols + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    /// Builds a matrix from row-major data.
    ///
    /// # Panics
    ///
    /// Panics if `data.len() != rows * cols`.
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(
            data.len(),
            rows * cols,
            "matrix data length {} does not match {}x{}",
            data.len(),
            rows,
            cols
        );
        Self { rows, cols, data }
    }

    /// All-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![c64(0.0, 0.0); rows * cols],
        }
    }

    /// Identity matrix of dimension `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = c64(1.0, 0.0);
        }
        m
    }

    /// Builds a matrix by evaluating `f(i, j)` at every entry.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from nested row slices of real numbers.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        Self::from_fn(r, c, |i, j| c64(rows[i][j], 0.0))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Read-only view of the row-major backing storage.
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    /// Mutable view of the row-major backing storage.
    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// Bounds-checked entry read.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        assert!(i < self.rows && j < self.cols, "index ({i}, {j}) out of bounds");
        self.data[i * self.cols + j]
    }

    /// Bounds-checked entry write.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        assert!(i < self.rows && j < self.cols, "index ({i}, {j}) out of bounds");
        self.data[i * self.cols + j] = v;
    }

    /// Entry-wise sum.
    ///
    /// # Panics
    ///
    /// Panics on shape mismatch.
    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "add: shape mismatch");
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    /// Entry-wise difference.
    ///
    /// # Panics
    ///
    /// Panics on shape mismatch.
    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "sub: shape mismatch");
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    /// Scalar multiple.
    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    /// Matrix product `self * other`.
    ///
    /// # Panics
    ///
    /// Panics if inner dimensions disagree.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul: inner dimension mismatch");
        let (m, k_dim, n) = (self.rows, self.cols, other.cols);
        let mut out = vec![c64(0.0, 0.0); m * n];
        for i in 0..m {
            for k in 0..k_dim {
                let a = self.data[i * k_dim + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let rhs_row = &other.data[k * n..(k + 1) * n];
                let out_row = &mut out[i * n..(i + 1) * n];
                for j in 0..n {
                    out_row[j] += a * rhs_row[j];
                }
            }
        }
        Self { rows: m, cols: n, data: out }
    }

    /// Matrix-vector product `self * v`.
    ///
    /// # Panics
    ///
    /// Panics if `v.len() != self.cols()`.
    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.cols, "mul_vec: length mismatch");
        let mut out = vec![c64(0.0, 0.0); self.rows];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            let mut acc = c64(0.0, 0.0);
            for (a, x) in row.iter().zip(v) {
                acc += a * x;
            }
            out[i] = acc;
        }
        out
    }

    /// Transpose without conjugation.
    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.data[j * self.cols + i])
    }

    /// Entry-wise complex conjugate.
    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a.conj()).collect(),
        }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.data[j * self.cols + i].conj())
    }

    /// Trace of a square matrix.
    ///
    /// # Panics
    ///
    /// Panics if the matrix is not square.
    pub fn trace(&self) -> Complex64 {
        assert!(self.is_square(), "trace: matrix not square");
        (0..self.rows).map(|i| self.data[i * self.cols + i]).sum()
    }

    /// Kronecker product `self ⊗ other`.
    ///
    /// With row-major indexing this places `self` on the most significant
    /// index bits, matching the crate convention that qubit 0 is the
    /// leftmost / most significant subsystem.
    pub fn kron(&self, other: &Self) -> Self {
        let (ra, ca) = (self.rows, self.cols);
        let (rb, cb) = (other.rows, other.cols);
        let mut out = Self::zeros(ra * rb, ca * cb);
        for ia in 0..ra {
            for ja in 0..ca {
                let a = self.data[ia * ca + ja];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for ib in 0..rb {
                    let dst_row = ia * rb + ib;
                    for jb in 0..cb {
                        out.data[dst_row * (ca * cb) + (ja * cb + jb)] =
                            a * other.data[ib * cb + jb];
                    }
                }
            }
        }
        out
    }

    /// Frobenius norm.
    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest absolute entry-wise difference against `other`.
    ///
    /// # Panics
    ///
    /// Panics on shape mismatch.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "max_abs_diff: shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Whether `self` equals its own adjoint within `tol` (max-entry norm).
    pub fn is_hermitian(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        for i in 0..self.rows {
            for j in i..self.cols {
                let a = self.data[i * self.cols + j];
                let b = self.data[j * self.cols + i].conj();
                if (a - b).norm() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Eigendecomposition of a Hermitian matrix.
    ///
    /// Returns `(eigenvalues, eigenvectors)` with eigenvalues sorted in
    /// ascending order and the k-th column of `eigenvectors` holding the
    /// k-th eigenvector normalized to unit length.
    ///
    /// # Panics
    ///
    /// Panics if the matrix is not square. The input is assumed Hermitian;
    /// only its Hermitian part influences the result.
    pub fn hermitian_eigen(&self) -> (Vec<f64>, ComplexMatrix) {
        assert!(self.is_square(), "hermitian_eigen: matrix not square");
        let n = self.rows;
        let eig = self.to_nalgebra().symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[a]
                .partial_cmp(&eig.eigenvalues[b])
                .expect("eigenvalue comparison")
        });
        let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = ComplexMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        (values, vectors)
    }

    /// Singular values in descending order.
    pub fn singular_values(&self) -> Vec<f64> {
        let sv = self.to_nalgebra().singular_values();
        let mut out: Vec<f64> = sv.iter().copied().collect();
        out.sort_by(|a, b| b.partial_cmp(a).expect("singular value comparison"));
        out
    }

    /// Trace norm: the sum of singular values.
    pub fn trace_norm(&self) -> f64 {
        self.singular_values().iter().sum()
    }

    /// Matrix exponential `exp(self)` for a general square matrix
    /// (scaling-and-squaring via `nalgebra`).
    ///
    /// # Panics
    ///
    /// Panics if the matrix is not square.
    pub fn expm(&self) -> Self {
        assert!(self.is_square(), "expm: matrix not square");
        Self::from_nalgebra(&self.to_nalgebra().exp())
    }

    /// Computes `exp(factor * self)` assuming `self` is Hermitian, via its
    /// eigendecomposition: `V diag(exp(factor * λ)) V†`.
    ///
    /// This is exact for Hermitian input (e.g. unitaries `exp(-i t H)`)
    /// and cheaper and better conditioned than the general exponential.
    ///
    /// # Panics
    ///
    /// Panics if the matrix is not square.
    pub fn exp_hermitian_scaled(&self, factor: Complex64) -> Self {
        let (vals, vecs) = self.hermitian_eigen();
        let n = self.rows;
        // V * diag(exp(factor λ)) * V†, fused to avoid a full matmul chain.
        let mut scaled = vecs.clone();
        for (k, &lambda) in vals.iter().enumerate() {
            let e = (factor * lambda).exp();
            for i in 0..n {
                let v = scaled.get(i, k) * e;
                scaled.set(i, k, v);
            }
        }
        scaled.matmul(&vecs.adjoint())
    }

    fn to_nalgebra(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    fn from_nalgebra(m: &DMatrix<Complex64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pauli_x() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
    }

    fn pauli_z() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]])
    }

    #[test]
    fn identity_is_matmul_neutral() {
        let x = pauli_x();
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(x.matmul(&i2), x);
        assert_eq!(i2.matmul(&x), x);
    }

    #[test]
    fn kron_places_left_factor_on_high_bits() {
        // (X ⊗ Z)[0, 2] couples |00> with |10>: X acts on the high bit.
        let m = pauli_x().kron(&pauli_z());
        assert_eq!(m.get(0, 2), c64(1.0, 0.0));
        assert_eq!(m.get(1, 3), c64(-1.0, 0.0));
        assert_eq!(m.get(2, 0), c64(1.0, 0.0));
        assert_eq!(m.get(3, 1), c64(-1.0, 0.0));
        assert_eq!(m.get(0, 1), c64(0.0, 0.0));
    }

    #[test]
    fn adjoint_reverses_products() {
        let a = ComplexMatrix::from_fn(3, 3, |i, j| c64((i + 2 * j) as f64, (i as f64) - 0.5));
        let b = ComplexMatrix::from_fn(3, 3, |i, j| c64((2 * i) as f64 * 0.3, (j as f64) * 1.7));
        let lhs = a.matmul(&b).adjoint();
        let rhs = b.adjoint().matmul(&a.adjoint());
        assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn trace_of_pauli_products() {
        // Tr(X Z) = 0, Tr(X X) = 2.
        assert_abs_diff_eq!(pauli_x().matmul(&pauli_z()).trace().norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(pauli_x().matmul(&pauli_x()).trace().re, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn hermitian_eigen_of_z_sorted_ascending() {
        let (vals, vecs) = pauli_z().hermitian_eigen();
        assert_abs_diff_eq!(vals[0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vals[1], 1.0, epsilon = 1e-12);
        // Reconstruct V diag(λ) V†.
        let mut diag = ComplexMatrix::zeros(2, 2);
        diag.set(0, 0, c64(vals[0], 0.0));
        diag.set(1, 1, c64(vals[1], 0.0));
        let rebuilt = vecs.matmul(&diag).matmul(&vecs.adjoint());
        assert!(rebuilt.max_abs_diff(&pauli_z()) < 1e-12);
    }

    #[test]
    fn hermitian_eigen_reconstructs_random_hermitian() {
        // Deterministic pseudo-random Hermitian matrix.
        let n = 6;
        let mut seedling = 0.37_f64;
        let mut next = move || {
            seedling = (seedling * 997.13 + 0.7071).fract();
            seedling - 0.5
        };
        let mut h = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = if i == j {
                    c64(next(), 0.0)
                } else {
                    c64(next(), next())
                };
                h.set(i, j, v);
                h.set(j, i, v.conj());
            }
        }
        let (vals, vecs) = h.hermitian_eigen();
        let mut diag = ComplexMatrix::zeros(n, n);
        for (k, &v) in vals.iter().enumerate() {
            diag.set(k, k, c64(v, 0.0));
        }
        let rebuilt = vecs.matmul(&diag).matmul(&vecs.adjoint());
        assert!(rebuilt.max_abs_diff(&h) < 1e-10);
        // Eigenvectors are orthonormal.
        let gram = vecs.adjoint().matmul(&vecs);
        assert!(gram.max_abs_diff(&ComplexMatrix::identity(n)) < 1e-10);
    }

    #[test]
    fn singular_values_of_diagonal() {
        let mut m = ComplexMatrix::zeros(2, 2);
        m.set(0, 0, c64(3.0, 0.0));
        m.set(1, 1, c64(-4.0, 0.0));
        let sv = m.singular_values();
        assert_abs_diff_eq!(sv[0], 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sv[1], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.trace_norm(), 7.0, epsilon = 1e-12);
    }

    #[test]
    fn expm_of_i_theta_x_matches_rotation_formula() {
        // exp(iθX) = cos θ · I + i sin θ · X, with θ = 0.3.
        let theta = 0.3_f64;
        let arg = pauli_x().scale(c64(0.0, theta));
        let got = arg.expm();
        let want = ComplexMatrix::identity(2)
            .scale(c64(theta.cos(), 0.0))
            .add(&pauli_x().scale(c64(0.0, theta.sin())));
        assert!(got.max_abs_diff(&want) < 1e-12);
    }

    #[test]
    fn exp_hermitian_scaled_matches_general_expm() {
        let h = ComplexMatrix::from_fn(4, 4, |i, j| {
            if i <= j {
                c64(0.1 * (i * 4 + j) as f64, 0.05 * (j - i) as f64)
            } else {
                c64(0.1 * (j * 4 + i) as f64, -0.05 * (i - j) as f64)
            }
        });
        assert!(h.is_hermitian(1e-12));
        let factor = c64(0.0, -0.7);
        let via_eigen = h.exp_hermitian_scaled(factor);
        let via_pade = h.scale(factor).expm();
        assert!(via_eigen.max_abs_diff(&via_pade) < 1e-10);
        // exp(-i t H) is unitary.
        let gram = via_eigen.adjoint().matmul(&via_eigen);
        assert!(gram.max_abs_diff(&ComplexMatrix::identity(4)) < 1e-12);
    }

    #[test]
    fn mul_vec_matches_matmul() {
        let a = ComplexMatrix::from_fn(3, 3, |i, j| c64(i as f64 - j as f64, 0.25 * (i * j) as f64));
        let v = vec![c64(1.0, 0.0), c64(0.0, -1.0), c64(0.5, 0.5)];
        let as_col = ComplexMatrix::new(3, 1, v.clone());
        let want = a.matmul(&as_col);
        let got = a.mul_vec(&v);
        for i in 0..3 {
            assert!((got[i] - want.get(i, 0)).norm() < 1e-14);
        }
    }

    #[test]
    fn kron_is_associative_on_shapes_and_values() {
        let a = pauli_x();
        let b = pauli_z();
        let c = ComplexMatrix::identity(2);
        let left = a.kron(&b).kron(&c);
        let right = a.kron(&b.kron(&c));
        assert!(left.max_abs_diff(&right) < 1e-15);
    }

    #[test]
    #[should_panic(expected = "out of bounds")]
    fn out_of_bounds_read_panics() {
        let m = ComplexMatrix::identity(2);
        let _ = m.get(2, 0);
    }
}

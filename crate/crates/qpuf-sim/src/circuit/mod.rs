//! Circuit intermediate representation: gates, mid-circuit measurements,
//! classically conditioned gates, and noise insertion points.
//!
//! Circuits are flat op lists over a fixed-width qubit register plus an
//! unbounded classical bit file ("slots"). Submodules provide exact
//! branch-enumerating execution and shot sampling ([`exec`]), greedy
//! topology-aware routing ([`route`]), and a line-oriented text format
//! ([`text`]).

pub mod exec;
pub mod route;
pub mod text;

pub use exec::{
    run_exact, run_sampled, sample_distribution, Branch, ExactRun, SampledRun,
    TerminalDistribution,
};
pub use route::{route_circuit, RoutedCircuit, Topology};

use crate::error::{QpufError, Result};
use crate::linalg::{c64, ComplexMatrix};

/// A quantum gate from the fixed simulator gate set.
///
/// Conventions: `Rx(θ) = exp(−iθX/2)`, `Ry(θ) = exp(−iθY/2)`,
/// `Rz(θ) = exp(−iθZ/2)`, `S = diag(1, i)`. For two-qubit gates the
/// first index is the control (for `Cx`/`Cz`) or simply the first
/// operand (for `Swap`).
#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    H(usize),
    X(usize),
    Y(usize),
    Z(usize),
    S(usize),
    Rx(usize, f64),
    Ry(usize, f64),
    Rz(usize, f64),
    Cx(usize, usize),
    Cz(usize, usize),
    Swap(usize, usize),
}

impl Gate {
    /// The qubits the gate touches, in operand order.
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::H(q) | Gate::X(q) | Gate::Y(q) | Gate::Z(q) | Gate::S(q) => vec![q],
            Gate::Rx(q, _) | Gate::Ry(q, _) | Gate::Rz(q, _) => vec![q],
            Gate::Cx(a, b) | Gate::Cz(a, b) | Gate::Swap(a, b) => vec![a, b],
        }
    }

    pub fn is_two_qubit(&self) -> bool {
        matches!(self, Gate::Cx(..) | Gate::Cz(..) | Gate::Swap(..))
    }

    /// Rewrites qubit operands through `f` (used by routing).
    pub fn map_qubits(&self, mut f: impl FnMut(usize) -> usize) -> Gate {
        match *self {
            Gate::H(q) => Gate::H(f(q)),
            Gate::X(q) => Gate::X(f(q)),
            Gate::Y(q) => Gate::Y(f(q)),
            Gate::Z(q) => Gate::Z(f(q)),
            Gate::S(q) => Gate::S(f(q)),
            Gate::Rx(q, t) => Gate::Rx(f(q), t),
            Gate::Ry(q, t) => Gate::Ry(f(q), t),
            Gate::Rz(q, t) => Gate::Rz(f(q), t),
            Gate::Cx(a, b) => Gate::Cx(f(a), f(b)),
            Gate::Cz(a, b) => Gate::Cz(f(a), f(b)),
            Gate::Swap(a, b) => Gate::Swap(f(a), f(b)),
        }
    }

    /// Unitary matrix of the gate: 2×2 for single-qubit gates, 4×4 for
    /// two-qubit gates in (first, second) operand order.
    pub fn matrix(&self) -> ComplexMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        match *self {
            Gate::H(_) => ComplexMatrix::from_real_rows(&[&[s, s], &[s, -s]]),
            Gate::X(_) => ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]),
            Gate::Y(_) => ComplexMatrix::new(
                2,
                2,
                vec![c64(0.0, 0.0), c64(0.0, -1.0), c64(0.0, 1.0), c64(0.0, 0.0)],
            ),
            Gate::Z(_) => ComplexMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]]),
            Gate::S(_) => ComplexMatrix::new(
                2,
                2,
                vec![c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(0.0, 1.0)],
            ),
            Gate::Rx(_, t) => {
                let (c, sn) = ((t / 2.0).cos(), (t / 2.0).sin());
                ComplexMatrix::new(
                    2,
                    2,
                    vec![c64(c, 0.0), c64(0.0, -sn), c64(0.0, -sn), c64(c, 0.0)],
                )
            }
            Gate::Ry(_, t) => {
                let (c, sn) = ((t / 2.0).cos(), (t / 2.0).sin());
                ComplexMatrix::from_real_rows(&[&[c, -sn], &[sn, c]])
            }
            Gate::Rz(_, t) => {
                let half = t / 2.0;
                ComplexMatrix::new(
                    2,
                    2,
                    vec![
                        c64(half.cos(), -half.sin()),
                        c64(0.0, 0.0),
                        c64(0.0, 0.0),
                        c64(half.cos(), half.sin()),
                    ],
                )
            }
            Gate::Cx(..) => ComplexMatrix::from_real_rows(&[
                &[1.0, 0.0, 0.0, 0.0],
                &[0.0, 1.0, 0.0, 0.0],
                &[0.0, 0.0, 0.0, 1.0],
                &[0.0, 0.0, 1.0, 0.0],
            ]),
            Gate::Cz(..) => ComplexMatrix::from_real_rows(&[
                &[1.0, 0.0, 0.0, 0.0],
                &[0.0, 1.0, 0.0, 0.0],
                &[0.0, 0.0, 1.0, 0.0],
                &[0.0, 0.0, 0.0, -1.0],
            ]),
            Gate::Swap(..) => ComplexMatrix::from_real_rows(&[
                &[1.0, 0.0, 0.0, 0.0],
                &[0.0, 0.0, 1.0, 0.0],
                &[0.0, 1.0, 0.0, 0.0],
                &[0.0, 0.0, 0.0, 1.0],
            ]),
        }
    }
}

/// Local noise kinds insertable between gates and expressible in the
/// text format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    /// Amplitude damping with decay probability `strength`.
    AmplitudeDamping,
    /// Phase damping with flip weight `strength`.
    PhaseDamping,
    /// Depolarizing with error probability `strength`.
    Depolarizing,
}

/// One circuit instruction.
#[derive(Debug, Clone, PartialEq)]
pub enum CircuitOp {
    /// A unitary gate.
    Gate(Gate),
    /// Projective Z-basis measurement of `qubit`, result stored in
    /// classical slot `slot`.
    Measure { qubit: usize, slot: usize },
    /// Gates applied only on branches where slot `slot` holds `value`.
    Conditional {
        slot: usize,
        value: u8,
        gates: Vec<Gate>,
    },
    /// A named single-qubit noise channel (text-serializable).
    Noise {
        kind: NoiseKind,
        strength: f64,
        qubit: usize,
    },
    /// An arbitrary Kraus channel on the listed qubits (API-only; not
    /// expressible in the text format).
    Channel {
        channel: crate::channel::KrausChannel,
        qubits: Vec<usize>,
    },
}

/// A circuit over a fixed qubit register.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    ops: Vec<CircuitOp>,
}

impl Circuit {
    /// Empty circuit on `n_qubits`.
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            ops: Vec::new(),
        }
    }

    /// Builds a circuit from an op list, validating every op.
    ///
    /// # Errors
    ///
    /// See [`Circuit::push`].
    pub fn with_ops(n_qubits: usize, ops: Vec<CircuitOp>) -> Result<Self> {
        let mut c = Self::new(n_qubits);
        for op in ops {
            c.push(op)?;
        }
        Ok(c)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn ops(&self) -> &[CircuitOp] {
        &self.ops
    }

    /// Number of classical slots: one past the highest slot index
    /// mentioned by any measurement or conditional.
    pub fn n_slots(&self) -> usize {
        let mut max: Option<usize> = None;
        for op in &self.ops {
            let s = match op {
                CircuitOp::Measure { slot, .. } => Some(*slot),
                CircuitOp::Conditional { slot, .. } => Some(*slot),
                _ => None,
            };
            if let Some(s) = s {
                max = Some(max.map_or(s, |m: usize| m.max(s)));
            }
        }
        max.map_or(0, |m| m + 1)
    }

    /// Appends an op after validating qubit indices, distinctness of
    /// two-qubit operands, and noise strength ranges.
    ///
    /// # Errors
    ///
    /// Returns [`QpufError::InvalidParameter`] on any violated bound.
    pub fn push(&mut self, op: CircuitOp) -> Result<()> {
        let n = self.n_qubits;
        let check_gate = |g: &Gate| -> Result<()> {
            let qs = g.qubits();
            for &q in &qs {
                if q >= n {
                    return Err(QpufError::InvalidParameter(format!(
                        "gate qubit {q} out of range for {n}-qubit circuit"
                    )));
                }
            }
            if qs.len() == 2 && qs[0] == qs[1] {
                return Err(QpufError::InvalidParameter(
                    "two-qubit gate operands must be distinct".into(),
                ));
            }
            Ok(())
        };
        match &op {
            CircuitOp::Gate(g) => check_gate(g)?,
            CircuitOp::Measure { qubit, .. } => {
                if *qubit >= n {
                    return Err(QpufError::InvalidParameter(format!(
                        "measured qubit {qubit} out of range"
                    )));
                }
            }
            CircuitOp::Conditional { value, gates, .. } => {
                if *value > 1 {
                    return Err(QpufError::InvalidParameter(
                        "conditional value must be 0 or 1".into(),
                    ));
                }
                for g in gates {
                    check_gate(g)?;
                }
            }
            CircuitOp::Noise {
                strength, qubit, ..
            } => {
                if *qubit >= n {
                    return Err(QpufError::InvalidParameter(format!(
                        "noise qubit {qubit} out of range"
                    )));
                }
                if !(0.0..=1.0).contains(strength) || !strength.is_finite() {
                    return Err(QpufError::InvalidParameter(format!(
                        "noise strength must lie in [0, 1], got {strength}"
                    )));
                }
            }
            CircuitOp::Channel { channel, qubits } => {
                if channel.n_qubits() != qubits.len() {
                    return Err(QpufError::InvalidParameter(format!(
                        "channel acts on {} qubits but {} targets given",
                        channel.n_qubits(),
                        qubits.len()
                    )));
                }
                let mut seen = std::collections::BTreeSet::new();
                for &q in qubits {
                    if q >= n {
                        return Err(QpufError::InvalidParameter(format!(
                            "channel qubit {q} out of range"
                        )));
                    }
                    if !seen.insert(q) {
                        return Err(QpufError::InvalidParameter(
                            "channel target qubits must be distinct".into(),
                        ));
                    }
                }
            }
        }
        self.ops.push(op);
        Ok(())
    }

    /// Convenience: appends a gate.
    ///
    /// # Errors
    ///
    /// See [`Circuit::push`].
    pub fn gate(&mut self, g: Gate) -> Result<()> {
        self.push(CircuitOp::Gate(g))
    }

    /// Convenience: appends a measurement.
    ///
    /// # Errors
    ///
    /// See [`Circuit::push`].
    pub fn measure(&mut self, qubit: usize, slot: usize) -> Result<()> {
        self.push(CircuitOp::Measure { qubit, slot })
    }

    /// Appends terminal measurements of every qubit into the slot with
    /// the same index.
    ///
    /// # Errors
    ///
    /// See [`Circuit::push`].
    pub fn measure_all(&mut self) -> Result<()> {
        for q in 0..self.n_qubits {
            self.measure(q, q)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rotation_matrices_match_closed_forms() {
        // Rx(π) = −iX.
        let rx = Gate::Rx(0, std::f64::consts::PI).matrix();
        assert_abs_diff_eq!(rx.get(0, 1).im, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(rx.get(0, 0).re, 0.0, epsilon = 1e-15);
        // Ry(π/2)|0⟩ = (|0⟩ + |1⟩)/√2.
        let ry = Gate::Ry(0, std::f64::consts::FRAC_PI_2).matrix();
        assert_abs_diff_eq!(ry.get(0, 0).re, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(ry.get(1, 0).re, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
        // Rz(θ) = diag(e^{−iθ/2}, e^{iθ/2}).
        let rz = Gate::Rz(0, 0.8).matrix();
        assert_abs_diff_eq!(rz.get(0, 0).im, -(0.4_f64).sin(), epsilon = 1e-15);
        assert_abs_diff_eq!(rz.get(1, 1).im, (0.4_f64).sin(), epsilon = 1e-15);
    }

    #[test]
    fn s_squared_is_z() {
        let s = Gate::S(0).matrix();
        let z = Gate::Z(0).matrix();
        assert!(s.matmul(&s).max_abs_diff(&z) < 1e-15);
    }

    #[test]
    fn all_gate_matrices_are_unitary() {
        let gates = vec![
            Gate::H(0),
            Gate::X(0),
            Gate::Y(0),
            Gate::Z(0),
            Gate::S(0),
            Gate::Rx(0, 0.7),
            Gate::Ry(0, -1.3),
            Gate::Rz(0, 2.9),
            Gate::Cx(0, 1),
            Gate::Cz(0, 1),
            Gate::Swap(0, 1),
        ];
        for g in gates {
            let u = g.matrix();
            let gram = u.adjoint().matmul(&u);
            assert!(
                gram.max_abs_diff(&ComplexMatrix::identity(u.rows())) < 1e-14,
                "{g:?} is not unitary"
            );
        }
    }

    #[test]
    fn cx_matrix_flips_target_when_control_set() {
        let cx = Gate::Cx(0, 1).matrix();
        // |10⟩ → |11⟩ and |11⟩ → |10⟩.
        assert_abs_diff_eq!(cx.get(3, 2).re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(cx.get(2, 3).re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(cx.get(0, 0).re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn push_validates_operands() {
        let mut c = Circuit::new(2);
        assert!(c.gate(Gate::H(2)).is_err());
        assert!(c.gate(Gate::Cx(1, 1)).is_err());
        assert!(c
            .push(CircuitOp::Noise {
                kind: NoiseKind::AmplitudeDamping,
                strength: 1.5,
                qubit: 0,
            })
            .is_err());
        assert!(c.gate(Gate::Cx(0, 1)).is_ok());
        assert!(c.measure(0, 3).is_ok());
        assert_eq!(c.n_slots(), 4);
    }
}

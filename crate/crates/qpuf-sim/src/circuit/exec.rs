//! Circuit execution: exact branch enumeration over mid-circuit
//! measurement outcomes, and shot sampling from the exact terminal
//! distribution.
//!
//! Measurement handling distinguishes two cases:
//!
//! - *Mid-circuit* measurements split the current density matrix into
//!   projected, renormalized branches; branches with probability below
//!   [`BRANCH_PRUNE_TOL`] are dropped.
//! - The maximal *trailing* run of `Measure` ops (nothing executes after
//!   them, so no conditional can read them) is not branched at all: the
//!   joint outcome distribution is read off the diagonal of each branch
//!   state and mixed with the branch weights. An f-round feedback
//!   circuit therefore yields exactly `2^f` ledger branches rather than
//!   `2^(f+n)`.
//!
//! Single-qubit gates and channels use the blocked 4×4 superoperator
//! kernel; `CX`/`CZ`/`SWAP` are applied as basis permutations and sign
//! masks in `O(4ⁿ)`.

use std::collections::BTreeMap;

use crate::channel::{
    apply_superop_1q, embed_operator, superop_1q, KrausChannel, ReadoutMatrix,
};
use crate::circuit::{Circuit, CircuitOp, Gate, NoiseKind};
use crate::error::{QpufError, Result};
use crate::linalg::ComplexMatrix;
use crate::qstate::{format_bitstring, DensityMatrix};
use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Branches whose cumulative probability falls below this are dropped.
pub const BRANCH_PRUNE_TOL: f64 = 1e-14;

/// One classical branch of an exact run: the mid-circuit measurement
/// record, its probability, and the (normalized) post-prefix state.
#[derive(Debug, Clone)]
pub struct Branch {
    /// Mid-circuit slot values in ascending slot order, e.g. `"01"`.
    pub outcome: String,
    /// Probability of observing this measurement record.
    pub probability: f64,
    /// Register state conditioned on the record, before any trailing
    /// measurements.
    pub state: DensityMatrix,
}

/// Joint distribution of the trailing measurements, keyed by slot.
#[derive(Debug, Clone)]
pub struct TerminalDistribution {
    /// Slots of the trailing measurements, ascending. Bit `i` of an
    /// outcome pattern (counting from the left) belongs to `slots[i]`.
    pub slots: Vec<usize>,
    /// Mixed-over-branches probability of each of the `2^slots.len()`
    /// outcome patterns.
    pub probabilities: Vec<f64>,
}

/// Result of [`run_exact`].
#[derive(Debug, Clone)]
pub struct ExactRun {
    n_qubits: usize,
    /// Branch ledger sorted by outcome string ascending.
    pub branches: Vec<Branch>,
    /// Present iff the circuit ends with at least one measurement.
    pub terminal: Option<TerminalDistribution>,
}

impl ExactRun {
    /// The branch-weighted mixture `Σ_b p_b ρ_b`: the output state of
    /// the circuit averaged over mid-circuit outcomes (renormalized to
    /// absorb pruning loss).
    pub fn mixed_state(&self) -> DensityMatrix {
        let dim = 1usize << self.n_qubits;
        let mut acc = ComplexMatrix::zeros(dim, dim);
        let mut total = 0.0;
        for b in &self.branches {
            acc = acc.add(&b.state.matrix().scale(crate::linalg::c64(b.probability, 0.0)));
            total += b.probability;
        }
        DensityMatrix::new_unchecked(
            self.n_qubits,
            acc.scale(crate::linalg::c64(1.0 / total, 0.0)),
        )
    }
}

/// Result of [`run_sampled`].
#[derive(Debug, Clone)]
pub struct SampledRun {
    /// Slots of the trailing measurements, ascending (see
    /// [`TerminalDistribution::slots`]).
    pub slots: Vec<usize>,
    /// Post-readout outcome distribution the shots were drawn from.
    pub probabilities: Vec<f64>,
    /// Shot counts per observed outcome bitstring.
    pub histogram: BTreeMap<String, u64>,
    /// Total number of shots.
    pub shots: u64,
}

struct WorkBranch {
    slots: Vec<Option<u8>>,
    probability: f64,
    mat: ComplexMatrix,
}

/// Runs a circuit exactly on an initial state, enumerating every
/// mid-circuit measurement branch.
///
/// # Errors
///
/// Returns [`QpufError::DimensionMismatch`] if the state width differs
/// from the circuit width, and [`QpufError::InvalidParameter`] if a
/// conditional reads a slot no earlier measurement has written.
pub fn run_exact(circuit: &Circuit, initial: &DensityMatrix) -> Result<ExactRun> {
    let n = circuit.n_qubits();
    if initial.n_qubits() != n {
        return Err(QpufError::DimensionMismatch(format!(
            "circuit acts on {n} qubits, state has {}",
            initial.n_qubits()
        )));
    }
    let ops = circuit.ops();
    // Maximal trailing run of Measure ops, deferred to diagonal readout.
    let mut split = ops.len();
    while split > 0 && matches!(ops[split - 1], CircuitOp::Measure { .. }) {
        split -= 1;
    }
    let (prefix, trailing) = ops.split_at(split);

    let n_slots = circuit.n_slots();
    let mut branches = vec![WorkBranch {
        slots: vec![None; n_slots],
        probability: 1.0,
        mat: initial.matrix().clone(),
    }];

    for op in prefix {
        match op {
            CircuitOp::Gate(g) => {
                for b in &mut branches {
                    apply_gate(&mut b.mat, n, g);
                }
            }
            CircuitOp::Conditional { slot, value, gates } => {
                for b in &mut branches {
                    match b.slots[*slot] {
                        None => {
                            return Err(QpufError::InvalidParameter(format!(
                                "conditional reads slot c{slot} before it is written"
                            )))
                        }
                        Some(v) if v == *value => {
                            for g in gates {
                                apply_gate(&mut b.mat, n, g);
                            }
                        }
                        Some(_) => {}
                    }
                }
            }
            CircuitOp::Noise {
                kind,
                strength,
                qubit,
            } => {
                let ch = noise_channel(*kind, *strength)?;
                let s = superop_1q(ch.ops());
                for b in &mut branches {
                    apply_superop_1q(&mut b.mat, n, *qubit, &s);
                }
            }
            CircuitOp::Channel { channel, qubits } => {
                if qubits.len() == 1 {
                    let s = superop_1q(channel.ops());
                    for b in &mut branches {
                        apply_superop_1q(&mut b.mat, n, qubits[0], &s);
                    }
                } else {
                    let embedded: Vec<ComplexMatrix> = channel
                        .ops()
                        .iter()
                        .map(|k| embed_operator(k, n, qubits))
                        .collect();
                    for b in &mut branches {
                        let mut out = ComplexMatrix::zeros(1 << n, 1 << n);
                        for k in &embedded {
                            out = out.add(&k.matmul(&b.mat).matmul(&k.adjoint()));
                        }
                        b.mat = out;
                    }
                }
            }
            CircuitOp::Measure { qubit, slot } => {
                let mut next = Vec::with_capacity(branches.len() * 2);
                for b in branches {
                    let (p0, p1) = outcome_probabilities(&b.mat, n, *qubit);
                    for (outcome, p) in [(0u8, p0), (1u8, p1)] {
                        let joint = b.probability * p;
                        if joint < BRANCH_PRUNE_TOL {
                            continue;
                        }
                        let mat = project_qubit(&b.mat, n, *qubit, outcome, p);
                        let mut slots = b.slots.clone();
                        slots[*slot] = Some(outcome);
                        next.push(WorkBranch {
                            slots,
                            probability: joint,
                            mat,
                        });
                    }
                }
                branches = next;
            }
        }
    }

    // Ledger: mid-circuit slot record, ascending slot order.
    let recorded: Vec<usize> = branches
        .first()
        .map(|b| {
            (0..n_slots)
                .filter(|&s| b.slots[s].is_some())
                .collect::<Vec<_>>()
        })
        .unwrap_or_default();
    let mut ledger: Vec<Branch> = branches
        .iter()
        .map(|b| Branch {
            outcome: recorded
                .iter()
                .map(|&s| if b.slots[s] == Some(1) { '1' } else { '0' })
                .collect(),
            probability: b.probability,
            state: DensityMatrix::new_unchecked(n, b.mat.clone()),
        })
        .collect();
    ledger.sort_by(|a, b| a.outcome.cmp(&b.outcome));

    // Terminal distribution from branch diagonals.
    let terminal = if trailing.is_empty() {
        None
    } else {
        let mut slot_to_qubit: BTreeMap<usize, usize> = BTreeMap::new();
        for op in trailing {
            if let CircuitOp::Measure { qubit, slot } = op {
                slot_to_qubit.insert(*slot, *qubit); // later writes win
            }
        }
        let slots: Vec<usize> = slot_to_qubit.keys().copied().collect();
        let qubits: Vec<usize> = slot_to_qubit.values().copied().collect();
        let k = slots.len();
        let mut probabilities = vec![0.0; 1 << k];
        for b in &branches {
            let dim = 1usize << n;
            for i in 0..dim {
                let p = b.mat.get(i, i).re;
                if p <= 0.0 {
                    continue;
                }
                let mut pattern = 0usize;
                for &q in &qubits {
                    pattern = (pattern << 1) | ((i >> (n - 1 - q)) & 1);
                }
                probabilities[pattern] += b.probability * p;
            }
        }
        Some(TerminalDistribution {
            slots,
            probabilities,
        })
    };

    Ok(ExactRun {
        n_qubits: n,
        branches: ledger,
        terminal,
    })
}

/// Draws `shots` samples from the exact terminal distribution of a
/// circuit, optionally through a classical readout-error map.
///
/// Sampling is reproducible: the stream is a ChaCha generator seeded
/// with `seed`, and each shot draws one uniform variate inverted
/// through the cumulative distribution.
///
/// # Errors
///
/// Propagates [`run_exact`] errors; additionally fails with
/// [`QpufError::InvalidParameter`] if the circuit has no trailing
/// measurements, or [`QpufError::DimensionMismatch`] if a readout map
/// width differs from the measured-slot count.
pub fn run_sampled(
    circuit: &Circuit,
    initial: &DensityMatrix,
    shots: u64,
    seed: u64,
    readout: Option<&ReadoutMatrix>,
) -> Result<SampledRun> {
    let exact = run_exact(circuit, initial)?;
    let terminal = exact.terminal.ok_or_else(|| {
        QpufError::InvalidParameter(
            "run_sampled requires the circuit to end with measurements".into(),
        )
    })?;
    sample_distribution(&terminal, shots, seed, readout)
}

/// Draws `shots` samples from an already-computed terminal distribution.
///
/// Splitting this out of [`run_sampled`] lets callers evaluate a circuit
/// exactly once and then re-sample it cheaply under many seeds (e.g. for
/// repeated-readout reliability studies).
///
/// # Errors
///
/// Fails with [`QpufError::DimensionMismatch`] if a readout map width
/// differs from the measured-slot count.
pub fn sample_distribution(
    terminal: &TerminalDistribution,
    shots: u64,
    seed: u64,
    readout: Option<&ReadoutMatrix>,
) -> Result<SampledRun> {
    let k = terminal.slots.len();
    let mut probabilities = terminal.probabilities.clone();
    if let Some(r) = readout {
        if r.n_qubits() != k {
            return Err(QpufError::DimensionMismatch(format!(
                "readout map covers {} bits, circuit measures {k}",
                r.n_qubits()
            )));
        }
        r.apply(&mut probabilities);
    }
    for p in probabilities.iter_mut() {
        *p = p.max(0.0);
    }
    let total: f64 = probabilities.iter().sum();
    let mut cumulative = Vec::with_capacity(probabilities.len());
    let mut acc = 0.0;
    for p in &probabilities {
        acc += p / total;
        cumulative.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut histogram: BTreeMap<String, u64> = BTreeMap::new();
    for _ in 0..shots {
        let u: f64 = rng.gen();
        let idx = cumulative.partition_point(|&c| c <= u).min(probabilities.len() - 1);
        *histogram.entry(format_bitstring(idx, k)).or_insert(0) += 1;
    }
    Ok(SampledRun {
        slots: terminal.slots.clone(),
        probabilities,
        histogram,
        shots,
    })
}

/// Applies a gate to a raw density matrix of `n` qubits, in place.
pub(crate) fn apply_gate(mat: &mut ComplexMatrix, n: usize, g: &Gate) {
    match *g {
        Gate::Cx(c, t) => apply_cx(mat, n, c, t),
        Gate::Cz(a, b) => apply_cz(mat, n, a, b),
        Gate::Swap(a, b) => apply_swap(mat, n, a, b),
        ref one_qubit => {
            let q = one_qubit.qubits()[0];
            let s = superop_1q(&[one_qubit.matrix()]);
            apply_superop_1q(mat, n, q, &s);
        }
    }
}

fn noise_channel(kind: NoiseKind, strength: f64) -> Result<KrausChannel> {
    match kind {
        NoiseKind::AmplitudeDamping => KrausChannel::amplitude_damping(strength),
        NoiseKind::PhaseDamping => KrausChannel::phase_damping(strength),
        NoiseKind::Depolarizing => KrausChannel::depolarizing(strength),
    }
}

/// Measurement outcome probabilities (p0, p1) of one qubit from the
/// diagonal.
fn outcome_probabilities(mat: &ComplexMatrix, n: usize, qubit: usize) -> (f64, f64) {
    let dim = 1usize << n;
    let bit = 1usize << (n - 1 - qubit);
    let mut p1 = 0.0;
    let mut p0 = 0.0;
    for i in 0..dim {
        let p = mat.get(i, i).re;
        if i & bit != 0 {
            p1 += p;
        } else {
            p0 += p;
        }
    }
    (p0.max(0.0), p1.max(0.0))
}

/// Projects onto the `outcome` subspace of `qubit` and renormalizes by
/// the outcome probability `p`.
fn project_qubit(mat: &ComplexMatrix, n: usize, qubit: usize, outcome: u8, p: f64) -> ComplexMatrix {
    let dim = 1usize << n;
    let bit = 1usize << (n - 1 - qubit);
    let scale = 1.0 / p;
    ComplexMatrix::from_fn(dim, dim, |i, j| {
        let bi = (i & bit != 0) as u8;
        let bj = (j & bit != 0) as u8;
        if bi == outcome && bj == outcome {
            mat.get(i, j) * Complex64::new(scale, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

fn apply_cx(mat: &mut ComplexMatrix, n: usize, control: usize, target: usize) {
    let dim = 1usize << n;
    let cbit = 1usize << (n - 1 - control);
    let tbit = 1usize << (n - 1 - target);
    // Row permutation: i ↔ i|tbit for control-set, target-clear i.
    for i in 0..dim {
        if i & cbit != 0 && i & tbit == 0 {
            swap_rows(mat, dim, i, i | tbit);
        }
    }
    for j in 0..dim {
        if j & cbit != 0 && j & tbit == 0 {
            swap_cols(mat, dim, j, j | tbit);
        }
    }
}

fn apply_swap(mat: &mut ComplexMatrix, n: usize, a: usize, b: usize) {
    let dim = 1usize << n;
    let abit = 1usize << (n - 1 - a);
    let bbit = 1usize << (n - 1 - b);
    for i in 0..dim {
        // Exchange the two bits; act once per transposition.
        if (i & abit != 0) && (i & bbit == 0) {
            swap_rows(mat, dim, i, (i & !abit) | bbit);
        }
    }
    for j in 0..dim {
        if (j & abit != 0) && (j & bbit == 0) {
            swap_cols(mat, dim, j, (j & !abit) | bbit);
        }
    }
}

fn apply_cz(mat: &mut ComplexMatrix, n: usize, a: usize, b: usize) {
    let dim = 1usize << n;
    let abit = 1usize << (n - 1 - a);
    let bbit = 1usize << (n - 1 - b);
    let flagged = |i: usize| (i & abit != 0) && (i & bbit != 0);
    let data = mat.as_mut_slice();
    for i in 0..dim {
        let fi = flagged(i);
        let row = &mut data[i * dim..(i + 1) * dim];
        for (j, entry) in row.iter_mut().enumerate() {
            if fi != flagged(j) {
                *entry = -*entry;
            }
        }
    }
}

fn swap_rows(mat: &mut ComplexMatrix, dim: usize, r1: usize, r2: usize) {
    let (lo_row, hi_row) = (r1.min(r2), r1.max(r2));
    debug_assert!(lo_row < hi_row);
    let data = mat.as_mut_slice();
    let (lo, hi) = data.split_at_mut(hi_row * dim);
    lo[lo_row * dim..(lo_row + 1) * dim].swap_with_slice(&mut hi[..dim]);
}

fn swap_cols(mat: &mut ComplexMatrix, dim: usize, c1: usize, c2: usize) {
    let data = mat.as_mut_slice();
    for r in 0..dim {
        data.swap(r * dim + c1, r * dim + c2);
    }
}

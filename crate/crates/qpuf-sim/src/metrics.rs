//! PUF quality metrics, in both quantum (trace-norm) and classical
//! (bit-string) forms, plus the aggregated report record.
//!
//! Conventions follow the ideal values the metrics are scored against:
//! quantum uniformity and uniqueness use the *unhalved* trace norm
//! (ideal uniformity 0, ideal uniqueness 2), while quantum reliability
//! uses the trace *distance* (half-norm), giving an ideal value of 1.
//! Classical metrics are percentages in `[0, 100]`. Expectations over
//! the challenge distribution are estimated as arithmetic means over
//! the sampled challenge set.

use serde::{Deserialize, Serialize};

use crate::error::{QpufError, Result};
use crate::qstate::DensityMatrix;

fn check_bits(responses: &[Vec<u8>]) -> Result<()> {
    for r in responses {
        if r.iter().any(|&b| b > 1) {
            return Err(QpufError::InvalidParameter(
                "response bits must be 0 or 1".into(),
            ));
        }
    }
    Ok(())
}

/// Mean unhalved trace-norm distance from the maximally mixed state,
/// `E‖ρ − I/d‖₁`; 0 iff every output is maximally mixed.
///
/// # Errors
///
/// Returns [`QpufError::InvalidParameter`] on an empty list and
/// [`QpufError::DimensionMismatch`] on mixed dimensions.
pub fn uniformity_quantum(outputs: &[DensityMatrix]) -> Result<f64> {
    let first = outputs
        .first()
        .ok_or_else(|| QpufError::InvalidParameter("uniformity needs at least one output".into()))?;
    let n = first.n_qubits();
    let mixed = DensityMatrix::maximally_mixed(n);
    let mut acc = 0.0;
    for rho in outputs {
        if rho.n_qubits() != n {
            return Err(QpufError::DimensionMismatch(
                "uniformity outputs must share a register size".into(),
            ));
        }
        acc += rho.matrix().sub(mixed.matrix()).trace_norm();
    }
    Ok(acc / outputs.len() as f64)
}

/// Mean unhalved trace-norm distance between two devices' outputs on
/// aligned challenges, `E‖Q_i(ρ) − Q_j(ρ)‖₁ ∈ [0, 2]`; 2 iff the
/// outputs are orthogonal for every challenge.
///
/// # Errors
///
/// Returns [`QpufError::InvalidParameter`] on empty input and
/// [`QpufError::DimensionMismatch`] on misaligned lists.
pub fn uniqueness_quantum(a: &[DensityMatrix], b: &[DensityMatrix]) -> Result<f64> {
    if a.is_empty() || a.len() != b.len() {
        return Err(QpufError::DimensionMismatch(format!(
            "uniqueness needs equal-length nonempty output lists, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        if x.n_qubits() != y.n_qubits() {
            return Err(QpufError::DimensionMismatch(
                "uniqueness outputs must share a register size".into(),
            ));
        }
        acc += x.matrix().sub(y.matrix()).trace_norm();
    }
    Ok(acc / a.len() as f64)
}

/// One minus the mean trace distance between challenge-aligned outputs
/// across all round pairs; 1 iff rounds reproduce exactly.
///
/// # Errors
///
/// Returns [`QpufError::InvalidParameter`] with fewer than two rounds
/// and [`QpufError::DimensionMismatch`] on misaligned rounds.
pub fn reliability_quantum(rounds: &[Vec<DensityMatrix>]) -> Result<f64> {
    if rounds.len() < 2 {
        return Err(QpufError::InvalidParameter(
            "reliability needs at least two rounds".into(),
        ));
    }
    let len = rounds[0].len();
    if len == 0 || rounds.iter().any(|r| r.len() != len) {
        return Err(QpufError::DimensionMismatch(
            "rounds must be nonempty and challenge-aligned".into(),
        ));
    }
    let mut acc = 0.0;
    let mut pairs = 0usize;
    for r in 0..rounds.len() {
        for s in (r + 1)..rounds.len() {
            for (x, y) in rounds[r].iter().zip(&rounds[s]) {
                acc += x.trace_distance(y)?;
            }
            pairs += len;
        }
    }
    Ok(1.0 - acc / pairs as f64)
}

/// Percentage of 1-bits across all response bits (ideal 50%).
///
/// # Errors
///
/// Returns [`QpufError::InvalidParameter`] on empty input or
/// non-binary bits.
pub fn uniformity_classical(responses: &[Vec<u8>]) -> Result<f64> {
    check_bits(responses)?;
    let total: usize = responses.iter().map(Vec::len).sum();
    if total == 0 {
        return Err(QpufError::InvalidParameter(
            "uniformity needs at least one response bit".into(),
        ));
    }
    let ones: usize = responses
        .iter()
        .map(|r| r.iter().filter(|&&b| b == 1).count())
        .sum();
    Ok(100.0 * ones as f64 / total as f64)
}

/// Mean pairwise normalized Hamming distance between devices' responses
/// on aligned challenges, as a percentage (ideal 50%).
///
/// # Errors
///
/// Returns [`QpufError::InvalidParameter`] with fewer than two devices
/// and [`QpufError::DimensionMismatch`] on misaligned responses.
pub fn uniqueness_classical(device_responses: &[Vec<Vec<u8>>]) -> Result<f64> {
    if device_responses.len() < 2 {
        return Err(QpufError::InvalidParameter(
            "uniqueness needs at least two devices".into(),
        ));
    }
    for d in device_responses {
        check_bits(d)?;
    }
    let n_challenges = device_responses[0].len();
    if n_challenges == 0 || device_responses.iter().any(|d| d.len() != n_challenges) {
        return Err(QpufError::DimensionMismatch(
            "devices must answer the same nonempty challenge set".into(),
        ));
    }
    let mut acc = 0.0;
    let mut terms = 0usize;
    for i in 0..device_responses.len() {
        for j in (i + 1)..device_responses.len() {
            for (a, b) in device_responses[i].iter().zip(&device_responses[j]) {
                if a.len() != b.len() || a.is_empty() {
                    return Err(QpufError::DimensionMismatch(
                        "aligned responses must have equal nonzero lengths".into(),
                    ));
                }
                let differing = a.iter().zip(b).filter(|(x, y)| x != y).count();
                acc += differing as f64 / a.len() as f64;
                terms += 1;
            }
        }
    }
    Ok(100.0 * acc / terms as f64)
}

/// Mean per-bit agreement with the golden responses over all re-query
/// rounds, as a percentage (ideal 100%).
///
/// # Errors
///
/// Returns [`QpufError::InvalidParameter`] on empty input and
/// [`QpufError::DimensionMismatch`] on misalignment.
pub fn reliability_classical(golden: &[Vec<u8>], rounds: &[Vec<Vec<u8>>]) -> Result<f64> {
    check_bits(golden)?;
    if golden.is_empty() || rounds.is_empty() {
        return Err(QpufError::InvalidParameter(
            "reliability needs golden responses and at least one round".into(),
        ));
    }
    let mut agree = 0usize;
    let mut total = 0usize;
    for round in rounds {
        check_bits(round)?;
        if round.len() != golden.len() {
            return Err(QpufError::DimensionMismatch(
                "round must answer the golden challenge set".into(),
            ));
        }
        for (g, r) in golden.iter().zip(round) {
            if g.len() != r.len() || g.is_empty() {
                return Err(QpufError::DimensionMismatch(
                    "aligned responses must have equal nonzero lengths".into(),
                ));
            }
            agree += g.iter().zip(r).filter(|(x, y)| x == y).count();
            total += g.len();
        }
    }
    Ok(100.0 * agree as f64 / total as f64)
}

/// Aggregated metric results for one (architecture, register size) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub arch: String,
    pub n_qubits: usize,
    pub uniformity_pct: f64,
    pub uniqueness_pct: f64,
    pub reliability_pct: f64,
    pub uniformity_quantum: f64,
    pub uniqueness_quantum: f64,
    pub reliability_quantum: f64,
    pub instances: usize,
    pub challenges: usize,
    pub shots: u64,
    pub repeats: usize,
    pub seed: u64,
}

/// Header line for [`MetricsReport::to_csv_rows`].
pub const CSV_HEADER: &str = "arch,n_qubits,metric,value,instances,challenges,shots,repeats,seed";

impl MetricsReport {
    /// One CSV row per metric, matching [`CSV_HEADER`].
    pub fn to_csv_rows(&self) -> Vec<String> {
        let metrics = [
            ("uniformity_pct", self.uniformity_pct),
            ("uniqueness_pct", self.uniqueness_pct),
            ("reliability_pct", self.reliability_pct),
            ("uniformity_quantum", self.uniformity_quantum),
            ("uniqueness_quantum", self.uniqueness_quantum),
            ("reliability_quantum", self.reliability_quantum),
        ];
        metrics
            .iter()
            .map(|(name, value)| {
                format!(
                    "{},{},{},{},{},{},{},{},{}",
                    self.arch,
                    self.n_qubits,
                    name,
                    value,
                    self.instances,
                    self.challenges,
                    self.shots,
                    self.repeats,
                    self.seed
                )
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ComplexMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pure0() -> DensityMatrix {
        DensityMatrix::basis("0").expect("state")
    }

    fn pure1() -> DensityMatrix {
        DensityMatrix::basis("1").expect("state")
    }

    #[test]
    fn quantum_uniformity_frozen_values() {
        let mixed = DensityMatrix::maximally_mixed(1);
        assert!(uniformity_quantum(&[mixed.clone()]).expect("ok") < 1e-12);
        let u = uniformity_quantum(&[pure0()]).expect("ok");
        assert!((u - 1.0).abs() < 1e-12, "got {u}");
        let u = uniformity_quantum(&[pure0(), mixed]).expect("ok");
        assert!((u - 0.5).abs() < 1e-12, "got {u}");
        assert!(uniformity_quantum(&[]).is_err());
    }

    #[test]
    fn quantum_uniformity_is_twice_the_trace_distance_to_mixed() {
        let rho = pure0();
        let mixed = DensityMatrix::maximally_mixed(1);
        let u = uniformity_quantum(&[rho.clone()]).expect("ok");
        let d = rho.trace_distance(&mixed).expect("ok");
        assert!((u - 2.0 * d).abs() < 1e-12);
    }

    #[test]
    fn quantum_uniqueness_frozen_values_and_symmetry() {
        let a = vec![pure0(), pure1()];
        assert!(uniqueness_quantum(&a, &a).expect("ok") < 1e-12);
        let b = vec![pure1(), pure0()];
        let u = uniqueness_quantum(&a, &b).expect("ok");
        assert!((u - 2.0).abs() < 1e-12, "got {u}");
        let mixed = vec![DensityMatrix::maximally_mixed(1), DensityMatrix::maximally_mixed(1)];
        let u = uniqueness_quantum(&a, &mixed).expect("ok");
        assert!((u - 1.0).abs() < 1e-12, "got {u}");
        let forward = uniqueness_quantum(&a, &b).expect("ok");
        let backward = uniqueness_quantum(&b, &a).expect("ok");
        assert_eq!(forward, backward);
        assert!(uniqueness_quantum(&a, &[pure0()]).is_err());
    }

    #[test]
    fn quantum_reliability_frozen_values() {
        let round = vec![pure0(), pure1()];
        let r = reliability_quantum(&[round.clone(), round.clone()]).expect("ok");
        assert!((r - 1.0).abs() < 1e-12);
        let flipped = vec![pure1(), pure0()];
        let r = reliability_quantum(&[round.clone(), flipped]).expect("ok");
        assert!(r.abs() < 1e-12, "got {r}");
        let near = DensityMatrix::new(ComplexMatrix::from_real_rows(&[
            &[0.55, 0.0],
            &[0.0, 0.45],
        ]))
        .expect("state");
        let far = DensityMatrix::new(ComplexMatrix::from_real_rows(&[
            &[0.45, 0.0],
            &[0.0, 0.55],
        ]))
        .expect("state");
        let r = reliability_quantum(&[vec![near], vec![far]]).expect("ok");
        assert!((r - 0.9).abs() < 1e-12, "got {r}");
        assert!(reliability_quantum(&[round]).is_err());
    }

    #[test]
    fn classical_uniformity_frozen_values_and_flip_identity() {
        assert_eq!(uniformity_classical(&[vec![0, 0], vec![0, 0]]).expect("ok"), 0.0);
        assert_eq!(uniformity_classical(&[vec![0, 1], vec![0, 1]]).expect("ok"), 50.0);
        let responses = vec![vec![1, 0, 1, 1], vec![0, 0, 1, 0]];
        let flipped: Vec<Vec<u8>> = responses
            .iter()
            .map(|r| r.iter().map(|&b| 1 - b).collect())
            .collect();
        let direct = uniformity_classical(&responses).expect("ok");
        let complement = uniformity_classical(&flipped).expect("ok");
        assert_eq!(direct + complement, 100.0);
        let odd = vec![vec![1, 0, 0]];
        let odd_flipped = vec![vec![0, 1, 1]];
        let sum = uniformity_classical(&odd).expect("ok")
            + uniformity_classical(&odd_flipped).expect("ok");
        assert!((sum - 100.0).abs() < 1e-9);
        assert!(uniformity_classical(&[]).is_err());
        assert!(uniformity_classical(&[vec![2]]).is_err());
    }

    #[test]
    fn classical_uniqueness_frozen_values() {
        let dev = vec![vec![1u8, 0, 1], vec![0, 1, 1]];
        assert_eq!(
            uniqueness_classical(&[dev.clone(), dev.clone()]).expect("ok"),
            0.0
        );
        let complement: Vec<Vec<u8>> = dev
            .iter()
            .map(|r| r.iter().map(|&b| 1 - b).collect())
            .collect();
        assert_eq!(
            uniqueness_classical(&[dev.clone(), complement]).expect("ok"),
            100.0
        );
        assert!(uniqueness_classical(&[dev]).is_err());
    }

    #[test]
    fn independent_uniform_devices_sit_near_fifty_percent() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let sample = |rng: &mut ChaCha8Rng| -> Vec<Vec<u8>> {
            (0..100)
                .map(|_| (0..20).map(|_| rng.gen_range(0..=1u8)).collect())
                .collect()
        };
        let a = sample(&mut rng);
        let b = sample(&mut rng);
        let u = uniqueness_classical(&[a, b]).expect("ok");
        // 2000 independent comparisons: 3σ band around 50%.
        let sigma = 50.0 / (2000.0f64).sqrt();
        assert!(
            (u - 50.0).abs() < 3.0 * sigma,
            "uniqueness {u} outside the binomial band"
        );
    }

    #[test]
    fn classical_reliability_frozen_values() {
        let golden = vec![vec![1u8, 0, 1, 0, 1], vec![0, 0, 1, 1, 0]];
        assert_eq!(
            reliability_classical(&golden, &[golden.clone()]).expect("ok"),
            100.0
        );
        let flipped: Vec<Vec<u8>> = golden
            .iter()
            .map(|r| r.iter().map(|&b| 1 - b).collect())
            .collect();
        assert_eq!(reliability_classical(&golden, &[flipped]).expect("ok"), 0.0);
        let mut one_flip = golden.clone();
        one_flip[0][0] = 0;
        assert_eq!(reliability_classical(&golden, &[one_flip]).expect("ok"), 90.0);
        assert!(reliability_classical(&golden, &[]).is_err());
        assert!(reliability_classical(&golden, &[vec![vec![1, 0]]]).is_err());
    }

    #[test]
    fn classical_metrics_ignore_consistent_challenge_order() {
        let a = vec![vec![1u8, 0], vec![0, 0], vec![1, 1]];
        let b = vec![vec![0u8, 0], vec![1, 0], vec![1, 0]];
        let permuted = |v: &[Vec<u8>]| -> Vec<Vec<u8>> { vec![v[2].clone(), v[0].clone(), v[1].clone()] };
        assert_eq!(
            uniformity_classical(&a).expect("ok"),
            uniformity_classical(&permuted(&a)).expect("ok")
        );
        assert_eq!(
            uniqueness_classical(&[a.clone(), b.clone()]).expect("ok"),
            uniqueness_classical(&[permuted(&a), permuted(&b)]).expect("ok")
        );
        assert_eq!(
            reliability_classical(&a, &[b.clone()]).expect("ok"),
            reliability_classical(&permuted(&a), &[permuted(&b)]).expect("ok")
        );
    }

    #[test]
    fn report_serializes_to_json_and_csv() {
        let report = MetricsReport {
            arch: "D".into(),
            n_qubits: 4,
            uniformity_pct: 49.5,
            uniqueness_pct: 50.2,
            reliability_pct: 97.1,
            uniformity_quantum: 0.41,
            uniqueness_quantum: 0.72,
            reliability_quantum: 0.98,
            instances: 20,
            challenges: 50,
            shots: 2000,
            repeats: 5,
            seed: 7,
        };
        let json = serde_json::to_string(&report).expect("serialize");
        let back: MetricsReport = serde_json::from_str(&json).expect("parse");
        assert_eq!(report, back);
        let rows = report.to_csv_rows();
        assert_eq!(rows.len(), 6);
        assert_eq!(CSV_HEADER.split(',').count(), 9);
        for row in &rows {
            assert_eq!(row.split(',').count(), 9);
            assert!(row.starts_with("D,4,"));
        }
        assert!(rows[0].contains("uniformity_pct,49.5"));
    }
}

//! Deterministic experiment orchestration: configuration, the
//! challenge–response protocol, metric aggregation, persistence, and
//! plot-data emission.
//!
//! Every run is a pure function of its [`ExperimentConfig`]: instance
//! parameters, challenge sets, shot noise and drift all derive from the
//! master seed through labelled hash streams, so re-running a config
//! reproduces its outputs byte for byte. No wall clock or OS entropy is
//! consulted anywhere.
//!
//! The classical metrics of a finished run are recomputed from its own
//! challenge–response archive (see [`classical_metrics_from_records`]),
//! which makes the persisted CSV the source of truth: loading `crps.csv`
//! back and recomputing yields exactly the reported values.

pub mod cli;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::slice::from_ref;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QpufError, Result};
use crate::lindblad::TrotterOrder;
use crate::metrics::{self, MetricsReport, CSV_HEADER};
use crate::profile::{builtin_profile, builtin_profiles, calibration_bounds, BackendProfile};
use crate::qpuf::{
    evaluate_exact_configured, qgen, Arch, Challenge, QpufInstance, Response, MIN_QUBITS,
};
use crate::qstate::{format_bitstring, DensityMatrix};
use crate::seeds::{child_seed, hash64};

/// Version tag carried by serialized configs; unknown versions are
/// rejected rather than reinterpreted.
pub const CONFIG_SCHEMA: u32 = 1;

/// Direct density-matrix simulation ceiling: an `n`-qubit register
/// costs a `4^n`-entry matrix, so experiments refuse anything wider.
pub const MAX_REGISTER_QUBITS: usize = 8;

/// Full experiment description. Serialized as JSON with a versioned
/// `schema` field; missing fields take the defaults below, unknown
/// fields are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Config format version; must equal [`CONFIG_SCHEMA`].
    pub schema: u32,
    /// Architectures to run.
    pub archs: Vec<Arch>,
    /// Register sizes to sweep, each at most [`MAX_REGISTER_QUBITS`].
    pub n_qubits: Vec<usize>,
    /// Devices generated per (architecture, register size) cell.
    pub instances: usize,
    /// Challenges evaluated per cell, shared across the cell's devices.
    pub challenges: usize,
    /// Measurement shots per response.
    pub shots: u64,
    /// Re-query rounds per challenge for reliability (beyond golden).
    pub repeats: usize,
    /// Root of every derived seed stream.
    pub master_seed: u64,
    /// Hardware profile name, or `"ideal"` for noise-free backends.
    pub profile: String,
    /// Override for the MF architecture's feedback rounds.
    pub feedback_rounds: Option<usize>,
    /// Override for the L architecture's block count.
    pub lindblad_blocks: Option<usize>,
    /// Rescale every architecture noise rate by a fresh uniform factor
    /// in `[0.9, 1.1]` on each re-query round, emulating drift.
    pub rate_jitter: bool,
    /// Splitting order for dissipative windows: `1` or `2`.
    pub trotter_order: u8,
    /// Splitting steps per dissipative window.
    pub trotter_steps: usize,
    /// Default output directory for persisted results.
    pub out_dir: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema: CONFIG_SCHEMA,
            archs: vec![Arch::D, Arch::Mf, Arch::L],
            n_qubits: vec![2, 4, 6, 8],
            instances: 50,
            challenges: 100,
            shots: 10_000,
            repeats: 5,
            master_seed: 1,
            profile: "ideal".into(),
            feedback_rounds: None,
            lindblad_blocks: None,
            rate_jitter: false,
            trotter_order: 2,
            trotter_steps: 32,
            out_dir: None,
        }
    }
}

impl ExperimentConfig {
    /// Reduced preset sized for an interactive machine: 20 devices,
    /// 50 challenges, 2000 shots per cell.
    pub fn desk_scale() -> Self {
        Self {
            instances: 20,
            challenges: 50,
            shots: 2000,
            ..Self::default()
        }
    }

    /// Checks every bound the protocol relies on.
    ///
    /// # Errors
    ///
    /// Returns [`QpufError::TooManyQubits`] for registers beyond the
    /// direct-simulation ceiling and [`QpufError::InvalidParameter`]
    /// for any other violated bound.
    pub fn validate(&self) -> Result<()> {
        if self.schema != CONFIG_SCHEMA {
            return Err(QpufError::InvalidParameter(format!(
                "unsupported config schema {} (this build reads schema {CONFIG_SCHEMA})",
                self.schema
            )));
        }
        if self.archs.is_empty() {
            return Err(QpufError::InvalidParameter(
                "config lists no architectures".into(),
            ));
        }
        if self.n_qubits.is_empty() {
            return Err(QpufError::InvalidParameter(
                "config lists no register sizes".into(),
            ));
        }
        for &n in &self.n_qubits {
            if n > MAX_REGISTER_QUBITS {
                return Err(QpufError::TooManyQubits {
                    requested: n,
                    limit: MAX_REGISTER_QUBITS,
                });
            }
            if n < MIN_QUBITS {
                return Err(QpufError::InvalidParameter(format!(
                    "register size {n} is below the minimum of {MIN_QUBITS}"
                )));
            }
        }
        if self.instances < 2 {
            return Err(QpufError::InvalidParameter(
                "uniqueness needs at least two device instances".into(),
            ));
        }
        if self.challenges == 0 || self.shots == 0 || self.repeats == 0 {
            return Err(QpufError::InvalidParameter(
                "challenges, shots and repeats must all be positive".into(),
            ));
        }
        if self.trotter_steps == 0 {
            return Err(QpufError::InvalidParameter(
                "window evolution needs at least one splitting step".into(),
            ));
        }
        self.trotter_order()?;
        self.resolve_profile()?;
        Ok(())
    }

    /// The configured splitting order.
    ///
    /// # Errors
    ///
    /// Returns [`QpufError::InvalidParameter`] unless the order is 1 or 2.
    pub fn trotter_order(&self) -> Result<TrotterOrder> {
        match self.trotter_order {
            1 => Ok(TrotterOrder::First),
            2 => Ok(TrotterOrder::Second),
            other => Err(QpufError::InvalidParameter(format!(
                "splitting order must be 1 or 2, got {other}"
            ))),
        }
    }

    /// Resolves the profile name: `None` for `"ideal"`, the built-in
    /// profile otherwise.
    ///
    /// # Errors
    ///
    /// Returns [`QpufError::InvalidParameter`] for unknown names.
    pub fn resolve_profile(&self) -> Result<Option<BackendProfile>> {
        if self.profile.eq_ignore_ascii_case("ideal") {
            return Ok(None);
        }
        builtin_profile(&self.profile).map(Some).ok_or_else(|| {
            let known: Vec<&str> = vec!["ideal", "athens", "santiago", "melbourne"];
            QpufError::InvalidParameter(format!(
                "unknown profile {:?} (expected one of {})",
                self.profile,
                known.join(", ")
            ))
        })
    }

    /// Serializes to pretty JSON (stable field order).
    ///
    /// # Errors
    ///
    /// Propagates serialization failures.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses a config from JSON and validates it.
    ///
    /// # Errors
    ///
    /// Returns parse errors and everything [`Self::validate`] rejects.
    pub fn from_json(json: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(json)?;
        config.validate()?;
        Ok(config)
    }
}

/// Sampling seed for one `(instance, challenge, round)` query. Round 0
/// is the golden (enrollment) response; rounds `1..=repeats` are the
/// re-query rounds. Deriving from the instance seed keeps every
/// device's shot stream disjoint from the challenge stream and from
/// other devices.
pub fn shot_seed(instance_seed: u64, challenge_bits: &str, round: usize) -> u64 {
    child_seed(instance_seed, &["shot", challenge_bits, &round.to_string()])
}

/// Drift seed for one re-query round when rate jitter is enabled;
/// separate stream from [`shot_seed`] so shot noise and parameter
/// drift stay independently reproducible.
pub fn drift_seed(instance_seed: u64, challenge_bits: &str, round: usize) -> u64 {
    child_seed(instance_seed, &["drift", challenge_bits, &round.to_string()])
}

/// Draws the shared challenge set for one cell: uniform over all
/// `n`-bit strings, without replacement whenever the space is at least
/// `count` (so an exhaustive request enumerates each challenge exactly
/// once), with replacement otherwise.
///
/// The stream depends only on `(master_seed, n_qubits)`, so every
/// architecture and device in a cell answers the same challenges.
///
/// # Errors
///
/// Returns [`QpufError::TooManyQubits`] beyond the simulation ceiling
/// and [`QpufError::InvalidParameter`] for an empty request.
pub fn sample_challenges(master_seed: u64, n_qubits: usize, count: usize) -> Result<Vec<Challenge>> {
    if n_qubits == 0 || n_qubits > MAX_REGISTER_QUBITS {
        return Err(QpufError::TooManyQubits {
            requested: n_qubits,
            limit: MAX_REGISTER_QUBITS,
        });
    }
    if count == 0 {
        return Err(QpufError::InvalidParameter(
            "challenge sets must be nonempty".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(child_seed(
        master_seed,
        &["challenge", &n_qubits.to_string()],
    ));
    let space = 1usize << n_qubits;
    let mut out = Vec::with_capacity(count);
    if count <= space {
        let mut seen = BTreeSet::new();
        while out.len() < count {
            let index = rng.gen_range(0..space);
            if seen.insert(index) {
                out.push(Challenge::new(&format_bitstring(index, n_qubits))?);
            }
        }
    } else {
        for _ in 0..count {
            let index = rng.gen_range(0..space);
            out.push(Challenge::new(&format_bitstring(index, n_qubits))?);
        }
    }
    Ok(out)
}

/// One archived challenge–response query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrpRecord {
    /// Device identifier (embeds architecture, register size, index).
    pub device_id: String,
    /// Challenge bitstring.
    pub challenge: String,
    /// Majority-voted response bitstring.
    pub response: String,
    /// Shots behind the response.
    pub shots: u64,
    /// Order-independent digest of the full shot histogram.
    pub histogram_digest: String,
    /// Sampling seed the shots were drawn with.
    pub seed: u64,
    /// 0 for the golden response, `1..=repeats` for re-query rounds.
    pub round: usize,
}

/// Header line for the challenge–response archive CSV.
pub const CRP_CSV_HEADER: &str = "device_id,challenge,response,shots,histogram_digest,seed,round";

impl CrpRecord {
    /// One CSV row matching [`CRP_CSV_HEADER`].
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.device_id,
            self.challenge,
            self.response,
            self.shots,
            self.histogram_digest,
            self.seed,
            self.round
        )
    }

    /// Parses one CSV row.
    ///
    /// # Errors
    ///
    /// Returns [`QpufError::Parse`] on malformed rows; `line` is for
    /// the error message only.
    pub fn from_csv_row(row: &str, line: usize) -> Result<Self> {
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 7 {
            return Err(QpufError::Parse {
                line,
                message: format!("expected 7 fields, got {}", fields.len()),
            });
        }
        let parse_u64 = |s: &str, what: &str| -> Result<u64> {
            s.parse().map_err(|_| QpufError::Parse {
                line,
                message: format!("{what} is not an integer: {s:?}"),
            })
        };
        Ok(Self {
            device_id: fields[0].to_string(),
            challenge: fields[1].to_string(),
            response: fields[2].to_string(),
            shots: parse_u64(fields[3], "shots")?,
            histogram_digest: fields[4].to_string(),
            seed: parse_u64(fields[5], "seed")?,
            round: parse_u64(fields[6], "round")? as usize,
        })
    }
}

/// Order-independent digest of a shot histogram (entries are already
/// sorted by outcome pattern).
fn digest_histogram(histogram: &BTreeMap<String, u64>) -> String {
    let canonical: String = histogram
        .iter()
        .map(|(pattern, count)| format!("{pattern}:{count};"))
        .collect();
    format!("{:016x}", hash64(&["histogram", &canonical]))
}

fn record_from(
    instance: &QpufInstance,
    challenge: &Challenge,
    response: &Response,
    seed: u64,
    round: usize,
) -> CrpRecord {
    CrpRecord {
        device_id: instance.device_id().to_string(),
        challenge: challenge.bits().to_string(),
        response: response.bits().to_string(),
        shots: response.shots(),
        histogram_digest: digest_histogram(response.histogram()),
        seed,
        round,
    }
}

/// Everything a finished experiment produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    /// The exact config the run answered to.
    pub config: ExperimentConfig,
    /// One report per (architecture, register size) cell, in sweep order.
    pub reports: Vec<MetricsReport>,
    /// The full challenge–response archive, cell-major and sorted by
    /// (instance, challenge, round) within each cell.
    pub records: Vec<CrpRecord>,
}

/// Runs the full protocol for one config.
///
/// Per (architecture, register size) cell: generate `instances` devices
/// from the master seed, draw one shared challenge set (collapsed to
/// its distinct values when the request exceeds the `2^n` possible
/// bitstrings), evaluate each (device, challenge) pair exactly once,
/// then sample the golden response (round 0) and `repeats` re-query
/// rounds from the resulting distribution under per-round seeds. Six
/// metrics summarize the cell:
/// classical uniformity / uniqueness / reliability from the archive,
/// and their trace-norm counterparts from the pre-measurement states.
///
/// Without rate jitter the re-query rounds re-sample an identical
/// distribution, so quantum reliability is exactly 1 by construction
/// and only shot noise moves the classical figure. With jitter each
/// round re-evaluates under perturbed rates and quantum reliability is
/// measured over all round pairs (golden included).
///
/// # Errors
///
/// Returns everything [`ExperimentConfig::validate`] rejects, and
/// propagates evaluation failures.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    let profile = config.resolve_profile()?;
    let order = config.trotter_order()?;
    let steps = config.trotter_steps;

    let mut reports = Vec::new();
    let mut records = Vec::new();
    for &arch in &config.archs {
        for &n in &config.n_qubits {
            let mut instances = Vec::with_capacity(config.instances);
            for index in 0..config.instances {
                let mut inst = qgen(arch, n, config.master_seed, index as u64)?;
                if let (Arch::Mf, Some(rounds)) = (arch, config.feedback_rounds) {
                    inst = inst.with_feedback_rounds(rounds)?;
                }
                if let (Arch::L, Some(blocks)) = (arch, config.lindblad_blocks) {
                    inst = inst.with_lindblad_blocks(blocks)?;
                }
                instances.push(inst);
            }
            let mut challenge_set = sample_challenges(config.master_seed, n, config.challenges)?;
            // At register sizes where the requested count exceeds the
            // 2^n distinct bitstrings the sample is drawn with
            // replacement; collapse it to distinct values. Repeat draws
            // would be byte-identical records (the shot stream is keyed
            // by the challenge, not the draw), so they add no
            // information and the archive keys records by
            // (device, challenge, round).
            let mut seen = BTreeSet::new();
            challenge_set.retain(|ch| seen.insert(ch.bits().to_string()));

            let mut cell_records: Vec<((usize, usize, usize), CrpRecord)> = Vec::new();
            let mut unif_sum = 0.0;
            let mut uniq_sum = 0.0;
            let mut drift_distance_sum = 0.0;
            let mut drift_pairs = 0usize;

            for (ci, ch) in challenge_set.iter().enumerate() {
                let mut states: Vec<DensityMatrix> = Vec::with_capacity(instances.len());
                for (di, inst) in instances.iter().enumerate() {
                    let exact =
                        evaluate_exact_configured(inst, ch, profile.as_ref(), None, order, steps)?;
                    let golden_seed = shot_seed(inst.seed(), ch.bits(), 0);
                    let golden = exact.sample(config.shots, golden_seed)?;
                    cell_records
                        .push(((di, ci, 0), record_from(inst, ch, &golden, golden_seed, 0)));

                    let mut round_states: Vec<DensityMatrix> = Vec::new();
                    for round in 1..=config.repeats {
                        let seed = shot_seed(inst.seed(), ch.bits(), round);
                        let response = if config.rate_jitter {
                            let drifted = evaluate_exact_configured(
                                inst,
                                ch,
                                profile.as_ref(),
                                Some(drift_seed(inst.seed(), ch.bits(), round)),
                                order,
                                steps,
                            )?;
                            let response = drifted.sample(config.shots, seed)?;
                            round_states.push(drifted.into_state());
                            response
                        } else {
                            exact.sample(config.shots, seed)?
                        };
                        cell_records
                            .push(((di, ci, round), record_from(inst, ch, &response, seed, round)));
                    }
                    if config.rate_jitter {
                        let mut rounds: Vec<&DensityMatrix> = vec![exact.state()];
                        rounds.extend(round_states.iter());
                        for a in 0..rounds.len() {
                            for b in (a + 1)..rounds.len() {
                                drift_distance_sum += rounds[a].trace_distance(rounds[b])?;
                                drift_pairs += 1;
                            }
                        }
                    }
                    states.push(exact.into_state());
                }
                unif_sum += metrics::uniformity_quantum(&states)?;
                for i in 0..states.len() {
                    for j in (i + 1)..states.len() {
                        uniq_sum +=
                            metrics::uniqueness_quantum(from_ref(&states[i]), from_ref(&states[j]))?;
                    }
                }
            }

            cell_records.sort_unstable_by_key(|(key, _)| *key);
            let cell_records: Vec<CrpRecord> =
                cell_records.into_iter().map(|(_, rec)| rec).collect();
            let archived = classical_metrics_from_records(&cell_records)?;
            let [cell] = archived.as_slice() else {
                return Err(QpufError::InvalidParameter(
                    "cell archive regrouped into more than one cell".into(),
                ));
            };

            let n_challenges = challenge_set.len();
            let device_pairs = config.instances * (config.instances - 1) / 2;
            reports.push(MetricsReport {
                arch: arch.to_string(),
                n_qubits: n,
                uniformity_pct: cell.uniformity_pct,
                uniqueness_pct: cell.uniqueness_pct,
                reliability_pct: cell.reliability_pct,
                uniformity_quantum: unif_sum / n_challenges as f64,
                uniqueness_quantum: uniq_sum / (n_challenges * device_pairs) as f64,
                reliability_quantum: if config.rate_jitter {
                    1.0 - drift_distance_sum / drift_pairs as f64
                } else {
                    1.0
                },
                instances: config.instances,
                challenges: n_challenges,
                shots: config.shots,
                repeats: config.repeats,
                seed: config.master_seed,
            });
            records.extend(cell_records);
        }
    }
    Ok(ExperimentOutcome {
        config: config.clone(),
        reports,
        records,
    })
}

/// Classical metrics recomputed from an archive, one per
/// (architecture, register size) cell found in it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveMetrics {
    pub arch: String,
    pub n_qubits: usize,
    pub uniformity_pct: f64,
    pub uniqueness_pct: f64,
    pub reliability_pct: f64,
}

/// Splits a device identifier like `MF-4q-007-0123456789abcdef` into
/// its architecture label and register size.
fn parse_device_id(device_id: &str) -> Result<(String, usize)> {
    let mut parts = device_id.split('-');
    let arch = parts.next().unwrap_or_default();
    let register = parts.next().unwrap_or_default();
    let n: Option<usize> = register
        .strip_suffix('q')
        .and_then(|digits| digits.parse().ok());
    match (arch.is_empty(), n) {
        (false, Some(n)) => Ok((arch.to_string(), n)),
        _ => Err(QpufError::Parse {
            line: 0,
            message: format!("malformed device id {device_id:?}"),
        }),
    }
}

fn bits_of(response: &str, line: usize) -> Result<Vec<u8>> {
    if response.is_empty() || response.bytes().any(|b| b != b'0' && b != b'1') {
        return Err(QpufError::Parse {
            line,
            message: format!("response is not a bitstring: {response:?}"),
        });
    }
    Ok(response.bytes().map(|b| u8::from(b == b'1')).collect())
}

/// Recomputes the classical uniformity / uniqueness / reliability
/// triple for every cell in a challenge–response archive. This is also
/// the path [`run_experiment`] itself reports classical metrics
/// through, so recomputation from a persisted archive reproduces the
/// in-memory reports exactly.
///
/// Within a cell, devices and challenges are aligned by sorted
/// identifier; every (device, challenge) pair must carry a golden
/// round 0 and the same set of re-query rounds.
///
/// # Errors
///
/// Returns [`QpufError::Parse`] for malformed records and
/// [`QpufError::DimensionMismatch`] for ragged archives.
pub fn classical_metrics_from_records(records: &[CrpRecord]) -> Result<Vec<ArchiveMetrics>> {
    if records.is_empty() {
        return Err(QpufError::InvalidParameter(
            "archive holds no records".into(),
        ));
    }
    type DeviceRounds = BTreeMap<usize, Vec<u8>>;
    type DeviceChallenges<'a> = BTreeMap<&'a str, DeviceRounds>;
    let mut cells: BTreeMap<(String, usize), BTreeMap<&str, DeviceChallenges<'_>>> =
        BTreeMap::new();
    for (i, rec) in records.iter().enumerate() {
        let key = parse_device_id(&rec.device_id)?;
        let previous = cells
            .entry(key)
            .or_default()
            .entry(&rec.device_id)
            .or_default()
            .entry(&rec.challenge)
            .or_default()
            .insert(rec.round, bits_of(&rec.response, i + 1)?);
        if previous.is_some() {
            return Err(QpufError::Parse {
                line: i + 1,
                message: format!(
                    "duplicate record for {} / {} round {}",
                    rec.device_id, rec.challenge, rec.round
                ),
            });
        }
    }

    let mut out = Vec::with_capacity(cells.len());
    for ((arch, n_qubits), devices) in cells {
        let max_round = devices
            .values()
            .flat_map(BTreeMap::values)
            .flat_map(BTreeMap::keys)
            .copied()
            .max()
            .unwrap_or(0);
        if max_round == 0 {
            return Err(QpufError::InvalidParameter(format!(
                "cell {arch}/{n_qubits}q has no re-query rounds, so reliability is undefined"
            )));
        }
        let mut per_device_golden: Vec<Vec<Vec<u8>>> = Vec::with_capacity(devices.len());
        let mut golden_flat: Vec<Vec<u8>> = Vec::new();
        let mut rounds_flat: Vec<Vec<Vec<u8>>> = vec![Vec::new(); max_round];
        for (device_id, challenges) in &devices {
            let mut device_golden = Vec::with_capacity(challenges.len());
            for (challenge, rounds) in challenges {
                if rounds.len() != max_round + 1 || !rounds.contains_key(&0) {
                    return Err(QpufError::DimensionMismatch(format!(
                        "ragged archive: {device_id} / {challenge} holds {} of {} rounds",
                        rounds.len(),
                        max_round + 1
                    )));
                }
                device_golden.push(rounds[&0].clone());
                golden_flat.push(rounds[&0].clone());
                for (&round, bits) in rounds.iter().filter(|(&round, _)| round > 0) {
                    rounds_flat[round - 1].push(bits.clone());
                }
            }
            per_device_golden.push(device_golden);
        }
        out.push(ArchiveMetrics {
            arch,
            n_qubits,
            uniformity_pct: metrics::uniformity_classical(&golden_flat)?,
            uniqueness_pct: metrics::uniqueness_classical(&per_device_golden)?,
            reliability_pct: metrics::reliability_classical(&golden_flat, &rounds_flat)?,
        });
    }
    Ok(out)
}

/// File names written by [`persist_outcome`].
pub const CONFIG_FILE: &str = "config.json";
pub const REPORTS_JSON_FILE: &str = "reports.json";
pub const REPORTS_CSV_FILE: &str = "reports.csv";
pub const CRPS_FILE: &str = "crps.csv";

/// Writes an outcome into `dir` (created if needed): the resolved
/// config, metric reports as JSON and CSV, and the full
/// challenge–response archive as CSV. All four files are deterministic
/// functions of the outcome.
///
/// # Errors
///
/// Propagates I/O and serialization failures.
pub fn persist_outcome(outcome: &ExperimentOutcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut config_json = outcome.config.to_json()?;
    config_json.push('\n');
    fs::write(dir.join(CONFIG_FILE), config_json)?;

    let mut reports_json = serde_json::to_string_pretty(&outcome.reports)?;
    reports_json.push('\n');
    fs::write(dir.join(REPORTS_JSON_FILE), reports_json)?;

    let mut reports_csv = String::from(CSV_HEADER);
    reports_csv.push('\n');
    for report in &outcome.reports {
        for row in report.to_csv_rows() {
            reports_csv.push_str(&row);
            reports_csv.push('\n');
        }
    }
    fs::write(dir.join(REPORTS_CSV_FILE), reports_csv)?;

    let mut crps_csv = String::from(CRP_CSV_HEADER);
    crps_csv.push('\n');
    for record in &outcome.records {
        crps_csv.push_str(&record.to_csv_row());
        crps_csv.push('\n');
    }
    fs::write(dir.join(CRPS_FILE), crps_csv)?;
    Ok(())
}

/// Loads a challenge–response archive written by [`persist_outcome`].
///
/// # Errors
///
/// Returns [`QpufError::Parse`] on a bad header or malformed rows, and
/// propagates I/O failures.
pub fn load_records(path: &Path) -> Result<Vec<CrpRecord>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == CRP_CSV_HEADER => {}
        _ => {
            return Err(QpufError::Parse {
                line: 1,
                message: format!("expected archive header {CRP_CSV_HEADER:?}"),
            })
        }
    }
    lines
        .filter(|(_, row)| !row.is_empty())
        .map(|(i, row)| CrpRecord::from_csv_row(row, i + 1))
        .collect()
}

/// Loads metric reports written by [`persist_outcome`].
///
/// # Errors
///
/// Propagates I/O and parse failures.
pub fn load_reports(path: &Path) -> Result<Vec<MetricsReport>> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Metric names in report order, reused by the plot series files.
const METRIC_NAMES: [&str; 6] = [
    "uniformity_pct",
    "uniqueness_pct",
    "reliability_pct",
    "uniformity_quantum",
    "uniqueness_quantum",
    "reliability_quantum",
];

fn metric_value(report: &MetricsReport, name: &str) -> f64 {
    match name {
        "uniformity_pct" => report.uniformity_pct,
        "uniqueness_pct" => report.uniqueness_pct,
        "reliability_pct" => report.reliability_pct,
        "uniformity_quantum" => report.uniformity_quantum,
        "uniqueness_quantum" => report.uniqueness_quantum,
        "reliability_quantum" => report.reliability_quantum,
        _ => unreachable!("metric names are fixed"),
    }
}

/// Emits plotting inputs into `dir`: one CSV per metric with rows
/// `(profile, arch, n_qubits, seed, value)` — register size on the x
/// axis, one series per (profile, architecture) — plus one calibration
/// histogram CSV per built-in profile whose bin edges span the
/// documented calibration bounds.
///
/// `runs` pairs each report with the profile label of the run that
/// produced it, so sweeps over several profiles can be merged into one
/// plot set.
///
/// # Errors
///
/// Propagates I/O failures.
pub fn emit_plot_data(runs: &[(String, MetricsReport)], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut sorted: Vec<&(String, MetricsReport)> = runs.iter().collect();
    sorted.sort_by(|(pa, ra), (pb, rb)| {
        (pa, &ra.arch, ra.n_qubits, ra.seed).cmp(&(pb, &rb.arch, rb.n_qubits, rb.seed))
    });
    for name in METRIC_NAMES {
        let mut csv = String::from("profile,arch,n_qubits,seed,value\n");
        for (profile, report) in &sorted {
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                profile,
                report.arch,
                report.n_qubits,
                report.seed,
                metric_value(report, name)
            ));
        }
        fs::write(dir.join(format!("{name}.csv")), csv)?;
    }

    const BINS: usize = 8;
    for profile in builtin_profiles() {
        let bounds = calibration_bounds(profile.name())
            .expect("built-in profiles have documented bounds");
        let mut csv = String::from("quantity,bin_lo,bin_hi,count\n");
        for (quantity, lo, hi) in bounds {
            let width = (hi - lo) / BINS as f64;
            let mut counts = [0usize; BINS];
            for q in profile.qubits() {
                let value = match quantity {
                    "t1_us" => q.t1_us,
                    "t2_us" => q.t2_us,
                    "readout_error" => q.readout_error,
                    _ => unreachable!("quantity names are fixed"),
                };
                let bin = (((value - lo) / width).floor() as isize).clamp(0, BINS as isize - 1);
                counts[bin as usize] += 1;
            }
            for (b, count) in counts.iter().enumerate() {
                let bin_lo = lo + b as f64 * width;
                let bin_hi = if b + 1 == BINS { hi } else { lo + (b + 1) as f64 * width };
                csv.push_str(&format!("{quantity},{bin_lo},{bin_hi},{count}\n"));
            }
        }
        fs::write(dir.join(format!("calibration_{}.csv", profile.name())), csv)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scratch_dir(label: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("qpuf-harness-{label}"));
        let _ = fs::remove_dir_all(&dir);
        dir
    }

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            archs: vec![Arch::D],
            n_qubits: vec![2],
            instances: 3,
            challenges: 4,
            shots: 200,
            repeats: 2,
            master_seed: 11,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn default_config_is_valid_and_round_trips_through_json() {
        let config = ExperimentConfig::default();
        config.validate().unwrap();
        assert_eq!(config.schema, CONFIG_SCHEMA);
        assert_eq!(
            (config.instances, config.challenges, config.shots, config.repeats),
            (50, 100, 10_000, 5)
        );
        let desk = ExperimentConfig::desk_scale();
        desk.validate().unwrap();
        assert_eq!((desk.instances, desk.challenges, desk.shots), (20, 50, 2000));

        let json = config.to_json().unwrap();
        assert_eq!(ExperimentConfig::from_json(&json).unwrap(), config);
        // Partial configs inherit defaults; the arch spelling matches
        // the display form.
        let partial = ExperimentConfig::from_json(r#"{"archs": ["MF"], "master_seed": 9}"#).unwrap();
        assert_eq!(partial.archs, vec![Arch::Mf]);
        assert_eq!(partial.master_seed, 9);
        assert_eq!(partial.shots, 10_000);
    }

    #[test]
    fn config_validation_rejects_bad_schemas_guards_and_profiles() {
        let mut config = tiny_config();
        config.schema = 2;
        assert!(matches!(
            config.validate(),
            Err(QpufError::InvalidParameter(_))
        ));

        let mut config = tiny_config();
        config.n_qubits = vec![9];
        assert!(matches!(
            config.validate(),
            Err(QpufError::TooManyQubits { requested: 9, limit: 8 })
        ));

        let mut config = tiny_config();
        config.instances = 1;
        assert!(config.validate().is_err());

        let mut config = tiny_config();
        config.profile = "lagos".into();
        assert!(config.validate().is_err());

        let mut config = tiny_config();
        config.trotter_order = 3;
        assert!(config.validate().is_err());

        // Unknown JSON fields are config typos, not extensions.
        assert!(ExperimentConfig::from_json(r#"{"shotz": 5}"#).is_err());
    }

    #[test]
    fn challenge_sampling_is_deterministic_and_deduplicated() {
        let a = sample_challenges(5, 3, 6).unwrap();
        let b = sample_challenges(5, 3, 6).unwrap();
        assert_eq!(a, b);
        let distinct: BTreeSet<&str> = a.iter().map(Challenge::bits).collect();
        assert_eq!(distinct.len(), 6, "within-space requests draw without replacement");
        assert!(a.iter().all(|c| c.len() == 3));

        // Exhaustive request enumerates the whole space exactly once.
        let all = sample_challenges(5, 2, 4).unwrap();
        let distinct: BTreeSet<&str> = all.iter().map(Challenge::bits).collect();
        assert_eq!(distinct.len(), 4);

        // Oversubscribed requests fall back to replacement.
        let over = sample_challenges(5, 2, 10).unwrap();
        assert_eq!(over.len(), 10);

        // Different register sizes use different streams.
        let c3 = sample_challenges(5, 3, 4).unwrap();
        let c4 = sample_challenges(5, 4, 4).unwrap();
        assert_ne!(
            c3.iter().map(Challenge::ones).collect::<Vec<_>>(),
            c4.iter().map(Challenge::ones).collect::<Vec<_>>()
        );

        assert!(sample_challenges(5, 9, 4).is_err());
        assert!(sample_challenges(5, 3, 0).is_err());
    }

    #[test]
    fn seed_streams_are_disjoint_and_collision_free() {
        // Instance, challenge, shot and drift streams must never
        // collide across a realistic experiment's worth of draws.
        let mut seen = BTreeSet::new();
        let mut draws = 0usize;
        for master in [1u64, 2] {
            for n in [2usize, 4] {
                seen.insert(child_seed(master, &["challenge", &n.to_string()]));
                draws += 1;
                for index in 0..40 {
                    let inst_seed =
                        child_seed(master, &["instance", &n.to_string(), &index.to_string()]);
                    seen.insert(inst_seed);
                    draws += 1;
                    for challenge in ["00", "01", "10", "11"] {
                        for round in 0..4 {
                            seen.insert(shot_seed(inst_seed, challenge, round));
                            seen.insert(drift_seed(inst_seed, challenge, round));
                            draws += 2;
                        }
                    }
                }
            }
        }
        assert_eq!(seen.len(), draws, "seed streams collided");
    }

    #[test]
    fn crp_records_round_trip_through_csv() {
        let record = CrpRecord {
            device_id: "MF-4q-007-00c0ffee00c0ffee".into(),
            challenge: "0110".into(),
            response: "1011".into(),
            shots: 2000,
            histogram_digest: "0123456789abcdef".into(),
            seed: 42,
            round: 3,
        };
        let row = record.to_csv_row();
        assert_eq!(CrpRecord::from_csv_row(&row, 1).unwrap(), record);
        assert!(CrpRecord::from_csv_row("too,few,fields", 1).is_err());
        assert!(CrpRecord::from_csv_row("a,b,c,notanumber,e,1,2", 1).is_err());
    }

    #[test]
    fn experiments_are_deterministic_and_sized_by_the_protocol() {
        let config = tiny_config();
        let once = run_experiment(&config).unwrap();
        let twice = run_experiment(&config).unwrap();
        assert_eq!(once, twice);

        // instances × challenges × (1 golden + repeats) records.
        assert_eq!(once.records.len(), 3 * 4 * (1 + 2));
        assert_eq!(once.reports.len(), 1);
        let report = &once.reports[0];
        assert_eq!((report.arch.as_str(), report.n_qubits), ("D", 2));
        for value in [
            report.uniformity_pct,
            report.uniqueness_pct,
            report.reliability_pct,
        ] {
            assert!((0.0..=100.0).contains(&value), "percentage out of range: {value}");
        }
        assert!(report.uniformity_quantum >= 0.0);
        assert!((0.0..=2.0).contains(&report.uniqueness_quantum));
        assert_eq!(report.reliability_quantum, 1.0, "no jitter, no drift");

        // A different master seed moves the archive.
        let other = run_experiment(&ExperimentConfig {
            master_seed: 12,
            ..tiny_config()
        })
        .unwrap();
        assert_ne!(once.records, other.records);
    }

    #[test]
    fn archive_recomputation_reproduces_the_reported_classical_metrics() {
        let outcome = run_experiment(&tiny_config()).unwrap();
        let recomputed = classical_metrics_from_records(&outcome.records).unwrap();
        assert_eq!(recomputed.len(), 1);
        let report = &outcome.reports[0];
        let cell = &recomputed[0];
        assert_eq!((cell.arch.as_str(), cell.n_qubits), ("D", 2));
        // Exact equality: the report is defined through the archive.
        assert_eq!(cell.uniformity_pct, report.uniformity_pct);
        assert_eq!(cell.uniqueness_pct, report.uniqueness_pct);
        assert_eq!(cell.reliability_pct, report.reliability_pct);
    }

    #[test]
    fn exhaustive_challenge_requests_enumerate_the_space() {
        // challenges == 2^n means each device answers every 2-bit
        // challenge exactly once per round.
        let outcome = run_experiment(&tiny_config()).unwrap();
        let golden: Vec<&CrpRecord> = outcome.records.iter().filter(|r| r.round == 0).collect();
        assert_eq!(golden.len(), 3 * 4);
        let per_device: BTreeMap<&str, BTreeSet<&str>> =
            golden.iter().fold(BTreeMap::new(), |mut acc, r| {
                acc.entry(&r.device_id).or_default().insert(&r.challenge);
                acc
            });
        for (device, challenges) in per_device {
            assert_eq!(challenges.len(), 4, "{device} missed a challenge");
        }
    }

    #[test]
    fn oversized_challenge_requests_collapse_to_distinct_challenges() {
        // 50 draws from the 4 possible 2-bit challenges repeat; the cell
        // must keep one record per distinct challenge so the archive
        // stays key-unique and recomputable.
        let config = ExperimentConfig {
            challenges: 50,
            ..tiny_config()
        };
        let outcome = run_experiment(&config).unwrap();
        let golden: Vec<&CrpRecord> = outcome.records.iter().filter(|r| r.round == 0).collect();
        assert_eq!(golden.len(), 3 * 4);
        let report = &outcome.reports[0];
        // The report counts the distinct challenges actually measured;
        // the request itself stays in the persisted config.
        assert_eq!(report.challenges, 4);
        let recomputed = classical_metrics_from_records(&outcome.records).unwrap();
        assert_eq!(recomputed[0].uniformity_pct, report.uniformity_pct);
    }

    #[test]
    fn rate_jitter_perturbs_reliability_but_stays_deterministic() {
        let config = ExperimentConfig {
            rate_jitter: true,
            ..tiny_config()
        };
        let once = run_experiment(&config).unwrap();
        let twice = run_experiment(&config).unwrap();
        assert_eq!(once, twice);
        let report = &once.reports[0];
        assert!(
            report.reliability_quantum < 1.0,
            "drift must move the quantum states"
        );
        assert!(report.reliability_quantum > 0.9, "±10% drift is a small perturbation");
    }

    #[test]
    fn architecture_knobs_reach_the_generated_instances() {
        let outcome = run_experiment(&ExperimentConfig {
            archs: vec![Arch::Mf],
            feedback_rounds: Some(2),
            ..tiny_config()
        })
        .unwrap();
        // Feedback rounds shift the device ids' architecture only via
        // params, so verify through a regenerated instance.
        assert!(outcome.records.iter().all(|r| r.device_id.starts_with("MF-")));
        let inst = qgen(Arch::Mf, 2, 11, 0)
            .unwrap()
            .with_feedback_rounds(2)
            .unwrap();
        assert_eq!(inst.feedback_rounds(), Some(2));
        let golden: Vec<&CrpRecord> = outcome
            .records
            .iter()
            .filter(|r| r.round == 0 && r.device_id == inst.device_id())
            .collect();
        let ch = Challenge::new(&golden[0].challenge).unwrap();
        let direct = evaluate_exact_configured(&inst, &ch, None, None, TrotterOrder::Second, 32)
            .unwrap()
            .sample(200, shot_seed(inst.seed(), ch.bits(), 0))
            .unwrap();
        assert_eq!(golden[0].response, direct.bits());
    }

    #[test]
    fn persisted_outcomes_round_trip_and_rewrite_identically() {
        let dir = scratch_dir("persist");
        let outcome = run_experiment(&tiny_config()).unwrap();
        persist_outcome(&outcome, &dir).unwrap();

        let records = load_records(&dir.join(CRPS_FILE)).unwrap();
        assert_eq!(records, outcome.records);
        let reports = load_reports(&dir.join(REPORTS_JSON_FILE)).unwrap();
        assert_eq!(reports, outcome.reports);
        let config = ExperimentConfig::from_json(
            &fs::read_to_string(dir.join(CONFIG_FILE)).unwrap(),
        )
        .unwrap();
        assert_eq!(config, outcome.config);

        // Byte-identical rewrite.
        let first: Vec<String> = [CONFIG_FILE, REPORTS_JSON_FILE, REPORTS_CSV_FILE, CRPS_FILE]
            .iter()
            .map(|f| fs::read_to_string(dir.join(f)).unwrap())
            .collect();
        persist_outcome(&outcome, &dir).unwrap();
        for (file, before) in [CONFIG_FILE, REPORTS_JSON_FILE, REPORTS_CSV_FILE, CRPS_FILE]
            .iter()
            .zip(&first)
        {
            assert_eq!(&fs::read_to_string(dir.join(file)).unwrap(), before);
        }
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn ragged_or_malformed_archives_are_rejected() {
        let outcome = run_experiment(&tiny_config()).unwrap();
        let mut records = outcome.records.clone();
        records.pop();
        assert!(classical_metrics_from_records(&records).is_err());

        let mut records = outcome.records.clone();
        records[0].response = "2x".into();
        assert!(classical_metrics_from_records(&records).is_err());

        let mut records = outcome.records;
        records[0].device_id = "nodash".into();
        assert!(classical_metrics_from_records(&records).is_err());
    }

    #[test]
    fn plot_data_series_and_calibration_histograms_are_complete() {
        let dir = scratch_dir("plotdata");
        let outcome = run_experiment(&tiny_config()).unwrap();
        let runs: Vec<(String, MetricsReport)> = outcome
            .reports
            .iter()
            .map(|r| (outcome.config.profile.clone(), r.clone()))
            .collect();
        emit_plot_data(&runs, &dir).unwrap();

        for name in METRIC_NAMES {
            let text = fs::read_to_string(dir.join(format!("{name}.csv"))).unwrap();
            let mut lines = text.lines();
            assert_eq!(lines.next(), Some("profile,arch,n_qubits,seed,value"));
            assert_eq!(lines.count(), outcome.reports.len());
        }
        for profile in builtin_profiles() {
            let text =
                fs::read_to_string(dir.join(format!("calibration_{}.csv", profile.name())))
                    .unwrap();
            // Header plus 8 bins for each of the three quantities; the
            // bins of each quantity count every qubit exactly once.
            assert_eq!(text.lines().count(), 1 + 3 * 8);
            for quantity in ["t1_us", "t2_us", "readout_error"] {
                let total: usize = text
                    .lines()
                    .skip(1)
                    .filter(|l| l.starts_with(quantity))
                    .map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap())
                    .sum();
                assert_eq!(total, profile.n_qubits(), "{} {quantity}", profile.name());
            }
        }
        fs::remove_dir_all(&dir).unwrap();
    }
}

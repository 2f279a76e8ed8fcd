//! Command-line front end: generation, evaluation, experiments, metric
//! recomputation, tomography, profile inspection and plot-data export.
//!
//! Exit codes: `0` on success, `1` on usage or runtime errors, `2` when
//! a request exceeds the direct-simulation register ceiling. Failures
//! print a single-line diagnostic on stderr.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::error::{QpufError, Result};
use crate::harness::{
    classical_metrics_from_records, emit_plot_data, load_records, load_reports, persist_outcome,
    run_experiment, shot_seed, ExperimentConfig, CONFIG_FILE, MAX_REGISTER_QUBITS,
    REPORTS_JSON_FILE,
};
use crate::linalg::ComplexMatrix;
use crate::metrics::{MetricsReport, CSV_HEADER};
use crate::profile::{builtin_profile, builtin_profiles, BackendProfile};
use crate::qpuf::{apply_as_channel, evaluate_exact, qgen, Arch, Challenge, MIN_QUBITS};
use crate::seeds::child_seed;
use crate::tomography::{parameter_count, sample_complexity, ChannelKind, Statistics, TomographyJob};

/// Default master seed when none is supplied.
const DEFAULT_SEED: u64 = 1;
/// Default shots for one-off evaluations.
const DEFAULT_SHOTS: u64 = 10_000;
/// Widest register the channel-reconstruction command accepts.
const TOMOGRAPHY_QUBIT_LIMIT: usize = 2;

#[derive(Parser)]
#[command(
    name = "qpuf",
    about = "Simulate and evaluate noise-based quantum PUFs",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: GlobalArgs,
}

#[derive(Args)]
struct GlobalArgs {
    /// Master seed every derived stream hangs off.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Hardware profile name, or "ideal" (the default).
    #[arg(long, global = true)]
    profile: Option<String>,
    /// Output destination: a file for single-document commands, a
    /// directory for experiment and plotdata.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Experiment config JSON file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a device instance and print its public description.
    Gen {
        /// Architecture: D, MF or L.
        #[arg(long)]
        arch: String,
        /// Register size in qubits.
        #[arg(long)]
        n: usize,
        /// Device index within the master seed's family.
        #[arg(long, default_value_t = 0)]
        index: u64,
    },
    /// Evaluate one challenge and print the sampled response.
    Eval {
        /// Architecture: D, MF or L.
        #[arg(long)]
        arch: String,
        /// Challenge bitstring; its length sets the register size.
        #[arg(long)]
        challenge: String,
        /// Device index within the master seed's family.
        #[arg(long, default_value_t = 0)]
        index: u64,
        /// Measurement shots behind the response.
        #[arg(long, default_value_t = DEFAULT_SHOTS)]
        shots: u64,
    },
    /// Run a full experiment; prints the metric reports and persists
    /// everything under --out when given.
    Experiment {
        /// Start from the reduced interactive preset (20 devices, 50
        /// challenges, 2000 shots) instead of the full protocol.
        #[arg(long)]
        desk_scale: bool,
        /// Architectures to run, comma separated.
        #[arg(long, value_delimiter = ',')]
        arch: Option<Vec<String>>,
        /// Register sizes to sweep, comma separated.
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<usize>>,
        /// Devices per cell.
        #[arg(long)]
        instances: Option<usize>,
        /// Challenges per cell.
        #[arg(long)]
        challenges: Option<usize>,
        /// Shots per response.
        #[arg(long)]
        shots: Option<u64>,
        /// Re-query rounds per challenge.
        #[arg(long)]
        repeats: Option<usize>,
        /// Rescale noise rates per round to emulate drift.
        #[arg(long)]
        rate_jitter: bool,
        /// MF feedback-round override.
        #[arg(long)]
        feedback_rounds: Option<usize>,
        /// L block-count override.
        #[arg(long)]
        lindblad_blocks: Option<usize>,
        /// Splitting order for dissipative windows (1 or 2).
        #[arg(long)]
        trotter_order: Option<u8>,
        /// Splitting steps per dissipative window.
        #[arg(long)]
        trotter_steps: Option<usize>,
    },
    /// Recompute classical metrics from a persisted archive.
    Metrics {
        /// Challenge–response archive (crps.csv) to recompute from.
        #[arg(long)]
        crps: PathBuf,
    },
    /// Reconstruct the channel one evaluation applies and report its
    /// structure and learning cost.
    Tomography {
        /// Architecture: D, MF or L.
        #[arg(long)]
        arch: String,
        /// Challenge bitstring; its length sets the register size.
        #[arg(long)]
        challenge: String,
        /// Device index within the master seed's family.
        #[arg(long, default_value_t = 0)]
        index: u64,
        /// Estimate expectations from this many shots per setting
        /// instead of reading them exactly.
        #[arg(long)]
        shots: Option<u64>,
    },
    /// List built-in hardware profiles, or export one as JSON.
    Profiles {
        /// Profile to export in full.
        #[arg(long)]
        name: Option<String>,
    },
    /// Merge experiment directories into plot-ready CSV series.
    Plotdata {
        /// Experiment output directories, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        runs: Vec<PathBuf>,
    },
}

/// Parses and dispatches a full argument vector (including the program
/// name) and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let message = e.to_string();
            let first = message
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments");
            let first = first.strip_prefix("error: ").unwrap_or(first);
            eprintln!("error: {first} (try --help)");
            return 1;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e @ QpufError::TooManyQubits { .. }) => {
            eprintln!("error: {e}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Writes `document` to the `--out` file when given, stdout otherwise.
fn deliver(out: Option<&Path>, document: &str) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            fs::write(path, document)?;
        }
        None => print!("{document}"),
    }
    Ok(())
}

fn resolve_profile_flag(name: Option<&str>) -> Result<Option<BackendProfile>> {
    match name {
        None => Ok(None),
        Some(n) if n.eq_ignore_ascii_case("ideal") => Ok(None),
        Some(n) => builtin_profile(n).map(Some).ok_or_else(|| {
            QpufError::InvalidParameter(format!(
                "unknown profile {n:?} (expected one of ideal, athens, santiago, melbourne)"
            ))
        }),
    }
}

/// Rejects register sizes the density-matrix lane cannot hold.
fn check_register_ceiling(n: usize) -> Result<()> {
    if n > MAX_REGISTER_QUBITS {
        return Err(QpufError::TooManyQubits {
            requested: n,
            limit: MAX_REGISTER_QUBITS,
        });
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    let seed = cli.global.seed.unwrap_or(DEFAULT_SEED);
    let out = cli.global.out.as_deref();
    match cli.command {
        Command::Gen { arch, n, index } => {
            check_register_ceiling(n)?;
            let arch: Arch = arch.parse()?;
            let instance = qgen(arch, n, seed, index)?;
            deliver(out, &format!("{}\n", instance.export_json()))
        }
        Command::Eval {
            arch,
            challenge,
            index,
            shots,
        } => {
            let arch: Arch = arch.parse()?;
            let challenge = Challenge::new(&challenge)?;
            check_register_ceiling(challenge.len())?;
            let profile = resolve_profile_flag(cli.global.profile.as_deref())?;
            let instance = qgen(arch, challenge.len(), seed, index)?;
            let exact = evaluate_exact(&instance, &challenge, profile.as_ref())?;
            let sample_seed = shot_seed(instance.seed(), challenge.bits(), 0);
            let response = exact.sample(shots, sample_seed)?;
            let document = serde_json::to_string_pretty(&serde_json::json!({
                "device_id": instance.device_id(),
                "challenge": challenge.bits(),
                "profile": cli.global.profile.as_deref().unwrap_or("ideal"),
                "shots": shots,
                "seed": sample_seed,
                "response": response.bits(),
                "histogram": response.histogram(),
            }))?;
            deliver(out, &format!("{document}\n"))
        }
        Command::Experiment {
            desk_scale,
            arch,
            n,
            instances,
            challenges,
            shots,
            repeats,
            rate_jitter,
            feedback_rounds,
            lindblad_blocks,
            trotter_order,
            trotter_steps,
        } => {
            let mut config = match &cli.global.config {
                Some(path) => ExperimentConfig::from_json(&fs::read_to_string(path)?)?,
                None if desk_scale => ExperimentConfig::desk_scale(),
                None => ExperimentConfig::default(),
            };
            if cli.global.config.is_some() && desk_scale {
                return Err(QpufError::InvalidParameter(
                    "--desk-scale and --config are mutually exclusive".into(),
                ));
            }
            if let Some(seed) = cli.global.seed {
                config.master_seed = seed;
            }
            if let Some(profile) = &cli.global.profile {
                config.profile = profile.clone();
            }
            if let Some(archs) = arch {
                config.archs = archs
                    .iter()
                    .map(|a| a.parse())
                    .collect::<Result<Vec<Arch>>>()?;
            }
            if let Some(n) = n {
                config.n_qubits = n;
            }
            if let Some(v) = instances {
                config.instances = v;
            }
            if let Some(v) = challenges {
                config.challenges = v;
            }
            if let Some(v) = shots {
                config.shots = v;
            }
            if let Some(v) = repeats {
                config.repeats = v;
            }
            if rate_jitter {
                config.rate_jitter = true;
            }
            if feedback_rounds.is_some() {
                config.feedback_rounds = feedback_rounds;
            }
            if lindblad_blocks.is_some() {
                config.lindblad_blocks = lindblad_blocks;
            }
            if let Some(v) = trotter_order {
                config.trotter_order = v;
            }
            if let Some(v) = trotter_steps {
                config.trotter_steps = v;
            }
            // The destination is an invocation detail: --out overrides
            // the config's default without being folded back into the
            // persisted config, which must not depend on where it
            // happens to be written.
            let destination = out
                .map(Path::to_path_buf)
                .or_else(|| config.out_dir.clone().map(PathBuf::from));

            let outcome = run_experiment(&config)?;
            if let Some(dir) = &destination {
                persist_outcome(&outcome, dir)?;
            }
            let mut table = String::from(CSV_HEADER);
            table.push('\n');
            for report in &outcome.reports {
                for row in report.to_csv_rows() {
                    table.push_str(&row);
                    table.push('\n');
                }
            }
            print!("{table}");
            Ok(())
        }
        Command::Metrics { crps } => {
            let records = load_records(&crps)?;
            let cells = classical_metrics_from_records(&records)?;
            let mut table = String::from("arch,n_qubits,metric,value\n");
            for cell in &cells {
                for (name, value) in [
                    ("uniformity_pct", cell.uniformity_pct),
                    ("uniqueness_pct", cell.uniqueness_pct),
                    ("reliability_pct", cell.reliability_pct),
                ] {
                    table.push_str(&format!("{},{},{name},{value}\n", cell.arch, cell.n_qubits));
                }
            }
            deliver(out, &table)
        }
        Command::Tomography {
            arch,
            challenge,
            index,
            shots,
        } => {
            let arch: Arch = arch.parse()?;
            let challenge = Challenge::new(&challenge)?;
            let n = challenge.len();
            if !(MIN_QUBITS..=TOMOGRAPHY_QUBIT_LIMIT).contains(&n) {
                return Err(QpufError::TooManyQubits {
                    requested: n,
                    limit: TOMOGRAPHY_QUBIT_LIMIT,
                });
            }
            let instance = qgen(arch, n, seed, index)?;
            let statistics = match shots {
                Some(k) => Statistics::Shots(k),
                None => Statistics::Exact,
            };
            let job = TomographyJob {
                n_qubits: n,
                statistics,
                seed: child_seed(seed, &["tomography", instance.device_id()]),
            };
            let choi = job.run_process(|rho| apply_as_channel(&instance, &challenge, rho))?;
            let document = serde_json::to_string_pretty(&choi_summary(
                &instance.device_id().to_string(),
                challenge.bits(),
                shots,
                n,
                &choi,
            )?)?;
            deliver(out, &format!("{document}\n"))
        }
        Command::Profiles { name } => match name {
            Some(name) => {
                let profile = builtin_profile(&name).ok_or_else(|| {
                    QpufError::InvalidParameter(format!(
                        "unknown profile {name:?} (expected athens, santiago or melbourne)"
                    ))
                })?;
                deliver(out, &format!("{}\n", profile.to_json()?))
            }
            None => {
                let mut table =
                    String::from("name,n_qubits,t1_us_mean,t2_us_mean,readout_error_mean\n");
                for p in builtin_profiles() {
                    let k = p.n_qubits() as f64;
                    let (t1, t2, ro) = p.qubits().iter().fold((0.0, 0.0, 0.0), |acc, q| {
                        (acc.0 + q.t1_us, acc.1 + q.t2_us, acc.2 + q.readout_error)
                    });
                    table.push_str(&format!(
                        "{},{},{},{},{}\n",
                        p.name(),
                        p.n_qubits(),
                        t1 / k,
                        t2 / k,
                        ro / k
                    ));
                }
                deliver(out, &table)
            }
        },
        Command::Plotdata { runs } => {
            let dir = out.ok_or_else(|| {
                QpufError::InvalidParameter("plotdata needs --out <directory>".into())
            })?;
            let mut labelled: Vec<(String, MetricsReport)> = Vec::new();
            for run in &runs {
                let config =
                    ExperimentConfig::from_json(&fs::read_to_string(run.join(CONFIG_FILE))?)?;
                for report in load_reports(&run.join(REPORTS_JSON_FILE))? {
                    labelled.push((config.profile.clone(), report));
                }
            }
            emit_plot_data(&labelled, dir)
        }
    }
}

/// Structural summary of a reconstructed channel: positivity, trace
/// preservation, parameter counts, and a shot budget for learning it to
/// 1% accuracy.
fn choi_summary(
    device_id: &str,
    challenge: &str,
    shots: Option<u64>,
    n: usize,
    choi: &ComplexMatrix,
) -> Result<serde_json::Value> {
    let d = 1usize << n;
    let (eigenvalues, _) = choi.hermitian_eigen();
    let min_eigenvalue = eigenvalues.first().copied().unwrap_or(0.0);
    // Trace preservation: tracing out the output index of the Choi
    // matrix must leave the identity on the input space.
    let mut tp_deviation = 0.0f64;
    for b in 0..d {
        for dd in 0..d {
            let mut acc = crate::linalg::c64(0.0, 0.0);
            for a in 0..d {
                acc += choi.get(a * d + b, a * d + dd);
            }
            let expected = f64::from(u8::from(b == dd));
            tp_deviation = tp_deviation.max((acc - crate::linalg::c64(expected, 0.0)).norm());
        }
    }
    let cptp_parameters = parameter_count(ChannelKind::Cptp, n);
    Ok(serde_json::json!({
        "device_id": device_id,
        "challenge": challenge,
        "statistics": match shots {
            Some(k) => format!("{k} shots per setting"),
            None => "exact expectations".to_string(),
        },
        "choi_dimension": d * d,
        "choi_trace": choi.trace().re,
        "min_eigenvalue": min_eigenvalue,
        "trace_preservation_deviation": tp_deviation,
        "parameters": {
            "unitary": parameter_count(ChannelKind::Unitary, n),
            "cptp": cptp_parameters,
        },
        "shots_for_one_percent": sample_complexity(cptp_parameters, 0.01, 1.0)?,
    }))
}

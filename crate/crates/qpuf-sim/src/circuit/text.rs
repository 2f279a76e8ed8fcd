//! Line-oriented text format for circuits.
//!
//! ```text
//! # comment
//! QUBITS 3
//! H q0
//! RX q1 0.5
//! CX q0 q1
//! MEASURE q2 -> c0
//! COND c0==1: H q1; RX q0 0.25
//! NOISE AD 0.02 q2
//! ```
//!
//! One op per line. The header `QUBITS n` is mandatory and must come
//! first. Angles and strengths are printed with Rust's shortest
//! round-trip float formatting, so `parse(serialize(c)) == c` holds
//! bit-for-bit. `Channel` ops carry arbitrary Kraus data and are not
//! expressible in this format.

use crate::circuit::{Circuit, CircuitOp, Gate, NoiseKind};
use crate::error::{QpufError, Result};

/// Serializes a circuit to the text format.
///
/// # Errors
///
/// Returns [`QpufError::InvalidParameter`] if the circuit contains
/// [`CircuitOp::Channel`] ops.
pub fn serialize(circuit: &Circuit) -> Result<String> {
    let mut out = String::new();
    out.push_str(&format!("QUBITS {}\n", circuit.n_qubits()));
    for op in circuit.ops() {
        match op {
            CircuitOp::Gate(g) => {
                out.push_str(&gate_to_string(g));
                out.push('\n');
            }
            CircuitOp::Measure { qubit, slot } => {
                out.push_str(&format!("MEASURE q{qubit} -> c{slot}\n"));
            }
            CircuitOp::Conditional { slot, value, gates } => {
                let body: Vec<String> = gates.iter().map(gate_to_string).collect();
                out.push_str(&format!("COND c{slot}=={value}: {}\n", body.join("; ")));
            }
            CircuitOp::Noise {
                kind,
                strength,
                qubit,
            } => {
                let name = match kind {
                    NoiseKind::AmplitudeDamping => "AD",
                    NoiseKind::PhaseDamping => "PD",
                    NoiseKind::Depolarizing => "DEPOL",
                };
                out.push_str(&format!("NOISE {name} {strength} q{qubit}\n"));
            }
            CircuitOp::Channel { .. } => {
                return Err(QpufError::InvalidParameter(
                    "Channel ops carry arbitrary Kraus data and cannot be serialized to text"
                        .into(),
                ));
            }
        }
    }
    Ok(out)
}

/// Parses the text format back into a circuit.
///
/// # Errors
///
/// Returns [`QpufError::Parse`] with a 1-based line number for any
/// syntax or validation failure.
pub fn parse(input: &str) -> Result<Circuit> {
    let mut circuit: Option<Circuit> = None;
    for (idx, raw) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| QpufError::Parse {
            line: line_no,
            message,
        };
        if let Some(rest) = line.strip_prefix("QUBITS") {
            if circuit.is_some() {
                return Err(err("duplicate QUBITS header".into()));
            }
            let n: usize = rest
                .trim()
                .parse()
                .map_err(|_| err(format!("invalid qubit count {:?}", rest.trim())))?;
            if n == 0 {
                return Err(err("qubit count must be positive".into()));
            }
            circuit = Some(Circuit::new(n));
            continue;
        }
        let circuit = circuit
            .as_mut()
            .ok_or_else(|| err("expected QUBITS header before ops".into()))?;
        let op = parse_op(line).map_err(|m| err(m))?;
        circuit.push(op).map_err(|e| err(e.to_string()))?;
    }
    circuit.ok_or(QpufError::Parse {
        line: input.lines().count().max(1),
        message: "missing QUBITS header".into(),
    })
}

fn gate_to_string(g: &Gate) -> String {
    match *g {
        Gate::H(q) => format!("H q{q}"),
        Gate::X(q) => format!("X q{q}"),
        Gate::Y(q) => format!("Y q{q}"),
        Gate::Z(q) => format!("Z q{q}"),
        Gate::S(q) => format!("S q{q}"),
        Gate::Rx(q, t) => format!("RX q{q} {t}"),
        Gate::Ry(q, t) => format!("RY q{q} {t}"),
        Gate::Rz(q, t) => format!("RZ q{q} {t}"),
        Gate::Cx(a, b) => format!("CX q{a} q{b}"),
        Gate::Cz(a, b) => format!("CZ q{a} q{b}"),
        Gate::Swap(a, b) => format!("SWAP q{a} q{b}"),
    }
}

fn parse_op(line: &str) -> std::result::Result<CircuitOp, String> {
    if let Some(rest) = line.strip_prefix("MEASURE") {
        let parts: Vec<&str> = rest.trim().split("->").collect();
        if parts.len() != 2 {
            return Err("MEASURE expects the form `MEASURE q<i> -> c<j>`".into());
        }
        let qubit = parse_qubit(parts[0].trim())?;
        let slot = parse_slot(parts[1].trim())?;
        return Ok(CircuitOp::Measure { qubit, slot });
    }
    if let Some(rest) = line.strip_prefix("COND") {
        let (head, body) = rest
            .split_once(':')
            .ok_or_else(|| "COND expects the form `COND c<i>==<v>: <gates>`".to_string())?;
        let (slot_txt, value_txt) = head
            .trim()
            .split_once("==")
            .ok_or_else(|| "COND condition must use `==`".to_string())?;
        let slot = parse_slot(slot_txt.trim())?;
        let value: u8 = value_txt
            .trim()
            .parse()
            .map_err(|_| format!("invalid condition value {:?}", value_txt.trim()))?;
        let mut gates = Vec::new();
        for part in body.split(';') {
            let part = part.trim();
            if part.is_empty() {
                return Err("empty gate in COND body".into());
            }
            gates.push(parse_gate(part)?);
        }
        return Ok(CircuitOp::Conditional { slot, value, gates });
    }
    if let Some(rest) = line.strip_prefix("NOISE") {
        let tokens: Vec<&str> = rest.split_whitespace().collect();
        if tokens.len() != 3 {
            return Err("NOISE expects the form `NOISE <AD|PD|DEPOL> <strength> q<i>`".into());
        }
        let kind = match tokens[0] {
            "AD" => NoiseKind::AmplitudeDamping,
            "PD" => NoiseKind::PhaseDamping,
            "DEPOL" => NoiseKind::Depolarizing,
            other => return Err(format!("unknown noise kind {other:?}")),
        };
        let strength: f64 = tokens[1]
            .parse()
            .map_err(|_| format!("invalid noise strength {:?}", tokens[1]))?;
        let qubit = parse_qubit(tokens[2])?;
        return Ok(CircuitOp::Noise {
            kind,
            strength,
            qubit,
        });
    }
    Ok(CircuitOp::Gate(parse_gate(line)?))
}

fn parse_gate(text: &str) -> std::result::Result<Gate, String> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    if tokens.is_empty() {
        return Err("empty gate".into());
    }
    let expect_len = |want: usize| -> std::result::Result<(), String> {
        if tokens.len() != want {
            Err(format!(
                "gate {} expects {} operand token(s), got {}",
                tokens[0],
                want - 1,
                tokens.len() - 1
            ))
        } else {
            Ok(())
        }
    };
    match tokens[0] {
        "H" | "X" | "Y" | "Z" | "S" => {
            expect_len(2)?;
            let q = parse_qubit(tokens[1])?;
            Ok(match tokens[0] {
                "H" => Gate::H(q),
                "X" => Gate::X(q),
                "Y" => Gate::Y(q),
                "Z" => Gate::Z(q),
                _ => Gate::S(q),
            })
        }
        "RX" | "RY" | "RZ" => {
            expect_len(3)?;
            let q = parse_qubit(tokens[1])?;
            let angle: f64 = tokens[2]
                .parse()
                .map_err(|_| format!("invalid angle {:?}", tokens[2]))?;
            if !angle.is_finite() {
                return Err(format!("angle must be finite, got {angle}"));
            }
            Ok(match tokens[0] {
                "RX" => Gate::Rx(q, angle),
                "RY" => Gate::Ry(q, angle),
                _ => Gate::Rz(q, angle),
            })
        }
        "CX" | "CZ" | "SWAP" => {
            expect_len(3)?;
            let a = parse_qubit(tokens[1])?;
            let b = parse_qubit(tokens[2])?;
            Ok(match tokens[0] {
                "CX" => Gate::Cx(a, b),
                "CZ" => Gate::Cz(a, b),
                _ => Gate::Swap(a, b),
            })
        }
        other => Err(format!("unknown gate {other:?}")),
    }
}

fn parse_qubit(token: &str) -> std::result::Result<usize, String> {
    token
        .strip_prefix('q')
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| format!("expected qubit operand like `q0`, got {token:?}"))
}

fn parse_slot(token: &str) -> std::result::Result<usize, String> {
    token
        .strip_prefix('c')
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| format!("expected classical slot like `c0`, got {token:?}"))
}

//! Topology-aware routing: rewrites a circuit so every two-qubit gate
//! acts on adjacent physical qubits of a device coupling graph.
//!
//! The router is greedy and deterministic: when a gate's operands are
//! not adjacent, the first operand is moved along a breadth-first
//! shortest path by inserting SWAPs (each expanded to three CX gates)
//! until the operands touch. The logical→physical mapping evolves
//! accordingly and is reported alongside the rewritten circuit.

use std::collections::BTreeSet;

use crate::circuit::{Circuit, CircuitOp, Gate};
use crate::error::{QpufError, Result};

/// An undirected device coupling graph on `n_qubits` physical qubits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    n_qubits: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Topology {
    /// Builds a topology from an edge list (self-loops rejected,
    /// duplicates and orientation normalized away).
    ///
    /// # Errors
    ///
    /// Returns [`QpufError::InvalidParameter`] for out-of-range
    /// endpoints or self-loops.
    pub fn from_edges(n_qubits: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut set = BTreeSet::new();
        for &(a, b) in edges {
            if a >= n_qubits || b >= n_qubits {
                return Err(QpufError::InvalidParameter(format!(
                    "edge ({a}, {b}) out of range for {n_qubits} qubits"
                )));
            }
            if a == b {
                return Err(QpufError::InvalidParameter(format!("self-loop on qubit {a}")));
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(Self {
            n_qubits,
            edges: set,
        })
    }

    /// Open chain `0 − 1 − … − (n−1)`.
    pub fn linear(n_qubits: usize) -> Self {
        let edges: Vec<(usize, usize)> = (1..n_qubits).map(|i| (i - 1, i)).collect();
        Self::from_edges(n_qubits, &edges).expect("linear topology is well formed")
    }

    /// Star with hub at qubit 0.
    pub fn star(n_qubits: usize) -> Self {
        let edges: Vec<(usize, usize)> = (1..n_qubits).map(|i| (0, i)).collect();
        Self::from_edges(n_qubits, &edges).expect("star topology is well formed")
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn are_adjacent(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    /// Deterministic BFS shortest path from `a` to `b`, inclusive of the
    /// endpoints; ties break toward lower-numbered qubits.
    pub fn shortest_path(&self, a: usize, b: usize) -> Option<Vec<usize>> {
        if a == b {
            return Some(vec![a]);
        }
        let mut prev: Vec<Option<usize>> = vec![None; self.n_qubits];
        let mut visited = vec![false; self.n_qubits];
        let mut frontier = std::collections::VecDeque::new();
        visited[a] = true;
        frontier.push_back(a);
        while let Some(cur) = frontier.pop_front() {
            // BTreeSet iteration yields neighbors in ascending order.
            let neighbors: Vec<usize> = self
                .edges
                .iter()
                .filter_map(|&(x, y)| {
                    if x == cur {
                        Some(y)
                    } else if y == cur {
                        Some(x)
                    } else {
                        None
                    }
                })
                .collect();
            for nb in neighbors {
                if visited[nb] {
                    continue;
                }
                visited[nb] = true;
                prev[nb] = Some(cur);
                if nb == b {
                    let mut path = vec![b];
                    let mut node = b;
                    while let Some(p) = prev[node] {
                        path.push(p);
                        node = p;
                    }
                    path.reverse();
                    return Some(path);
                }
                frontier.push_back(nb);
            }
        }
        None
    }
}

/// Result of [`route_circuit`]: the physical-width circuit plus the
/// logical→physical mappings before and after execution.
#[derive(Debug, Clone)]
pub struct RoutedCircuit {
    pub circuit: Circuit,
    /// `initial_mapping[logical] = physical` at circuit start (identity).
    pub initial_mapping: Vec<usize>,
    /// Mapping after all routing swaps have been applied.
    pub final_mapping: Vec<usize>,
    /// Number of SWAPs inserted (each emitted as three CX gates).
    pub swap_count: usize,
}

struct Router<'a> {
    topology: &'a Topology,
    /// logical → physical
    map: Vec<usize>,
    /// physical → logical
    inv: Vec<Option<usize>>,
    out: Circuit,
    swap_count: usize,
}

impl<'a> Router<'a> {
    fn new(topology: &'a Topology, n_logical: usize) -> Self {
        let map: Vec<usize> = (0..n_logical).collect();
        let mut inv = vec![None; topology.n_qubits()];
        for (l, &p) in map.iter().enumerate() {
            inv[p] = Some(l);
        }
        Self {
            topology,
            map,
            inv,
            out: Circuit::new(topology.n_qubits()),
            swap_count: 0,
        }
    }

    /// Swaps the contents of two adjacent physical qubits, emitting the
    /// three-CX expansion.
    fn emit_swap(&mut self, p: usize, q: usize) -> Result<()> {
        self.out.gate(Gate::Cx(p, q))?;
        self.out.gate(Gate::Cx(q, p))?;
        self.out.gate(Gate::Cx(p, q))?;
        if let Some(l) = self.inv[p] {
            self.map[l] = q;
        }
        if let Some(l) = self.inv[q] {
            self.map[l] = p;
        }
        self.inv.swap(p, q);
        self.swap_count += 1;
        Ok(())
    }

    /// Moves the physical carrier of logical `a` adjacent to that of
    /// logical `b`, returning the final physical pair.
    fn make_adjacent(&mut self, a: usize, b: usize) -> Result<(usize, usize)> {
        let (pa, pb) = (self.map[a], self.map[b]);
        if self.topology.are_adjacent(pa, pb) {
            return Ok((pa, pb));
        }
        let path = self.topology.shortest_path(pa, pb).ok_or_else(|| {
            QpufError::Routing(format!(
                "no path between physical qubits {pa} and {pb}"
            ))
        })?;
        // Walk the first operand down the path until one hop remains.
        for w in 0..path.len().saturating_sub(2) {
            self.emit_swap(path[w], path[w + 1])?;
        }
        Ok((self.map[a], self.map[b]))
    }
}

/// Routes `circuit` onto `topology` with an identity initial placement.
///
/// The rewritten circuit acts on the full physical register
/// (`topology.n_qubits()` wide); measurements keep their slots, so
/// slot-keyed outcome distributions are directly comparable before and
/// after routing.
///
/// # Errors
///
/// Returns [`QpufError::Routing`] if the circuit is wider than the
/// device, if operands cannot be connected, or if a conditional contains
/// a two-qubit gate whose operands are not already adjacent (branch-local
/// swaps would desynchronize the global mapping).
pub fn route_circuit(circuit: &Circuit, topology: &Topology) -> Result<RoutedCircuit> {
    if circuit.n_qubits() > topology.n_qubits() {
        return Err(QpufError::Routing(format!(
            "circuit needs {} qubits, device has {}",
            circuit.n_qubits(),
            topology.n_qubits()
        )));
    }
    let mut r = Router::new(topology, circuit.n_qubits());
    let initial_mapping = r.map.clone();
    for op in circuit.ops() {
        match op {
            CircuitOp::Gate(g) => {
                if g.is_two_qubit() {
                    let qs = g.qubits();
                    let (pa, pb) = r.make_adjacent(qs[0], qs[1])?;
                    let mapped = g.map_qubits(|q| if q == qs[0] { pa } else { pb });
                    r.out.gate(mapped)?;
                } else {
                    let mapped = g.map_qubits(|q| r.map[q]);
                    r.out.gate(mapped)?;
                }
            }
            CircuitOp::Measure { qubit, slot } => {
                r.out.measure(r.map[*qubit], *slot)?;
            }
            CircuitOp::Conditional { slot, value, gates } => {
                let mut mapped_gates = Vec::with_capacity(gates.len());
                for g in gates {
                    if g.is_two_qubit() {
                        let qs = g.qubits();
                        let (pa, pb) = (r.map[qs[0]], r.map[qs[1]]);
                        if !topology.are_adjacent(pa, pb) {
                            return Err(QpufError::Routing(
                                "two-qubit gate inside a conditional is not adjacent; \
                                 routing cannot insert branch-local swaps"
                                    .into(),
                            ));
                        }
                    }
                    mapped_gates.push(g.map_qubits(|q| r.map[q]));
                }
                r.out.push(CircuitOp::Conditional {
                    slot: *slot,
                    value: *value,
                    gates: mapped_gates,
                })?;
            }
            CircuitOp::Noise {
                kind,
                strength,
                qubit,
            } => {
                r.out.push(CircuitOp::Noise {
                    kind: *kind,
                    strength: *strength,
                    qubit: r.map[*qubit],
                })?;
            }
            CircuitOp::Channel { channel, qubits } => {
                let mapped: Vec<usize> = qubits.iter().map(|&q| r.map[q]).collect();
                r.out.push(CircuitOp::Channel {
                    channel: channel.clone(),
                    qubits: mapped,
                })?;
            }
        }
    }
    Ok(RoutedCircuit {
        circuit: r.out,
        initial_mapping,
        final_mapping: r.map,
        swap_count: r.swap_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::exec::run_exact;
    use crate::qstate::DensityMatrix;
    use approx::assert_abs_diff_eq;

    fn all_two_qubit_gates_adjacent(c: &Circuit, t: &Topology) -> bool {
        c.ops().iter().all(|op| match op {
            CircuitOp::Gate(g) if g.is_two_qubit() => {
                let qs = g.qubits();
                t.are_adjacent(qs[0], qs[1])
            }
            _ => true,
        })
    }

    #[test]
    fn shortest_paths_are_deterministic() {
        let line = Topology::linear(4);
        assert_eq!(line.shortest_path(0, 3), Some(vec![0, 1, 2, 3]));
        let star = Topology::star(5);
        assert_eq!(star.shortest_path(1, 2), Some(vec![1, 0, 2]));
        assert!(star.are_adjacent(0, 4));
        assert!(!star.are_adjacent(1, 2));
    }

    #[test]
    fn adjacent_gates_pass_through_unchanged() {
        let mut c = Circuit::new(2);
        c.gate(Gate::H(0)).expect("gate");
        c.gate(Gate::Cx(0, 1)).expect("gate");
        c.measure_all().expect("measure");
        let routed = route_circuit(&c, &Topology::linear(2)).expect("route");
        assert_eq!(routed.swap_count, 0);
        assert_eq!(routed.circuit, c);
        assert_eq!(routed.final_mapping, vec![0, 1]);
    }

    #[test]
    fn distant_cx_gets_swap_chain_and_preserves_semantics() {
        let mut c = Circuit::new(4);
        c.gate(Gate::X(0)).expect("gate");
        c.gate(Gate::Ry(2, 0.6)).expect("gate");
        c.gate(Gate::Cx(0, 3)).expect("gate");
        c.gate(Gate::Cx(1, 3)).expect("gate");
        c.measure_all().expect("measure");

        let topo = Topology::linear(4);
        let routed = route_circuit(&c, &topo).expect("route");
        assert!(routed.swap_count > 0);
        assert!(all_two_qubit_gates_adjacent(&routed.circuit, &topo));

        // Slot-keyed terminal distributions agree.
        let rho = DensityMatrix::basis("0000").expect("state");
        let want = run_exact(&c, &rho).expect("run").terminal.expect("term");
        let got = run_exact(&routed.circuit, &rho)
            .expect("run")
            .terminal
            .expect("term");
        assert_eq!(want.slots, got.slots);
        for (a, b) in want.probabilities.iter().zip(&got.probabilities) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn routing_onto_star_uses_hub() {
        let mut c = Circuit::new(5);
        c.gate(Gate::H(1)).expect("gate");
        c.gate(Gate::Cx(1, 2)).expect("gate");
        c.measure_all().expect("measure");
        let topo = Topology::star(5);
        let routed = route_circuit(&c, &topo).expect("route");
        assert!(all_two_qubit_gates_adjacent(&routed.circuit, &topo));

        let rho = DensityMatrix::basis("00000").expect("state");
        let want = run_exact(&c, &rho).expect("run").terminal.expect("term");
        let got = run_exact(&routed.circuit, &rho)
            .expect("run")
            .terminal
            .expect("term");
        for (a, b) in want.probabilities.iter().zip(&got.probabilities) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn disconnected_topology_fails_to_route() {
        let topo = Topology::from_edges(4, &[(0, 1), (2, 3)]).expect("topology");
        let mut c = Circuit::new(4);
        c.gate(Gate::Cx(0, 2)).expect("gate");
        assert!(matches!(
            route_circuit(&c, &topo),
            Err(QpufError::Routing(_))
        ));
    }

    #[test]
    fn too_wide_circuit_is_rejected() {
        let mut c = Circuit::new(3);
        c.gate(Gate::H(2)).expect("gate");
        assert!(matches!(
            route_circuit(&c, &Topology::linear(2)),
            Err(QpufError::Routing(_))
        ));
    }

    #[test]
    fn conditional_single_qubit_gates_are_remapped() {
        let mut c = Circuit::new(3);
        c.gate(Gate::H(0)).expect("gate");
        c.gate(Gate::Cx(0, 2)).expect("gate"); // forces a swap on a line
        c.measure(0, 0).expect("measure");
        c.push(CircuitOp::Conditional {
            slot: 0,
            value: 1,
            gates: vec![Gate::X(2)],
        })
        .expect("cond");
        c.measure_all().expect("measure");
        let topo = Topology::linear(3);
        let routed = route_circuit(&c, &topo).expect("route");
        let rho = DensityMatrix::basis("000").expect("state");
        let want = run_exact(&c, &rho).expect("run").terminal.expect("term");
        let got = run_exact(&routed.circuit, &rho)
            .expect("run")
            .terminal
            .expect("term");
        assert_eq!(want.slots, got.slots);
        for (a, b) in want.probabilities.iter().zip(&got.probabilities) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }
}

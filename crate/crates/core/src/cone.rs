//! Per-output logic cones, found by walking the netlist backwards from each
//! primary output breadth-first.

use std::collections::{BTreeSet, HashMap, VecDeque};

use crate::netlist::{Circuit, CircuitBuilder, Driver, GateId, NetId};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cone {
    /// Position of the root in the parent's output list.
    pub output_index: usize,
    pub root: NetId,
    /// Breadth-first order, nearest to the output first.
    pub gates: Vec<GateId>,
    pub inputs: BTreeSet<NetId>,
    /// Distance of each member gate from the root gate.
    pub layers: HashMap<GateId, usize>,
}

impl Cone {
    /// Gates plus primary inputs.
    pub fn node_count(&self) -> usize {
        self.gates.len() + self.inputs.len()
    }

    pub fn contains(&self, gate: GateId) -> bool {
        self.layers.contains_key(&gate)
    }

    pub fn layer(&self, gate: GateId) -> Option<usize> {
        self.layers.get(&gate).copied()
    }
}

fn cone_of(c: &Circuit, output_index: usize) -> Cone {
    let root = c.outputs()[output_index];
    let mut gates = Vec::new();
    let mut inputs = BTreeSet::new();
    let mut layers = HashMap::new();
    let mut queue = VecDeque::new();

    match c.driver(root) {
        Driver::Input(_) => {
            inputs.insert(root);
        }
        Driver::Gate(g) => {
            layers.insert(g, 0);
            queue.push_back(g);
        }
    }
    while let Some(g) = queue.pop_front() {
        gates.push(g);
        let layer = layers[&g];
        for &n in &c.gate(g).inputs {
            match c.driver(n) {
                Driver::Input(_) => {
                    inputs.insert(n);
                }
                Driver::Gate(d) => {
                    if let std::collections::hash_map::Entry::Vacant(e) = layers.entry(d) {
                        e.insert(layer + 1);
                        queue.push_back(d);
                    }
                }
            }
        }
    }
    Cone {
        output_index,
        root,
        gates,
        inputs,
        layers,
    }
}

/// One cone per primary output, in output order.
pub fn extract_cones(c: &Circuit) -> Vec<Cone> {
    (0..c.outputs().len()).map(|i| cone_of(c, i)).collect()
}

/// The cone with the most nodes; ties go to the earliest output.
///
/// # Panics
/// If the circuit has no outputs.
pub fn largest_cone(c: &Circuit) -> Cone {
    let mut best: Option<Cone> = None;
    for cone in extract_cones(c) {
        if best
            .as_ref()
            .is_none_or(|b| cone.node_count() > b.node_count())
        {
            best = Some(cone);
        }
    }
    best.expect("circuit has no outputs")
}

/// A standalone single-output circuit holding exactly the cone's members.
/// Inputs keep the parent's declaration order and gates keep the parent's gate-list order.
pub fn cone_to_circuit(cone: &Cone, parent: &Circuit) -> Circuit {
    let root_name = parent.net_name(cone.root);
    let mut b = CircuitBuilder::new(format!("{}_{}", parent.name(), root_name));
    for &n in parent.inputs() {
        if cone.inputs.contains(&n) {
            b.input(parent.net_name(n));
        }
    }
    b.output(root_name);
    for (i, g) in parent.gates().iter().enumerate() {
        if cone.contains(GateId(i)) {
            b.gate(
                parent.net_name(g.output),
                g.kind,
                g.inputs.iter().map(|&n| parent.net_name(n)),
            );
        }
    }
    b.build().expect("a cone of a valid circuit is valid")
}

/// Key-gate insertion sequence: ascending layer, breadth-first visit order within a layer.
pub fn insertion_order(cone: &Cone) -> Vec<GateId> {
    // Breadth-first discovery already yields non-decreasing layers.
    cone.gates.clone()
}

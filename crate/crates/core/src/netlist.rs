//! Combinational gate-level netlists: the `.bench` reader and writer, structural
//! validation, topological ordering and bit-parallel simulation.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a net inside a [`Circuit`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NetId(pub usize);

/// Index of a gate inside a [`Circuit`]'s gate list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GateId(pub usize);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetlistError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: sequential unsupported (`{kind}` gate)")]
    SequentialUnsupported { line: usize, kind: String },
    #[error("line {line}, column {column}: unknown gate kind `{kind}`")]
    UnknownGate {
        line: usize,
        column: usize,
        kind: String,
    },
    #[error("net `{0}` has more than one driver")]
    DuplicateDriver(String),
    #[error("net `{0}` is read but never driven")]
    UndrivenNet(String),
    #[error("output `{0}` is not driven")]
    UndrivenOutput(String),
    #[error("gate driving `{net}`: {kind} expects {expected} input(s), got {got}")]
    Arity {
        net: String,
        kind: GateKind,
        expected: &'static str,
        got: usize,
    },
    #[error("combinational cycle through net `{0}`")]
    Cycle(String),
    #[error("missing value for input `{0}`")]
    MissingInput(String),
    #[error("expected {expected} input values, got {got}")]
    InputWidth { expected: usize, got: usize },
}

pub type Result<T, E = NetlistError> = std::result::Result<T, E>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateKind {
    And,
    Nand,
    Or,
    Nor,
    Xor,
    Xnor,
    Not,
    Buf,
}

impl GateKind {
    pub const ALL: [GateKind; 8] = [
        GateKind::And,
        GateKind::Nand,
        GateKind::Or,
        GateKind::Nor,
        GateKind::Xor,
        GateKind::Xnor,
        GateKind::Not,
        GateKind::Buf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GateKind::And => "AND",
            GateKind::Nand => "NAND",
            GateKind::Or => "OR",
            GateKind::Nor => "NOR",
            GateKind::Xor => "XOR",
            GateKind::Xnor => "XNOR",
            GateKind::Not => "NOT",
            GateKind::Buf => "BUF",
        }
    }

    pub fn is_unary(self) -> bool {
        matches!(self, GateKind::Not | GateKind::Buf)
    }

    /// Whether the gate complements its base function (NAND, NOR, XNOR, NOT).
    pub fn is_inverting(self) -> bool {
        matches!(
            self,
            GateKind::Nand | GateKind::Nor | GateKind::Xnor | GateKind::Not
        )
    }

    fn arity_ok(self, n: usize) -> bool {
        if self.is_unary() {
            n == 1
        } else {
            n >= 2
        }
    }

    /// Evaluates the gate over 64 parallel lanes.
    pub fn eval_words(self, inputs: impl IntoIterator<Item = u64>) -> u64 {
        let mut it = inputs.into_iter();
        let base = match self {
            GateKind::And | GateKind::Nand => it.fold(!0u64, |acc, w| acc & w),
            GateKind::Or | GateKind::Nor => it.fold(0u64, |acc, w| acc | w),
            GateKind::Xor | GateKind::Xnor => it.fold(0u64, |acc, w| acc ^ w),
            GateKind::Not | GateKind::Buf => it.next().unwrap_or(0),
        };
        if self.is_inverting() {
            !base
        } else {
            base
        }
    }

    pub fn eval(self, inputs: impl IntoIterator<Item = bool>) -> bool {
        self.eval_words(inputs.into_iter().map(|b| if b { !0 } else { 0 })) & 1 == 1
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GateKind {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        let kind = match s.to_ascii_uppercase().as_str() {
            "AND" => GateKind::And,
            "NAND" => GateKind::Nand,
            "OR" => GateKind::Or,
            "NOR" => GateKind::Nor,
            "XOR" => GateKind::Xor,
            "XNOR" => GateKind::Xnor,
            "NOT" | "INV" => GateKind::Not,
            "BUF" | "BUFF" => GateKind::Buf,
            _ => return Err(()),
        };
        Ok(kind)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Gate {
    pub output: NetId,
    pub kind: GateKind,
    pub inputs: Vec<NetId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Driver {
    /// Position in the primary input list.
    Input(usize),
    Gate(GateId),
}

/// A validated combinational netlist. Immutable once built.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Circuit {
    name: String,
    nets: Vec<String>,
    net_index: HashMap<String, NetId>,
    inputs: Vec<NetId>,
    outputs: Vec<NetId>,
    gates: Vec<Gate>,
    drivers: Vec<Driver>,
    topo: Vec<GateId>,
}

impl Circuit {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn inputs(&self) -> &[NetId] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[NetId] {
        &self.outputs
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn gate(&self, id: GateId) -> &Gate {
        &self.gates[id.0]
    }

    pub fn num_nets(&self) -> usize {
        self.nets.len()
    }

    pub fn net_name(&self, net: NetId) -> &str {
        &self.nets[net.0]
    }

    pub fn net(&self, name: &str) -> Option<NetId> {
        self.net_index.get(name).copied()
    }

    pub fn driver(&self, net: NetId) -> Driver {
        self.drivers[net.0]
    }

    pub fn input_names(&self) -> impl Iterator<Item = &str> + '_ {
        self.inputs.iter().map(|&n| self.net_name(n))
    }

    pub fn output_names(&self) -> impl Iterator<Item = &str> + '_ {
        self.outputs.iter().map(|&n| self.net_name(n))
    }

    /// Gates in an order where every gate follows the gates driving its inputs.
    pub fn topo_order(&self) -> &[GateId] {
        &self.topo
    }

    /// For every net, the gates reading it (in gate-list order).
    pub fn fanouts(&self) -> Vec<Vec<GateId>> {
        let mut fo = vec![Vec::new(); self.nets.len()];
        for (i, g) in self.gates.iter().enumerate() {
            for &n in &g.inputs {
                if fo[n.0].last() != Some(&GateId(i)) {
                    fo[n.0].push(GateId(i));
                }
            }
        }
        fo
    }

    /// Returns a copy with a different name.
    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Values of every net over 64 lanes; `inputs[i]` feeds primary input `i`.
    pub fn eval_nets_words(&self, inputs: &[u64]) -> Result<Vec<u64>> {
        if inputs.len() != self.inputs.len() {
            return Err(NetlistError::InputWidth {
                expected: self.inputs.len(),
                got: inputs.len(),
            });
        }
        let mut values = vec![0u64; self.nets.len()];
        for (&net, &w) in self.inputs.iter().zip(inputs) {
            values[net.0] = w;
        }
        for &gid in &self.topo {
            let g = &self.gates[gid.0];
            values[g.output.0] = g.kind.eval_words(g.inputs.iter().map(|n| values[n.0]));
        }
        Ok(values)
    }

    /// Primary output words for 64 parallel input vectors.
    pub fn eval_words(&self, inputs: &[u64]) -> Result<Vec<u64>> {
        let values = self.eval_nets_words(inputs)?;
        Ok(self.outputs.iter().map(|n| values[n.0]).collect())
    }

    /// Primary output bits for one input vector given in primary-input order.
    pub fn eval(&self, inputs: &[bool]) -> Result<Vec<bool>> {
        let words: Vec<u64> = inputs.iter().map(|&b| if b { 1 } else { 0 }).collect();
        Ok(self
            .eval_words(&words)?
            .into_iter()
            .map(|w| w & 1 == 1)
            .collect())
    }

    /// Name-keyed simulation: every primary input must be assigned.
    pub fn simulate(&self, x: &Assignment) -> Result<Assignment> {
        let bits = self
            .inputs
            .iter()
            .map(|&n| {
                let name = self.net_name(n);
                x.get(name)
                    .ok_or_else(|| NetlistError::MissingInput(name.to_string()))
            })
            .collect::<Result<Vec<bool>>>()?;
        let out = self.eval(&bits)?;
        Ok(Assignment(
            self.outputs
                .iter()
                .zip(out)
                .map(|(&n, b)| (self.net_name(n).to_string(), b))
                .collect(),
        ))
    }

    pub fn to_builder(&self) -> CircuitBuilder {
        let mut b = CircuitBuilder::new(self.name.clone());
        for n in self.input_names() {
            b.input(n);
        }
        for n in self.output_names() {
            b.output(n);
        }
        for g in &self.gates {
            b.gate(
                self.net_name(g.output),
                g.kind,
                g.inputs.iter().map(|&n| self.net_name(n)),
            );
        }
        b
    }
}

/// Net name to bit map.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment(pub BTreeMap<String, bool>);

impl Assignment {
    pub fn from_bits<'a>(names: impl IntoIterator<Item = &'a str>, bits: &[bool]) -> Self {
        Assignment(
            names
                .into_iter()
                .zip(bits)
                .map(|(n, &b)| (n.to_string(), b))
                .collect(),
        )
    }

    pub fn get(&self, name: &str) -> Option<bool> {
        self.0.get(name).copied()
    }

    pub fn set(&mut self, name: impl Into<String>, value: bool) {
        self.0.insert(name.into(), value);
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Accumulates declarations by name; [`CircuitBuilder::build`] resolves and validates them.
#[derive(Clone, Debug, Default)]
pub struct CircuitBuilder {
    name: String,
    inputs: Vec<String>,
    outputs: Vec<String>,
    gates: Vec<(String, GateKind, Vec<String>)>,
}

impl CircuitBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        CircuitBuilder {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn input(&mut self, name: impl Into<String>) -> &mut Self {
        self.inputs.push(name.into());
        self
    }

    pub fn output(&mut self, name: impl Into<String>) -> &mut Self {
        self.outputs.push(name.into());
        self
    }

    pub fn gate<S: Into<String>>(
        &mut self,
        output: impl Into<String>,
        kind: GateKind,
        inputs: impl IntoIterator<Item = S>,
    ) -> &mut Self {
        self.gates.push((
            output.into(),
            kind,
            inputs.into_iter().map(Into::into).collect(),
        ));
        self
    }

    pub fn has_net(&self, name: &str) -> bool {
        self.inputs.iter().any(|n| n == name)
            || self.gates.iter().any(|(o, _, ins)| o == name || ins.iter().any(|i| i == name))
            || self.outputs.iter().any(|n| n == name)
    }

    pub fn build(&self) -> Result<Circuit> {
        let mut nets: Vec<String> = Vec::new();
        let mut net_index: HashMap<String, NetId> = HashMap::new();
        let mut intern = |name: &str, nets: &mut Vec<String>| -> NetId {
            if let Some(&id) = net_index.get(name) {
                return id;
            }
            let id = NetId(nets.len());
            nets.push(name.to_string());
            net_index.insert(name.to_string(), id);
            id
        };

        let mut drivers: Vec<Option<Driver>> = Vec::new();
        let mut set_driver = |net: NetId, d: Driver, nets: &Vec<String>| -> Result<()> {
            if drivers.len() <= net.0 {
                drivers.resize(net.0 + 1, None);
            }
            if drivers[net.0].is_some() {
                return Err(NetlistError::DuplicateDriver(nets[net.0].clone()));
            }
            drivers[net.0] = Some(d);
            Ok(())
        };

        let mut inputs = Vec::with_capacity(self.inputs.len());
        for (i, name) in self.inputs.iter().enumerate() {
            let id = intern(name, &mut nets);
            set_driver(id, Driver::Input(i), &nets)?;
            inputs.push(id);
        }
        let mut gates = Vec::with_capacity(self.gates.len());
        for (i, (out, kind, ins)) in self.gates.iter().enumerate() {
            if !kind.arity_ok(ins.len()) {
                return Err(NetlistError::Arity {
                    net: out.clone(),
                    kind: *kind,
                    expected: if kind.is_unary() { "exactly 1" } else { "at least 2" },
                    got: ins.len(),
                });
            }
            let output = intern(out, &mut nets);
            set_driver(output, Driver::Gate(GateId(i)), &nets)?;
            let inputs = ins.iter().map(|n| intern(n, &mut nets)).collect();
            gates.push(Gate {
                output,
                kind: *kind,
                inputs,
            });
        }
        let mut outputs = Vec::with_capacity(self.outputs.len());
        for name in &self.outputs {
            let id = intern(name, &mut nets);
            outputs.push(id);
        }
        drivers.resize(nets.len(), None);

        for &o in &outputs {
            if drivers[o.0].is_none() {
                return Err(NetlistError::UndrivenOutput(nets[o.0].clone()));
            }
        }
        for g in &gates {
            for n in &g.inputs {
                if drivers[n.0].is_none() {
                    return Err(NetlistError::UndrivenNet(nets[n.0].clone()));
                }
            }
        }
        let drivers: Vec<Driver> = drivers.into_iter().map(|d| d.expect("checked")).collect();
        let topo = topological_order(&gates, &drivers, nets.len())
            .map_err(|net| NetlistError::Cycle(nets[net.0].clone()))?;

        Ok(Circuit {
            name: self.name.clone(),
            nets,
            net_index,
            inputs,
            outputs,
            gates,
            drivers,
            topo,
        })
    }
}

/// Kahn's algorithm; ready gates are released in gate-list order. On a cycle,
/// returns the output net of some gate that never became ready.
fn topological_order(
    gates: &[Gate],
    drivers: &[Driver],
    num_nets: usize,
) -> std::result::Result<Vec<GateId>, NetId> {
    let mut pending = vec![0usize; gates.len()];
    let mut readers: Vec<Vec<usize>> = vec![Vec::new(); num_nets];
    for (i, g) in gates.iter().enumerate() {
        for n in &g.inputs {
            if let Driver::Gate(_) = drivers[n.0] {
                pending[i] += 1;
                readers[n.0].push(i);
            }
        }
    }
    let mut queue: VecDeque<usize> = (0..gates.len()).filter(|&i| pending[i] == 0).collect();
    let mut order = Vec::with_capacity(gates.len());
    while let Some(i) = queue.pop_front() {
        order.push(GateId(i));
        for &r in &readers[gates[i].output.0] {
            pending[r] -= 1;
            if pending[r] == 0 {
                queue.push_back(r);
            }
        }
    }
    if order.len() != gates.len() {
        let stuck = (0..gates.len()).find(|&i| pending[i] > 0).expect("cycle");
        return Err(gates[stuck].output);
    }
    Ok(order)
}

/// Parses ISCAS-style `.bench` text.
pub fn parse_bench(text: &str) -> Result<Circuit> {
    parse_bench_named(text, "circuit")
}

pub fn parse_bench_named(text: &str, name: &str) -> Result<Circuit> {
    let mut b = CircuitBuilder::new(name);
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        if line.trim().is_empty() {
            continue;
        }
        let mut lx = Lexer::new(line, line_no);
        let first = lx.ident()?;
        if lx.peek() == Some('(') {
            let decl = first.to_ascii_uppercase();
            let args = lx.args()?;
            lx.end()?;
            let [arg] = args.as_slice() else {
                return Err(lx.error(format!("{decl} takes exactly one net name")));
            };
            match decl.as_str() {
                "INPUT" => b.input(arg.as_str()),
                "OUTPUT" => b.output(arg.as_str()),
                _ => return Err(lx.error(format!("unknown declaration `{first}`"))),
            };
        } else {
            lx.expect('=')?;
            lx.skip_ws();
            let kind_col = lx.column();
            let kind_name = lx.ident()?;
            let args = lx.args()?;
            lx.end()?;
            let kind = match kind_name.parse::<GateKind>() {
                Ok(k) => k,
                Err(()) => {
                    let upper = kind_name.to_ascii_uppercase();
                    if matches!(upper.as_str(), "DFF" | "DFFR" | "LATCH" | "FF") {
                        return Err(NetlistError::SequentialUnsupported {
                            line: line_no,
                            kind: kind_name,
                        });
                    }
                    return Err(NetlistError::UnknownGate {
                        line: line_no,
                        column: kind_col,
                        kind: kind_name,
                    });
                }
            };
            b.gate(first, kind, args);
        }
    }
    b.build()
}

struct Lexer<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    _src: &'a str,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str, line: usize) -> Self {
        Lexer {
            chars: src.chars().collect(),
            pos: 0,
            line,
            _src: src,
        }
    }

    fn column(&self) -> usize {
        self.pos + 1
    }

    fn error(&self, message: impl Into<String>) -> NetlistError {
        NetlistError::Syntax {
            line: self.line,
            column: self.column(),
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn expect(&mut self, c: char) -> Result<()> {
        match self.peek() {
            Some(got) if got == c => {
                self.pos += 1;
                Ok(())
            }
            Some(got) => Err(self.error(format!("expected `{c}`, found `{got}`"))),
            None => Err(self.error(format!("expected `{c}`, found end of line"))),
        }
    }

    fn ident(&mut self) -> Result<String> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.chars.len() {
            let c = self.chars[self.pos];
            if c.is_whitespace() || matches!(c, '(' | ')' | ',' | '=') {
                break;
            }
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected a name"));
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn args(&mut self) -> Result<Vec<String>> {
        self.expect('(')?;
        let mut out = Vec::new();
        if self.peek() == Some(')') {
            self.pos += 1;
            return Ok(out);
        }
        loop {
            out.push(self.ident()?);
            match self.peek() {
                Some(',') => self.pos += 1,
                Some(')') => {
                    self.pos += 1;
                    return Ok(out);
                }
                Some(c) => return Err(self.error(format!("expected `,` or `)`, found `{c}`"))),
                None => return Err(self.error("unterminated argument list")),
            }
        }
    }

    fn end(&mut self) -> Result<()> {
        match self.peek() {
            None => Ok(()),
            Some(c) => Err(self.error(format!("unexpected `{c}` after statement"))),
        }
    }
}

/// Serializes a circuit to `.bench` text; gate lines follow the gate list order.
pub fn write_bench(c: &Circuit) -> String {
    let mut s = String::new();
    s.push_str(&format!("# {}\n", c.name()));
    s.push_str(&format!(
        "# {} inputs, {} outputs, {} gates\n\n",
        c.inputs().len(),
        c.outputs().len(),
        c.gates().len()
    ));
    for n in c.input_names() {
        s.push_str(&format!("INPUT({n})\n"));
    }
    s.push('\n');
    for n in c.output_names() {
        s.push_str(&format!("OUTPUT({n})\n"));
    }
    s.push('\n');
    for g in c.gates() {
        let args: Vec<&str> = g.inputs.iter().map(|&n| c.net_name(n)).collect();
        s.push_str(&format!(
            "{} = {}({})\n",
            c.net_name(g.output),
            g.kind,
            args.join(", ")
        ));
    }
    s
}

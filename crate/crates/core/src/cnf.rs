//! Tseitin encoding of circuits, miter construction, simplification under
//! partial assignments, and DIMACS text I/O.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::lock::LockedCircuit;
use crate::netlist::{Circuit, GateKind, NetId};

/// 1-based variable index.
pub type Var = u32;
/// DIMACS literal: `v` or `-v`.
pub type Lit = i32;
pub type Clause = Vec<Lit>;

pub fn lit(v: Var, positive: bool) -> Lit {
    if positive {
        v as Lit
    } else {
        -(v as Lit)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CnfError {
    #[error("expected {expected} {what} bits, got {got}")]
    Width {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("the assignment falsifies clause {0}")]
    Conflict(usize),
    #[error("DIMACS line {line}: {message}")]
    Dimacs { line: usize, message: String },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CnfFormula {
    num_vars: u32,
    clauses: Vec<Clause>,
}

impl CnfFormula {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_vars(num_vars: u32) -> Self {
        CnfFormula {
            num_vars,
            clauses: Vec::new(),
        }
    }

    pub fn new_var(&mut self) -> Var {
        self.num_vars += 1;
        self.num_vars
    }

    /// Makes sure variables `1..=n` exist.
    pub fn reserve_vars(&mut self, n: u32) {
        self.num_vars = self.num_vars.max(n);
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn add_clause(&mut self, clause: impl Into<Clause>) {
        let clause = clause.into();
        for &l in &clause {
            assert!(l != 0, "literal 0 is not a variable");
            self.num_vars = self.num_vars.max(l.unsigned_abs());
        }
        self.clauses.push(clause);
    }

    /// True when an empty clause is present.
    pub fn is_trivially_unsat(&self) -> bool {
        self.clauses.iter().any(Vec::is_empty)
    }

    /// Clauses as order-insensitive sets, for comparisons.
    pub fn clause_set(&self) -> HashSet<Vec<Lit>> {
        self.clauses.iter().map(|c| normalized(c)).collect()
    }

    /// Evaluates every clause under a total assignment (`assignment[v - 1]`).
    pub fn satisfied_by(&self, assignment: &[bool]) -> bool {
        self.clauses.iter().all(|c| {
            c.iter()
                .any(|&l| assignment[l.unsigned_abs() as usize - 1] == (l > 0))
        })
    }
}

fn normalized(c: &[Lit]) -> Vec<Lit> {
    let mut v = c.to_vec();
    v.sort_unstable_by_key(|l| (l.unsigned_abs(), *l));
    v.dedup();
    v
}

/// Consistency clauses for `output = kind(inputs)`. Wide XOR/XNOR gates are
/// folded left through fresh intermediates taken from `f`.
pub fn encode_gate(f: &mut CnfFormula, kind: GateKind, inputs: &[Var], output: Var) {
    assert!(!inputs.is_empty(), "gate without inputs");
    let o = output as Lit;
    let ins: Vec<Lit> = inputs.iter().map(|&v| v as Lit).collect();
    if ins.len() == 1 {
        let a = ins[0];
        if kind.is_inverting() {
            f.add_clause(vec![a, o]);
            f.add_clause(vec![-a, -o]);
        } else {
            f.add_clause(vec![-a, o]);
            f.add_clause(vec![a, -o]);
        }
        return;
    }
    match kind {
        GateKind::And | GateKind::Nand => {
            let o = if kind == GateKind::Nand { -o } else { o };
            let mut big: Clause = ins.iter().map(|&a| -a).collect();
            big.push(o);
            f.add_clause(big);
            for &a in &ins {
                f.add_clause(vec![a, -o]);
            }
        }
        GateKind::Or | GateKind::Nor => {
            let o = if kind == GateKind::Nor { -o } else { o };
            let mut big: Clause = ins.clone();
            big.push(-o);
            f.add_clause(big);
            for &a in &ins {
                f.add_clause(vec![-a, o]);
            }
        }
        GateKind::Xor | GateKind::Xnor => {
            let mut acc = ins[0];
            for (i, &b) in ins.iter().enumerate().skip(1) {
                let last = i == ins.len() - 1;
                let out = if last { o } else { f.new_var() as Lit };
                let kind = if last { kind } else { GateKind::Xor };
                encode_xor2(f, acc, b, out, kind == GateKind::Xnor);
                acc = out;
            }
        }
        GateKind::Not | GateKind::Buf => unreachable!("unary gates have one input"),
    }
}

fn encode_xor2(f: &mut CnfFormula, a: Lit, b: Lit, o: Lit, xnor: bool) {
    let o = if xnor { -o } else { o };
    f.add_clause(vec![-a, -b, -o]);
    f.add_clause(vec![-a, b, o]);
    f.add_clause(vec![a, -b, o]);
    f.add_clause(vec![a, b, -o]);
}

/// Variable of every net of one encoded circuit copy.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetMap(pub Vec<Var>);

impl NetMap {
    pub fn var(&self, net: NetId) -> Var {
        self.0[net.0]
    }

    pub fn vars(&self, nets: &[NetId]) -> Vec<Var> {
        nets.iter().map(|&n| self.var(n)).collect()
    }
}

/// Encodes `c` into `f`. Nets listed in `preset` reuse the given variable;
/// every other net gets a fresh one, in net-index order.
pub fn encode_circuit(f: &mut CnfFormula, c: &Circuit, preset: &HashMap<NetId, Var>) -> NetMap {
    let mut vars = Vec::with_capacity(c.num_nets());
    for i in 0..c.num_nets() {
        match preset.get(&NetId(i)) {
            Some(&v) => {
                f.reserve_vars(v);
                vars.push(v);
            }
            None => vars.push(f.new_var()),
        }
    }
    let map = NetMap(vars);
    for g in c.gates() {
        let ins = map.vars(&g.inputs);
        encode_gate(f, g.kind, &ins, map.var(g.output));
    }
    map
}

/// Encodes one copy of `lc` whose key nets are `key_vars` and whose data inputs
/// and outputs are pinned to the pair by unit clauses.
pub fn encode_under_io(
    f: &mut CnfFormula,
    lc: &LockedCircuit,
    dip: &[bool],
    response: &[bool],
    key_vars: &[Var],
) -> Result<NetMap, CnfError> {
    check_width("data input", lc.data_width(), dip.len())?;
    check_width("output", lc.circuit().outputs().len(), response.len())?;
    check_width("key", lc.key_width(), key_vars.len())?;
    let preset: HashMap<NetId, Var> = lc.key_inputs().into_iter().zip(key_vars.iter().copied()).collect();
    let map = encode_circuit(f, lc.circuit(), &preset);
    for (v, b) in io_constants(lc, &map, dip, response) {
        f.add_clause(vec![lit(v, b)]);
    }
    Ok(map)
}

/// The variable assignment that pins a copy's data inputs and outputs to a pair.
pub fn io_constants(
    lc: &LockedCircuit,
    map: &NetMap,
    dip: &[bool],
    response: &[bool],
) -> BTreeMap<Var, bool> {
    let mut fixed = BTreeMap::new();
    for (n, &b) in lc.data_inputs().into_iter().zip(dip) {
        fixed.insert(map.var(n), b);
    }
    for (&n, &b) in lc.circuit().outputs().iter().zip(response) {
        fixed.insert(map.var(n), b);
    }
    fixed
}

fn check_width(what: &'static str, expected: usize, got: usize) -> Result<(), CnfError> {
    if expected == got {
        Ok(())
    } else {
        Err(CnfError::Width {
            what,
            expected,
            got,
        })
    }
}

/// Substitutes `fixed` into `f`: satisfied clauses vanish and false literals are
/// dropped. No propagation.
pub fn substitute(f: &CnfFormula, fixed: &BTreeMap<Var, bool>) -> Result<CnfFormula, CnfError> {
    let mut out = CnfFormula::with_vars(f.num_vars);
    for (i, c) in f.clauses.iter().enumerate() {
        let mut kept = Vec::with_capacity(c.len());
        let mut sat = false;
        for &l in c {
            match fixed.get(&l.unsigned_abs()) {
                Some(&b) if b == (l > 0) => {
                    sat = true;
                    break;
                }
                Some(_) => {}
                None => kept.push(l),
            }
        }
        if sat {
            continue;
        }
        if kept.is_empty() {
            return Err(CnfError::Conflict(i));
        }
        out.clauses.push(kept);
    }
    Ok(out)
}

/// Substitutes `fixed`, then propagates unit clauses to a fixpoint. Units on
/// variables in `keep` stay in the result as unit clauses instead of being
/// propagated; all other propagated variables disappear. Duplicate clauses are merged.
pub fn simplify(
    f: &CnfFormula,
    fixed: &BTreeMap<Var, bool>,
    keep: &HashSet<Var>,
) -> Result<CnfFormula, CnfError> {
    let mut assign = fixed.clone();
    let mut cur = substitute(f, &assign)?;
    loop {
        let mut fresh = BTreeMap::new();
        for c in &cur.clauses {
            if let [l] = c.as_slice() {
                let v = l.unsigned_abs();
                if keep.contains(&v) {
                    continue;
                }
                if let Some(&prev) = fresh.get(&v) {
                    if prev != (*l > 0) {
                        return Err(CnfError::Conflict(0));
                    }
                }
                fresh.insert(v, *l > 0);
            }
        }
        if fresh.is_empty() {
            break;
        }
        assign.extend(fresh.iter());
        cur = substitute(&cur, &fresh)?;
    }
    let mut seen = HashSet::new();
    cur.clauses.retain(|c| seen.insert(normalized(c)));
    Ok(cur)
}

#[derive(Clone, Debug)]
pub struct MiterEncoding {
    pub formula: CnfFormula,
    pub data_vars: Vec<Var>,
    pub key_a: Vec<Var>,
    pub key_b: Vec<Var>,
    pub out_a: Vec<Var>,
    pub out_b: Vec<Var>,
    /// Per-output XOR of the two copies.
    pub diff_bits: Vec<Var>,
    /// OR of `diff_bits`; true iff some output differs. Not asserted in `formula`.
    pub diff: Var,
}

impl MiterEncoding {
    /// The formula with the difference asserted as a unit clause.
    pub fn asserted(&self) -> CnfFormula {
        let mut f = self.formula.clone();
        f.add_clause(vec![self.diff as Lit]);
        f
    }
}

/// Two copies of `lc` sharing data-input variables with separate key variables.
pub fn build_miter(lc: &LockedCircuit) -> MiterEncoding {
    let mut f = CnfFormula::new();
    let c = lc.circuit();
    let data_vars: Vec<Var> = (0..lc.data_width()).map(|_| f.new_var()).collect();
    let key_a: Vec<Var> = (0..lc.key_width()).map(|_| f.new_var()).collect();
    let key_b: Vec<Var> = (0..lc.key_width()).map(|_| f.new_var()).collect();
    let shared: HashMap<NetId, Var> = lc.data_inputs().into_iter().zip(data_vars.iter().copied()).collect();

    let mut preset_a = shared.clone();
    preset_a.extend(lc.key_inputs().into_iter().zip(key_a.iter().copied()));
    let map_a = encode_circuit(&mut f, c, &preset_a);
    let mut preset_b = shared;
    preset_b.extend(lc.key_inputs().into_iter().zip(key_b.iter().copied()));
    let map_b = encode_circuit(&mut f, c, &preset_b);

    let out_a = map_a.vars(c.outputs());
    let out_b = map_b.vars(c.outputs());
    let diff_bits: Vec<Var> = out_a
        .iter()
        .zip(&out_b)
        .map(|(&a, &b)| {
            let d = f.new_var();
            encode_gate(&mut f, GateKind::Xor, &[a, b], d);
            d
        })
        .collect();
    let diff = f.new_var();
    if diff_bits.is_empty() {
        f.add_clause(vec![-(diff as Lit)]);
    } else {
        encode_gate(&mut f, GateKind::Or, &diff_bits, diff);
    }
    MiterEncoding {
        formula: f,
        data_vars,
        key_a,
        key_b,
        out_a,
        out_b,
        diff_bits,
        diff,
    }
}

/// DIMACS text with optional `c <var> <name>` comment lines before the header.
pub fn to_dimacs(f: &CnfFormula, comments: &[(Var, String)]) -> String {
    let mut s = String::new();
    for (v, name) in comments {
        let _ = writeln!(s, "c {v} {name}");
    }
    let _ = writeln!(s, "p cnf {} {}", f.num_vars, f.clauses.len());
    for c in &f.clauses {
        for l in c {
            let _ = write!(s, "{l} ");
        }
        s.push_str("0\n");
    }
    s
}

pub fn parse_dimacs(text: &str) -> Result<CnfFormula, CnfError> {
    let err = |line: usize, message: String| CnfError::Dimacs { line, message };
    let mut f = CnfFormula::new();
    let mut declared: Option<(u32, usize)> = None;
    let mut current = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('p') {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            if parts.len() != 3 || parts[0] != "cnf" {
                return Err(err(line_no, "malformed header".into()));
            }
            let vars = parts[1].parse().map_err(|_| err(line_no, "bad variable count".into()))?;
            let clauses = parts[2].parse().map_err(|_| err(line_no, "bad clause count".into()))?;
            declared = Some((vars, clauses));
            f.reserve_vars(vars);
            continue;
        }
        if declared.is_none() {
            return Err(err(line_no, "clause before header".into()));
        }
        for tok in line.split_whitespace() {
            let l: Lit = tok
                .parse()
                .map_err(|_| err(line_no, format!("bad literal `{tok}`")))?;
            if l == 0 {
                f.clauses.push(std::mem::take(&mut current));
            } else {
                f.num_vars = f.num_vars.max(l.unsigned_abs());
                current.push(l);
            }
        }
    }
    if !current.is_empty() {
        f.clauses.push(current);
    }
    if declared.is_none() {
        return Err(err(0, "missing `p cnf` header".into()));
    }
    Ok(f)
}

//! Oracle-guided SAT attack with instrumentation, key constraints and DIP
//! replay, plus brute-force key-space oracles.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits;
use crate::cnf::{self, build_miter, encode_under_io, lit, CnfFormula, Lit, Var};
use crate::lock::{KeyVector, LockedCircuit};
use crate::netlist::Circuit;
use crate::solver::{Model, SolveResult, Solver};

/// Largest key width the brute-force oracles accept.
pub const MAX_ENUM_KEY_BITS: usize = 24;
/// Data widths up to this are verified exhaustively.
pub const EXHAUSTIVE_VERIFY_BITS: usize = 16;
pub const RANDOM_VERIFY_VECTORS: usize = 10_000;

/// A distinguishing input with the oracle's response, both in bit order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IoPair {
    #[serde(with = "bitstring")]
    pub dip: Vec<bool>,
    #[serde(with = "bitstring")]
    pub response: Vec<bool>,
}

impl IoPair {
    pub fn new(dip: Vec<bool>, response: Vec<bool>) -> Self {
        IoPair { dip, response }
    }

    /// Parses `"xxxx;yy"`.
    pub fn parse(s: &str) -> Result<Self, bits::BitsError> {
        let (x, y) = s.split_once(';').unwrap_or((s, ""));
        Ok(IoPair {
            dip: bits::parse_bits(x)?,
            response: bits::parse_bits(y)?,
        })
    }
}

impl fmt::Display for IoPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{};{}",
            bits::format_bits(&self.dip),
            bits::format_bits(&self.response)
        )
    }
}

mod bitstring {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[bool], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&crate::bits::format_bits(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<bool>, D::Error> {
        let s = String::deserialize(d)?;
        crate::bits::parse_bits(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, Default)]
pub struct AttackOptions {
    /// Key index to forced bit; applied to both miter key copies.
    pub key_constraints: BTreeMap<usize, bool>,
    /// DIPs consumed, in order, before the solver picks its own.
    pub replay: Vec<Vec<bool>>,
    /// Adds the all-zeros and all-ones pairs before the first iteration.
    pub preload: bool,
    pub max_iterations: Option<usize>,
    pub budget: Option<Duration>,
}

impl AttackOptions {
    pub fn with_constraints(bits: impl IntoIterator<Item = (usize, bool)>) -> Self {
        AttackOptions {
            key_constraints: bits.into_iter().collect(),
            ..Self::default()
        }
    }

    pub fn with_replay(replay: Vec<Vec<bool>>) -> Self {
        AttackOptions {
            replay,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based.
    pub index: usize,
    #[serde(with = "bitstring")]
    pub dip: Vec<bool>,
    #[serde(with = "bitstring")]
    pub response: Vec<bool>,
    pub solver_s: f64,
    pub clauses_added: usize,
    pub replayed: bool,
}

impl IterationRecord {
    pub fn pair(&self) -> IoPair {
        IoPair::new(self.dip.clone(), self.response.clone())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AttackTrace {
    /// Iterations that produced a DIP.
    pub iterations: Vec<IterationRecord>,
    /// Preloaded pairs, not counted as iterations.
    pub preloaded: Vec<IoPair>,
    /// Solver time of the final (UNSAT) miter call.
    pub unsat_s: f64,
    /// Wall time of the whole loop.
    pub total_s: f64,
    pub key: Option<KeyVector>,
    /// |P|: pairs used, preloads included.
    pub io_pairs: usize,
    /// TI: solver iterations, the final UNSAT one included.
    pub total_iterations: usize,
}

impl AttackTrace {
    /// Solver time spent finding DIPs.
    pub fn io_pairs_s(&self) -> f64 {
        self.iterations.iter().map(|r| r.solver_s).sum()
    }

    pub fn pairs(&self) -> Vec<IoPair> {
        self.preloaded
            .iter()
            .cloned()
            .chain(self.iterations.iter().map(IterationRecord::pair))
            .collect()
    }
}

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("oracle has {got} inputs/outputs where the locked circuit has {expected}")]
    OracleShape { expected: String, got: String },
    #[error("replay vector {index} has {got} bits, expected {expected}")]
    ReplayWidth {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("constraint on key bit {0} is out of range")]
    ConstraintIndex(usize),
    #[error("replayed vector {} (#{index}) is not a distinguishing input", bits::format_bits(.dip))]
    NotADip { index: usize, dip: Vec<bool> },
    #[error("iteration cap of {cap} reached")]
    IterationCap { cap: usize, trace: Box<AttackTrace> },
    #[error("time budget exhausted after {} iterations", .trace.iterations.len())]
    Budget { trace: Box<AttackTrace> },
    #[error("key constraints exclude every functionally correct key")]
    ConstraintInconsistent { trace: Box<AttackTrace> },
    #[error("recovered key {key} fails verification")]
    WrongKey { key: KeyVector, trace: Box<AttackTrace> },
    #[error("key width {0} exceeds the enumeration bound of {MAX_ENUM_KEY_BITS}")]
    KeyTooWide(usize),
    #[error(transparent)]
    Cnf(#[from] cnf::CnfError),
}

impl AttackError {
    /// The partial trace, when the loop got under way.
    pub fn trace(&self) -> Option<&AttackTrace> {
        match self {
            AttackError::IterationCap { trace, .. }
            | AttackError::Budget { trace }
            | AttackError::ConstraintInconsistent { trace }
            | AttackError::WrongKey { trace, .. } => Some(trace),
            _ => None,
        }
    }
}

/// The oracle circuit seen through the locked circuit's data-input order.
#[derive(Clone, Debug)]
pub struct Oracle<'a> {
    circuit: &'a Circuit,
    /// perm[i] = position in the locked circuit's data inputs feeding oracle input i.
    perm: Vec<usize>,
}

impl<'a> Oracle<'a> {
    /// Matches inputs by name when every name matches, by position otherwise.
    pub fn new(circuit: &'a Circuit, lc: &LockedCircuit) -> Result<Self, AttackError> {
        let data = lc.data_input_names();
        if circuit.inputs().len() != data.len()
            || circuit.outputs().len() != lc.circuit().outputs().len()
        {
            return Err(AttackError::OracleShape {
                expected: format!("{}/{}", data.len(), lc.circuit().outputs().len()),
                got: format!("{}/{}", circuit.inputs().len(), circuit.outputs().len()),
            });
        }
        let pos: HashMap<&str, usize> = data.iter().enumerate().map(|(i, n)| (*n, i)).collect();
        let by_name: Option<Vec<usize>> = circuit.input_names().map(|n| pos.get(n).copied()).collect();
        let perm = by_name.unwrap_or_else(|| (0..data.len()).collect());
        Ok(Oracle { circuit, perm })
    }

    pub fn query_words(&self, data: &[u64]) -> Vec<u64> {
        let ins: Vec<u64> = self.perm.iter().map(|&p| data[p]).collect();
        self.circuit.eval_words(&ins).expect("width checked")
    }

    pub fn query(&self, data: &[bool]) -> Vec<bool> {
        let w: Vec<u64> = data.iter().map(|&b| b as u64).collect();
        self.query_words(&w).into_iter().map(|w| w & 1 == 1).collect()
    }
}

/// Incremental attack state: miter plus accumulated IO constraints in one solver.
struct AttackSolver<'a> {
    lc: &'a LockedCircuit,
    formula: CnfFormula,
    solver: Solver,
    pushed: usize,
    data_vars: Vec<Var>,
    key_a: Vec<Var>,
    key_b: Vec<Var>,
    diff: Var,
    constraint_lits: Vec<Lit>,
}

impl<'a> AttackSolver<'a> {
    fn new(lc: &'a LockedCircuit, constraints: &BTreeMap<usize, bool>) -> Self {
        let m = build_miter(lc);
        let mut constraint_lits = Vec::new();
        for (&i, &b) in constraints {
            constraint_lits.push(lit(m.key_a[i], b));
            constraint_lits.push(lit(m.key_b[i], b));
        }
        let mut s = AttackSolver {
            lc,
            formula: m.formula,
            solver: Solver::new(),
            pushed: 0,
            data_vars: m.data_vars,
            key_a: m.key_a,
            key_b: m.key_b,
            diff: m.diff,
            constraint_lits,
        };
        s.flush();
        s
    }

    fn flush(&mut self) -> usize {
        self.solver.ensure_vars(self.formula.num_vars());
        let new = &self.formula.clauses()[self.pushed..];
        for c in new {
            self.solver.add_clause(c);
        }
        let n = new.len();
        self.pushed = self.formula.num_clauses();
        n
    }

    /// Constrains both key copies with the pair; returns clauses added.
    fn add_pair(&mut self, pair: &IoPair) -> Result<usize, AttackError> {
        encode_under_io(&mut self.formula, self.lc, &pair.dip, &pair.response, &self.key_a)?;
        encode_under_io(&mut self.formula, self.lc, &pair.dip, &pair.response, &self.key_b)?;
        Ok(self.flush())
    }

    fn solve(
        &mut self,
        extra: &[Lit],
        with_diff: bool,
        deadline: Option<Instant>,
    ) -> Option<SolveResult> {
        let mut assumptions = self.constraint_lits.clone();
        if with_diff {
            assumptions.push(self.diff as Lit);
        }
        assumptions.extend_from_slice(extra);
        self.solver.solve_limited(&assumptions, deadline)
    }

    fn values(&self, m: &Model, vars: &[Var]) -> Vec<bool> {
        m.values(vars).expect("allocated variables")
    }
}

fn check_options(lc: &LockedCircuit, opts: &AttackOptions) -> Result<(), AttackError> {
    for &i in opts.key_constraints.keys() {
        if i >= lc.key_width() {
            return Err(AttackError::ConstraintIndex(i));
        }
    }
    for (index, v) in opts.replay.iter().enumerate() {
        if v.len() != lc.data_width() {
            return Err(AttackError::ReplayWidth {
                index,
                expected: lc.data_width(),
                got: v.len(),
            });
        }
    }
    Ok(())
}

/// Runs the SAT attack against `oracle`.
pub fn sat_attack(
    lc: &LockedCircuit,
    oracle: &Circuit,
    opts: &AttackOptions,
) -> Result<AttackTrace, AttackError> {
    let oracle = Oracle::new(oracle, lc)?;
    check_options(lc, opts)?;
    let start = Instant::now();
    let deadline = opts.budget.map(|b| start + b);
    let mut trace = AttackTrace::default();
    let mut st = AttackSolver::new(lc, &opts.key_constraints);

    if opts.preload {
        for v in [false, true] {
            let dip = vec![v; lc.data_width()];
            let pair = IoPair::new(dip.clone(), oracle.query(&dip));
            st.add_pair(&pair)?;
            trace.preloaded.push(pair);
        }
    }

    let mut replay = opts.replay.iter().enumerate();
    loop {
        let next_replay = replay.next();
        if let Some(cap) = opts.max_iterations {
            if trace.iterations.len() >= cap {
                trace.total_s = start.elapsed().as_secs_f64();
                return Err(AttackError::IterationCap {
                    cap,
                    trace: Box::new(finish_counts(trace)),
                });
            }
        }
        let pinned: Vec<Lit> = match next_replay {
            Some((_, dip)) => st.data_vars.iter().zip(dip).map(|(&v, &b)| lit(v, b)).collect(),
            None => Vec::new(),
        };
        let t0 = Instant::now();
        let result = st.solve(&pinned, true, deadline);
        let solver_s = t0.elapsed().as_secs_f64();
        let Some(result) = result else {
            trace.total_s = start.elapsed().as_secs_f64();
            return Err(AttackError::Budget {
                trace: Box::new(finish_counts(trace)),
            });
        };
        match result {
            SolveResult::Sat(model) => {
                let dip = st.values(&model, &st.data_vars);
                let response = oracle.query(&dip);
                let pair = IoPair::new(dip, response);
                let clauses_added = st.add_pair(&pair)?;
                trace.iterations.push(IterationRecord {
                    index: trace.iterations.len() + 1,
                    dip: pair.dip,
                    response: pair.response,
                    solver_s,
                    clauses_added,
                    replayed: next_replay.is_some(),
                });
            }
            SolveResult::Unsat => {
                if let Some((index, dip)) = next_replay {
                    return Err(AttackError::NotADip {
                        index,
                        dip: dip.clone(),
                    });
                }
                trace.unsat_s = solver_s;
                break;
            }
        }
    }

    // Every key still consistent with F is equivalent on all inputs; take one.
    let key = match st.solve(&[], false, None).expect("no deadline") {
        SolveResult::Sat(m) => Some(KeyVector::new(st.values(&m, &st.key_a))),
        SolveResult::Unsat => None,
    };
    trace.total_s = start.elapsed().as_secs_f64();
    trace.key = key.clone();
    let trace = finish_counts(trace);
    match key {
        None => Err(AttackError::ConstraintInconsistent {
            trace: Box::new(trace),
        }),
        Some(k) if !verify_with(lc, &k, &oracle) => {
            if opts.key_constraints.is_empty() {
                Err(AttackError::WrongKey {
                    key: k,
                    trace: Box::new(trace),
                })
            } else {
                Err(AttackError::ConstraintInconsistent {
                    trace: Box::new(trace),
                })
            }
        }
        Some(_) => Ok(trace),
    }
}

fn finish_counts(mut t: AttackTrace) -> AttackTrace {
    t.io_pairs = t.preloaded.len() + t.iterations.len();
    t.total_iterations = t.iterations.len() + 1;
    t
}

/// True iff `k` makes `lc` equivalent to `oracle`: exhaustively for up to 16
/// data inputs, otherwise on 10^4 seeded random vectors plus all-zeros and all-ones.
pub fn verify_key(lc: &LockedCircuit, k: &KeyVector, oracle: &Circuit) -> bool {
    if k.len() != lc.key_width() {
        return false;
    }
    match Oracle::new(oracle, lc) {
        Ok(o) => verify_with(lc, k, &o),
        Err(_) => false,
    }
}

fn verify_with(lc: &LockedCircuit, k: &KeyVector, oracle: &Oracle<'_>) -> bool {
    let n = lc.data_width();
    let key_words: Vec<u64> = k.bits().iter().map(|&b| if b { !0 } else { 0 }).collect();
    let agree = |data: &[u64], mask: u64| {
        let a = lc.eval_words(data, &key_words);
        let b = oracle.query_words(data);
        a.iter().zip(&b).all(|(x, y)| (x ^ y) & mask == 0)
    };
    if n <= EXHAUSTIVE_VERIFY_BITS {
        let total = 1u64 << n;
        let mut base = 0;
        while base < total {
            let lanes = (total - base).min(64);
            let mask = if lanes == 64 { !0 } else { (1u64 << lanes) - 1 };
            if !agree(&bits::enumeration_words(n, base), mask) {
                return false;
            }
            base += 64;
        }
        return true;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut first = true;
    let mut done = 0;
    while done < RANDOM_VERIFY_VECTORS {
        let mut data: Vec<u64> = (0..n).map(|_| rng.gen()).collect();
        if first {
            // Lane 0 all zeros, lane 1 all ones.
            for w in &mut data {
                *w = (*w & !3) | 2;
            }
            first = false;
        }
        if !agree(&data, !0) {
            return false;
        }
        done += 64;
    }
    true
}

fn check_key_width(lc: &LockedCircuit) -> Result<usize, AttackError> {
    let w = lc.key_width();
    if w > MAX_ENUM_KEY_BITS {
        Err(AttackError::KeyTooWide(w))
    } else {
        Ok(w)
    }
}

/// Bit mask over 64 lanes of keys that reproduce the pair.
fn consistent_lanes(lc: &LockedCircuit, pair: &IoPair, key_words: &[u64]) -> u64 {
    let data: Vec<u64> = pair.dip.iter().map(|&b| if b { !0 } else { 0 }).collect();
    let out = lc.eval_words(&data, key_words);
    out.iter()
        .zip(&pair.response)
        .fold(!0u64, |acc, (&w, &r)| acc & if r { w } else { !w })
}

/// Every key (ascending by value) reproducing all pairs, by simulation.
pub fn remaining_keys(lc: &LockedCircuit, pairs: &[IoPair]) -> Result<Vec<KeyVector>, AttackError> {
    remaining_keys_constrained(lc, pairs, &BTreeMap::new())
}

pub fn remaining_keys_constrained(
    lc: &LockedCircuit,
    pairs: &[IoPair],
    constraints: &BTreeMap<usize, bool>,
) -> Result<Vec<KeyVector>, AttackError> {
    let w = check_key_width(lc)?;
    for p in pairs {
        check_pair(lc, p)?;
    }
    let total = 1u64 << w;
    let mut out = Vec::new();
    let mut base = 0;
    while base < total {
        let lanes = (total - base).min(64);
        let mut mask = if lanes == 64 { !0 } else { (1u64 << lanes) - 1 };
        let kw = bits::enumeration_words(w, base);
        for (&i, &b) in constraints {
            if i >= w {
                return Err(AttackError::ConstraintIndex(i));
            }
            mask &= if b { kw[i] } else { !kw[i] };
        }
        for p in pairs {
            if mask == 0 {
                break;
            }
            mask &= consistent_lanes(lc, p, &kw);
        }
        while mask != 0 {
            let lane = mask.trailing_zeros() as u64;
            out.push(KeyVector::from_value(base + lane, w));
            mask &= mask - 1;
        }
        base += 64;
    }
    Ok(out)
}

fn check_pair(lc: &LockedCircuit, p: &IoPair) -> Result<(), AttackError> {
    if p.dip.len() != lc.data_width() || p.response.len() != lc.circuit().outputs().len() {
        return Err(cnf::CnfError::Width {
            what: "pair",
            expected: lc.data_width(),
            got: p.dip.len(),
        }
        .into());
    }
    Ok(())
}

/// How many keys of `surviving` the pair rules out.
pub fn dip_elimination_count(
    lc: &LockedCircuit,
    pair: &IoPair,
    surviving: &[KeyVector],
) -> Result<usize, AttackError> {
    let w = check_key_width(lc)?;
    check_pair(lc, pair)?;
    let mut eliminated = 0;
    for chunk in surviving.chunks(64) {
        let mut kw = vec![0u64; w];
        for (lane, k) in chunk.iter().enumerate() {
            for (i, &b) in k.bits().iter().enumerate() {
                kw[i] |= u64::from(b) << lane;
            }
        }
        let valid = if chunk.len() == 64 { !0 } else { (1u64 << chunk.len()) - 1 };
        eliminated += (!consistent_lanes(lc, pair, &kw) & valid).count_ones() as usize;
    }
    Ok(eliminated)
}

/// True iff some two keys of `surviving` disagree on `dip`.
pub fn is_dip(lc: &LockedCircuit, dip: &[bool], surviving: &[KeyVector]) -> bool {
    let mut seen: Option<Vec<bool>> = None;
    for k in surviving {
        let y = lc.eval(dip, k.bits());
        match &seen {
            None => seen = Some(y),
            Some(prev) if *prev != y => return true,
            _ => {}
        }
    }
    false
}

/// Counts keys consistent with the pairs through the CNF route: one copy per
/// pair sharing the key variables, then model enumeration with blocking
/// clauses over the keys. Stops at `limit`.
pub fn count_consistent_keys_sat(
    lc: &LockedCircuit,
    pairs: &[IoPair],
    constraints: &BTreeMap<usize, bool>,
    limit: usize,
) -> Result<usize, AttackError> {
    let mut f = CnfFormula::new();
    let keys: Vec<Var> = (0..lc.key_width()).map(|_| f.new_var()).collect();
    for p in pairs {
        encode_under_io(&mut f, lc, &p.dip, &p.response, &keys)?;
    }
    for (&i, &b) in constraints {
        let v = *keys.get(i).ok_or(AttackError::ConstraintIndex(i))?;
        f.add_clause(vec![lit(v, b)]);
    }
    let mut s = Solver::from_formula(&f);
    let mut count = 0;
    while count < limit {
        match s.solve(&[]) {
            SolveResult::Sat(m) => {
                count += 1;
                let block: Vec<Lit> = keys
                    .iter()
                    .map(|&v| lit(v, !m.value(v).expect("key variable")))
                    .collect();
                if block.is_empty() {
                    break;
                }
                s.add_clause(&block);
            }
            SolveResult::Unsat => break,
        }
    }
    Ok(count)
}

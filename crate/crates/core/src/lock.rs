//! Locking schemes: iterative XOR/XNOR key-gate insertion and the point-function
//! families (AntiSAT, CAS-Lock, TTLock / SFLL-HD), plus key application.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::{self, BitsError};
use crate::netlist::{Circuit, CircuitBuilder, Driver, GateId, GateKind, NetId, NetlistError};

/// Prefix used for emitted key inputs.
pub const KEY_PREFIX: &str = "keyinput";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LockError {
    #[error("requested {requested} key gates but only {available} locations are available")]
    NotEnoughLocations { requested: usize, available: usize },
    #[error("key width {got} does not match the expected width {expected}")]
    KeyWidth { expected: usize, got: usize },
    #[error("block width {r} exceeds the {available} available data inputs")]
    BlockTooWide { r: usize, available: usize },
    #[error("block width must be at least 1")]
    EmptyBlock,
    #[error("point-function locking needs a single-output circuit, got {0} outputs")]
    NotSingleOutput(usize),
    #[error("OR position {0} is outside 1..{1}")]
    BadOrPosition(usize, usize),
    #[error("Hamming distance {h} must be below the input width {width}")]
    DistanceTooLarge { h: usize, width: usize },
    #[error("net `{0}` is not an input of the circuit")]
    UnknownInput(String),
    #[error("no data inputs left to express a constant output")]
    NoDataInputs,
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error(transparent)]
    Bits(#[from] BitsError),
}

pub type Result<T, E = LockError> = std::result::Result<T, E>;

/// Key bits in key-input order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct KeyVector(pub Vec<bool>);

impl KeyVector {
    pub fn new(bits: Vec<bool>) -> Self {
        KeyVector(bits)
    }

    pub fn from_value(value: u64, width: usize) -> Self {
        KeyVector(bits::bits_of(value, width))
    }

    pub fn random(width: usize, rng: &mut impl Rng) -> Self {
        KeyVector((0..width).map(|_| rng.gen()).collect())
    }

    pub fn value(&self) -> u64 {
        bits::value_of(&self.0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn prefix(&self, n: usize) -> KeyVector {
        KeyVector(self.0[..n].to_vec())
    }
}

impl fmt::Display for KeyVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&bits::format_bits(&self.0))
    }
}

impl FromStr for KeyVector {
    type Err = BitsError;

    fn from_str(s: &str) -> std::result::Result<Self, BitsError> {
        bits::parse_bits(s).map(KeyVector)
    }
}

impl From<KeyVector> for String {
    fn from(k: KeyVector) -> String {
        k.to_string()
    }
}

impl TryFrom<String> for KeyVector {
    type Error = BitsError;

    fn try_from(s: String) -> std::result::Result<Self, BitsError> {
        s.parse()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "scheme")]
pub enum Scheme {
    #[serde(rename = "XOR-INSERTION")]
    XorInsertion { locations: Vec<String> },
    #[serde(rename = "ANTISAT")]
    AntiSat { r: usize, taps: Vec<String> },
    #[serde(rename = "CASLOCK")]
    CasLock {
        r: usize,
        or_positions: Vec<usize>,
        taps: Vec<String>,
    },
    #[serde(rename = "TTLOCK")]
    TtLock {
        pattern: String,
        perturb_net: String,
        restore_net: String,
    },
    #[serde(rename = "SFLL-HD")]
    SfllHd {
        h: usize,
        pattern: String,
        perturb_net: String,
        restore_net: String,
    },
    /// Partition known, construction not.
    #[serde(rename = "UNKNOWN")]
    Unknown,
}

impl Scheme {
    pub fn tag(&self) -> &'static str {
        match self {
            Scheme::XorInsertion { .. } => "XOR-INSERTION",
            Scheme::AntiSat { .. } => "ANTISAT",
            Scheme::CasLock { .. } => "CASLOCK",
            Scheme::TtLock { .. } => "TTLOCK",
            Scheme::SfllHd { .. } => "SFLL-HD",
            Scheme::Unknown => "UNKNOWN",
        }
    }

    /// Perturb and restore unit nets for the stripped-functionality schemes.
    pub fn sfll_units(&self) -> Option<(&str, &str)> {
        match self {
            Scheme::TtLock {
                perturb_net,
                restore_net,
                ..
            }
            | Scheme::SfllHd {
                perturb_net,
                restore_net,
                ..
            } => Some((perturb_net, restore_net)),
            _ => None,
        }
    }
}

/// Which key indices feed which block.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KeyBlocks {
    /// One key gate per key bit.
    PerGate,
    Complementary { g: Vec<usize>, g_bar: Vec<usize> },
    Restore { bits: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LockedCircuit {
    circuit: Circuit,
    data_positions: Vec<usize>,
    key_positions: Vec<usize>,
    correct_key: Option<KeyVector>,
    scheme: Scheme,
    blocks: KeyBlocks,
}

impl LockedCircuit {
    /// Partitions `circuit`'s inputs: the named nets (in the given order) are key
    /// inputs, the rest are data inputs in declaration order.
    pub fn new(
        circuit: Circuit,
        key_inputs: &[&str],
        correct_key: Option<KeyVector>,
        scheme: Scheme,
        blocks: KeyBlocks,
    ) -> Result<Self> {
        let mut key_positions = Vec::with_capacity(key_inputs.len());
        for name in key_inputs {
            let pos = circuit
                .input_names()
                .position(|n| n == *name)
                .ok_or_else(|| LockError::UnknownInput(name.to_string()))?;
            key_positions.push(pos);
        }
        let key_set: HashSet<usize> = key_positions.iter().copied().collect();
        let data_positions = (0..circuit.inputs().len())
            .filter(|p| !key_set.contains(p))
            .collect();
        if let Some(k) = &correct_key {
            if k.len() != key_positions.len() {
                return Err(LockError::KeyWidth {
                    expected: key_positions.len(),
                    got: k.len(),
                });
            }
        }
        Ok(LockedCircuit {
            circuit,
            data_positions,
            key_positions,
            correct_key,
            scheme,
            blocks,
        })
    }

    /// Inputs whose names start with `prefix` become key inputs.
    pub fn from_key_prefix(circuit: Circuit, prefix: &str) -> Self {
        let keys: Vec<String> = circuit
            .input_names()
            .filter(|n| n.starts_with(prefix))
            .map(str::to_string)
            .collect();
        let refs: Vec<&str> = keys.iter().map(String::as_str).collect();
        Self::new(circuit, &refs, None, Scheme::Unknown, KeyBlocks::PerGate)
            .expect("names come from the circuit")
    }

    /// Inputs also present in `oracle` are data inputs; the others are key inputs.
    pub fn from_oracle(circuit: Circuit, oracle: &Circuit) -> Self {
        let data: HashSet<&str> = oracle.input_names().collect();
        let keys: Vec<String> = circuit
            .input_names()
            .filter(|n| !data.contains(n))
            .map(str::to_string)
            .collect();
        let refs: Vec<&str> = keys.iter().map(String::as_str).collect();
        Self::new(circuit, &refs, None, Scheme::Unknown, KeyBlocks::PerGate)
            .expect("names come from the circuit")
    }

    pub fn with_correct_key(mut self, key: KeyVector) -> Result<Self> {
        if key.len() != self.key_width() {
            return Err(LockError::KeyWidth {
                expected: self.key_width(),
                got: key.len(),
            });
        }
        self.correct_key = Some(key);
        Ok(self)
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub fn scheme(&self) -> &Scheme {
        &self.scheme
    }

    pub fn blocks(&self) -> &KeyBlocks {
        &self.blocks
    }

    pub fn correct_key(&self) -> Option<&KeyVector> {
        self.correct_key.as_ref()
    }

    pub fn key_width(&self) -> usize {
        self.key_positions.len()
    }

    pub fn data_width(&self) -> usize {
        self.data_positions.len()
    }

    pub fn data_inputs(&self) -> Vec<NetId> {
        self.data_positions
            .iter()
            .map(|&p| self.circuit.inputs()[p])
            .collect()
    }

    pub fn key_inputs(&self) -> Vec<NetId> {
        self.key_positions
            .iter()
            .map(|&p| self.circuit.inputs()[p])
            .collect()
    }

    pub fn data_input_names(&self) -> Vec<&str> {
        self.data_positions
            .iter()
            .map(|&p| self.circuit.net_name(self.circuit.inputs()[p]))
            .collect()
    }

    pub fn key_input_names(&self) -> Vec<&str> {
        self.key_positions
            .iter()
            .map(|&p| self.circuit.net_name(self.circuit.inputs()[p]))
            .collect()
    }

    /// Interleaves data and key words into the circuit's input order.
    pub fn input_words(&self, data: &[u64], key: &[u64]) -> Vec<u64> {
        let mut words = vec![0u64; self.circuit.inputs().len()];
        for (&p, &w) in self.data_positions.iter().zip(data) {
            words[p] = w;
        }
        for (&p, &w) in self.key_positions.iter().zip(key) {
            words[p] = w;
        }
        words
    }

    pub fn eval_words(&self, data: &[u64], key: &[u64]) -> Vec<u64> {
        assert_eq!(data.len(), self.data_width(), "data width");
        assert_eq!(key.len(), self.key_width(), "key width");
        self.circuit
            .eval_words(&self.input_words(data, key))
            .expect("width checked")
    }

    pub fn eval(&self, data: &[bool], key: &[bool]) -> Vec<bool> {
        let to_w = |b: &bool| if *b { 1u64 } else { 0 };
        let d: Vec<u64> = data.iter().map(to_w).collect();
        let k: Vec<u64> = key.iter().map(to_w).collect();
        self.eval_words(&d, &k).into_iter().map(|w| w & 1 == 1).collect()
    }
}

/// Picks a fresh net name derived from `base`.
fn fresh_name(taken: &mut HashSet<String>, base: &str) -> String {
    if taken.insert(base.to_string()) {
        return base.to_string();
    }
    let mut i = 1;
    loop {
        let cand = format!("{base}_{i}");
        if taken.insert(cand.clone()) {
            return cand;
        }
        i += 1;
    }
}

fn net_names(c: &Circuit) -> HashSet<String> {
    (0..c.num_nets())
        .map(|i| c.net_name(NetId(i)).to_string())
        .collect()
}

fn key_names(taken: &mut HashSet<String>, width: usize) -> Vec<String> {
    (0..width)
        .map(|i| fresh_name(taken, &format!("{KEY_PREFIX}{i}")))
        .collect()
}

/// Splices XOR/XNOR key gates onto the outputs of `order[..count]`.
/// Key bit 0 selects XOR and bit 1 XNOR, so `key` is the correct key.
pub fn insert_key_gates(
    c: &Circuit,
    count: usize,
    order: &[GateId],
    key: &KeyVector,
) -> Result<LockedCircuit> {
    if count > order.len() {
        return Err(LockError::NotEnoughLocations {
            requested: count,
            available: order.len(),
        });
    }
    if key.len() != count {
        return Err(LockError::KeyWidth {
            expected: count,
            got: key.len(),
        });
    }
    let mut taken = net_names(c);
    let keys = key_names(&mut taken, count);

    // spliced[gate] = (key index, renamed original output)
    let mut spliced: Vec<Option<(usize, String)>> = vec![None; c.gates().len()];
    for (i, &g) in order[..count].iter().enumerate() {
        let out = c.net_name(c.gate(g).output);
        spliced[g.0] = Some((i, fresh_name(&mut taken, &format!("{out}_kg{i}"))));
    }

    let mut b = CircuitBuilder::new(format!("{}_xor{}", c.name(), count));
    for n in c.input_names() {
        b.input(n);
    }
    for k in &keys {
        b.input(k.as_str());
    }
    for n in c.output_names() {
        b.output(n);
    }
    for (gi, g) in c.gates().iter().enumerate() {
        let ins = g.inputs.iter().map(|&n| c.net_name(n));
        let out = c.net_name(g.output);
        match &spliced[gi] {
            None => {
                b.gate(out, g.kind, ins);
            }
            Some((ki, inner)) => {
                b.gate(inner.as_str(), g.kind, ins);
                let kind = if key.0[*ki] {
                    GateKind::Xnor
                } else {
                    GateKind::Xor
                };
                b.gate(out, kind, [inner.as_str(), keys[*ki].as_str()]);
            }
        }
    }
    let locations = order[..count]
        .iter()
        .map(|&g| c.net_name(c.gate(g).output).to_string())
        .collect();
    let circuit = b.build()?;
    let key_refs: Vec<&str> = keys.iter().map(String::as_str).collect();
    LockedCircuit::new(
        circuit,
        &key_refs,
        Some(key.clone()),
        Scheme::XorInsertion { locations },
        KeyBlocks::PerGate,
    )
}

/// A circuit copy whose single output has been detached so a block can be XORed in.
struct OutputSplice {
    builder: CircuitBuilder,
    taken: HashSet<String>,
    /// Net carrying the original output function.
    original: String,
    /// Name the locked output must drive.
    output: String,
}

fn splice_single_output(c: &Circuit, suffix: &str) -> Result<OutputSplice> {
    if c.outputs().len() != 1 {
        return Err(LockError::NotSingleOutput(c.outputs().len()));
    }
    let mut taken = net_names(c);
    let y = c.outputs()[0];
    let y_name = c.net_name(y).to_string();
    let mut b = CircuitBuilder::new(format!("{}_{suffix}", c.name()));
    for n in c.input_names() {
        b.input(n);
    }
    let (original, output) = match c.driver(y) {
        Driver::Input(_) => {
            let out = fresh_name(&mut taken, &format!("{y_name}_locked"));
            (y_name.clone(), out)
        }
        Driver::Gate(_) => {
            let inner = fresh_name(&mut taken, &format!("{y_name}_orig"));
            (inner, y_name.clone())
        }
    };
    for g in c.gates() {
        let out = c.net_name(g.output);
        let out = if g.output == y { original.as_str() } else { out };
        b.gate(out, g.kind, g.inputs.iter().map(|&n| c.net_name(n)));
    }
    b.output(output.as_str());
    Ok(OutputSplice {
        builder: b,
        taken,
        original,
        output,
    })
}

fn resolve_taps(c: &Circuit, r: usize, taps: Option<&[&str]>) -> Result<Vec<String>> {
    if r == 0 {
        return Err(LockError::EmptyBlock);
    }
    let taps: Vec<String> = match taps {
        Some(t) => {
            for name in t {
                if !c.input_names().any(|n| n == *name) {
                    return Err(LockError::UnknownInput(name.to_string()));
                }
            }
            t.iter().map(|s| s.to_string()).collect()
        }
        None => c.input_names().map(str::to_string).collect(),
    };
    if r > taps.len() {
        return Err(LockError::BlockTooWide {
            r,
            available: taps.len(),
        });
    }
    Ok(taps[..r].to_vec())
}

/// How each complementary block combines its key-mixed taps.
#[derive(Clone, Copy)]
enum BlockShape<'a> {
    /// One n-ary AND (for `g`) or NAND (for `g_bar`).
    Flat,
    /// Cascaded two-input chain; element j (1-based) is OR when listed.
    Chain(&'a [usize]),
}

/// Emits `XOR(tap_i, key_i)` terms and combines them; `invert` flips the final gate.
fn emit_block(
    b: &mut CircuitBuilder,
    taken: &mut HashSet<String>,
    prefix: &str,
    taps: &[String],
    keys: &[String],
    shape: BlockShape<'_>,
    invert: bool,
) -> String {
    let terms: Vec<String> = taps
        .iter()
        .zip(keys)
        .enumerate()
        .map(|(i, (x, k))| {
            let t = fresh_name(taken, &format!("{prefix}_t{i}"));
            b.gate(t.as_str(), GateKind::Xor, [x.as_str(), k.as_str()]);
            t
        })
        .collect();
    let out = fresh_name(taken, prefix);
    if terms.len() == 1 {
        let kind = if invert { GateKind::Not } else { GateKind::Buf };
        b.gate(out.as_str(), kind, [terms[0].as_str()]);
        return out;
    }
    match shape {
        BlockShape::Flat => {
            let kind = if invert { GateKind::Nand } else { GateKind::And };
            b.gate(out.as_str(), kind, terms.iter().map(String::as_str));
        }
        BlockShape::Chain(ors) => {
            let mut acc = terms[0].clone();
            for (j, t) in terms.iter().enumerate().skip(1) {
                let is_or = ors.contains(&j);
                let last = j == terms.len() - 1;
                let kind = match (is_or, last && invert) {
                    (false, false) => GateKind::And,
                    (false, true) => GateKind::Nand,
                    (true, false) => GateKind::Or,
                    (true, true) => GateKind::Nor,
                };
                let name = if last {
                    out.clone()
                } else {
                    fresh_name(taken, &format!("{prefix}_c{j}"))
                };
                b.gate(name.as_str(), kind, [acc.as_str(), t.as_str()]);
                acc = name;
            }
        }
    }
    out
}

fn lock_complementary(
    c: &Circuit,
    r: usize,
    value: &KeyVector,
    taps: Option<&[&str]>,
    shape: BlockShape<'_>,
    suffix: &str,
) -> Result<(Circuit, Vec<String>, Vec<String>)> {
    if value.len() != r {
        return Err(LockError::KeyWidth {
            expected: r,
            got: value.len(),
        });
    }
    let taps = resolve_taps(c, r, taps)?;
    let OutputSplice {
        builder: mut b,
        mut taken,
        original,
        output,
    } = splice_single_output(c, suffix)?;
    let keys = key_names(&mut taken, 2 * r);
    for k in &keys {
        b.input(k.as_str());
    }
    let g = emit_block(&mut b, &mut taken, "lk_g", &taps, &keys[..r], shape, false);
    let g_bar = emit_block(&mut b, &mut taken, "lk_gbar", &taps, &keys[r..], shape, true);
    let block = fresh_name(&mut taken, "lk_block");
    b.gate(block.as_str(), GateKind::And, [g.as_str(), g_bar.as_str()]);
    b.gate(output.as_str(), GateKind::Xor, [original.as_str(), block.as_str()]);
    Ok((b.build()?, keys, taps))
}

fn complementary_blocks(r: usize) -> KeyBlocks {
    KeyBlocks::Complementary {
        g: (0..r).collect(),
        g_bar: (r..2 * r).collect(),
    }
}

fn doubled(value: &KeyVector) -> KeyVector {
    KeyVector([value.0.clone(), value.0.clone()].concat())
}

/// AntiSAT: `y ^ (AND(x ^ Kg) & NAND(x ^ Kg_bar))` over `r` tapped inputs.
/// Key bits `0..r` are `Kg`, `r..2r` are `Kg_bar`; the recorded key sets both to `value`.
pub fn lock_antisat(
    c: &Circuit,
    r: usize,
    value: &KeyVector,
    taps: Option<&[&str]>,
) -> Result<LockedCircuit> {
    let (circuit, keys, taps) =
        lock_complementary(c, r, value, taps, BlockShape::Flat, &format!("antisat{r}"))?;
    let key_refs: Vec<&str> = keys.iter().map(String::as_str).collect();
    LockedCircuit::new(
        circuit,
        &key_refs,
        Some(doubled(value)),
        Scheme::AntiSat { r, taps },
        complementary_blocks(r),
    )
}

/// CAS-Lock: like AntiSAT but each block is a cascaded two-input chain where
/// the elements at `or_positions` (1-based, `1..r`) are OR instead of AND.
/// `g_bar` mirrors `g` with its last gate inverted.
pub fn lock_caslock(
    c: &Circuit,
    r: usize,
    or_positions: &[usize],
    value: &KeyVector,
    taps: Option<&[&str]>,
) -> Result<LockedCircuit> {
    for &p in or_positions {
        if p == 0 || p >= r {
            return Err(LockError::BadOrPosition(p, r));
        }
    }
    let mut ors = or_positions.to_vec();
    ors.sort_unstable();
    ors.dedup();
    let (circuit, keys, taps) = lock_complementary(
        c,
        r,
        value,
        taps,
        BlockShape::Chain(&ors),
        &format!("caslock{r}"),
    )?;
    let key_refs: Vec<&str> = keys.iter().map(String::as_str).collect();
    LockedCircuit::new(
        circuit,
        &key_refs,
        Some(doubled(value)),
        Scheme::CasLock {
            r,
            or_positions: ors,
            taps,
        },
        complementary_blocks(r),
    )
}

/// Constant-aware signal used while emitting comparator trees.
#[derive(Clone, Debug)]
enum Sig {
    Const(bool),
    Net(String),
}

struct Emitter<'a> {
    b: &'a mut CircuitBuilder,
    taken: &'a mut HashSet<String>,
    prefix: String,
}

impl Emitter<'_> {
    fn gate(&mut self, kind: GateKind, ins: &[&str]) -> String {
        let name = fresh_name(self.taken, &format!("{}_n{}", self.prefix, self.taken.len()));
        self.b.gate(name.as_str(), kind, ins.iter().copied());
        name
    }

    fn and(&mut self, a: &Sig, b: &Sig) -> Sig {
        match (a, b) {
            (Sig::Const(false), _) | (_, Sig::Const(false)) => Sig::Const(false),
            (Sig::Const(true), x) | (x, Sig::Const(true)) => x.clone(),
            (Sig::Net(x), Sig::Net(y)) => Sig::Net(self.gate(GateKind::And, &[x, y])),
        }
    }

    fn or(&mut self, a: &Sig, b: &Sig) -> Sig {
        match (a, b) {
            (Sig::Const(true), _) | (_, Sig::Const(true)) => Sig::Const(true),
            (Sig::Const(false), x) | (x, Sig::Const(false)) => x.clone(),
            (Sig::Net(x), Sig::Net(y)) => Sig::Net(self.gate(GateKind::Or, &[x, y])),
        }
    }

    /// 1 iff exactly `h` of `bits` are 1 (`bits` are net names).
    fn exactly(&mut self, bits: &[String], h: usize) -> Sig {
        let mut count: Vec<Sig> = (0..=h).map(|j| Sig::Const(j == 0)).collect();
        for d in bits {
            let nd = Sig::Net(self.gate(GateKind::Not, &[d]));
            let d = Sig::Net(d.clone());
            let mut next = Vec::with_capacity(h + 1);
            for j in 0..=h {
                let stay = self.and(&count[j], &nd);
                let step = if j == 0 {
                    Sig::Const(false)
                } else {
                    self.and(&count[j - 1], &d)
                };
                next.push(self.or(&stay, &step));
            }
            count = next;
        }
        count.pop().expect("h + 1 entries")
    }
}

/// SFLL-HD (TTLock when `h == 0`): the output is XORed with a key-free perturb
/// unit (1 iff `HD(x, pattern) == h`) and a keyed restore unit (1 iff `HD(x, key) == h`).
pub fn lock_sfll_hd(c: &Circuit, pattern: &KeyVector, h: usize) -> Result<LockedCircuit> {
    let width = c.inputs().len();
    if pattern.len() != width {
        return Err(LockError::KeyWidth {
            expected: width,
            got: pattern.len(),
        });
    }
    if h >= width {
        return Err(LockError::DistanceTooLarge { h, width });
    }
    let suffix = if h == 0 {
        "ttlock".to_string()
    } else {
        format!("sfllhd{h}")
    };
    let OutputSplice {
        builder: mut b,
        mut taken,
        original,
        output,
    } = splice_single_output(c, &suffix)?;
    let keys = key_names(&mut taken, width);
    for k in &keys {
        b.input(k.as_str());
    }
    let inputs: Vec<String> = c.input_names().map(str::to_string).collect();

    let mut em = Emitter {
        b: &mut b,
        taken: &mut taken,
        prefix: "pu".into(),
    };
    let pu_diff: Vec<String> = inputs
        .iter()
        .zip(pattern.bits())
        .map(|(x, &p)| {
            if p {
                em.gate(GateKind::Not, &[x])
            } else {
                x.clone()
            }
        })
        .collect();
    let pu = em.exactly(&pu_diff, h);
    em.prefix = "ru".into();
    let ru_diff: Vec<String> = inputs
        .iter()
        .zip(&keys)
        .map(|(x, k)| em.gate(GateKind::Xor, &[x, k]))
        .collect();
    let ru = em.exactly(&ru_diff, h);
    let (Sig::Net(pu), Sig::Net(ru)) = (pu, ru) else {
        unreachable!("h < width keeps both units non-constant");
    };
    let perturb_net = fresh_name(&mut taken, "sfll_perturb");
    let restore_net = fresh_name(&mut taken, "sfll_restore");
    let mixed = fresh_name(&mut taken, "sfll_mix");
    b.gate(perturb_net.as_str(), GateKind::Buf, [pu.as_str()]);
    b.gate(restore_net.as_str(), GateKind::Buf, [ru.as_str()]);
    b.gate(mixed.as_str(), GateKind::Xor, [original.as_str(), perturb_net.as_str()]);
    b.gate(output.as_str(), GateKind::Xor, [mixed.as_str(), restore_net.as_str()]);

    let circuit = b.build()?;
    let key_refs: Vec<&str> = keys.iter().map(String::as_str).collect();
    let pattern_s = pattern.to_string();
    let scheme = if h == 0 {
        Scheme::TtLock {
            pattern: pattern_s,
            perturb_net,
            restore_net,
        }
    } else {
        Scheme::SfllHd {
            h,
            pattern: pattern_s,
            perturb_net,
            restore_net,
        }
    };
    LockedCircuit::new(
        circuit,
        &key_refs,
        Some(pattern.clone()),
        scheme,
        KeyBlocks::Restore {
            bits: (0..width).collect(),
        },
    )
}

enum Folded {
    Const(bool),
    Gate(GateKind, Vec<NetId>),
}

fn fold_gate(kind: GateKind, ins: &[NetId], konst: &[Option<bool>]) -> Folded {
    let mut live = Vec::with_capacity(ins.len());
    let mut ones = 0usize;
    let mut zeros = 0usize;
    for &n in ins {
        match konst[n.0] {
            Some(true) => ones += 1,
            Some(false) => zeros += 1,
            None => live.push(n),
        }
    }
    let shrink = |base: GateKind, inv: bool, live: Vec<NetId>, empty: bool| -> Folded {
        match live.len() {
            0 => Folded::Const(empty),
            1 => Folded::Gate(if inv { GateKind::Not } else { GateKind::Buf }, live),
            _ => Folded::Gate(base, live),
        }
    };
    match kind {
        GateKind::And if zeros > 0 => Folded::Const(false),
        GateKind::Nand if zeros > 0 => Folded::Const(true),
        GateKind::Or if ones > 0 => Folded::Const(true),
        GateKind::Nor if ones > 0 => Folded::Const(false),
        GateKind::And => shrink(GateKind::And, false, live, true),
        GateKind::Nand => shrink(GateKind::Nand, true, live, false),
        GateKind::Or => shrink(GateKind::Or, false, live, false),
        GateKind::Nor => shrink(GateKind::Nor, true, live, true),
        GateKind::Xor | GateKind::Xnor => {
            // Parity of constant ones, then of the gate's own inversion.
            let inv = (ones % 2 == 1) ^ (kind == GateKind::Xnor);
            let base = if inv { GateKind::Xnor } else { GateKind::Xor };
            shrink(base, inv, live, inv)
        }
        GateKind::Not | GateKind::Buf => match konst[ins[0].0] {
            Some(v) => Folded::Const(v ^ (kind == GateKind::Not)),
            None => Folded::Gate(kind, live),
        },
    }
}

/// Ties the key inputs to `key` and propagates constants; the result has only
/// the data inputs. Outputs that fold to a constant are expressed as
/// `XOR(x, x)` / `XNOR(x, x)` of the first data input.
pub fn apply_key(lc: &LockedCircuit, key: &KeyVector) -> Result<Circuit> {
    if key.len() != lc.key_width() {
        return Err(LockError::KeyWidth {
            expected: lc.key_width(),
            got: key.len(),
        });
    }
    let c = lc.circuit();
    let mut konst: Vec<Option<bool>> = vec![None; c.num_nets()];
    for (net, &v) in lc.key_inputs().into_iter().zip(key.bits()) {
        konst[net.0] = Some(v);
    }
    let mut folded: Vec<Option<Folded>> = (0..c.gates().len()).map(|_| None).collect();
    for &gid in c.topo_order() {
        let g = c.gate(gid);
        let f = fold_gate(g.kind, &g.inputs, &konst);
        if let Folded::Const(v) = f {
            konst[g.output.0] = Some(v);
        }
        folded[gid.0] = Some(f);
    }

    let mut b = CircuitBuilder::new(format!("{}_unlocked", c.name()));
    let data = lc.data_input_names();
    for n in &data {
        b.input(*n);
    }
    for n in c.output_names() {
        b.output(n);
    }
    for (gi, g) in c.gates().iter().enumerate() {
        if let Some(Folded::Gate(kind, ins)) = &folded[gi] {
            b.gate(c.net_name(g.output), *kind, ins.iter().map(|&n| c.net_name(n)));
        }
    }
    let mut emitted: HashSet<NetId> = HashSet::new();
    for &o in c.outputs() {
        if let Some(v) = konst[o.0] {
            if !emitted.insert(o) {
                continue;
            }
            let x = *data.first().ok_or(LockError::NoDataInputs)?;
            let kind = if v { GateKind::Xnor } else { GateKind::Xor };
            b.gate(c.net_name(o), kind, [x, x]);
        }
    }
    Ok(b.build()?)
}

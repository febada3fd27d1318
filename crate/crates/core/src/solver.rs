//! Conflict-driven clause-learning SAT solver with incremental clauses and
//! assumptions.
//!
//! Fixed parameters: variable activity decay 0.95, clause activity decay 0.999,
//! geometric restarts (first after 100 conflicts, factor 1.5), learned-clause
//! database halved by activity when it exceeds a limit that starts at
//! `max(clauses / 3, 2000)` and grows 10% per reduction. Decisions take the
//! highest-activity variable, smaller index first on ties, with saved phase
//! (initially false).

use std::time::Instant;

use thiserror::Error;

use crate::cnf::{CnfFormula, Lit, Var};

const VAR_DECAY: f64 = 0.95;
const CLAUSE_DECAY: f64 = 0.999;
const RESTART_FIRST: f64 = 100.0;
const RESTART_FACTOR: f64 = 1.5;
const LEARNT_GROWTH: f64 = 1.1;

const UNDEF: u8 = 2;
const NO_REASON: u32 = u32::MAX;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("variable {0} is not in the model")]
pub struct UnknownVariable(pub Var);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Model(Vec<bool>);

impl Model {
    pub fn value(&self, v: Var) -> Result<bool, UnknownVariable> {
        match v.checked_sub(1).and_then(|i| self.0.get(i as usize)) {
            Some(&b) => Ok(b),
            None => Err(UnknownVariable(v)),
        }
    }

    pub fn lit_value(&self, l: Lit) -> Result<bool, UnknownVariable> {
        self.value(l.unsigned_abs()).map(|b| b == (l > 0))
    }

    pub fn values(&self, vars: &[Var]) -> Result<Vec<bool>, UnknownVariable> {
        vars.iter().map(|&v| self.value(v)).collect()
    }

    /// Index `i` holds variable `i + 1`.
    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolveResult {
    Sat(Model),
    Unsat,
}

impl SolveResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, SolveResult::Sat(_))
    }

    pub fn model(&self) -> Option<&Model> {
        match self {
            SolveResult::Sat(m) => Some(m),
            SolveResult::Unsat => None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub solves: u64,
    pub conflicts: u64,
    pub decisions: u64,
    pub propagations: u64,
    pub restarts: u64,
    pub learnt_literals: u64,
}

#[derive(Clone, Debug)]
struct ClauseData {
    lits: Vec<u32>,
    learnt: bool,
    deleted: bool,
    activity: f64,
}

#[derive(Clone, Copy, Debug)]
struct Watch {
    cref: u32,
    blocker: u32,
}

// Internal literal code: 2 * var_index + negated.
fn code(l: Lit) -> u32 {
    let v = l.unsigned_abs() - 1;
    2 * v + u32::from(l < 0)
}

fn to_lit(c: u32) -> Lit {
    let v = (c >> 1) as Lit + 1;
    if c & 1 == 1 {
        -v
    } else {
        v
    }
}

fn var_of(c: u32) -> usize {
    (c >> 1) as usize
}

/// Binary max-heap of variables ordered by activity, smaller index on ties.
#[derive(Clone, Debug, Default)]
struct VarHeap {
    heap: Vec<u32>,
    pos: Vec<usize>,
}

impl VarHeap {
    const ABSENT: usize = usize::MAX;

    fn grow(&mut self, n: usize) {
        self.pos.resize(n, Self::ABSENT);
    }

    fn contains(&self, v: usize) -> bool {
        self.pos[v] != Self::ABSENT
    }

    fn better(act: &[f64], a: u32, b: u32) -> bool {
        let (x, y) = (act[a as usize], act[b as usize]);
        x > y || (x == y && a < b)
    }

    fn up(&mut self, act: &[f64], mut i: usize) {
        let v = self.heap[i];
        while i > 0 {
            let parent = (i - 1) / 2;
            if !Self::better(act, v, self.heap[parent]) {
                break;
            }
            self.heap[i] = self.heap[parent];
            self.pos[self.heap[i] as usize] = i;
            i = parent;
        }
        self.heap[i] = v;
        self.pos[v as usize] = i;
    }

    fn down(&mut self, act: &[f64], mut i: usize) {
        let v = self.heap[i];
        loop {
            let l = 2 * i + 1;
            if l >= self.heap.len() {
                break;
            }
            let r = l + 1;
            let child = if r < self.heap.len() && Self::better(act, self.heap[r], self.heap[l]) {
                r
            } else {
                l
            };
            if !Self::better(act, self.heap[child], v) {
                break;
            }
            self.heap[i] = self.heap[child];
            self.pos[self.heap[i] as usize] = i;
            i = child;
        }
        self.heap[i] = v;
        self.pos[v as usize] = i;
    }

    fn insert(&mut self, act: &[f64], v: usize) {
        if self.contains(v) {
            return;
        }
        self.heap.push(v as u32);
        self.pos[v] = self.heap.len() - 1;
        self.up(act, self.heap.len() - 1);
    }

    fn bumped(&mut self, act: &[f64], v: usize) {
        if self.contains(v) {
            self.up(act, self.pos[v]);
        }
    }

    fn pop(&mut self, act: &[f64]) -> Option<usize> {
        let top = *self.heap.first()?;
        let last = self.heap.pop().expect("non-empty");
        self.pos[top as usize] = Self::ABSENT;
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.pos[last as usize] = 0;
            self.down(act, 0);
        }
        Some(top as usize)
    }
}

#[derive(Clone, Debug)]
pub struct Solver {
    clauses: Vec<ClauseData>,
    learnts: Vec<u32>,
    num_original: usize,
    watches: Vec<Vec<Watch>>,
    assigns: Vec<u8>,
    level: Vec<u32>,
    reason: Vec<u32>,
    polarity: Vec<bool>,
    activity: Vec<f64>,
    seen: Vec<bool>,
    heap: VarHeap,
    trail: Vec<u32>,
    trail_lim: Vec<usize>,
    qhead: usize,
    var_inc: f64,
    cla_inc: f64,
    max_learnts: f64,
    ok: bool,
    stats: SolverStats,
}

impl Default for Solver {
    fn default() -> Self {
        Self::new()
    }
}

impl Solver {
    pub fn new() -> Self {
        Solver {
            clauses: Vec::new(),
            learnts: Vec::new(),
            num_original: 0,
            watches: Vec::new(),
            assigns: Vec::new(),
            level: Vec::new(),
            reason: Vec::new(),
            polarity: Vec::new(),
            activity: Vec::new(),
            seen: Vec::new(),
            heap: VarHeap::default(),
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            var_inc: 1.0,
            cla_inc: 1.0,
            max_learnts: 0.0,
            ok: true,
            stats: SolverStats::default(),
        }
    }

    pub fn from_formula(f: &CnfFormula) -> Self {
        let mut s = Self::new();
        s.add_formula(f);
        s
    }

    pub fn num_vars(&self) -> u32 {
        self.assigns.len() as u32
    }

    /// Clauses added through `add_clause` (tautologies and level-0 satisfied ones included).
    pub fn num_clauses(&self) -> usize {
        self.num_original
    }

    pub fn num_learnts(&self) -> usize {
        self.learnts.len()
    }

    pub fn stats(&self) -> SolverStats {
        self.stats
    }

    /// False once the clause database is known unsatisfiable without assumptions.
    pub fn is_ok(&self) -> bool {
        self.ok
    }

    pub fn new_var(&mut self) -> Var {
        let n = self.num_vars() + 1;
        self.ensure_vars(n);
        n
    }

    pub fn ensure_vars(&mut self, n: u32) {
        let n = n as usize;
        let old = self.assigns.len();
        if n <= old {
            return;
        }
        self.assigns.resize(n, UNDEF);
        self.level.resize(n, 0);
        self.reason.resize(n, NO_REASON);
        self.polarity.resize(n, false);
        self.activity.resize(n, 0.0);
        self.seen.resize(n, false);
        self.watches.resize(2 * n, Vec::new());
        self.heap.grow(n);
        for v in old..n {
            self.heap.insert(&self.activity, v);
        }
    }

    pub fn add_formula(&mut self, f: &CnfFormula) {
        self.ensure_vars(f.num_vars());
        for c in f.clauses() {
            self.add_clause(c);
        }
    }

    /// Adds a clause between solves. Returns false if the database became unsatisfiable.
    pub fn add_clause(&mut self, clause: &[Lit]) -> bool {
        self.num_original += 1;
        if !self.ok {
            return false;
        }
        debug_assert!(self.trail_lim.is_empty());
        let max_var = clause.iter().map(|l| l.unsigned_abs()).max().unwrap_or(0);
        self.ensure_vars(max_var);
        let mut lits: Vec<u32> = clause.iter().map(|&l| code(l)).collect();
        lits.sort_unstable();
        lits.dedup();
        let mut kept = Vec::with_capacity(lits.len());
        for (i, &c) in lits.iter().enumerate() {
            if i + 1 < lits.len() && lits[i + 1] == c ^ 1 {
                return true;
            }
            match self.value(c) {
                1 => return true,
                0 => {}
                _ => kept.push(c),
            }
        }
        match kept.len() {
            0 => {
                self.ok = false;
            }
            1 => {
                self.enqueue(kept[0], NO_REASON);
                self.ok = self.propagate().is_none();
            }
            _ => {
                self.attach(kept, false);
            }
        }
        self.ok
    }

    pub fn solve(&mut self, assumptions: &[Lit]) -> SolveResult {
        self.solve_limited(assumptions, None)
            .expect("no deadline was given")
    }

    /// Like `solve`, but gives up with `None` once `deadline` passes.
    pub fn solve_limited(
        &mut self,
        assumptions: &[Lit],
        deadline: Option<Instant>,
    ) -> Option<SolveResult> {
        self.stats.solves += 1;
        if !self.ok {
            return Some(SolveResult::Unsat);
        }
        let max_var = assumptions.iter().map(|l| l.unsigned_abs()).max().unwrap_or(0);
        self.ensure_vars(max_var);
        let assumptions: Vec<u32> = assumptions.iter().map(|&l| code(l)).collect();
        self.max_learnts = self.max_learnts.max((self.clauses.len() as f64 / 3.0).max(2000.0));
        let mut restart_limit = RESTART_FIRST;
        let mut since_restart = 0u64;
        let mut ticks = 0u32;

        loop {
            if let Some(confl) = self.propagate() {
                self.stats.conflicts += 1;
                since_restart += 1;
                if self.trail_lim.is_empty() {
                    self.ok = false;
                    return Some(SolveResult::Unsat);
                }
                let (learnt, bt) = self.analyze(confl);
                self.cancel_until(bt);
                self.stats.learnt_literals += learnt.len() as u64;
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], NO_REASON);
                } else {
                    let first = learnt[0];
                    let cref = self.attach(learnt, true);
                    self.bump_clause(cref);
                    self.enqueue(first, cref);
                }
                self.var_inc /= VAR_DECAY;
                self.cla_inc /= CLAUSE_DECAY;
                continue;
            }

            ticks = ticks.wrapping_add(1);
            if ticks.is_multiple_of(256) {
                if let Some(d) = deadline {
                    if Instant::now() >= d {
                        self.cancel_until(0);
                        return None;
                    }
                }
            }
            if since_restart as f64 >= restart_limit {
                since_restart = 0;
                restart_limit *= RESTART_FACTOR;
                self.stats.restarts += 1;
                self.cancel_until(0);
                continue;
            }
            if self.learnts.len() as f64 >= self.max_learnts + self.trail.len() as f64 {
                self.reduce_db();
            }

            let mut next = None;
            while self.trail_lim.len() < assumptions.len() {
                let p = assumptions[self.trail_lim.len()];
                match self.value(p) {
                    1 => self.trail_lim.push(self.trail.len()),
                    0 => {
                        self.cancel_until(0);
                        return Some(SolveResult::Unsat);
                    }
                    _ => {
                        next = Some(p);
                        break;
                    }
                }
            }
            let decision = match next {
                Some(p) => p,
                None => match self.pick_branch() {
                    Some(p) => p,
                    None => {
                        let model = Model(self.assigns.iter().map(|&a| a == 1).collect());
                        self.cancel_until(0);
                        return Some(SolveResult::Sat(model));
                    }
                },
            };
            self.stats.decisions += 1;
            self.trail_lim.push(self.trail.len());
            self.enqueue(decision, NO_REASON);
        }
    }

    /// Learned clauses currently in the database.
    pub fn learnt_clauses(&self) -> Vec<Vec<Lit>> {
        self.learnts
            .iter()
            .map(|&c| self.clauses[c as usize].lits.iter().map(|&l| to_lit(l)).collect())
            .collect()
    }

    /// 1 true, 0 false, 2 unassigned.
    fn value(&self, c: u32) -> u8 {
        let a = self.assigns[var_of(c)];
        if a == UNDEF {
            UNDEF
        } else {
            a ^ (c & 1) as u8
        }
    }

    fn enqueue(&mut self, c: u32, reason: u32) {
        let v = var_of(c);
        debug_assert_eq!(self.assigns[v], UNDEF);
        self.assigns[v] = (c & 1 == 0) as u8;
        self.level[v] = self.trail_lim.len() as u32;
        self.reason[v] = reason;
        self.trail.push(c);
    }

    fn attach(&mut self, lits: Vec<u32>, learnt: bool) -> u32 {
        let cref = self.clauses.len() as u32;
        self.watches[(lits[0] ^ 1) as usize].push(Watch {
            cref,
            blocker: lits[1],
        });
        self.watches[(lits[1] ^ 1) as usize].push(Watch {
            cref,
            blocker: lits[0],
        });
        self.clauses.push(ClauseData {
            lits,
            learnt,
            deleted: false,
            activity: 0.0,
        });
        if learnt {
            self.learnts.push(cref);
        }
        cref
    }

    fn propagate(&mut self) -> Option<u32> {
        let mut conflict = None;
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            self.stats.propagations += 1;
            let false_lit = p ^ 1;
            let mut ws = std::mem::take(&mut self.watches[p as usize]);
            let mut i = 0;
            let mut j = 0;
            while i < ws.len() {
                let w = ws[i];
                i += 1;
                if self.value(w.blocker) == 1 {
                    ws[j] = w;
                    j += 1;
                    continue;
                }
                let cref = w.cref as usize;
                if self.clauses[cref].deleted {
                    continue;
                }
                {
                    let lits = &mut self.clauses[cref].lits;
                    if lits[0] == false_lit {
                        lits.swap(0, 1);
                    }
                }
                let first = self.clauses[cref].lits[0];
                let nw = Watch {
                    cref: w.cref,
                    blocker: first,
                };
                if first != w.blocker && self.value(first) == 1 {
                    ws[j] = nw;
                    j += 1;
                    continue;
                }
                let len = self.clauses[cref].lits.len();
                let mut moved = false;
                for k in 2..len {
                    let l = self.clauses[cref].lits[k];
                    if self.value(l) != 0 {
                        self.clauses[cref].lits.swap(1, k);
                        self.watches[(l ^ 1) as usize].push(nw);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                ws[j] = nw;
                j += 1;
                if self.value(first) == 0 {
                    conflict = Some(w.cref);
                    self.qhead = self.trail.len();
                    while i < ws.len() {
                        ws[j] = ws[i];
                        j += 1;
                        i += 1;
                    }
                } else {
                    self.enqueue(first, w.cref);
                }
            }
            ws.truncate(j);
            self.watches[p as usize] = ws;
            if conflict.is_some() {
                break;
            }
        }
        conflict
    }

    fn bump_var(&mut self, v: usize) {
        self.activity[v] += self.var_inc;
        if self.activity[v] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        self.heap.bumped(&self.activity, v);
    }

    fn bump_clause(&mut self, cref: u32) {
        let c = &mut self.clauses[cref as usize];
        c.activity += self.cla_inc;
        if c.activity > 1e20 {
            for &l in &self.learnts {
                self.clauses[l as usize].activity *= 1e-20;
            }
            self.cla_inc *= 1e-20;
        }
    }

    /// First-UIP learning. Returns the learned clause (asserting literal first,
    /// highest remaining level second) and the backjump level.
    fn analyze(&mut self, mut confl: u32) -> (Vec<u32>, usize) {
        let current = self.trail_lim.len() as u32;
        let mut learnt = vec![0u32];
        let mut pending = 0usize;
        let mut p: Option<u32> = None;
        let mut idx = self.trail.len();
        loop {
            if self.clauses[confl as usize].learnt {
                self.bump_clause(confl);
            }
            let start = usize::from(p.is_some());
            let lits = self.clauses[confl as usize].lits.clone();
            for &q in &lits[start..] {
                let v = var_of(q);
                if !self.seen[v] && self.level[v] > 0 {
                    self.seen[v] = true;
                    self.bump_var(v);
                    if self.level[v] >= current {
                        pending += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                idx -= 1;
                if self.seen[var_of(self.trail[idx])] {
                    break;
                }
            }
            let lit = self.trail[idx];
            let v = var_of(lit);
            self.seen[v] = false;
            p = Some(lit);
            pending -= 1;
            if pending == 0 {
                break;
            }
            confl = self.reason[v];
        }
        learnt[0] = p.expect("conflict above level 0") ^ 1;

        // Drop literals implied by the rest of the clause through their reason.
        let mut out = vec![learnt[0]];
        for &q in &learnt[1..] {
            let r = self.reason[var_of(q)];
            let redundant = r != NO_REASON
                && self.clauses[r as usize].lits[1..].iter().all(|&x| {
                    let xv = var_of(x);
                    self.seen[xv] || self.level[xv] == 0
                });
            if !redundant {
                out.push(q);
            }
        }
        for &q in &learnt[1..] {
            self.seen[var_of(q)] = false;
        }

        let mut bt = 0;
        if out.len() > 1 {
            let mut max_i = 1;
            for i in 2..out.len() {
                if self.level[var_of(out[i])] > self.level[var_of(out[max_i])] {
                    max_i = i;
                }
            }
            out.swap(1, max_i);
            bt = self.level[var_of(out[1])] as usize;
        }
        (out, bt)
    }

    fn cancel_until(&mut self, level: usize) {
        if self.trail_lim.len() <= level {
            return;
        }
        let start = self.trail_lim[level];
        for i in (start..self.trail.len()).rev() {
            let c = self.trail[i];
            let v = var_of(c);
            self.assigns[v] = UNDEF;
            self.reason[v] = NO_REASON;
            self.polarity[v] = c & 1 == 0;
            self.heap.insert(&self.activity, v);
        }
        self.trail.truncate(start);
        self.trail_lim.truncate(level);
        self.qhead = start;
    }

    fn pick_branch(&mut self) -> Option<u32> {
        while let Some(v) = self.heap.pop(&self.activity) {
            if self.assigns[v] == UNDEF {
                let neg = u32::from(!self.polarity[v]);
                return Some(2 * v as u32 + neg);
            }
        }
        None
    }

    fn locked(&self, cref: u32) -> bool {
        let l0 = self.clauses[cref as usize].lits[0];
        self.value(l0) == 1 && self.reason[var_of(l0)] == cref
    }

    fn reduce_db(&mut self) {
        let mut order = self.learnts.clone();
        order.sort_by(|&a, &b| {
            let (ca, cb) = (&self.clauses[a as usize], &self.clauses[b as usize]);
            ca.activity
                .partial_cmp(&cb.activity)
                .expect("finite activity")
                .then(a.cmp(&b))
        });
        let half = order.len() / 2;
        let mut removed = 0;
        for &cref in &order[..half] {
            if self.clauses[cref as usize].lits.len() > 2 && !self.locked(cref) {
                let c = &mut self.clauses[cref as usize];
                c.deleted = true;
                c.lits = Vec::new();
                removed += 1;
            }
        }
        if removed > 0 {
            let clauses = &self.clauses;
            self.learnts.retain(|&c| !clauses[c as usize].deleted);
            for ws in &mut self.watches {
                ws.retain(|w| !clauses[w.cref as usize].deleted);
            }
        }
        self.max_learnts *= LEARNT_GROWTH;
    }
}

/// Pigeonhole formula: `pigeons` pigeons into `holes` holes, one variable per pair.
pub fn pigeonhole(pigeons: u32, holes: u32) -> CnfFormula {
    let var = |p: u32, h: u32| p * holes + h + 1;
    let mut f = CnfFormula::with_vars(pigeons * holes);
    for p in 0..pigeons {
        f.add_clause((0..holes).map(|h| var(p, h) as Lit).collect::<Vec<_>>());
    }
    for h in 0..holes {
        for p in 0..pigeons {
            for q in p + 1..pigeons {
                f.add_clause(vec![-(var(p, h) as Lit), -(var(q, h) as Lit)]);
            }
        }
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force(f: &CnfFormula) -> bool {
        let n = f.num_vars() as usize;
        (0..1u64 << n).any(|v| f.satisfied_by(&bits::bits_of(v, n)))
    }

    fn random_formula(rng: &mut ChaCha8Rng, n: u32, m: usize) -> CnfFormula {
        let mut f = CnfFormula::with_vars(n);
        for _ in 0..m {
            let len = rng.gen_range(1..=3);
            let c: Vec<Lit> = (0..len)
                .map(|_| {
                    let v = rng.gen_range(1..=n) as Lit;
                    if rng.gen() {
                        v
                    } else {
                        -v
                    }
                })
                .collect();
            f.add_clause(c);
        }
        f
    }

    #[test]
    fn contradiction() {
        let mut s = Solver::new();
        s.add_clause(&[1]);
        s.add_clause(&[-1]);
        assert_eq!(s.solve(&[]), SolveResult::Unsat);
    }

    #[test]
    fn empty_database_is_sat_and_deterministic() {
        let mut s = Solver::new();
        s.ensure_vars(3);
        let a = s.solve(&[]);
        let b = s.solve(&[]);
        assert!(a.is_sat());
        assert_eq!(a, b);
        assert_eq!(a.model().unwrap().as_slice(), &[false, false, false]);
    }

    #[test]
    fn model_lookups() {
        let mut s = Solver::new();
        s.add_clause(&[1]);
        s.add_clause(&[-2]);
        s.add_clause(&[-1, 3]);
        let r = s.solve(&[]);
        let m = r.model().unwrap();
        assert_eq!(m.value(1), Ok(true));
        assert_eq!(m.value(2), Ok(false));
        assert_eq!(m.value(3), Ok(true));
        assert_eq!(m.value(4), Err(UnknownVariable(4)));
        assert_eq!(m.value(0), Err(UnknownVariable(0)));
    }

    #[test]
    fn pigeonhole_is_unsat() {
        assert_eq!(Solver::from_formula(&pigeonhole(4, 3)).solve(&[]), SolveResult::Unsat);
        assert_eq!(Solver::from_formula(&pigeonhole(5, 4)).solve(&[]), SolveResult::Unsat);
        assert!(Solver::from_formula(&pigeonhole(4, 4)).solve(&[]).is_sat());
    }

    #[test]
    fn incremental_and_assumptions() {
        let mut s = Solver::new();
        s.add_clause(&[1, 2]);
        assert!(s.solve(&[-1]).is_sat());
        assert_eq!(s.solve(&[-1, -2]), SolveResult::Unsat);
        // Assumption failure leaves the database usable.
        assert!(s.is_ok());
        s.add_clause(&[-2]);
        let r = s.solve(&[]);
        assert_eq!(r.model().unwrap().value(1), Ok(true));
        s.add_clause(&[-1]);
        assert_eq!(s.solve(&[]), SolveResult::Unsat);
        assert!(!s.is_ok());
    }

    #[test]
    fn tautologies_and_duplicates() {
        let mut s = Solver::new();
        s.add_clause(&[1, -1]);
        s.add_clause(&[2, 2, 2]);
        let r = s.solve(&[]);
        assert_eq!(r.model().unwrap().value(2), Ok(true));
    }

    #[test]
    fn agrees_with_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let n = rng.gen_range(1..=12);
            let m = rng.gen_range(1..=(5 * n as usize));
            let f = random_formula(&mut rng, n, m);
            let mut s = Solver::from_formula(&f);
            match s.solve(&[]) {
                SolveResult::Sat(model) => assert!(f.satisfied_by(model.as_slice())),
                SolveResult::Unsat => assert!(!brute_force(&f)),
            }
        }
    }

    #[test]
    fn learned_clauses_are_implied() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut checked = 0;
        for _ in 0..200 {
            let n = 14;
            let mut f = CnfFormula::with_vars(n);
            for _ in 0..60 {
                let c: Vec<Lit> = (0..3)
                    .map(|_| {
                        let v = rng.gen_range(1..=n) as Lit;
                        if rng.gen() {
                            v
                        } else {
                            -v
                        }
                    })
                    .collect();
                f.add_clause(c);
            }
            let mut s = Solver::from_formula(&f);
            s.solve(&[]);
            for c in s.learnt_clauses() {
                checked += 1;
                for v in 0..1u64 << n {
                    let a = bits::bits_of(v, n as usize);
                    if f.satisfied_by(&a) {
                        assert!(c.iter().any(|&l| a[l.unsigned_abs() as usize - 1] == (l > 0)));
                    }
                }
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn identical_histories_give_identical_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_formula(&mut rng, 40, 150);
        let a = Solver::from_formula(&f).solve(&[]);
        let b = Solver::from_formula(&f).solve(&[]);
        assert_eq!(a, b);
    }
}

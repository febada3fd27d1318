//! Logic-locking laboratory: netlists, cones, locking schemes, CNF encoding,
//! a CDCL solver and the oracle-guided SAT attack.

pub mod attack;
pub mod bits;
pub mod cnf;
pub mod cone;
pub mod harness;
pub mod lock;
pub mod netlist;
pub mod solver;

pub use attack::{
    dip_elimination_count, remaining_keys, sat_attack, verify_key, AttackError, AttackOptions,
    AttackTrace, IoPair, IterationRecord,
};
pub use cnf::{build_miter, encode_circuit, simplify, CnfFormula, Lit, MiterEncoding, Var};
pub use cone::{extract_cones, insertion_order, largest_cone, Cone};
pub use harness::{fit_linear, sweep, SweepConfig, SweepRecord, TrendFit};
pub use lock::{
    apply_key, insert_key_gates, lock_antisat, lock_caslock, lock_sfll_hd, KeyBlocks, KeyVector,
    LockError, LockedCircuit, Scheme,
};
pub use netlist::{
    parse_bench, write_bench, Assignment, Circuit, CircuitBuilder, GateId, GateKind, NetId,
    NetlistError,
};
pub use solver::{Model, SolveResult, Solver};

//! Key-size sweeps, linear trend fitting and tabular reports.

use std::fmt::Write as _;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack::{sat_attack, AttackError, AttackOptions, AttackTrace};
use crate::cone::{insertion_order, largest_cone};
use crate::lock::{insert_key_gates, KeyVector, LockError};
use crate::netlist::Circuit;

pub const CSV_HEADER: &str = "key_size,io_pairs,total_iters,total_s,io_pairs_s,avg_s,unsat_s,unsat_pct";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{requested} key gates requested but the cone has {available} gates")]
    TooManyKeys { requested: usize, available: usize },
    #[error("circuit has no outputs")]
    NoOutputs,
    #[error("a linear fit needs at least two points with distinct x values")]
    DegenerateFit,
    #[error(transparent)]
    Lock(#[from] LockError),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// One row of a sweep. Times are wall-clock seconds of solver calls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub key_size: usize,
    pub io_pairs: usize,
    pub total_iters: usize,
    pub total_s: f64,
    pub io_pairs_s: f64,
    pub avg_s: f64,
    pub unsat_s: f64,
    pub unsat_pct: f64,
    pub key: Option<String>,
    pub verified: bool,
    /// False when the attack hit its budget or iteration cap.
    pub complete: bool,
}

impl SweepRecord {
    pub fn from_trace(key_size: usize, t: &AttackTrace, verified: bool, complete: bool) -> Self {
        let io_pairs_s = t.io_pairs_s();
        SweepRecord {
            key_size,
            io_pairs: t.io_pairs,
            total_iters: t.total_iterations,
            total_s: t.total_s,
            io_pairs_s,
            avg_s: if t.io_pairs == 0 {
                0.0
            } else {
                io_pairs_s / t.io_pairs as f64
            },
            unsat_s: t.unsat_s,
            unsat_pct: if t.total_s > 0.0 {
                t.unsat_s / t.total_s * 100.0
            } else {
                0.0
            },
            key: t.key.as_ref().map(ToString::to_string),
            verified,
            complete,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct SweepConfig {
    pub seed: u64,
    /// Attack the key sizes concurrently.
    pub parallel: bool,
    pub max_iterations: Option<usize>,
    pub budget: Option<Duration>,
}

/// Locks the largest cone of `cone` with 1..=max_keys XOR/XNOR key gates along
/// the insertion order and attacks each instance. Correct keys come from one
/// seeded draw, so size `k` uses the first `k` bits and gate kinds never flip.
pub fn sweep(cone: &Circuit, max_keys: usize, cfg: &SweepConfig) -> Result<Vec<SweepRecord>, HarnessError> {
    if max_keys == 0 {
        return Ok(Vec::new());
    }
    if cone.outputs().is_empty() {
        return Err(HarnessError::NoOutputs);
    }
    let order = insertion_order(&largest_cone(cone));
    if max_keys > order.len() {
        return Err(HarnessError::TooManyKeys {
            requested: max_keys,
            available: order.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let full_key = KeyVector::random(max_keys, &mut rng);
    let opts = AttackOptions {
        max_iterations: cfg.max_iterations,
        budget: cfg.budget,
        ..AttackOptions::default()
    };
    let run = |k: usize| -> Result<SweepRecord, HarnessError> {
        let lc = insert_key_gates(cone, k, &order, &full_key.prefix(k))?;
        match sat_attack(&lc, cone, &opts) {
            Ok(t) => Ok(SweepRecord::from_trace(k, &t, true, true)),
            Err(e @ (AttackError::Budget { .. } | AttackError::IterationCap { .. })) => {
                Ok(SweepRecord::from_trace(k, e.trace().expect("carries a trace"), false, false))
            }
            Err(AttackError::WrongKey { trace, .. }) => Ok(SweepRecord::from_trace(k, &trace, false, true)),
            Err(e) => Err(e.into()),
        }
    };
    let mut records: Vec<SweepRecord> = if cfg.parallel {
        (1..=max_keys).into_par_iter().map(run).collect::<Result<_, _>>()?
    } else {
        (1..=max_keys).map(run).collect::<Result<_, _>>()?
    };
    records.sort_by_key(|r| r.key_size);
    Ok(records)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendFit {
    pub slope: f64,
    pub intercept: f64,
    /// Sum of squared residuals.
    pub residual_sum: f64,
    /// `y - (slope * x + intercept)` per point.
    pub deviations: Vec<f64>,
}

/// Ordinary least squares of `y` on `x`.
pub fn fit_linear(points: &[(f64, f64)]) -> Result<TrendFit, HarnessError> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return Err(HarnessError::DegenerateFit);
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(HarnessError::DegenerateFit);
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let deviations: Vec<f64> = points.iter().map(|p| p.1 - (slope * p.0 + intercept)).collect();
    let residual_sum = deviations.iter().map(|d| d * d).sum();
    Ok(TrendFit {
        slope,
        intercept,
        residual_sum,
        deviations,
    })
}

/// Fits total iterations against key size.
pub fn fit_records(records: &[SweepRecord]) -> Result<TrendFit, HarnessError> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .map(|r| (r.key_size as f64, r.total_iters as f64))
        .collect();
    fit_linear(&pts)
}

pub fn to_csv(records: &[SweepRecord]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.3}",
            r.key_size, r.io_pairs, r.total_iters, r.total_s, r.io_pairs_s, r.avg_s, r.unsat_s, r.unsat_pct
        );
    }
    s
}

pub fn to_json(records: &[SweepRecord]) -> Result<String, HarnessError> {
    Ok(serde_json::to_string_pretty(records)?)
}

pub fn from_json(text: &str) -> Result<Vec<SweepRecord>, HarnessError> {
    Ok(serde_json::from_str(text)?)
}

/// Key sizes whose total iteration count is below the previous record's.
pub fn ti_drops(records: &[SweepRecord]) -> Vec<usize> {
    records
        .windows(2)
        .filter(|w| w[1].total_iters < w[0].total_iters)
        .map(|w| w[1].key_size)
        .collect()
}

pub fn summary(records: &[SweepRecord]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{} records", records.len());
    if let Ok(fit) = fit_records(records) {
        let _ = writeln!(
            s,
            "TI fit: {:.4} * |K| + {:.4} (residual {:.4})",
            fit.slope, fit.intercept, fit.residual_sum
        );
    }
    for w in records.windows(2) {
        if w[1].total_iters < w[0].total_iters {
            let _ = writeln!(
                s,
                "TI drop at |K|={}: {} -> {}",
                w[1].key_size, w[0].total_iters, w[1].total_iters
            );
        }
    }
    let incomplete: Vec<String> = records
        .iter()
        .filter(|r| !r.complete)
        .map(|r| r.key_size.to_string())
        .collect();
    if !incomplete.is_empty() {
        let _ = writeln!(s, "incomplete: {}", incomplete.join(","));
    }
    s
}

/// Synthetic circuits for tests and benchmarks.
pub mod generate {
    use rand::seq::SliceRandom;
    use rand::Rng;

    use crate::netlist::{Circuit, CircuitBuilder, GateKind};

    /// Random combinational circuit. Gate fan-ins lean towards recent nets so
    /// cones grow deep; the last `outputs` gates are the outputs.
    pub fn random_circuit(rng: &mut impl Rng, inputs: usize, gates: usize, outputs: usize) -> Circuit {
        assert!(inputs > 0 && gates > 0 && (1..=gates).contains(&outputs));
        let mut b = CircuitBuilder::new("rand");
        let mut nets: Vec<String> = (0..inputs).map(|i| format!("i{i}")).collect();
        for n in &nets {
            b.input(n.as_str());
        }
        for g in 0..gates {
            let kind = *GateKind::ALL.choose(rng).expect("non-empty");
            let arity = if kind.is_unary() {
                1
            } else if rng.gen_bool(0.8) {
                2
            } else {
                3
            };
            let ins: Vec<String> = (0..arity)
                .map(|_| {
                    let window = nets.len().min(inputs + 4);
                    let idx = if rng.gen_bool(0.6) {
                        nets.len() - 1 - rng.gen_range(0..window)
                    } else {
                        rng.gen_range(0..nets.len())
                    };
                    nets[idx].clone()
                })
                .collect();
            let out = format!("g{g}");
            b.gate(out.as_str(), kind, ins.iter().map(String::as_str));
            nets.push(out);
        }
        for g in gates - outputs..gates {
            b.output(format!("g{g}"));
        }
        b.build().expect("generated circuits are valid")
    }

    /// `n`-by-`n` unsigned array multiplier, inputs `a*` then `b*`, outputs `p0..p(2n-1)`.
    pub fn array_multiplier(n: usize) -> Circuit {
        assert!(n >= 2, "multiplier width must be at least 2");
        let mut b = CircuitBuilder::new(format!("mult{n}"));
        for i in 0..n {
            b.input(format!("a{i}"));
        }
        for i in 0..n {
            b.input(format!("b{i}"));
        }
        for i in 0..2 * n {
            b.output(format!("p{i}"));
        }
        let pp = |b: &mut CircuitBuilder, i: usize, j: usize| {
            let name = format!("pp{i}_{j}");
            b.gate(name.as_str(), GateKind::And, [format!("a{i}"), format!("b{j}")]);
            name
        };
        // acc[i] is the running sum at bit position row + i; None is a constant 0.
        let mut acc: Vec<Option<String>> = (0..n).map(|i| Some(pp(&mut b, i, 0))).collect();
        b.gate("p0", GateKind::Buf, [acc[0].clone().expect("set")]);
        acc.remove(0);
        acc.push(None);
        for j in 1..n {
            let mut carry: Option<String> = None;
            let mut next = Vec::with_capacity(n + 1);
            for (i, slot) in acc.iter().enumerate() {
                let y = pp(&mut b, i, j);
                let tag = format!("r{j}_{i}");
                let (s, c) = add_bits(&mut b, &tag, slot.as_deref(), &y, carry.as_deref());
                next.push(s);
                carry = c;
            }
            b.gate(format!("p{j}"), GateKind::Buf, [next[0].as_str()]);
            acc = next.into_iter().skip(1).map(Some).collect();
            acc.push(carry);
        }
        for (i, bit) in acc.iter().enumerate() {
            let bit = bit.as_deref().expect("top carry exists for n >= 2");
            b.gate(format!("p{}", n + i), GateKind::Buf, [bit]);
        }
        b.build().expect("multiplier is valid")
    }

    /// Adds `x + y + c` where `x` and `c` may be constant zero.
    fn add_bits(
        b: &mut CircuitBuilder,
        tag: &str,
        x: Option<&str>,
        y: &str,
        c: Option<&str>,
    ) -> (String, Option<String>) {
        let mut ops: Vec<&str> = [x, Some(y), c].into_iter().flatten().collect();
        if ops.len() == 1 {
            return (ops.remove(0).to_string(), None);
        }
        let s1 = format!("{tag}_s1");
        let c1 = format!("{tag}_c1");
        b.gate(s1.as_str(), GateKind::Xor, [ops[0], ops[1]]);
        b.gate(c1.as_str(), GateKind::And, [ops[0], ops[1]]);
        if ops.len() == 2 {
            return (s1, Some(c1));
        }
        let s = format!("{tag}_s");
        let c2 = format!("{tag}_c2");
        let co = format!("{tag}_co");
        b.gate(s.as_str(), GateKind::Xor, [s1.as_str(), ops[2]]);
        b.gate(c2.as_str(), GateKind::And, [s1.as_str(), ops[2]]);
        b.gate(co.as_str(), GateKind::Or, [c1.as_str(), c2.as_str()]);
        (s, Some(co))
    }
}

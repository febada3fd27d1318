use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use locklab_core::attack::{sat_attack, verify_key, AttackError, AttackOptions, AttackTrace};
use locklab_core::bits;
use locklab_core::cnf::{build_miter, encode_circuit, parse_dimacs, to_dimacs, CnfFormula, Var};
use locklab_core::cone::{cone_to_circuit, extract_cones, insertion_order, largest_cone};
use locklab_core::harness::{self, SweepConfig};
use locklab_core::lock::{
    insert_key_gates, lock_antisat, lock_caslock, lock_sfll_hd, KeyBlocks, KeyVector,
    LockedCircuit, Scheme,
};
use locklab_core::netlist::{parse_bench_named, write_bench, Circuit, NetId};
use locklab_core::solver::{SolveResult, Solver};

#[derive(Parser)]
#[command(name = "locklab", version, about = "Logic locking and SAT attack toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Validate a .bench netlist and print a summary.
    Parse { file: PathBuf },
    /// Print per-output cone sizes.
    Cones {
        file: PathBuf,
        /// Only report the largest cone.
        #[arg(long)]
        largest: bool,
        /// Write the largest cone as a standalone netlist.
        #[arg(long, value_name = "OUT")]
        emit: Option<PathBuf>,
    },
    /// Lock a netlist.
    Lock {
        file: PathBuf,
        #[arg(long, value_enum)]
        scheme: LockScheme,
        /// Key width. Defaults to 2r for antisat/caslock and the input count for sfll.
        #[arg(long)]
        keys: Option<usize>,
        /// Block width for antisat/caslock.
        #[arg(long)]
        r: Option<usize>,
        /// Hamming distance for sfll (0 gives TTLock).
        #[arg(long, default_value_t = 0)]
        h: usize,
        /// 1-based OR positions in the caslock chain (default r/2).
        #[arg(long = "or", value_delimiter = ',')]
        or_positions: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        key_out: PathBuf,
    },
    /// Run the oracle-guided SAT attack.
    Attack {
        locked: PathBuf,
        #[arg(long)]
        oracle: PathBuf,
        /// Known key bits, e.g. `k3=1,k4=0`.
        #[arg(long)]
        fix: Option<String>,
        /// File with one DIP per line to replay before free solving.
        #[arg(long)]
        replay: Option<PathBuf>,
        /// Write the attack trace as JSON.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        max_iterations: Option<usize>,
        /// Wall-clock budget in seconds.
        #[arg(long)]
        budget: Option<f64>,
    },
    /// Write a CNF encoding in DIMACS format.
    ExportCnf {
        file: PathBuf,
        /// Encode the two-copy miter with the difference asserted. Key inputs are
        /// inferred from `--oracle` or the `keyinput` prefix.
        #[arg(long)]
        miter: bool,
        #[arg(long)]
        oracle: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve a DIMACS file.
    Sat { file: PathBuf },
    /// Attack a cone at every key size up to --max-keys.
    Sweep {
        cone: PathBuf,
        #[arg(long)]
        max_keys: usize,
        #[arg(long, value_enum, default_value_t = SweepScheme::Xor)]
        scheme: SweepScheme,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
        /// Run key sizes concurrently.
        #[arg(long)]
        parallel: bool,
        #[arg(long)]
        max_iterations: Option<usize>,
        /// Per-attack wall-clock budget in seconds.
        #[arg(long)]
        budget: Option<f64>,
    },
    /// Check a key against the oracle.
    Verify {
        locked: PathBuf,
        #[arg(long)]
        oracle: PathBuf,
        /// Bit string (index 0 first) or 0x-prefixed hex.
        #[arg(long)]
        key: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum LockScheme {
    Xor,
    Antisat,
    Caslock,
    Sfll,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepScheme {
    Xor,
}

/// Contents of the `--key-out` file.
#[derive(Serialize, Deserialize)]
struct KeyFile {
    #[serde(flatten)]
    scheme: Scheme,
    key: KeyVector,
    key_inputs: Vec<String>,
    blocks: KeyBlocks,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Cmd::Parse { file } => cmd_parse(&file),
        Cmd::Cones {
            file,
            largest,
            emit,
        } => cmd_cones(&file, largest, emit.as_deref()),
        Cmd::Lock {
            file,
            scheme,
            keys,
            r,
            h,
            or_positions,
            seed,
            out,
            key_out,
        } => {
            let c = read_bench(&file)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let lc = match scheme {
                LockScheme::Xor => {
                    let n = keys.context("--keys is required for xor")?;
                    let order = insertion_order(&largest_cone(&c));
                    insert_key_gates(&c, n, &order, &KeyVector::random(n, &mut rng))?
                }
                LockScheme::Antisat | LockScheme::Caslock => {
                    let r = block_width(keys, r)?;
                    let value = KeyVector::random(r, &mut rng);
                    if matches!(scheme, LockScheme::Antisat) {
                        lock_antisat(&c, r, &value, None)?
                    } else {
                        let ors = if or_positions.is_empty() && r >= 2 {
                            vec![r / 2]
                        } else {
                            or_positions
                        };
                        lock_caslock(&c, r, &ors, &value, None)?
                    }
                }
                LockScheme::Sfll => {
                    let n = c.inputs().len();
                    if let Some(k) = keys {
                        if k != n {
                            bail!("sfll needs one key bit per input ({n}), got --keys {k}");
                        }
                    }
                    lock_sfll_hd(&c, &KeyVector::random(n, &mut rng), h)?
                }
            };
            fs::write(&out, write_bench(lc.circuit()))
                .with_context(|| format!("writing {}", out.display()))?;
            let kf = KeyFile {
                scheme: lc.scheme().clone(),
                key: lc.correct_key().expect("locking records the key").clone(),
                key_inputs: lc.key_input_names().into_iter().map(str::to_string).collect(),
                blocks: lc.blocks().clone(),
            };
            fs::write(&key_out, serde_json::to_string_pretty(&kf)? + "\n")
                .with_context(|| format!("writing {}", key_out.display()))?;
            println!(
                "{}: {} key bits, {} data inputs, key {}",
                kf.scheme.tag(),
                lc.key_width(),
                lc.data_width(),
                kf.key
            );
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Attack {
            locked,
            oracle,
            fix,
            replay,
            trace,
            max_iterations,
            budget,
        } => {
            let oracle = read_bench(&oracle)?;
            let lc = LockedCircuit::from_oracle(read_bench(&locked)?, &oracle);
            let mut opts = AttackOptions {
                max_iterations,
                budget: budget.map(Duration::from_secs_f64),
                ..AttackOptions::default()
            };
            if let Some(spec) = fix {
                opts.key_constraints = parse_fix(&spec)?;
            }
            if let Some(path) = replay {
                opts.replay = read_replay(&path)?;
            }
            let result = sat_attack(&lc, &oracle, &opts);
            let t = match &result {
                Ok(t) => Some(t),
                Err(e) => e.trace(),
            };
            if let (Some(path), Some(t)) = (&trace, t) {
                fs::write(path, serde_json::to_string_pretty(t)? + "\n")
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            match result {
                Ok(t) => {
                    print_trace(&t);
                    Ok(ExitCode::SUCCESS)
                }
                Err(e @ (AttackError::Budget { .. } | AttackError::IterationCap { .. })) => {
                    eprintln!("attack stopped: {e}");
                    Ok(ExitCode::from(1))
                }
                Err(e) => Err(e.into()),
            }
        }
        Cmd::ExportCnf {
            file,
            miter,
            oracle,
            out,
        } => {
            let c = read_bench(&file)?;
            let text = if miter {
                let lc = match oracle {
                    Some(p) => LockedCircuit::from_oracle(c, &read_bench(&p)?),
                    None => LockedCircuit::from_key_prefix(c, "keyinput"),
                };
                miter_dimacs(&lc)
            } else {
                let mut f = CnfFormula::new();
                let map = encode_circuit(&mut f, &c, &HashMap::new());
                let comments: Vec<(Var, String)> = (0..c.num_nets())
                    .map(|i| (map.0[i], c.net_name(NetId(i)).to_string()))
                    .collect();
                to_dimacs(&f, &comments)
            };
            match out {
                Some(p) => fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Sat { file } => {
            let text = fs::read_to_string(&file)
                .with_context(|| format!("reading {}", file.display()))?;
            let f = parse_dimacs(&text)?;
            match Solver::from_formula(&f).solve(&[]) {
                SolveResult::Sat(m) => {
                    println!("s SATISFIABLE");
                    let lits: Vec<String> = (1..=f.num_vars())
                        .map(|v| {
                            if m.value(v).unwrap_or(false) {
                                v.to_string()
                            } else {
                                format!("-{v}")
                            }
                        })
                        .collect();
                    println!("v {} 0", lits.join(" "));
                }
                SolveResult::Unsat => println!("s UNSATISFIABLE"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Sweep {
            cone,
            max_keys,
            scheme: SweepScheme::Xor,
            seed,
            csv,
            json,
            parallel,
            max_iterations,
            budget,
        } => {
            let c = read_bench(&cone)?;
            let cfg = SweepConfig {
                seed,
                parallel,
                max_iterations,
                budget: budget.map(Duration::from_secs_f64),
            };
            let records = harness::sweep(&c, max_keys, &cfg)?;
            if let Some(p) = csv {
                fs::write(&p, harness::to_csv(&records))
                    .with_context(|| format!("writing {}", p.display()))?;
            }
            if let Some(p) = json {
                fs::write(&p, harness::to_json(&records)? + "\n")
                    .with_context(|| format!("writing {}", p.display()))?;
            }
            print!("{}", harness::summary(&records));
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Verify {
            locked,
            oracle,
            key,
        } => {
            let oracle = read_bench(&oracle)?;
            let lc = LockedCircuit::from_oracle(read_bench(&locked)?, &oracle);
            let k = KeyVector::new(bits::parse_bits_or_hex(&key, lc.key_width())?);
            if k.len() != lc.key_width() {
                bail!("key has {} bits, circuit has {} key inputs", k.len(), lc.key_width());
            }
            if verify_key(&lc, &k, &oracle) {
                println!("key {k} is correct");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("key {k} is incorrect");
                Ok(ExitCode::from(1))
            }
        }
    }
}

fn read_bench(path: &Path) -> Result<Circuit> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("circuit");
    parse_bench_named(&text, name).with_context(|| format!("parsing {}", path.display()))
}

fn cmd_parse(file: &Path) -> Result<ExitCode> {
    let c = read_bench(file)?;
    println!(
        "{}: {} inputs, {} outputs, {} gates",
        c.name(),
        c.inputs().len(),
        c.outputs().len(),
        c.gates().len()
    );
    let mut kinds: BTreeMap<&str, usize> = BTreeMap::new();
    for g in c.gates() {
        *kinds.entry(g.kind.name()).or_default() += 1;
    }
    for (k, n) in kinds {
        println!("  {k:<5} {n}");
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_cones(file: &Path, largest: bool, emit: Option<&Path>) -> Result<ExitCode> {
    let c = read_bench(file)?;
    if c.outputs().is_empty() {
        bail!("{} has no outputs", c.name());
    }
    let cones = if largest {
        vec![largest_cone(&c)]
    } else {
        extract_cones(&c)
    };
    println!("output\tnodes\tgates\tinputs");
    for cone in &cones {
        println!(
            "{}\t{}\t{}\t{}",
            c.net_name(cone.root),
            cone.node_count(),
            cone.gates.len(),
            cone.inputs.len()
        );
    }
    if let Some(out) = emit {
        let cc = cone_to_circuit(&largest_cone(&c), &c);
        fs::write(out, write_bench(&cc)).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}

/// r from `--r`, else half of `--keys`.
fn block_width(keys: Option<usize>, r: Option<usize>) -> Result<usize> {
    match (keys, r) {
        (Some(k), Some(r)) if k != 2 * r => bail!("--keys must be 2r ({}), got {k}", 2 * r),
        (_, Some(r)) => Ok(r),
        (Some(k), None) if k % 2 == 0 => Ok(k / 2),
        (Some(k), None) => bail!("--keys must be even for complementary blocks, got {k}"),
        (None, None) => bail!("either --keys or --r is required"),
    }
}

/// Parses `k3=1,k4=0` (the `k` is optional) into index → bit.
fn parse_fix(spec: &str) -> Result<BTreeMap<usize, bool>> {
    let mut out = BTreeMap::new();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (idx, bit) = item
            .split_once('=')
            .with_context(|| format!("bad --fix entry `{item}`"))?;
        let idx = idx.trim();
        let idx = idx.strip_prefix('k').unwrap_or(idx);
        let idx: usize = idx
            .parse()
            .with_context(|| format!("bad key index in `{item}`"))?;
        let bit = match bit.trim() {
            "0" => false,
            "1" => true,
            other => bail!("bad key bit `{other}` in `{item}`"),
        };
        out.insert(idx, bit);
    }
    Ok(out)
}

fn read_replay(path: &Path) -> Result<Vec<Vec<bool>>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| bits::parse_bits(l).with_context(|| format!("bad DIP `{l}`")))
        .collect()
}

fn miter_dimacs(lc: &LockedCircuit) -> String {
    let m = build_miter(lc);
    let mut comments = Vec::new();
    for (v, name) in m.data_vars.iter().zip(lc.data_input_names()) {
        comments.push((*v, name.to_string()));
    }
    for (copy, vars) in [("A", &m.key_a), ("B", &m.key_b)] {
        for (v, name) in vars.iter().zip(lc.key_input_names()) {
            comments.push((*v, format!("{name}@{copy}")));
        }
    }
    for (copy, vars) in [("A", &m.out_a), ("B", &m.out_b)] {
        for (v, name) in vars.iter().zip(lc.circuit().output_names()) {
            comments.push((*v, format!("{name}@{copy}")));
        }
    }
    comments.push((m.diff, "diff".to_string()));
    to_dimacs(&m.asserted(), &comments)
}

fn print_trace(t: &AttackTrace) {
    for it in &t.iterations {
        println!(
            "iter {:>3}  dip {}  out {}  {:.6}s{}",
            it.index,
            bits::format_bits(&it.dip),
            bits::format_bits(&it.response),
            it.solver_s,
            if it.replayed { "  (replayed)" } else { "" }
        );
    }
    println!(
        "|P| = {}, TI = {}, solver time {:.6}s, final UNSAT {:.6}s",
        t.io_pairs, t.total_iterations, t.total_s, t.unsat_s
    );
    if let Some(k) = &t.key {
        println!("key {k}");
    }
}

//! Acceptance suite: one line per criterion, non-zero exit on any failure.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use common::*;
use lamflow_core::cfa0::{accepts_0cfa, analyze_0cfa};
use lamflow_core::circuits::{
    compile, decide_instance, eval_circuit, parse_netlist, Circuit, InputVector,
};
use lamflow_core::eval::{closure_size, default_fuel, eval, linearly_closes, respects, Env};
use lamflow_core::sca::{accepts_sca, analyze_sca_naive, analyze_sca_unionfind};
use lamflow_core::sub0cfa::{analyze_sub0cfa, concretize};
use lamflow_core::syntax::is_linear;
use lamflow_core::{cache_leq, parse, Analysis, Cache, Program};
use rand::rngs::StdRng;
use rand::SeedableRng;

const SEED: u64 = 0x1a3f_0cfa;

const GOLDEN_LIMIT: Duration = Duration::from_secs(1);
const LINEAR_PROGRAMS: usize = 500;
const LINEAR_MAX_NODES: usize = 60;
const LINEAR_LIMIT: Duration = Duration::from_secs(30);
const NONLINEAR_PROGRAMS: usize = 200;
const NONLINEAR_MAX_NODES: usize = 40;
const BOUNDS: [usize; 3] = [1, 2, 4];
const CLOSURES: usize = 1000;
const CLOSURE_DEPTH: usize = 2;
const CIRCUITS: usize = 200;
const CIRCUIT_MAX_GATES: usize = 8;
const CIRCUIT_MAX_INPUTS: usize = 4;
const CIRCUIT_LIMIT: Duration = Duration::from_secs(60);
const LEAST_MAX_KEYS: usize = 8;
const SCALE_SMALL: usize = 1_000;
const SCALE_LARGE: usize = 10_000;
const SCALE_LIMIT: Duration = Duration::from_secs(5);
const SCALE_REPEATS: usize = 5;
/// A tenfold size increase must cost strictly less than a hundredfold time
/// increase.
const SCALE_MAX_RATIO: f64 = 100.0;

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || {
        format!("took {elapsed:.2?}, limit {limit:?}")
    })
}

/// `key -> {binder names}`.
fn shorthand(cache: &Cache) -> BTreeMap<String, BTreeSet<String>> {
    cache
        .iter()
        .map(|(k, s)| {
            let names = s.iter().map(|a| a.binder.as_str().to_owned()).collect();
            (k.to_string(), names)
        })
        .collect()
}

fn table(rows: &[(&str, &[&str])]) -> BTreeMap<String, BTreeSet<String>> {
    rows.iter()
        .map(|(k, v)| (k.to_string(), v.iter().map(|s| s.to_string()).collect()))
        .collect()
}

fn compare_table(
    name: &str,
    got: &Cache,
    want: &BTreeMap<String, BTreeSet<String>>,
) -> Result<(), String> {
    let got = shorthand(got);
    ensure(&got == want, || {
        format!("{name}: got {got:?}, want {want:?}")
    })
}

fn golden_0cfa() -> Verdict {
    let start = Instant::now();
    let p = Program::new(parse(EXAMPLE).unwrap());
    let want = table(&[
        ("1", &["x"]),
        ("2", &["x"]),
        ("3", &["x", "y"]),
        ("4", &["y"]),
        ("5", &["y"]),
        ("6", &["x", "y"]),
        ("7", &["f"]),
        ("8", &["x", "y"]),
        ("9", &["x"]),
        ("10", &["x", "y"]),
        ("f", &["x"]),
        ("x", &["x", "y"]),
        ("y", &["y"]),
    ]);
    compare_table("0cfa", &analyze_0cfa(&p), &want)?;
    within(start.elapsed(), GOLDEN_LIMIT)?;
    Ok("13 entries exact".into())
}

fn golden_sca() -> Verdict {
    let start = Instant::now();
    let p = Program::new(parse(EXAMPLE).unwrap());
    let both = ["x", "y"].as_slice();
    let mut rows: Vec<(String, &[&str])> = (1..=10)
        .filter(|&l| l != 7)
        .map(|l| (l.to_string(), both))
        .collect();
    rows.push(("7".into(), &["f"]));
    for v in ["f", "x", "y"] {
        rows.push((v.into(), both));
    }
    let rows: Vec<(&str, &[&str])> = rows.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    let want = table(&rows);
    compare_table("sca-naive", &analyze_sca_naive(&p), &want)?;
    compare_table("sca-uf", &analyze_sca_unionfind(&p), &want)?;
    within(start.elapsed(), GOLDEN_LIMIT)?;
    Ok("13 entries exact for both solvers".into())
}

fn linear_corpus() -> Vec<Program> {
    let mut rng = StdRng::seed_from_u64(SEED);
    (0..LINEAR_PROGRAMS)
        .map(|_| Program::new(random_linear_program(&mut rng, LINEAR_MAX_NODES)))
        .collect()
}

fn nonlinear_corpus() -> Vec<Program> {
    let mut rng = StdRng::seed_from_u64(SEED ^ 1);
    let mut out = Vec::new();
    while out.len() < NONLINEAR_PROGRAMS {
        let e = random_program(&mut rng, NONLINEAR_MAX_NODES);
        if !is_linear(&e) {
            out.push(Program::new(e));
        }
    }
    out
}

fn linear_coincidence() -> Verdict {
    let start = Instant::now();
    for (i, p) in linear_corpus().iter().enumerate() {
        let root = p.root();
        ensure(root.is_closed() && is_linear(root), || {
            format!("program {i} is not closed and linear")
        })?;
        let c = analyze_0cfa(p);
        for (name, other) in [
            ("sca-naive", analyze_sca_naive(p)),
            ("sca-uf", analyze_sca_unionfind(p)),
            ("sub0cfa(1)", concretize(&analyze_sub0cfa(p, 1), p)),
        ] {
            ensure(c == other, || {
                format!("program {i}: 0cfa differs from {name}")
            })?;
        }
        let v = eval(root, &Env::new(), default_fuel(root, &Env::new()))
            .map_err(|e| format!("program {i}: {e}"))?;
        let want = BTreeSet::from([v.term.abs_id().unwrap()]);
        ensure(c.at(root.label()) == &want, || {
            format!("program {i}: root flow is not the value")
        })?;
        ensure(respects(&c, &v), || {
            format!("program {i}: cache does not respect the value")
        })?;
        ensure(accepts_0cfa(&c, p), || {
            format!("program {i}: not 0cfa-acceptable")
        })?;
        ensure(accepts_sca(&c, p), || {
            format!("program {i}: not sca-acceptable")
        })?;
    }
    within(start.elapsed(), LINEAR_LIMIT)?;
    Ok(format!(
        "{LINEAR_PROGRAMS} programs in {:.2?}",
        start.elapsed()
    ))
}

fn approximation_ordering() -> Verdict {
    let corpus: Vec<Program> = linear_corpus()
        .into_iter()
        .chain(nonlinear_corpus())
        .collect();
    for (i, p) in corpus.iter().enumerate() {
        let c = analyze_0cfa(p);
        ensure(cache_leq(&c, &analyze_sca_naive(p)), || {
            format!("program {i}: 0cfa ⋢ sca-naive")
        })?;
        ensure(cache_leq(&c, &analyze_sca_unionfind(p)), || {
            format!("program {i}: 0cfa ⋢ sca-uf")
        })?;
        for b in BOUNDS {
            let s = concretize(&analyze_sub0cfa(p, b), p);
            ensure(cache_leq(&c, &s), || {
                format!("program {i}: 0cfa ⋢ sub0cfa({b})")
            })?;
        }
    }
    Ok(format!("{} programs, bounds {BOUNDS:?}", corpus.len()))
}

fn closure_shrinkage() -> Verdict {
    let mut rng = StdRng::seed_from_u64(SEED ^ 2);
    let mut evaluated = 0;
    for i in 0..CLOSURES {
        let c = random_linear_closure(&mut rng, CLOSURE_DEPTH);
        ensure(linearly_closes(&c), || format!("closure {i} is not linear"))?;
        if let Ok(v) = eval(&c.term, &c.env, default_fuel(&c.term, &c.env)) {
            evaluated += 1;
            let (before, after) = (closure_size(&c), closure_size(&v));
            ensure(after <= before, || {
                format!("closure {i}: size grew {before} -> {after}")
            })?;
        }
    }
    ensure(evaluated == CLOSURES, || {
        format!("only {evaluated}/{CLOSURES} evaluations succeeded")
    })?;
    Ok(format!("{evaluated} closures"))
}

const DECIDERS: [Analysis; 4] = [
    Analysis::Cfa0,
    Analysis::ScaNaive,
    Analysis::ScaUnionFind,
    Analysis::Sub0cfa(1),
];

fn check_circuit(
    name: &str,
    circuit: &Circuit,
    expected: impl Fn(&InputVector) -> bool,
) -> Result<usize, String> {
    let mut cases = 0;
    for inputs in InputVector::all(circuit.inputs().len()) {
        let value = eval_circuit(circuit, &inputs).map_err(|e| e.to_string())?;
        ensure(value == expected(&inputs), || {
            format!("{name} on {inputs}: evaluator disagrees with oracle")
        })?;
        let instance = compile(circuit, &inputs).map_err(|e| format!("{name} on {inputs}: {e}"))?;
        ensure(
            instance.term.is_closed() && is_linear(&instance.term),
            || format!("{name} on {inputs}: compiled term not closed and linear"),
        )?;
        for a in DECIDERS {
            let decided = decide_instance(&instance, a);
            ensure(decided == value, || {
                format!("{name} on {inputs}: {a} decided {decided}, value {value}")
            })?;
        }
        cases += 1;
    }
    Ok(cases)
}

fn circuit_reduction() -> Verdict {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(SEED ^ 3);
    let mut cases = 0;
    for i in 0..CIRCUITS {
        let c = random_circuit(&mut rng, CIRCUIT_MAX_GATES, CIRCUIT_MAX_INPUTS);
        cases += check_circuit(&format!("circuit {i}"), &c, |x| truth_value(&c, x))?;
    }
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/bool2");
    for idx in 0..16u32 {
        let path = dir.join(format!("{idx:02}.net"));
        let text =
            std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        let c = parse_netlist(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        let truth = |x: &InputVector| (idx >> (2 * x.0[0] as u32 + x.0[1] as u32)) & 1 == 1;
        cases += check_circuit(&format!("bool2/{idx:02}"), &c, truth)?;
    }
    within(start.elapsed(), CIRCUIT_LIMIT)?;
    Ok(format!(
        "{cases} instances × {} analyses in {:.2?}",
        DECIDERS.len(),
        start.elapsed()
    ))
}

fn leastness() -> Verdict {
    let programs = exhaustive_programs(LEAST_MAX_KEYS);
    for e in &programs {
        let p = Program::new(e.clone());
        let oracle = BruteForce::new(e.clone());
        let name = lamflow_core::syntax::pretty(e, true);
        let least = oracle
            .least(Constraint::Containment)
            .ok_or_else(|| format!("{name}: no least 0cfa-acceptable cache"))?;
        ensure(analyze_0cfa(&p) == least, || {
            format!("{name}: 0cfa is not least")
        })?;
        let least = oracle
            .least(Constraint::Equality)
            .ok_or_else(|| format!("{name}: no least sca-acceptable cache"))?;
        ensure(analyze_sca_naive(&p) == least, || {
            format!("{name}: sca-naive is not least")
        })?;
        ensure(analyze_sca_unionfind(&p) == least, || {
            format!("{name}: sca-uf is not least")
        })?;
    }
    Ok(format!(
        "{} programs with at most {LEAST_MAX_KEYS} labels",
        programs.len()
    ))
}

fn median_time(p: &Program) -> Duration {
    let mut times: Vec<Duration> = (0..SCALE_REPEATS)
        .map(|_| {
            let start = Instant::now();
            std::hint::black_box(analyze_sca_unionfind(p));
            start.elapsed()
        })
        .collect();
    times.sort();
    times[SCALE_REPEATS / 2]
}

fn scalability() -> Verdict {
    let small = Program::new(identity_chain(SCALE_SMALL));
    let large = Program::new(identity_chain(SCALE_LARGE));
    ensure(large.root().size() >= SCALE_LARGE, || {
        "chain too small".into()
    })?;
    let start = Instant::now();
    let result = analyze_sca_unionfind(&large);
    within(start.elapsed(), SCALE_LIMIT)?;
    ensure(result == analyze_0cfa(&large), || {
        "sca-uf differs from 0cfa on the chain".into()
    })?;
    let (t_small, t_large) = (median_time(&small), median_time(&large));
    let ratio = t_large.as_secs_f64() / t_small.as_secs_f64().max(1e-9);
    ensure(ratio < SCALE_MAX_RATIO, || {
        format!("time ratio {ratio:.1} ≥ {SCALE_MAX_RATIO}")
    })?;
    Ok(format!(
        "{} nodes in {t_large:.2?}, {} nodes in {t_small:.2?}, ratio {ratio:.1}",
        large.root().size(),
        small.root().size()
    ))
}

fn run_all() -> bool {
    let criteria: [Criterion; 8] = [
        ("1 golden 0cfa table", golden_0cfa),
        ("2 golden sca table", golden_sca),
        ("3 analyses coincide on linear programs", linear_coincidence),
        ("4 approximation ordering", approximation_ordering),
        ("5 linear closures shrink", closure_shrinkage),
        ("6 circuit value by flow analysis", circuit_reduction),
        ("7 leastness by enumeration", leastness),
        ("8 union-find scalability", scalability),
    ];
    let mut all = true;
    for (name, criterion) in criteria {
        let start = Instant::now();
        let verdict = panic::catch_unwind(AssertUnwindSafe(criterion))
            .unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        match verdict {
            Ok(detail) => println!("[PASS] {name}: {detail} ({elapsed:.2?})"),
            Err(detail) => {
                all = false;
                println!("[FAIL] {name}: {detail} ({elapsed:.2?})");
            }
        }
    }
    all
}

fn main() {
    if !with_big_stack(run_all) {
        std::process::exit(1);
    }
}

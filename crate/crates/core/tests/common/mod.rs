//! Generators and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use lamflow_core::circuits::{Circuit, Gate, InputVector};
use lamflow_core::eval::{Closure, Env};
use lamflow_core::syntax::{RawExpr, RawNode};
use lamflow_core::{AbsId, Cache, Expr, FlowKey, Program, Term};
use rand::seq::SliceRandom;
use rand::Rng;

pub const EXAMPLE: &str = r"((\f.((f^1 f^2)^3 (\y.y^4)^5)^6)^7 (\x.x^8)^9)^10";

/// Run `f` on a thread with a large stack; deep terms recurse deeply.
pub fn with_big_stack<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> T {
    std::thread::Builder::new()
        .stack_size(1 << 28)
        .spawn(f)
        .expect("spawn")
        .join()
        .expect("worker panicked")
}

#[derive(Default)]
pub struct Names(usize);

impl Names {
    pub fn fresh(&mut self, base: &str) -> String {
        self.0 += 1;
        format!("{base}{}", self.0)
    }
}

fn min_linear(k: usize) -> usize {
    if k == 0 {
        2
    } else {
        2 * k - 1
    }
}

/// A linear term of at most `budget` nodes using each of `avail` exactly
/// once as a free variable. Requires `budget >= min_linear(avail.len())`.
pub fn gen_linear<R: Rng>(
    rng: &mut R,
    budget: usize,
    mut avail: Vec<String>,
    names: &mut Names,
) -> RawExpr {
    let k = avail.len();
    assert!(budget >= min_linear(k));
    let can_var = k == 1;
    let can_lam = budget > min_linear(k + 1);
    let splits: Vec<usize> = (0..=k)
        .filter(|&a| 1 + min_linear(a) + min_linear(k - a) <= budget)
        .collect();
    let can_app = !splits.is_empty();
    let mut options = Vec::new();
    if can_var {
        options.extend([0; 2]);
    }
    if can_lam {
        options.extend([1; 2]);
    }
    if can_app {
        options.extend([2; 3]);
    }
    match *options.choose(rng).expect("some production fits") {
        0 => RawExpr::var(avail.pop().unwrap()),
        1 => {
            let x = names.fresh("v");
            avail.push(x.clone());
            RawExpr::lam(x.clone(), gen_linear(rng, budget - 1, avail, names))
        }
        _ => {
            avail.shuffle(rng);
            let a = *splits.choose(rng).unwrap();
            let right = avail.split_off(a);
            let lo = min_linear(a);
            let hi = budget - 1 - min_linear(k - a);
            let lb = rng.gen_range(lo..=hi);
            let l = gen_linear(rng, lb, avail, names);
            let r = gen_linear(rng, budget - 1 - lb, right, names);
            RawExpr::app(l, r)
        }
    }
}

/// A closed linear program of at most `max_nodes` nodes whose root is an
/// application whenever the budget allows one.
pub fn random_linear_program<R: Rng>(rng: &mut R, max_nodes: usize) -> Arc<Expr> {
    let mut names = Names::default();
    let budget = rng.gen_range(2..=max_nodes);
    let raw = if budget >= 5 && rng.gen_bool(0.85) {
        let lb = rng.gen_range(2..=budget - 3);
        let l = gen_linear(rng, lb, vec![], &mut names);
        let r = gen_linear(rng, budget - 1 - lb, vec![], &mut names);
        RawExpr::app(l, r)
    } else {
        gen_linear(rng, budget, vec![], &mut names)
    };
    raw.into_expr().expect("generated program is well formed")
}

fn gen_any<R: Rng>(
    rng: &mut R,
    budget: usize,
    scope: &mut Vec<String>,
    names: &mut Names,
) -> RawExpr {
    let min_child = if scope.is_empty() { 2 } else { 1 };
    let can_var = !scope.is_empty();
    let can_app = budget > 2 * min_child;
    let can_lam = budget >= 2;
    let pick = if can_var && (budget == 1 || rng.gen_bool(0.3)) {
        0
    } else if can_app && rng.gen_bool(0.55) {
        2
    } else if can_lam {
        1
    } else {
        0
    };
    match pick {
        0 => RawExpr::var(scope.choose(rng).unwrap().clone()),
        1 => {
            let x = names.fresh("n");
            scope.push(x.clone());
            let body = gen_any(rng, budget - 1, scope, names);
            scope.pop();
            RawExpr::lam(x, body)
        }
        _ => {
            let lb = rng.gen_range(min_child..=budget - 1 - min_child);
            let l = gen_any(rng, lb, scope, names);
            let r = gen_any(rng, budget - 1 - lb, scope, names);
            RawExpr::app(l, r)
        }
    }
}

/// A closed program, not necessarily linear, of at most `max_nodes` nodes.
pub fn random_program<R: Rng>(rng: &mut R, max_nodes: usize) -> Arc<Expr> {
    let mut names = Names::default();
    let budget = rng.gen_range(5..=max_nodes.max(5));
    gen_any(rng, budget, &mut Vec::new(), &mut names)
        .into_expr()
        .expect("generated program is well formed")
}

/// A closure `⟨λy.body, ρ⟩` where `ρ` linearly closes the abstraction.
fn random_value<R: Rng>(rng: &mut R, depth: usize, names: &mut Names) -> Closure {
    let y = names.fresh("y");
    let (free, env) = random_env(rng, depth, names);
    let mut avail = free;
    avail.push(y.clone());
    let budget = rng.gen_range(min_linear(avail.len())..=min_linear(avail.len()) + 10);
    let body = gen_linear(rng, budget, avail, names);
    Closure::new(RawExpr::lam(y, body).into_expr().unwrap(), env)
}

fn random_env<R: Rng>(rng: &mut R, depth: usize, names: &mut Names) -> (Vec<String>, Env) {
    let k = if depth == 0 { 0 } else { rng.gen_range(0..=2) };
    let mut env = Env::new();
    let mut free = Vec::new();
    for _ in 0..k {
        let x = names.fresh("e");
        let c = random_value(rng, depth - 1, names);
        env = env.bind(x.as_str().into(), c);
        free.push(x);
    }
    (free, env)
}

/// A linear closure `⟨t, ρ⟩` with `t` of up to about 30 nodes and an
/// environment nested up to `depth` levels.
pub fn random_linear_closure<R: Rng>(rng: &mut R, depth: usize) -> Closure {
    let mut names = Names::default();
    let (free, env) = random_env(rng, depth, &mut names);
    let lo = min_linear(free.len());
    let budget = rng.gen_range(lo..=lo + 30);
    let t = gen_linear(rng, budget, free, &mut names);
    Closure::new(t.into_expr().unwrap(), env)
}

/// `((((I I) I) I) …)` with fresh identities, `n_nodes` nodes or one more.
pub fn identity_chain(n_nodes: usize) -> Arc<Expr> {
    let mut names = Names::default();
    let id = |names: &mut Names| {
        let x = names.fresh("i");
        RawExpr::lam(x.clone(), RawExpr::var(x))
    };
    let mut term = id(&mut names);
    let mut size = 2;
    while size < n_nodes {
        term = RawExpr::app(term, id(&mut names));
        size += 3;
    }
    term.into_expr().unwrap()
}

/// Every closed term whose `lab(·)` has at most `max_keys` elements, up to
/// binder renaming.
pub fn exhaustive_programs(max_keys: usize) -> Vec<Arc<Expr>> {
    fn terms(n: usize, depth: usize) -> Vec<(RawExpr, usize)> {
        let mut out = Vec::new();
        if n == 0 {
            return out;
        }
        if n == 1 {
            for i in 0..depth {
                out.push((RawExpr::var(format!("x{i}")), 0));
            }
            return out;
        }
        for (body, lams) in terms(n - 1, depth + 1) {
            out.push((RawExpr::lam(format!("x{depth}"), body), lams + 1));
        }
        for i in 1..n - 1 {
            let left = terms(i, depth);
            let right = terms(n - 1 - i, depth);
            for (l, ll) in &left {
                for (r, rl) in &right {
                    out.push((RawExpr::app(l.clone(), r.clone()), ll + rl));
                }
            }
        }
        out
    }
    let mut out = Vec::new();
    for n in 1..=max_keys {
        for (t, lams) in terms(n, 0) {
            if n + lams <= max_keys {
                out.push(t.alpha_rename().into_expr().unwrap());
            }
        }
    }
    out
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    Containment,
    Equality,
}

/// Brute-force leastness oracle: enumerate every cache over `lab(p)` and
/// the abstractions of `p` as a bitmask, keep the acceptable ones, and
/// return their intersection provided it is itself acceptable (i.e. a
/// least acceptable cache exists).
pub struct BruteForce {
    keys: Vec<FlowKey>,
    abs: Vec<AbsId>,
    root: Arc<Expr>,
    key_index: HashMap<FlowKey, usize>,
    abs_index: HashMap<AbsId, usize>,
    body_of: HashMap<usize, (usize, Arc<Expr>)>,
}

impl BruteForce {
    pub fn new(root: Arc<Expr>) -> Self {
        let mut keys = BTreeSet::new();
        let mut abs = Vec::new();
        let mut stack = vec![root.clone()];
        let mut lambdas = Vec::new();
        while let Some(e) = stack.pop() {
            keys.insert(FlowKey::Label(e.label()));
            match e.term() {
                Term::Var(x) => {
                    keys.insert(FlowKey::Var(x.clone()));
                }
                Term::Lam(x, b) => {
                    keys.insert(FlowKey::Var(x.clone()));
                    let id = AbsId {
                        label: e.label(),
                        binder: x.clone(),
                    };
                    abs.push(id.clone());
                    lambdas.push((id, x.clone(), b.clone()));
                    stack.push(b.clone());
                }
                Term::App(f, a) => {
                    stack.push(f.clone());
                    stack.push(a.clone());
                }
            }
        }
        let keys: Vec<FlowKey> = keys.into_iter().collect();
        let key_index: HashMap<FlowKey, usize> = keys
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, k)| (k, i))
            .collect();
        let abs_index: HashMap<AbsId, usize> = abs
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, a)| (a, i))
            .collect();
        let body_of = lambdas
            .into_iter()
            .map(|(id, x, b)| (abs_index[&id], (key_index[&FlowKey::Var(x)], b)))
            .collect();
        BruteForce {
            keys,
            abs,
            root,
            key_index,
            abs_index,
            body_of,
        }
    }

    pub fn bits(&self) -> usize {
        self.keys.len() * self.abs.len()
    }

    fn set(&self, mask: u64, key: usize) -> u64 {
        let a = self.abs.len();
        (mask >> (key * a)) & ((1u64 << a) - 1)
    }

    fn label(&self, e: &Expr) -> usize {
        self.key_index[&FlowKey::Label(e.label())]
    }

    pub fn acceptable(&self, mask: u64, mode: Constraint) -> bool {
        let ok = |from: u64, to: u64| match mode {
            Constraint::Containment => from & !to == 0,
            Constraint::Equality => from == to,
        };
        let mut seen = BTreeSet::new();
        let mut stack = vec![self.root.clone()];
        while let Some(e) = stack.pop() {
            if !seen.insert(e.label()) {
                continue;
            }
            let here = self.set(mask, self.label(&e));
            match e.term() {
                Term::Var(x) => {
                    if !ok(
                        self.set(mask, self.key_index[&FlowKey::Var(x.clone())]),
                        here,
                    ) {
                        return false;
                    }
                }
                Term::Lam(..) => {
                    let me = self.abs_index[&e.abs_id().unwrap()];
                    if here >> me & 1 == 0 {
                        return false;
                    }
                }
                Term::App(f, a) => {
                    stack.push(f.clone());
                    stack.push(a.clone());
                    let ops = self.set(mask, self.label(f));
                    for j in 0..self.abs.len() {
                        if ops >> j & 1 == 1 {
                            let (x, body) = &self.body_of[&j];
                            if !ok(self.set(mask, self.label(a)), self.set(mask, *x))
                                || !ok(self.set(mask, self.label(body)), here)
                            {
                                return false;
                            }
                            stack.push(body.clone());
                        }
                    }
                }
            }
        }
        true
    }

    /// The least acceptable cache, or `None` if the acceptable caches have
    /// no least element.
    pub fn least(&self, mode: Constraint) -> Option<Cache> {
        let bits = self.bits();
        assert!(bits <= 26, "enumeration too large: {bits} bits");
        let mut meet = u64::MAX;
        let mut any = false;
        for mask in 0..(1u64 << bits) {
            if self.acceptable(mask, mode) {
                meet &= mask;
                any = true;
            }
        }
        if !any || !self.acceptable(meet, mode) {
            return None;
        }
        let mut cache = Cache::new();
        for (i, k) in self.keys.iter().enumerate() {
            let s = self.set(meet, i);
            let values = (0..self.abs.len())
                .filter(|j| s >> j & 1 == 1)
                .map(|j| self.abs[j].clone())
                .collect();
            cache.set(k.clone(), values);
        }
        Some(cache)
    }
}

/// A random circuit over NOT/AND/COPY with `1..=max_inputs` inputs and at
/// most `max_gates` gates, wired linearly.
pub fn random_circuit<R: Rng>(rng: &mut R, max_gates: usize, max_inputs: usize) -> Circuit {
    loop {
        let n = rng.gen_range(1..=max_inputs);
        let inputs: Vec<String> = (0..n).map(|i| format!("i{i}")).collect();
        let mut pool = inputs.clone();
        let mut gates = Vec::new();
        let mut next = 0;
        let mut wire = || {
            next += 1;
            format!("w{next}")
        };
        let target = rng.gen_range(0..=max_gates);
        while gates.len() < target {
            pool.shuffle(rng);
            let kind = rng.gen_range(0..3);
            let g = match kind {
                0 => Gate::Not {
                    input: pool.pop().unwrap(),
                    output: wire(),
                },
                1 if pool.len() >= 2 => Gate::And {
                    left: pool.pop().unwrap(),
                    right: pool.pop().unwrap(),
                    output: wire(),
                },
                _ => Gate::Copy {
                    input: pool.pop().unwrap(),
                    outputs: (wire(), wire()),
                },
            };
            pool.extend(g.outputs().into_iter().cloned());
            gates.push(g);
        }
        while pool.len() > 1 {
            pool.shuffle(rng);
            let g = Gate::And {
                left: pool.pop().unwrap(),
                right: pool.pop().unwrap(),
                output: wire(),
            };
            pool.extend(g.outputs().into_iter().cloned());
            gates.push(g);
        }
        if gates.len() > max_gates {
            continue;
        }
        gates.shuffle(rng);
        let output = pool.pop().unwrap();
        return Circuit::new(inputs, gates, output).expect("generator wires linearly");
    }
}

/// Truth-table oracle: evaluate the wire feeding the output by recursion
/// over producers, independently of the library's topological order.
pub fn truth_value(circuit: &Circuit, inputs: &InputVector) -> bool {
    fn value(w: &str, circuit: &Circuit, inputs: &InputVector) -> bool {
        if let Some(i) = circuit.inputs().iter().position(|x| x == w) {
            return inputs.0[i];
        }
        for g in circuit.gates() {
            match g {
                Gate::Not { input, output } if output == w => {
                    return !value(input, circuit, inputs)
                }
                Gate::And {
                    left,
                    right,
                    output,
                } if output == w => {
                    return value(left, circuit, inputs) && value(right, circuit, inputs)
                }
                Gate::Copy { input, outputs } if outputs.0 == w || outputs.1 == w => {
                    return value(input, circuit, inputs)
                }
                _ => {}
            }
        }
        panic!("wire {w} has no producer")
    }
    value(circuit.output(), circuit, inputs)
}

pub fn program(e: &Arc<Expr>) -> Program {
    Program::new(e.clone())
}

/// Structural copy of a term with every label shifted by `offset`.
pub fn relabel(e: &Expr, offset: u32) -> Arc<Expr> {
    fn go(r: RawExpr, offset: u32) -> RawExpr {
        let node = match r.node {
            RawNode::Var(x) => RawNode::Var(x),
            RawNode::Lam(x, b) => RawNode::Lam(x, Box::new(go(*b, offset))),
            RawNode::App(f, a) => RawNode::App(Box::new(go(*f, offset)), Box::new(go(*a, offset))),
        };
        RawExpr {
            label: r.label.map(|l| l + offset),
            node,
        }
    }
    go(RawExpr::from(e), offset).into_expr().unwrap()
}

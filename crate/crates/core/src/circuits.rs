//! Boolean circuits over NOT/AND/COPY with linear wiring, their direct
//! evaluation, and their compilation into closed linear λ-terms whose flow
//! analysis decides the circuit's value.
//!
//! Booleans are pairs of pair-transformers: `True = ⟨TT, FF⟩` and
//! `False = ⟨FF, TT⟩`, where `TT` is the identity on pairs and `FF` the
//! swap. Pairs and pattern lets desugar into the core calculus as
//!
//! ```text
//! ⟨a, b⟩               ≡ λz.((z a) b)
//! let ⟨x, y⟩ = p in b  ≡ (p λx.λy.b)
//! let x = e in b       ≡ ((λx.b) e)
//! f ∘ g                ≡ λw.(f (g w))
//! ```

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::cache::{flow_query, Program};
use crate::eval::{eval, Env, EvalError};
use crate::syntax::{is_linear, AbsId, Expr, Label, RawExpr, Term};
use crate::Analysis;

pub type Wire = String;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Gate {
    Not {
        input: Wire,
        output: Wire,
    },
    And {
        left: Wire,
        right: Wire,
        output: Wire,
    },
    Copy {
        input: Wire,
        outputs: (Wire, Wire),
    },
}

impl Gate {
    pub fn inputs(&self) -> Vec<&Wire> {
        match self {
            Gate::Not { input, .. } | Gate::Copy { input, .. } => vec![input],
            Gate::And { left, right, .. } => vec![left, right],
        }
    }

    pub fn outputs(&self) -> Vec<&Wire> {
        match self {
            Gate::Not { output, .. } | Gate::And { output, .. } => vec![output],
            Gate::Copy { outputs, .. } => vec![&outputs.0, &outputs.1],
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gate::Not { input, output } => write!(f, "not {output} = {input}"),
            Gate::And {
                left,
                right,
                output,
            } => write!(f, "and {output} = {left} {right}"),
            Gate::Copy { input, outputs } => {
                write!(f, "copy {} {} = {input}", outputs.0, outputs.1)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetlistError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("wire `{0}` is produced more than once")]
    DuplicateWire(Wire),
    #[error("wire `{0}` is used but never produced")]
    UnknownWire(Wire),
    #[error("wire `{0}` is consumed more than once (fan-out needs an explicit copy)")]
    WireConsumedTwice(Wire),
    #[error("wire `{0}` is never consumed")]
    UnconsumedWire(Wire),
    #[error("the circuit contains a cycle through wire `{0}`")]
    Cycle(Wire),
    #[error("the netlist declares no output")]
    MissingOutput,
    #[error("the netlist declares more than one output")]
    MultipleOutputs,
    #[error("expected {expected} input bits, got {got}")]
    InputLength { expected: usize, got: usize },
    #[error("invalid input bit `{0}` (expected 0 or 1)")]
    InvalidBit(char),
}

/// A validated circuit. Gates are stored in topological order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Circuit {
    inputs: Vec<Wire>,
    gates: Vec<Gate>,
    output: Wire,
}

impl Circuit {
    /// Validate linear wiring (every wire produced once and consumed once)
    /// and acyclicity; gates may be given in any order.
    pub fn new(inputs: Vec<Wire>, gates: Vec<Gate>, output: Wire) -> Result<Self, NetlistError> {
        let mut producer: HashMap<&Wire, Option<usize>> = HashMap::new();
        for w in &inputs {
            if producer.insert(w, None).is_some() {
                return Err(NetlistError::DuplicateWire(w.clone()));
            }
        }
        for (i, g) in gates.iter().enumerate() {
            for w in g.outputs() {
                if producer.insert(w, Some(i)).is_some() {
                    return Err(NetlistError::DuplicateWire(w.clone()));
                }
            }
        }
        let mut consumed: HashSet<&Wire> = HashSet::new();
        let consumers = gates
            .iter()
            .flat_map(|g| g.inputs())
            .chain(std::iter::once(&output));
        for w in consumers {
            if !producer.contains_key(w) {
                return Err(NetlistError::UnknownWire(w.clone()));
            }
            if !consumed.insert(w) {
                return Err(NetlistError::WireConsumedTwice(w.clone()));
            }
        }
        let produced = inputs.iter().chain(gates.iter().flat_map(|g| g.outputs()));
        for w in produced {
            if !consumed.contains(w) {
                return Err(NetlistError::UnconsumedWire(w.clone()));
            }
        }

        // Kahn's algorithm over gate dependencies.
        let mut pending: Vec<usize> = gates
            .iter()
            .map(|g| g.inputs().iter().filter(|w| producer[*w].is_some()).count())
            .collect();
        let mut users: HashMap<usize, Vec<usize>> = HashMap::new();
        for (i, g) in gates.iter().enumerate() {
            for w in g.inputs() {
                if let Some(p) = producer[w] {
                    users.entry(p).or_default().push(i);
                }
            }
        }
        let mut ready: Vec<usize> = (0..gates.len())
            .rev()
            .filter(|&i| pending[i] == 0)
            .collect();
        let mut order = Vec::with_capacity(gates.len());
        while let Some(i) = ready.pop() {
            order.push(i);
            for &u in users.get(&i).into_iter().flatten().rev() {
                pending[u] -= 1;
                if pending[u] == 0 {
                    ready.push(u);
                }
            }
        }
        if order.len() < gates.len() {
            let stuck = (0..gates.len())
                .find(|i| pending[*i] > 0)
                .expect("stuck gate");
            return Err(NetlistError::Cycle(gates[stuck].outputs()[0].clone()));
        }
        let mut slots: Vec<Option<Gate>> = gates.into_iter().map(Some).collect();
        let gates = order
            .into_iter()
            .map(|i| slots[i].take().expect("gate"))
            .collect();
        Ok(Circuit {
            inputs,
            gates,
            output,
        })
    }

    pub fn inputs(&self) -> &[Wire] {
        &self.inputs
    }

    /// Gates in topological order.
    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn output(&self) -> &Wire {
        &self.output
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for w in &self.inputs {
            writeln!(f, "input {w}")?;
        }
        for g in &self.gates {
            writeln!(f, "{g}")?;
        }
        writeln!(f, "output {}", self.output)
    }
}

/// Truth values for the circuit inputs, in declaration order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InputVector(pub Vec<bool>);

impl InputVector {
    /// Parse a bitstring such as `101`.
    pub fn parse(bits: &str) -> Result<Self, NetlistError> {
        bits.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(NetlistError::InvalidBit(other)),
            })
            .collect::<Result<_, _>>()
            .map(InputVector)
    }

    /// All `2^n` vectors of length `n`, first input as the most
    /// significant bit.
    pub fn all(n: usize) -> impl Iterator<Item = InputVector> {
        (0u64..1 << n)
            .map(move |m| InputVector((0..n).map(|i| m >> (n - 1 - i) & 1 == 1).collect()))
    }
}

impl fmt::Display for InputVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

fn is_wire_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Parse the line-oriented netlist format:
///
/// ```text
/// input a
/// not b = a
/// and c = x y
/// copy x y = b
/// output c     # comment
/// ```
pub fn parse_netlist(text: &str) -> Result<Circuit, NetlistError> {
    let mut inputs = Vec::new();
    let mut gates = Vec::new();
    let mut output = None;
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("");
        let words: Vec<&str> = content.split_whitespace().collect();
        if words.is_empty() {
            continue;
        }
        let err = |message: String| NetlistError::Syntax { line, message };
        for w in &words[1..] {
            if *w != "=" && !is_wire_name(w) {
                return Err(err(format!("invalid wire name `{w}`")));
            }
        }
        let wire = |s: &str| s.to_owned();
        match words.as_slice() {
            ["input", w] => inputs.push(wire(w)),
            ["output", w] => {
                if output.replace(wire(w)).is_some() {
                    return Err(NetlistError::MultipleOutputs);
                }
            }
            ["not", out, "=", a] => gates.push(Gate::Not {
                input: wire(a),
                output: wire(out),
            }),
            ["and", out, "=", a, b] => gates.push(Gate::And {
                left: wire(a),
                right: wire(b),
                output: wire(out),
            }),
            ["copy", o1, o2, "=", a] => gates.push(Gate::Copy {
                input: wire(a),
                outputs: (wire(o1), wire(o2)),
            }),
            [kw, ..] if ["input", "output", "not", "and", "copy"].contains(kw) => {
                return Err(err(format!("malformed `{kw}` statement")))
            }
            [kw, ..] => return Err(err(format!("unknown statement `{kw}`"))),
            [] => unreachable!(),
        }
    }
    let output = output.ok_or(NetlistError::MissingOutput)?;
    Circuit::new(inputs, gates, output)
}

/// Evaluate the circuit directly.
pub fn eval_circuit(circuit: &Circuit, inputs: &InputVector) -> Result<bool, NetlistError> {
    check_length(circuit, inputs)?;
    let mut value: HashMap<&Wire, bool> = circuit
        .inputs
        .iter()
        .zip(inputs.0.iter().copied())
        .collect();
    for g in &circuit.gates {
        match g {
            Gate::Not { input, output } => {
                let v = !value[input];
                value.insert(output, v);
            }
            Gate::And {
                left,
                right,
                output,
            } => {
                let v = value[left] && value[right];
                value.insert(output, v);
            }
            Gate::Copy { input, outputs } => {
                let v = value[input];
                value.insert(&outputs.0, v);
                value.insert(&outputs.1, v);
            }
        }
    }
    Ok(value[&circuit.output])
}

fn check_length(circuit: &Circuit, inputs: &InputVector) -> Result<(), NetlistError> {
    if circuit.inputs.len() != inputs.0.len() {
        return Err(NetlistError::InputLength {
            expected: circuit.inputs.len(),
            got: inputs.0.len(),
        });
    }
    Ok(())
}

/// Builds desugared encodings with globally fresh binder names, so each
/// use of a connective is its own linear copy.
#[derive(Default)]
pub struct TermBuilder {
    next: usize,
}

const TRUE_MARKER: &str = "mark_t";
const FALSE_MARKER: &str = "mark_f";
const PROBE_VAR: &str = "probe_r";

fn v(name: &str) -> RawExpr {
    RawExpr::var(name)
}

fn lam(x: &str, body: RawExpr) -> RawExpr {
    RawExpr::lam(x, body)
}

fn app(f: RawExpr, a: RawExpr) -> RawExpr {
    RawExpr::app(f, a)
}

impl TermBuilder {
    pub fn new() -> Self {
        TermBuilder::default()
    }

    fn fresh(&mut self, base: &str) -> String {
        self.next += 1;
        format!("{base}_{}", self.next)
    }

    /// `⟨a, b⟩ ≡ λz.((z a) b)`
    pub fn pair(&mut self, a: RawExpr, b: RawExpr) -> RawExpr {
        let z = self.fresh("z");
        lam(&z, app(app(v(&z), a), b))
    }

    /// `let ⟨x, y⟩ = p in body ≡ (p λx.λy.body)`
    pub fn let_pair(&mut self, p: RawExpr, x: &str, y: &str, body: RawExpr) -> RawExpr {
        app(p, lam(x, lam(y, body)))
    }

    /// `let x = e in body ≡ ((λx.body) e)`
    pub fn let_in(&mut self, x: &str, e: RawExpr, body: RawExpr) -> RawExpr {
        app(lam(x, body), e)
    }

    /// `f ∘ g ≡ λw.(f (g w))`
    pub fn compose(&mut self, f: RawExpr, g: RawExpr) -> RawExpr {
        let w = self.fresh("w");
        lam(&w, app(f, app(g, v(&w))))
    }

    fn pair_map(&mut self, swap: bool) -> RawExpr {
        let p = self.fresh("p");
        let x = self.fresh("x");
        let y = self.fresh("y");
        let out = if swap {
            self.pair(v(&y), v(&x))
        } else {
            self.pair(v(&x), v(&y))
        };
        let body = self.let_pair(v(&p), &x, &y, out);
        lam(&p, body)
    }

    /// `TT ≡ λp.let ⟨x, y⟩ = p in ⟨x, y⟩`
    pub fn tt(&mut self) -> RawExpr {
        self.pair_map(false)
    }

    /// `FF ≡ λp.let ⟨x, y⟩ = p in ⟨y, x⟩`
    pub fn ff(&mut self) -> RawExpr {
        self.pair_map(true)
    }

    pub fn boolean(&mut self, b: bool) -> RawExpr {
        let (tt, ff) = (self.tt(), self.ff());
        if b {
            self.pair(tt, ff)
        } else {
            self.pair(ff, tt)
        }
    }

    /// `Not ≡ λb.let ⟨u, v⟩ = b in ⟨v, u⟩`
    pub fn not(&mut self) -> RawExpr {
        let b = self.fresh("b");
        let u = self.fresh("u");
        let w = self.fresh("v");
        let out = self.pair(v(&w), v(&u));
        let body = self.let_pair(v(&b), &u, &w, out);
        lam(&b, body)
    }

    /// `Copy ≡ λb.let ⟨u, v⟩ = b in ⟨u ⟨TT, FF⟩, v ⟨FF, TT⟩⟩`
    pub fn copy(&mut self) -> RawExpr {
        let b = self.fresh("b");
        let u = self.fresh("u");
        let w = self.fresh("v");
        let t = self.boolean(true);
        let f = self.boolean(false);
        let out = self.pair(app(v(&u), t), app(v(&w), f));
        let body = self.let_pair(v(&b), &u, &w, out);
        lam(&b, body)
    }

    /// ```text
    /// And ≡ λb₁.λb₂.
    ///   let ⟨u₁, v₁⟩ = b₁ in
    ///   let ⟨u₂, v₂⟩ = b₂ in
    ///   let ⟨p₁, p₂⟩ = u₁ ⟨u₂, FF⟩ in
    ///   let ⟨q₁, q₂⟩ = v₁ ⟨TT, v₂⟩ in
    ///   ⟨p₁, q₁ ∘ (p₂ ∘ (q₂ ∘ FF))⟩
    /// ```
    pub fn and(&mut self) -> RawExpr {
        let [b1, b2] = [self.fresh("b"), self.fresh("b")];
        let [u1, v1, u2, v2] = [
            self.fresh("u"),
            self.fresh("v"),
            self.fresh("u"),
            self.fresh("v"),
        ];
        let [p1, p2, q1, q2] = [
            self.fresh("p"),
            self.fresh("p"),
            self.fresh("q"),
            self.fresh("q"),
        ];
        let ff = self.ff();
        let tail = self.compose(v(&q2), ff);
        let tail = self.compose(v(&p2), tail);
        let tail = self.compose(v(&q1), tail);
        let result = self.pair(v(&p1), tail);

        let tt = self.tt();
        let disj = app(v(&v1), self.pair(tt, v(&v2)));
        let body = self.let_pair(disj, &q1, &q2, result);
        let ff = self.ff();
        let conj = app(v(&u1), self.pair(v(&u2), ff));
        let body = self.let_pair(conj, &p1, &p2, body);
        let body = self.let_pair(v(&b2), &u2, &v2, body);
        let body = self.let_pair(v(&b1), &u1, &v1, body);
        lam(&b1, lam(&b2, body))
    }

    /// Wrap a Boolean so that the true marker `λa.a` flows to the
    /// occurrence of the probe variable iff the Boolean is true:
    ///
    /// ```text
    /// let ⟨u, v⟩ = e in let ⟨r, s⟩ = u ⟨Mt, Mf⟩ in ((r s) v)
    /// ```
    ///
    /// `v` is consumed by the final application to keep the context linear.
    pub fn probe(&mut self, e: RawExpr) -> RawExpr {
        let (u, w, s) = ("probe_u", "probe_v", "probe_s");
        let mt = lam(TRUE_MARKER, v(TRUE_MARKER));
        let mf = lam(FALSE_MARKER, v(FALSE_MARKER));
        let markers = self.pair(mt, mf);
        let inner = self.let_pair(
            app(v(u), markers),
            PROBE_VAR,
            s,
            app(app(v(PROBE_VAR), v(s)), v(w)),
        );
        self.let_pair(e, u, w, inner)
    }
}

/// The seven encodings as closed, independently labeled terms.
pub fn encode_gates() -> BTreeMap<&'static str, Arc<Expr>> {
    let mut b = TermBuilder::new();
    let raw: [(&'static str, RawExpr); 7] = [
        ("TT", b.tt()),
        ("FF", b.ff()),
        ("True", b.boolean(true)),
        ("False", b.boolean(false)),
        ("Not", b.not()),
        ("Copy", b.copy()),
        ("And", b.and()),
    ];
    raw.into_iter()
        .map(|(name, r)| (name, r.into_expr().expect("encodings are well formed")))
        .collect()
}

/// A compiled circuit instance: the question "does `true_marker` flow to
/// `probe_label`?" has the circuit's value as its answer.
#[derive(Clone, Debug)]
pub struct CompiledInstance {
    pub term: Arc<Expr>,
    pub true_marker: AbsId,
    pub false_marker: AbsId,
    pub probe_label: Label,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error("compiled term violates its postcondition: {0}")]
    Postcondition(String),
    #[error("compiled term failed to evaluate: {0}")]
    Eval(#[from] EvalError),
}

fn wire_var(w: &str) -> String {
    format!("wire_{w}")
}

/// The circuit and its inputs as raw lets around a Boolean-valued body.
fn compile_raw(
    b: &mut TermBuilder,
    circuit: &Circuit,
    inputs: &InputVector,
    body: RawExpr,
) -> RawExpr {
    let mut term = body;
    for g in circuit.gates.iter().rev() {
        term = match g {
            Gate::Not { input, output } => {
                let not = b.not();
                b.let_in(&wire_var(output), app(not, v(&wire_var(input))), term)
            }
            Gate::And {
                left,
                right,
                output,
            } => {
                let and = b.and();
                let e = app(app(and, v(&wire_var(left))), v(&wire_var(right)));
                b.let_in(&wire_var(output), e, term)
            }
            Gate::Copy { input, outputs } => {
                let copy = b.copy();
                b.let_pair(
                    app(copy, v(&wire_var(input))),
                    &wire_var(&outputs.0),
                    &wire_var(&outputs.1),
                    term,
                )
            }
        };
    }
    for (w, &bit) in circuit.inputs.iter().zip(&inputs.0).rev() {
        let value = b.boolean(bit);
        term = b.let_in(&wire_var(w), value, term);
    }
    term
}

/// The circuit value as a closed linear term, without the probe context.
pub fn compile_boolean(circuit: &Circuit, inputs: &InputVector) -> Result<Arc<Expr>, CompileError> {
    check_length(circuit, inputs)?;
    let mut b = TermBuilder::new();
    let raw = compile_raw(&mut b, circuit, inputs, v(&wire_var(&circuit.output)));
    raw.into_expr()
        .map_err(|e| CompileError::Postcondition(e.to_string()))
}

/// Compile the circuit on its inputs into a closed linear term wrapped in
/// the probe context.
pub fn compile(circuit: &Circuit, inputs: &InputVector) -> Result<CompiledInstance, CompileError> {
    check_length(circuit, inputs)?;
    let mut b = TermBuilder::new();
    let body = b.probe(v(&wire_var(&circuit.output)));
    let raw = compile_raw(&mut b, circuit, inputs, body);
    let term = raw
        .into_expr()
        .map_err(|e| CompileError::Postcondition(e.to_string()))?;
    let instance = locate_probe(term)?;

    if !instance.term.is_closed() {
        return Err(CompileError::Postcondition("term is not closed".into()));
    }
    if !is_linear(&instance.term) {
        return Err(CompileError::Postcondition("term is not linear".into()));
    }
    // Linear terms evaluate in at most |term| steps.
    eval(&instance.term, &Env::new(), instance.term.size())?;
    Ok(instance)
}

fn locate_probe(term: Arc<Expr>) -> Result<CompiledInstance, CompileError> {
    let (mut t, mut f, mut probe) = (None, None, None);
    for node in term.preorder() {
        match node.term() {
            Term::Lam(x, _) if x.as_str() == TRUE_MARKER => t = node.abs_id(),
            Term::Lam(x, _) if x.as_str() == FALSE_MARKER => f = node.abs_id(),
            Term::Var(x) if x.as_str() == PROBE_VAR => probe = Some(node.label()),
            _ => {}
        }
    }
    match (t, f, probe) {
        (Some(true_marker), Some(false_marker), Some(probe_label)) => Ok(CompiledInstance {
            term,
            true_marker,
            false_marker,
            probe_label,
        }),
        _ => Err(CompileError::Postcondition(
            "probe context not found".into(),
        )),
    }
}

/// Decide the circuit value by flow analysis of the compiled instance.
pub fn cvp_decide(
    circuit: &Circuit,
    inputs: &InputVector,
    analysis: Analysis,
) -> Result<bool, CompileError> {
    let instance = compile(circuit, inputs)?;
    Ok(decide_instance(&instance, analysis))
}

pub fn decide_instance(instance: &CompiledInstance, analysis: Analysis) -> bool {
    let program = Program::new(instance.term.clone());
    let cache = analysis.run(&program);
    flow_query(
        &cache,
        &crate::cache::FlowQuery {
            program: instance.term.clone(),
            target: instance.true_marker.clone(),
            at: instance.probe_label,
        },
    )
}

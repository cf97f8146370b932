//! The iterated abstract evaluator `A[[·]]` shared by 0CFA, the naive
//! simple closure analysis and sub-0CFA, and the coinductive
//! acceptability check.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use crate::cache::{Cache, Program};
use crate::syntax::{AbsId, Expr, FlowKey, Label, Term};

/// Whether flow constraints are containments (0CFA) or equalities
/// (simple closure analysis).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Flow {
    Containment,
    Equality,
}

/// Mutable flow sets updated by the abstract evaluator.
pub(crate) trait FlowStore {
    /// `Ĉ[key ↦⁺ {value}]`; true on growth.
    fn insert(&mut self, key: &FlowKey, value: &AbsId) -> bool;
    /// `Ĉ[to ↦⁺ Ĉ(from)]`; true on growth.
    fn propagate(&mut self, from: &FlowKey, to: &FlowKey) -> bool;
    /// Abstractions to apply at an operator whose value is `Ĉ(key)`.
    fn callees(&self, key: &FlowKey) -> Vec<AbsId>;
    fn snapshot(&self, program: &Program) -> Cache;
}

#[derive(Debug, Default)]
pub(crate) struct SetStore {
    sets: HashMap<FlowKey, BTreeSet<AbsId>>,
}

impl FlowStore for SetStore {
    fn insert(&mut self, key: &FlowKey, value: &AbsId) -> bool {
        self.sets
            .entry(key.clone())
            .or_default()
            .insert(value.clone())
    }

    fn propagate(&mut self, from: &FlowKey, to: &FlowKey) -> bool {
        let Some(src) = self.sets.get(from) else {
            return false;
        };
        let missing: Vec<AbsId> = match self.sets.get(to) {
            Some(dst) => src.difference(dst).cloned().collect(),
            None => src.iter().cloned().collect(),
        };
        if missing.is_empty() {
            return false;
        }
        self.sets.entry(to.clone()).or_default().extend(missing);
        true
    }

    fn callees(&self, key: &FlowKey) -> Vec<AbsId> {
        self.sets
            .get(key)
            .map(|s| s.iter().cloned().collect())
            .unwrap_or_default()
    }

    fn snapshot(&self, program: &Program) -> Cache {
        let mut cache = Cache::empty_for(program);
        for (k, s) in &self.sets {
            cache.set(k.clone(), s.clone());
        }
        cache
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AnalysisStats {
    /// Full passes of the abstract evaluator over the program, including
    /// the final pass that observed no change.
    pub passes: usize,
    /// Number of updates that strictly enlarged some flow set.
    pub growth_events: usize,
}

pub(crate) struct AbstractEvaluator<'p, S> {
    program: &'p Program,
    store: S,
    flow: Flow,
    version: usize,
    in_progress: HashSet<Label>,
    done: HashMap<Label, usize>,
    trace: Option<Vec<Cache>>,
    stats: AnalysisStats,
}

impl<'p, S: FlowStore> AbstractEvaluator<'p, S> {
    pub fn new(program: &'p Program, store: S, flow: Flow) -> Self {
        AbstractEvaluator {
            program,
            store,
            flow,
            version: 0,
            in_progress: HashSet::new(),
            done: HashMap::new(),
            trace: None,
            stats: AnalysisStats::default(),
        }
    }

    /// Record the cache after every pass.
    pub fn traced(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    /// Re-run `A[[program]]` until a full pass leaves the cache unchanged.
    pub fn run(mut self) -> (S, AnalysisStats, Option<Vec<Cache>>) {
        let root = self.program.root().clone();
        loop {
            let before = self.version;
            self.done.clear();
            self.visit(&root);
            self.stats.passes += 1;
            if let Some(trace) = &mut self.trace {
                trace.push(self.store.snapshot(self.program));
            }
            if self.version == before {
                break;
            }
        }
        self.stats.growth_events = self.version;
        (self.store, self.stats, self.trace)
    }

    fn note(&mut self, grew: bool) {
        if grew {
            self.version += 1;
        }
    }

    /// `Ĉ[to ↦⁺ Ĉ(from)]` for containment, `Ĉ[to ↔ from]` for equality.
    fn flow(&mut self, from: FlowKey, to: FlowKey) {
        let grew = self.store.propagate(&from, &to);
        self.note(grew);
        if self.flow == Flow::Equality {
            let grew = self.store.propagate(&to, &from);
            self.note(grew);
        }
    }

    fn visit(&mut self, e: &Arc<Expr>) {
        let l = e.label();
        // A judgment already under evaluation is assumed to hold; one
        // completed in this pass with no cache change since is a no-op.
        if self.in_progress.contains(&l) || self.done.get(&l) == Some(&self.version) {
            return;
        }
        self.in_progress.insert(l);
        match e.term() {
            Term::Var(x) => self.flow(FlowKey::Var(x.clone()), FlowKey::Label(l)),
            Term::Lam(..) => {
                let abs = e.abs_id().expect("abstraction");
                let grew = self.store.insert(&FlowKey::Label(l), &abs);
                self.note(grew);
            }
            Term::App(operator, operand) => {
                self.visit(operator);
                self.visit(operand);
                let site = FlowKey::Label(operator.label());
                for abs in self.store.callees(&site) {
                    let Some((x, body)) = self.program.lambda(&abs) else {
                        continue;
                    };
                    let (x, body) = (x.clone(), body.clone());
                    self.flow(FlowKey::Label(operand.label()), FlowKey::Var(x));
                    self.visit(&body);
                    self.flow(FlowKey::Label(body.label()), FlowKey::Label(l));
                }
            }
        }
        self.in_progress.remove(&l);
        self.done.insert(l, self.version);
    }
}

/// `Ĉ ⊨ program`, checked by visiting every judgment reachable from the
/// root once: a judgment met again is assumed (coinductive hypothesis).
pub(crate) fn acceptable(cache: &Cache, program: &Program, flow: Flow) -> bool {
    let related = |from: &BTreeSet<AbsId>, to: &BTreeSet<AbsId>| match flow {
        Flow::Containment => from.is_subset(to),
        Flow::Equality => from == to,
    };
    let mut assumed = HashSet::new();
    let mut stack = vec![program.root().clone()];
    while let Some(e) = stack.pop() {
        let l = e.label();
        if !assumed.insert(l) {
            continue;
        }
        match e.term() {
            Term::Var(x) => {
                if !related(cache.of_var(x), cache.at(l)) {
                    return false;
                }
            }
            Term::Lam(..) => {
                if !cache.at(l).contains(&e.abs_id().expect("abstraction")) {
                    return false;
                }
            }
            Term::App(operator, operand) => {
                stack.push(operator.clone());
                stack.push(operand.clone());
                for abs in cache.at(operator.label()) {
                    let Some((x, body)) = program.lambda(abs) else {
                        return false;
                    };
                    if !related(cache.at(operand.label()), cache.of_var(x))
                        || !related(cache.at(body.label()), cache.at(l))
                    {
                        return false;
                    }
                    stack.push(body.clone());
                }
            }
        }
    }
    true
}

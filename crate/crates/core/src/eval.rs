//! Environment-based evaluator with environment tightening, the size of
//! linear closures, and the relation "a cache respects a closure".

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::Arc;

use thiserror::Error;

use crate::cache::Cache;
use crate::syntax::{Expr, FlowKey, Term, Var};

/// A term together with an environment closing it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Closure {
    pub term: Arc<Expr>,
    pub env: Env,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Env {
    bindings: BTreeMap<Var, Arc<Closure>>,
}

impl Env {
    pub fn new() -> Self {
        Env::default()
    }

    pub fn bind(&self, x: Var, c: Closure) -> Env {
        let mut bindings = self.bindings.clone();
        bindings.insert(x, Arc::new(c));
        Env { bindings }
    }

    pub fn get(&self, x: &Var) -> Option<&Arc<Closure>> {
        self.bindings.get(x)
    }

    /// `ρ↾vars`
    pub fn restrict(&self, vars: &BTreeSet<Var>) -> Env {
        if self.bindings.len() == vars.len() && self.bindings.keys().eq(vars.iter()) {
            return self.clone();
        }
        Env {
            bindings: self
                .bindings
                .iter()
                .filter(|(x, _)| vars.contains(*x))
                .map(|(x, c)| (x.clone(), c.clone()))
                .collect(),
        }
    }

    pub fn domain(&self) -> impl Iterator<Item = &Var> {
        self.bindings.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &Arc<Closure>)> {
        self.bindings.iter()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }
}

impl Closure {
    pub fn new(term: Arc<Expr>, env: Env) -> Self {
        Closure { term, env }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(Var),
    #[error("evaluation ran out of fuel")]
    FuelExhausted,
}

/// Evaluate `e` under `env` (restricted to `fv(e)` on entry). Every
/// recursive call consumes one unit of `fuel`.
pub fn eval(e: &Arc<Expr>, env: &Env, fuel: usize) -> Result<Closure, EvalError> {
    if let Some(x) = e.free_vars().iter().find(|x| env.get(x).is_none()) {
        return Err(EvalError::UnboundVariable(x.clone()));
    }
    let mut fuel = fuel;
    eval_tight(e, env.restrict(e.free_vars()), &mut fuel)
}

/// Default step budget: ten times the size of the input closure.
pub fn default_fuel(e: &Expr, env: &Env) -> usize {
    10 * (e.size() + env_size(env)).max(1)
}

fn eval_tight(e: &Arc<Expr>, env: Env, fuel: &mut usize) -> Result<Closure, EvalError> {
    if *fuel == 0 {
        return Err(EvalError::FuelExhausted);
    }
    *fuel -= 1;
    debug_assert!(
        env.domain().eq(e.free_vars().iter()),
        "environment not tightened to fv(e)"
    );
    match e.term() {
        Term::Var(x) => env
            .get(x)
            .map(|c| c.as_ref().clone())
            .ok_or_else(|| EvalError::UnboundVariable(x.clone())),
        Term::Lam(..) => Ok(Closure::new(e.clone(), env)),
        Term::App(operator, operand) => {
            let f = eval_tight(operator, env.restrict(operator.free_vars()), fuel)?;
            let arg = eval_tight(operand, env.restrict(operand.free_vars()), fuel)?;
            let Term::Lam(x, body) = f.term.term() else {
                unreachable!("values are abstractions");
            };
            let env = f.env.bind(x.clone(), arg).restrict(body.free_vars());
            eval_tight(body, env, fuel)
        }
    }
}

/// `|ρ| = n + Σ|cᵢ|`
pub fn env_size(env: &Env) -> usize {
    env.iter().map(|(_, c)| 1 + closure_size(c)).sum()
}

/// `|t, ρ| = |t| + |ρ|`
pub fn closure_size(c: &Closure) -> usize {
    c.term.size() + env_size(&c.env)
}

/// Every variable name in a closure, free or bound, including those of the
/// closures in its environment.
fn names(c: &Closure, out: &mut BTreeSet<Var>) {
    for node in c.term.preorder() {
        match node.term() {
            Term::Var(x) | Term::Lam(x, _) => {
                out.insert(x.clone());
            }
            Term::App(..) => {}
        }
    }
    for (x, inner) in c.env.iter() {
        out.insert(x.clone());
        names(inner, out);
    }
}

fn free_occurrences(e: &Arc<Expr>, x: &Var) -> usize {
    // Binder names are distinct, so a binder named `x` shadows every
    // occurrence below it.
    fn go(e: &Expr, x: &Var) -> usize {
        if !e.free_vars().contains(x) {
            return 0;
        }
        match e.term() {
            Term::Var(_) => 1,
            Term::Lam(_, b) => go(b, x),
            Term::App(f, a) => go(f, x) + go(a, x),
        }
    }
    go(e, x)
}

/// `ρ` linearly closes `t`: `t` is linear, `ρ` closes it, each variable of
/// `dom(ρ)` occurs free exactly once in `t` and is bound to a linear
/// closure, and no variable of `dom(ρ)` occurs anywhere in another
/// binding's closure.
pub fn linearly_closes(c: &Closure) -> bool {
    if !crate::syntax::is_linear(&c.term) {
        return false;
    }
    if c.term.free_vars().iter().any(|x| c.env.get(x).is_none()) {
        return false;
    }
    let mut seen = Vec::with_capacity(c.env.len());
    for (x, inner) in c.env.iter() {
        if free_occurrences(&c.term, x) != 1 || !linearly_closes(inner) {
            return false;
        }
        let mut n = BTreeSet::new();
        names(inner, &mut n);
        seen.push(n);
    }
    for (i, (x, _)) in c.env.iter().enumerate() {
        if seen
            .iter()
            .enumerate()
            .any(|(j, n)| j != i && n.contains(x))
        {
            return false;
        }
    }
    true
}

/// `Ĉ ⊢ t, ρ`: `ρ` linearly closes `t`; every `x ↦ ⟨t′, ρ′⟩` has
/// `Ĉ(x) = {t′}` and `Ĉ ⊢ t′, ρ′`; and every label or bound variable of
/// `t` below its root maps to the empty set.
pub fn respects(cache: &Cache, c: &Closure) -> bool {
    let mut visited = HashSet::new();
    linearly_closes(c) && respects_inner(cache, c, &mut visited)
}

fn respects_inner(cache: &Cache, c: &Closure, visited: &mut HashSet<*const Closure>) -> bool {
    if !visited.insert(c as *const Closure) {
        return true;
    }
    for (x, inner) in c.env.iter() {
        let Some(value) = inner.term.abs_id() else {
            return false;
        };
        let s = cache.of_var(x);
        if s.len() != 1 || !s.contains(&value) {
            return false;
        }
        if !respects_inner(cache, inner, visited) {
            return false;
        }
    }
    let free = c.term.free_vars();
    for node in c.term.preorder() {
        if !Arc::ptr_eq(&node, &c.term) && !cache.at(node.label()).is_empty() {
            return false;
        }
        if let Term::Lam(x, _) = node.term() {
            if !free.contains(x) && !cache.get(&FlowKey::Var(x.clone())).is_empty() {
                return false;
            }
        }
    }
    true
}

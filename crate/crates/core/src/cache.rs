//! Abstract caches, the program index shared by the analyses, and cache
//! serialization.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::de::{self, Deserializer};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};

use crate::syntax::{labels_of, AbsId, Expr, FlowKey, Label, Term, Var};

static EMPTY: BTreeSet<AbsId> = BTreeSet::new();

/// `Ĉ`: a map from labels and variables to sets of abstractions. Absent
/// keys read as the empty set.
#[derive(Clone, Debug, Default)]
pub struct Cache {
    entries: BTreeMap<FlowKey, BTreeSet<AbsId>>,
}

impl Cache {
    pub fn new() -> Self {
        Cache::default()
    }

    /// A cache with an empty entry for every key of `program`.
    pub fn empty_for(program: &Program) -> Self {
        Cache {
            entries: program
                .keys()
                .iter()
                .map(|k| (k.clone(), BTreeSet::new()))
                .collect(),
        }
    }

    pub fn get(&self, key: &FlowKey) -> &BTreeSet<AbsId> {
        self.entries.get(key).unwrap_or(&EMPTY)
    }

    pub fn at(&self, label: Label) -> &BTreeSet<AbsId> {
        self.get(&FlowKey::Label(label))
    }

    pub fn of_var(&self, x: &Var) -> &BTreeSet<AbsId> {
        self.get(&FlowKey::Var(x.clone()))
    }

    pub fn set(&mut self, key: FlowKey, values: BTreeSet<AbsId>) {
        self.entries.insert(key, values);
    }

    /// `Ĉ[key ↦⁺ {value}]`; true if the entry grew.
    pub fn insert(&mut self, key: FlowKey, value: AbsId) -> bool {
        self.entries.entry(key).or_default().insert(value)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FlowKey, &BTreeSet<AbsId>)> {
        self.entries.iter()
    }

    pub fn keys(&self) -> impl Iterator<Item = &FlowKey> {
        self.entries.keys()
    }

    /// Total number of (key, abstraction) pairs.
    pub fn flow_count(&self) -> usize {
        self.entries.values().map(BTreeSet::len).sum()
    }
}

impl PartialEq for Cache {
    fn eq(&self, other: &Self) -> bool {
        cache_leq(self, other) && cache_leq(other, self)
    }
}

impl Eq for Cache {}

/// `a ⊑ b` iff every entry of `a` is contained in the same entry of `b`.
pub fn cache_leq(a: &Cache, b: &Cache) -> bool {
    a.entries.iter().all(|(k, s)| s.is_subset(b.get(k)))
}

/// One line per key, `key = {λx@9, λy@5}`, labels before variables.
impl fmt::Display for Cache {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, s) in &self.entries {
            writeln!(f, "{k} = {}", format_set(s))?;
        }
        Ok(())
    }
}

pub(crate) fn format_set(s: &BTreeSet<AbsId>) -> String {
    let items: Vec<String> = s.iter().map(ToString::to_string).collect();
    format!("{{{}}}", items.join(", "))
}

#[derive(Serialize, Deserialize)]
pub(crate) struct AbsDescriptor {
    pub label: u32,
    pub binder: String,
}

impl From<&AbsId> for AbsDescriptor {
    fn from(a: &AbsId) -> Self {
        AbsDescriptor {
            label: a.label.0,
            binder: a.binder.as_str().to_owned(),
        }
    }
}

impl From<AbsDescriptor> for AbsId {
    fn from(d: AbsDescriptor) -> Self {
        AbsId {
            label: Label(d.label),
            binder: Var::new(&d.binder),
        }
    }
}

pub(crate) fn parse_key(s: &str) -> FlowKey {
    match s.parse::<u32>() {
        Ok(n) => FlowKey::Label(Label(n)),
        Err(_) => FlowKey::Var(Var::new(s)),
    }
}

/// JSON object from key (label number as a string, or variable name) to a
/// label-sorted array of `{"label": n, "binder": "x"}`. Keys are written in
/// cache order: labels numerically, then variables alphabetically.
impl Serialize for Cache {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.entries.len()))?;
        for (k, s) in &self.entries {
            let values: Vec<AbsDescriptor> = s.iter().map(AbsDescriptor::from).collect();
            map.serialize_entry(&k.to_string(), &values)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for Cache {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw: BTreeMap<String, Vec<AbsDescriptor>> = BTreeMap::deserialize(deserializer)?;
        let mut cache = Cache::new();
        for (k, values) in raw {
            if k.is_empty() {
                return Err(de::Error::custom("empty cache key"));
            }
            cache.set(parse_key(&k), values.into_iter().map(AbsId::from).collect());
        }
        Ok(cache)
    }
}

/// The Flow Analysis Problem: is `target` in `Ĉ(at)` for the analysis of
/// `program`?
#[derive(Clone, Debug)]
pub struct FlowQuery {
    pub program: Arc<Expr>,
    pub target: AbsId,
    pub at: Label,
}

pub fn flow_query(cache: &Cache, query: &FlowQuery) -> bool {
    cache.at(query.at).contains(&query.target)
}

/// Index over the program of interest: nodes by label, its abstractions
/// and its key universe.
#[derive(Debug, Clone)]
pub struct Program {
    root: Arc<Expr>,
    nodes: HashMap<Label, Arc<Expr>>,
    abstractions: Vec<AbsId>,
    keys: Vec<FlowKey>,
}

impl Program {
    /// Labels must be unique within `root` (guaranteed for terms built
    /// through [`crate::syntax::RawExpr::into_expr`]).
    pub fn new(root: Arc<Expr>) -> Self {
        let mut nodes = HashMap::new();
        let mut abstractions = Vec::new();
        for node in root.preorder() {
            if let Some(a) = node.abs_id() {
                abstractions.push(a);
            }
            let prev = nodes.insert(node.label(), node);
            assert!(prev.is_none(), "duplicate label in program");
        }
        abstractions.sort();
        let keys = labels_of(&root).into_iter().collect();
        Program {
            root,
            nodes,
            abstractions,
            keys,
        }
    }

    pub fn root(&self) -> &Arc<Expr> {
        &self.root
    }

    pub fn node(&self, label: Label) -> Option<&Arc<Expr>> {
        self.nodes.get(&label)
    }

    /// All abstractions of the program, sorted by label.
    pub fn abstractions(&self) -> &[AbsId] {
        &self.abstractions
    }

    /// `lab(program)` in key order.
    pub fn keys(&self) -> &[FlowKey] {
        &self.keys
    }

    /// Binder and body of the abstraction identified by `abs`.
    pub fn lambda(&self, abs: &AbsId) -> Option<(&Var, &Arc<Expr>)> {
        match self.nodes.get(&abs.label)?.term() {
            Term::Lam(x, body) => Some((x, body)),
            _ => None,
        }
    }
}

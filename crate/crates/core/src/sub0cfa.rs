//! Sub-0CFA: 0CFA where every key tolerates a bounded number of growth
//! events before it is widened to `Unknown`, the value standing for every
//! abstraction of the program.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::ser::{SerializeMap, SerializeStruct, Serializer};
use serde::Serialize;

use crate::cache::{format_set, AbsDescriptor, Cache, Program};
use crate::engine::{AbstractEvaluator, AnalysisStats, Flow, FlowStore};
use crate::syntax::{AbsId, FlowKey};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FlowValues {
    Known(BTreeSet<AbsId>),
    Unknown,
}

impl Default for FlowValues {
    fn default() -> Self {
        FlowValues::Known(BTreeSet::new())
    }
}

/// A flow set with its growth count. `Unknown` is absorbing.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BoundedFlowSet {
    pub values: FlowValues,
    pub update_count: usize,
}

impl BoundedFlowSet {
    pub fn is_unknown(&self) -> bool {
        self.values == FlowValues::Unknown
    }

    /// Join `incoming` in. A strict enlargement counts as a growth event;
    /// one beyond `bound` widens to `Unknown`. Returns true on change.
    fn join(&mut self, incoming: &FlowValues, bound: usize) -> bool {
        let current = match &mut self.values {
            FlowValues::Unknown => return false,
            FlowValues::Known(s) => s,
        };
        let fresh: Vec<AbsId> = match incoming {
            FlowValues::Unknown => {
                self.values = FlowValues::Unknown;
                return true;
            }
            FlowValues::Known(s) => s.difference(current).cloned().collect(),
        };
        if fresh.is_empty() {
            return false;
        }
        if self.update_count >= bound {
            self.values = FlowValues::Unknown;
        } else {
            self.update_count += 1;
            current.extend(fresh);
        }
        true
    }
}

/// Result of sub-0CFA: each key maps to a concrete set or `Unknown`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BoundedCache {
    entries: BTreeMap<FlowKey, BoundedFlowSet>,
}

impl BoundedCache {
    pub fn get(&self, key: &FlowKey) -> Option<&BoundedFlowSet> {
        self.entries.get(key)
    }

    pub fn is_unknown(&self, key: &FlowKey) -> bool {
        self.entries
            .get(key)
            .is_some_and(BoundedFlowSet::is_unknown)
    }

    pub fn unknown_keys(&self) -> impl Iterator<Item = &FlowKey> {
        self.entries
            .iter()
            .filter(|(_, s)| s.is_unknown())
            .map(|(k, _)| k)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FlowKey, &BoundedFlowSet)> {
        self.entries.iter()
    }
}

impl fmt::Display for BoundedCache {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, s) in &self.entries {
            match &s.values {
                FlowValues::Unknown => writeln!(f, "{k} = unknown")?,
                FlowValues::Known(v) => writeln!(f, "{k} = {}", format_set(v))?,
            }
        }
        Ok(())
    }
}

/// The plain cache format, except that an `Unknown` key maps to
/// `{"unknown": true}` instead of an array.
impl Serialize for BoundedCache {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        struct UnknownMarker;
        impl Serialize for UnknownMarker {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                let mut s = serializer.serialize_struct("Unknown", 1)?;
                s.serialize_field("unknown", &true)?;
                s.end()
            }
        }
        let mut map = serializer.serialize_map(Some(self.entries.len()))?;
        for (k, s) in &self.entries {
            match &s.values {
                FlowValues::Unknown => map.serialize_entry(&k.to_string(), &UnknownMarker)?,
                FlowValues::Known(v) => {
                    let values: Vec<AbsDescriptor> = v.iter().map(AbsDescriptor::from).collect();
                    map.serialize_entry(&k.to_string(), &values)?
                }
            }
        }
        map.end()
    }
}

struct BoundedStore {
    sets: HashMap<FlowKey, BoundedFlowSet>,
    bound: usize,
    all: Vec<AbsId>,
}

impl FlowStore for BoundedStore {
    fn insert(&mut self, key: &FlowKey, value: &AbsId) -> bool {
        let incoming = FlowValues::Known(BTreeSet::from([value.clone()]));
        self.sets
            .entry(key.clone())
            .or_default()
            .join(&incoming, self.bound)
    }

    fn propagate(&mut self, from: &FlowKey, to: &FlowKey) -> bool {
        let Some(src) = self.sets.get(from) else {
            return false;
        };
        let incoming = src.values.clone();
        self.sets
            .entry(to.clone())
            .or_default()
            .join(&incoming, self.bound)
    }

    fn callees(&self, key: &FlowKey) -> Vec<AbsId> {
        match self.sets.get(key).map(|s| &s.values) {
            None => Vec::new(),
            Some(FlowValues::Unknown) => self.all.clone(),
            Some(FlowValues::Known(s)) => s.iter().cloned().collect(),
        }
    }

    fn snapshot(&self, program: &Program) -> Cache {
        concretize(&self.bounded(program), program)
    }
}

impl BoundedStore {
    fn bounded(&self, program: &Program) -> BoundedCache {
        let entries = program
            .keys()
            .iter()
            .map(|k| (k.clone(), self.sets.get(k).cloned().unwrap_or_default()))
            .collect();
        BoundedCache { entries }
    }
}

/// Run the 0CFA abstract evaluator allowing each key at most `bound`
/// growth events.
pub fn analyze_sub0cfa(program: &Program, bound: usize) -> BoundedCache {
    analyze_sub0cfa_with_stats(program, bound).0
}

pub fn analyze_sub0cfa_with_stats(
    program: &Program,
    bound: usize,
) -> (BoundedCache, AnalysisStats) {
    assert!(bound >= 1, "sub-0CFA bound must be positive");
    let store = BoundedStore {
        sets: HashMap::new(),
        bound,
        all: program.abstractions().to_vec(),
    };
    let (store, stats, _) = AbstractEvaluator::new(program, store, Flow::Containment).run();
    (store.bounded(program), stats)
}

/// Replace every `Unknown` by the set of all abstractions of `program`.
pub fn concretize(cache: &BoundedCache, program: &Program) -> Cache {
    let all: BTreeSet<AbsId> = program.abstractions().iter().cloned().collect();
    let mut out = Cache::new();
    for (k, s) in &cache.entries {
        let values = match &s.values {
            FlowValues::Unknown => all.clone(),
            FlowValues::Known(v) => v.clone(),
        };
        out.set(k.clone(), values);
    }
    out
}

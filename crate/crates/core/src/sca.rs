//! Simple closure analysis: flow constraints are equalities, so flows are
//! bidirectional. Two solvers with identical fixpoints are provided: the
//! iterated abstract evaluator, kept as the reference, and a union-find
//! solver that runs in almost linear time.

use std::collections::{BTreeSet, HashMap, HashSet};

use crate::cache::{Cache, Program};
use crate::engine::{acceptable, AbstractEvaluator, AnalysisStats, Flow, FlowStore, SetStore};
use crate::syntax::{AbsId, FlowKey, Label, Term};

/// Iterate the abstract evaluator with `Ĉ[ℓ ↔ ℓ′]` updates to a fixpoint.
pub fn analyze_sca_naive(program: &Program) -> Cache {
    analyze_sca_naive_with_stats(program).0
}

pub fn analyze_sca_naive_with_stats(program: &Program) -> (Cache, AnalysisStats) {
    let (store, stats, _) =
        AbstractEvaluator::new(program, SetStore::default(), Flow::Equality).run();
    (store.snapshot(program), stats)
}

/// `Ĉ ⊨ program` under equality constraints.
pub fn accepts_sca(cache: &Cache, program: &Program) -> bool {
    acceptable(cache, program, Flow::Equality)
}

/// Equivalence classes of flow keys, each carrying the abstractions known
/// to flow into the class and the application sites whose operator lies in
/// the class.
#[derive(Debug, Clone, Default)]
pub struct FlowClassTable {
    parent: Vec<usize>,
    rank: Vec<u8>,
    values: Vec<BTreeSet<AbsId>>,
    sites: Vec<Vec<Label>>,
}

impl FlowClassTable {
    pub fn with_len(n: usize) -> Self {
        FlowClassTable {
            parent: (0..n).collect(),
            rank: vec![0; n],
            values: vec![BTreeSet::new(); n],
            sites: vec![Vec::new(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn find(&mut self, i: usize) -> usize {
        let mut root = i;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut i = i;
        while self.parent[i] != root {
            let next = self.parent[i];
            self.parent[i] = root;
            i = next;
        }
        root
    }

    pub fn values(&mut self, i: usize) -> &BTreeSet<AbsId> {
        let r = self.find(i);
        &self.values[r]
    }

    /// Add `value` to the class of `i`. Returns the sites of that class
    /// that have to be told about it (empty if it was already present).
    pub fn add_value(&mut self, i: usize, value: AbsId) -> Vec<(Label, AbsId)> {
        let r = self.find(i);
        if !self.values[r].insert(value.clone()) {
            return Vec::new();
        }
        self.sites[r].iter().map(|&s| (s, value.clone())).collect()
    }

    /// Register an application site whose operator is in the class of `i`.
    /// Returns the (site, abstraction) pairs that are now due.
    pub fn add_site(&mut self, i: usize, site: Label) -> Vec<(Label, AbsId)> {
        let r = self.find(i);
        self.sites[r].push(site);
        self.values[r].iter().map(|v| (site, v.clone())).collect()
    }

    /// Merge the classes of `a` and `b`. Returns the (site, abstraction)
    /// pairs that became due: each side's sites meet the other side's new
    /// values.
    pub fn union(&mut self, a: usize, b: usize) -> Vec<(Label, AbsId)> {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return Vec::new();
        }
        let mut due = Vec::new();
        for &s in &self.sites[ra] {
            for v in self.values[rb].difference(&self.values[ra]) {
                due.push((s, v.clone()));
            }
        }
        for &s in &self.sites[rb] {
            for v in self.values[ra].difference(&self.values[rb]) {
                due.push((s, v.clone()));
            }
        }

        let (root, child) = match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => (rb, ra),
            std::cmp::Ordering::Greater => (ra, rb),
            std::cmp::Ordering::Equal => {
                self.rank[ra] += 1;
                (ra, rb)
            }
        };
        self.parent[child] = root;

        // smaller set into larger
        let mut values = std::mem::take(&mut self.values[root]);
        let mut other = std::mem::take(&mut self.values[child]);
        if values.len() < other.len() {
            std::mem::swap(&mut values, &mut other);
        }
        values.extend(other);
        self.values[root] = values;

        let mut sites = std::mem::take(&mut self.sites[root]);
        let mut other = std::mem::take(&mut self.sites[child]);
        if sites.len() < other.len() {
            std::mem::swap(&mut sites, &mut other);
        }
        sites.extend(other);
        self.sites[root] = sites;

        due
    }
}

enum Task {
    Activate(Label),
    Fire(Label, AbsId),
}

/// Simple closure analysis by unification over a union-find structure.
///
/// Constraints of a subterm are emitted only once the subterm is reached:
/// the root is reached, both sides of a reached application are reached,
/// and a body is reached once its abstraction meets a reached application
/// site. Each (site, abstraction) pair is processed once.
pub fn analyze_sca_unionfind(program: &Program) -> Cache {
    let index: HashMap<&FlowKey, usize> = program
        .keys()
        .iter()
        .enumerate()
        .map(|(i, k)| (k, i))
        .collect();
    let key = |k: &FlowKey| index[k];
    let label = |l: Label| index[&FlowKey::Label(l)];

    let mut table = FlowClassTable::with_len(program.keys().len());
    let mut reached: HashSet<Label> = HashSet::new();
    let mut fired: HashSet<(Label, Label)> = HashSet::new();
    let mut work = vec![Task::Activate(program.root().label())];
    let push_due = |work: &mut Vec<Task>, due: Vec<(Label, AbsId)>| {
        work.extend(due.into_iter().map(|(s, a)| Task::Fire(s, a)));
    };

    while let Some(task) = work.pop() {
        match task {
            Task::Activate(l) => {
                if !reached.insert(l) {
                    continue;
                }
                let node = program.node(l).expect("label in program").clone();
                match node.term() {
                    Term::Var(x) => {
                        let due = table.union(key(&FlowKey::Var(x.clone())), label(l));
                        push_due(&mut work, due);
                    }
                    Term::Lam(..) => {
                        let due = table.add_value(label(l), node.abs_id().expect("abstraction"));
                        push_due(&mut work, due);
                    }
                    Term::App(operator, operand) => {
                        work.push(Task::Activate(operand.label()));
                        work.push(Task::Activate(operator.label()));
                        let due = table.add_site(label(operator.label()), l);
                        push_due(&mut work, due);
                    }
                }
            }
            Task::Fire(site, abs) => {
                if !fired.insert((site, abs.label)) {
                    continue;
                }
                let Some((x, body)) = program.lambda(&abs) else {
                    continue;
                };
                let operand = match program.node(site).map(|n| n.term()) {
                    Some(Term::App(_, operand)) => operand.label(),
                    _ => unreachable!("application sites are applications"),
                };
                let due = table.union(key(&FlowKey::Var(x.clone())), label(operand));
                push_due(&mut work, due);
                let due = table.union(label(body.label()), label(site));
                push_due(&mut work, due);
                work.push(Task::Activate(body.label()));
            }
        }
    }

    let mut cache = Cache::new();
    for (i, k) in program.keys().iter().enumerate() {
        cache.set(k.clone(), table.values(i).clone());
    }
    cache
}

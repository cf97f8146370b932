//! 0CFA: directional (containment) flow constraints solved by iterating
//! the abstract evaluator to its least fixed point.

use crate::cache::{Cache, Program};
use crate::engine::{acceptable, AbstractEvaluator, AnalysisStats, Flow, FlowStore, SetStore};

/// The least cache `Ĉ` with `Ĉ ⊨ program` under containment constraints.
pub fn analyze_0cfa(program: &Program) -> Cache {
    analyze_0cfa_with_stats(program).0
}

pub fn analyze_0cfa_with_stats(program: &Program) -> (Cache, AnalysisStats) {
    let (store, stats, _) =
        AbstractEvaluator::new(program, SetStore::default(), Flow::Containment).run();
    (store.snapshot(program), stats)
}

/// The cache after each pass of the abstract evaluator; the last element
/// is the analysis result.
pub fn analyze_0cfa_trace(program: &Program) -> Vec<Cache> {
    let (_, _, trace) = AbstractEvaluator::new(program, SetStore::default(), Flow::Containment)
        .traced()
        .run();
    trace.unwrap_or_default()
}

/// `Ĉ ⊨ program` for 0CFA.
pub fn accepts_0cfa(cache: &Cache, program: &Program) -> bool {
    acceptable(cache, program, Flow::Containment)
}

//! Monovariant flow analyses for the labeled λ-calculus.
//!
//! * [`cfa0`]: 0CFA, containment constraints.
//! * [`sca`]: simple closure analysis, equality constraints, solved both
//!   by the iterated abstract evaluator and by union-find.
//! * [`sub0cfa`]: 0CFA with a per-key bound on cache growth.
//! * [`eval`]: the environment-tightening evaluator the analyses are
//!   checked against.
//! * [`circuits`]: Boolean circuits compiled into linear terms, so that a
//!   flow query decides the circuit's value.
//!
//! On linear programs all of the analyses coincide with each other and
//! with evaluation.

pub mod cache;
pub mod cfa0;
pub mod circuits;
mod engine;
pub mod eval;
pub mod sca;
pub mod sub0cfa;
pub mod syntax;

use std::fmt;
use std::str::FromStr;

pub use cache::{cache_leq, flow_query, Cache, FlowQuery, Program};
pub use engine::AnalysisStats;
pub use syntax::{parse, AbsId, Expr, FlowKey, Label, Term, Var};

/// Which analysis to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Analysis {
    Cfa0,
    ScaNaive,
    ScaUnionFind,
    Sub0cfa(usize),
}

impl Analysis {
    /// Run the analysis; sub-0CFA results are concretized.
    pub fn run(self, program: &Program) -> Cache {
        match self {
            Analysis::Cfa0 => cfa0::analyze_0cfa(program),
            Analysis::ScaNaive => sca::analyze_sca_naive(program),
            Analysis::ScaUnionFind => sca::analyze_sca_unionfind(program),
            Analysis::Sub0cfa(bound) => {
                sub0cfa::concretize(&sub0cfa::analyze_sub0cfa(program, bound), program)
            }
        }
    }
}

impl fmt::Display for Analysis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Analysis::Cfa0 => f.write_str("0cfa"),
            Analysis::ScaNaive => f.write_str("sca-naive"),
            Analysis::ScaUnionFind => f.write_str("sca-uf"),
            Analysis::Sub0cfa(b) => write!(f, "sub0cfa({b})"),
        }
    }
}

impl FromStr for Analysis {
    type Err = String;

    /// Accepts `0cfa`, `sca-naive`, `sca-uf` (or `sca`), and `sub0cfa`
    /// (bound 1).
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "0cfa" => Ok(Analysis::Cfa0),
            "sca-naive" => Ok(Analysis::ScaNaive),
            "sca" | "sca-uf" => Ok(Analysis::ScaUnionFind),
            "sub0cfa" => Ok(Analysis::Sub0cfa(1)),
            other => Err(format!("unknown analysis `{other}`")),
        }
    }
}

//! Formula syntax, semantics and compilation to reachable-set intersection checks.

mod ast;
mod monitor;
mod parser;
mod rtl;
mod sampled;
mod transform;

pub use ast::{Atom, Relation, StlFormula};
pub use monitor::{monitor_trace, SampledTrace};
pub use parser::{parse_stl, ParseError};
pub use rtl::{
    cnf_clauses, complement_polytopes, literal_tree, to_cnf, to_rtl_checklist, CheckKind, Clause, LiteralTree,
    RtlCheck, RtlChecklist, RtlClause, SetLiteral, DEFAULT_CLAUSE_CAP,
};
pub use sampled::to_sampled_time;
pub use transform::{desugar, formula_horizon, is_nnf, negate, negation_normal_form};

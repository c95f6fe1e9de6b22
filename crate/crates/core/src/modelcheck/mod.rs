//! Factor-space model checking: each intersection between a reachable set and a
//! polytope becomes a polytope of possibly unsafe zonotope factors.

mod check;
mod factor;

pub use check::{
    compile_formula, finalize_unsafe, is_certified, model_check, model_check_scheduled, pre_evaluate_local, pre_evaluate_predicates,
    rtl_entailment_wholeset, unsafe_factors, wholeset_tree, CombineStrategy, CompiledFormula, FactorChecker,
    ModelCheckConfig, DEFAULT_POLYTOPE_CAP,
};
pub use factor::{unsafe_factor_polytope, unsafe_factor_polytope_for, UnsafeList};

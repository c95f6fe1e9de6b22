//! Linear and mixed-integer linear programming.

mod lp;
mod milp;

pub use lp::{lp_solve, LinearProgram, LpOutcome, FEAS_TOL};
pub use milp::{
    find_counterexample, CounterexampleMilp, Disaggregation, MilpOutcome, MilpSolution, MilpStats,
    DEFAULT_EPSILON, DEFAULT_NODE_CAP,
};

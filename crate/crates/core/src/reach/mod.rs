//! Reachable sets of linear time-invariant systems with factor tracking.

mod sequence;
mod taylor;

pub use sequence::{
    initial_curvature_box, reach_sequence, reach_sequence_scheduled, FactorIndexTuples, InputSchedule,
    InputSegment, LinearSystem, ReachParams, ReachSequence, StepInput,
};
pub use taylor::{
    curvature_matrices, exp_matrix, exp_remainder, input_difference_d, propagation_matrix, taylor_curvature,
    tune_truncation_order,
};

//! Automated verification: refine the time step until the specification is
//! proven or a monitor-validated counterexample is found.

use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::modelcheck::{
    compile_formula, pre_evaluate_local, pre_evaluate_predicates, unsafe_factors, wholeset_tree, CombineStrategy, ModelCheckConfig,
    UnsafeList,
};
use crate::optim::{CounterexampleMilp, MilpOutcome, DEFAULT_EPSILON, DEFAULT_NODE_CAP};
use crate::reach::{reach_sequence_scheduled, InputSchedule, LinearSystem, ReachParams, ReachSequence};
use crate::setops::Zonotope;
use crate::sim::{simulate_factors, Trajectory};
use crate::stl::{formula_horizon, monitor_trace, negate, StlFormula};

pub use crate::reach::tune_truncation_order;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictKind {
    Safe,
    Unsafe,
    Unknown,
}

impl VerdictKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VerdictKind::Safe => "safe",
            VerdictKind::Unsafe => "unsafe",
            VerdictKind::Unknown => "unknown",
        }
    }
}

/// How each refinement step decides the specification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Factor-space model checking with counterexample search.
    Factor,
    /// Whole-set intersection checks without dependency tracking. A run that never
    /// proves the specification ends `unsafe`, with a counterexample only when the
    /// negation holds on the whole sets.
    Wholeset,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifierConfig {
    pub max_iterations: usize,
    pub node_cap: usize,
    pub polytope_cap: usize,
    pub epsilon: f64,
    /// Fixed truncation order; tuned per step when absent.
    pub kappa: Option<usize>,
    pub kappa_cap: usize,
    /// Samples per time step of the counterexample trace handed to the monitor.
    pub substeps: usize,
    pub pre_evaluate: bool,
    pub strategy: CombineStrategy,
    pub method: Method,
    /// Initial time step; the formula horizon when absent.
    pub initial_dt: Option<f64>,
    /// Search for counterexamples only; the run never ends `safe`.
    pub falsify_only: bool,
}

impl Default for VerifierConfig {
    fn default() -> Self {
        Self {
            max_iterations: 12,
            node_cap: DEFAULT_NODE_CAP,
            polytope_cap: crate::modelcheck::DEFAULT_POLYTOPE_CAP,
            epsilon: DEFAULT_EPSILON,
            kappa: None,
            kappa_cap: 100,
            substeps: 16,
            pre_evaluate: true,
            strategy: CombineStrategy::Auto,
            method: Method::Factor,
            initial_dt: None,
            falsify_only: false,
        }
    }
}

impl VerifierConfig {
    fn model_check_config(&self) -> ModelCheckConfig {
        ModelCheckConfig {
            polytope_cap: self.polytope_cap,
            strategy: self.strategy,
            pre_evaluate: self.pre_evaluate,
            ..ModelCheckConfig::default()
        }
    }
}

/// Diagnostics of one refinement step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub dt: f64,
    pub kappa: usize,
    pub steps: usize,
    pub factor_dim: usize,
    /// Unsafe polytopes for the specification.
    pub unsafe_polytopes: usize,
    /// Unsafe polytopes for the negation, when computed.
    pub negated_polytopes: Option<usize>,
    pub milp_nodes: Option<usize>,
    pub seconds: f64,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Verdict {
    pub result: VerdictKind,
    pub iterations: usize,
    pub dt: f64,
    pub kappa: usize,
    pub counterexample: Option<Trajectory>,
    pub counterexample_factors: Option<DVector<f64>>,
    /// Final unsafe list of the specification.
    pub unsafe_factors: Option<UnsafeList>,
    /// Final unsafe list of the negation (factors that may satisfy the specification).
    pub safe_complement: Option<UnsafeList>,
    pub history: Vec<IterationRecord>,
    pub diagnostics: Vec<String>,
}

/// Exact discrete trajectory for factor vector `alpha`, sampled `substeps` times per step.
pub fn counterexample_trajectory(
    sys: &LinearSystem,
    x0: &Zonotope,
    seq: &ReachSequence,
    alpha: &DVector<f64>,
    substeps: usize,
) -> Result<Trajectory> {
    check_dim("factor vector", seq.factor_dim(), alpha.len())?;
    simulate_factors(sys, x0, &seq.step_inputs, seq.dt, alpha, substeps)
}

/// Unsafe list of the negated specification: factors whose behaviour may satisfy `phi`.
pub fn predict_safe_behaviors(
    sys: &LinearSystem,
    x0: &Zonotope,
    u: &InputSchedule,
    phi: &StlFormula,
    dt: f64,
    kappa: usize,
) -> Result<(UnsafeList, ReachSequence)> {
    phi.check_dims(sys.dim())?;
    let neg = negate(phi);
    let steps = steps_for(phi, dt)?;
    let seq = reach_sequence_scheduled(sys, x0, u, &ReachParams::with_steps(dt, steps, kappa)?)?;
    let cfg = ModelCheckConfig::default();
    let reduced = pre_evaluate_predicates(&seq, &neg)?;
    let tree = pre_evaluate_local(&seq, &compile_formula(&reduced, dt)?.tree)?;
    let list = unsafe_factors(&seq, &tree, &cfg)?;
    Ok((list, seq))
}

/// Reach sequence used by a verification step at `dt` and `kappa`.
pub fn reach_for_formula(
    sys: &LinearSystem,
    x0: &Zonotope,
    u: &InputSchedule,
    phi: &StlFormula,
    dt: f64,
    kappa: usize,
) -> Result<ReachSequence> {
    validate_inputs(sys, x0, u, phi)?;
    reach_sequence_scheduled(sys, x0, u, &ReachParams::with_steps(dt, steps_for(phi, dt)?, kappa)?)
}

/// Steps covering the horizon and every literal of `phi` and its negation.
fn steps_for(phi: &StlFormula, dt: f64) -> Result<usize> {
    let a = compile_formula(phi, dt)?.steps;
    let b = compile_formula(&negate(phi), dt)?.steps;
    let h = formula_horizon(phi) / dt;
    let hs = (h - 1e-9 * h.max(1.0)).ceil().max(0.0) as usize;
    Ok(a.max(b).max(hs).max(1))
}

fn validate_inputs(sys: &LinearSystem, x0: &Zonotope, u: &InputSchedule, phi: &StlFormula) -> Result<()> {
    check_dim("initial set", sys.dim(), x0.dim())?;
    check_dim("input set", sys.num_inputs(), u.dim())?;
    phi.check_dims(sys.dim())
}

enum StepOutcome {
    Safe(UnsafeList),
    Unsafe {
        trajectory: Trajectory,
        alpha: DVector<f64>,
        unsafe_list: UnsafeList,
        negated: UnsafeList,
    },
    Refine,
}

struct Runner<'a> {
    sys: &'a LinearSystem,
    x0: &'a Zonotope,
    u: &'a InputSchedule,
    phi: &'a StlFormula,
    neg: StlFormula,
    cfg: VerifierConfig,
}

impl Runner<'_> {
    fn step(&self, dt: f64, kappa: usize, rec: &mut IterationRecord) -> Result<StepOutcome> {
        let steps = steps_for(self.phi, dt)?;
        let seq = reach_sequence_scheduled(self.sys, self.x0, self.u, &ReachParams::with_steps(dt, steps, kappa)?)?;
        rec.steps = steps;
        rec.factor_dim = seq.factor_dim();
        let (phi_r, neg_r) = if self.cfg.pre_evaluate {
            (pre_evaluate_predicates(&seq, self.phi)?, pre_evaluate_predicates(&seq, &self.neg)?)
        } else {
            (self.phi.clone(), self.neg.clone())
        };
        let mut tree_phi = compile_formula(&phi_r, dt)?.tree;
        let mut tree_neg = compile_formula(&neg_r, dt)?.tree;
        if self.cfg.pre_evaluate {
            tree_phi = pre_evaluate_local(&seq, &tree_phi)?;
            tree_neg = pre_evaluate_local(&seq, &tree_neg)?;
        }
        match self.cfg.method {
            Method::Wholeset => {
                if wholeset_tree(&seq, &tree_phi)? {
                    return Ok(StepOutcome::Safe(UnsafeList::empty(seq.factor_dim())));
                }
                if wholeset_tree(&seq, &tree_neg)? {
                    let alpha = DVector::zeros(seq.factor_dim());
                    return self.validate(&seq, alpha, UnsafeList::empty(0), UnsafeList::empty(0), rec);
                }
                rec.note = Some("whole-set check failed".into());
                Ok(StepOutcome::Refine)
            }
            Method::Factor => {
                let mc = self.cfg.model_check_config();
                let l_phi = if self.cfg.falsify_only {
                    UnsafeList::empty(seq.factor_dim())
                } else {
                    let t0 = Instant::now();
                    let l_phi = unsafe_factors(&seq, &tree_phi, &mc)?;
                    rec.unsafe_polytopes = l_phi.len();
                    log::debug!("unsafe list: {} polytopes in {:.3}s", l_phi.len(), t0.elapsed().as_secs_f64());
                    if l_phi.is_empty() {
                        return Ok(StepOutcome::Safe(l_phi));
                    }
                    l_phi
                };
                let t0 = Instant::now();
                let l_neg = unsafe_factors(&seq, &tree_neg, &mc)?;
                rec.negated_polytopes = Some(l_neg.len());
                log::debug!("negated list: {} polytopes in {:.3}s", l_neg.len(), t0.elapsed().as_secs_f64());
                let milp = CounterexampleMilp::new(seq.factor_dim(), l_neg.polytopes.clone())?
                    .with_epsilon(self.cfg.epsilon)
                    .with_node_cap(self.cfg.node_cap);
                let (outcome, stats) = milp.solve_with_stats()?;
                rec.milp_nodes = Some(stats.nodes);
                match outcome {
                    MilpOutcome::Feasible(sol) => self.validate(&seq, sol.alpha, l_phi, l_neg, rec),
                    MilpOutcome::Infeasible => Ok(StepOutcome::Refine),
                }
            }
        }
    }

    fn validate(
        &self,
        seq: &ReachSequence,
        alpha: DVector<f64>,
        unsafe_list: UnsafeList,
        negated: UnsafeList,
        rec: &mut IterationRecord,
    ) -> Result<StepOutcome> {
        let trajectory = counterexample_trajectory(self.sys, self.x0, seq, &alpha, self.cfg.substeps)?;
        if monitor_trace(self.phi, &trajectory.to_trace())? {
            rec.note = Some("counterexample candidate satisfies the specification; refining".into());
            log::info!("counterexample candidate rejected by the monitor at dt = {}", seq.dt);
            return Ok(StepOutcome::Refine);
        }
        Ok(StepOutcome::Unsafe {
            trajectory,
            alpha,
            unsafe_list,
            negated,
        })
    }
}

/// Runs the refinement loop. Invalid inputs are errors; failures inside an
/// iteration end the run with an `unknown` verdict and a diagnostic.
pub fn verify(
    sys: &LinearSystem,
    x0: &Zonotope,
    u: &InputSchedule,
    phi: &StlFormula,
    cfg: &VerifierConfig,
) -> Result<Verdict> {
    validate_inputs(sys, x0, u, phi)?;
    if cfg.max_iterations == 0 {
        return Err(Error::InvalidParameter("max_iterations must be at least 1".into()));
    }
    let horizon = formula_horizon(phi);
    let mut dt = match cfg.initial_dt {
        Some(d) if d > 0.0 && d.is_finite() => d,
        Some(d) => return Err(Error::InvalidParameter(format!("initial time step must be positive, got {d}"))),
        None if horizon > 0.0 => horizon,
        None => 1.0,
    };
    let runner = Runner {
        sys,
        x0,
        u,
        phi,
        neg: negate(phi),
        cfg: *cfg,
    };
    let mut verdict = Verdict {
        result: VerdictKind::Unknown,
        iterations: 0,
        dt,
        kappa: 0,
        counterexample: None,
        counterexample_factors: None,
        unsafe_factors: None,
        safe_complement: None,
        history: Vec::new(),
        diagnostics: Vec::new(),
    };
    for it in 1..=cfg.max_iterations {
        let start = Instant::now();
        verdict.iterations = it;
        verdict.dt = dt;
        let kappa = match cfg.kappa {
            Some(k) => k,
            None => match tune_truncation_order(&sys.a, dt, cfg.kappa_cap) {
                Ok(k) => k,
                Err(Error::OrderCap(cap)) => {
                    // The series does not settle at this step size; a smaller step will.
                    verdict.history.push(IterationRecord {
                        dt,
                        kappa: cap,
                        steps: 0,
                        factor_dim: 0,
                        unsafe_polytopes: 0,
                        negated_polytopes: None,
                        milp_nodes: None,
                        seconds: start.elapsed().as_secs_f64(),
                        note: Some(format!("truncation order exceeds {cap}; refining")),
                    });
                    dt /= 2.0;
                    continue;
                }
                Err(e) => {
                    verdict.diagnostics.push(format!("iteration {it}: {e}"));
                    return Ok(verdict);
                }
            },
        };
        verdict.kappa = kappa;
        let mut rec = IterationRecord {
            dt,
            kappa,
            steps: 0,
            factor_dim: 0,
            unsafe_polytopes: 0,
            negated_polytopes: None,
            milp_nodes: None,
            seconds: 0.0,
            note: None,
        };
        let outcome = runner.step(dt, kappa, &mut rec);
        rec.seconds = start.elapsed().as_secs_f64();
        log::info!(
            "iteration {it}: dt = {dt}, kappa = {kappa}, unsafe polytopes = {}, {:.3}s",
            rec.unsafe_polytopes,
            rec.seconds
        );
        verdict.history.push(rec);
        match outcome {
            Ok(StepOutcome::Safe(list)) => {
                verdict.result = VerdictKind::Safe;
                verdict.unsafe_factors = Some(list);
                return Ok(verdict);
            }
            Ok(StepOutcome::Unsafe {
                trajectory,
                alpha,
                unsafe_list,
                negated,
            }) => {
                verdict.result = VerdictKind::Unsafe;
                verdict.counterexample = Some(trajectory);
                verdict.counterexample_factors = Some(alpha);
                verdict.unsafe_factors = Some(unsafe_list);
                verdict.safe_complement = Some(negated);
                return Ok(verdict);
            }
            Ok(StepOutcome::Refine) => {}
            Err(e) => {
                verdict.diagnostics.push(format!("iteration {it}: {e}"));
                return Ok(verdict);
            }
        }
        dt /= 2.0;
    }
    if cfg.method == Method::Wholeset && verdict.history.iter().any(|r| r.steps > 0) {
        // The whole-set check treats every unproven step as a violation.
        verdict.result = VerdictKind::Unsafe;
        verdict
            .diagnostics
            .push("whole-set check failed at every tried time step; no counterexample".into());
        return Ok(verdict);
    }
    verdict
        .diagnostics
        .push(format!("no verdict after {} iterations", cfg.max_iterations));
    Ok(verdict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stl::parse_stl;
    use nalgebra::DMatrix;

    fn decay() -> (LinearSystem, Zonotope, InputSchedule) {
        let sys = LinearSystem::new(DMatrix::from_row_slice(1, 1, &[-1.0]), DMatrix::identity(1, 1)).unwrap();
        let x0 = Zonotope::from_bounds(&[0.9], &[1.1]).unwrap();
        let u = InputSchedule::constant(Zonotope::from_bounds(&[-0.05], &[0.05]).unwrap());
        (sys, x0, u)
    }

    #[test]
    fn true_is_safe_immediately() {
        let (sys, x0, u) = decay();
        let v = verify(&sys, &x0, &u, &StlFormula::True, &VerifierConfig::default()).unwrap();
        assert_eq!(v.result, VerdictKind::Safe);
        assert_eq!(v.iterations, 1);
    }

    #[test]
    fn violated_at_start_is_unsafe() {
        let (sys, x0, u) = decay();
        let v = verify(&sys, &x0, &u, &parse_stl("x1 < 0").unwrap(), &VerifierConfig::default()).unwrap();
        assert_eq!(v.result, VerdictKind::Unsafe);
        assert_eq!(v.iterations, 1);
        let tr = v.counterexample.unwrap();
        assert!((0.9..=1.1).contains(&tr.states[0][0]));
    }

    #[test]
    fn decay_reaches_band() {
        let (sys, x0, u) = decay();
        let v = verify(&sys, &x0, &u, &parse_stl("F[0,3] x1 < 0.3").unwrap(), &VerifierConfig::default()).unwrap();
        assert_eq!(v.result, VerdictKind::Safe);
        let w = verify(&sys, &x0, &u, &parse_stl("F[0,1] x1 < 0.3").unwrap(), &VerifierConfig::default()).unwrap();
        assert_eq!(w.result, VerdictKind::Unsafe);
        let tr = w.counterexample.unwrap();
        assert!(!monitor_trace(&parse_stl("F[0,1] x1 < 0.3").unwrap(), &tr.to_trace()).unwrap());
    }

    #[test]
    fn falsify_only_never_claims_safe() {
        let (sys, x0, u) = decay();
        let cfg = VerifierConfig {
            falsify_only: true,
            max_iterations: 3,
            ..VerifierConfig::default()
        };
        let v = verify(&sys, &x0, &u, &parse_stl("F[0,3] x1 < 0.3").unwrap(), &cfg).unwrap();
        assert_eq!(v.result, VerdictKind::Unknown);
        assert_eq!(v.iterations, 3);
        let w = verify(&sys, &x0, &u, &parse_stl("F[0,1] x1 < 0.3").unwrap(), &cfg).unwrap();
        assert_eq!(w.result, VerdictKind::Unsafe);
    }

    #[test]
    fn dimension_errors() {
        let (sys, x0, u) = decay();
        assert!(verify(&sys, &x0, &u, &parse_stl("x2 < 0").unwrap(), &VerifierConfig::default()).is_err());
    }

    #[test]
    fn prediction_of_constants() {
        let (sys, x0, u) = decay();
        let (l, _) = predict_safe_behaviors(&sys, &x0, &u, &StlFormula::True, 0.5, 4).unwrap();
        assert!(l.is_full_box());
        let (l, _) = predict_safe_behaviors(&sys, &x0, &u, &StlFormula::False, 0.5, 4).unwrap();
        assert!(l.is_empty());
    }
}

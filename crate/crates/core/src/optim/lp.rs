//! Dense linear-program front end.
//!
//! Problems are stated as `min c'x  s.t.  A x <= b,  A_eq x = b_eq,  lower <= x <= upper`
//! and handed to the `minilp` dual simplex. Every optimal point is re-checked against the
//! original constraints before it is returned.

use std::panic::{catch_unwind, AssertUnwindSafe};

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};

/// Feasibility tolerance applied to returned optimal points.
pub const FEAS_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub objective: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: DVector<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn is_feasible(&self) -> bool {
        !matches!(self, LpOutcome::Infeasible)
    }
}

impl LinearProgram {
    /// Feasibility problem over free variables with no constraints yet.
    pub fn new(n: usize) -> Self {
        Self {
            objective: DVector::zeros(n),
            a: DMatrix::zeros(0, n),
            b: DVector::zeros(0),
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn with_bounds(mut self, lower: f64, upper: f64) -> Self {
        let n = self.num_vars();
        self.lower = vec![lower; n];
        self.upper = vec![upper; n];
        self
    }

    pub fn with_objective(mut self, c: DVector<f64>) -> Self {
        self.objective = c;
        self
    }

    pub fn with_inequalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a = a;
        self.b = b;
        self
    }

    pub fn with_equalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_eq = a;
        self.b_eq = b;
        self
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        check_dim("lp inequality columns", n, self.a.ncols())?;
        check_dim("lp inequality rows", self.a.nrows(), self.b.len())?;
        check_dim("lp equality columns", n, self.a_eq.ncols())?;
        check_dim("lp equality rows", self.a_eq.nrows(), self.b_eq.len())?;
        check_dim("lp lower bounds", n, self.lower.len())?;
        check_dim("lp upper bounds", n, self.upper.len())?;
        if self
            .objective
            .iter()
            .chain(self.a.iter())
            .chain(self.b.iter())
            .chain(self.a_eq.iter())
            .chain(self.b_eq.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::Solver("non-finite coefficient in linear program".into()));
        }
        Ok(())
    }

    /// Largest constraint violation of `x`, scaled per row by `max(1, |row|_inf)`.
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, row) in self.a.row_iter().enumerate() {
            let scale = row.amax().max(1.0);
            worst = worst.max(((row * x)[0] - self.b[i]) / scale);
        }
        for (i, row) in self.a_eq.row_iter().enumerate() {
            let scale = row.amax().max(1.0);
            worst = worst.max(((row * x)[0] - self.b_eq[i]).abs() / scale);
        }
        for (j, v) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        worst
    }
}

/// Solves a linear program.
pub fn lp_solve(lp: &LinearProgram) -> Result<LpOutcome> {
    lp.validate()?;
    let n = lp.num_vars();
    if lp.lower.iter().zip(&lp.upper).any(|(l, u)| l > u) {
        return Ok(LpOutcome::Infeasible);
    }
    let outcome = catch_unwind(AssertUnwindSafe(|| {
        let mut problem = Problem::new(OptimizationDirection::Minimize);
        let vars: Vec<_> = (0..n)
            .map(|j| problem.add_var(lp.objective[j], (lp.lower[j], lp.upper[j])))
            .collect();
        let add_rows = |problem: &mut Problem, a: &DMatrix<f64>, b: &DVector<f64>, op: ComparisonOp| {
            for (i, row) in a.row_iter().enumerate() {
                let terms: Vec<_> = row
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(j, v)| (vars[j], *v))
                    .collect();
                if terms.is_empty() {
                    // 0 <= b or 0 = b; encode against a fixed zero so the solver sees it.
                    problem.add_constraint(&[(vars[0], 0.0)], op, b[i]);
                } else {
                    problem.add_constraint(terms.as_slice(), op, b[i]);
                }
            }
        };
        if n == 0 {
            return None;
        }
        add_rows(&mut problem, &lp.a, &lp.b, ComparisonOp::Le);
        add_rows(&mut problem, &lp.a_eq, &lp.b_eq, ComparisonOp::Eq);
        Some(match problem.solve() {
            Ok(sol) => Ok((
                DVector::from_iterator(n, vars.iter().map(|v| sol[*v])),
                sol.objective(),
            )),
            Err(e) => Err(e),
        })
    }));

    let result = match outcome {
        Ok(None) => {
            // No variables: feasibility reduces to checking the offsets.
            let ok = lp.b.iter().all(|v| *v >= -FEAS_TOL) && lp.b_eq.iter().all(|v| v.abs() <= FEAS_TOL);
            return Ok(if ok {
                LpOutcome::Optimal {
                    x: DVector::zeros(0),
                    value: 0.0,
                }
            } else {
                LpOutcome::Infeasible
            });
        }
        Ok(Some(r)) => r,
        Err(_) => return Err(Error::Solver("simplex solver panicked".into())),
    };

    match result {
        Ok((x, value)) => {
            // The solver reports some unbounded directions as infinite optimal points.
            if !value.is_finite() || x.iter().any(|v| !v.is_finite()) {
                return Ok(LpOutcome::Unbounded);
            }
            let viol = lp.max_violation(&x);
            if viol > 1e3 * FEAS_TOL {
                return Err(Error::Solver(format!(
                    "optimal point violates constraints by {viol:e}"
                )));
            }
            Ok(LpOutcome::Optimal { x, value })
        }
        Err(minilp::Error::Infeasible) => Ok(LpOutcome::Infeasible),
        Err(minilp::Error::Unbounded) => Ok(LpOutcome::Unbounded),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_lp(rows: &[(f64, f64)], c: f64) -> LinearProgram {
        let a = DMatrix::from_iterator(rows.len(), 1, rows.iter().map(|r| r.0));
        let b = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
        LinearProgram::new(1)
            .with_objective(DVector::from_element(1, c))
            .with_inequalities(a, b)
    }

    #[test]
    fn bounded_minimum() {
        // min x s.t. x >= 1, x <= 2
        let lp = scalar_lp(&[(-1.0, -1.0), (1.0, 2.0)], 1.0);
        match lp_solve(&lp).unwrap() {
            LpOutcome::Optimal { x, value } => {
                assert!((x[0] - 1.0).abs() < 1e-9);
                assert!((value - 1.0).abs() < 1e-9);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn contradictory_bounds_infeasible() {
        let lp = scalar_lp(&[(1.0, -1.0), (-1.0, -1.0)], 0.0);
        assert_eq!(lp_solve(&lp).unwrap(), LpOutcome::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        let lp = scalar_lp(&[(1.0, 2.0)], 1.0);
        assert_eq!(lp_solve(&lp).unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn zero_row_constraint() {
        let lp = LinearProgram::new(2)
            .with_inequalities(DMatrix::zeros(1, 2), DVector::from_element(1, -1.0))
            .with_bounds(-1.0, 1.0);
        assert_eq!(lp_solve(&lp).unwrap(), LpOutcome::Infeasible);
    }
}

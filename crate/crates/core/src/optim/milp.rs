//! Counterexample search over factor space.
//!
//! Finds `alpha` in `[-1, 1]^p` lying strictly outside every polytope of a list, minimizing
//! `|alpha|_1`. "Outside polytope j" means some row `k` of `C_j alpha <= d_j` is violated; the
//! disjunction over rows is the binary choice `lambda_jk` of the big disjunctive program. Branch
//! and bound fixes one row per polytope; each node solves an LP containing only the fixed rows.

use nalgebra::DVector;

use super::{lp_solve, LinearProgram, LpOutcome};
use crate::error::{check_dim, Error, Result};
use crate::setops::Polytope;

/// Default margin used to realize strict row violations.
pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Default limit on explored branch-and-bound nodes.
pub const DEFAULT_NODE_CAP: usize = 50_000;

#[derive(Debug, Clone)]
pub struct CounterexampleMilp {
    pub dim: usize,
    pub polytopes: Vec<Polytope>,
    pub epsilon: f64,
    pub node_cap: usize,
}

/// A feasible point together with the row selected in each polytope.
#[derive(Debug, Clone, PartialEq)]
pub struct MilpSolution {
    pub alpha: DVector<f64>,
    pub objective: f64,
    pub choice: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MilpOutcome {
    Feasible(MilpSolution),
    Infeasible,
}

impl MilpOutcome {
    pub fn solution(&self) -> Option<&MilpSolution> {
        match self {
            MilpOutcome::Feasible(s) => Some(s),
            MilpOutcome::Infeasible => None,
        }
    }
}

/// Per-polytope binaries and disaggregated copies for a given solution.
#[derive(Debug, Clone)]
pub struct Disaggregation {
    pub lambda: Vec<Vec<f64>>,
    pub alpha_hat: Vec<Vec<DVector<f64>>>,
}

#[derive(Debug, Default, Clone, Copy)]
pub struct MilpStats {
    pub nodes: usize,
    pub lps: usize,
}

impl CounterexampleMilp {
    pub fn new(dim: usize, polytopes: Vec<Polytope>) -> Result<Self> {
        for p in &polytopes {
            check_dim("counterexample polytope", dim, p.dim())?;
        }
        Ok(Self {
            dim,
            polytopes,
            epsilon: DEFAULT_EPSILON,
            node_cap: DEFAULT_NODE_CAP,
        })
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_node_cap(mut self, cap: usize) -> Self {
        self.node_cap = cap;
        self
    }

    /// For each polytope, the first row violated by at least `epsilon` (up to a relative
    /// slack of 1e-9), or `None` if some polytope contains `alpha`.
    pub fn check_solution(&self, alpha: &DVector<f64>) -> Option<Vec<usize>> {
        if alpha.len() != self.dim || alpha.iter().any(|a| a.abs() > 1.0 + 1e-9) {
            return None;
        }
        let margin = self.epsilon * (1.0 - 1e-9);
        self.polytopes
            .iter()
            .map(|p| (0..p.num_constraints()).find(|&k| (p.c.row(k) * alpha)[0] - p.d[k] >= margin - 1e-12))
            .collect()
    }

    /// Builds `lambda` and `alpha_hat` satisfying the disaggregated constraints for a
    /// solution with one chosen row per polytope.
    pub fn disaggregate(&self, sol: &MilpSolution) -> Disaggregation {
        let mut lambda = Vec::with_capacity(self.polytopes.len());
        let mut alpha_hat = Vec::with_capacity(self.polytopes.len());
        for (p, &k) in self.polytopes.iter().zip(&sol.choice) {
            let s = p.num_constraints();
            lambda.push((0..s).map(|r| if r == k { 1.0 } else { 0.0 }).collect());
            alpha_hat.push(
                (0..s)
                    .map(|r| {
                        if r == k {
                            sol.alpha.clone()
                        } else {
                            DVector::zeros(self.dim)
                        }
                    })
                    .collect(),
            );
        }
        Disaggregation { lambda, alpha_hat }
    }

    /// Rows that can be violated by some point of the box: `|C_k|_1 >= d_k + epsilon`.
    fn viable_rows(&self) -> Option<Vec<Vec<usize>>> {
        let mut out = Vec::with_capacity(self.polytopes.len());
        for p in &self.polytopes {
            let rows: Vec<usize> = (0..p.num_constraints())
                .filter(|&k| p.c.row(k).lp_norm(1) >= p.d[k] + self.epsilon)
                .collect();
            if rows.is_empty() {
                return None;
            }
            out.push(rows);
        }
        Some(out)
    }

    /// Minimizes `|alpha|_1` subject to the fixed rows, over the split variables
    /// `alpha = a_plus - a_minus` with `a_plus, a_minus in [0, 1]`.
    fn node_lp(&self, fixed: &[(usize, usize)]) -> Result<Option<(DVector<f64>, f64)>> {
        let p = self.dim;
        let mut a = nalgebra::DMatrix::zeros(fixed.len(), 2 * p);
        let mut b = DVector::zeros(fixed.len());
        for (r, &(j, k)) in fixed.iter().enumerate() {
            let row = self.polytopes[j].c.row(k);
            for i in 0..p {
                a[(r, i)] = -row[i];
                a[(r, p + i)] = row[i];
            }
            b[r] = -(self.polytopes[j].d[k] + self.epsilon);
        }
        let lp = LinearProgram::new(2 * p)
            .with_bounds(0.0, 1.0)
            .with_objective(DVector::from_element(2 * p, 1.0))
            .with_inequalities(a, b);
        match lp_solve(&lp)? {
            LpOutcome::Optimal { x, value } => {
                let alpha = DVector::from_iterator(p, (0..p).map(|i| x[i] - x[p + i]));
                Ok(Some((alpha, value)))
            }
            LpOutcome::Infeasible => Ok(None),
            LpOutcome::Unbounded => Err(Error::Solver("bounded node LP reported unbounded".into())),
        }
    }

    /// Exact branch and bound over the row choices.
    pub fn solve(&self) -> Result<MilpOutcome> {
        self.solve_with_stats().map(|(o, _)| o)
    }

    pub fn solve_with_stats(&self) -> Result<(MilpOutcome, MilpStats)> {
        let mut stats = MilpStats::default();
        if self.polytopes.is_empty() {
            return Ok((
                MilpOutcome::Feasible(MilpSolution {
                    alpha: DVector::zeros(self.dim),
                    objective: 0.0,
                    choice: Vec::new(),
                }),
                stats,
            ));
        }
        let viable = match self.viable_rows() {
            Some(v) => v,
            None => return Ok((MilpOutcome::Infeasible, stats)),
        };
        let mut incumbent: Option<MilpSolution> = None;
        // Polytopes with a single viable row are fixed at the root.
        let root: Vec<(usize, usize)> = viable
            .iter()
            .enumerate()
            .filter(|(_, rows)| rows.len() == 1)
            .map(|(j, rows)| (j, rows[0]))
            .collect();
        // Depth-first stack of partial assignments (polytope, row).
        let mut stack: Vec<Vec<(usize, usize)>> = vec![root];
        while let Some(fixed) = stack.pop() {
            stats.nodes += 1;
            if stats.nodes > self.node_cap {
                return Err(Error::NodeCap(self.node_cap));
            }
            stats.lps += 1;
            let (alpha, value) = match self.node_lp(&fixed)? {
                Some(r) => r,
                None => continue,
            };
            if let Some(best) = &incumbent {
                if value >= best.objective - 1e-12 {
                    continue;
                }
            }
            // First polytope not yet strictly left by the relaxation point.
            let mut choice = vec![usize::MAX; self.polytopes.len()];
            for &(j, k) in &fixed {
                choice[j] = k;
            }
            let mut branch_on = None;
            for (j, p) in self.polytopes.iter().enumerate() {
                if choice[j] != usize::MAX {
                    continue;
                }
                match viable[j]
                    .iter()
                    .copied()
                    .find(|&k| (p.c.row(k) * &alpha)[0] - p.d[k] >= self.epsilon * (1.0 - 1e-9))
                {
                    Some(k) => choice[j] = k,
                    None => {
                        branch_on = Some(j);
                        break;
                    }
                }
            }
            match branch_on {
                None => {
                    incumbent = Some(MilpSolution {
                        alpha,
                        objective: value,
                        choice,
                    });
                }
                Some(j) => {
                    let p = &self.polytopes[j];
                    let mut rows: Vec<(usize, f64)> = viable[j]
                        .iter()
                        .map(|&k| {
                            let row = p.c.row(k);
                            let norm = row.norm().max(1e-300);
                            (k, ((row * &alpha)[0] - p.d[k]) / norm)
                        })
                        .collect();
                    // Most promising row is explored first, so it is pushed last.
                    rows.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
                    for (k, _) in rows {
                        let mut child = fixed.clone();
                        child.push((j, k));
                        stack.push(child);
                    }
                }
            }
        }
        Ok((
            match incumbent {
                Some(s) => MilpOutcome::Feasible(s),
                None => MilpOutcome::Infeasible,
            },
            stats,
        ))
    }
}

/// Point of `[-1, 1]^dim` strictly outside every polytope with minimal 1-norm, if any.
pub fn find_counterexample(
    polytopes: &[Polytope],
    dim: usize,
    epsilon: f64,
    node_cap: usize,
) -> Result<Option<DVector<f64>>> {
    let milp = CounterexampleMilp::new(dim, polytopes.to_vec())?
        .with_epsilon(epsilon)
        .with_node_cap(node_cap);
    Ok(milp.solve()?.solution().map(|s| s.alpha.clone()))
}

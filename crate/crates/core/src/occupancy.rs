//! Set-based prediction: the states a system may occupy while satisfying a specification.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{check_dim, Result};
use crate::modelcheck::UnsafeList;
use crate::optim::{lp_solve, LinearProgram, LpOutcome};
use crate::problem::{rows_of, Rows};
use crate::reach::{InputSchedule, LinearSystem, ReachSequence};
use crate::setops::{Polytope, Zonotope};
use crate::stl::StlFormula;
use crate::verify::predict_safe_behaviors;

/// Reach sequence together with the factor polytopes whose behaviours may satisfy the specification.
#[derive(Debug, Clone)]
pub struct Occupancy {
    pub seq: ReachSequence,
    pub legal: UnsafeList,
}

#[derive(Debug, Clone, Serialize)]
pub struct ZonotopeJson {
    pub c: Vec<f64>,
    #[serde(rename = "G")]
    pub g: Rows,
    /// Number of leading generators scaled by the factor vector.
    pub dependent: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PolytopeJson {
    #[serde(rename = "C")]
    pub c: Rows,
    pub d: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OccupancyStepJson {
    pub t_start: f64,
    pub t_end: f64,
    pub zonotope: ZonotopeJson,
    pub polytopes: Vec<PolytopeJson>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OccupancyJson {
    pub dt: f64,
    pub kappa: usize,
    pub factor_dim: usize,
    pub steps: Vec<OccupancyStepJson>,
}

impl Occupancy {
    pub fn compute(
        sys: &LinearSystem,
        x0: &Zonotope,
        u: &InputSchedule,
        phi: &StlFormula,
        dt: f64,
        kappa: usize,
    ) -> Result<Self> {
        let (legal, seq) = predict_safe_behaviors(sys, x0, u, phi, dt, kappa)?;
        Ok(Self { seq, legal })
    }

    /// Whether `q` (given on the coordinates `dims`) lies in the occupancy of the set with
    /// literal index `j` (see [`ReachSequence::set_at_index`]).
    pub fn contains(&self, j: usize, dims: &[usize], q: &DVector<f64>) -> Result<bool> {
        check_dim("query point", dims.len(), q.len())?;
        let Some((z, dep)) = self.seq.set_at_index(j) else {
            return Ok(false);
        };
        let p = self.legal.factor_dim;
        let ind = z.num_generators() - dep;
        let nv = p + ind;
        let mut eq = DMatrix::zeros(dims.len(), nv);
        let mut rhs = DVector::zeros(dims.len());
        for (r, &i) in dims.iter().enumerate() {
            for k in 0..dep {
                eq[(r, k)] = z.generators[(i, k)];
            }
            for k in 0..ind {
                eq[(r, p + k)] = z.generators[(i, dep + k)];
            }
            rhs[r] = q[r] - z.center[i];
        }
        for poly in &self.legal.polytopes {
            let mut a = DMatrix::zeros(poly.c.nrows(), nv);
            a.columns_mut(0, p).copy_from(&poly.c);
            let lp = LinearProgram::new(nv)
                .with_inequalities(a, poly.d.clone())
                .with_equalities(eq.clone(), rhs.clone())
                .with_bounds(-1.0, 1.0);
            if matches!(lp_solve(&lp)?, LpOutcome::Optimal { .. }) {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Per-interval zonotopes `R(tau_i)` with the factor polytopes.
    pub fn to_json(&self) -> OccupancyJson {
        let polys: Vec<PolytopeJson> = self.legal.polytopes.iter().map(polytope_json).collect();
        let steps = self
            .seq
            .rtau
            .iter()
            .zip(&self.seq.dep_tau)
            .enumerate()
            .map(|(i, (z, &dep))| OccupancyStepJson {
                t_start: i as f64 * self.seq.dt,
                t_end: (i + 1) as f64 * self.seq.dt,
                zonotope: ZonotopeJson {
                    c: z.center.iter().copied().collect(),
                    g: rows_of(&z.generators),
                    dependent: dep,
                },
                polytopes: polys.clone(),
            })
            .collect();
        OccupancyJson {
            dt: self.seq.dt,
            kappa: self.seq.kappa,
            factor_dim: self.legal.factor_dim,
            steps,
        }
    }
}

fn polytope_json(p: &Polytope) -> PolytopeJson {
    PolytopeJson {
        c: rows_of(&p.c),
        d: p.d.iter().copied().collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reach::InputSchedule;
    use crate::stl::parse_stl;

    fn scalar() -> (LinearSystem, Zonotope, InputSchedule) {
        let sys = LinearSystem::new(DMatrix::from_element(1, 1, 0.0), DMatrix::from_element(1, 1, 1.0)).unwrap();
        let x0 = Zonotope::new(DVector::from_element(1, 0.0), DMatrix::from_element(1, 1, 1.0)).unwrap();
        let u = InputSchedule::constant(Zonotope::new(DVector::zeros(1), DMatrix::zeros(1, 0)).unwrap());
        (sys, x0, u)
    }

    #[test]
    fn occupancy_cut_by_specification() {
        let (sys, x0, u) = scalar();
        let phi = parse_stl("G[0,1] x1 <= 0.5").unwrap();
        let occ = Occupancy::compute(&sys, &x0, &u, &phi, 0.5, 4).unwrap();
        let dims = [0];
        assert!(occ.contains(0, &dims, &DVector::from_element(1, 0.2)).unwrap());
        assert!(occ.contains(0, &dims, &DVector::from_element(1, -0.9)).unwrap());
        assert!(!occ.contains(0, &dims, &DVector::from_element(1, 0.8)).unwrap());
        assert!(!occ.contains(2, &dims, &DVector::from_element(1, 0.8)).unwrap());
    }

    #[test]
    fn json_has_one_entry_per_interval() {
        let (sys, x0, u) = scalar();
        let phi = parse_stl("G[0,1] x1 <= 0.5").unwrap();
        let occ = Occupancy::compute(&sys, &x0, &u, &phi, 0.5, 4).unwrap();
        let js = occ.to_json();
        assert_eq!(js.steps.len(), occ.seq.steps());
        assert_eq!(js.steps[0].zonotope.c.len(), 1);
        assert!(!js.steps[0].polytopes.is_empty());
        let text = serde_json::to_string(&js).unwrap();
        assert!(text.contains("\"G\"") && text.contains("\"C\""));
    }
}

use nalgebra::{DMatrix, DVector, RowDVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result};
use crate::optim::{lp_solve, LinearProgram, LpOutcome};

/// Halfspace representation `{ x | C x <= d }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polytope {
    pub c: DMatrix<f64>,
    pub d: DVector<f64>,
}

/// Optional common box `[lo, hi]^n` the polytope is implicitly intersected with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxBounds {
    pub lo: f64,
    pub hi: f64,
}

impl BoxBounds {
    pub const UNIT: BoxBounds = BoxBounds { lo: -1.0, hi: 1.0 };
}

impl Polytope {
    pub fn new(c: DMatrix<f64>, d: DVector<f64>) -> Result<Self> {
        check_dim("polytope offsets", c.nrows(), d.len())?;
        Ok(Self { c, d })
    }

    /// The whole space (no constraints).
    pub fn full_space(n: usize) -> Self {
        Self {
            c: DMatrix::zeros(0, n),
            d: DVector::zeros(0),
        }
    }

    /// Single halfspace `a' x <= b`.
    pub fn halfspace(a: &[f64], b: f64) -> Self {
        Self {
            c: DMatrix::from_row_slice(1, a.len(), a),
            d: DVector::from_element(1, b),
        }
    }

    /// `{ x | lo <= x <= hi }` written as `2n` halfspaces.
    pub fn from_box(n: usize, bounds: BoxBounds) -> Self {
        let mut c = DMatrix::zeros(2 * n, n);
        let mut d = DVector::zeros(2 * n);
        for i in 0..n {
            c[(2 * i, i)] = 1.0;
            d[2 * i] = bounds.hi;
            c[(2 * i + 1, i)] = -1.0;
            d[2 * i + 1] = -bounds.lo;
        }
        Self { c, d }
    }

    /// A canonical empty polytope in `n` dimensions.
    pub fn empty(n: usize) -> Self {
        Self {
            c: DMatrix::zeros(1, n),
            d: DVector::from_element(1, -1.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.c.ncols()
    }

    pub fn num_constraints(&self) -> usize {
        self.c.nrows()
    }

    pub fn row(&self, k: usize) -> RowDVector<f64> {
        self.c.row(k).into_owned()
    }

    /// Exact intersection by stacking constraints.
    pub fn intersection(&self, other: &Polytope) -> Result<Polytope> {
        check_dim("polytope intersection", self.dim(), other.dim())?;
        let s1 = self.num_constraints();
        let s2 = other.num_constraints();
        let mut c = DMatrix::zeros(s1 + s2, self.dim());
        if s1 > 0 {
            c.rows_mut(0, s1).copy_from(&self.c);
        }
        if s2 > 0 {
            c.rows_mut(s1, s2).copy_from(&other.c);
        }
        let mut d = DVector::zeros(s1 + s2);
        d.rows_mut(0, s1).copy_from(&self.d);
        d.rows_mut(s1, s2).copy_from(&other.d);
        Ok(Polytope { c, d })
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        x.len() == self.dim() && (&self.c * x - &self.d).iter().all(|v| *v <= tol)
    }

    /// Scales every row to unit Euclidean norm. Rows that are numerically zero are either
    /// dropped (trivially satisfied) or turn the result into the canonical empty polytope.
    pub fn normalized(&self) -> Polytope {
        let n = self.dim();
        let mut rows = Vec::new();
        let mut offs = Vec::new();
        for k in 0..self.num_constraints() {
            let row = self.c.row(k);
            let norm = row.norm();
            if norm < 1e-13 {
                if self.d[k] < -1e-12 {
                    return Polytope::empty(n);
                }
                continue;
            }
            rows.push(row / norm);
            offs.push(self.d[k] / norm);
        }
        Polytope {
            c: if rows.is_empty() {
                DMatrix::zeros(0, n)
            } else {
                DMatrix::from_rows(&rows)
            },
            d: DVector::from_vec(offs),
        }
    }

    fn feasibility_lp(&self, bounds: Option<BoxBounds>) -> LinearProgram {
        let lp = LinearProgram::new(self.dim()).with_inequalities(self.c.clone(), self.d.clone());
        match bounds {
            Some(b) => lp.with_bounds(b.lo, b.hi),
            None => lp,
        }
    }

    /// Emptiness by one LP feasibility problem.
    pub fn is_empty(&self) -> Result<bool> {
        self.is_empty_within(None)
    }

    /// Emptiness of the polytope intersected with an optional box.
    pub fn is_empty_within(&self, bounds: Option<BoxBounds>) -> Result<bool> {
        if let Some(b) = bounds {
            // Row-wise box bound check before paying for an LP.
            for k in 0..self.num_constraints() {
                let row = self.c.row(k);
                let min: f64 = row.iter().map(|a| if *a >= 0.0 { a * b.lo } else { a * b.hi }).sum();
                if min > self.d[k] + 1e-12 {
                    return Ok(true);
                }
            }
        }
        if self.num_constraints() == 0 {
            return Ok(false);
        }
        Ok(!lp_solve(&self.feasibility_lp(bounds))?.is_feasible())
    }

    /// Removes constraints that can be dropped without enlarging the set.
    pub fn remove_redundant(&self) -> Result<Polytope> {
        self.remove_redundant_within(None)
    }

    /// Redundancy removal relative to the polytope intersected with an optional box.
    /// Rows implied by the box alone are dropped as well.
    pub fn remove_redundant_within(&self, bounds: Option<BoxBounds>) -> Result<Polytope> {
        let n = self.dim();
        if self.is_empty_within(bounds)? {
            return Ok(Polytope::empty(n));
        }
        let mut keep: Vec<bool> = vec![true; self.num_constraints()];
        // Exact duplicates first.
        for k in 0..self.num_constraints() {
            for j in (k + 1)..self.num_constraints() {
                if keep[j] && self.c.row(k) == self.c.row(j) {
                    if self.d[j] <= self.d[k] {
                        keep[k] = false;
                        break;
                    } else {
                        keep[j] = false;
                    }
                }
            }
        }
        for k in 0..self.num_constraints() {
            if !keep[k] {
                continue;
            }
            let row = self.c.row(k);
            let tol = 1e-9 * self.d[k].abs().max(1.0);
            if let Some(b) = bounds {
                let max: f64 = row.iter().map(|a| if *a >= 0.0 { a * b.hi } else { a * b.lo }).sum();
                if max <= self.d[k] + tol {
                    keep[k] = false;
                    continue;
                }
            }
            let others: Vec<usize> = (0..self.num_constraints()).filter(|&j| j != k && keep[j]).collect();
            let lp = Polytope {
                c: self.c.select_rows(others.iter()),
                d: DVector::from_iterator(others.len(), others.iter().map(|&j| self.d[j])),
            }
            .feasibility_lp(bounds)
            .with_objective(-row.transpose());
            match lp_solve(&lp)? {
                LpOutcome::Optimal { value, .. } => {
                    if -value <= self.d[k] + tol {
                        keep[k] = false;
                    }
                }
                LpOutcome::Unbounded => {}
                LpOutcome::Infeasible => {
                    // Cannot happen for a nonempty polytope; keep the row.
                }
            }
        }
        let idx: Vec<usize> = (0..keep.len()).filter(|&k| keep[k]).collect();
        Ok(Polytope {
            c: self.c.select_rows(idx.iter()),
            d: DVector::from_iterator(idx.len(), idx.iter().map(|&k| self.d[k])),
        })
    }

    /// Whether `self ∩ box` is contained in `other` (both read within the same box).
    pub fn is_subset_within(&self, other: &Polytope, bounds: Option<BoxBounds>) -> Result<bool> {
        check_dim("polytope containment", self.dim(), other.dim())?;
        let base = self.feasibility_lp(bounds);
        for k in 0..other.num_constraints() {
            let row = other.c.row(k);
            let tol = 1e-9 * other.d[k].abs().max(1.0);
            if let Some(b) = bounds {
                let max: f64 = row.iter().map(|a| if *a >= 0.0 { a * b.hi } else { a * b.lo }).sum();
                if max <= other.d[k] + tol {
                    continue;
                }
            }
            let lp = base.clone().with_objective(-row.transpose());
            match lp_solve(&lp)? {
                LpOutcome::Optimal { value, .. } => {
                    if -value > other.d[k] + tol {
                        return Ok(false);
                    }
                }
                LpOutcome::Unbounded => return Ok(false),
                LpOutcome::Infeasible => return Ok(true),
            }
        }
        Ok(true)
    }

    /// Appends explicit box rows.
    pub fn with_box(&self, bounds: BoxBounds) -> Polytope {
        self.intersection(&Polytope::from_box(self.dim(), bounds))
            .expect("same dimension")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(rows: usize, c: &[f64], d: &[f64]) -> Polytope {
        Polytope::new(DMatrix::from_row_slice(rows, c.len() / rows, c), DVector::from_column_slice(d)).unwrap()
    }

    fn unit_box() -> Polytope {
        Polytope::from_box(2, BoxBounds::UNIT)
    }

    #[test]
    fn intersection_with_full_space() {
        let p = unit_box();
        let q = p.intersection(&Polytope::full_space(2)).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn box_halved() {
        let h = unit_box().intersection(&Polytope::halfspace(&[1.0, 0.0], 0.0)).unwrap();
        assert!(h.contains(&DVector::from_vec(vec![-0.5, 0.5]), 0.0));
        assert!(!h.contains(&DVector::from_vec(vec![0.5, 0.5]), 0.0));
    }

    #[test]
    fn emptiness() {
        assert!(poly(2, &[1.0, -1.0], &[-1.0, -1.0]).is_empty().unwrap());
        assert!(!Polytope::full_space(3).is_empty().unwrap());
        assert!(!unit_box().is_empty().unwrap());
    }

    #[test]
    fn duplicate_rows_collapse() {
        let p = poly(3, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0], &[1.0, 1.0, 1.0]);
        let r = p.remove_redundant().unwrap();
        assert_eq!(r.num_constraints(), 2);
    }

    #[test]
    fn loose_row_removed() {
        let p = unit_box().intersection(&Polytope::halfspace(&[1.0, 0.0], 5.0)).unwrap();
        let r = p.remove_redundant().unwrap();
        assert_eq!(r.num_constraints(), 4);
        assert!(!(0..r.num_constraints()).any(|k| r.d[k] == 5.0));
    }

    #[test]
    fn box_rows_redundant_within_box() {
        let p = Polytope::halfspace(&[1.0, 1.0], 0.5).with_box(BoxBounds::UNIT);
        let r = p.remove_redundant_within(Some(BoxBounds::UNIT)).unwrap();
        assert_eq!(r.num_constraints(), 1);
    }

    #[test]
    fn subset_within_box() {
        let small = Polytope::halfspace(&[1.0, 0.0], -0.5);
        let big = Polytope::halfspace(&[1.0, 0.0], 0.0);
        assert!(small.is_subset_within(&big, Some(BoxBounds::UNIT)).unwrap());
        assert!(!big.is_subset_within(&small, Some(BoxBounds::UNIT)).unwrap());
        // Everything in the box satisfies x1 <= 2.
        let loose = Polytope::halfspace(&[1.0, 0.0], 2.0);
        assert!(Polytope::full_space(2).is_subset_within(&loose, Some(BoxBounds::UNIT)).unwrap());
    }

    #[test]
    fn normalization_drops_zero_rows() {
        let p = poly(2, &[0.0, 0.0, 2.0, 0.0], &[1.0, 4.0]);
        let n = p.normalized();
        assert_eq!(n.num_constraints(), 1);
        assert_eq!(n.d[0], 2.0);
        let e = poly(1, &[0.0, 0.0], &[-1.0]).normalized();
        assert!(e.is_empty().unwrap());
    }
}

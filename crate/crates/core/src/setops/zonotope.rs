use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Interval, Polytope};
use crate::error::{check_dim, Error, Result};
use crate::optim::{lp_solve, LinearProgram, LpOutcome};

/// Slack granted to intersection and membership LPs.
pub const SET_TOL: f64 = 1e-9;

/// `{ c + G a | a in [-1, 1]^gamma }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zonotope {
    pub center: DVector<f64>,
    pub generators: DMatrix<f64>,
}

impl Zonotope {
    pub fn new(center: DVector<f64>, generators: DMatrix<f64>) -> Result<Self> {
        check_dim("zonotope generator rows", center.len(), generators.nrows())?;
        Ok(Self { center, generators })
    }

    pub fn point(p: DVector<f64>) -> Self {
        let n = p.len();
        Self {
            center: p,
            generators: DMatrix::zeros(n, 0),
        }
    }

    /// Axis-aligned box `[lo, hi]` as a zonotope.
    pub fn from_bounds(lo: &[f64], hi: &[f64]) -> Result<Self> {
        Ok(Interval::new(DVector::from_column_slice(lo), DVector::from_column_slice(hi))?.to_zonotope())
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn num_generators(&self) -> usize {
        self.generators.ncols()
    }

    /// `c + G a` for a factor vector.
    pub fn point_at(&self, alpha: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("zonotope factor vector", self.num_generators(), alpha.len())?;
        Ok(&self.center + &self.generators * alpha)
    }

    /// Exact image under a linear map.
    pub fn linear_map(&self, m: &DMatrix<f64>) -> Result<Zonotope> {
        check_dim("linear map columns", self.dim(), m.ncols())?;
        Ok(Zonotope {
            center: m * &self.center,
            generators: m * &self.generators,
        })
    }

    /// Exact Minkowski sum; generators of `self` come first.
    pub fn minkowski_sum(&self, other: &Zonotope) -> Result<Zonotope> {
        check_dim("minkowski sum", self.dim(), other.dim())?;
        Ok(Zonotope {
            center: &self.center + &other.center,
            generators: hcat(&[&self.generators, &other.generators]),
        })
    }

    pub fn translate(&self, v: &DVector<f64>) -> Result<Zonotope> {
        check_dim("translation", self.dim(), v.len())?;
        Ok(Zonotope {
            center: &self.center + v,
            generators: self.generators.clone(),
        })
    }

    /// Zonotope enclosing `conv(self, other)`.
    ///
    /// Generator layout: `[0.5(G1 + G2') 0.5(G1 - G2') 0.5(c1 - c2) G2'']`, where `Z1` is the
    /// operand with fewer generators and `G2'`, `G2''` split the other operand's generators
    /// at that count.
    pub fn convex_hull_enclosure(&self, other: &Zonotope) -> Result<Zonotope> {
        check_dim("convex hull", self.dim(), other.dim())?;
        let (z1, z2) = if self.num_generators() > other.num_generators() {
            (other, self)
        } else {
            (self, other)
        };
        let g1 = z1.num_generators();
        let g2_head = z2.generators.columns(0, g1);
        let g2_tail = z2.generators.columns(g1, z2.num_generators() - g1);
        let sum = (&z1.generators + &g2_head) * 0.5;
        let diff = (&z1.generators - &g2_head) * 0.5;
        let dc = DMatrix::from_column_slice(self.dim(), 1, ((&z1.center - &z2.center) * 0.5).as_slice());
        Ok(Zonotope {
            center: (&z1.center + &z2.center) * 0.5,
            generators: hcat(&[&sum, &diff, &dc, &g2_tail.into_owned()]),
        })
    }

    /// Tightest axis-aligned box.
    pub fn interval_enclosure(&self) -> Interval {
        let mut r = DVector::zeros(self.dim());
        for col in self.generators.column_iter() {
            r += col.abs();
        }
        Interval {
            lo: &self.center - &r,
            hi: &self.center + &r,
        }
    }

    /// Vertices of the projection onto coordinates `(i, j)`, counter-clockwise.
    pub fn polygon(&self, i: usize, j: usize) -> Result<Vec<[f64; 2]>> {
        let n = self.dim();
        if i >= n || j >= n {
            return Err(Error::InvalidParameter(format!(
                "projection coordinates ({i}, {j}) out of range for dimension {n}"
            )));
        }
        let c = [self.center[i], self.center[j]];
        // Orient every generator into the upper half plane, then walk them by angle.
        let mut gens: Vec<[f64; 2]> = self
            .generators
            .column_iter()
            .map(|g| [g[i], g[j]])
            .filter(|g| g[0] != 0.0 || g[1] != 0.0)
            .map(|g| if g[1] < 0.0 || (g[1] == 0.0 && g[0] < 0.0) { [-g[0], -g[1]] } else { g })
            .collect();
        if gens.is_empty() {
            return Ok(vec![c]);
        }
        gens.sort_by(|a, b| a[1].atan2(a[0]).total_cmp(&b[1].atan2(b[0])));
        let sum = gens.iter().fold([0.0, 0.0], |acc, g| [acc[0] + g[0], acc[1] + g[1]]);
        let mut p = [c[0] + sum[0], c[1] + sum[1]];
        let mut out = Vec::with_capacity(2 * gens.len());
        for s in [-2.0, 2.0] {
            for g in &gens {
                out.push(p);
                p = [p[0] + s * g[0], p[1] + s * g[1]];
            }
        }
        Ok(out)
    }

    /// Zonotope of the interval enclosure.
    pub fn boxed(&self) -> Zonotope {
        self.interval_enclosure().to_zonotope()
    }

    /// Drops all-zero generator columns.
    pub fn compact(&self) -> Zonotope {
        let keep: Vec<usize> = (0..self.num_generators())
            .filter(|&j| self.generators.column(j).iter().any(|v| *v != 0.0))
            .collect();
        Zonotope {
            center: self.center.clone(),
            generators: self.generators.select_columns(keep.iter()),
        }
    }

    /// Whether `x` lies in the zonotope, decided by an LP over the factors.
    pub fn contains_point(&self, x: &DVector<f64>, tol: f64) -> Result<bool> {
        check_dim("membership query", self.dim(), x.len())?;
        Ok(self.membership_residual(x)? <= tol)
    }

    /// Smallest infinity-norm residual `|c + G a - x|` over factors in the unit box.
    pub fn membership_residual(&self, x: &DVector<f64>) -> Result<f64> {
        let n = self.dim();
        let g = self.num_generators();
        let rhs = x - &self.center;
        if g == 0 {
            return Ok(rhs.amax());
        }
        // Variables: [a (g), t]; minimize t s.t. -t <= G a - rhs <= t.
        let mut a = DMatrix::zeros(2 * n, g + 1);
        let mut b = DVector::zeros(2 * n);
        for i in 0..n {
            for j in 0..g {
                a[(i, j)] = self.generators[(i, j)];
                a[(n + i, j)] = -self.generators[(i, j)];
            }
            a[(i, g)] = -1.0;
            a[(n + i, g)] = -1.0;
            b[i] = rhs[i];
            b[n + i] = -rhs[i];
        }
        let mut lower = vec![-1.0; g + 1];
        let mut upper = vec![1.0; g + 1];
        lower[g] = 0.0;
        upper[g] = f64::INFINITY;
        let mut obj = DVector::zeros(g + 1);
        obj[g] = 1.0;
        let lp = LinearProgram {
            objective: obj,
            a,
            b,
            a_eq: DMatrix::zeros(0, g + 1),
            b_eq: DVector::zeros(0),
            lower,
            upper,
        };
        match lp_solve(&lp)? {
            LpOutcome::Optimal { value, .. } => Ok(value.max(0.0)),
            other => Err(Error::Solver(format!("membership LP returned {other:?}"))),
        }
    }

    /// Whether the zonotope meets the polytope `{x | Cx <= d}`.
    pub fn intersects(&self, p: &Polytope) -> Result<bool> {
        check_dim("zonotope/polytope intersection", self.dim(), p.dim())?;
        if p.num_constraints() == 0 {
            return Ok(true);
        }
        let cg = &p.c * &self.generators;
        let rhs = &p.d - &p.c * &self.center;
        if self.num_generators() == 0 {
            return Ok(rhs.iter().all(|v| *v >= -SET_TOL));
        }
        // Cheap rejection: some row separates the interval hull of the factor image.
        for (i, row) in cg.row_iter().enumerate() {
            if -row.iter().map(|v| v.abs()).sum::<f64>() > rhs[i] + SET_TOL {
                return Ok(false);
            }
        }
        let lp = LinearProgram::new(self.num_generators())
            .with_inequalities(cg, rhs.add_scalar(SET_TOL))
            .with_bounds(-1.0, 1.0);
        Ok(lp_solve(&lp)?.is_feasible())
    }

    /// Uniformly random factor vector mapped into the set.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let alpha = DVector::from_fn(self.num_generators(), |_, _| rng.gen_range(-1.0..=1.0));
        &self.center + &self.generators * alpha
    }
}

/// Horizontal concatenation that tolerates zero-column blocks.
pub(crate) fn hcat(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks.first().map(|b| b.nrows()).unwrap_or(0);
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        if b.ncols() > 0 {
            out.columns_mut(at, b.ncols()).copy_from(*b);
        }
        at += b.ncols();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn polygon_of_box_and_parallelogram() {
        let z = Zonotope::from_bounds(&[0.0, 0.0, 5.0], &[2.0, 1.0, 5.0]).unwrap();
        let mut v = z.polygon(0, 1).unwrap();
        assert_eq!(v.len(), 4);
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(v, vec![[0.0, 0.0], [0.0, 1.0], [2.0, 0.0], [2.0, 1.0]]);

        let z = Zonotope::new(
            DVector::from_vec(vec![0.0, 0.0]),
            DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, -1.0]),
        )
        .unwrap();
        let v = z.polygon(0, 1).unwrap();
        assert_eq!(v.len(), 6);
        // Counter-clockwise: positive shoelace area equal to 4 |det| summed over generator pairs.
        let area: f64 = (0..v.len())
            .map(|k| {
                let (a, b) = (v[k], v[(k + 1) % v.len()]);
                a[0] * b[1] - a[1] * b[0]
            })
            .sum::<f64>()
            / 2.0;
        assert!((area - 12.0).abs() < 1e-12, "{area}");
        assert!(z.polygon(0, 2).is_err());
    }

    fn zono(c: &[f64], g_rows: usize, g: &[f64]) -> Zonotope {
        let n = c.len();
        let cols = if n == 0 { 0 } else { g.len() / n };
        assert_eq!(g_rows, n);
        Zonotope::new(DVector::from_column_slice(c), DMatrix::from_row_slice(n, cols, g)).unwrap()
    }

    #[test]
    fn identity_map_unchanged() {
        let z = zono(&[1.0, 2.0], 2, &[1.0, 0.5, 0.0, 2.0]);
        assert_eq!(z.linear_map(&DMatrix::identity(2, 2)).unwrap(), z);
    }

    #[test]
    fn rotation_map() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let z = zono(&[1.0, 0.0], 2, &[1.0, 0.0]);
        let r = z.linear_map(&m).unwrap();
        assert_eq!(r.center, DVector::from_vec(vec![0.0, 1.0]));
        assert_eq!(r.generators, DMatrix::from_row_slice(2, 1, &[0.0, 1.0]));
    }

    #[test]
    fn linear_map_dimension_error() {
        let z = zono(&[1.0, 0.0], 2, &[1.0, 0.0]);
        assert!(z.linear_map(&DMatrix::identity(3, 3)).is_err());
    }

    #[test]
    fn sum_with_point_translates() {
        let z = zono(&[0.0, 1.0], 2, &[1.0, 1.0, 0.0, 1.0]);
        let p = Zonotope::point(DVector::from_vec(vec![2.0, -1.0]));
        let s = z.minkowski_sum(&p).unwrap();
        assert_eq!(s.center, DVector::from_vec(vec![2.0, 0.0]));
        assert_eq!(s.generators, z.generators);
    }

    #[test]
    fn one_dimensional_sum() {
        let a = zono(&[0.0], 1, &[1.0]);
        let b = zono(&[0.0], 1, &[2.0]);
        let s = a.minkowski_sum(&b).unwrap();
        assert_eq!(s.generators, DMatrix::from_row_slice(1, 2, &[1.0, 2.0]));
        let h = s.interval_enclosure();
        assert_eq!((h.lo[0], h.hi[0]), (-3.0, 3.0));
    }

    #[test]
    fn hull_of_identical_sets() {
        let z = zono(&[1.0, -1.0], 2, &[1.0, 0.3, 0.2, 0.5]);
        let h = z.convex_hull_enclosure(&z).unwrap();
        assert_eq!(h.center, z.center);
        assert_eq!(h.generators.columns(0, 2), z.generators.columns(0, 2));
        assert!(h.generators.columns(2, 3).iter().all(|v| *v == 0.0));
        assert!(h.interval_enclosure().hausdorff(&z.interval_enclosure()) < 1e-12);
    }

    #[test]
    fn hull_of_two_points_is_segment() {
        let p = Zonotope::point(DVector::from_vec(vec![1.0, 3.0]));
        let q = Zonotope::point(DVector::from_vec(vec![-1.0, 1.0]));
        let h = p.convex_hull_enclosure(&q).unwrap().compact();
        assert_eq!(h.center, DVector::from_vec(vec![0.0, 2.0]));
        assert_eq!(h.generators, DMatrix::from_row_slice(2, 1, &[1.0, 1.0]));
    }

    #[test]
    fn hull_pads_unequal_generator_counts() {
        let a = zono(&[0.0, 0.0], 2, &[1.0, 0.0]);
        let b = zono(&[2.0, 0.0], 2, &[1.0, 0.0, 0.0, 0.5, 0.0, 1.0]);
        let h = a.convex_hull_enclosure(&b).unwrap();
        assert_eq!(h.num_generators(), 1 + 1 + 1 + 2);
        let h2 = b.convex_hull_enclosure(&a).unwrap();
        assert_eq!(h2.num_generators(), 5);
    }

    #[test]
    fn interval_enclosure_examples() {
        let z = zono(&[0.0], 1, &[1.0, 2.0]);
        let h = z.interval_enclosure();
        assert_eq!((h.lo[0], h.hi[0]), (-3.0, 3.0));
        let p = Zonotope::point(DVector::from_vec(vec![4.0, 5.0]));
        assert_eq!(p.interval_enclosure(), Interval::point(p.center.clone()));
    }

    #[test]
    fn intersects_simple_cases() {
        let z = zono(&[1.0, 1.0], 2, &[1.0, 0.0, 0.0, 1.0]);
        let through_center = Polytope::new(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), DVector::from_vec(vec![2.0])).unwrap();
        assert!(z.intersects(&through_center).unwrap());
        let lo = z.interval_enclosure().lo[0];
        let separated = Polytope::new(DMatrix::from_row_slice(1, 2, &[1.0, 0.0]), DVector::from_vec(vec![lo - 1.0])).unwrap();
        assert!(!z.intersects(&separated).unwrap());
    }

    #[test]
    fn membership_lp() {
        let z = zono(&[0.0, 0.0], 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(z.contains_point(&DVector::from_vec(vec![2.0, 1.0]), 1e-9).unwrap());
        assert!(!z.contains_point(&DVector::from_vec(vec![2.0, -1.0]), 1e-9).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let x = z.sample(&mut rng);
            assert!(z.contains_point(&x, 1e-9).unwrap());
        }
    }
}

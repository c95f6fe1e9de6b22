use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::Zonotope;
use crate::error::{check_dim, Error, Result};

/// Axis-aligned box `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: DVector<f64>,
    pub hi: DVector<f64>,
}

impl Interval {
    pub fn new(lo: DVector<f64>, hi: DVector<f64>) -> Result<Self> {
        check_dim("interval bounds", lo.len(), hi.len())?;
        if lo.iter().zip(hi.iter()).any(|(l, h)| !(l <= h)) {
            return Err(Error::InvalidParameter(
                "interval lower bound exceeds upper bound".into(),
            ));
        }
        Ok(Self { lo, hi })
    }

    pub fn point(p: DVector<f64>) -> Self {
        Self {
            lo: p.clone(),
            hi: p,
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn center(&self) -> DVector<f64> {
        (&self.lo + &self.hi) * 0.5
    }

    pub fn radius(&self) -> DVector<f64> {
        (&self.hi - &self.lo) * 0.5
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(self.hi.iter()))
                .all(|(v, (l, h))| *v >= l - tol && *v <= h + tol)
    }

    /// Zonotope with one axis-aligned generator per nonzero radius entry.
    pub fn to_zonotope(&self) -> Zonotope {
        let rad = self.radius();
        let cols: Vec<usize> = (0..rad.len()).filter(|&i| rad[i] > 0.0).collect();
        let mut g = DMatrix::zeros(rad.len(), cols.len());
        for (k, &i) in cols.iter().enumerate() {
            g[(i, k)] = rad[i];
        }
        Zonotope::new(self.center(), g).expect("consistent by construction")
    }

    /// Hausdorff distance between two boxes (infinity norm).
    pub fn hausdorff(&self, other: &Interval) -> f64 {
        let dl = (&self.lo - &other.lo).amax();
        let dh = (&self.hi - &other.hi).amax();
        dl.max(dh)
    }
}

/// Matrix with elementwise lower and upper bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalMatrix {
    pub lo: DMatrix<f64>,
    pub hi: DMatrix<f64>,
}

impl IntervalMatrix {
    pub fn new(lo: DMatrix<f64>, hi: DMatrix<f64>) -> Result<Self> {
        check_dim("interval matrix rows", lo.nrows(), hi.nrows())?;
        check_dim("interval matrix cols", lo.ncols(), hi.ncols())?;
        if lo.iter().zip(hi.iter()).any(|(l, h)| !(l <= h)) {
            return Err(Error::InvalidParameter(
                "interval matrix lower bound exceeds upper bound".into(),
            ));
        }
        Ok(Self { lo, hi })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            lo: DMatrix::zeros(rows, cols),
            hi: DMatrix::zeros(rows, cols),
        }
    }

    pub fn degenerate(m: DMatrix<f64>) -> Self {
        Self {
            lo: m.clone(),
            hi: m,
        }
    }

    /// Symmetric interval matrix `[-e, e]`.
    pub fn symmetric(e: DMatrix<f64>) -> Self {
        Self { lo: -&e, hi: e }
    }

    /// Interval `[min(s, 0), max(s, 0)]` scaled elementwise by `m`, i.e. `[s, 0] * m`.
    pub fn scalar_range_times(s: f64, m: &DMatrix<f64>) -> Self {
        let a = m * s;
        Self {
            lo: a.map(|v| v.min(0.0)),
            hi: a.map(|v| v.max(0.0)),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.lo.shape()
    }

    pub fn mid(&self) -> DMatrix<f64> {
        (&self.lo + &self.hi) * 0.5
    }

    pub fn rad(&self) -> DMatrix<f64> {
        (&self.hi - &self.lo) * 0.5
    }

    /// Minkowski sum of interval matrices.
    pub fn add(&self, other: &IntervalMatrix) -> Result<Self> {
        check_dim("interval matrix sum rows", self.lo.nrows(), other.lo.nrows())?;
        check_dim("interval matrix sum cols", self.lo.ncols(), other.lo.ncols())?;
        Ok(Self {
            lo: &self.lo + &other.lo,
            hi: &self.hi + &other.hi,
        })
    }

    pub fn scale(&self, s: f64) -> Self {
        if s >= 0.0 {
            Self {
                lo: &self.lo * s,
                hi: &self.hi * s,
            }
        } else {
            Self {
                lo: &self.hi * s,
                hi: &self.lo * s,
            }
        }
    }

    /// Enclosure of `{ M X | M in self }` for a real matrix `X` on the right.
    pub fn mul_real_right(&self, x: &DMatrix<f64>) -> Result<Self> {
        check_dim("interval matrix product", self.lo.ncols(), x.nrows())?;
        let mid = self.mid() * x;
        let rad = self.rad() * x.abs();
        Ok(Self {
            lo: &mid - &rad,
            hi: &mid + &rad,
        })
    }

    /// Enclosure of `{ M v | M in self }` for a real vector.
    pub fn mul_vector(&self, v: &DVector<f64>) -> Result<Interval> {
        check_dim("interval matrix-vector product", self.lo.ncols(), v.len())?;
        let mid = self.mid() * v;
        let rad = self.rad() * v.abs();
        Ok(Interval {
            lo: &mid - &rad,
            hi: &mid + &rad,
        })
    }

    /// Frobenius norm using the largest magnitude of each entry.
    pub fn frobenius_norm(&self) -> f64 {
        self.lo
            .iter()
            .zip(self.hi.iter())
            .map(|(l, h)| {
                let m = l.abs().max(h.abs());
                m * m
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Elementwise largest magnitude.
    pub fn magnitude(&self) -> DMatrix<f64> {
        self.lo.zip_map(&self.hi, |l, h| l.abs().max(h.abs()))
    }

    /// Encloses `{ M x | M in self, x in z }`.
    ///
    /// Splits `M = mid + [-rad, rad]`; the midpoint maps the zonotope exactly and the radius
    /// part is bounded by `rad * (|c| + sum |g_i|)` as a box.
    pub fn mul_zonotope(&self, z: &Zonotope) -> Result<Zonotope> {
        check_dim("interval matrix times zonotope", self.lo.ncols(), z.dim())?;
        let mid = self.mid();
        let rad = self.rad();
        let c = &mid * &z.center;
        let g_mid = &mid * &z.generators;
        let mut reach = z.center.abs();
        for col in z.generators.column_iter() {
            reach += col.abs();
        }
        let r = rad * reach;
        let rows = self.lo.nrows();
        let nz: Vec<usize> = (0..rows).filter(|&i| r[i] > 0.0).collect();
        let mut g = DMatrix::zeros(rows, g_mid.ncols() + nz.len());
        g.columns_mut(0, g_mid.ncols()).copy_from(&g_mid);
        for (k, &i) in nz.iter().enumerate() {
            g[(i, g_mid.ncols() + k)] = r[i];
        }
        Zonotope::new(c, g)
    }

    pub fn contains(&self, m: &DMatrix<f64>, tol: f64) -> bool {
        m.shape() == self.shape()
            && m.iter()
                .zip(self.lo.iter().zip(self.hi.iter()))
                .all(|(v, (l, h))| *v >= l - tol && *v <= h + tol)
    }
}

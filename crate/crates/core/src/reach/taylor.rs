//! Taylor-series quantities of the matrix exponential used by the reachability scheme.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::setops::{hcat, IntervalMatrix, Zonotope};

const MAX_SERIES_TERMS: usize = 2000;

fn check_square(a: &DMatrix<f64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            context: "square system matrix",
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    Ok(())
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
    }
    Ok(())
}

/// `e^{A dt}` by scaling and squaring.
pub fn exp_matrix(a: &DMatrix<f64>, dt: f64) -> Result<DMatrix<f64>> {
    check_square(a)?;
    let phi = (a * dt).exp();
    if phi.iter().any(|v| !v.is_finite()) {
        return Err(Error::Overflow(format!("matrix exponential with dt = {dt}")));
    }
    Ok(phi)
}

/// Remainder `[-E, E]` of the order-`kappa` Taylor series of `e^{A dt}`, with
/// `E = e^{|A| dt} - sum_{j <= kappa} (|A| dt)^j / j!`.
///
/// Evaluated as the tail `sum_{j > kappa}` so that no cancellation occurs.
pub fn exp_remainder(a: &DMatrix<f64>, dt: f64, kappa: usize) -> Result<IntervalMatrix> {
    check_square(a)?;
    check_dt(dt)?;
    let n = a.nrows();
    let m = a.abs() * dt;
    let mut term = DMatrix::<f64>::identity(n, n);
    for j in 1..=kappa {
        term = &term * &m / j as f64;
    }
    let mut tail = DMatrix::<f64>::zeros(n, n);
    let norm = m.iter().fold(0.0_f64, |s, v| s.max(*v)) * n as f64;
    for j in (kappa + 1)..(kappa + 1 + MAX_SERIES_TERMS) {
        term = &term * &m / j as f64;
        if term.iter().any(|v| !v.is_finite()) {
            return Err(Error::Overflow(format!(
                "Taylor remainder for |A| dt with norm {norm:e}"
            )));
        }
        tail += &term;
        let tmax = term.amax();
        if tmax == 0.0 || (j as f64 > norm && tmax <= f64::EPSILON * 1e-3 * tail.amax()) {
            return Ok(IntervalMatrix::symmetric(tail));
        }
    }
    Err(Error::Overflow(format!(
        "Taylor remainder did not converge for norm {norm:e}"
    )))
}

fn is_well_conditioned(a: &DMatrix<f64>) -> bool {
    let lu = a.clone().lu();
    let u = lu.u();
    let diag: Vec<f64> = (0..u.nrows()).map(|i| u[(i, i)].abs()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    max > 0.0 && min > 1e-10 * max
}

/// `sum_{j >= 0} A^j dt^{j+1} / (j+1)!` summed until the terms vanish at machine precision.
fn propagation_series(a: &DMatrix<f64>, dt: f64) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let mut term = DMatrix::<f64>::identity(n, n) * dt;
    let mut sum = term.clone();
    let ad = a * dt;
    for j in 1..MAX_SERIES_TERMS {
        term = &ad * &term / (j + 1) as f64;
        if term.iter().any(|v| !v.is_finite()) {
            return Err(Error::Overflow("propagation matrix series".into()));
        }
        sum += &term;
        let tmax = term.amax();
        if tmax == 0.0 || tmax <= f64::EPSILON * 1e-3 * sum.amax() {
            return Ok(sum);
        }
    }
    Err(Error::Overflow("propagation matrix series did not converge".into()))
}

/// Propagation matrix for constant inputs, `T = A^{-1}(e^{A dt} - I)`.
///
/// Uses the inverse when `A` is well conditioned and `|A dt|` is not small; otherwise the
/// power series, which also covers singular `A`.
pub fn propagation_matrix(a: &DMatrix<f64>, dt: f64) -> Result<DMatrix<f64>> {
    check_square(a)?;
    check_dt(dt)?;
    let n = a.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    if (a * dt).lp_norm(1) <= 1.0 || !is_well_conditioned(a) {
        return propagation_series(a, dt);
    }
    let phi = exp_matrix(a, dt)?;
    let rhs = phi - DMatrix::<f64>::identity(n, n);
    a.clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Solver("singular system matrix in propagation".into()))
}

/// Coefficient `(j^{-j/(j-1)} - j^{-1/(j-1)}) dt^j / j!` of the curvature series.
fn curvature_coefficient(j: usize, dt: f64) -> f64 {
    let jf = j as f64;
    let e = jf - 1.0;
    let mut fact = 1.0;
    for k in 2..=j {
        fact *= k as f64;
    }
    (jf.powf(-jf / e) - jf.powf(-1.0 / e)) * dt.powi(j as i32) / fact
}

/// `T^(o) = sum_{j=2}^{o} [c_j, 0] A^{j-1}` with the curvature coefficients `c_j`.
pub fn taylor_curvature(a: &DMatrix<f64>, dt: f64, order: usize) -> Result<IntervalMatrix> {
    check_square(a)?;
    check_dt(dt)?;
    let n = a.nrows();
    let mut sum = IntervalMatrix::zeros(n, n);
    let mut power = DMatrix::<f64>::identity(n, n);
    for j in 2..=order {
        power = &power * a;
        sum = sum.add(&IntervalMatrix::scalar_range_times(curvature_coefficient(j, dt), &power))?;
    }
    Ok(sum)
}

/// Curvature enclosures `F = T^(kappa) A + E` and `G = T^(kappa+1) + E dt`.
///
/// Each term `[c_j, 0] A^{j-1}` times `A` is evaluated as `[c_j, 0] A^j`, which is the exact
/// interval product for a scalar interval coefficient.
pub fn curvature_matrices(
    a: &DMatrix<f64>,
    dt: f64,
    kappa: usize,
) -> Result<(IntervalMatrix, IntervalMatrix)> {
    if kappa < 2 {
        return Err(Error::InvalidParameter(format!(
            "truncation order must be at least 2, got {kappa}"
        )));
    }
    let e = exp_remainder(a, dt, kappa)?;
    let n = a.nrows();
    let mut f = IntervalMatrix::zeros(n, n);
    let mut power = DMatrix::<f64>::identity(n, n);
    for j in 2..=kappa {
        power = &power * a;
        let a_pow = &power * a;
        f = f.add(&IntervalMatrix::scalar_range_times(curvature_coefficient(j, dt), &a_pow))?;
    }
    let f = f.add(&e)?;
    let g = taylor_curvature(a, dt, kappa + 1)?.add(&e.scale(dt))?;
    Ok((f, g))
}

/// Enclosure of the difference between constant and time-varying inputs,
/// `(sum_j M_j) U0 + sum_j M_j U0 + 2 dt E U0` with `M_j = A^j dt^{j+1} / (j+1)!`.
pub fn input_difference_d(
    a: &DMatrix<f64>,
    dt: f64,
    kappa: usize,
    u0: &Zonotope,
) -> Result<Zonotope> {
    check_square(a)?;
    crate::error::check_dim("input difference", a.nrows(), u0.dim())?;
    let n = a.nrows();
    let mut terms = Vec::with_capacity(kappa);
    let mut m = DMatrix::<f64>::identity(n, n) * dt;
    for j in 1..=kappa {
        m = a * &m * dt / (j + 1) as f64;
        terms.push(m.clone());
    }
    let total = terms.iter().fold(DMatrix::<f64>::zeros(n, n), |s, t| s + t);
    let mut blocks = vec![&total * &u0.generators];
    blocks.extend(terms.iter().map(|t| t * &u0.generators));
    let e = exp_remainder(a, dt, kappa)?;
    let rem = e.scale(2.0 * dt).mul_zonotope(u0)?;
    let refs: Vec<&DMatrix<f64>> = blocks.iter().chain(std::iter::once(&rem.generators)).collect();
    let center = &total * &u0.center + &terms.iter().fold(nalgebra::DVector::zeros(n), |s, t| s + t * &u0.center)
        + &rem.center;
    Zonotope::new(center, hcat(&refs))
}

/// Smallest `kappa >= 2` with `1 - |T^(kappa)|_F / |T^(kappa+1)|_F <= 1e-10`.
pub fn tune_truncation_order(a: &DMatrix<f64>, dt: f64, cap: usize) -> Result<usize> {
    check_square(a)?;
    check_dt(dt)?;
    let mut kappa = 2;
    let mut current = taylor_curvature(a, dt, kappa)?;
    loop {
        let next = taylor_curvature(a, dt, kappa + 1)?;
        let denom = next.frobenius_norm();
        if denom == 0.0 || 1.0 - current.frobenius_norm() / denom <= 1e-10 {
            return Ok(kappa);
        }
        kappa += 1;
        if kappa > cap {
            return Err(Error::OrderCap(cap));
        }
        current = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    fn m(rows: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, v.len() / rows, v)
    }

    #[test]
    fn remainder_zero_matrix() {
        let e = exp_remainder(&DMatrix::zeros(2, 2), 0.3, 4).unwrap();
        assert_eq!(e.hi, DMatrix::zeros(2, 2));
    }

    #[test]
    fn remainder_scalar() {
        let e = exp_remainder(&m(1, &[1.0]), 1.0, 2).unwrap();
        assert_relative_eq!(e.hi[(0, 0)], std::f64::consts::E - 2.5, epsilon = 1e-14);
        assert_relative_eq!(e.lo[(0, 0)], -(std::f64::consts::E - 2.5), epsilon = 1e-14);
    }

    #[test]
    fn remainder_decreases_with_order() {
        let a = m(2, &[-1.0, 2.0, 0.5, -3.0]);
        let mut prev = f64::INFINITY;
        for k in 2..12 {
            let v = exp_remainder(&a, 0.4, k).unwrap().frobenius_norm();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn remainder_overflow_reported() {
        assert!(matches!(exp_remainder(&m(1, &[1e6]), 1e6, 2), Err(Error::Overflow(_))));
    }

    #[test]
    fn propagation_zero_and_nilpotent() {
        let t = propagation_matrix(&DMatrix::zeros(2, 2), 0.7).unwrap();
        assert_relative_eq!(t, DMatrix::identity(2, 2) * 0.7, epsilon = 1e-15);
        let t = propagation_matrix(&m(2, &[0.0, 1.0, 0.0, 0.0]), 0.1).unwrap();
        assert_relative_eq!(t, m(2, &[0.1, 0.005, 0.0, 0.1]), epsilon = 1e-15);
    }

    #[test]
    fn propagation_branches_agree() {
        let a = m(2, &[-1.0, 2.0, -0.5, -0.3]);
        let dt = 2.0;
        let inv = propagation_matrix(&a, dt).unwrap();
        let ser = propagation_series(&a, dt).unwrap();
        assert_relative_eq!(inv, ser, max_relative = 1e-10);
    }

    #[test]
    fn curvature_scalar_hand_value() {
        let t = taylor_curvature(&m(1, &[1.0]), 0.5, 2).unwrap();
        assert_relative_eq!(t.lo[(0, 0)], -0.03125, epsilon = 1e-15);
        assert_eq!(t.hi[(0, 0)], 0.0);
    }

    #[test]
    fn curvature_zero_matrix() {
        let (f, g) = curvature_matrices(&DMatrix::zeros(2, 2), 0.5, 3).unwrap();
        assert_eq!(f.frobenius_norm(), 0.0);
        assert_eq!(g.frobenius_norm(), 0.0);
        assert!(curvature_matrices(&DMatrix::zeros(2, 2), 0.5, 1).is_err());
    }

    #[test]
    fn curvature_vanishes_with_dt() {
        let a = m(2, &[-0.4, 1.0, -1.0, -0.4]);
        let (f1, g1) = curvature_matrices(&a, 0.1, 6).unwrap();
        let (f2, g2) = curvature_matrices(&a, 0.05, 6).unwrap();
        assert!(f2.frobenius_norm() < 0.3 * f1.frobenius_norm());
        assert!(g2.frobenius_norm() < 0.3 * g1.frobenius_norm());
    }

    #[test]
    fn input_difference_trivial_cases() {
        let a = m(2, &[-1.0, 0.3, 0.0, -2.0]);
        let p = Zonotope::point(DVector::zeros(2));
        let d = input_difference_d(&a, 0.2, 4, &p).unwrap();
        assert_eq!(d.interval_enclosure().hi, DVector::zeros(2));
        let u0 = Zonotope::new(DVector::zeros(2), m(2, &[1.0, 0.0, 0.0, 1.0])).unwrap();
        let d = input_difference_d(&DMatrix::zeros(2, 2), 0.2, 4, &u0).unwrap();
        assert_eq!(d.interval_enclosure().hi, DVector::zeros(2));
    }

    #[test]
    fn kappa_zero_matrix_is_two() {
        assert_eq!(tune_truncation_order(&DMatrix::zeros(3, 3), 1.0, 100).unwrap(), 2);
    }

    #[test]
    fn kappa_scalar_matches_direct_iteration() {
        let a = m(1, &[1.0]);
        let dt = 0.1;
        let mut k = 2;
        loop {
            let tk = taylor_curvature(&a, dt, k).unwrap().frobenius_norm();
            let tk1 = taylor_curvature(&a, dt, k + 1).unwrap().frobenius_norm();
            if 1.0 - tk / tk1 <= 1e-10 {
                break;
            }
            k += 1;
        }
        assert_eq!(tune_truncation_order(&a, dt, 100).unwrap(), k);
    }
}

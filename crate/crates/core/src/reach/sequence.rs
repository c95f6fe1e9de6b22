//! Dependency-preserving reach sequence for LTI systems.
//!
//! Generator layout of every set (first columns are the dependent block):
//! * `R(t_i)`: `[Phi^i G_x, input blocks of steps 0..i, D box]`.
//! * `R(tau_i)`: `[dependent hull block, hull difference block, center difference, D box, C box]`,
//!   where the hull is taken between `R(t_i)` (with zero columns for the step-`i` input) and
//!   `R(t_{i+1})` without their uncertainty boxes, so the dependent block covers the inputs
//!   of steps `0..=i`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::taylor::{curvature_matrices, exp_matrix, exp_remainder, input_difference_d, propagation_matrix};
use crate::error::{check_dim, Error, Result};
use crate::setops::{hcat, Interval, Zonotope};

/// `x' = A x + B u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl LinearSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        check_dim("system matrix columns", a.nrows(), a.ncols())?;
        check_dim("input matrix rows", a.nrows(), b.nrows())?;
        Ok(Self { a, b })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn num_inputs(&self) -> usize {
        self.b.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReachParams {
    pub dt: f64,
    pub t_end: f64,
    pub kappa: usize,
}

impl ReachParams {
    pub fn new(dt: f64, t_end: f64, kappa: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        if !(t_end >= 0.0) || !t_end.is_finite() {
            return Err(Error::InvalidParameter(format!("final time must be nonnegative, got {t_end}")));
        }
        let ratio = t_end / dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "final time {t_end} is not a multiple of the time step {dt}"
            )));
        }
        if kappa < 2 {
            return Err(Error::InvalidParameter(format!(
                "truncation order must be at least 2, got {kappa}"
            )));
        }
        Ok(Self { dt, t_end, kappa })
    }

    /// Parameters covering `steps` time steps of length `dt`.
    pub fn with_steps(dt: f64, steps: usize, kappa: usize) -> Result<Self> {
        Self::new(dt, dt * steps as f64, kappa)
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Piecewise-constant uncertain input set: segment `k` applies from `start` until the next
/// segment's start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSchedule {
    pub segments: Vec<InputSegment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSegment {
    pub start: f64,
    pub set: Zonotope,
}

/// Input set used for one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInput {
    pub set: Zonotope,
    /// False if the step straddles a segment boundary and uses the hull of several sets.
    pub exact: bool,
}

impl InputSchedule {
    pub fn constant(u: Zonotope) -> Self {
        Self {
            segments: vec![InputSegment { start: 0.0, set: u }],
        }
    }

    pub fn new(segments: Vec<InputSegment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidParameter("input schedule has no segments".into()));
        }
        if segments[0].start > 0.0 {
            return Err(Error::InvalidParameter("input schedule must start at time 0".into()));
        }
        let m = segments[0].set.dim();
        for w in segments.windows(2) {
            if !(w[1].start > w[0].start) {
                return Err(Error::InvalidParameter("input schedule times must increase".into()));
            }
        }
        for s in &segments {
            check_dim("input schedule segment", m, s.set.dim())?;
        }
        Ok(Self { segments })
    }

    pub fn dim(&self) -> usize {
        self.segments[0].set.dim()
    }

    /// Input set for the step `[i dt, (i+1) dt]`.
    pub fn for_step(&self, i: usize, dt: f64) -> StepInput {
        let t0 = i as f64 * dt;
        let t1 = t0 + dt;
        let tol = 1e-9 * dt;
        let active: Vec<&InputSegment> = self
            .segments
            .iter()
            .enumerate()
            .filter(|(k, s)| {
                let end = self.segments.get(k + 1).map(|n| n.start).unwrap_or(f64::INFINITY);
                s.start < t1 - tol && end > t0 + tol
            })
            .map(|(_, s)| s)
            .collect();
        match active.len() {
            0 => StepInput {
                set: self.segments.last().expect("nonempty").set.clone(),
                exact: true,
            },
            1 => StepInput {
                set: active[0].set.clone(),
                exact: true,
            },
            _ => {
                let boxes: Vec<Interval> = active.iter().map(|s| s.set.interval_enclosure()).collect();
                let m = self.dim();
                let lo = DVector::from_iterator(m, (0..m).map(|r| boxes.iter().map(|b| b.lo[r]).fold(f64::INFINITY, f64::min)));
                let hi = DVector::from_iterator(m, (0..m).map(|r| boxes.iter().map(|b| b.hi[r]).fold(f64::NEG_INFINITY, f64::max)));
                StepInput {
                    set: Interval { lo, hi }.to_zonotope(),
                    exact: false,
                }
            }
        }
    }
}

/// Index tuples separating dependent generators from uncertainty generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorIndexTuples {
    /// Dependent columns of `R(t_i)`.
    pub h: Vec<Vec<usize>>,
    /// Uncertainty columns of `R(t_i)`.
    pub k: Vec<Vec<usize>>,
    /// Dependent columns of `R(tau_i)`.
    pub n: Vec<Vec<usize>>,
    /// Uncertainty columns of `R(tau_i)`.
    pub m: Vec<Vec<usize>>,
}

/// Alternating time-point and time-interval reachable sets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReachSequence {
    pub dt: f64,
    pub t_end: f64,
    pub kappa: usize,
    pub gamma_x: usize,
    /// Generator count of the input set of every step.
    pub gamma_u: Vec<usize>,
    pub rt: Vec<Zonotope>,
    pub rtau: Vec<Zonotope>,
    /// Number of leading dependent columns of `rt[i]`.
    pub dep_t: Vec<usize>,
    /// Number of leading dependent columns of `rtau[i]`.
    pub dep_tau: Vec<usize>,
    /// Boxed input-difference sets `D` of every step.
    pub d_sets: Vec<Zonotope>,
    /// Boxed curvature sets `C_i`.
    pub c_sets: Vec<Zonotope>,
    /// Whether the input set of every step was taken from a single schedule segment.
    pub exact_steps: Vec<bool>,
    pub step_inputs: Vec<Zonotope>,
    pub phi: DMatrix<f64>,
    pub propagation: DMatrix<f64>,
}

impl ReachSequence {
    pub fn steps(&self) -> usize {
        self.rtau.len()
    }

    /// Dimension of the factor vector `[alpha_x; alpha_u,1; ...]`.
    pub fn factor_dim(&self) -> usize {
        self.gamma_x + self.gamma_u.iter().sum::<usize>()
    }

    /// Offset of the step-`i` input factors within the factor vector.
    pub fn input_offset(&self, i: usize) -> usize {
        self.gamma_x + self.gamma_u[..i].iter().sum::<usize>()
    }

    pub fn tuples(&self) -> FactorIndexTuples {
        let split = |sets: &[Zonotope], dep: &[usize]| {
            let h: Vec<Vec<usize>> = dep.iter().map(|&d| (0..d).collect()).collect();
            let k: Vec<Vec<usize>> = sets
                .iter()
                .zip(dep)
                .map(|(z, &d)| (d..z.num_generators()).collect())
                .collect();
            (h, k)
        };
        let (h, k) = split(&self.rt, &self.dep_t);
        let (n, m) = split(&self.rtau, &self.dep_tau);
        FactorIndexTuples { h, k, n, m }
    }

    /// Reach set selected by a literal time index: even `j` is `R(t_{j/2})`, odd `j` is
    /// `R(tau_{(j-1)/2})`.
    pub fn set_at_index(&self, j: usize) -> Option<(&Zonotope, usize)> {
        if j % 2 == 0 {
            self.rt.get(j / 2).map(|z| (z, self.dep_t[j / 2]))
        } else {
            self.rtau.get(j / 2).map(|z| (z, self.dep_tau[j / 2]))
        }
    }

    /// Approximate solution `mu` and error set for factor vector `alpha` at time `t`.
    pub fn dependency_eval(&self, t: f64, alpha: &DVector<f64>) -> Result<(DVector<f64>, Zonotope)> {
        check_dim("factor vector", self.factor_dim(), alpha.len())?;
        if alpha.iter().any(|a| a.abs() > 1.0 + 1e-12) {
            return Err(Error::OutOfRange("factor vector outside [-1, 1]".into()));
        }
        let tol = 1e-9 * self.dt;
        if t < -tol || t > self.t_end + tol {
            return Err(Error::OutOfRange(format!("time {t} outside [0, {}]", self.t_end)));
        }
        let ratio = t / self.dt;
        let nearest = ratio.round();
        let j = if (ratio - nearest).abs() * self.dt <= tol {
            2 * nearest as usize
        } else {
            2 * ratio.floor() as usize + 1
        };
        let (z, dep) = self.set_at_index(j).expect("index within range");
        let g_dep = z.generators.columns(0, dep);
        let mu = g_dep * alpha.rows(0, dep);
        let err = Zonotope::new(
            z.center.clone(),
            z.generators.columns(dep, z.num_generators() - dep).into_owned(),
        )?;
        Ok((mu, err))
    }
}

fn diag_box(r: &DVector<f64>) -> DMatrix<f64> {
    let nz: Vec<usize> = (0..r.len()).filter(|&i| r[i] > 0.0).collect();
    let mut g = DMatrix::zeros(r.len(), nz.len());
    for (k, &i) in nz.iter().enumerate() {
        g[(i, k)] = r[i];
    }
    g
}

/// Radius of `sum_{k<i} Phi^(i-1-k) D_k` for runs `(first step, d)` of equal radii.
fn box_radius_after(runs: &[(usize, DVector<f64>)], prefix: &[DMatrix<f64>], i: usize) -> DVector<f64> {
    let n = prefix[0].nrows();
    let mut r = DVector::zeros(n);
    for (idx, (a, d)) in runs.iter().enumerate() {
        let b = runs.get(idx + 1).map(|(s, _)| *s).unwrap_or(i).min(i);
        if *a >= b {
            continue;
        }
        // sum over k in [a, b) of |Phi^(i-1-k)| = S_(i-a) - S_(i-b)
        let sum = if i == b { prefix[i - a].clone() } else { (&prefix[i - a] - &prefix[i - b]).map(|v| v.max(0.0)) };
        r += sum * d;
    }
    r
}

/// Computes the reach sequence for a constant input set.
pub fn reach_sequence(
    sys: &LinearSystem,
    x0: &Zonotope,
    u: &Zonotope,
    params: &ReachParams,
) -> Result<(ReachSequence, FactorIndexTuples)> {
    let seq = reach_sequence_scheduled(sys, x0, &InputSchedule::constant(u.clone()), params)?;
    let tuples = seq.tuples();
    Ok((seq, tuples))
}

/// Single initial curvature box `interval(F X0 + G u~)`.
pub fn initial_curvature_box(
    sys: &LinearSystem,
    x0: &Zonotope,
    u: &Zonotope,
    dt: f64,
    kappa: usize,
) -> Result<Zonotope> {
    let (f, g) = curvature_matrices(&sys.a, dt, kappa)?;
    let ut = Zonotope::point(&sys.b * &u.center);
    Ok(f.mul_zonotope(x0)?.minkowski_sum(&g.mul_zonotope(&ut)?)?.boxed())
}

/// Computes the reach sequence for a piecewise-constant input schedule.
pub fn reach_sequence_scheduled(
    sys: &LinearSystem,
    x0: &Zonotope,
    schedule: &InputSchedule,
    params: &ReachParams,
) -> Result<ReachSequence> {
    let n = sys.dim();
    check_dim("initial set", n, x0.dim())?;
    check_dim("input set", sys.num_inputs(), schedule.dim())?;
    let dt = params.dt;
    let steps = params.steps();
    let phi = exp_matrix(&sys.a, dt)?;
    let t_mat = propagation_matrix(&sys.a, dt)?;
    let (f, g) = curvature_matrices(&sys.a, dt, params.kappa)?;
    // Force the remainder computation up front so overflow surfaces before any set work.
    exp_remainder(&sys.a, dt, params.kappa)?;

    let gamma_x = x0.num_generators();
    let mut hc = x0.center.clone();
    let mut dep = x0.generators.clone();
    let mut r_d = DVector::<f64>::zeros(n);
    // The D boxes enter as `sum_k Phi^(i-1-k) D_k`; its interval radius is
    // `sum_k |Phi^(i-1-k)| d_k`, evaluated per run of equal `d_k` through the prefix
    // sums `S_m = sum_{l<m} |Phi^l|`.
    let mut phi_pow = DMatrix::<f64>::identity(n, n);
    let mut prefix = vec![DMatrix::<f64>::zeros(n, n)];
    let mut runs: Vec<(usize, DVector<f64>)> = Vec::new();

    let mut rt = vec![x0.clone()];
    let mut dep_t = vec![gamma_x];
    let mut rtau = Vec::with_capacity(steps);
    let mut dep_tau = Vec::with_capacity(steps);
    let mut d_sets = Vec::with_capacity(steps);
    let mut c_sets = Vec::with_capacity(steps);
    let mut gamma_u = Vec::with_capacity(steps);
    let mut exact_steps = Vec::with_capacity(steps);
    let mut step_inputs = Vec::with_capacity(steps);
    // The same input set recurs over many steps; cache its D and input terms.
    let mut cache: Option<(Zonotope, Zonotope, DVector<f64>, DMatrix<f64>, Zonotope)> = None;

    for i in 0..steps {
        let step = schedule.for_step(i, dt);
        let u = step.set;
        let reuse = matches!(&cache, Some((cu, ..)) if *cu == u);
        if !reuse {
            let u_tilde = &sys.b * &u.center;
            let bgu = &sys.b * &u.generators;
            let u0 = Zonotope::new(DVector::zeros(n), bgu.clone())?;
            let d = input_difference_d(&sys.a, dt, params.kappa, &u0)?.boxed();
            let g_in = g.mul_zonotope(&Zonotope::new(u_tilde.clone(), bgu.clone())?)?;
            cache = Some((u.clone(), d, u_tilde, &t_mat * &bgu, g_in));
        }
        let (_, d_box, u_tilde, t_bgu, g_in) = cache.as_ref().expect("filled");
        let gu = u.num_generators();

        // Curvature box from the full time-point set.
        let c_box = f.mul_zonotope(&rt[i])?.minkowski_sum(g_in)?.boxed();

        let hc_next = &phi * &hc + &t_mat * u_tilde;
        let dep_next = hcat(&[&(&phi * &dep), t_bgu]);
        let d_rad = d_box.interval_enclosure().radius();
        if runs.last().map(|(_, d)| *d != d_rad).unwrap_or(true) {
            runs.push((i, d_rad.clone()));
        }
        prefix.push(&prefix[i] + phi_pow.abs());
        phi_pow = &phi * &phi_pow;
        let r_d_next = box_radius_after(&runs, &prefix, i + 1);

        // Hull of the dependent parts at t_i and t_{i+1}.
        let dep_pad = hcat(&[&dep, &DMatrix::zeros(n, gu)]);
        let sum_block = (&dep_pad + &dep_next) * 0.5;
        let diff_block = (&dep_pad - &dep_next) * 0.5;
        let center = (&hc + &hc_next) * 0.5;
        let center_diff = (&hc - &hc_next) * 0.5;
        // Hull of the boxes at both ends: `Phi E_i + D_i` has radius `r_d_next`.
        let r_tau = (&r_d + &d_rad).zip_map(&r_d_next, f64::max);
        let err = Zonotope::new(
            DVector::zeros(n),
            hcat(&[&diff_block, &DMatrix::from_column_slice(n, 1, center_diff.as_slice()), &diag_box(&r_tau)]),
        )?
        .compact();
        let c_part = c_box.compact();
        let tau_center = center + &c_part.center;
        let tau_gens = hcat(&[&sum_block, &err.generators, &c_part.generators]);
        rtau.push(Zonotope::new(tau_center, tau_gens)?);
        dep_tau.push(sum_block.ncols());

        hc = hc_next;
        dep = dep_next;
        r_d = r_d_next;
        rt.push(Zonotope::new(hc.clone(), hcat(&[&dep, &diag_box(&r_d)]))?);
        dep_t.push(dep.ncols());

        d_sets.push(d_box.clone());
        c_sets.push(c_box);
        gamma_u.push(gu);
        exact_steps.push(step.exact);
        step_inputs.push(u);
    }

    Ok(ReachSequence {
        dt,
        t_end: params.t_end,
        kappa: params.kappa,
        gamma_x,
        gamma_u,
        rt,
        rtau,
        dep_t,
        dep_tau,
        d_sets,
        c_sets,
        exact_steps,
        step_inputs,
        phi,
        propagation: t_mat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn double_integrator() -> LinearSystem {
        LinearSystem::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        )
        .unwrap()
    }

    #[test]
    fn box_radius_matches_direct_sum() {
        let phi = DMatrix::from_row_slice(3, 3, &[0.9, 0.4, -0.2, -0.5, 0.8, 0.1, 0.3, -0.6, 0.7]);
        let d1 = DVector::from_vec(vec![0.1, 0.0, 0.3]);
        let d2 = DVector::from_vec(vec![0.05, 0.2, 0.0]);
        let runs = vec![(0, d1.clone()), (3, d2.clone())];
        let mut prefix = vec![DMatrix::zeros(3, 3)];
        let mut power = DMatrix::identity(3, 3);
        for m in 0..8 {
            prefix.push(&prefix[m] + power.abs());
            power = &phi * &power;
        }
        for i in 1..=8 {
            let mut direct = DVector::zeros(3);
            for k in 0..i {
                let d = if k < 3 { &d1 } else { &d2 };
                direct += phi.pow((i - 1 - k) as u32).abs() * d;
            }
            let r = box_radius_after(&runs, &prefix, i);
            assert!((r - direct).amax() < 1e-12, "step {i}");
        }
    }

    #[test]
    fn stable_system_sets_stay_bounded() {
        let sys = LinearSystem::new(
            DMatrix::from_row_slice(2, 2, &[-0.5, 3.0, -3.0, -0.5]),
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let x0 = Zonotope::from_bounds(&[-0.1, -0.1], &[0.1, 0.1]).unwrap();
        let u = Zonotope::from_bounds(&[-0.1, -0.1], &[0.1, 0.1]).unwrap();
        let (seq, _) = reach_sequence(&sys, &x0, &u, &ReachParams::new(0.05, 20.0, 8).unwrap()).unwrap();
        // Steady-state bound |x| <= |u| / 0.5 per axis, up to the discretization error.
        let r = seq.rt.last().unwrap().interval_enclosure().radius();
        assert!(r.amax() < 0.5, "radius {r}");
    }

    #[test]
    fn sequence_lengths_for_two_steps() {
        let sys = double_integrator();
        let x0 = Zonotope::from_bounds(&[-0.1, 0.0], &[0.1, 0.2]).unwrap();
        let u = Zonotope::from_bounds(&[-1.0], &[1.0]).unwrap();
        let (seq, tuples) = reach_sequence(&sys, &x0, &u, &ReachParams::new(0.5, 1.0, 4).unwrap()).unwrap();
        assert_eq!(seq.rt.len(), 3);
        assert_eq!(seq.rtau.len(), 2);
        assert_eq!(tuples.h[1].len(), 2 + 1);
        assert_eq!(tuples.n[1].len(), 2 + 2);
        for (i, z) in seq.rt.iter().enumerate() {
            let mut all: Vec<usize> = tuples.h[i].iter().chain(&tuples.k[i]).copied().collect();
            all.sort();
            assert_eq!(all, (0..z.num_generators()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn point_sets_with_zero_dynamics_are_exact() {
        let sys = LinearSystem::new(DMatrix::zeros(2, 2), DMatrix::identity(2, 2)).unwrap();
        let x0 = Zonotope::point(DVector::from_vec(vec![1.0, -1.0]));
        let u = Zonotope::point(DVector::from_vec(vec![0.5, 2.0]));
        let (seq, _) = reach_sequence(&sys, &x0, &u, &ReachParams::new(0.25, 1.0, 3).unwrap()).unwrap();
        for (i, z) in seq.rt.iter().enumerate() {
            let t = 0.25 * i as f64;
            let expected = DVector::from_vec(vec![1.0 + 0.5 * t, -1.0 + 2.0 * t]);
            assert!((&z.center - expected).amax() < 1e-14);
            assert!(z.interval_enclosure().radius().amax() < 1e-14);
        }
    }

    #[test]
    fn rejects_unaligned_horizon() {
        assert!(ReachParams::new(0.3, 1.0, 3).is_err());
        assert!(ReachParams::new(0.25, 1.0, 1).is_err());
    }

    #[test]
    fn dependency_eval_at_zero_factors() {
        let sys = double_integrator();
        let x0 = Zonotope::from_bounds(&[-0.1, 0.0], &[0.1, 0.2]).unwrap();
        let u = Zonotope::from_bounds(&[-1.0], &[1.0]).unwrap();
        let (seq, _) = reach_sequence(&sys, &x0, &u, &ReachParams::new(0.5, 1.0, 4).unwrap()).unwrap();
        let alpha = DVector::zeros(seq.factor_dim());
        for t in [0.0, 0.25, 0.5, 0.8, 1.0] {
            let (mu, e) = seq.dependency_eval(t, &alpha).unwrap();
            assert_eq!(mu, DVector::zeros(2));
            assert!(e.contains_point(&e.center, 1e-12).unwrap());
        }
        assert!(seq.dependency_eval(1.5, &alpha).is_err());
        assert!(seq.dependency_eval(0.5, &DVector::from_element(seq.factor_dim(), 2.0)).is_err());
    }

    #[test]
    fn schedule_straddling_step_is_inexact() {
        let s = InputSchedule::new(vec![
            InputSegment {
                start: 0.0,
                set: Zonotope::point(DVector::from_vec(vec![1.0])),
            },
            InputSegment {
                start: 1.0,
                set: Zonotope::point(DVector::from_vec(vec![-1.0])),
            },
        ])
        .unwrap();
        let a = s.for_step(0, 0.5);
        assert!(a.exact);
        let b = s.for_step(0, 2.0);
        assert!(!b.exact);
        assert_eq!(b.set.interval_enclosure().lo[0], -1.0);
        let c = s.for_step(3, 0.5);
        assert!(c.exact);
        assert_eq!(c.set.center[0], -1.0);
    }
}

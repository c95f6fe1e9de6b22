//! Exact discrete simulation under piecewise-constant inputs.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::reach::{exp_matrix, propagation_matrix, InputSchedule, LinearSystem};
use crate::setops::Zonotope;
use crate::stl::SampledTrace;

/// States and applied inputs on a time grid. `inputs[k]` is the input held on
/// `[times[k], times[k+1])`; the last entry repeats the final input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub inputs: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn to_trace(&self) -> SampledTrace {
        SampledTrace {
            times: self.times.clone(),
            states: self.states.clone(),
        }
    }

    /// CSV with header `t,x1..xn,u1..um`.
    pub fn to_csv(&self) -> String {
        let n = self.states.first().map(|s| s.len()).unwrap_or(0);
        let m = self.inputs.first().map(|u| u.len()).unwrap_or(0);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((1..=m).map(|i| format!("u{i}")));
        let mut out = header.join(",");
        out.push('\n');
        for k in 0..self.times.len() {
            let mut row = vec![format!("{}", self.times[k])];
            row.extend(self.states[k].iter().map(|v| format!("{v}")));
            row.extend(self.inputs[k].iter().map(|v| format!("{v}")));
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Simulates `x' = Ax + Bu` with `inputs[i]` held on `[i dt, (i+1) dt]`, recording
/// `substeps` samples per step.
pub fn simulate_piecewise(
    sys: &LinearSystem,
    x0: &DVector<f64>,
    inputs: &[DVector<f64>],
    dt: f64,
    substeps: usize,
) -> Result<Trajectory> {
    check_dim("initial state", sys.dim(), x0.len())?;
    if substeps == 0 {
        return Err(Error::InvalidParameter("substeps must be positive".into()));
    }
    let h = dt / substeps as f64;
    let phi = exp_matrix(&sys.a, h)?;
    let t_mat = propagation_matrix(&sys.a, h)?;
    let tb = &t_mat * &sys.b;
    let mut times = vec![0.0];
    let mut states = vec![x0.clone()];
    let mut applied = Vec::new();
    let mut x = x0.clone();
    for (i, u) in inputs.iter().enumerate() {
        check_dim("input value", sys.num_inputs(), u.len())?;
        let drive = &tb * u;
        for s in 0..substeps {
            x = &phi * &x + &drive;
            applied.push(u.clone());
            times.push(i as f64 * dt + (s + 1) as f64 * h);
            states.push(x.clone());
        }
    }
    applied.push(inputs.last().cloned().unwrap_or_else(|| DVector::zeros(sys.num_inputs())));
    Ok(Trajectory {
        times,
        states,
        inputs: applied,
    })
}

/// Initial state and per-step inputs encoded by a factor vector
/// `[alpha_x; alpha_u,1; ...; alpha_u,N]`.
pub fn decode_factors(
    x0: &Zonotope,
    step_inputs: &[Zonotope],
    alpha: &DVector<f64>,
) -> Result<(DVector<f64>, Vec<DVector<f64>>)> {
    let total = x0.num_generators() + step_inputs.iter().map(|u| u.num_generators()).sum::<usize>();
    check_dim("factor vector", total, alpha.len())?;
    let gx = x0.num_generators();
    let x = x0.point_at(&alpha.rows(0, gx).into_owned())?;
    let mut off = gx;
    let mut us = Vec::with_capacity(step_inputs.len());
    for u in step_inputs {
        let g = u.num_generators();
        us.push(u.point_at(&alpha.rows(off, g).into_owned())?);
        off += g;
    }
    Ok((x, us))
}

/// Trajectory induced by a factor vector, sampled `substeps` times per step.
pub fn simulate_factors(
    sys: &LinearSystem,
    x0: &Zonotope,
    step_inputs: &[Zonotope],
    dt: f64,
    alpha: &DVector<f64>,
    substeps: usize,
) -> Result<Trajectory> {
    let (x, us) = decode_factors(x0, step_inputs, alpha)?;
    simulate_piecewise(sys, &x, &us, dt, substeps)
}

/// Factor vector with entries uniform in `[-1, 1]`; each entry is pushed to a random
/// vertex `+-1` with probability `corner_bias`.
pub fn random_factors<R: Rng + ?Sized>(rng: &mut R, dim: usize, corner_bias: f64) -> DVector<f64> {
    DVector::from_iterator(
        dim,
        (0..dim).map(|_| {
            if rng.gen::<f64>() < corner_bias {
                if rng.gen::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            } else {
                rng.gen_range(-1.0..=1.0)
            }
        }),
    )
}

/// Random trajectory with a random initial state from `x0` and a random input from the
/// schedule on each of `steps` steps of length `dt`.
pub fn random_trajectory<R: Rng + ?Sized>(
    rng: &mut R,
    sys: &LinearSystem,
    x0: &Zonotope,
    schedule: &InputSchedule,
    dt: f64,
    steps: usize,
    substeps: usize,
    corner_bias: f64,
) -> Result<Trajectory> {
    let x = x0.point_at(&random_factors(rng, x0.num_generators(), corner_bias))?;
    let mut inputs = Vec::with_capacity(steps);
    for i in 0..steps {
        // Sample at the step midpoint so steps never straddle schedule segments.
        let mid = (i as f64 + 0.5) * dt;
        let seg = schedule
            .segments
            .iter()
            .rev()
            .find(|s| s.start <= mid)
            .unwrap_or(&schedule.segments[0]);
        inputs.push(seg.set.point_at(&random_factors(rng, seg.set.num_generators(), corner_bias))?);
    }
    simulate_piecewise(sys, &x, &inputs, dt, substeps)
}

/// Closed-form check helper: `x(t) = x0 + t B u` when `A = 0`.
pub fn zero_dynamics_state(b: &DMatrix<f64>, x0: &DVector<f64>, inputs: &[DVector<f64>], dt: f64) -> DVector<f64> {
    inputs.iter().fold(x0.clone(), |x, u| x + b * u * dt)
}

//! Desk-scale benchmark generators.

use serde::de::DeserializeOwned;
use serde::Deserialize;

use super::{box_data, perr, ClosedLoopSpec, ProblemFile, ReferenceSegment, Rows, ZonotopeData};
use crate::error::Result;

pub const BENCHMARK_NAMES: [&str; 6] = ["double_integrator", "rotation", "corridor", "heat1d", "robot", "traffic"];

/// LQR gain of the planar double integrator for `Q = I4`, `R = 0.1 I2`, computed
/// offline from the continuous algebraic Riccati equation; `A + B K` is Hurwitz.
pub fn robot_lqr_gain() -> Rows {
    const KP: f64 = -3.1622776601683835;
    const KD: f64 = -4.040365740912177;
    vec![vec![KP, 0.0, KD, 0.0], vec![0.0, KP, 0.0, KD]]
}

fn params<T: DeserializeOwned + Default>(value: &serde_json::Value) -> Result<T> {
    if value.is_null() {
        return Ok(T::default());
    }
    serde_path_to_error::deserialize(value.clone()).map_err(|e| {
        let path = e.path().to_string();
        perr(
            if path == "." || path.is_empty() { "params".into() } else { format!("params.{path}") },
            e.into_inner().to_string(),
        )
    })
}

fn zeros(r: usize, c: usize) -> Rows {
    vec![vec![0.0; c]; r]
}

/// `[0 I; 0 0]` and `[0; I]` with positions first.
fn double_integrator_matrices(d: usize) -> (Rows, Rows) {
    let mut a = zeros(2 * d, 2 * d);
    let mut b = zeros(2 * d, d);
    for i in 0..d {
        a[i][d + i] = 1.0;
        b[d + i][i] = 1.0;
    }
    (a, b)
}

fn check_box(path: &str, lo: &[f64], hi: &[f64], n: usize) -> Result<()> {
    if lo.len() != n || hi.len() != n {
        return Err(perr(path, format!("bounds need {n} entries")));
    }
    if lo.iter().zip(hi).any(|(l, h)| !(l <= h)) {
        return Err(perr(path, "lower bound exceeds upper bound"));
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct DoubleIntegratorParams {
    /// Number of axes.
    axes: usize,
    x0_lo: Option<Vec<f64>>,
    x0_hi: Option<Vec<f64>>,
    u_bound: f64,
    spec: Option<String>,
}

impl Default for DoubleIntegratorParams {
    fn default() -> Self {
        Self {
            axes: 1,
            x0_lo: None,
            x0_hi: None,
            u_bound: 0.2,
            spec: None,
        }
    }
}

fn double_integrator(p: DoubleIntegratorParams) -> Result<ProblemFile> {
    let d = p.axes;
    if d == 0 {
        return Err(perr("params.axes", "must be positive"));
    }
    let (a, b) = double_integrator_matrices(d);
    let mut lo = vec![-0.1; d];
    lo.extend(vec![0.9; d]);
    let mut hi = vec![0.1; d];
    hi.extend(vec![1.1; d]);
    let lo = p.x0_lo.unwrap_or(lo);
    let hi = p.x0_hi.unwrap_or(hi);
    check_box("params.x0", &lo, &hi, 2 * d)?;
    Ok(ProblemFile {
        a: Some(a),
        b: Some(b),
        x0: Some(box_data(&lo, &hi)),
        u: Some(box_data(&vec![-p.u_bound; d], &vec![p.u_bound; d])),
        spec: Some(p.spec.unwrap_or_else(|| "G[0,2] x1 < 2.5".into())),
        ..Default::default()
    })
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RotationParams {
    omega: f64,
    damping: f64,
    x0_lo: Vec<f64>,
    x0_hi: Vec<f64>,
    u_bound: f64,
    spec: Option<String>,
}

impl Default for RotationParams {
    fn default() -> Self {
        Self {
            omega: 1.0,
            damping: 0.1,
            x0_lo: vec![0.9, -0.1],
            x0_hi: vec![1.1, 0.1],
            u_bound: 0.01,
            spec: None,
        }
    }
}

fn rotation(p: RotationParams, default_spec: &str) -> Result<ProblemFile> {
    check_box("params.x0", &p.x0_lo, &p.x0_hi, 2)?;
    let a = vec![vec![-p.damping, p.omega], vec![-p.omega, -p.damping]];
    let b = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    Ok(ProblemFile {
        a: Some(a),
        b: Some(b),
        x0: Some(box_data(&p.x0_lo, &p.x0_hi)),
        u: Some(box_data(&[-p.u_bound; 2], &[p.u_bound; 2])),
        spec: Some(p.spec.unwrap_or_else(|| default_spec.into())),
        ..Default::default()
    })
}

fn corridor() -> RotationParams {
    RotationParams {
        omega: 1.0,
        damping: 0.1,
        x0_lo: vec![-1.0, 1.9],
        x0_hi: vec![1.0, 2.1],
        u_bound: 0.01,
        spec: None,
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct HeatParams {
    /// Interior nodes of the rod `[0, 1]`.
    n: usize,
    diffusivity: f64,
    /// Linear heat loss to the environment.
    loss: f64,
    /// Width of the Gaussian initial profile centered at the left end.
    width: f64,
    amplitude: f64,
    /// Relative uncertainty of the initial amplitude.
    spread: f64,
    /// Bound of the heat input at node 1.
    input_bound: f64,
    /// 1-based probe node; defaults to the node at 54% of the rod.
    probe: Option<usize>,
    threshold: f64,
    spec: Option<String>,
}

impl Default for HeatParams {
    fn default() -> Self {
        Self {
            n: 25,
            diffusivity: 0.004,
            loss: 0.5,
            width: 0.1,
            amplitude: 100.0,
            spread: 0.2,
            input_bound: 0.0,
            probe: None,
            threshold: 0.07,
            spec: None,
        }
    }
}

fn heat1d(p: HeatParams) -> Result<ProblemFile> {
    let n = p.n;
    if n < 2 {
        return Err(perr("params.n", "needs at least two nodes"));
    }
    if !(p.diffusivity > 0.0 && p.loss >= 0.0 && p.width > 0.0 && p.spread >= 0.0 && p.input_bound >= 0.0) {
        return Err(perr("params", "diffusivity, width must be positive; loss, spread, input_bound nonnegative"));
    }
    let h = 1.0 / (n as f64 + 1.0);
    let s = p.diffusivity / (h * h);
    let mut a = zeros(n, n);
    for i in 0..n {
        a[i][i] = -2.0 * s - p.loss;
        if i > 0 {
            a[i][i - 1] = s;
        }
        if i + 1 < n {
            a[i][i + 1] = s;
        }
    }
    let mut b = zeros(n, 1);
    b[0][0] = 1.0;
    let profile: Vec<f64> = (0..n)
        .map(|i| {
            let x = (i as f64 + 1.0) * h / p.width;
            p.amplitude * (-x * x).exp()
        })
        .collect();
    let gen: Vec<Vec<f64>> = profile.iter().map(|v| vec![p.spread * v]).collect();
    let probe = p.probe.unwrap_or(((0.54 * (n as f64 + 1.0)).round() as usize).clamp(1, n));
    if probe == 0 || probe > n {
        return Err(perr("params.probe", format!("must lie in 1..={n}")));
    }
    let c = p.threshold;
    Ok(ProblemFile {
        a: Some(a),
        b: Some(b),
        x0: Some(ZonotopeData { c: profile, g: gen }),
        u: Some(box_data(&[-p.input_bound], &[p.input_bound])),
        spec: Some(
            p.spec
                .unwrap_or_else(|| format!("G[3,4] x{probe} > {c} | F[4,6] x{probe} < {c}")),
        ),
        ..Default::default()
    })
}

/// Axis-aligned region `lo <= (x1, x2) <= hi`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct Region {
    lo: [f64; 2],
    hi: [f64; 2],
}

impl Region {
    fn formula(&self) -> String {
        format!(
            "(x1 > {} & x1 < {} & x2 > {} & x2 < {})",
            self.lo[0], self.hi[0], self.lo[1], self.hi[1]
        )
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RobotParams {
    #[serde(rename = "K")]
    k: Rows,
    u_ref: Vec<ReferenceSegment>,
    disturbance: f64,
    s1: Region,
    s2: Region,
    s3: Region,
    spec: Option<String>,
}

impl Default for RobotParams {
    fn default() -> Self {
        Self {
            k: robot_lqr_gain(),
            u_ref: vec![
                ReferenceSegment {
                    start: 0.0,
                    u: vec![0.25, 0.0],
                },
                ReferenceSegment {
                    start: 1.0,
                    u: vec![0.0, 0.0],
                },
            ],
            disturbance: 0.1,
            s1: Region {
                lo: [0.47, -0.3],
                hi: [0.53, 0.3],
            },
            s2: Region {
                lo: [1.6, -0.5],
                hi: [2.4, 0.5],
            },
            s3: Region {
                lo: [0.8, 0.3],
                hi: [1.2, 0.6],
            },
            spec: None,
        }
    }
}

fn robot(p: RobotParams) -> Result<ProblemFile> {
    let (a, b) = double_integrator_matrices(2);
    let spec = p.spec.unwrap_or_else(|| {
        format!(
            "F[0,4]({} & N[6] {}) & G[0,10] !{}",
            p.s1.formula(),
            p.s2.formula(),
            p.s3.formula()
        )
    });
    let mut lo = vec![0.0; 8];
    let mut hi = vec![0.0; 8];
    lo[0] = -0.1;
    lo[1] = -0.1;
    hi[0] = 0.1;
    hi[1] = 0.1;
    Ok(ProblemFile {
        closed_loop: Some(ClosedLoopSpec {
            a,
            b,
            k: p.k,
            u_ref: p.u_ref,
            w: box_data(&[-p.disturbance; 2], &[p.disturbance; 2]),
        }),
        x0: Some(box_data(&lo, &hi)),
        spec: Some(spec),
        ..Default::default()
    })
}

fn traffic() -> ProblemFile {
    let (a, b) = double_integrator_matrices(2);
    ProblemFile {
        a: Some(a),
        b: Some(b),
        x0: Some(box_data(&[-0.1, -0.1, 29.9, -0.1], &[0.1, 0.1, 30.1, 0.1])),
        u: Some(box_data(&[-9.0, -9.0], &[9.0, 9.0])),
        spec: Some("G[0,1](x1 < 22 | x2 < 2) & G[0,1] x2 > -2 & G[0,1] x2 < 6".into()),
        ..Default::default()
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SpecOnly {
    spec: Option<String>,
}

/// Problem file of a named benchmark. `params` may be `null` for the defaults.
pub fn generate_benchmark(name: &str, params_value: &serde_json::Value) -> Result<ProblemFile> {
    let mut pf = match name {
        "double_integrator" => double_integrator(params(params_value)?)?,
        "rotation" => rotation(params(params_value)?, "G[0,3] x1 < 1.2")?,
        "corridor" => {
            let p: SpecOnly = params(params_value)?;
            let mut r = corridor();
            r.spec = p.spec;
            rotation(r, "F[0,3](x2 < 0.5 & x2 > -0.5)")?
        }
        "heat1d" => heat1d(params(params_value)?)?,
        "robot" => robot(params(params_value)?)?,
        "traffic" => {
            let p: SpecOnly = params(params_value)?;
            let mut t = traffic();
            if p.spec.is_some() {
                t.spec = p.spec;
            }
            t
        }
        other => {
            return Err(perr(
                "name",
                format!("unknown benchmark '{other}', expected one of {}", BENCHMARK_NAMES.join(", ")),
            ))
        }
    };
    pf.benchmark = None;
    Ok(pf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn traffic_sets_match_scenario() {
        let p = generate_benchmark("traffic", &json!(null)).unwrap().resolve().unwrap();
        let x0 = p.x0.interval_enclosure();
        assert_eq!(x0.lo.as_slice(), &[-0.1, -0.1, 29.9, -0.1]);
        assert_eq!(x0.hi.as_slice(), &[0.1, 0.1, 30.1, 0.1]);
        let u = p.inputs.segments[0].set.interval_enclosure();
        assert_eq!(u.lo.as_slice(), &[-9.0, -9.0]);
        assert_eq!(u.hi.as_slice(), &[9.0, 9.0]);
    }

    #[test]
    fn heat_matrix_is_tridiagonal_and_dissipative() {
        let p = generate_benchmark("heat1d", &json!({"n": 3})).unwrap().resolve().unwrap();
        let a = &p.system.a;
        for i in 0..3usize {
            for j in 0..3usize {
                if i.abs_diff(j) > 1 {
                    assert_eq!(a[(i, j)], 0.0);
                }
            }
            assert!(a.row(i).sum() <= 0.0);
        }
    }

    #[test]
    fn robot_is_eight_dimensional() {
        let p = generate_benchmark("robot", &json!(null)).unwrap().resolve().unwrap();
        assert_eq!(p.system.dim(), 8);
        assert_eq!(p.system.num_inputs(), 4);
        assert_eq!(p.x0.num_generators(), 2);
    }

    #[test]
    fn unknown_names_and_params_are_errors() {
        assert!(generate_benchmark("nope", &json!(null)).is_err());
        assert!(generate_benchmark("heat1d", &json!({"size": 3})).is_err());
        assert!(generate_benchmark("heat1d", &json!({"n": 1})).is_err());
    }
}

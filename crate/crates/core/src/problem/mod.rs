//! Problem files: JSON descriptions of a verification task, with optional
//! benchmark references and closed-loop assembly.

mod bench;

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reach::{InputSchedule, InputSegment, LinearSystem};
use crate::setops::Zonotope;
use crate::stl::{parse_stl, StlFormula};

pub use bench::{generate_benchmark, robot_lqr_gain, BENCHMARK_NAMES};

/// Dense matrix as a list of rows.
pub type Rows = Vec<Vec<f64>>;

/// Zonotope `{c + G a : |a| <= 1}` with `G` given row by row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZonotopeData {
    pub c: Vec<f64>,
    #[serde(rename = "G", default)]
    pub g: Rows,
}

/// Input set active from `start` until the next segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSegmentData {
    pub start: f64,
    pub c: Vec<f64>,
    #[serde(rename = "G", default)]
    pub g: Rows,
}

/// Reference input active from `start` until the next segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSegment {
    pub start: f64,
    pub u: Vec<f64>,
}

/// Plant `x' = A x + B u` tracking a reference trajectory with `u = u_ref + K (x - x_ref) + w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosedLoopSpec {
    #[serde(rename = "A")]
    pub a: Rows,
    #[serde(rename = "B")]
    pub b: Rows,
    #[serde(rename = "K")]
    pub k: Rows,
    pub u_ref: Vec<ReferenceSegment>,
    /// Disturbance set added to the plant input.
    #[serde(rename = "W")]
    pub w: ZonotopeData,
}

/// Reference to a generated benchmark; fields given next to it override the generated ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkRef {
    pub name: String,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub params: serde_json::Value,
}

/// On-disk problem description.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Rows>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closed_loop: Option<ClosedLoopSpec>,
    #[serde(rename = "X0", default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<ZonotopeData>,
    #[serde(rename = "U", default, skip_serializing_if = "Option::is_none")]
    pub u: Option<ZonotopeData>,
    /// Piecewise-constant input sets; replaces `U` when present.
    #[serde(rename = "U_schedule", default, skip_serializing_if = "Option::is_none")]
    pub u_schedule: Option<Vec<InputSegmentData>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<BenchmarkRef>,
}

/// A validated verification task.
#[derive(Debug, Clone)]
pub struct Problem {
    pub system: LinearSystem,
    pub x0: Zonotope,
    pub inputs: InputSchedule,
    pub spec: StlFormula,
    pub spec_text: String,
}

fn perr(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Problem {
        path: path.into(),
        message: message.into(),
    }
}

fn matrix(path: &str, rows: &Rows, nrows: Option<usize>, ncols: Option<usize>) -> Result<DMatrix<f64>> {
    if let Some(r) = nrows {
        if rows.len() != r {
            return Err(perr(path, format!("has {} rows, expected {r}", rows.len())));
        }
    }
    let c = match ncols {
        Some(c) => c,
        None => rows.first().map(Vec::len).unwrap_or(0),
    };
    for (i, row) in rows.iter().enumerate() {
        if row.len() != c {
            return Err(perr(format!("{path}[{i}]"), format!("has {} entries, expected {c}", row.len())));
        }
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(perr(format!("{path}[{i}][{j}]"), "is not finite"));
        }
    }
    Ok(DMatrix::from_fn(rows.len(), c, |i, j| rows[i][j]))
}

fn vector(path: &str, v: &[f64], n: usize) -> Result<DVector<f64>> {
    if v.len() != n {
        return Err(perr(path, format!("has {} entries, expected {n}", v.len())));
    }
    if let Some(j) = v.iter().position(|x| !x.is_finite()) {
        return Err(perr(format!("{path}[{j}]"), "is not finite"));
    }
    Ok(DVector::from_column_slice(v))
}

fn zonotope(path: &str, c: &[f64], g: &Rows, n: usize) -> Result<Zonotope> {
    let center = vector(&format!("{path}.c"), c, n)?;
    let gens = if g.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        matrix(&format!("{path}.G"), g, Some(n), None)?
    };
    Ok(Zonotope::new(center, gens)?.compact())
}

fn schedule_from(path: &str, segs: &[InputSegmentData], m: usize) -> Result<InputSchedule> {
    if segs.is_empty() {
        return Err(perr(path, "is empty"));
    }
    let mut out = Vec::with_capacity(segs.len());
    for (i, s) in segs.iter().enumerate() {
        let p = format!("{path}[{i}]");
        if !s.start.is_finite() {
            return Err(perr(format!("{p}.start"), "is not finite"));
        }
        out.push(InputSegment {
            start: s.start,
            set: zonotope(&p, &s.c, &s.g, m)?,
        });
    }
    InputSchedule::new(out).map_err(|e| perr(path, e.to_string()))
}

impl ClosedLoopSpec {
    /// State `[x; x_ref]`, input `[u_ref; w]`:
    /// `A_cl = [[A + B K, -B K], [0, A]]`, `B_cl = [[B, B], [B, 0]]`.
    pub fn assemble(&self) -> Result<(LinearSystem, InputSchedule)> {
        let a = matrix("closed_loop.A", &self.a, None, Some(self.a.len()))?;
        let n = a.nrows();
        let b = matrix("closed_loop.B", &self.b, Some(n), None)?;
        let m = b.ncols();
        let k = matrix("closed_loop.K", &self.k, Some(m), Some(n))?;
        let w = zonotope("closed_loop.W", &self.w.c, &self.w.g, m)?;
        let bk = &b * &k;
        let mut acl = DMatrix::zeros(2 * n, 2 * n);
        acl.view_mut((0, 0), (n, n)).copy_from(&(&a + &bk));
        acl.view_mut((0, n), (n, n)).copy_from(&(-&bk));
        acl.view_mut((n, n), (n, n)).copy_from(&a);
        let mut bcl = DMatrix::zeros(2 * n, 2 * m);
        bcl.view_mut((0, 0), (n, m)).copy_from(&b);
        bcl.view_mut((0, m), (n, m)).copy_from(&b);
        bcl.view_mut((n, 0), (n, m)).copy_from(&b);
        if self.u_ref.is_empty() {
            return Err(perr("closed_loop.u_ref", "is empty"));
        }
        let mut segs = Vec::with_capacity(self.u_ref.len());
        for (i, r) in self.u_ref.iter().enumerate() {
            let p = format!("closed_loop.u_ref[{i}]");
            let u = vector(&format!("{p}.u"), &r.u, m)?;
            let mut center = DVector::zeros(2 * m);
            center.rows_mut(0, m).copy_from(&u);
            center.rows_mut(m, m).copy_from(&w.center);
            let mut gens = DMatrix::zeros(2 * m, w.num_generators());
            gens.view_mut((m, 0), (m, w.num_generators())).copy_from(&w.generators);
            segs.push(InputSegment {
                start: r.start,
                set: Zonotope::new(center, gens)?,
            });
        }
        let sched = InputSchedule::new(segs).map_err(|e| perr("closed_loop.u_ref", e.to_string()))?;
        Ok((LinearSystem::new(acl, bcl)?, sched))
    }
}

impl ProblemFile {
    /// The file with its benchmark reference expanded; explicit fields win.
    pub fn expanded(&self) -> Result<ProblemFile> {
        let Some(bref) = &self.benchmark else {
            return Ok(self.clone());
        };
        let base = generate_benchmark(&bref.name, &bref.params).map_err(|e| match e {
            Error::Problem { path, message } => perr(format!("benchmark.{path}"), message),
            other => perr("benchmark", other.to_string()),
        })?;
        let mut out = base;
        if self.a.is_some() || self.b.is_some() {
            out.a = self.a.clone();
            out.b = self.b.clone();
            out.closed_loop = None;
        }
        if self.closed_loop.is_some() {
            out.closed_loop = self.closed_loop.clone();
            out.a = None;
            out.b = None;
        }
        if self.x0.is_some() {
            out.x0 = self.x0.clone();
        }
        if self.u.is_some() || self.u_schedule.is_some() {
            out.u = self.u.clone();
            out.u_schedule = self.u_schedule.clone();
        }
        if self.spec.is_some() {
            out.spec = self.spec.clone();
        }
        out.benchmark = Some(bref.clone());
        Ok(out)
    }

    /// Validates every field and builds the model.
    pub fn resolve(&self) -> Result<Problem> {
        let pf = self.expanded()?;
        let (system, inputs) = match (&pf.closed_loop, &pf.a, &pf.b) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
                return Err(perr("closed_loop", "cannot be combined with A/B"));
            }
            (Some(cl), None, None) => {
                if pf.u.is_some() || pf.u_schedule.is_some() {
                    return Err(perr("U", "closed-loop inputs come from closed_loop.u_ref and closed_loop.W"));
                }
                cl.assemble()?
            }
            (None, Some(a), Some(b)) => {
                let a = matrix("A", a, None, Some(a.len()))?;
                let n = a.nrows();
                if n == 0 {
                    return Err(perr("A", "is empty"));
                }
                let b = matrix("B", b, Some(n), None)?;
                let m = b.ncols();
                let inputs = match (&pf.u, &pf.u_schedule) {
                    (_, Some(s)) => schedule_from("U_schedule", s, m)?,
                    (Some(u), None) => InputSchedule::constant(zonotope("U", &u.c, &u.g, m)?),
                    (None, None) => return Err(perr("U", "missing input set")),
                };
                (LinearSystem::new(a, b)?, inputs)
            }
            (None, None, _) => return Err(perr("A", "missing system matrix")),
            (None, Some(_), None) => return Err(perr("B", "missing input matrix")),
        };
        let n = system.dim();
        let x0d = pf.x0.as_ref().ok_or_else(|| perr("X0", "missing initial set"))?;
        let x0 = zonotope("X0", &x0d.c, &x0d.g, n)?;
        let spec_text = pf.spec.clone().ok_or_else(|| perr("spec", "missing specification"))?;
        let spec = parse_stl(&spec_text).map_err(|e| perr("spec", e.to_string()))?;
        spec.check_dims(n).map_err(|e| perr("spec", e.to_string()))?;
        Ok(Problem {
            system,
            x0,
            inputs,
            spec,
            spec_text,
        })
    }

    /// Canonical JSON text.
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| perr("$", e.to_string()))?;
        s.push('\n');
        Ok(s)
    }
}

/// Parses and validates problem JSON.
pub fn parse_problem(text: &str) -> Result<ProblemFile> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let pf: ProblemFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        perr(if path.is_empty() { "$".into() } else { path }, e.into_inner().to_string())
    })?;
    pf.resolve()?;
    Ok(pf)
}

/// Reads and validates a problem file.
pub fn load_problem(path: impl AsRef<Path>) -> Result<ProblemFile> {
    parse_problem(&std::fs::read_to_string(path)?)
}

/// Writes the canonical form of a problem file.
pub fn save_problem(path: impl AsRef<Path>, pf: &ProblemFile) -> Result<()> {
    std::fs::write(path, pf.to_json()?)?;
    Ok(())
}

/// Box `[lo, hi]` in problem-file form.
pub fn box_data(lo: &[f64], hi: &[f64]) -> ZonotopeData {
    let n = lo.len();
    let c = lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect();
    let g = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 0.5 * (hi[i] - lo[i]) } else { 0.0 }).collect())
        .collect();
    ZonotopeData { c, g }
}

/// Dense rows of a matrix.
pub fn rows_of(m: &DMatrix<f64>) -> Rows {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

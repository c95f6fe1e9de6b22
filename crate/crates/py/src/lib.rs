//! Python bindings. Matrices are lists of rows, vectors are lists of floats.

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use reachstl::occupancy::Occupancy as CoreOccupancy;
use reachstl::problem::{generate_benchmark, parse_problem, rows_of, Problem as CoreProblem, ProblemFile};
use reachstl::reach::LinearSystem;
use reachstl::setops::Zonotope as CoreZonotope;
use reachstl::sim::Trajectory;
use reachstl::stl::{formula_horizon, monitor_trace, negate, parse_stl, SampledTrace, StlFormula};
use reachstl::verify::{reach_for_formula, tune_truncation_order, verify, Method, Verdict as CoreVerdict, VerifierConfig};
use reachstl::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::DimensionMismatch { .. }
        | Error::InvalidParameter(_)
        | Error::OutOfRange(_)
        | Error::Parse(_)
        | Error::Unsupported(_)
        | Error::Problem { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn matrix(rows: &[Vec<f64>], what: &str) -> PyResult<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err(format!("{what}: rows have different lengths")));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn vector(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

fn list(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

/// `{ c + G a | a in [-1, 1]^k }`.
#[pyclass(module = "reachstl_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Zonotope {
    inner: CoreZonotope,
}

#[pymethods]
impl Zonotope {
    #[new]
    fn new(c: Vec<f64>, g: Vec<Vec<f64>>) -> PyResult<Self> {
        let g = if g.is_empty() { DMatrix::zeros(c.len(), 0) } else { matrix(&g, "G")? };
        Ok(Self {
            inner: CoreZonotope::new(vector(&c), g).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn from_bounds(lo: Vec<f64>, hi: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: CoreZonotope::from_bounds(&lo, &hi).map_err(py_err)?,
        })
    }

    #[getter]
    fn center(&self) -> Vec<f64> {
        list(&self.inner.center)
    }

    #[getter]
    fn generators(&self) -> Vec<Vec<f64>> {
        rows_of(&self.inner.generators)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Tightest enclosing box as `(lo, hi)`.
    fn interval(&self) -> (Vec<f64>, Vec<f64>) {
        let b = self.inner.interval_enclosure();
        (list(&b.lo), list(&b.hi))
    }

    #[pyo3(signature = (x, tol = 1e-9))]
    fn contains(&self, x: Vec<f64>, tol: f64) -> PyResult<bool> {
        self.inner.contains_point(&vector(&x), tol).map_err(py_err)
    }

    /// Counter-clockwise vertices of the projection onto coordinates `(i, j)` (0-based).
    fn polygon(&self, i: usize, j: usize) -> PyResult<Vec<[f64; 2]>> {
        self.inner.polygon(i, j).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("Zonotope(dim={}, generators={})", self.inner.dim(), self.inner.num_generators())
    }
}

/// Parsed STL formula.
#[pyclass(module = "reachstl_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Formula {
    inner: StlFormula,
}

#[pymethods]
impl Formula {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: parse_stl(text).map_err(|e| py_err(e.into()))?,
        })
    }

    #[getter]
    fn horizon(&self) -> f64 {
        formula_horizon(&self.inner)
    }

    fn negate(&self) -> Self {
        Self {
            inner: negate(&self.inner),
        }
    }

    /// Whether the piecewise-linear trace through `(times[k], states[k])` satisfies the formula.
    fn monitor(&self, times: Vec<f64>, states: Vec<Vec<f64>>) -> PyResult<bool> {
        let trace = SampledTrace {
            times,
            states: states.iter().map(|s| vector(s)).collect(),
        };
        monitor_trace(&self.inner, &trace).map_err(py_err)
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Formula({:?})", self.inner.to_string())
    }
}

/// Verification task: linear system, initial set, inputs and specification.
#[pyclass(module = "reachstl_py", frozen)]
struct Problem {
    file: ProblemFile,
    inner: CoreProblem,
}

impl Problem {
    fn from_file(file: ProblemFile) -> PyResult<Self> {
        let inner = file.resolve().map_err(py_err)?;
        Ok(Self { file, inner })
    }
}

#[pymethods]
impl Problem {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Self::from_file(parse_problem(text).map_err(py_err)?)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Self::from_file(reachstl::problem::load_problem(path).map_err(py_err)?)
    }

    /// Generated benchmark; `params` is a JSON object text.
    #[staticmethod]
    #[pyo3(signature = (name, params = None))]
    fn benchmark(name: &str, params: Option<&str>) -> PyResult<Self> {
        let value = match params {
            Some(p) => serde_json::from_str(p).map_err(|e| PyValueError::new_err(format!("params: {e}")))?,
            None => serde_json::Value::Null,
        };
        Self::from_file(generate_benchmark(name, &value).map_err(py_err)?)
    }

    /// Copy with the specification replaced.
    fn with_spec(&self, spec: &str) -> PyResult<Self> {
        let mut file = self.file.clone();
        file.spec = Some(spec.to_string());
        Self::from_file(file)
    }

    fn to_json(&self) -> PyResult<String> {
        self.file.to_json().map_err(py_err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        reachstl::problem::save_problem(path, &self.file).map_err(py_err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.system.dim()
    }

    #[getter]
    fn num_inputs(&self) -> usize {
        self.inner.system.num_inputs()
    }

    #[getter]
    fn spec(&self) -> Formula {
        Formula {
            inner: self.inner.spec.clone(),
        }
    }

    #[getter]
    fn a(&self) -> Vec<Vec<f64>> {
        rows_of(&self.inner.system.a)
    }

    #[getter]
    fn b(&self) -> Vec<Vec<f64>> {
        rows_of(&self.inner.system.b)
    }

    #[getter]
    fn x0(&self) -> Zonotope {
        Zonotope {
            inner: self.inner.x0.clone(),
        }
    }

    /// Runs the refinement loop. `method` is `"factor"` or `"wholeset"`.
    #[pyo3(signature = (max_iter = 12, dt_init = None, epsilon = None, method = "factor", falsify_only = false))]
    fn verify(
        &self,
        py: Python<'_>,
        max_iter: usize,
        dt_init: Option<f64>,
        epsilon: Option<f64>,
        method: &str,
        falsify_only: bool,
    ) -> PyResult<Verdict> {
        let method = match method {
            "factor" => Method::Factor,
            "wholeset" => Method::Wholeset,
            other => return Err(PyValueError::new_err(format!("unknown method {other:?}"))),
        };
        let mut cfg = VerifierConfig {
            max_iterations: max_iter,
            initial_dt: dt_init,
            method,
            falsify_only,
            ..VerifierConfig::default()
        };
        if let Some(e) = epsilon {
            cfg.epsilon = e;
        }
        let p = &self.inner;
        let v = py
            .detach(|| verify(&p.system, &p.x0, &p.inputs, &p.spec, &cfg))
            .map_err(py_err)?;
        Ok(Verdict { inner: v })
    }

    /// Time-interval reachable sets for the specification at time step `dt`.
    #[pyo3(signature = (dt, kappa = None))]
    fn reach(&self, py: Python<'_>, dt: f64, kappa: Option<usize>) -> PyResult<Vec<Zonotope>> {
        let p = &self.inner;
        let kappa = match kappa {
            Some(k) => k,
            None => tune_truncation_order(&p.system.a, dt, 100).map_err(py_err)?,
        };
        let seq = py
            .detach(|| reach_for_formula(&p.system, &p.x0, &p.inputs, &p.spec, dt, kappa))
            .map_err(py_err)?;
        Ok(seq.rtau.into_iter().map(|inner| Zonotope { inner }).collect())
    }

    /// States from which the specification can still be satisfied.
    #[pyo3(signature = (dt, kappa = None))]
    fn predict(&self, py: Python<'_>, dt: f64, kappa: Option<usize>) -> PyResult<Occupancy> {
        let p = &self.inner;
        let kappa = match kappa {
            Some(k) => k,
            None => tune_truncation_order(&p.system.a, dt, 100).map_err(py_err)?,
        };
        let occ = py
            .detach(|| CoreOccupancy::compute(&p.system, &p.x0, &p.inputs, &p.spec, dt, kappa))
            .map_err(py_err)?;
        Ok(Occupancy { inner: occ })
    }

    /// Exact trajectory for inputs held constant on steps of length `dt`.
    #[pyo3(signature = (x0, inputs, dt, substeps = 1))]
    fn simulate(&self, x0: Vec<f64>, inputs: Vec<Vec<f64>>, dt: f64, substeps: usize) -> PyResult<TrajectoryData> {
        let sys: &LinearSystem = &self.inner.system;
        let inputs: Vec<DVector<f64>> = inputs.iter().map(|u| vector(u)).collect();
        let tr = reachstl::sim::simulate_piecewise(sys, &vector(&x0), &inputs, dt, substeps).map_err(py_err)?;
        Ok(TrajectoryData::from(&tr))
    }

    fn __repr__(&self) -> String {
        format!(
            "Problem(dim={}, inputs={}, spec={:?})",
            self.inner.system.dim(),
            self.inner.system.num_inputs(),
            self.inner.spec_text
        )
    }
}

/// Sampled trajectory.
#[pyclass(module = "reachstl_py", frozen, get_all)]
struct TrajectoryData {
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    inputs: Vec<Vec<f64>>,
    csv: String,
}

impl From<&Trajectory> for TrajectoryData {
    fn from(tr: &Trajectory) -> Self {
        Self {
            times: tr.times.clone(),
            states: tr.states.iter().map(list).collect(),
            inputs: tr.inputs.iter().map(list).collect(),
            csv: tr.to_csv(),
        }
    }
}

/// Outcome of a verification run.
#[pyclass(module = "reachstl_py", frozen)]
struct Verdict {
    inner: CoreVerdict,
}

#[pymethods]
impl Verdict {
    /// `"safe"`, `"unsafe"` or `"unknown"`.
    #[getter]
    fn result(&self) -> &'static str {
        self.inner.result.as_str()
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt
    }

    #[getter]
    fn kappa(&self) -> usize {
        self.inner.kappa
    }

    #[getter]
    fn diagnostics(&self) -> Vec<String> {
        self.inner.diagnostics.clone()
    }

    #[getter]
    fn counterexample(&self) -> Option<TrajectoryData> {
        self.inner.counterexample.as_ref().map(TrajectoryData::from)
    }

    /// Per-iteration records as JSON text.
    fn history_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner.history).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!(
            "Verdict({}, iterations={}, dt={})",
            self.inner.result.as_str(),
            self.inner.iterations,
            self.inner.dt
        )
    }
}

/// Reachable sets cut down to the behaviours that may satisfy the specification.
#[pyclass(module = "reachstl_py", frozen)]
struct Occupancy {
    inner: CoreOccupancy,
}

#[pymethods]
impl Occupancy {
    #[getter]
    fn num_polytopes(&self) -> usize {
        self.inner.legal.len()
    }

    #[getter]
    fn steps(&self) -> usize {
        self.inner.seq.steps()
    }

    /// Whether the point `q` on coordinates `dims` lies in the occupancy of the
    /// time-interval set of step `i`.
    fn contains(&self, i: usize, dims: Vec<usize>, q: Vec<f64>) -> PyResult<bool> {
        self.inner.contains(2 * i + 1, &dims, &vector(&q)).map_err(py_err)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner.to_json()).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }
}

#[pymodule]
fn reachstl_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Zonotope>()?;
    m.add_class::<Formula>()?;
    m.add_class::<Problem>()?;
    m.add_class::<Verdict>()?;
    m.add_class::<Occupancy>()?;
    m.add_class::<TrajectoryData>()?;
    m.add("BENCHMARK_NAMES", reachstl::problem::BENCHMARK_NAMES.to_vec())?;
    Ok(())
}

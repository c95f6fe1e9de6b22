//! Boolean monitor over piecewise-linear traces.
//!
//! Each subformula's truth value is piecewise constant in time, with breakpoints
//! derived from atom crossings, sample times and operator window shifts. Quantifiers
//! are evaluated on those breakpoints plus the midpoints between them.

use std::collections::HashMap;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::ast::{Atom, StlFormula};
use super::transform::formula_horizon;
use crate::error::{Error, Result};

const TIME_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledTrace {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
}

impl SampledTrace {
    pub fn new(times: Vec<f64>, states: Vec<DVector<f64>>) -> Result<Self> {
        let tr = Self { times, states };
        tr.validate()?;
        Ok(tr)
    }

    /// Constant trace at `x` on `[0, t_end]`.
    pub fn constant(x: DVector<f64>, t_end: f64) -> Self {
        Self {
            times: vec![0.0, t_end.max(TIME_TOL)],
            states: vec![x.clone(), x],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.times.is_empty() || self.times.len() != self.states.len() {
            return Err(Error::Trace("times and states must be non-empty and of equal length".into()));
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Trace("times must be strictly increasing".into()));
        }
        let n = self.states[0].len();
        if self.states.iter().any(|s| s.len() != n) {
            return Err(Error::Trace("states must share one dimension".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn start_time(&self) -> f64 {
        self.times[0]
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().expect("non-empty trace")
    }

    /// Linear interpolation, clamped to the trace's time range.
    pub fn state_at(&self, t: f64) -> DVector<f64> {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            return self.states[0].clone();
        }
        if k >= self.times.len() {
            return self.states[self.times.len() - 1].clone();
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = (t - t0) / (t1 - t0);
        &self.states[k - 1] * (1.0 - w) + &self.states[k] * w
    }

    /// Parses CSV with a header row; the first column is time, then `n` state columns.
    /// Extra columns are ignored when `n` is given.
    pub fn from_csv(text: &str, n: Option<usize>) -> Result<Self> {
        let mut times = Vec::new();
        let mut states = Vec::new();
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Trace("empty CSV".into()))?;
        let cols = header.split(',').count();
        let n_state = match n {
            Some(n) => n,
            None => header.split(',').skip(1).filter(|h| h.trim().starts_with('x')).count(),
        };
        if n_state + 1 > cols {
            return Err(Error::Trace(format!("CSV has {cols} columns, need {}", n_state + 1)));
        }
        for (row, line) in lines.enumerate() {
            let vals: std::result::Result<Vec<f64>, _> = line.split(',').map(|v| v.trim().parse::<f64>()).collect();
            let vals = vals.map_err(|e| Error::Trace(format!("row {}: {e}", row + 2)))?;
            if vals.len() < n_state + 1 {
                return Err(Error::Trace(format!("row {}: too few columns", row + 2)));
            }
            times.push(vals[0]);
            states.push(DVector::from_row_slice(&vals[1..=n_state]));
        }
        Self::new(times, states)
    }
}

enum Node {
    True,
    False,
    Atom(Atom),
    Not(usize),
    And(Vec<usize>),
    Or(Vec<usize>),
    Until { a: f64, b: f64, l: usize, r: usize },
    Release { a: f64, b: f64, l: usize, r: usize },
    Finally { a: f64, b: f64, f: usize },
    Globally { a: f64, b: f64, f: usize },
    Next { a: f64, f: usize },
}

struct Monitor<'a> {
    trace: &'a SampledTrace,
    nodes: Vec<Node>,
    breaks: Vec<Vec<f64>>,
    memo: HashMap<(usize, u64), bool>,
    t0: f64,
    t1: f64,
}

fn merge_points(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
    v
}

impl<'a> Monitor<'a> {
    fn new(trace: &'a SampledTrace) -> Self {
        Self {
            trace,
            nodes: Vec::new(),
            breaks: Vec::new(),
            memo: HashMap::new(),
            t0: trace.start_time(),
            t1: trace.end_time(),
        }
    }

    fn clip(&self, pts: impl Iterator<Item = f64>) -> Vec<f64> {
        merge_points(pts.filter(|&t| t >= self.t0 - TIME_TOL && t <= self.t1 + TIME_TOL).collect())
    }

    fn shifted(&self, base: &[f64], shifts: &[f64]) -> Vec<f64> {
        let mut out = base.to_vec();
        for s in shifts {
            out.extend(base.iter().map(|t| t - s));
        }
        self.clip(out.into_iter())
    }

    fn build(&mut self, phi: &StlFormula) -> usize {
        let (node, br) = match phi {
            StlFormula::True => (Node::True, Vec::new()),
            StlFormula::False => (Node::False, Vec::new()),
            StlFormula::Atom(a) => (Node::Atom(a.clone()), self.atom_breaks(a)),
            StlFormula::Not(f) => {
                let i = self.build(f);
                (Node::Not(i), self.breaks[i].clone())
            }
            StlFormula::And(c) | StlFormula::Or(c) => {
                let ids: Vec<usize> = c.iter().map(|f| self.build(f)).collect();
                let br = merge_points(ids.iter().flat_map(|&i| self.breaks[i].iter().copied()).collect());
                let node = if matches!(phi, StlFormula::And(_)) {
                    Node::And(ids)
                } else {
                    Node::Or(ids)
                };
                (node, br)
            }
            StlFormula::Until { a, b, lhs, rhs } | StlFormula::Release { a, b, lhs, rhs } => {
                let l = self.build(lhs);
                let r = self.build(rhs);
                let base = merge_points(self.breaks[l].iter().chain(&self.breaks[r]).copied().collect());
                let br = self.shifted(&base, &[*a, *b]);
                let node = if matches!(phi, StlFormula::Until { .. }) {
                    Node::Until { a: *a, b: *b, l, r }
                } else {
                    Node::Release { a: *a, b: *b, l, r }
                };
                (node, br)
            }
            StlFormula::Finally { a, b, f } | StlFormula::Globally { a, b, f } => {
                let i = self.build(f);
                let br = self.shifted(&self.breaks[i].clone(), &[*a, *b]);
                let node = if matches!(phi, StlFormula::Finally { .. }) {
                    Node::Finally { a: *a, b: *b, f: i }
                } else {
                    Node::Globally { a: *a, b: *b, f: i }
                };
                (node, br)
            }
            StlFormula::Next { a, f } => {
                let i = self.build(f);
                let br = self.shifted(&self.breaks[i].clone(), &[*a]);
                (Node::Next { a: *a, f: i }, br)
            }
        };
        self.nodes.push(node);
        self.breaks.push(br);
        self.nodes.len() - 1
    }

    fn atom_breaks(&self, a: &Atom) -> Vec<f64> {
        let tr = self.trace;
        let g: Vec<f64> = tr.states.iter().map(|x| a.value(x.as_slice()) - a.bound).collect();
        let mut pts = tr.times.clone();
        for k in 0..g.len().saturating_sub(1) {
            let (g0, g1) = (g[k], g[k + 1]);
            if (g0 < 0.0 && g1 > 0.0) || (g0 > 0.0 && g1 < 0.0) {
                let w = g0 / (g0 - g1);
                pts.push(tr.times[k] + w * (tr.times[k + 1] - tr.times[k]));
            }
        }
        merge_points(pts)
    }

    /// Sorted evaluation grid on `[lo, hi]`: breakpoints, endpoints, and midpoints.
    fn grid(&self, lo: f64, hi: f64, br: &[f64]) -> Vec<f64> {
        let mut pts = vec![lo];
        let start = br.partition_point(|&t| t <= lo);
        pts.extend(br[start..].iter().copied().take_while(|&t| t < hi));
        if hi > lo {
            pts.push(hi);
        }
        let pts = merge_points(pts);
        let mut out = Vec::with_capacity(2 * pts.len());
        for w in pts.windows(2) {
            out.push(w[0]);
            out.push(0.5 * (w[0] + w[1]));
        }
        out.push(*pts.last().expect("non-empty grid"));
        out
    }

    fn window(&self, t: f64, a: f64, b: f64) -> Option<(f64, f64)> {
        let lo = (t + a).max(self.t0);
        let hi = (t + b).min(self.t1);
        if lo > hi + TIME_TOL {
            None
        } else {
            Some((lo, hi.max(lo)))
        }
    }

    fn sat(&mut self, id: usize, t: f64) -> bool {
        let key = (id, t.to_bits());
        if let Some(v) = self.memo.get(&key) {
            return *v;
        }
        let v = match &self.nodes[id] {
            Node::True => true,
            Node::False => false,
            Node::Atom(a) => {
                let x = self.trace.state_at(t);
                a.holds(x.as_slice())
            }
            Node::Not(i) => {
                let i = *i;
                !self.sat(i, t)
            }
            Node::And(c) => {
                let c = c.clone();
                c.into_iter().all(|i| self.sat(i, t))
            }
            Node::Or(c) => {
                let c = c.clone();
                c.into_iter().any(|i| self.sat(i, t))
            }
            Node::Next { a, f } => {
                let (a, f) = (*a, *f);
                let s = (t + a).min(self.t1);
                self.sat(f, s)
            }
            Node::Finally { a, b, f } | Node::Globally { a, b, f } => {
                let is_finally = matches!(self.nodes[id], Node::Finally { .. });
                let (a, b, f) = (*a, *b, *f);
                match self.window(t, a, b) {
                    None => !is_finally,
                    Some((lo, hi)) => {
                        let br = self.breaks[f].clone();
                        let g = self.grid(lo, hi, &br);
                        if is_finally {
                            g.into_iter().any(|s| self.sat(f, s))
                        } else {
                            g.into_iter().all(|s| self.sat(f, s))
                        }
                    }
                }
            }
            Node::Until { a, b, l, r } | Node::Release { a, b, l, r } => {
                let release = matches!(self.nodes[id], Node::Release { .. });
                let (a, b, l, r) = (*a, *b, *l, *r);
                // Release is the dual of Until with both operands negated.
                let u = self.until(t, a, b, l, r, release);
                if release {
                    !u
                } else {
                    u
                }
            }
        };
        self.memo.insert(key, v);
        v
    }

    /// `exists s in [t+a, t+b]: rhs(s) and forall s' in [t, s): lhs(s')`, with both operands
    /// negated when `negated` is set.
    fn until(&mut self, t: f64, a: f64, b: f64, l: usize, r: usize, negated: bool) -> bool {
        let Some((lo, hi)) = self.window(t, a, b) else {
            return false;
        };
        let br = merge_points(self.breaks[l].iter().chain(&self.breaks[r]).copied().collect());
        let mut pts = self.grid(t.max(self.t0), hi, &br);
        pts.push(lo);
        let pts = merge_points(pts);
        for s in pts {
            if s >= lo - 1e-12 {
                let rv = self.sat(r, s) != negated;
                if rv {
                    return true;
                }
            }
            let lv = self.sat(l, s) != negated;
            if !lv {
                return false;
            }
        }
        false
    }
}

/// Satisfaction of `phi` at the trace's start time.
pub fn monitor_trace(phi: &StlFormula, trace: &SampledTrace) -> Result<bool> {
    trace.validate()?;
    let need = formula_horizon(phi);
    let have = trace.end_time() - trace.start_time();
    if need > have + TIME_TOL {
        return Err(Error::Trace(format!(
            "trace covers {have} time units but the formula needs {need}"
        )));
    }
    phi.check_dims(trace.dim())?;
    let mut m = Monitor::new(trace);
    let root = m.build(phi);
    Ok(m.sat(root, trace.start_time()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stl::parse_stl;

    fn ramp() -> SampledTrace {
        SampledTrace::new(
            vec![0.0, 2.0],
            vec![DVector::from_vec(vec![0.0]), DVector::from_vec(vec![2.0])],
        )
        .unwrap()
    }

    #[test]
    fn true_on_any_trace() {
        assert!(monitor_trace(&StlFormula::True, &ramp()).unwrap());
    }

    #[test]
    fn monotone_trace() {
        let tr = ramp();
        assert!(monitor_trace(&parse_stl("F[0,1] x1 > 0.7").unwrap(), &tr).unwrap());
        assert!(!monitor_trace(&parse_stl("G[0,1] x1 > 0.7").unwrap(), &tr).unwrap());
        assert!(monitor_trace(&parse_stl("G[0.8,1] x1 > 0.7").unwrap(), &tr).unwrap());
        assert!(!monitor_trace(&parse_stl("G[0.7,1] x1 > 0.7").unwrap(), &tr).unwrap());
        assert!(monitor_trace(&parse_stl("G[0.7,1] x1 >= 0.7").unwrap(), &tr).unwrap());
    }

    #[test]
    fn worked_example_constant_trace() {
        let tr = SampledTrace::constant(DVector::from_vec(vec![3.0, 0.0]), 1.0);
        let phi = parse_stl("N[0.5] x1 > 2 | !F[0,0.8] x2 <= 3").unwrap();
        assert!(monitor_trace(&phi, &tr).unwrap());
    }

    #[test]
    fn until_requires_lhs_until_witness() {
        // x1 = t: "x1 < 0.5 U[0,2] x1 > 0.4" holds (witness at 0.45), "x1 < 0.3 U[0,2] x1 > 0.4" does not.
        let tr = ramp();
        assert!(monitor_trace(&parse_stl("x1 < 0.5 U[0,2] x1 > 0.4").unwrap(), &tr).unwrap());
        assert!(!monitor_trace(&parse_stl("x1 < 0.3 U[0,2] x1 > 0.4").unwrap(), &tr).unwrap());
        // The lhs is required from evaluation time, not from the window start.
        assert!(!monitor_trace(&parse_stl("x1 > 0.2 U[1,2] x1 > 1.5").unwrap(), &tr).unwrap());
    }

    #[test]
    fn release_duality() {
        let tr = ramp();
        let r = parse_stl("x1 > 1 R[0,1.5] x1 < 1.2").unwrap();
        let u = parse_stl("!(x1 <= 1 U[0,1.5] x1 >= 1.2)").unwrap();
        assert_eq!(monitor_trace(&r, &tr).unwrap(), monitor_trace(&u, &tr).unwrap());
        assert!(monitor_trace(&r, &tr).unwrap());
    }

    #[test]
    fn horizon_too_long() {
        assert!(matches!(
            monitor_trace(&parse_stl("G[0,3] x1 > 0").unwrap(), &ramp()),
            Err(Error::Trace(_))
        ));
    }

    #[test]
    fn interpolation() {
        let tr = ramp();
        assert!((tr.state_at(0.5)[0] - 0.5).abs() < 1e-15);
        assert_eq!(tr.state_at(5.0)[0], 2.0);
    }

    #[test]
    fn csv_roundtrip() {
        let tr = SampledTrace::from_csv("t,x1,x2,u1\n0,1,2,9\n1,3,4,9\n", None).unwrap();
        assert_eq!(tr.dim(), 2);
        assert_eq!(tr.state_at(0.5)[1], 3.0);
    }
}

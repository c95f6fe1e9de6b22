//! Rewriting to sampled time: every operator time becomes an integer multiple of `dt`.
//!
//! The output uses two literal shapes over state formulas `psi`:
//! `Next[k dt] psi` (psi at the point `k dt`) and `Next[k dt] G[0,dt] psi`
//! (psi throughout `[k dt, (k+1) dt]`; the `Next` is omitted for `k = 0`).
//! Satisfying the output implies satisfying the input on any continuous trace.

use super::ast::StlFormula;
use super::transform::negation_normal_form;
use crate::error::{Error, Result};

use StlFormula as F;

const ALIGN_TOL: f64 = 1e-9;

struct Sampler {
    dt: f64,
}

impl Sampler {
    fn ratio(&self, t: f64) -> f64 {
        t / self.dt
    }

    fn aligned(&self, t: f64) -> Option<usize> {
        let r = self.ratio(t);
        let k = r.round();
        ((r - k).abs() <= ALIGN_TOL * r.abs().max(1.0)).then_some(k as usize)
    }

    fn floor_steps(&self, t: f64) -> usize {
        self.aligned(t).unwrap_or_else(|| self.ratio(t).floor() as usize)
    }

    fn ceil_steps(&self, t: f64) -> usize {
        self.aligned(t).unwrap_or_else(|| self.ratio(t).ceil() as usize)
    }

    fn point_literal(&self, psi: &StlFormula, k: usize) -> StlFormula {
        F::next(k as f64 * self.dt, psi.clone())
    }

    fn interval_literal(&self, psi: &StlFormula, k: usize) -> StlFormula {
        let block = F::globally(0.0, self.dt, psi.clone());
        if k == 0 {
            block
        } else {
            F::next(k as f64 * self.dt, block)
        }
    }

    /// `phi` at every time in `[lo dt, hi dt]`.
    fn window(&self, phi: &StlFormula, lo: usize, hi: usize) -> StlFormula {
        let mut parts = Vec::with_capacity(2 * (hi - lo) + 1);
        for k in lo..hi {
            parts.push(self.point(phi, k));
            parts.push(self.interval(phi, k));
        }
        parts.push(self.point(phi, hi));
        F::and(parts)
    }

    /// Sufficient condition for `phi` at time `k dt`.
    fn point(&self, phi: &StlFormula, k: usize) -> StlFormula {
        if phi.is_state_formula() {
            return match phi {
                F::True | F::False => phi.clone(),
                F::And(c) => F::and(c.iter().map(|g| self.point(g, k)).collect()),
                _ => self.point_literal(phi, k),
            };
        }
        match phi {
            F::And(c) => F::and(c.iter().map(|g| self.point(g, k)).collect()),
            F::Or(c) => F::or(c.iter().map(|g| self.point(g, k)).collect()),
            F::Next { a, f } => match self.aligned(*a) {
                Some(s) => self.point(f, k + s),
                None => self.interval(f, k + self.floor_steps(*a)),
            },
            F::Globally { a, b, f } => self.window(f, k + self.floor_steps(*a), k + self.ceil_steps(*b)),
            F::Finally { a, b, f } => {
                let (lo, hi) = (self.ceil_steps(*a), self.floor_steps(*b));
                if lo > hi {
                    log::debug!("finally window [{a},{b}] has no sample at dt = {}", self.dt);
                    return F::False;
                }
                F::or((lo..=hi).map(|i| self.point(f, k + i)).collect())
            }
            F::Until { a, b, lhs, rhs } => {
                let (lo, hi) = (self.ceil_steps(*a), self.floor_steps(*b));
                F::or(
                    (lo..=hi)
                        .map(|i| {
                            let mut parts = vec![self.point(rhs, k + i)];
                            parts.extend((0..i).map(|m| self.interval(lhs, k + m)));
                            F::and(parts)
                        })
                        .collect(),
                )
            }
            F::Release { a, b, lhs, rhs } => {
                let lo = self.floor_steps(*a);
                let hi = self.ceil_steps(*b);
                let mut alts = vec![self.window(rhs, k + lo, k + hi)];
                for i in 0..hi {
                    let mut parts = vec![self.point(lhs, k + i)];
                    if i as f64 * self.dt >= *a - ALIGN_TOL * self.dt {
                        parts.push(self.window(rhs, k + lo, k + i));
                    }
                    alts.push(F::and(parts));
                }
                F::or(alts)
            }
            _ => unreachable!("negations are removed before sampling"),
        }
    }

    /// Sufficient condition for `phi` at every time in `[k dt, (k+1) dt]`.
    fn interval(&self, phi: &StlFormula, k: usize) -> StlFormula {
        if phi.is_state_formula() {
            return match phi {
                F::True | F::False => phi.clone(),
                F::And(c) => F::and(c.iter().map(|g| self.interval(g, k)).collect()),
                _ => self.interval_literal(phi, k),
            };
        }
        match phi {
            F::And(c) => F::and(c.iter().map(|g| self.interval(g, k)).collect()),
            F::Or(c) => F::or(c.iter().map(|g| self.interval(g, k)).collect()),
            F::Next { a, f } => match self.aligned(*a) {
                Some(s) => self.interval(f, k + s),
                None => {
                    let lo = k + self.floor_steps(*a);
                    self.window(f, lo, lo + 2)
                }
            },
            F::Globally { a, b, f } => self.window(f, k + self.floor_steps(*a), k + 1 + self.ceil_steps(*b)),
            F::Finally { a, b, f } => {
                let (lo, hi) = (1 + self.ceil_steps(*a), self.floor_steps(*b));
                if lo > hi {
                    return F::False;
                }
                F::or((lo..=hi).map(|i| self.point(f, k + i)).collect())
            }
            F::Until { a, b, lhs, rhs } => {
                let (lo, hi) = (1 + self.ceil_steps(*a), self.floor_steps(*b));
                if lo > hi {
                    return F::False;
                }
                F::or(
                    (lo..=hi)
                        .map(|i| {
                            let mut parts = vec![self.point(rhs, k + i)];
                            parts.extend((0..i).map(|m| self.interval(lhs, k + m)));
                            F::and(parts)
                        })
                        .collect(),
                )
            }
            F::Release { a, b, lhs, rhs } => {
                let lo = self.floor_steps(*a);
                let hi = self.ceil_steps(*b);
                let mut alts = vec![self.window(rhs, k + lo, k + 1 + hi)];
                for i in 1..=hi {
                    let mut parts = vec![self.point(lhs, k + i)];
                    if i as f64 * self.dt >= *a - ALIGN_TOL * self.dt {
                        parts.push(self.window(rhs, k + lo, k + i));
                    }
                    alts.push(F::and(parts));
                }
                F::or(alts)
            }
            _ => unreachable!("negations are removed before sampling"),
        }
    }
}

/// Rewrites `phi` so that all times are integer multiples of `dt`. Windows of
/// `G`/`R` are widened and those of `F`/`U` narrowed; a window that narrows to
/// no sample becomes `false`.
pub fn to_sampled_time(phi: &StlFormula, dt: f64) -> Result<StlFormula> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
    }
    let s = Sampler { dt };
    Ok(s.point(&negation_normal_form(phi), 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stl::parse_stl;

    #[test]
    fn worked_example_expansion() {
        let phi = parse_stl("N[0.5] x1 > 2 | G[0,0.8] x2 > 3").unwrap();
        let st = to_sampled_time(&phi, 0.5).unwrap();
        let r1 = parse_stl("x1 > 2").unwrap();
        let r2 = parse_stl("x2 > 3").unwrap();
        let expected = F::Or(vec![
            F::next(0.5, r1),
            F::And(vec![
                F::next(0.0, r2.clone()),
                F::globally(0.0, 0.5, r2.clone()),
                F::next(0.5, r2.clone()),
                F::next(0.5, F::globally(0.0, 0.5, r2.clone())),
                F::next(1.0, r2),
            ]),
        ]);
        assert_eq!(st, expected);
    }

    #[test]
    fn aligned_next_keeps_time() {
        let st = to_sampled_time(&parse_stl("N[1.5] x1 > 0").unwrap(), 0.5).unwrap();
        assert_eq!(st, F::next(1.5, parse_stl("x1 > 0").unwrap()));
    }

    #[test]
    fn finally_narrowed_to_empty() {
        let st = to_sampled_time(&parse_stl("F[0.1,0.4] x1 > 0").unwrap(), 0.5).unwrap();
        assert_eq!(st, F::False);
    }

    #[test]
    fn globally_widened() {
        let st = to_sampled_time(&parse_stl("G[0.2,0.4] x1 > 0").unwrap(), 0.5).unwrap();
        let r = parse_stl("x1 > 0").unwrap();
        assert_eq!(
            st,
            F::And(vec![F::next(0.0, r.clone()), F::globally(0.0, 0.5, r.clone()), F::next(0.5, r)])
        );
    }

    #[test]
    fn negation_is_normalized_first() {
        let st = to_sampled_time(&parse_stl("!F[0,0.5] x1 <= 0").unwrap(), 0.5).unwrap();
        assert!(matches!(st, F::And(_)));
    }
}

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::reach::{FactorIndexTuples, ReachSequence};
use crate::setops::{BoxBounds, Polytope, Zonotope};
use crate::stl::CheckKind;

/// Polytopes over the factor box `[-1, 1]^p` whose union contains every factor
/// vector that may violate the specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnsafeList {
    pub factor_dim: usize,
    pub polytopes: Vec<Polytope>,
}

impl UnsafeList {
    pub fn empty(factor_dim: usize) -> Self {
        Self {
            factor_dim,
            polytopes: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.polytopes.is_empty()
    }

    pub fn len(&self) -> usize {
        self.polytopes.len()
    }

    /// Whether `alpha` lies in the factor box and in some listed polytope.
    pub fn contains(&self, alpha: &DVector<f64>, tol: f64) -> bool {
        alpha.len() == self.factor_dim
            && alpha.iter().all(|a| a.abs() <= 1.0 + tol)
            && self.polytopes.iter().any(|p| p.contains(alpha, tol))
    }

    /// Fully covers the factor box.
    pub fn is_full_box(&self) -> bool {
        self.polytopes
            .iter()
            .any(|p| Polytope::from_box(self.factor_dim, BoxBounds::UNIT).is_subset_within(p, None).unwrap_or(false))
    }
}

/// Factors whose behaviour can reach `p`, for a set `r` whose first `dep` generators are
/// the dependent ones (matching the leading factors one to one):
/// `{ alpha | C G_dep alpha_dep <= d - C c + sum_j |C g_j| }` over the independent columns `j`.
/// A factor vector outside the result yields a trajectory point outside `p`.
pub fn unsafe_factor_polytope(r: &Zonotope, dep: usize, p: &Polytope, factor_dim: usize) -> Result<Polytope> {
    check_dim("polytope dimension", r.dim(), p.dim())?;
    if dep > factor_dim || dep > r.num_generators() {
        return Err(Error::DimensionMismatch {
            context: "dependent generators",
            expected: factor_dim.min(r.num_generators()),
            found: dep,
        });
    }
    let cg = &p.c * &r.generators;
    let mut c = DMatrix::zeros(p.num_constraints(), factor_dim);
    if dep > 0 {
        c.columns_mut(0, dep).copy_from(&cg.columns(0, dep));
    }
    let mut d = &p.d - &p.c * &r.center;
    for k in 0..p.num_constraints() {
        d[k] += (dep..r.num_generators()).map(|j| cg[(k, j)].abs()).sum::<f64>();
    }
    Ok(Polytope { c, d })
}

/// Same as [`unsafe_factor_polytope`] with the split taken from index tuples.
pub fn unsafe_factor_polytope_for(
    seq: &ReachSequence,
    tuples: &FactorIndexTuples,
    kind: CheckKind,
    step: usize,
    p: &Polytope,
) -> Result<Polytope> {
    let (r, dep) = match kind {
        CheckKind::Point => (seq.rt.get(step), tuples.h.get(step).map(|h| h.len())),
        CheckKind::Interval => (seq.rtau.get(step), tuples.n.get(step).map(|n| n.len())),
    };
    match (r, dep) {
        (Some(r), Some(dep)) => unsafe_factor_polytope(r, dep, p, seq.factor_dim()),
        _ => Err(Error::OutOfRange(format!("step {step} beyond the reach sequence"))),
    }
}

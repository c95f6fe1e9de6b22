use std::collections::HashMap;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::factor::{unsafe_factor_polytope, UnsafeList};
use crate::error::{Error, Result};
use crate::reach::{reach_sequence_scheduled, InputSchedule, LinearSystem, ReachParams, ReachSequence};
use crate::setops::{BoxBounds, Polytope, Zonotope};
use crate::stl::{
    cnf_clauses, complement_polytopes, literal_tree, negation_normal_form, to_sampled_time, Clause, LiteralTree,
    RtlChecklist, SetLiteral, StlFormula, Atom,
};

/// Default cap on the number of unsafe polytopes held at once.
pub const DEFAULT_POLYTOPE_CAP: usize = 10_000;

/// Default cap on pairwise intersections when folding one disjunction.
pub const DEFAULT_FOLD_BUDGET: usize = 256;

/// How the literal tree is combined into unsafe sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CombineStrategy {
    /// Conjunctive normal form when it merges literals on a common set and stays under
    /// the clause cap; direct tree evaluation otherwise.
    Auto,
    Cnf,
    Tree,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckConfig {
    pub polytope_cap: usize,
    pub clause_cap: usize,
    /// See [`FactorChecker::with_fold_budget`].
    pub fold_budget: usize,
    pub strategy: CombineStrategy,
    /// Replace atoms decided by the whole reach sequence with constants first.
    pub pre_evaluate: bool,
}

impl Default for ModelCheckConfig {
    fn default() -> Self {
        Self {
            polytope_cap: DEFAULT_POLYTOPE_CAP,
            clause_cap: 4096,
            fold_budget: DEFAULT_FOLD_BUDGET,
            strategy: CombineStrategy::Auto,
            pre_evaluate: true,
        }
    }
}

/// A formula rewritten to sampled time at a fixed step.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledFormula {
    pub dt: f64,
    pub sampled: StlFormula,
    pub tree: LiteralTree,
    /// Reach steps covering every literal.
    pub steps: usize,
}

/// NNF, sampled-time rewriting and literal extraction.
pub fn compile_formula(phi: &StlFormula, dt: f64) -> Result<CompiledFormula> {
    let sampled = to_sampled_time(&negation_normal_form(phi), dt)?;
    let tree = literal_tree(&sampled, dt)?;
    let steps = tree.steps_needed();
    Ok(CompiledFormula {
        dt,
        sampled,
        tree,
        steps,
    })
}

fn intersect_lists(acc: &[Polytope], next: &[Polytope], cap: usize) -> Result<Vec<Polytope>> {
    let mut out = Vec::new();
    for a in acc {
        for b in next {
            let p = a.intersection(b)?;
            if !p.is_empty_within(Some(BoxBounds::UNIT))? {
                push_unique(&mut out, p);
                if out.len() > cap {
                    return Err(Error::PolytopeCap(cap));
                }
            }
        }
    }
    Ok(out)
}

fn push_unique(list: &mut Vec<Polytope>, p: Polytope) {
    if !list.contains(&p) {
        list.push(p);
    }
}

/// Evaluates literal trees and checklists against one reach sequence.
pub struct FactorChecker<'a> {
    seq: &'a ReachSequence,
    cap: usize,
    fold_budget: usize,
    cache: HashMap<(usize, String), Vec<Polytope>>,
    pub lps: usize,
    /// Disjuncts left out of intersections because of the fold budget.
    pub skipped: usize,
}

impl<'a> FactorChecker<'a> {
    pub fn new(seq: &'a ReachSequence, cap: usize) -> Self {
        Self {
            seq,
            cap,
            fold_budget: DEFAULT_FOLD_BUDGET,
            cache: HashMap::new(),
            lps: 0,
            skipped: 0,
        }
    }

    pub fn with_fold_budget(mut self, budget: usize) -> Self {
        self.fold_budget = budget;
        self
    }

    fn set(&self, j: usize) -> Result<(&'a Zonotope, usize)> {
        self.seq
            .set_at_index(j)
            .ok_or_else(|| Error::OutOfRange(format!("time index {j} beyond the reach sequence")))
    }

    /// Unsafe factor polytopes for a union of polytopes at time index `j`.
    pub fn check_polytopes(&mut self, j: usize, polys: &[Polytope]) -> Result<Vec<Polytope>> {
        let (z, dep) = self.set(j)?;
        let p = self.seq.factor_dim();
        let mut out = Vec::new();
        for poly in polys {
            self.lps += 1;
            if !z.intersects(poly)? {
                continue;
            }
            let k = unsafe_factor_polytope(z, dep, poly, p)?;
            if !k.is_empty_within(Some(BoxBounds::UNIT))? {
                push_unique(&mut out, k);
            }
        }
        Ok(out)
    }

    /// Unsafe factor polytopes for one literal.
    pub fn literal(&mut self, lit: &SetLiteral) -> Result<Vec<Polytope>> {
        let key = (lit.j, format!("{:?}", lit.pred));
        if let Some(v) = self.cache.get(&key) {
            return Ok(v.clone());
        }
        let (z, _) = self.set(lit.j)?;
        let polys = complement_polytopes(&lit.pred, z.dim())?;
        let out = self.check_polytopes(lit.j, &polys)?;
        self.cache.insert(key, out.clone());
        Ok(out)
    }

    fn full(&self) -> Vec<Polytope> {
        vec![Polytope::full_space(self.seq.factor_dim())]
    }

    /// Unsafe polytopes of a literal tree: unions for conjunctions, pairwise
    /// intersections for disjunctions.
    pub fn tree(&mut self, t: &LiteralTree) -> Result<Vec<Polytope>> {
        match t {
            LiteralTree::True => Ok(Vec::new()),
            LiteralTree::False => Ok(self.full()),
            LiteralTree::Lit(l) => self.literal(l),
            LiteralTree::And(c) => {
                let mut out = Vec::new();
                for s in c {
                    for p in self.tree(s)? {
                        push_unique(&mut out, p);
                    }
                    if out.len() > self.cap {
                        return Err(Error::PolytopeCap(self.cap));
                    }
                }
                Ok(out)
            }
            LiteralTree::Or(c) => {
                // Literals first: they are cheap and often empty, which ends the fold.
                let mut order: Vec<&LiteralTree> = c.iter().filter(|s| matches!(s, LiteralTree::Lit(_))).collect();
                order.extend(c.iter().filter(|s| !matches!(s, LiteralTree::Lit(_))));
                let mut parts = Vec::with_capacity(order.len());
                for s in order {
                    let w = self.tree(s)?;
                    if w.is_empty() {
                        return Ok(Vec::new());
                    }
                    parts.push(w);
                }
                self.intersect_all(parts)
            }
        }
    }

    /// Intersection of unions, smallest first. A union whose product with the
    /// running result would exceed the fold budget is left out, which only
    /// enlarges the result.
    fn intersect_all(&mut self, mut parts: Vec<Vec<Polytope>>) -> Result<Vec<Polytope>> {
        parts.retain(|w| !w.iter().any(|p| p.c.nrows() == 0));
        parts.sort_by_key(Vec::len);
        let mut acc = self.full();
        for w in parts {
            if acc.len() * w.len() > self.fold_budget {
                self.skipped += 1;
                continue;
            }
            acc = intersect_lists(&acc, &w, self.cap)?;
            if acc.is_empty() {
                return Ok(acc);
            }
        }
        Ok(acc)
    }

    /// Clause-by-clause evaluation of a conjunctive normal form.
    pub fn clauses(&mut self, clauses: &[Clause]) -> Result<Vec<Polytope>> {
        let mut out = Vec::new();
        'clause: for c in clauses {
            let mut parts = Vec::with_capacity(c.literals.len());
            for lit in &c.literals {
                let w = self.literal(lit)?;
                if w.is_empty() {
                    continue 'clause;
                }
                parts.push(w);
            }
            for p in self.intersect_all(parts)? {
                push_unique(&mut out, p);
            }
            if out.len() > self.cap {
                return Err(Error::PolytopeCap(self.cap));
            }
        }
        Ok(out)
    }

    /// Literal evaluation of a prebuilt checklist.
    pub fn checklist(&mut self, cl: &RtlChecklist) -> Result<Vec<Polytope>> {
        let mut out = Vec::new();
        for clause in &cl.clauses {
            let mut v = self.full();
            for check in &clause.checks {
                let w = self.check_polytopes(check.j, &check.polytopes)?;
                v = intersect_lists(&v, &w, self.cap)?;
                if v.is_empty() {
                    break;
                }
            }
            for p in v {
                push_unique(&mut out, p);
            }
            if out.len() > self.cap {
                return Err(Error::PolytopeCap(self.cap));
            }
        }
        Ok(out)
    }
}

/// Strips rows that are redundant within the factor box and drops polytopes that
/// miss the box.
pub fn finalize_unsafe(factor_dim: usize, polys: Vec<Polytope>) -> Result<UnsafeList> {
    let mut out = Vec::with_capacity(polys.len());
    for p in polys {
        let q = p.normalized().remove_redundant_within(Some(BoxBounds::UNIT))?;
        if !q.is_empty_within(Some(BoxBounds::UNIT))? {
            push_unique(&mut out, q);
        }
    }
    Ok(UnsafeList {
        factor_dim,
        polytopes: out,
    })
}

/// Unsafe factor list for a compiled formula on a given reach sequence.
pub fn unsafe_factors(seq: &ReachSequence, tree: &LiteralTree, cfg: &ModelCheckConfig) -> Result<UnsafeList> {
    let mut checker = FactorChecker::new(seq, cfg.polytope_cap).with_fold_budget(cfg.fold_budget);
    let raw = match cfg.strategy {
        CombineStrategy::Tree => checker.tree(tree)?,
        CombineStrategy::Cnf => {
            let clauses = cnf_clauses(tree, cfg.clause_cap)
                .ok_or_else(|| Error::Unsupported(format!("CNF exceeds {} clauses", cfg.clause_cap)))?;
            checker.clauses(&clauses)?
        }
        CombineStrategy::Auto => match cnf_clauses(tree, cfg.clause_cap) {
            Some(clauses) if clauses.iter().any(|c| c.has_merged_literal()) => checker.clauses(&clauses)?,
            _ => checker.tree(tree)?,
        },
    };
    if checker.skipped > 0 {
        log::debug!("{} disjuncts left out by the fold budget", checker.skipped);
    }
    finalize_unsafe(seq.factor_dim(), raw)
}

/// Whole-set evaluation of a checklist: every clause needs one check whose set
/// avoids all of its polytopes.
pub fn rtl_entailment_wholeset(seq: &ReachSequence, checklist: &RtlChecklist) -> Result<bool> {
    for clause in &checklist.clauses {
        let mut ok = false;
        for check in &clause.checks {
            let (z, _) = seq
                .set_at_index(check.j)
                .ok_or_else(|| Error::OutOfRange(format!("time index {} beyond the reach sequence", check.j)))?;
            let mut clear = true;
            for p in &check.polytopes {
                if z.intersects(p)? {
                    clear = false;
                    break;
                }
            }
            if clear {
                ok = true;
                break;
            }
        }
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Whole-set evaluation of a literal tree.
pub fn wholeset_tree(seq: &ReachSequence, tree: &LiteralTree) -> Result<bool> {
    Ok(match tree {
        LiteralTree::True => true,
        LiteralTree::False => false,
        LiteralTree::Lit(l) => {
            let (z, _) = seq
                .set_at_index(l.j)
                .ok_or_else(|| Error::OutOfRange(format!("time index {} beyond the reach sequence", l.j)))?;
            for p in complement_polytopes(&l.pred, z.dim())? {
                if z.intersects(&p)? {
                    return Ok(false);
                }
            }
            true
        }
        LiteralTree::And(c) => {
            for s in c {
                if !wholeset_tree(seq, s)? {
                    return Ok(false);
                }
            }
            true
        }
        LiteralTree::Or(c) => {
            for s in c {
                if wholeset_tree(seq, s)? {
                    return Ok(true);
                }
            }
            false
        }
    })
}

/// Replaces atoms that hold (or fail) on every set of the sequence by `true` (or `false`).
pub fn pre_evaluate_predicates(seq: &ReachSequence, phi: &StlFormula) -> Result<StlFormula> {
    let sets: Vec<&Zonotope> = seq.rt.iter().chain(seq.rtau.iter()).collect();
    let mut cache: HashMap<String, StlFormula> = HashMap::new();
    let mut err = None;
    let out = phi.map_atoms(&mut |a| {
        let key = format!("{a:?}");
        if let Some(v) = cache.get(&key) {
            return v.clone();
        }
        match decide_atom(&sets, a) {
            Ok(v) => {
                cache.insert(key, v.clone());
                v
            }
            Err(e) => {
                err.get_or_insert(e);
                StlFormula::Atom(a.clone())
            }
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// Per-literal version of [`pre_evaluate_predicates`]: each atom of a literal is
/// decided against the literal's own set only.
pub fn pre_evaluate_local(seq: &ReachSequence, tree: &LiteralTree) -> Result<LiteralTree> {
    let mut cache: HashMap<(usize, String), StlFormula> = HashMap::new();
    let mut err = None;
    let out = tree.map_preds(&mut |lit| {
        let Some((z, _)) = seq.set_at_index(lit.j) else {
            err.get_or_insert(Error::OutOfRange(format!("time index {} beyond the reach sequence", lit.j)));
            return lit.pred.clone();
        };
        lit.pred.map_atoms(&mut |a| {
            let key = (lit.j, format!("{a:?}"));
            if let Some(v) = cache.get(&key) {
                return v.clone();
            }
            match decide_atom(&[z], a) {
                Ok(v) => {
                    cache.insert(key, v.clone());
                    v
                }
                Err(e) => {
                    err.get_or_insert(e);
                    StlFormula::Atom(a.clone())
                }
            }
        })
    });
    match err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// `true` if every set lies strictly inside the atom, `false` if every set lies
/// strictly outside, the atom itself otherwise.
fn decide_atom(sets: &[&Zonotope], a: &Atom) -> Result<StlFormula> {
    let n = sets.first().map(|z| z.dim()).unwrap_or(0);
    let (row, b) = a.closed_halfspace(n)?;
    let holds_closure = Polytope::halfspace(&row, b);
    let neg: Vec<f64> = row.iter().map(|v| -v).collect();
    let fails_closure = Polytope::halfspace(&neg, -b);
    let mut meets_atom = false;
    let mut meets_complement = false;
    for z in sets {
        meets_atom = meets_atom || z.intersects(&holds_closure)?;
        meets_complement = meets_complement || z.intersects(&fails_closure)?;
        if meets_atom && meets_complement {
            break;
        }
    }
    Ok(if !meets_complement {
        StlFormula::True
    } else if !meets_atom {
        StlFormula::False
    } else {
        StlFormula::Atom(a.clone())
    })
}

/// Model check over a fresh reach sequence covering the formula's horizon.
pub fn model_check_scheduled(
    sys: &LinearSystem,
    x0: &Zonotope,
    u: &InputSchedule,
    phi: &StlFormula,
    dt: f64,
    kappa: usize,
    cfg: &ModelCheckConfig,
) -> Result<(UnsafeList, ReachSequence)> {
    phi.check_dims(sys.dim())?;
    let compiled = compile_formula(phi, dt)?;
    let seq = reach_sequence_scheduled(sys, x0, u, &ReachParams::with_steps(dt, compiled.steps.max(1), kappa)?)?;
    let tree = if cfg.pre_evaluate {
        let reduced = pre_evaluate_predicates(&seq, phi)?;
        pre_evaluate_local(&seq, &compile_formula(&reduced, dt)?.tree)?
    } else {
        compiled.tree
    };
    Ok((unsafe_factors(&seq, &tree, cfg)?, seq))
}

/// Unsafe factor list for `phi` with a constant input set.
pub fn model_check(
    sys: &LinearSystem,
    x0: &Zonotope,
    u: &Zonotope,
    phi: &StlFormula,
    dt: f64,
    kappa: usize,
) -> Result<UnsafeList> {
    Ok(model_check_scheduled(
        sys,
        x0,
        &InputSchedule::constant(u.clone()),
        phi,
        dt,
        kappa,
        &ModelCheckConfig::default(),
    )?
    .0)
}

/// Whether `alpha` avoids every listed polytope, i.e. is certified safe.
pub fn is_certified(list: &UnsafeList, alpha: &DVector<f64>) -> bool {
    !list.contains(alpha, 0.0)
}

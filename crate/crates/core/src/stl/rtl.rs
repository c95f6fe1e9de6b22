//! Sampled-time formulas as trees of set literals, their conjunctive normal form,
//! and the intersection checklist over reachable sets.
//!
//! Time index `j` refers to `R(t_{j/2})` for even `j` and to `R(tau_{(j-1)/2})`
//! for odd `j`. A literal `(j, psi)` holds when every state of that set satisfies `psi`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ast::StlFormula;
use super::transform::negation_normal_form;
use crate::error::{Error, Result};
use crate::setops::Polytope;

use StlFormula as F;

const ALIGN_TOL: f64 = 1e-9;

/// Default clause cap for CNF expansion.
pub const DEFAULT_CLAUSE_CAP: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CheckKind {
    Point,
    Interval,
}

impl CheckKind {
    pub fn of_index(j: usize) -> Self {
        if j % 2 == 0 {
            CheckKind::Point
        } else {
            CheckKind::Interval
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetLiteral {
    pub j: usize,
    /// State formula in negation normal form.
    pub pred: StlFormula,
}

impl SetLiteral {
    pub fn kind(&self) -> CheckKind {
        CheckKind::of_index(self.j)
    }

    /// Reach steps needed to evaluate this literal.
    pub fn steps_needed(&self) -> usize {
        self.j.div_ceil(2)
    }

    /// The literal as a sampled-time formula.
    pub fn to_formula(&self, dt: f64) -> StlFormula {
        let k = self.j / 2;
        let inner = if self.j % 2 == 0 {
            self.pred.clone()
        } else {
            F::globally(0.0, dt, self.pred.clone())
        };
        if self.j % 2 == 1 && k == 0 {
            inner
        } else {
            F::next(k as f64 * dt, inner)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LiteralTree {
    True,
    False,
    Lit(SetLiteral),
    And(Vec<LiteralTree>),
    Or(Vec<LiteralTree>),
}

impl LiteralTree {
    pub fn literals(&self) -> Vec<&SetLiteral> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out
    }

    fn collect<'a>(&'a self, out: &mut Vec<&'a SetLiteral>) {
        match self {
            LiteralTree::Lit(l) => out.push(l),
            LiteralTree::And(c) | LiteralTree::Or(c) => c.iter().for_each(|t| t.collect(out)),
            _ => {}
        }
    }

    pub fn steps_needed(&self) -> usize {
        self.literals().iter().map(|l| l.steps_needed()).max().unwrap_or(0)
    }

    /// Replaces each literal's predicate via `f` and re-simplifies.
    pub fn map_preds(&self, f: &mut dyn FnMut(&SetLiteral) -> StlFormula) -> LiteralTree {
        match self {
            LiteralTree::True => LiteralTree::True,
            LiteralTree::False => LiteralTree::False,
            LiteralTree::Lit(l) => match f(l) {
                F::True => LiteralTree::True,
                F::False => LiteralTree::False,
                pred => LiteralTree::Lit(SetLiteral { j: l.j, pred }),
            },
            LiteralTree::And(c) => tree_and(c.iter().map(|t| t.map_preds(f)).collect()),
            LiteralTree::Or(c) => tree_or(c.iter().map(|t| t.map_preds(f)).collect()),
        }
    }
}

fn tree_and(children: Vec<LiteralTree>) -> LiteralTree {
    let mut out = Vec::new();
    for c in children {
        match c {
            LiteralTree::True => {}
            LiteralTree::False => return LiteralTree::False,
            LiteralTree::And(inner) => out.extend(inner),
            other => out.push(other),
        }
    }
    match out.len() {
        0 => LiteralTree::True,
        1 => out.pop().expect("one element"),
        _ => LiteralTree::And(out),
    }
}

/// Disjunction that merges sibling literals on the same set into one predicate.
fn tree_or(children: Vec<LiteralTree>) -> LiteralTree {
    let mut lits: Vec<SetLiteral> = Vec::new();
    let mut rest = Vec::new();
    let mut pending = children;
    while let Some(c) = pending.pop() {
        match c {
            LiteralTree::False => {}
            LiteralTree::True => return LiteralTree::True,
            LiteralTree::Or(inner) => pending.extend(inner),
            LiteralTree::Lit(l) => merge_literal(&mut lits, l),
            other => rest.push(other),
        }
    }
    lits.reverse();
    rest.reverse();
    let mut out: Vec<LiteralTree> = lits.into_iter().map(LiteralTree::Lit).collect();
    out.extend(rest);
    match out.len() {
        0 => LiteralTree::False,
        1 => out.pop().expect("one element"),
        _ => LiteralTree::Or(out),
    }
}

fn merge_literal(lits: &mut Vec<SetLiteral>, l: SetLiteral) {
    match lits.iter_mut().find(|m| m.j == l.j) {
        Some(m) => m.pred = F::or(vec![m.pred.clone(), l.pred]),
        None => lits.push(l),
    }
}

fn index_of(a: f64, dt: f64) -> Result<usize> {
    let r = a / dt;
    let k = r.round();
    if (r - k).abs() > ALIGN_TOL * r.abs().max(1.0) || k < 0.0 {
        return Err(Error::Unsupported(format!("time {a} is not a multiple of the step {dt}")));
    }
    Ok(k as usize)
}

fn is_block(f: &StlFormula, dt: f64) -> Option<&StlFormula> {
    match f {
        F::Globally { a, b, f } if *a == 0.0 && (b - dt).abs() <= ALIGN_TOL * dt && f.is_state_formula() => Some(f),
        _ => None,
    }
}

/// Reads a sampled-time formula as a tree of set literals.
pub fn literal_tree(phi: &StlFormula, dt: f64) -> Result<LiteralTree> {
    if phi.is_state_formula() {
        return Ok(match phi {
            F::True => LiteralTree::True,
            F::False => LiteralTree::False,
            _ => LiteralTree::Lit(SetLiteral {
                j: 0,
                pred: negation_normal_form(phi),
            }),
        });
    }
    if let Some(psi) = is_block(phi, dt) {
        return Ok(LiteralTree::Lit(SetLiteral {
            j: 1,
            pred: negation_normal_form(psi),
        }));
    }
    match phi {
        F::And(c) => Ok(tree_and(c.iter().map(|f| literal_tree(f, dt)).collect::<Result<_>>()?)),
        F::Or(c) => Ok(tree_or(c.iter().map(|f| literal_tree(f, dt)).collect::<Result<_>>()?)),
        F::Next { a, f } => {
            let k = index_of(*a, dt)?;
            if f.is_state_formula() {
                return Ok(match &**f {
                    F::True => LiteralTree::True,
                    F::False => LiteralTree::False,
                    psi => LiteralTree::Lit(SetLiteral {
                        j: 2 * k,
                        pred: negation_normal_form(psi),
                    }),
                });
            }
            if let Some(psi) = is_block(f, dt) {
                return Ok(LiteralTree::Lit(SetLiteral {
                    j: 2 * k + 1,
                    pred: negation_normal_form(psi),
                }));
            }
            Err(Error::Unsupported(format!("residual temporal structure under next: {f}")))
        }
        other => Err(Error::Unsupported(format!("residual temporal structure: {other}"))),
    }
}

/// Disjunction of set literals, at most one per time index.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Clause {
    pub literals: Vec<SetLiteral>,
}

impl Clause {
    fn merged(&self, other: &Clause) -> Clause {
        let mut lits = self.literals.clone();
        for l in &other.literals {
            merge_literal(&mut lits, l.clone());
        }
        Clause { literals: lits }
    }

    /// True if some literal combines predicates from several disjuncts.
    pub fn has_merged_literal(&self) -> bool {
        self.literals.iter().any(|l| matches!(l.pred, F::Or(_)))
    }
}

/// Conjunction of clauses; `None` if the expansion exceeds `cap` clauses.
pub fn cnf_clauses(tree: &LiteralTree, cap: usize) -> Option<Vec<Clause>> {
    let out = match tree {
        LiteralTree::True => Vec::new(),
        LiteralTree::False => vec![Clause::default()],
        LiteralTree::Lit(l) => vec![Clause {
            literals: vec![l.clone()],
        }],
        LiteralTree::And(c) => {
            let mut out = Vec::new();
            for t in c {
                out.extend(cnf_clauses(t, cap)?);
                if out.len() > cap {
                    return None;
                }
            }
            out
        }
        LiteralTree::Or(c) => {
            let mut acc = vec![Clause::default()];
            for t in c {
                let rhs = cnf_clauses(t, cap)?;
                if acc.len().saturating_mul(rhs.len()) > cap {
                    return None;
                }
                let mut next = Vec::with_capacity(acc.len() * rhs.len());
                for a in &acc {
                    for b in &rhs {
                        next.push(a.merged(b));
                    }
                }
                acc = next;
            }
            acc
        }
    };
    let mut dedup: Vec<Clause> = Vec::with_capacity(out.len());
    for c in out {
        if !dedup.contains(&c) {
            dedup.push(c);
        }
    }
    Some(dedup)
}

fn clauses_to_formula(clauses: &[Clause], dt: f64) -> StlFormula {
    let conj: Vec<StlFormula> = clauses
        .iter()
        .map(|c| match c.literals.len() {
            0 => F::False,
            1 => c.literals[0].to_formula(dt),
            _ => F::Or(c.literals.iter().map(|l| l.to_formula(dt)).collect()),
        })
        .collect();
    match conj.len() {
        0 => F::True,
        1 => conj.into_iter().next().expect("one clause"),
        _ => F::And(conj),
    }
}

/// Conjunctive normal form of a sampled-time formula, literals on the same set
/// within a clause merged into one predicate.
pub fn to_cnf(phi: &StlFormula, dt: f64) -> Result<StlFormula> {
    let tree = literal_tree(phi, dt)?;
    let clauses = cnf_clauses(&tree, DEFAULT_CLAUSE_CAP)
        .ok_or_else(|| Error::Unsupported(format!("CNF exceeds {DEFAULT_CLAUSE_CAP} clauses")))?;
    Ok(clauses_to_formula(&clauses, dt))
}

/// Closed polytopes whose union is the complement of a state formula in `R^n`.
pub fn complement_polytopes(pred: &StlFormula, n: usize) -> Result<Vec<Polytope>> {
    let neg = negation_normal_form(&F::not(pred.clone()));
    let terms = dnf_rows(&neg, n)?;
    Ok(terms
        .into_iter()
        .map(|rows| {
            let mut c = DMatrix::zeros(rows.len(), n);
            let mut d = DVector::zeros(rows.len());
            for (i, (a, b)) in rows.into_iter().enumerate() {
                c.row_mut(i).copy_from_slice(&a);
                d[i] = b;
            }
            Polytope { c, d }
        })
        .collect())
}

type Rows = Vec<(Vec<f64>, f64)>;

fn dnf_rows(f: &StlFormula, n: usize) -> Result<Vec<Rows>> {
    Ok(match f {
        F::True => vec![Vec::new()],
        F::False => Vec::new(),
        F::Atom(a) => vec![vec![a.closed_halfspace(n)?]],
        F::Or(c) => {
            let mut out = Vec::new();
            for g in c {
                out.extend(dnf_rows(g, n)?);
            }
            out
        }
        F::And(c) => {
            let mut acc: Vec<Rows> = vec![Vec::new()];
            for g in c {
                let rhs = dnf_rows(g, n)?;
                let mut next = Vec::with_capacity(acc.len() * rhs.len());
                for a in &acc {
                    for b in &rhs {
                        let mut r = a.clone();
                        r.extend(b.iter().cloned());
                        next.push(r);
                    }
                }
                acc = next;
            }
            acc
        }
        other => return Err(Error::Unsupported(format!("not a state formula: {other}"))),
    })
}

/// One intersection check: the set with index `j` must avoid every polytope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RtlCheck {
    pub j: usize,
    pub kind: CheckKind,
    pub pred: StlFormula,
    pub polytopes: Vec<Polytope>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RtlClause {
    pub checks: Vec<RtlCheck>,
}

/// Conjunction of clauses; a clause holds if any of its checks passes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RtlChecklist {
    pub dt: f64,
    pub n: usize,
    pub clauses: Vec<RtlClause>,
}

impl RtlChecklist {
    pub fn steps_needed(&self) -> usize {
        self.clauses
            .iter()
            .flat_map(|c| c.checks.iter())
            .map(|k| k.j.div_ceil(2))
            .max()
            .unwrap_or(0)
    }

    pub fn from_clauses(clauses: &[Clause], dt: f64, n: usize) -> Result<Self> {
        let clauses = clauses
            .iter()
            .map(|c| {
                Ok(RtlClause {
                    checks: c
                        .literals
                        .iter()
                        .map(|l| {
                            Ok(RtlCheck {
                                j: l.j,
                                kind: l.kind(),
                                pred: l.pred.clone(),
                                polytopes: complement_polytopes(&l.pred, n)?,
                            })
                        })
                        .collect::<Result<_>>()?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { dt, n, clauses })
    }
}

/// Builds the intersection checklist for a sampled-time formula.
pub fn to_rtl_checklist(phi: &StlFormula, dt: f64, n: usize) -> Result<RtlChecklist> {
    phi.check_dims(n)?;
    let tree = literal_tree(phi, dt)?;
    let clauses = cnf_clauses(&tree, DEFAULT_CLAUSE_CAP)
        .ok_or_else(|| Error::Unsupported(format!("CNF exceeds {DEFAULT_CLAUSE_CAP} clauses")))?;
    RtlChecklist::from_clauses(&clauses, dt, n)
}

impl fmt::Display for RtlChecklist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (h, c) in self.clauses.iter().enumerate() {
            let parts: Vec<String> = c
                .checks
                .iter()
                .map(|k| {
                    let set = if k.j % 2 == 0 {
                        format!("R(t_{})", k.j / 2)
                    } else {
                        format!("R(tau_{})", k.j / 2)
                    };
                    format!("{set} avoids {} polytope(s) [{}]", k.polytopes.len(), k.pred)
                })
                .collect();
            let body = if parts.is_empty() {
                "unsatisfiable".to_string()
            } else {
                parts.join("  OR  ")
            };
            writeln!(f, "clause {}: {body}", h + 1)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stl::{parse_stl, to_sampled_time};

    fn example_cnf() -> Vec<Clause> {
        let phi = parse_stl("N[0.5] x1 > 2 | !F[0,0.8] x2 <= 3").unwrap();
        let st = to_sampled_time(&phi, 0.5).unwrap();
        cnf_clauses(&literal_tree(&st, 0.5).unwrap(), 1000).unwrap()
    }

    #[test]
    fn worked_example_clause_structure() {
        let clauses = example_cnf();
        assert_eq!(clauses.len(), 5);
        let idx: Vec<Vec<usize>> = clauses.iter().map(|c| c.literals.iter().map(|l| l.j).collect()).collect();
        assert_eq!(idx, vec![vec![2, 0], vec![2, 1], vec![2], vec![2, 3], vec![2, 4]]);
        assert!(clauses[2].has_merged_literal());
    }

    #[test]
    fn merged_literal_polytope() {
        let cl = to_rtl_checklist(
            &to_sampled_time(&parse_stl("N[0.5] x1 > 2 | !F[0,0.8] x2 <= 3").unwrap(), 0.5).unwrap(),
            0.5,
            2,
        )
        .unwrap();
        let p12 = &cl.clauses[2].checks[0].polytopes;
        assert_eq!(p12.len(), 1);
        assert_eq!(p12[0].c, DMatrix::identity(2, 2));
        assert_eq!(p12[0].d, DVector::from_vec(vec![2.0, 3.0]));
        assert_eq!(cl.steps_needed(), 2);
    }

    #[test]
    fn single_atom_one_clause() {
        let cl = to_rtl_checklist(&parse_stl("x1 <= 1").unwrap(), 1.0, 1).unwrap();
        assert_eq!(cl.clauses.len(), 1);
        assert_eq!(cl.clauses[0].checks.len(), 1);
        assert_eq!(cl.clauses[0].checks[0].polytopes.len(), 1);
        assert_eq!(cl.clauses[0].checks[0].kind, CheckKind::Point);
    }

    #[test]
    fn cnf_of_cnf_unchanged() {
        let st = to_sampled_time(&parse_stl("(x1 > 0 | N[1] x2 > 0) & G[0,1] x1 < 5").unwrap(), 1.0).unwrap();
        let once = to_cnf(&st, 1.0).unwrap();
        assert_eq!(to_cnf(&once, 1.0).unwrap(), once);
    }

    #[test]
    fn conjunction_complement_is_union() {
        let p = complement_polytopes(&parse_stl("x1 <= 1 & x2 >= 0").unwrap(), 2).unwrap();
        assert_eq!(p.len(), 2);
    }

    #[test]
    fn residual_structure_rejected() {
        assert!(literal_tree(&parse_stl("F[0,1] x1 > 0").unwrap(), 0.5).is_err());
    }

    #[test]
    fn clause_cap() {
        let st = to_sampled_time(&parse_stl("F[0,10] (x1 > 0 & x2 > 0)").unwrap(), 1.0).unwrap();
        assert!(cnf_clauses(&literal_tree(&st, 1.0).unwrap(), 100).is_none());
    }
}

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Lt,
    Ge,
    Gt,
}

impl Relation {
    pub fn negate(self) -> Relation {
        match self {
            Relation::Le => Relation::Gt,
            Relation::Lt => Relation::Ge,
            Relation::Ge => Relation::Lt,
            Relation::Gt => Relation::Le,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Lt => "<",
            Relation::Ge => ">=",
            Relation::Gt => ">",
        }
    }
}

/// Linear predicate `coeffs . x  rel  bound`. Trailing zero coefficients are trimmed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub coeffs: Vec<f64>,
    pub bound: f64,
    pub rel: Relation,
}

impl Atom {
    pub fn new(mut coeffs: Vec<f64>, bound: f64, rel: Relation) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Self { coeffs, bound, rel }
    }

    /// Atom on a single state `x_{index+1}`.
    pub fn single(index: usize, coeff: f64, bound: f64, rel: Relation) -> Self {
        let mut c = vec![0.0; index + 1];
        c[index] = coeff;
        Self::new(c, bound, rel)
    }

    pub fn negate(&self) -> Atom {
        Atom {
            coeffs: self.coeffs.clone(),
            bound: self.bound,
            rel: self.rel.negate(),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().zip(x).map(|(a, v)| a * v).sum()
    }

    pub fn holds(&self, x: &[f64]) -> bool {
        let v = self.value(x);
        match self.rel {
            Relation::Le => v <= self.bound,
            Relation::Lt => v < self.bound,
            Relation::Ge => v >= self.bound,
            Relation::Gt => v > self.bound,
        }
    }

    /// The atom's closure as `a . x <= b`.
    pub fn closed_halfspace(&self, n: usize) -> Result<(Vec<f64>, f64)> {
        if self.coeffs.len() > n {
            return Err(Error::DimensionMismatch {
                context: "predicate variable index",
                expected: n,
                found: self.coeffs.len(),
            });
        }
        let mut a = self.coeffs.clone();
        a.resize(n, 0.0);
        Ok(match self.rel {
            Relation::Le | Relation::Lt => (a, self.bound),
            Relation::Ge | Relation::Gt => (a.iter().map(|v| -v).collect(), -self.bound),
        })
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate() {
            if *c == 0.0 {
                continue;
            }
            let (sign, mag) = if *c < 0.0 { ("-", -c) } else { ("+", *c) };
            if first {
                if sign == "-" {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            if mag != 1.0 {
                write!(f, "{mag}*")?;
            }
            write!(f, "x{}", i + 1)?;
            first = false;
        }
        if first {
            write!(f, "0")?;
        }
        write!(f, " {} {}", self.rel.symbol(), self.bound)
    }
}

/// Signal temporal logic formula. Interval bounds are in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StlFormula {
    True,
    False,
    Atom(Atom),
    Not(Box<StlFormula>),
    And(Vec<StlFormula>),
    Or(Vec<StlFormula>),
    Until {
        a: f64,
        b: f64,
        lhs: Box<StlFormula>,
        rhs: Box<StlFormula>,
    },
    Release {
        a: f64,
        b: f64,
        lhs: Box<StlFormula>,
        rhs: Box<StlFormula>,
    },
    Finally {
        a: f64,
        b: f64,
        f: Box<StlFormula>,
    },
    Globally {
        a: f64,
        b: f64,
        f: Box<StlFormula>,
    },
    Next {
        a: f64,
        f: Box<StlFormula>,
    },
}

use StlFormula as F;

impl StlFormula {
    pub fn atom(a: Atom) -> Self {
        F::Atom(a)
    }

    pub fn not(f: StlFormula) -> Self {
        F::Not(Box::new(f))
    }

    pub fn next(a: f64, f: StlFormula) -> Self {
        F::Next { a, f: Box::new(f) }
    }

    pub fn globally(a: f64, b: f64, f: StlFormula) -> Self {
        F::Globally { a, b, f: Box::new(f) }
    }

    pub fn finally(a: f64, b: f64, f: StlFormula) -> Self {
        F::Finally { a, b, f: Box::new(f) }
    }

    pub fn until(a: f64, b: f64, lhs: StlFormula, rhs: StlFormula) -> Self {
        F::Until {
            a,
            b,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    pub fn release(a: f64, b: f64, lhs: StlFormula, rhs: StlFormula) -> Self {
        F::Release {
            a,
            b,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    /// Conjunction with flattening and constant absorption.
    pub fn and(children: Vec<StlFormula>) -> Self {
        let mut out = Vec::with_capacity(children.len());
        for c in children {
            match c {
                F::True => {}
                F::False => return F::False,
                F::And(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        dedup(&mut out);
        match out.len() {
            0 => F::True,
            1 => out.pop().expect("one element"),
            _ => F::And(out),
        }
    }

    /// Disjunction with flattening and constant absorption.
    pub fn or(children: Vec<StlFormula>) -> Self {
        let mut out = Vec::with_capacity(children.len());
        for c in children {
            match c {
                F::False => {}
                F::True => return F::True,
                F::Or(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        dedup(&mut out);
        match out.len() {
            0 => F::False,
            1 => out.pop().expect("one element"),
            _ => F::Or(out),
        }
    }

    /// True if the formula contains no temporal operator.
    pub fn is_state_formula(&self) -> bool {
        match self {
            F::True | F::False | F::Atom(_) => true,
            F::Not(f) => f.is_state_formula(),
            F::And(c) | F::Or(c) => c.iter().all(|f| f.is_state_formula()),
            _ => false,
        }
    }

    /// Evaluates a state formula at a point.
    pub fn eval_state(&self, x: &[f64]) -> Option<bool> {
        Some(match self {
            F::True => true,
            F::False => false,
            F::Atom(a) => a.holds(x),
            F::Not(f) => !f.eval_state(x)?,
            F::And(c) => {
                let mut r = true;
                for f in c {
                    r &= f.eval_state(x)?;
                }
                r
            }
            F::Or(c) => {
                let mut r = false;
                for f in c {
                    r |= f.eval_state(x)?;
                }
                r
            }
            _ => return None,
        })
    }

    /// Visits every atom.
    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a Atom>) {
        match self {
            F::True | F::False => {}
            F::Atom(a) => out.push(a),
            F::Not(f) | F::Finally { f, .. } | F::Globally { f, .. } | F::Next { f, .. } => f.collect_atoms(out),
            F::And(c) | F::Or(c) => c.iter().for_each(|f| f.collect_atoms(out)),
            F::Until { lhs, rhs, .. } | F::Release { lhs, rhs, .. } => {
                lhs.collect_atoms(out);
                rhs.collect_atoms(out);
            }
        }
    }

    /// Largest state index referenced plus one.
    pub fn num_vars(&self) -> usize {
        self.atoms().iter().map(|a| a.coeffs.len()).max().unwrap_or(0)
    }

    /// Checks that all atoms fit an `n`-dimensional state.
    pub fn check_dims(&self, n: usize) -> Result<()> {
        let k = self.num_vars();
        if k > n {
            return Err(Error::DimensionMismatch {
                context: "formula variables",
                expected: n,
                found: k,
            });
        }
        Ok(())
    }

    /// Replaces atoms via `f`, simplifying constants.
    pub fn map_atoms(&self, f: &mut dyn FnMut(&Atom) -> StlFormula) -> StlFormula {
        match self {
            F::True => F::True,
            F::False => F::False,
            F::Atom(a) => f(a),
            F::Not(g) => match g.map_atoms(f) {
                F::True => F::False,
                F::False => F::True,
                h => F::not(h),
            },
            F::And(c) => F::and(c.iter().map(|g| g.map_atoms(f)).collect()),
            F::Or(c) => F::or(c.iter().map(|g| g.map_atoms(f)).collect()),
            F::Next { a, f: g } => match g.map_atoms(f) {
                h @ (F::True | F::False) => h,
                h => F::next(*a, h),
            },
            F::Globally { a, b, f: g } => match g.map_atoms(f) {
                h @ (F::True | F::False) => h,
                h => F::globally(*a, *b, h),
            },
            F::Finally { a, b, f: g } => match g.map_atoms(f) {
                h @ (F::True | F::False) => h,
                h => F::finally(*a, *b, h),
            },
            F::Until { a, b, lhs, rhs } => {
                let l = lhs.map_atoms(f);
                let r = rhs.map_atoms(f);
                match (&l, &r) {
                    (_, F::False) => F::False,
                    (F::True, _) => F::finally(*a, *b, r),
                    _ => F::until(*a, *b, l, r),
                }
            }
            F::Release { a, b, lhs, rhs } => {
                let l = lhs.map_atoms(f);
                let r = rhs.map_atoms(f);
                match (&l, &r) {
                    (_, F::True) => F::True,
                    (F::False, _) => F::globally(*a, *b, r),
                    _ => F::release(*a, *b, l, r),
                }
            }
        }
    }
}

fn dedup(v: &mut Vec<StlFormula>) {
    let mut out: Vec<StlFormula> = Vec::with_capacity(v.len());
    for f in v.drain(..) {
        if !out.contains(&f) {
            out.push(f);
        }
    }
    *v = out;
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

impl fmt::Display for StlFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            F::True => write!(f, "true"),
            F::False => write!(f, "false"),
            F::Atom(a) => write!(f, "{a}"),
            F::Not(g) => write!(f, "!({g})"),
            F::And(c) => {
                let parts: Vec<String> = c.iter().map(|g| format!("({g})")).collect();
                write!(f, "{}", parts.join(" & "))
            }
            F::Or(c) => {
                let parts: Vec<String> = c.iter().map(|g| format!("({g})")).collect();
                write!(f, "{}", parts.join(" | "))
            }
            F::Until { a, b, lhs, rhs } => write!(f, "({lhs}) U[{},{}] ({rhs})", fmt_num(*a), fmt_num(*b)),
            F::Release { a, b, lhs, rhs } => write!(f, "({lhs}) R[{},{}] ({rhs})", fmt_num(*a), fmt_num(*b)),
            F::Finally { a, b, f: g } => write!(f, "F[{},{}] ({g})", fmt_num(*a), fmt_num(*b)),
            F::Globally { a, b, f: g } => write!(f, "G[{},{}] ({g})", fmt_num(*a), fmt_num(*b)),
            F::Next { a, f: g } => write!(f, "N[{}] ({g})", fmt_num(*a)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trims_trailing_zeros() {
        let a = Atom::new(vec![1.0, 0.0, 0.0], 2.0, Relation::Le);
        assert_eq!(a.coeffs, vec![1.0]);
    }

    #[test]
    fn negation_flips_relation() {
        let a = Atom::single(0, 1.0, 2.0, Relation::Le);
        assert_eq!(a.negate().rel, Relation::Gt);
        assert!(a.holds(&[2.0]));
        assert!(!a.negate().holds(&[2.0]));
    }

    #[test]
    fn closed_halfspace_of_greater() {
        let a = Atom::single(1, 1.0, 3.0, Relation::Gt);
        assert_eq!(a.closed_halfspace(2).unwrap(), (vec![0.0, -1.0], -3.0));
        assert!(a.closed_halfspace(1).is_err());
    }

    #[test]
    fn constant_absorption() {
        let p = F::Atom(Atom::single(0, 1.0, 0.0, Relation::Le));
        assert_eq!(F::and(vec![F::True, p.clone()]), p);
        assert_eq!(F::or(vec![F::True, p.clone()]), F::True);
        assert_eq!(F::and(vec![F::False, p.clone()]), F::False);
        assert_eq!(F::or(vec![]), F::False);
    }

    #[test]
    fn display_atom() {
        let a = Atom::new(vec![2.0, -3.0], 1.0, Relation::Le);
        assert_eq!(a.to_string(), "2*x1 - 3*x2 <= 1");
    }
}

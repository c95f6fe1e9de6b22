use super::ast::StlFormula;
use StlFormula as F;

/// Rewrites derived operators into `Until`, `Not`, `And`, `Or` and atoms.
pub fn desugar(phi: &StlFormula) -> StlFormula {
    match phi {
        F::True | F::False | F::Atom(_) => phi.clone(),
        F::Not(f) => F::not(desugar(f)),
        F::And(c) => F::And(c.iter().map(desugar).collect()),
        F::Or(c) => F::Or(c.iter().map(desugar).collect()),
        F::Until { a, b, lhs, rhs } => F::until(*a, *b, desugar(lhs), desugar(rhs)),
        F::Release { a, b, lhs, rhs } => F::not(F::until(
            *a,
            *b,
            F::not(desugar(lhs)),
            F::not(desugar(rhs)),
        )),
        F::Finally { a, b, f } => F::until(*a, *b, F::True, desugar(f)),
        F::Globally { a, b, f } => F::not(F::until(*a, *b, F::True, F::not(desugar(f)))),
        F::Next { a, f } => F::until(*a, *a, F::True, desugar(f)),
    }
}

/// Pushes negations down to atoms using the operator dualities.
pub fn negation_normal_form(phi: &StlFormula) -> StlFormula {
    nnf(phi, false)
}

fn nnf(phi: &StlFormula, neg: bool) -> StlFormula {
    match phi {
        F::True => {
            if neg {
                F::False
            } else {
                F::True
            }
        }
        F::False => {
            if neg {
                F::True
            } else {
                F::False
            }
        }
        F::Atom(a) => F::Atom(if neg { a.negate() } else { a.clone() }),
        F::Not(f) => nnf(f, !neg),
        F::And(c) => {
            let parts = c.iter().map(|f| nnf(f, neg)).collect();
            if neg {
                F::or(parts)
            } else {
                F::and(parts)
            }
        }
        F::Or(c) => {
            let parts = c.iter().map(|f| nnf(f, neg)).collect();
            if neg {
                F::and(parts)
            } else {
                F::or(parts)
            }
        }
        F::Until { a, b, lhs, rhs } => {
            let (l, r) = (nnf(lhs, neg), nnf(rhs, neg));
            if neg {
                F::release(*a, *b, l, r)
            } else {
                F::until(*a, *b, l, r)
            }
        }
        F::Release { a, b, lhs, rhs } => {
            let (l, r) = (nnf(lhs, neg), nnf(rhs, neg));
            if neg {
                F::until(*a, *b, l, r)
            } else {
                F::release(*a, *b, l, r)
            }
        }
        F::Finally { a, b, f } => {
            let g = nnf(f, neg);
            if neg {
                F::globally(*a, *b, g)
            } else {
                F::finally(*a, *b, g)
            }
        }
        F::Globally { a, b, f } => {
            let g = nnf(f, neg);
            if neg {
                F::finally(*a, *b, g)
            } else {
                F::globally(*a, *b, g)
            }
        }
        F::Next { a, f } => F::next(*a, nnf(f, neg)),
    }
}

/// Logical negation with double negations and constants folded.
pub fn negate(phi: &StlFormula) -> StlFormula {
    match phi {
        F::True => F::False,
        F::False => F::True,
        F::Not(f) => (**f).clone(),
        other => F::not(other.clone()),
    }
}

/// Latest time (relative to evaluation time 0) the formula depends on.
pub fn formula_horizon(phi: &StlFormula) -> f64 {
    match phi {
        F::True | F::False | F::Atom(_) => 0.0,
        F::Not(f) => formula_horizon(f),
        F::And(c) | F::Or(c) => c.iter().map(formula_horizon).fold(0.0, f64::max),
        F::Until { b, lhs, rhs, .. } | F::Release { b, lhs, rhs, .. } => {
            b + formula_horizon(lhs).max(formula_horizon(rhs))
        }
        F::Finally { b, f, .. } | F::Globally { b, f, .. } => b + formula_horizon(f),
        F::Next { a, f } => a + formula_horizon(f),
    }
}

/// True if `Not` only wraps atoms (or never occurs).
pub fn is_nnf(phi: &StlFormula) -> bool {
    match phi {
        F::True | F::False | F::Atom(_) => true,
        F::Not(f) => matches!(**f, F::Atom(_)),
        F::And(c) | F::Or(c) => c.iter().all(is_nnf),
        F::Until { lhs, rhs, .. } | F::Release { lhs, rhs, .. } => is_nnf(lhs) && is_nnf(rhs),
        F::Finally { f, .. } | F::Globally { f, .. } | F::Next { f, .. } => is_nnf(f),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stl::ast::{Atom, Relation};
    use crate::stl::parse_stl;

    fn rho(i: usize) -> StlFormula {
        F::Atom(Atom::single(i, 1.0, 0.0, Relation::Le))
    }

    #[test]
    fn desugar_globally() {
        let g = F::globally(0.0, 1.0, rho(0));
        assert_eq!(desugar(&g), F::not(F::until(0.0, 1.0, F::True, F::not(rho(0)))));
    }

    #[test]
    fn desugar_next() {
        assert_eq!(desugar(&F::next(0.3, rho(0))), F::until(0.3, 0.3, F::True, rho(0)));
    }

    #[test]
    fn nnf_worked_example() {
        let f = parse_stl("N[0.5] x1 > 2 | !F[0,0.8] x2 <= 3").unwrap();
        let expected = parse_stl("N[0.5] x1 > 2 | G[0,0.8] x2 > 3").unwrap();
        assert_eq!(negation_normal_form(&f), expected);
    }

    #[test]
    fn de_morgan() {
        let f = F::not(F::And(vec![rho(0), rho(1)]));
        assert_eq!(
            negation_normal_form(&f),
            F::Or(vec![F::Atom(Atom::single(0, 1.0, 0.0, Relation::Gt)), F::Atom(Atom::single(1, 1.0, 0.0, Relation::Gt))])
        );
    }

    #[test]
    fn nnf_output_is_nnf() {
        let f = parse_stl("!(x1 > 0 U[0,1] !G[0,2] (x2 < 1 | !x1 > 3))").unwrap();
        assert!(is_nnf(&negation_normal_form(&f)));
    }

    #[test]
    fn negate_constants() {
        assert_eq!(negate(&F::True), F::False);
        assert_eq!(negate(&negate(&rho(0))), rho(0));
    }

    #[test]
    fn horizons() {
        assert_eq!(formula_horizon(&rho(0)), 0.0);
        let robot = parse_stl("F[0,4](x1 > 0 & N[6] x2 > 0) & G[0,10] !x3 > 0").unwrap();
        assert_eq!(formula_horizon(&robot), 10.0);
        let ex = parse_stl("N[0.5] x1 > 2 | !F[0,0.8] x2 <= 3").unwrap();
        assert_eq!(formula_horizon(&ex), 0.8);
    }
}

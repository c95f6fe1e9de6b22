//! Recursive-descent parser for the ASCII formula syntax.
//!
//! Precedence from tightest: `!`, unary temporal operators (`F`, `G`, `N`), the
//! binary temporal operators (`U`, `R`, right associative), `&`, `|`.

use thiserror::Error;

use super::ast::{Atom, Relation, StlFormula};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Var(usize),
    True,
    False,
    Finally,
    Globally,
    Next,
    Until,
    Release,
    Not,
    And,
    Or,
    LParen,
    RParen,
    LBrack,
    RBrack,
    Comma,
    Star,
    Plus,
    Minus,
    Rel(Relation),
    Eof,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, column, message: String| ParseError { line, column, message };
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let mut adv = 1;
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBrack,
            ']' => Tok::RBrack,
            ',' => Tok::Comma,
            '*' => Tok::Star,
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '!' => Tok::Not,
            '&' => {
                if chars.get(i + 1) == Some(&'&') {
                    adv = 2;
                }
                Tok::And
            }
            '|' => {
                if chars.get(i + 1) == Some(&'|') {
                    adv = 2;
                }
                Tok::Or
            }
            '<' | '>' => {
                let eq = chars.get(i + 1) == Some(&'=');
                if eq {
                    adv = 2;
                }
                Tok::Rel(match (c, eq) {
                    ('<', true) => Relation::Le,
                    ('<', false) => Relation::Lt,
                    ('>', true) => Relation::Ge,
                    _ => Relation::Gt,
                })
            }
            d if d.is_ascii_digit() || d == '.' => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_digit() || chars[j] == '.') {
                    j += 1;
                }
                if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                    let mut k = j + 1;
                    if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                        k += 1;
                    }
                    if k < chars.len() && chars[k].is_ascii_digit() {
                        while k < chars.len() && chars[k].is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                let s: String = chars[i..j].iter().collect();
                adv = j - i;
                Tok::Num(
                    s.parse::<f64>()
                        .map_err(|_| err(l0, c0, format!("malformed number '{s}'")))?,
                )
            }
            a if a.is_ascii_alphabetic() || a == '_' => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                let s: String = chars[i..j].iter().collect();
                adv = j - i;
                match s.as_str() {
                    "true" => Tok::True,
                    "false" => Tok::False,
                    "F" => Tok::Finally,
                    "G" => Tok::Globally,
                    "N" => Tok::Next,
                    "U" => Tok::Until,
                    "R" => Tok::Release,
                    "inf" | "Inf" | "infinity" => {
                        return Err(err(l0, c0, "unbounded temporal operators are not supported".into()))
                    }
                    _ => {
                        let idx = s
                            .strip_prefix('x')
                            .filter(|r| !r.is_empty() && r.chars().all(|ch| ch.is_ascii_digit()))
                            .and_then(|r| r.parse::<usize>().ok())
                            .filter(|k| *k >= 1);
                        match idx {
                            Some(k) => Tok::Var(k - 1),
                            None => return Err(err(l0, c0, format!("unknown variable '{s}'"))),
                        }
                    }
                }
            }
            other => return Err(err(l0, c0, format!("unexpected character '{other}'"))),
        };
        out.push(Spanned {
            tok,
            line: l0,
            column: c0,
        });
        i += adv;
        col += adv;
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, message: impl Into<String>) -> ParseError {
        let s = &self.toks[self.pos];
        ParseError {
            line: s.line,
            column: s.column,
            message: message.into(),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error_here(format!("expected {what}")))
        }
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        let neg = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        match self.bump() {
            Tok::Num(v) => Ok(if neg { -v } else { v }),
            _ => {
                self.pos -= 1;
                Err(self.error_here("expected a number"))
            }
        }
    }

    fn interval(&mut self) -> Result<(f64, f64), ParseError> {
        self.expect(Tok::LBrack, "'['")?;
        let start = self.pos;
        let a = self.number()?;
        self.expect(Tok::Comma, "','")?;
        let b = self.number()?;
        self.expect(Tok::RBrack, "']'")?;
        if a < 0.0 || b < a {
            let s = &self.toks[start];
            return Err(ParseError {
                line: s.line,
                column: s.column,
                message: format!("malformed interval [{a},{b}]: need 0 <= a <= b"),
            });
        }
        Ok((a, b))
    }

    fn or_expr(&mut self) -> Result<StlFormula, ParseError> {
        let mut parts = vec![self.and_expr()?];
        while *self.peek() == Tok::Or {
            self.bump();
            parts.push(self.and_expr()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().expect("one part")
        } else {
            StlFormula::Or(parts)
        })
    }

    fn and_expr(&mut self) -> Result<StlFormula, ParseError> {
        let mut parts = vec![self.binary_temporal()?];
        while *self.peek() == Tok::And {
            self.bump();
            parts.push(self.binary_temporal()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().expect("one part")
        } else {
            StlFormula::And(parts)
        })
    }

    fn binary_temporal(&mut self) -> Result<StlFormula, ParseError> {
        let lhs = self.unary()?;
        match self.peek() {
            Tok::Until => {
                self.bump();
                let (a, b) = self.interval()?;
                let rhs = self.binary_temporal()?;
                Ok(StlFormula::until(a, b, lhs, rhs))
            }
            Tok::Release => {
                self.bump();
                let (a, b) = self.interval()?;
                let rhs = self.binary_temporal()?;
                Ok(StlFormula::release(a, b, lhs, rhs))
            }
            _ => Ok(lhs),
        }
    }

    fn unary(&mut self) -> Result<StlFormula, ParseError> {
        match self.peek() {
            Tok::Not => {
                self.bump();
                Ok(StlFormula::not(self.unary()?))
            }
            Tok::Finally => {
                self.bump();
                let (a, b) = self.interval()?;
                Ok(StlFormula::finally(a, b, self.unary()?))
            }
            Tok::Globally => {
                self.bump();
                let (a, b) = self.interval()?;
                Ok(StlFormula::globally(a, b, self.unary()?))
            }
            Tok::Next => {
                self.bump();
                self.expect(Tok::LBrack, "'['")?;
                let start = self.pos;
                let a = self.number()?;
                self.expect(Tok::RBrack, "']'")?;
                if a < 0.0 {
                    let s = &self.toks[start];
                    return Err(ParseError {
                        line: s.line,
                        column: s.column,
                        message: format!("malformed next offset {a}: must be non-negative"),
                    });
                }
                Ok(StlFormula::next(a, self.unary()?))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<StlFormula, ParseError> {
        match self.peek() {
            Tok::LParen => {
                self.bump();
                let f = self.or_expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(f)
            }
            Tok::True => {
                self.bump();
                Ok(StlFormula::True)
            }
            Tok::False => {
                self.bump();
                Ok(StlFormula::False)
            }
            Tok::Num(_) | Tok::Var(_) | Tok::Plus | Tok::Minus => self.atom(),
            _ => Err(self.error_here("expected a formula")),
        }
    }

    /// Linear expression; returns (coefficients, constant).
    fn linear(&mut self) -> Result<(Vec<f64>, f64), ParseError> {
        let mut coeffs: Vec<f64> = Vec::new();
        let mut constant = 0.0;
        let mut sign = match self.peek() {
            Tok::Minus => {
                self.bump();
                -1.0
            }
            Tok::Plus => {
                self.bump();
                1.0
            }
            _ => 1.0,
        };
        loop {
            match self.bump() {
                Tok::Num(v) => {
                    if *self.peek() == Tok::Star {
                        self.bump();
                        match self.bump() {
                            Tok::Var(k) => add_coeff(&mut coeffs, k, sign * v),
                            _ => {
                                self.pos -= 1;
                                return Err(self.error_here("expected a variable after '*'"));
                            }
                        }
                    } else {
                        constant += sign * v;
                    }
                }
                Tok::Var(k) => add_coeff(&mut coeffs, k, sign),
                _ => {
                    self.pos -= 1;
                    return Err(self.error_here("expected a term"));
                }
            }
            sign = match self.peek() {
                Tok::Plus => 1.0,
                Tok::Minus => -1.0,
                _ => return Ok((coeffs, constant)),
            };
            self.bump();
        }
    }

    fn atom(&mut self) -> Result<StlFormula, ParseError> {
        let (lc, lk) = self.linear()?;
        let rel = match self.bump() {
            Tok::Rel(r) => r,
            _ => {
                self.pos -= 1;
                return Err(self.error_here("expected a relation (<=, <, >=, >)"));
            }
        };
        let (rc, rk) = self.linear()?;
        let n = lc.len().max(rc.len());
        let coeffs: Vec<f64> = (0..n)
            .map(|i| lc.get(i).copied().unwrap_or(0.0) - rc.get(i).copied().unwrap_or(0.0))
            .collect();
        Ok(StlFormula::Atom(Atom::new(coeffs, rk - lk, rel)))
    }
}

fn add_coeff(coeffs: &mut Vec<f64>, k: usize, v: f64) {
    if coeffs.len() <= k {
        coeffs.resize(k + 1, 0.0);
    }
    coeffs[k] += v;
}

/// Parses a formula from its ASCII text form.
pub fn parse_stl(text: &str) -> Result<StlFormula, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    let f = p.or_expr()?;
    if *p.peek() != Tok::Eof {
        return Err(p.error_here("unexpected trailing input"));
    }
    Ok(f)
}

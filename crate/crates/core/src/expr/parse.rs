//! Recursive-descent parser for the expression mini-language.
//!
//! ```text
//! lattice  := additive (('v' | '^') additive)*      -- no mixing without parentheses
//! additive := term (('+' | '-') term)*
//! term     := unary ('*' unary)*                    -- at most one non-constant factor
//! unary    := '-' unary | atom
//! atom     := number | 'd(' ident ')' | '|' lattice '|' | '(' lattice ')'
//! ```

use super::{GeneratorId, LatticeExpr};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Gen(GeneratorId),
    Plus,
    Minus,
    Star,
    Bar,
    LParen,
    RParen,
    Join,
    Meet,
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        let tok = match c {
            ' ' | '\t' | '\n' | '\r' => {
                i += 1;
                continue;
            }
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '|' => Tok::Bar,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            'v' => Tok::Join,
            '^' => Tok::Meet,
            '0'..='9' | '.' => {
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
                let x: f64 = s.parse().map_err(|_| Error::Syntax {
                    pos: start,
                    msg: format!("malformed number {s:?}"),
                })?;
                if !x.is_finite() {
                    return Err(Error::Syntax {
                        pos: start,
                        msg: format!("non-finite number {s:?}"),
                    });
                }
                out.push((start, Tok::Num(x)));
                i = j;
                continue;
            }
            'd' => {
                let mut j = i + 1;
                while j < chars.len() && chars[j].is_whitespace() {
                    j += 1;
                }
                if j >= chars.len() || chars[j] != '(' {
                    return Err(Error::UnknownToken {
                        pos: start,
                        token: "d".into(),
                    });
                }
                let name_start = j + 1;
                let close = chars[name_start..]
                    .iter()
                    .position(|&c| c == ')')
                    .map(|k| name_start + k)
                    .ok_or(Error::Syntax {
                        pos: start,
                        msg: "unterminated generator d(...)".into(),
                    })?;
                let name: String = chars[name_start..close].iter().collect();
                let id = GeneratorId::new(name.trim()).map_err(|_| Error::Syntax {
                    pos: name_start,
                    msg: format!("invalid generator name {name:?}"),
                })?;
                out.push((start, Tok::Gen(id)));
                i = close + 1;
                continue;
            }
            other => {
                return Err(Error::UnknownToken {
                    pos: start,
                    token: other.to_string(),
                })
            }
        };
        out.push((start, tok));
        i += 1;
    }
    Ok(out)
}

enum Value {
    Num(f64),
    Expr(LatticeExpr),
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |(p, _)| *p)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Syntax {
            pos: self.pos(),
            msg: msg.into(),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if self.peek() == Some(&tok) {
            self.at += 1;
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn expr_value(&self, v: Value, pos: usize) -> Result<LatticeExpr> {
        match v {
            Value::Expr(e) => Ok(e),
            Value::Num(_) => Err(Error::Syntax {
                pos,
                msg: "a bare constant is not a lattice expression".into(),
            }),
        }
    }

    fn lattice(&mut self) -> Result<LatticeExpr> {
        let start = self.pos();
        let first = self.additive()?;
        let mut acc = self.expr_value(first, start)?;
        let mut op: Option<Tok> = None;
        while let Some(t) = self.peek().cloned() {
            if t != Tok::Join && t != Tok::Meet {
                break;
            }
            if let Some(prev) = &op {
                if *prev != t {
                    return self.err("mixed 'v' and '^' need parentheses");
                }
            }
            self.at += 1;
            let p = self.pos();
            let rhs = self.additive()?;
            let rhs = self.expr_value(rhs, p)?;
            acc = if t == Tok::Join {
                LatticeExpr::join(acc, rhs)
            } else {
                LatticeExpr::meet(acc, rhs)
            };
            op = Some(t);
        }
        Ok(acc)
    }

    fn additive(&mut self) -> Result<Value> {
        let start = self.pos();
        let first = self.term()?;
        if !matches!(self.peek(), Some(Tok::Plus | Tok::Minus)) {
            return Ok(first);
        }
        let mut acc = self.expr_value(first, start)?;
        while let Some(t) = self.peek().cloned() {
            let negate = match t {
                Tok::Plus => false,
                Tok::Minus => true,
                _ => break,
            };
            self.at += 1;
            let p = self.pos();
            let rhs = self.term()?;
            let rhs = self.expr_value(rhs, p)?;
            let rhs = if negate { LatticeExpr::neg(rhs) } else { rhs };
            acc = LatticeExpr::sum(acc, rhs);
        }
        Ok(Value::Expr(acc))
    }

    fn term(&mut self) -> Result<Value> {
        let mut coeff: Option<f64> = None;
        let mut expr: Option<LatticeExpr> = None;
        loop {
            let p = self.pos();
            match self.unary()? {
                Value::Num(x) => coeff = Some(coeff.unwrap_or(1.0) * x),
                Value::Expr(e) => {
                    if expr.is_some() {
                        return Err(Error::Syntax {
                            pos: p,
                            msg: "product of two non-constant factors".into(),
                        });
                    }
                    expr = Some(e);
                }
            }
            if self.peek() == Some(&Tok::Star) {
                self.at += 1;
            } else {
                break;
            }
        }
        Ok(match (coeff, expr) {
            (Some(c), Some(e)) => Value::Expr(LatticeExpr::scale(c, e)),
            (None, Some(e)) => Value::Expr(e),
            (Some(c), None) => Value::Num(c),
            (None, None) => unreachable!("term has at least one factor"),
        })
    }

    fn unary(&mut self) -> Result<Value> {
        if self.peek() == Some(&Tok::Minus) {
            self.at += 1;
            return Ok(match self.unary()? {
                Value::Num(x) => Value::Num(-x),
                Value::Expr(e) => Value::Expr(LatticeExpr::neg(e)),
            });
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Value> {
        match self.peek().cloned() {
            Some(Tok::Num(x)) => {
                self.at += 1;
                Ok(Value::Num(x))
            }
            Some(Tok::Gen(id)) => {
                self.at += 1;
                Ok(Value::Expr(LatticeExpr::gen(id)))
            }
            Some(Tok::Bar) => {
                self.at += 1;
                let e = self.lattice()?;
                self.expect(Tok::Bar, "closing '|'")?;
                Ok(Value::Expr(LatticeExpr::abs(e)))
            }
            Some(Tok::LParen) => {
                self.at += 1;
                let e = self.lattice()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(Value::Expr(e))
            }
            Some(_) => self.err("expected a number, d(...), '|' or '('"),
            None => self.err("unexpected end of input"),
        }
    }
}

pub fn parse_expr(text: &str) -> Result<LatticeExpr> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        at: 0,
        end: text.chars().count(),
    };
    let e = p.lattice()?;
    if p.at < p.toks.len() {
        return p.err("unexpected trailing input");
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::LatticeExpr as E;
    use proptest::prelude::*;

    #[test]
    fn grammar_examples() {
        assert_eq!(parse_expr("d(a)").unwrap(), E::d("a"));
        assert_eq!(
            parse_expr("0.5*d(a) + (d(b) v -d(c))").unwrap(),
            E::sum(
                E::scale(0.5, E::d("a")),
                E::join(E::d("b"), E::scale(-1.0, E::d("c")))
            )
        );
        assert_eq!(
            parse_expr("|d(a)| ^ d(b)").unwrap(),
            E::meet(E::join(E::d("a"), E::scale(-1.0, E::d("a"))), E::d("b"))
        );
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(
            parse_expr("d(a) + d(b) v d(c)").unwrap(),
            E::join(E::sum(E::d("a"), E::d("b")), E::d("c"))
        );
        assert_eq!(
            parse_expr("d(a) v d(b) v d(c)").unwrap(),
            E::join(E::join(E::d("a"), E::d("b")), E::d("c"))
        );
        assert_eq!(
            parse_expr("d(a) - 2*3*d(b)").unwrap(),
            E::sum(E::d("a"), E::neg(E::scale(6.0, E::d("b"))))
        );
        assert_eq!(parse_expr("-2*d(a)").unwrap(), E::scale(-2.0, E::d("a")));
        assert_eq!(parse_expr("d(a)*1e-3").unwrap(), E::scale(1e-3, E::d("a")));
        assert_eq!(parse_expr("d( v )").unwrap(), E::d("v"));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        match parse_expr("d(a) v d(b) ^ d(c)") {
            Err(Error::Syntax { pos, .. }) => assert_eq!(pos, 12),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_expr("d(a) + "), Err(Error::Syntax { pos: 7, .. })));
        assert!(matches!(parse_expr("d(a) # d(b)"), Err(Error::UnknownToken { pos: 5, .. })));
        assert!(matches!(parse_expr("x"), Err(Error::UnknownToken { pos: 0, .. })));
        assert!(parse_expr("3").is_err());
        assert!(parse_expr("d(a) * d(b)").is_err());
        assert!(parse_expr("|d(a)").is_err());
        assert!(parse_expr("d(a-b)").is_err());
        assert!(parse_expr("d(a) + 1").is_err());
    }

    fn arb_expr() -> impl Strategy<Value = LatticeExpr> {
        let leaf = prop_oneof![Just("a"), Just("b"), Just("c_1")].prop_map(E::d);
        leaf.prop_recursive(5, 32, 2, |inner| {
            prop_oneof![
                (-1e3f64..1e3, inner.clone()).prop_map(|(c, e)| E::scale(c, e)),
                (inner.clone(), inner.clone()).prop_map(|(l, r)| E::sum(l, r)),
                (inner.clone(), inner.clone()).prop_map(|(l, r)| E::join(l, r)),
                (inner.clone(), inner).prop_map(|(l, r)| E::meet(l, r)),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(e in arb_expr()) {
            let text = e.to_string();
            let back = parse_expr(&text).unwrap();
            prop_assert_eq!(&back, &e);
            prop_assert_eq!(parse_expr(&back.to_string()).unwrap(), e);
        }
    }
}

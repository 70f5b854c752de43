//! Recursive-descent parser for the textual requirement syntax.
//!
//! ```text
//! formula   := disj ( '->' formula )?
//! disj      := conj ( 'or' conj )*
//! conj      := unary ( 'and' unary )*
//! unary     := 'not' unary
//!            | ('always' | 'eventually') '[' num ',' num ']' unary
//!            | '(' formula ')' | predicate
//! predicate := expr ('<' | '<=' | '>' | '>=') num
//! expr      := term (('+' | '-') term)*
//! term      := '-' term | num ('*' term)? | ident | 'abs' '(' expr ')' | '(' expr ')'
//! ```

use thiserror::Error;

use super::formula::{Cmp, Expr, Formula};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("parse error at offset {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Plus,
    Minus,
    Star,
    Arrow,
    Cmp(Cmp),
    Eof,
}

const KEYWORDS: [&str; 6] = ["always", "eventually", "not", "and", "or", "abs"];

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let tok = match c {
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'[' => Tok::LBracket,
            b']' => Tok::RBracket,
            b',' => Tok::Comma,
            b'+' => Tok::Plus,
            b'*' => Tok::Star,
            b'-' if bytes.get(i + 1) == Some(&b'>') => {
                i += 1;
                Tok::Arrow
            }
            b'-' => Tok::Minus,
            b'<' | b'>' => {
                let strict = bytes.get(i + 1) != Some(&b'=');
                if !strict {
                    i += 1;
                }
                Tok::Cmp(match (c, strict) {
                    (b'<', true) => Cmp::Lt,
                    (b'<', false) => Cmp::Le,
                    (_, true) => Cmp::Gt,
                    (_, false) => Cmp::Ge,
                })
            }
            b'0'..=b'9' | b'.' => {
                while i + 1 < bytes.len() && (bytes[i + 1].is_ascii_digit() || bytes[i + 1] == b'.') {
                    i += 1;
                }
                if i + 1 < bytes.len() && (bytes[i + 1] == b'e' || bytes[i + 1] == b'E') {
                    let mut j = i + 2;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j - 1;
                    }
                }
                let lit = &text[start..=i];
                Tok::Num(lit.parse().map_err(|_| ParseError {
                    offset: start,
                    message: format!("malformed number `{lit}`"),
                })?)
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i + 1 < bytes.len() && (bytes[i + 1].is_ascii_alphanumeric() || bytes[i + 1] == b'_') {
                    i += 1;
                }
                Tok::Ident(text[start..=i].to_string())
            }
            _ => {
                return Err(ParseError {
                    offset: start,
                    message: format!("unexpected character `{}`", &text[start..].chars().next().unwrap()),
                })
            }
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::Eof, text.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if t != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> PResult<T> {
        let message = if *self.peek() == Tok::Eof {
            format!("{} (found end of input)", message.into())
        } else {
            message.into()
        };
        Err(ParseError { offset: self.offset(), message })
    }

    fn at_eof_error(&self, e: &ParseError) -> bool {
        e.offset >= self.toks.last().map(|t| t.1).unwrap_or(0)
    }

    fn expect(&mut self, tok: Tok, what: &str) -> PResult<()> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected {what}"))
        }
    }

    fn keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn formula(&mut self) -> PResult<Formula> {
        let lhs = self.disjunction()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let rhs = self.formula()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> PResult<Formula> {
        let mut lhs = self.conjunction()?;
        while self.keyword("or") {
            self.bump();
            lhs = Formula::or(lhs, self.conjunction()?);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> PResult<Formula> {
        let mut lhs = self.unary()?;
        while self.keyword("and") {
            self.bump();
            lhs = Formula::and(lhs, self.unary()?);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Formula> {
        if self.keyword("not") {
            self.bump();
            return Ok(Formula::not(self.unary()?));
        }
        if self.keyword("always") || self.keyword("eventually") {
            let always = self.keyword("always");
            self.bump();
            let bracket = self.offset();
            self.expect(Tok::LBracket, "`[` opening the time bound")?;
            let lo = self.number()?;
            self.expect(Tok::Comma, "`,` in the time bound")?;
            let hi = self.number()?;
            self.expect(Tok::RBracket, "`]` closing the time bound")?;
            if !(0.0 <= lo && lo <= hi) || !hi.is_finite() {
                return Err(ParseError {
                    offset: bracket,
                    message: format!("time bound [{lo}, {hi}] must satisfy 0 <= a <= b"),
                });
            }
            let body = self.unary()?;
            return Ok(if always {
                Formula::always(lo, hi, body)
            } else {
                Formula::eventually(lo, hi, body)
            });
        }
        if *self.peek() == Tok::LParen {
            let open = self.offset();
            let save = self.pos;
            self.bump();
            let grouped = self.formula().and_then(|f| {
                self.expect(Tok::RParen, "`)`")?;
                Ok(f)
            });
            let err_group = match grouped {
                Ok(f) => return Ok(f),
                Err(e) => e,
            };
            // `(a - b) < 3` starts with a parenthesized term, not a sub-formula.
            self.pos = save;
            let err_pred = match self.predicate() {
                Ok(f) => return Ok(f),
                Err(e) => e,
            };
            let runs_out = |e: &ParseError| self.at_eof_error(e) || e.offset == open;
            if runs_out(&err_group) && runs_out(&err_pred) {
                return Err(ParseError {
                    offset: open,
                    message: "unclosed `(`".into(),
                });
            }
            return Err(if err_pred.offset > err_group.offset { err_pred } else { err_group });
        }
        self.predicate()
    }

    fn predicate(&mut self) -> PResult<Formula> {
        let expr = self.expr()?;
        let cmp = match self.peek() {
            Tok::Cmp(c) => *c,
            _ => return self.error("expected a comparison (<, <=, >, >=)"),
        };
        self.bump();
        let threshold = self.number()?;
        Ok(Formula::pred(expr, cmp, threshold))
    }

    fn number(&mut self) -> PResult<f64> {
        let negative = *self.peek() == Tok::Minus;
        if negative {
            self.bump();
        }
        match self.peek() {
            Tok::Num(v) => {
                let v = *v;
                self.bump();
                Ok(if negative { -v } else { v })
            }
            _ => self.error("expected a number"),
        }
    }

    fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Minus => {
                self.bump();
                Ok(match self.term()? {
                    Expr::Const(c) => Expr::Const(-c),
                    Expr::Scale(c, e) => Expr::Scale(-c, e),
                    e => Expr::Scale(-1.0, Box::new(e)),
                })
            }
            Tok::Num(v) => {
                self.bump();
                if *self.peek() == Tok::Star {
                    self.bump();
                    Ok(Expr::Scale(v, Box::new(self.term()?)))
                } else {
                    Ok(Expr::Const(v))
                }
            }
            Tok::Ident(name) if name == "abs" => {
                self.bump();
                let open = self.offset();
                self.expect(Tok::LParen, "`(` after abs")?;
                let inner = self.expr().map_err(|e| self.unclosed(e, open))?;
                self.expect(Tok::RParen, "`)`").map_err(|e| self.unclosed(e, open))?;
                Ok(Expr::Abs(Box::new(inner)))
            }
            Tok::Ident(name) if KEYWORDS.contains(&name.as_str()) => {
                self.error(format!("keyword `{name}` cannot be used as a signal"))
            }
            Tok::Ident(name) => {
                self.bump();
                Ok(Expr::Signal(name))
            }
            Tok::LParen => {
                let open = self.offset();
                self.bump();
                let inner = self.expr().map_err(|e| self.unclosed(e, open))?;
                self.expect(Tok::RParen, "`)`").map_err(|e| self.unclosed(e, open))?;
                Ok(inner)
            }
            _ => self.error("expected a signal, number, or abs(...)"),
        }
    }

    fn unclosed(&self, e: ParseError, open: usize) -> ParseError {
        if self.at_eof_error(&e) {
            ParseError {
                offset: open,
                message: "unclosed `(`".into(),
            }
        } else {
            e
        }
    }
}

/// Parses a requirement. Unknown signal names are only detected at evaluation.
pub fn parse(text: &str) -> Result<Formula, ParseError> {
    let mut p = Parser { toks: lex(text)?, pos: 0 };
    if *p.peek() == Tok::Eof {
        return p.error("empty formula");
    }
    let f = p.formula()?;
    if *p.peek() != Tok::Eof {
        return p.error("unexpected trailing input");
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn always_predicate() {
        let f = parse("always[0,30] (v < 120)").unwrap();
        assert_eq!(
            f,
            Formula::always(0.0, 30.0, Formula::pred(Expr::signal("v"), Cmp::Lt, 120.0))
        );
    }

    #[test]
    fn nested_temporal() {
        let f = parse("always[0,65] eventually[0,30] (y5 - y4 >= 8)").unwrap();
        let pred = Formula::pred(
            Expr::Sub(Box::new(Expr::signal("y5")), Box::new(Expr::signal("y4"))),
            Cmp::Ge,
            8.0,
        );
        assert_eq!(f, Formula::always(0.0, 65.0, Formula::eventually(0.0, 30.0, pred)));
    }

    #[test]
    fn lone_paren_fails_at_zero() {
        let e = parse("(").unwrap_err();
        assert_eq!(e.offset, 0);
    }

    #[test]
    fn precedence() {
        let f = parse("not a > 0 and b > 0 or c > 0 -> d > 0").unwrap();
        let p = |n: &str| Formula::pred(Expr::signal(n), Cmp::Gt, 0.0);
        let expected = Formula::implies(
            Formula::or(Formula::and(Formula::not(p("a")), p("b")), p("c")),
            p("d"),
        );
        assert_eq!(f, expected);
    }

    #[test]
    fn implication_is_right_associative() {
        let f = parse("a > 0 -> b > 0 -> c > 0").unwrap();
        let p = |n: &str| Formula::pred(Expr::signal(n), Cmp::Gt, 0.0);
        assert_eq!(f, Formula::implies(p("a"), Formula::implies(p("b"), p("c"))));
    }

    #[test]
    fn expressions() {
        let f = parse("(abs(x - y) <= 0.5) and (2 * x > -1.5e-1) and ((a - b) < 3)").unwrap();
        let Formula::And(lhs, last) = f else { panic!() };
        let Formula::And(first, second) = *lhs else { panic!() };
        assert_eq!(
            *first,
            Formula::pred(
                Expr::Abs(Box::new(Expr::Sub(Box::new(Expr::signal("x")), Box::new(Expr::signal("y"))))),
                Cmp::Le,
                0.5
            )
        );
        assert_eq!(*second, Formula::pred(Expr::Scale(2.0, Box::new(Expr::signal("x"))), Cmp::Gt, -0.15));
        assert!(matches!(*last, Formula::Pred { cmp: Cmp::Lt, .. }));
    }

    #[test]
    fn errors_carry_offsets() {
        assert_eq!(parse("always[0,30 (v < 1)").unwrap_err().offset, 12);
        assert_eq!(parse("always[5,1] v < 1").unwrap_err().offset, 6);
        assert_eq!(parse("v < ").unwrap_err().offset, 4);
        assert_eq!(parse("v < 1 )").unwrap_err().offset, 6);
        assert_eq!(parse("v $ 1").unwrap_err().offset, 2);
        assert!(parse("").is_err());
        assert!(parse("and < 1").is_err());
    }

    #[test]
    fn display_round_trips() {
        for text in [
            "always[0,30] (v < 120)",
            "(always[0,30] w < 3000) -> always[0,4] v < 35",
            "always[0,10] (abs(x - 2 * y) <= 0.5 or not eventually[1,2] (y > -1))",
            "always[0,1] (a - (b - c) > 0)",
        ] {
            let f = parse(text).unwrap();
            assert_eq!(parse(&f.to_string()).unwrap(), f, "{text}");
        }
    }
}

//! Recursive-descent parser for the expression grammar.
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := atom ('^' uint)?
//! atom   := number | ident | func '(' expr ')' | '(' expr ')' | '-' atom
//! func   := sin | cos | exp
//! ```
//!
//! Identifiers are coordinate names of the chart. Note the grammar binds
//! unary minus at the atom level, so `-x^2` reads as `(-x)^2`.

use thiserror::Error;

use crate::expr::{ChartRef, Expr};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at offset {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unknown identifier `{name}` at offset {pos}")]
    UnknownIdentifier { pos: usize, name: String },
    #[error("exponent at offset {pos} must be a non-negative integer literal")]
    BadExponent { pos: usize },
    #[error("invalid number literal at offset {pos}")]
    BadNumber { pos: usize },
}

pub fn parse(text: &str, chart: &ChartRef) -> Result<Expr, ParseError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        chart,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.syntax("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    chart: &'a ChartRef,
}

impl<'a> Parser<'a> {
    fn syntax(&self, message: &str) -> ParseError {
        ParseError::Syntax {
            pos: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    acc = acc.add(&self.term()?);
                }
                Some(b'-') => {
                    self.pos += 1;
                    acc = acc.sub(&self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    acc = acc.mul(&self.factor()?);
                }
                Some(b'/') => {
                    self.pos += 1;
                    acc = acc.div(&self.factor()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let n = self.uint()?;
            return Ok(base.powi(n));
        }
        Ok(base)
    }

    fn uint(&mut self) -> Result<u32, ParseError> {
        self.skip_ws();
        let start = self.pos;
        if self.peek() == Some(b'-') {
            return Err(ParseError::BadExponent { pos: self.pos });
        }
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(ParseError::BadExponent { pos: start });
        }
        // Reject 2.5-style exponents explicitly rather than as trailing junk.
        if self.src.get(self.pos) == Some(&b'.') {
            return Err(ParseError::BadExponent { pos: start });
        }
        let digits = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        digits
            .parse::<u32>()
            .map_err(|_| ParseError::BadExponent { pos: start })
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            None => Err(self.syntax("expected expression, found end of input")),
            Some(b'-') => {
                self.pos += 1;
                Ok(self.atom()?.neg())
            }
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.syntax("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            Some(c) => Err(self.syntax(&format!("unexpected character `{}`", c as char))),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            let frac_start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos == frac_start {
                return Err(ParseError::BadNumber { pos: start });
            }
        }
        if matches!(self.src.get(self.pos), Some(b'e') | Some(b'E')) {
            // Only treat as exponent when digits (with optional sign) follow;
            // otherwise the `e` starts an identifier like `exp`.
            let mut probe = self.pos + 1;
            if matches!(self.src.get(probe), Some(b'+') | Some(b'-')) {
                probe += 1;
            }
            if self.src.get(probe).is_some_and(|c| c.is_ascii_digit()) {
                self.pos = probe;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
        }
        let s = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let v: f64 = s
            .parse()
            .map_err(|_| ParseError::BadNumber { pos: start })?;
        Ok(Expr::constant(self.chart, v))
    }

    fn ident(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .to_string();
        if matches!(name.as_str(), "sin" | "cos" | "exp") {
            if !self.eat(b'(') {
                return Err(self.syntax(&format!("expected `(` after `{name}`")));
            }
            let arg = self.expr()?;
            if !self.eat(b')') {
                return Err(self.syntax("expected `)`"));
            }
            return Ok(match name.as_str() {
                "sin" => arg.sin(),
                "cos" => arg.cos(),
                _ => arg.exp(),
            });
        }
        match Expr::coord_name(self.chart, &name) {
            Ok(e) => Ok(e),
            Err(_) => Err(ParseError::UnknownIdentifier { pos: start, name }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{sample_points, Chart, Expr};

    #[test]
    fn parses_product_plus_sine() {
        let ch = Chart::standard(4);
        let e = parse("x0*x1 + sin(th2)", &ch).unwrap();
        let mut p = vec![0.0; 8];
        p[0] = 2.0;
        p[1] = 3.0;
        p[6] = 0.5; // th2
        assert!((e.evaluate(&p).unwrap() - (6.0 + 0.5f64.sin())).abs() < 1e-15);
    }

    #[test]
    fn parses_single_coordinate() {
        let ch = Chart::standard(4);
        let e = parse("x0", &ch).unwrap();
        let mut p = vec![0.0; 8];
        p[0] = -0.25;
        assert_eq!(e.evaluate(&p).unwrap(), -0.25);
    }

    #[test]
    fn incomplete_input_reports_offset_5() {
        let ch = Chart::standard(4);
        match parse("x0 + ", &ch) {
            Err(ParseError::Syntax { pos, .. }) => assert_eq!(pos, 5),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_identifier_is_reported() {
        let ch = Chart::standard(4);
        match parse("x0 + y9", &ch) {
            Err(ParseError::UnknownIdentifier { name, pos }) => {
                assert_eq!(name, "y9");
                assert_eq!(pos, 5);
            }
            other => panic!("expected unknown identifier, got {other:?}"),
        }
    }

    #[test]
    fn negative_exponent_rejected() {
        let ch = Chart::standard(4);
        assert!(matches!(
            parse("x0^-2", &ch),
            Err(ParseError::BadExponent { .. })
        ));
        assert!(matches!(
            parse("x0^2.5", &ch),
            Err(ParseError::BadExponent { .. })
        ));
    }

    #[test]
    fn unary_minus_binds_at_atom_level() {
        // Per the grammar, -x0^2 is (-x0)^2.
        let ch = Chart::standard(4);
        let e = parse("-x0^2", &ch).unwrap();
        let mut p = vec![0.0; 8];
        p[0] = 3.0;
        assert_eq!(e.evaluate(&p).unwrap(), 9.0);
    }

    #[test]
    fn precedence_matches_standard_reading() {
        let ch = Chart::standard(4);
        let e = parse("1 + 2*x0 - 6/3", &ch).unwrap();
        let mut p = vec![0.0; 8];
        p[0] = 5.0;
        assert_eq!(e.evaluate(&p).unwrap(), 9.0);
    }

    #[test]
    fn scientific_notation_and_exp_coexist() {
        let ch = Chart::standard(4);
        let e = parse("1e-2 + exp(x0)", &ch).unwrap();
        let p = vec![0.0; 8];
        assert!((e.evaluate(&p).unwrap() - 1.01).abs() < 1e-15);
    }

    #[test]
    fn rendered_expressions_reparse() {
        let ch = Chart::standard(4);
        let inputs = [
            "x0*x1 + sin(th2)",
            "-(x0 + x1)^3/(2 + cos(th0))",
            "exp(-x2)*(x3 - 1.5e2)",
            "x0 - x1 - x2",
            "x0/(x1/(2 + x2^2))",
        ];
        for text in inputs {
            let e = parse(text, &ch).unwrap();
            let rendered = e.to_string();
            let back = parse(&rendered, &ch).unwrap();
            for p in sample_points(&ch, 16, 1) {
                let a = e.evaluate(&p).unwrap();
                let b = back.evaluate(&p).unwrap();
                assert!(
                    (a - b).abs() <= 1e-14 * (1.0 + a.abs()),
                    "{text} -> {rendered}: {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn chart_rejects_bad_shapes() {
        assert!(Chart::bundle(&["x0", "x1"], &["t"]).is_err());
        assert!(Chart::bundle(&["a", "b", "c", "a"], &[]).is_err());
        let mut ch = Chart::bundle(&["x0", "x1", "x2", "x3"], &["th0"]).unwrap();
        assert!(ch.set_domain("x0", 1.0, 1.0).is_err());
        assert!(ch.set_domain("nope", 0.0, 1.0).is_err());
        ch.set_domain("x0", 0.0, 2.0).unwrap();
        let ch = ch.into_ref();
        assert_eq!(ch.domain(0), (0.0, 2.0));
        let _ = Expr::coord_name(&ch, "th0").unwrap();
    }
}

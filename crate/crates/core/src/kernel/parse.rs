//! Recursive-descent parser for the expression grammar.
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = ("-" | "+") unary | power ;
//! power   = primary [ "^" exponent ] ;
//! exponent= ["-"] primary ;              (must evaluate to an integer)
//! primary = number | ident | func "(" expr ")" | "(" expr ")" ;
//! func    = "sqrt" | "log" ;
//! number  = digit { digit } [ "." digit { digit } ] ;
//! ident   = letter { letter | digit } [ "_" ( "x" { "x" } | digit { digit } ) ] ;
//! ```

use num_bigint::BigInt;
use num_traits::One;

use super::expr::Expr;
use super::poly::Rational;
use super::workspace::Workspace;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unknown identifier `{name}` at {pos}")]
    UnknownIdentifier { pos: usize, name: String },
    #[error("unknown function `{name}` at {pos}")]
    UnknownFunction { pos: usize, name: String },
    #[error("exponent at {pos} is not an integer")]
    NonIntegerExponent { pos: usize },
    #[error("division by zero at {pos}")]
    DivisionByZero { pos: usize },
}

impl ParseError {
    pub fn pos(&self) -> usize {
        match self {
            ParseError::Syntax { pos, .. }
            | ParseError::UnknownIdentifier { pos, .. }
            | ParseError::UnknownFunction { pos, .. }
            | ParseError::NonIntegerExponent { pos }
            | ParseError::DivisionByZero { pos } => *pos,
        }
    }
}

pub fn parse_expr(src: &str, ws: &Workspace) -> Result<Expr, ParseError> {
    let mut p = Parser {
        src: src.as_bytes(),
        pos: 0,
        ws,
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
    ws: &'a Workspace,
}

impl Parser<'_> {
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
            if self.eat(b'+') {
                acc = &acc + &self.term()?;
            } else if self.eat(b'-') {
                acc = &acc - &self.term()?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.unary()?;
        loop {
            if self.eat(b'*') {
                acc = &acc * &self.unary()?;
            } else if self.peek() == Some(b'/') {
                let at = self.pos;
                self.pos += 1;
                let rhs = self.unary()?;
                acc = acc
                    .checked_div(&rhs)
                    .ok_or(ParseError::DivisionByZero { pos: at })?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(b'-') {
            return Ok(-self.unary()?);
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if !self.eat(b'^') {
            return Ok(base);
        }
        self.skip_ws();
        let at = self.pos;
        let negative = self.eat(b'-');
        let exp = self.primary()?;
        let k = exp
            .as_constant()
            .filter(|c| c.is_integer())
            .and_then(|c| i32::try_from(c.to_integer()).ok())
            .ok_or(ParseError::NonIntegerExponent { pos: at })?;
        let k = if negative { -k } else { k };
        if k < 0 && base.is_zero() {
            return Err(ParseError::DivisionByZero { pos: at });
        }
        Ok(base.pow(k))
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.syntax("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(_) => Err(self.syntax("expected a number, identifier or `(`")),
            None => Err(self.syntax("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let int_part = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let mut value = Rational::from_integer(int_part.parse::<BigInt>().unwrap());
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            let fstart = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if fstart == self.pos {
                return Err(self.syntax("expected digits after `.`"));
            }
            let frac = std::str::from_utf8(&self.src[fstart..self.pos]).unwrap();
            let mut scale = BigInt::one();
            for _ in 0..frac.len() {
                scale *= 10;
            }
            value += Rational::new(frac.parse::<BigInt>().unwrap(), scale);
        }
        Ok(Expr::constant(value))
    }

    fn ident(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        if self.peek() == Some(b'(') {
            self.pos += 1;
            let arg = self.expr()?;
            if !self.eat(b')') {
                return Err(self.syntax("expected `)`"));
            }
            return match name {
                "sqrt" => Ok(Expr::sqrt(&arg, self.ws.assumptions())),
                "log" => {
                    if arg.is_zero() {
                        return Err(ParseError::Syntax {
                            pos: start,
                            message: "log of zero".into(),
                        });
                    }
                    Ok(Expr::log(&arg))
                }
                _ => Err(ParseError::UnknownFunction {
                    pos: start,
                    name: name.to_string(),
                }),
            };
        }
        match self.ws.lookup(name) {
            Some(v) => Ok(Expr::var(&v)),
            None => Err(ParseError::UnknownIdentifier {
                pos: start,
                name: name.to_string(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::var::VarKind;

    fn ws() -> Workspace {
        Workspace::with_vars(&["r", "v"], VarKind::State).0
    }

    #[test]
    fn water_wave_density() {
        let ws = ws();
        let e = ws.parse("-(1/2)*r*v^2 - (1/2)*r^2").unwrap();
        let f = ws.parse("-r*v*v/2 - r*r/2").unwrap();
        assert_eq!(e, f);
        assert_eq!(e.to_string(), "-(1/2)*r*v^2 - (1/2)*r^2");
    }

    #[test]
    fn cancellation_and_sqrt_rewrite() {
        let ws = ws();
        assert!(ws.parse("r - r").unwrap().is_zero());
        assert_eq!(ws.parse("sqrt(r)^2").unwrap(), ws.parse("r").unwrap());
    }

    #[test]
    fn errors_carry_positions() {
        let ws = ws();
        assert_eq!(
            ws.parse("r + w").unwrap_err(),
            ParseError::UnknownIdentifier {
                pos: 4,
                name: "w".into()
            }
        );
        assert_eq!(
            ws.parse("r^(1/2)").unwrap_err(),
            ParseError::NonIntegerExponent { pos: 2 }
        );
        assert!(matches!(
            ws.parse("r + * v").unwrap_err(),
            ParseError::Syntax { pos: 4, .. }
        ));
        assert!(matches!(
            ws.parse("exp(r)").unwrap_err(),
            ParseError::UnknownFunction { .. }
        ));
        assert!(matches!(
            ws.parse("(r").unwrap_err(),
            ParseError::Syntax { .. }
        ));
    }

    #[test]
    fn rendering_reparses() {
        let ws = ws();
        for src in [
            "r/(r - v)",
            "(r + 1)^2/(v*(r - v)^3)",
            "sqrt(r)*v + log(r + v)/2",
            "1/sqrt(r + v^2)",
            "v_x^2*r_xx - 3/7",
        ] {
            let e = ws.parse(src).unwrap();
            let again = ws.parse(&e.to_string()).unwrap();
            assert_eq!(e, again, "{src} -> {e}");
        }
    }

    #[test]
    fn decimal_literals_are_exact() {
        let ws = ws();
        assert_eq!(ws.parse("0.25*r").unwrap(), ws.parse("r/4").unwrap());
    }
}

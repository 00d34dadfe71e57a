use thiserror::Error;

use super::{Expr, Family, Func};

/// Largest number of `z` variables.
pub const MAX_ARITY: usize = 16;
/// Largest number of `x` variables.
pub const MAX_SPATIAL_ARITY: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("variable `{name}` at byte {offset} is out of range for arity {arity}")]
    VariableOutOfRange {
        name: String,
        offset: usize,
        arity: usize,
    },
    #[error("arity {arity} is not allowed for {family:?} expressions (max {max})")]
    InvalidArity {
        arity: usize,
        family: Family,
        max: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Int(u32),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

fn syntax(offset: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        offset,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let simple = match c {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(tok) = simple {
            out.push((tok, start));
            i += 1;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == b'.' {
            let mut integral = true;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' {
                integral = false;
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    integral = false;
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                } else {
                    return Err(syntax(i, "malformed exponent"));
                }
            }
            let lexeme = &text[start..i];
            if lexeme == "." {
                return Err(syntax(start, "expected digits"));
            }
            let value: f64 = lexeme
                .parse()
                .map_err(|_| syntax(start, format!("invalid number `{lexeme}`")))?;
            if !value.is_finite() {
                return Err(syntax(start, format!("number `{lexeme}` overflows")));
            }
            let tok = match (integral, lexeme.parse::<u32>()) {
                (true, Ok(k)) => Tok::Int(k),
                _ => Tok::Num(value),
            };
            out.push((tok, start));
        } else if c.is_ascii_alphabetic() {
            while i < bytes.len() && bytes[i].is_ascii_alphanumeric() {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), start));
        } else {
            // report the full character for non-ASCII input
            let ch = text[start..].chars().next().unwrap_or('?');
            return Err(syntax(start, format!("unexpected character `{ch}`")));
        }
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    arity: usize,
    family: Family,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
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

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Tok::Slash => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let negate = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        let bare_number = matches!(self.peek(), Tok::Num(_) | Tok::Int(_));
        let mut base = self.atom()?;
        let mut powered = false;
        if *self.peek() == Tok::Caret {
            self.bump();
            let (tok, off) = self.bump();
            match tok {
                Tok::Int(k) => base = Expr::Pow(Box::new(base), k),
                _ => return Err(syntax(off, "expected a non-negative integer exponent")),
            }
            powered = true;
        }
        Ok(match (negate, bare_number && !powered, base) {
            (true, true, Expr::Num(c)) => Expr::Num(-c),
            (true, _, e) => Expr::Neg(Box::new(e)),
            (false, _, e) => e,
        })
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let (tok, off) = self.bump();
        match tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::Int(k) => Ok(Expr::Num(k as f64)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if let Some(func) = Func::from_name(&name) {
                    if *self.peek() != Tok::LParen {
                        return Err(syntax(
                            self.offset(),
                            format!("expected `(` after `{name}`"),
                        ));
                    }
                    self.bump();
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                self.variable(name, off)
            }
            Tok::End => Err(syntax(off, "unexpected end of input")),
            other => Err(syntax(off, format!("unexpected token {other:?}"))),
        }
    }

    fn variable(&self, name: String, offset: usize) -> Result<Expr, ParseError> {
        let (limit, prefix) = match self.family {
            Family::Z => (MAX_ARITY, 'z'),
            Family::X => (MAX_SPATIAL_ARITY, 'x'),
        };
        let index = name
            .strip_prefix(prefix)
            .filter(|digits| !digits.is_empty() && !digits.starts_with('0'))
            .and_then(|digits| digits.parse::<usize>().ok())
            .filter(|&k| k >= 1 && k <= limit);
        match index {
            None => Err(ParseError::UnknownIdentifier { name, offset }),
            Some(k) if k > self.arity => Err(ParseError::VariableOutOfRange {
                name,
                offset,
                arity: self.arity,
            }),
            Some(k) => Ok(Expr::Var(self.family, k - 1)),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        let (tok, off) = self.bump();
        if tok == Tok::RParen {
            Ok(())
        } else {
            Err(syntax(off, "expected `)`"))
        }
    }
}

/// Parses `text` as an expression in `arity` variables of the given family.
pub fn parse(text: &str, arity: usize, family: Family) -> Result<Expr, ParseError> {
    let max = match family {
        Family::Z => MAX_ARITY,
        Family::X => MAX_SPATIAL_ARITY,
    };
    if arity == 0 || arity > max {
        return Err(ParseError::InvalidArity { arity, family, max });
    }
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        arity,
        family,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(syntax(p.offset(), "unexpected trailing input"));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(text: &str, arity: usize) -> Result<Expr, ParseError> {
        parse(text, arity, Family::Z)
    }

    #[test]
    fn product_node() {
        let e = z("z1*z2", 2).unwrap();
        assert!(matches!(e, Expr::Mul(..)));
    }

    #[test]
    fn index_out_of_range() {
        assert!(z("sin(z1)+z2^3", 2).is_ok());
        assert_eq!(
            z("z3", 2),
            Err(ParseError::VariableOutOfRange {
                name: "z3".into(),
                offset: 0,
                arity: 2
            })
        );
    }

    #[test]
    fn precedence_and_associativity() {
        let e = z("1 - 2 - 3", 1).unwrap();
        assert_eq!(e.eval(&[0.0]).unwrap(), -4.0);
        let e = z("8/4/2", 1).unwrap();
        assert_eq!(e.eval(&[0.0]).unwrap(), 1.0);
        // unary minus binds looser than ^
        let e = z("-z1^2", 1).unwrap();
        assert_eq!(e.eval(&[3.0]).unwrap(), -9.0);
        let e = z("2*-z1 + 3*z1^2", 1).unwrap();
        assert_eq!(e.eval(&[2.0]).unwrap(), 8.0);
        let e = z(" ( z1 + 1 ) ^ 2 ", 1).unwrap();
        assert_eq!(e.eval(&[1.0]).unwrap(), 4.0);
    }

    #[test]
    fn numbers() {
        assert_eq!(z("1.5e2", 1).unwrap(), Expr::Num(150.0));
        assert_eq!(z(".25", 1).unwrap(), Expr::Num(0.25));
        assert_eq!(z("2E-1", 1).unwrap(), Expr::Num(0.2));
        assert_eq!(z("-3", 1).unwrap(), Expr::Num(-3.0));
        assert!(matches!(
            z("1e", 1),
            Err(ParseError::Syntax { offset: 1, .. })
        ));
        assert!(matches!(z("1e999", 1), Err(ParseError::Syntax { .. })));
    }

    #[test]
    fn errors_carry_offsets() {
        assert!(matches!(
            z("z1 +", 1),
            Err(ParseError::Syntax { offset: 4, .. })
        ));
        assert!(matches!(
            z("(z1", 1),
            Err(ParseError::Syntax { offset: 3, .. })
        ));
        assert!(matches!(
            z("z1 $ 2", 1),
            Err(ParseError::Syntax { offset: 3, .. })
        ));
        assert!(matches!(
            z("z1^1.5", 1),
            Err(ParseError::Syntax { offset: 3, .. })
        ));
        assert!(matches!(
            z("z1^-1", 1),
            Err(ParseError::Syntax { offset: 3, .. })
        ));
        assert!(matches!(
            z("z1 z1", 1),
            Err(ParseError::Syntax { offset: 3, .. })
        ));
        assert!(matches!(
            z("sin z1", 1),
            Err(ParseError::Syntax { offset: 4, .. })
        ));
    }

    #[test]
    fn identifiers() {
        assert!(matches!(
            z("log(z1)", 1),
            Err(ParseError::UnknownIdentifier { .. })
        ));
        assert!(matches!(
            z("x1", 1),
            Err(ParseError::UnknownIdentifier { .. })
        ));
        assert!(matches!(
            z("z0", 1),
            Err(ParseError::UnknownIdentifier { .. })
        ));
        assert!(matches!(
            z("z17", 16),
            Err(ParseError::UnknownIdentifier { .. })
        ));
        assert!(z("z16", 16).is_ok());
        assert!(matches!(
            parse("x4", 3, Family::X),
            Err(ParseError::UnknownIdentifier { .. })
        ));
        assert!(matches!(
            parse("x3", 2, Family::X),
            Err(ParseError::VariableOutOfRange { .. })
        ));
        assert!(matches!(z("z1", 17), Err(ParseError::InvalidArity { .. })));
        assert!(matches!(z("1", 0), Err(ParseError::InvalidArity { .. })));
    }
}

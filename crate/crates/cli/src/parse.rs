//! Polynomial, complex-number, list and region arguments.
//!
//! Grammar:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | implicit) unary)*
//! unary  := ('+' | '-') unary | power
//! power  := atom ('^' integer)?
//! atom   := number 'i'? | 'i' | 'z' | 'e' | 'pi' | '(' expr ')'
//! ```

use linea::{Complex64, Polynomial, RegionSpec};
use thiserror::Error;

const MAX_DEGREE: usize = 64;

#[derive(Debug, Error, PartialEq)]
#[error("{message} at position {position} in {input:?}")]
pub struct ParseError {
    pub input: String,
    pub position: usize,
    pub message: String,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Token {
    Number(f64),
    Imaginary,
    Var,
    Const(f64),
    Plus,
    Minus,
    Star,
    Caret,
    Open,
    Close,
}

struct Lexer<'a> {
    input: &'a str,
    tokens: Vec<(usize, Token)>,
}

impl<'a> Lexer<'a> {
    fn run(input: &'a str) -> Result<Vec<(usize, Token)>, ParseError> {
        let mut lx = Lexer {
            input,
            tokens: Vec::new(),
        };
        let bytes = input.as_bytes();
        let mut pos = 0;
        while pos < bytes.len() {
            let ch = bytes[pos] as char;
            let token = match ch {
                ' ' | '\t' => {
                    pos += 1;
                    continue;
                }
                '+' => Token::Plus,
                '-' => Token::Minus,
                '*' => Token::Star,
                '^' => Token::Caret,
                '(' => Token::Open,
                ')' => Token::Close,
                'z' | 'Z' => Token::Var,
                'i' | 'j' => Token::Imaginary,
                'e' => Token::Const(std::f64::consts::E),
                'p' if input[pos..].starts_with("pi") => {
                    lx.tokens.push((pos, Token::Const(std::f64::consts::PI)));
                    pos += 2;
                    continue;
                }
                c if c.is_ascii_digit() || c == '.' => {
                    let start = pos;
                    pos = scan_number(bytes, pos);
                    let text = &input[start..pos];
                    let value: f64 = text.parse().map_err(|_| lx.error(start, "malformed number"))?;
                    lx.tokens.push((start, Token::Number(value)));
                    continue;
                }
                _ => return Err(lx.error(pos, &format!("unexpected character {ch:?}"))),
            };
            lx.tokens.push((pos, token));
            pos += 1;
        }
        Ok(lx.tokens)
    }

    fn error(&self, position: usize, message: &str) -> ParseError {
        ParseError {
            input: self.input.to_string(),
            position,
            message: message.to_string(),
        }
    }
}

/// End of a decimal literal with optional fraction and exponent.
fn scan_number(bytes: &[u8], mut pos: usize) -> usize {
    while pos < bytes.len() && (bytes[pos].is_ascii_digit() || bytes[pos] == b'.') {
        pos += 1;
    }
    if pos < bytes.len() && (bytes[pos] == b'e' || bytes[pos] == b'E') {
        let mut p = pos + 1;
        if p < bytes.len() && (bytes[p] == b'+' || bytes[p] == b'-') {
            p += 1;
        }
        if p < bytes.len() && bytes[p].is_ascii_digit() {
            while p < bytes.len() && bytes[p].is_ascii_digit() {
                p += 1;
            }
            return p;
        }
    }
    pos
}

struct Parser<'a> {
    input: &'a str,
    tokens: Vec<(usize, Token)>,
    next: usize,
    allow_var: bool,
}

impl Parser<'_> {
    fn peek(&self) -> Option<Token> {
        self.tokens.get(self.next).map(|&(_, t)| t)
    }

    fn position(&self) -> usize {
        self.tokens.get(self.next).map_or(self.input.len(), |&(p, _)| p)
    }

    fn error(&self, message: &str) -> ParseError {
        ParseError {
            input: self.input.to_string(),
            position: self.position(),
            message: message.to_string(),
        }
    }

    fn expr(&mut self) -> Result<Vec<Complex64>, ParseError> {
        let mut acc = self.term()?;
        while let Some(op @ (Token::Plus | Token::Minus)) = self.peek() {
            self.next += 1;
            let rhs = self.term()?;
            let sign = if op == Token::Plus { 1.0 } else { -1.0 };
            acc = add(&acc, &rhs, sign);
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Vec<Complex64>, ParseError> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(Token::Star) => self.next += 1,
                // juxtaposition such as `2z` or `3(z+1)`
                Some(Token::Var | Token::Open | Token::Const(_) | Token::Imaginary | Token::Number(_)) => {}
                _ => break,
            }
            let rhs = self.unary()?;
            acc = self.mul(&acc, &rhs)?;
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Vec<Complex64>, ParseError> {
        match self.peek() {
            Some(Token::Minus) => {
                self.next += 1;
                Ok(self.unary()?.into_iter().map(|c| -c).collect())
            }
            Some(Token::Plus) => {
                self.next += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Vec<Complex64>, ParseError> {
        let base = self.atom()?;
        if self.peek() != Some(Token::Caret) {
            return Ok(base);
        }
        self.next += 1;
        let exponent = match self.peek() {
            Some(Token::Number(n)) if n.fract() == 0.0 && n >= 0.0 && n <= MAX_DEGREE as f64 => n as usize,
            _ => return Err(self.error("exponent must be an integer between 0 and 64")),
        };
        self.next += 1;
        let mut out = vec![Complex64::new(1.0, 0.0)];
        for _ in 0..exponent {
            out = self.mul(&out, &base)?;
        }
        Ok(out)
    }

    fn atom(&mut self) -> Result<Vec<Complex64>, ParseError> {
        let token = self.peek().ok_or_else(|| self.error("unexpected end of input"))?;
        let var_pos = self.position();
        self.next += 1;
        match token {
            Token::Number(v) => {
                if self.peek() == Some(Token::Imaginary) {
                    self.next += 1;
                    Ok(vec![Complex64::new(0.0, v)])
                } else {
                    Ok(vec![Complex64::new(v, 0.0)])
                }
            }
            Token::Imaginary => Ok(vec![Complex64::new(0.0, 1.0)]),
            Token::Const(v) => Ok(vec![Complex64::new(v, 0.0)]),
            Token::Var if self.allow_var => Ok(vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]),
            Token::Var => Err(ParseError {
                input: self.input.to_string(),
                position: var_pos,
                message: "variable not allowed in a number".into(),
            }),
            Token::Open => {
                let inner = self.expr()?;
                if self.peek() != Some(Token::Close) {
                    return Err(self.error("expected ')'"));
                }
                self.next += 1;
                Ok(inner)
            }
            _ => {
                self.next -= 1;
                Err(self.error("expected a number, 'z', or '('"))
            }
        }
    }

    fn mul(&self, a: &[Complex64], b: &[Complex64]) -> Result<Vec<Complex64>, ParseError> {
        if a.len() + b.len() - 2 > MAX_DEGREE {
            return Err(self.error("degree above 64"));
        }
        let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        Ok(out)
    }
}

fn add(a: &[Complex64], b: &[Complex64], sign: f64) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); a.len().max(b.len())];
    for (i, x) in a.iter().enumerate() {
        out[i] += x;
    }
    for (i, y) in b.iter().enumerate() {
        out[i] += y * sign;
    }
    out
}

fn parse_coeffs(input: &str, allow_var: bool) -> Result<Vec<Complex64>, ParseError> {
    let tokens = Lexer::run(input)?;
    let mut parser = Parser {
        input,
        tokens,
        next: 0,
        allow_var,
    };
    let coeffs = parser.expr()?;
    if parser.next < parser.tokens.len() {
        return Err(parser.error("unexpected token"));
    }
    Ok(coeffs)
}

pub fn polynomial(input: &str) -> Result<Polynomial, ParseError> {
    let coeffs = parse_coeffs(input, true)?;
    Polynomial::new(coeffs).map_err(|e| ParseError {
        input: input.to_string(),
        position: 0,
        message: e.to_string(),
    })
}

pub fn complex(input: &str) -> Result<Complex64, ParseError> {
    let coeffs = parse_coeffs(input, false)?;
    let value = coeffs[0];
    if !value.is_finite() {
        return Err(ParseError {
            input: input.to_string(),
            position: 0,
            message: "value is not finite".into(),
        });
    }
    Ok(value)
}

pub fn real(input: &str) -> Result<f64, ParseError> {
    let value = complex(input)?;
    if value.im != 0.0 {
        return Err(ParseError {
            input: input.to_string(),
            position: 0,
            message: "expected a real number".into(),
        });
    }
    Ok(value.re)
}

/// Comma-separated reals such as `1e2,1e3,1e4`.
pub fn real_list(input: &str) -> Result<Vec<f64>, ParseError> {
    let mut offset = 0;
    input
        .split(',')
        .map(|part| {
            let start = offset;
            offset += part.len() + 1;
            real(part.trim()).map_err(|mut e| {
                e.input = input.to_string();
                e.position += start;
                e
            })
        })
        .collect()
}

/// `disc:CENTER:RADIUS`, `ray:ANCHOR:DIRECTION`, `polygon:V1;V2;V3...` or
/// `julia:POLY:MAX_ITER:ESCAPE_RADIUS`.
pub fn region(input: &str) -> Result<RegionSpec, ParseError> {
    let fail = |message: &str| ParseError {
        input: input.to_string(),
        position: 0,
        message: message.to_string(),
    };
    let (kind, rest) = input.split_once(':').ok_or_else(|| fail("expected KIND:ARGS"))?;
    let parts: Vec<&str> = rest.split(':').collect();
    let built = match (kind, parts.as_slice()) {
        ("disc", [center, radius]) => RegionSpec::disc(complex(center)?, real(radius)?),
        ("ray", [anchor, direction]) => RegionSpec::half_line(complex(anchor)?, complex(direction)?),
        ("polygon", [vertices]) => {
            RegionSpec::polygon(vertices.split(';').map(complex).collect::<Result<Vec<_>, _>>()?)
        }
        ("julia", [poly, iters, radius]) => {
            let iters: usize = iters.trim().parse().map_err(|_| fail("max_iter must be an integer"))?;
            RegionSpec::filled_julia(polynomial(poly)?, iters, real(radius)?)
        }
        _ => {
            return Err(fail(
                "unknown region; use disc:c:r, ray:a:d, polygon:v1;v2;..., julia:p:n:R",
            ))
        }
    };
    built.map_err(|e| fail(&e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn polynomials() {
        assert_eq!(
            polynomial("z^2").unwrap().coeffs(),
            &[c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]
        );
        assert_eq!(
            polynomial("z^2-1").unwrap().coeffs(),
            &[c(-1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]
        );
        assert_eq!(
            polynomial("1.5*z+z^2").unwrap().coeffs(),
            &[c(0.0, 0.0), c(1.5, 0.0), c(1.0, 0.0)]
        );
        assert_eq!(polynomial("2z").unwrap().coeffs(), &[c(0.0, 0.0), c(2.0, 0.0)]);
        assert_eq!(
            polynomial("(z+1)^2").unwrap().coeffs(),
            &[c(1.0, 0.0), c(2.0, 0.0), c(1.0, 0.0)]
        );
        assert_eq!(
            polynomial("(0.5+2i)*z^3 - i").unwrap().coeffs(),
            &[c(0.0, -1.0), c(0.0, 0.0), c(0.0, 0.0), c(0.5, 2.0)]
        );
        assert_eq!(polynomial("-z").unwrap().coeffs(), &[c(0.0, 0.0), c(-1.0, 0.0)]);
    }

    #[test]
    fn complex_literals() {
        assert_eq!(complex("1+i").unwrap(), c(1.0, 1.0));
        assert_eq!(complex("-0.5-2.5i").unwrap(), c(-0.5, -2.5));
        assert_eq!(complex("1e2").unwrap(), c(100.0, 0.0));
        assert_eq!(complex("2.5e-3i").unwrap(), c(0.0, 2.5e-3));
        assert_eq!(complex("e").unwrap(), c(std::f64::consts::E, 0.0));
        assert_eq!(complex("2*pi*i").unwrap(), c(0.0, std::f64::consts::TAU));
        assert_eq!(real("3").unwrap(), 3.0);
        assert!(real("i").is_err());
    }

    #[test]
    fn error_positions() {
        assert_eq!(polynomial("z^2 + $").unwrap_err().position, 6);
        assert_eq!(polynomial("(z+1").unwrap_err().position, 4);
        assert_eq!(complex("1+z").unwrap_err().position, 2);
        assert_eq!(polynomial("z^1.5").unwrap_err().position, 2);
        assert_eq!(polynomial("z^2)").unwrap_err().position, 3);
        assert_eq!(polynomial("").unwrap_err().position, 0);
        assert_eq!(real_list("1,2,x").unwrap_err().position, 4);
    }

    #[test]
    fn lists_and_regions() {
        assert_eq!(real_list("1e2, 1e3,1e4").unwrap(), vec![100.0, 1000.0, 10000.0]);
        assert!(matches!(region("disc:1:0.1").unwrap(), RegionSpec::Disc { .. }));
        assert!(matches!(region("ray:0:-1").unwrap(), RegionSpec::HalfLine { .. }));
        assert!(matches!(
            region("polygon:0;1;1+i;i").unwrap(),
            RegionSpec::Polygon { .. }
        ));
        assert!(matches!(
            region("julia:z^2-1:200:10").unwrap(),
            RegionSpec::FilledJulia { .. }
        ));
        assert!(region("disc:1").is_err());
        assert!(region("blob:1:2").is_err());
        assert!(region("disc:0:-1").is_err());
    }
}

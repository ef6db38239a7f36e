//! Recursive-descent parser for the symbol mini-language.
//!
//! ```text
//! expr   := ["+"|"-"] term { ("+"|"-") term }
//! term   := [coeff "*"] factor { "*" factor }
//! factor := var ["^" int]
//! var    := "z1" | "z2" | "z3" | "~z1" | "~z2" | "~z3"
//! coeff  := float | "(" float ("+"|"-") float "i" ")"
//! ```
//!
//! Parsed symbols are rewritten into canonical boundary coordinates:
//! `z1 -> ~z2*z3`, `~z1 -> z2*~z3`, and `~z3 -> z3^-1`.

use num_complex::Complex64;
use std::fmt;
use tetralab_core::SymbolExpr;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub pos: usize,
    pub msg: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "syntax error at position {}: {}", self.pos, self.msg)
    }
}

impl std::error::Error for ParseError {}

const MAX_EXPONENT: u32 = 64;

struct Cursor<'a> {
    text: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            text: text.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.text.len() && self.text[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.text.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        Some(c)
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        match self.peek() {
            Some(found) if found == c => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.error(format!("expected '{}'", c as char))),
        }
    }

    fn error(&self, msg: impl Into<String>) -> ParseError {
        ParseError {
            pos: self.pos,
            msg: msg.into(),
        }
    }

    fn at_end(&mut self) -> bool {
        self.peek().is_none()
    }

    /// Unsigned decimal integer.
    fn parse_uint(&mut self) -> Result<u32, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.text.len() && self.text[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.error("expected an integer"));
        }
        let s = std::str::from_utf8(&self.text[start..self.pos]).unwrap();
        s.parse::<u32>().map_err(|_| ParseError {
            pos: start,
            msg: format!("integer {s:?} out of range"),
        })
    }

    /// Float with optional sign, fraction and exponent.
    fn parse_float(&mut self) -> Result<f64, ParseError> {
        self.skip_ws();
        let start = self.pos;
        if matches!(self.text.get(self.pos), Some(b'+') | Some(b'-')) {
            self.pos += 1;
        }
        let digits_start = self.pos;
        while self.pos < self.text.len()
            && (self.text[self.pos].is_ascii_digit() || self.text[self.pos] == b'.')
        {
            self.pos += 1;
        }
        if self.pos == digits_start {
            return Err(ParseError {
                pos: start,
                msg: "expected a number".into(),
            });
        }
        if matches!(self.text.get(self.pos), Some(b'e') | Some(b'E')) {
            self.pos += 1;
            if matches!(self.text.get(self.pos), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            while self.pos < self.text.len() && self.text[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
        }
        let s = std::str::from_utf8(&self.text[start..self.pos]).unwrap();
        s.parse::<f64>().map_err(|_| ParseError {
            pos: start,
            msg: format!("malformed number {s:?}"),
        })
    }
}

/// Parses the mini-language into a canonical symbol.
pub fn parse_symbol(text: &str) -> Result<SymbolExpr, ParseError> {
    let mut cur = Cursor::new(text);
    if cur.at_end() {
        return Err(cur.error("empty symbol"));
    }
    let mut symbol = SymbolExpr::zero();
    let mut sign = match cur.peek() {
        Some(b'+') => {
            cur.bump();
            1.0
        }
        Some(b'-') => {
            cur.bump();
            -1.0
        }
        _ => 1.0,
    };
    loop {
        let (a, b, k, coeff) = parse_term(&mut cur)?;
        symbol.add_term(a, b, k, coeff * sign);
        match cur.peek() {
            None => break,
            Some(b'+') => {
                cur.bump();
                sign = 1.0;
            }
            Some(b'-') => {
                cur.bump();
                sign = -1.0;
            }
            Some(c) => {
                return Err(cur.error(format!("unexpected character '{}'", c as char)));
            }
        }
    }
    Ok(symbol)
}

fn parse_term(cur: &mut Cursor) -> Result<(u32, u32, i32, Complex64), ParseError> {
    let mut coeff = Complex64::new(1.0, 0.0);
    let (mut a, mut b, mut k) = (0u32, 0u32, 0i32);

    match cur.peek() {
        Some(b'(') => {
            coeff = parse_complex_coeff(cur)?;
            cur.expect(b'*')?;
        }
        Some(c) if c.is_ascii_digit() || c == b'.' => {
            coeff = Complex64::new(cur.parse_float()?, 0.0);
            cur.expect(b'*')?;
        }
        _ => {}
    }

    loop {
        let (da, db, dk) = parse_factor(cur)?;
        a = a
            .checked_add(da)
            .filter(|&v| v <= MAX_EXPONENT)
            .ok_or_else(|| cur.error(format!("exponent overflow (limit {MAX_EXPONENT})")))?;
        b = b
            .checked_add(db)
            .filter(|&v| v <= MAX_EXPONENT)
            .ok_or_else(|| cur.error(format!("exponent overflow (limit {MAX_EXPONENT})")))?;
        k += dk;
        if k.unsigned_abs() > MAX_EXPONENT {
            return Err(cur.error(format!("exponent overflow (limit {MAX_EXPONENT})")));
        }
        match cur.peek() {
            Some(b'*') => {
                cur.bump();
            }
            _ => break,
        }
    }
    Ok((a, b, k, coeff))
}

fn parse_complex_coeff(cur: &mut Cursor) -> Result<Complex64, ParseError> {
    cur.expect(b'(')?;
    let re = cur.parse_float()?;
    let sign = match cur.peek() {
        Some(b'+') => 1.0,
        Some(b'-') => -1.0,
        _ => return Err(cur.error("expected '+' or '-' in complex coefficient")),
    };
    cur.bump();
    let im = cur.parse_float()?;
    match cur.peek() {
        Some(b'i') => {
            cur.bump();
        }
        _ => return Err(cur.error("expected 'i' in complex coefficient")),
    }
    cur.expect(b')')?;
    Ok(Complex64::new(re, sign * im))
}

/// Returns the (a, b, k) contribution of one factor after the boundary
/// rewrites.
fn parse_factor(cur: &mut Cursor) -> Result<(u32, u32, i32), ParseError> {
    let conjugated = match cur.peek() {
        Some(b'~') => {
            cur.bump();
            true
        }
        _ => false,
    };
    match cur.peek() {
        Some(b'z') => {
            cur.bump();
        }
        _ => return Err(cur.error("expected a variable (z1, z2, z3, ~z1, ~z2, ~z3)")),
    }
    let which = match cur.peek() {
        Some(c @ b'1'..=b'3') => {
            cur.bump();
            c - b'0'
        }
        _ => return Err(cur.error("expected coordinate index 1, 2 or 3")),
    };
    let exp = match cur.peek() {
        Some(b'^') => {
            cur.bump();
            let e = cur.parse_uint()?;
            if e > MAX_EXPONENT {
                return Err(cur.error(format!("exponent overflow (limit {MAX_EXPONENT})")));
            }
            e
        }
        _ => 1,
    };
    // Boundary rewrites: z1 = ~z2*z3 and ~z1 = z2*~z3; z3-bar is z3^-1.
    let (a, b, k) = match (which, conjugated) {
        (1, false) => (0, 1, 1i32),
        (1, true) => (1, 0, -1),
        (2, false) => (1, 0, 0),
        (2, true) => (0, 1, 0),
        (3, false) => (0, 0, 1),
        (3, true) => (0, 0, -1),
        _ => unreachable!(),
    };
    Ok((a * exp, b * exp, k * exp as i32))
}

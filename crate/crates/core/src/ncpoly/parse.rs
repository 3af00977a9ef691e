//! Text grammar for free polynomials.
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor ('*' factor)*
//! factor := scalar | matrix | var | '(' expr ')' | ('+'|'-') factor
//! var    := 'x' digits
//! matrix := '[' '[' num (',' num)* ']' (',' '[' num (',' num)* ']')* ']'
//! num    := float | float 'i' | float ('+'|'-') float 'i'
//! ```
//!
//! Scalars are shape-polymorphic: they act as `c·I` when combined with a
//! square matrix coefficient.

use std::collections::BTreeMap;

use num_complex::Complex64;

use super::{FreePolynomial, FreeWord};
use crate::error::{Error, Result};
use crate::linalg::{c64, eye, CMat};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Tok {
    Plus,
    Minus,
    Star,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Var(usize),
    Real(f64),
    Imag(f64),
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(Tok, usize)>> {
        let mut lx = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        loop {
            let t = lx.next()?;
            let done = t.0 == Tok::End;
            out.push(t);
            if done {
                return Ok(out);
            }
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.as_bytes().get(self.pos).copied()
    }

    fn next(&mut self) -> Result<(Tok, usize)> {
        while self.peek().is_some_and(|b| b.is_ascii_whitespace()) {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(b) = self.peek() else {
            return Ok((Tok::End, start));
        };
        let single = match b {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b'[' => Some(Tok::LBracket),
            b']' => Some(Tok::RBracket),
            b',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(t) = single {
            self.pos += 1;
            return Ok((t, start));
        }
        if b == b'x' {
            self.pos += 1;
            let digits = self.eat_digits();
            if digits == 0 {
                return Err(parse_err(start, "expected digits after 'x'"));
            }
            let idx =
                self.src[start + 1..self.pos].parse().map_err(|_| parse_err(start, "variable index too large"))?;
            return Ok((Tok::Var(idx), start));
        }
        if b.is_ascii_digit() || b == b'.' {
            let value = self.number(start)?;
            if self.peek() == Some(b'i') {
                self.pos += 1;
                return Ok((Tok::Imag(value), start));
            }
            return Ok((Tok::Real(value), start));
        }
        let ch = self.src[start..].chars().next().unwrap_or('?');
        Err(parse_err(start, &format!("unexpected character '{ch}'")))
    }

    fn eat_digits(&mut self) -> usize {
        let s = self.pos;
        while self.peek().is_some_and(|b| b.is_ascii_digit()) {
            self.pos += 1;
        }
        self.pos - s
    }

    fn number(&mut self, start: usize) -> Result<f64> {
        let mut digits = self.eat_digits();
        if self.peek() == Some(b'.') {
            self.pos += 1;
            digits += self.eat_digits();
        }
        if digits == 0 {
            return Err(parse_err(start, "malformed number"));
        }
        if matches!(self.peek(), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if self.eat_digits() == 0 {
                self.pos = save;
            }
        }
        self.src[start..self.pos].parse().map_err(|_| parse_err(start, "malformed number"))
    }
}

fn parse_err(offset: usize, message: &str) -> Error {
    Error::Parse { offset, message: message.to_string() }
}

/// Intermediate value: `shape == None` marks a scalar-coefficient expression
/// whose coefficients are stored as 1×1 matrices.
#[derive(Clone)]
struct Val {
    shape: Option<(usize, usize)>,
    terms: BTreeMap<FreeWord, CMat>,
}

impl Val {
    fn scalar(c: Complex64) -> Val {
        let mut terms = BTreeMap::new();
        terms.insert(FreeWord::empty(), CMat::from_element(1, 1, c));
        Val { shape: None, terms }
    }

    fn matrix(m: CMat) -> Val {
        let shape = Some(m.shape());
        let mut terms = BTreeMap::new();
        terms.insert(FreeWord::empty(), m);
        Val { shape, terms }
    }

    fn var(j: usize) -> Val {
        let mut terms = BTreeMap::new();
        terms.insert(FreeWord::letter(j), CMat::from_element(1, 1, c64(1.0, 0.0)));
        Val { shape: None, terms }
    }

    fn is_zero(&self) -> bool {
        self.terms.values().all(|m| m.iter().all(|z| z.norm() == 0.0))
    }

    /// Scalar expression promoted to `shape` (square only, or zero).
    fn promote(self, shape: (usize, usize), offset: usize) -> Result<Val> {
        if self.shape.is_some() {
            return Ok(self);
        }
        if shape.0 != shape.1 && !self.is_zero() {
            return Err(Error::Shape(format!(
                "offset {offset}: scalar term cannot combine with {}x{} coefficients",
                shape.0, shape.1
            )));
        }
        let id = eye(shape.0.min(shape.1));
        let terms = self
            .terms
            .into_iter()
            .map(|(w, c)| {
                let m = if shape.0 == shape.1 { &id * c[(0, 0)] } else { CMat::zeros(shape.0, shape.1) };
                (w, m)
            })
            .collect();
        Ok(Val { shape: Some(shape), terms })
    }

    fn add(self, other: Val, sign: f64, offset: usize) -> Result<Val> {
        let (a, b) = match (self.shape, other.shape) {
            (Some(s), Some(t)) if s != t => {
                return Err(Error::Shape(format!(
                    "offset {offset}: adding {}x{} and {}x{} coefficients",
                    s.0, s.1, t.0, t.1
                )))
            }
            (Some(s), None) => (self, other.promote(s, offset)?),
            (None, Some(t)) => (self.promote(t, offset)?, other),
            _ => (self, other),
        };
        let mut terms = a.terms;
        for (w, c) in b.terms {
            let c = c * c64(sign, 0.0);
            match terms.get_mut(&w) {
                Some(existing) => *existing += c,
                None => {
                    terms.insert(w, c);
                }
            }
        }
        Ok(Val { shape: a.shape, terms })
    }

    fn mul(self, other: Val, offset: usize) -> Result<Val> {
        let shape = match (self.shape, other.shape) {
            (Some(s), Some(t)) => {
                if s.1 != t.0 {
                    return Err(Error::Shape(format!(
                        "offset {offset}: multiplying {}x{} by {}x{} coefficients",
                        s.0, s.1, t.0, t.1
                    )));
                }
                Some((s.0, t.1))
            }
            (s, None) => s,
            (None, t) => t,
        };
        let mut terms: BTreeMap<FreeWord, CMat> = BTreeMap::new();
        for (u, a) in &self.terms {
            for (v, b) in &other.terms {
                let c = match (self.shape, other.shape) {
                    (None, _) => b * a[(0, 0)],
                    (_, None) => a * b[(0, 0)],
                    _ => a * b,
                };
                let w = u.concat(v);
                match terms.get_mut(&w) {
                    Some(existing) => *existing += c,
                    None => {
                        terms.insert(w, c);
                    }
                }
            }
        }
        Ok(Val { shape, terms })
    }

    fn neg(self) -> Val {
        let terms = self.terms.into_iter().map(|(w, c)| (w, -c)).collect();
        Val { shape: self.shape, terms }
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
    d: usize,
}

impl Parser {
    fn peek(&self) -> Tok {
        self.toks[self.at].0
    }

    fn offset(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.peek();
        if t != Tok::End {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        if self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(parse_err(self.offset(), &format!("expected {what}")))
        }
    }

    fn expr(&mut self) -> Result<Val> {
        let mut acc = self.term()?;
        loop {
            let sign = match self.peek() {
                Tok::Plus => 1.0,
                Tok::Minus => -1.0,
                _ => return Ok(acc),
            };
            let off = self.offset();
            self.bump();
            let rhs = self.term()?;
            acc = acc.add(rhs, sign, off)?;
        }
    }

    fn term(&mut self) -> Result<Val> {
        let mut acc = self.factor()?;
        while self.peek() == Tok::Star {
            let off = self.offset();
            self.bump();
            let rhs = self.factor()?;
            acc = acc.mul(rhs, off)?;
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Val> {
        let off = self.offset();
        match self.bump() {
            Tok::Plus => self.factor(),
            Tok::Minus => Ok(self.factor()?.neg()),
            Tok::Real(v) => Ok(Val::scalar(c64(v, 0.0))),
            Tok::Imag(v) => Ok(Val::scalar(c64(0.0, v))),
            Tok::Var(j) => {
                if j == 0 || j > self.d {
                    return Err(parse_err(off, &format!("variable x{j} outside x1..x{}", self.d)));
                }
                Ok(Val::var(j))
            }
            Tok::LParen => {
                let v = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(v)
            }
            Tok::LBracket => self.matrix_body(off),
            Tok::End => Err(parse_err(off, "unexpected end of input")),
            t => Err(parse_err(off, &format!("unexpected token {t:?}"))),
        }
    }

    /// Parses the rows of a matrix literal; the opening '[' is consumed.
    fn matrix_body(&mut self, open: usize) -> Result<Val> {
        let mut rows: Vec<Vec<Complex64>> = Vec::new();
        loop {
            self.expect(Tok::LBracket, "'[' starting a matrix row")?;
            let mut row = vec![self.num()?];
            while self.peek() == Tok::Comma {
                self.bump();
                row.push(self.num()?);
            }
            self.expect(Tok::RBracket, "']' closing a matrix row")?;
            if let Some(first) = rows.first() {
                if first.len() != row.len() {
                    return Err(parse_err(open, "matrix rows have different lengths"));
                }
            }
            rows.push(row);
            match self.peek() {
                Tok::Comma => {
                    self.bump();
                }
                Tok::RBracket => {
                    self.bump();
                    break;
                }
                _ => return Err(parse_err(self.offset(), "expected ',' or ']' in matrix")),
            }
        }
        let (r, s) = (rows.len(), rows[0].len());
        Ok(Val::matrix(CMat::from_row_iterator(r, s, rows.into_iter().flatten())))
    }

    fn signed(&mut self) -> f64 {
        match self.peek() {
            Tok::Minus => {
                self.bump();
                -1.0
            }
            Tok::Plus => {
                self.bump();
                1.0
            }
            _ => 1.0,
        }
    }

    fn num(&mut self) -> Result<Complex64> {
        let sign = self.signed();
        let off = self.offset();
        let mut z = match self.bump() {
            Tok::Real(v) => c64(sign * v, 0.0),
            Tok::Imag(v) => return Ok(c64(0.0, sign * v)),
            _ => return Err(parse_err(off, "expected a number")),
        };
        if matches!(self.peek(), Tok::Plus | Tok::Minus) {
            if let Some(&(Tok::Imag(v), _)) = self.toks.get(self.at + 1) {
                let s = if self.bump() == Tok::Minus { -1.0 } else { 1.0 };
                self.bump();
                z.im = s * v;
            }
        }
        Ok(z)
    }
}

fn parse_val(text: &str, d: usize) -> Result<Val> {
    let toks = Lexer::tokens(text)?;
    let mut p = Parser { toks, at: 0, d };
    let v = p.expr()?;
    if p.peek() != Tok::End {
        return Err(parse_err(p.offset(), "trailing input"));
    }
    Ok(v)
}

fn into_poly(v: Val, d: usize, shape: (usize, usize)) -> Result<FreePolynomial> {
    let v = v.promote(shape, 0)?;
    if v.shape != Some(shape) {
        let s = v.shape.unwrap_or((1, 1));
        return Err(Error::Shape(format!(
            "polynomial has {}x{} coefficients, expected {}x{}",
            s.0, s.1, shape.0, shape.1
        )));
    }
    FreePolynomial::from_terms(d, shape.0, shape.1, v.terms)
}

/// Parses `text` as a polynomial in `d` variables with `shape = (r, s)`
/// coefficients.
pub fn parse_poly(text: &str, d: usize, shape: (usize, usize)) -> Result<FreePolynomial> {
    into_poly(parse_val(text, d)?, d, shape)
}

/// Like [`parse_poly`], taking the coefficient shape from the matrix literals
/// (1×1 when there are none).
pub fn parse_poly_infer(text: &str, d: usize) -> Result<FreePolynomial> {
    let v = parse_val(text, d)?;
    let shape = v.shape.unwrap_or((1, 1));
    into_poly(v, d, shape)
}

/// Round-trip text for a complex scalar.
pub fn format_complex(z: Complex64) -> String {
    if z.im == 0.0 {
        format!("{:?}", z.re)
    } else if z.re == 0.0 {
        format!("{:?}i", z.im)
    } else if z.im < 0.0 {
        format!("{:?}-{:?}i", z.re, -z.im)
    } else {
        format!("{:?}+{:?}i", z.re, z.im)
    }
}

pub fn format_matrix(m: &CMat) -> String {
    let rows: Vec<String> = (0..m.nrows())
        .map(|i| {
            let entries: Vec<String> = (0..m.ncols()).map(|j| format_complex(m[(i, j)])).collect();
            format!("[{}]", entries.join(","))
        })
        .collect();
    format!("[{}]", rows.join(","))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn commutator_has_two_terms() {
        let p = parse_poly("x1*x2 - x2*x1", 2, (1, 1)).unwrap();
        assert_eq!(p.terms().len(), 2);
        let w = FreeWord::new(vec![2, 1], 2).unwrap();
        assert_eq!(p.coefficient(&w).unwrap()[(0, 0)], c64(-1.0, 0.0));
    }

    #[test]
    fn matrix_constant() {
        let p = parse_poly("[[2,0],[0,2]]", 1, (2, 2)).unwrap();
        assert_eq!(p.terms().len(), 1);
        assert_eq!(p.coefficient(&FreeWord::empty()).unwrap(), &(eye(2) * c64(2.0, 0.0)));
    }

    #[test]
    fn unmatched_paren_reports_offset() {
        match parse_poly("x1*(x2", 2, (1, 1)) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 6),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn scalar_promotes_to_square_identity() {
        let p = parse_poly("1 - [[0,1],[0,0]]*x1", 1, (2, 2)).unwrap();
        assert_eq!(p.coefficient(&FreeWord::empty()).unwrap(), &eye(2));
    }

    #[test]
    fn complex_numbers() {
        let p = parse_poly("[[1+2i, -3i],[1.5e-3-2i, 4]]", 1, (2, 2)).unwrap();
        let c = p.coefficient(&FreeWord::empty()).unwrap();
        assert_eq!(c[(0, 0)], c64(1.0, 2.0));
        assert_eq!(c[(0, 1)], c64(0.0, -3.0));
        assert_eq!(c[(1, 0)], c64(1.5e-3, -2.0));
        let q = parse_poly("2i*x1 + 1e2", 1, (1, 1)).unwrap();
        assert_eq!(q.coefficient(&FreeWord::letter(1)).unwrap()[(0, 0)], c64(0.0, 2.0));
        assert_eq!(q.coefficient(&FreeWord::empty()).unwrap()[(0, 0)], c64(100.0, 0.0));
    }

    #[test]
    fn shape_errors() {
        assert!(matches!(parse_poly("[[1,0]] + 1", 1, (1, 2)), Err(Error::Shape(_))));
        assert!(matches!(parse_poly("[[1,0]]", 1, (2, 2)), Err(Error::Shape(_))));
        assert!(matches!(parse_poly("[[1,0]]*[[1,0]]", 1, (1, 2)), Err(Error::Shape(_))));
        assert!(matches!(parse_poly("[[1,0],[1]]", 1, (2, 2)), Err(Error::Parse { .. })));
    }

    #[test]
    fn syntax_errors() {
        assert!(matches!(parse_poly("x1 x2", 2, (1, 1)), Err(Error::Parse { offset: 3, .. })));
        assert!(matches!(parse_poly("x3", 2, (1, 1)), Err(Error::Parse { offset: 0, .. })));
        assert!(matches!(parse_poly("x0", 2, (1, 1)), Err(Error::Parse { .. })));
        assert!(matches!(parse_poly("y1", 2, (1, 1)), Err(Error::Parse { offset: 0, .. })));
        assert!(matches!(parse_poly("", 2, (1, 1)), Err(Error::Parse { offset: 0, .. })));
    }

    #[test]
    fn distributes_parentheses() {
        let p = parse_poly("(x1 + 2)*(x2 - x1)", 2, (1, 1)).unwrap();
        let q = parse_poly("x1*x2 - x1*x1 + 2*x2 - 2*x1", 2, (1, 1)).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn zero_scalar_fits_any_shape() {
        let p = parse_poly("0", 1, (1, 3)).unwrap();
        assert!(p.is_zero());
        assert_eq!(p.to_string(), "0");
    }

    #[test]
    fn inference() {
        assert_eq!(parse_poly_infer("x1*x2", 2).unwrap().shape(), (1, 1));
        assert_eq!(parse_poly_infer("[[1,0]]*x1", 1).unwrap().shape(), (1, 2));
    }

    fn coeff_strategy(r: usize, s: usize) -> impl Strategy<Value = CMat> {
        proptest::collection::vec((-3i32..4, -3i32..4, -1.0e3f64..1.0e3), r * s).prop_map(move |v| {
            CMat::from_iterator(r, s, v.into_iter().map(|(a, b, f)| c64(a as f64 * f / 7.0, b as f64 / 3.0)))
        })
    }

    proptest! {
        #[test]
        fn print_then_parse_is_identity(
            words in proptest::collection::vec(proptest::collection::vec(1usize..=3, 0..4), 0..5),
            coeffs in proptest::collection::vec(coeff_strategy(2, 3), 5),
        ) {
            let terms = words
                .into_iter()
                .zip(coeffs)
                .map(|(w, c)| (FreeWord::new(w, 3).unwrap(), c));
            let p = FreePolynomial::from_terms(3, 2, 3, terms).unwrap();
            let text = p.to_string();
            let q = parse_poly(&text, 3, (2, 3)).unwrap();
            prop_assert_eq!(p, q);
        }
    }
}

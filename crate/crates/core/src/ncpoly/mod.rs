//! Free words, matrix-coefficient free polynomials and their evaluation on
//! matrix tuples.
//!
//! A polynomial `p = Σ p_w w` with `r × s` coefficients evaluates at a level-`n`
//! tuple `X` to the `(r·n) × (s·n)` matrix `Σ p_w ⊗ X^w`.

mod parse;
mod tuple;

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{c64, eye, zeros, CMat};

pub use parse::{format_complex, format_matrix, parse_poly, parse_poly_infer};
pub use tuple::{block_shuffle_map, canonical_shuffle, direct_sum, direct_sum_all, unitary_conj, MatrixTuple};

/// A word `x_{j1} x_{j2} … x_{jm}` in the free semigroup; letters are 1-based.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct FreeWord(Vec<usize>);

impl FreeWord {
    pub fn empty() -> Self {
        FreeWord(Vec::new())
    }

    /// Builds a word, checking each letter against `1..=d`.
    pub fn new(letters: Vec<usize>, d: usize) -> Result<Self> {
        if let Some(&letter) = letters.iter().find(|&&l| l == 0 || l > d) {
            return Err(Error::InvalidWord { letter, d });
        }
        Ok(FreeWord(letters))
    }

    pub fn letter(j: usize) -> Self {
        FreeWord(vec![j])
    }

    pub fn letters(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn concat(&self, other: &FreeWord) -> FreeWord {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        FreeWord(v)
    }

    fn max_letter(&self) -> usize {
        self.0.iter().copied().max().unwrap_or(0)
    }
}

/// Length first, then lexicographic.
impl Ord for FreeWord {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for FreeWord {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for FreeWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "∅");
        }
        let parts: Vec<String> = self.0.iter().map(|j| format!("x{j}")).collect();
        write!(f, "{}", parts.join("*"))
    }
}

/// `X^w = X_{j1} X_{j2} … X_{jm}`, with `X^∅ = I_n`.
pub fn word_eval(x: &MatrixTuple, w: &FreeWord) -> Result<CMat> {
    let d = x.d();
    let mut out = eye(x.level());
    for &j in w.letters() {
        if j == 0 || j > d {
            return Err(Error::InvalidWord { letter: j, d });
        }
        out *= x.entry(j);
    }
    Ok(out)
}

/// Matrix-coefficient free polynomial in canonical form: terms ordered by
/// [`FreeWord`]'s ordering, exact-zero coefficients dropped.
#[derive(Clone, Debug, PartialEq)]
pub struct FreePolynomial {
    d: usize,
    rows: usize,
    cols: usize,
    terms: BTreeMap<FreeWord, CMat>,
}

impl FreePolynomial {
    pub fn zero(d: usize, rows: usize, cols: usize) -> Self {
        FreePolynomial { d, rows, cols, terms: BTreeMap::new() }
    }

    /// Collects `terms`, summing repeated words.
    pub fn from_terms<I>(d: usize, rows: usize, cols: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (FreeWord, CMat)>,
    {
        let mut p = Self::zero(d, rows, cols);
        for (w, c) in terms {
            p.add_term(w, c)?;
        }
        Ok(p)
    }

    /// `coeff · ∅`.
    pub fn constant(d: usize, coeff: CMat) -> Self {
        let (rows, cols) = coeff.shape();
        Self::from_terms(d, rows, cols, [(FreeWord::empty(), coeff)]).expect("constant term")
    }

    /// `I_k ∅`.
    pub fn identity(d: usize, k: usize) -> Self {
        Self::constant(d, eye(k))
    }

    /// `coeff · x_j`.
    pub fn variable(d: usize, j: usize, coeff: CMat) -> Result<Self> {
        let (rows, cols) = coeff.shape();
        Self::from_terms(d, rows, cols, [(FreeWord::new(vec![j], d)?, coeff)])
    }

    /// `coeff · w` for an arbitrary word.
    pub fn monomial(d: usize, word: FreeWord, coeff: CMat) -> Result<Self> {
        let (rows, cols) = coeff.shape();
        Self::from_terms(d, rows, cols, [(word, coeff)])
    }

    fn add_term(&mut self, w: FreeWord, c: CMat) -> Result<()> {
        if w.max_letter() > self.d || w.letters().contains(&0) {
            return Err(Error::InvalidWord { letter: w.max_letter(), d: self.d });
        }
        if c.shape() != (self.rows, self.cols) {
            return Err(Error::Shape(format!(
                "coefficient of {w} is {}x{}, polynomial is {}x{}",
                c.nrows(),
                c.ncols(),
                self.rows,
                self.cols
            )));
        }
        let entry = self.terms.entry(w).or_insert_with(|| zeros(c.nrows(), c.ncols()));
        *entry += c;
        self.terms.retain(|_, m| m.iter().any(|z| *z != Complex64::new(0.0, 0.0)));
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Coefficient shape `(r, s)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn terms(&self) -> &BTreeMap<FreeWord, CMat> {
        &self.terms
    }

    pub fn coefficient(&self, w: &FreeWord) -> Option<&CMat> {
        self.terms.get(w)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(FreeWord::len).max().unwrap_or(0)
    }

    /// True when the polynomial is exactly `I_k ∅`.
    pub fn is_identity_constant(&self) -> bool {
        self.rows == self.cols
            && self.terms.len() == 1
            && self.terms.get(&FreeWord::empty()).is_some_and(|c| *c == eye(self.rows))
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.d != other.d || self.shape() != other.shape() {
            return Err(Error::Shape(format!(
                "cannot combine d={} {}x{} with d={} {}x{}",
                self.d, self.rows, self.cols, other.d, other.rows, other.cols
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (w, c) in &other.terms {
            out.add_term(w.clone(), c.clone())?;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(c64(-1.0, 0.0)))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let terms = self.terms.iter().map(|(w, c)| (w.clone(), c * s));
        Self::from_terms(self.d, self.rows, self.cols, terms).expect("scaling keeps shape")
    }

    /// Product `Σ_{u,v} (p_u q_v) uv`; coefficient shapes must chain.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.d != other.d || self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{} polynomial",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zero(self.d, self.rows, other.cols);
        for (u, a) in &self.terms {
            for (v, b) in &other.terms {
                out.add_term(u.concat(v), a * b)?;
            }
        }
        Ok(out)
    }

    /// `p(X) = Σ p_w ⊗ X^w`.
    pub fn eval(&self, x: &MatrixTuple) -> Result<CMat> {
        if x.d() != self.d {
            return Err(Error::Shape(format!("polynomial in {} variables evaluated at a {}-tuple", self.d, x.d())));
        }
        let n = x.level();
        let mut out = zeros(self.rows * n, self.cols * n);
        let mut powers: HashMap<Vec<usize>, CMat> = HashMap::new();
        for (w, coeff) in &self.terms {
            let xw = cached_power(&mut powers, x, w.letters());
            for a in 0..self.rows {
                for b in 0..self.cols {
                    let c = coeff[(a, b)];
                    if c != Complex64::new(0.0, 0.0) {
                        let mut block = out.view_mut((a * n, b * n), (n, n));
                        block += &xw * c;
                    }
                }
            }
        }
        Ok(out)
    }
}

fn cached_power(cache: &mut HashMap<Vec<usize>, CMat>, x: &MatrixTuple, letters: &[usize]) -> CMat {
    if let Some(m) = cache.get(letters) {
        return m.clone();
    }
    let m = match letters.split_last() {
        None => eye(x.level()),
        Some((&last, prefix)) => cached_power(cache, x, prefix) * x.entry(last),
    };
    cache.insert(letters.to_vec(), m.clone());
    m
}

/// Canonical text form accepted back by [`parse_poly`].
impl fmt::Display for FreePolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(w, c)| {
                let m = format_matrix(c);
                if w.is_empty() {
                    m
                } else {
                    format!("{m}*{w}")
                }
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// A matrix-valued function on matrix tuples: level-`n` evaluations are
/// `(rows·n) × (cols·n)`.
pub trait NcFunction: Send + Sync {
    /// Outer shape `(rows, cols)`.
    fn shape(&self) -> (usize, usize);
    fn eval(&self, x: &MatrixTuple) -> Result<CMat>;
}

impl NcFunction for FreePolynomial {
    fn shape(&self) -> (usize, usize) {
        FreePolynomial::shape(self)
    }

    fn eval(&self, x: &MatrixTuple) -> Result<CMat> {
        FreePolynomial::eval(self, x)
    }
}

impl<T: NcFunction + ?Sized> NcFunction for Arc<T> {
    fn shape(&self) -> (usize, usize) {
        (**self).shape()
    }

    fn eval(&self, x: &MatrixTuple) -> Result<CMat> {
        (**self).eval(x)
    }
}

/// Black-box evaluator wrapping a closure.
pub struct FnFunction<F> {
    rows: usize,
    cols: usize,
    f: F,
}

impl<F> FnFunction<F>
where
    F: Fn(&MatrixTuple) -> Result<CMat> + Send + Sync,
{
    pub fn new(rows: usize, cols: usize, f: F) -> Self {
        FnFunction { rows, cols, f }
    }
}

impl<F> NcFunction for FnFunction<F>
where
    F: Fn(&MatrixTuple) -> Result<CMat> + Send + Sync,
{
    fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn eval(&self, x: &MatrixTuple) -> Result<CMat> {
        let m = (self.f)(x)?;
        let n = x.level();
        if m.shape() != (self.rows * n, self.cols * n) {
            return Err(Error::Shape(format!(
                "evaluator returned {}x{}, expected {}x{}",
                m.nrows(),
                m.ncols(),
                self.rows * n,
                self.cols * n
            )));
        }
        Ok(m)
    }
}

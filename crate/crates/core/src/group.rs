//! The affine group `A(q) = { x ↦ tⁿx + b }` and finite products of copies.
//!
//! An [`AffineElem`] `(n, b)` sends the ball `(k, r)` to `(k + n, tⁿr + b)`
//! truncated below `k + n`. The shift `n` is the horocyclic map `φ`; the
//! kernel consists of the pure translations.

use std::fmt;
use std::str::FromStr;

use crate::digits::{Alphabet, Digits};
use crate::error::{ensure_same, Error, Result};
use crate::text;
use crate::tree::{parse_digits_or_prefixed, parse_pair, End, Stream, Vertex};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AffineElem {
    shift: i64,
    translation: Digits,
}

impl AffineElem {
    pub fn new(shift: i64, translation: Digits) -> Self {
        Self { shift, translation }
    }

    pub fn identity(alphabet: Alphabet) -> Self {
        Self::new(0, Digits::zero(alphabet))
    }

    pub fn pure_shift(alphabet: Alphabet, n: i64) -> Self {
        Self::new(n, Digits::zero(alphabet))
    }

    pub fn alphabet(&self) -> Alphabet {
        self.translation.alphabet()
    }

    pub fn shift(&self) -> i64 {
        self.shift
    }

    pub fn translation(&self) -> &Digits {
        &self.translation
    }

    pub fn is_identity(&self) -> bool {
        self.shift == 0 && self.translation.is_zero()
    }

    /// `self ∘ other`, i.e. apply `other` first.
    pub fn compose(&self, other: &AffineElem) -> Result<AffineElem> {
        let mut out = self.clone();
        out.compose_assign(other)?;
        Ok(out)
    }

    /// `self ← self ∘ other`, in place.
    pub fn compose_assign(&mut self, other: &AffineElem) -> Result<()> {
        self.translation.add_shifted_assign(&other.translation, self.shift)?;
        self.shift += other.shift;
        Ok(())
    }

    pub fn inverse(&self) -> AffineElem {
        AffineElem::new(-self.shift, self.translation.shift(-self.shift).negate())
    }

    pub fn power(&self, k: i64) -> AffineElem {
        let base = if k < 0 { self.inverse() } else { self.clone() };
        let mut out = AffineElem::identity(self.alphabet());
        for _ in 0..k.unsigned_abs() {
            out.compose_assign(&base).expect("same alphabet");
        }
        out
    }

    pub fn act_vertex(&self, v: &Vertex) -> Result<Vertex> {
        ensure_same(self.alphabet(), v.alphabet())?;
        let level = v.level() + self.shift;
        let mut x = v.residue().shift(self.shift);
        x.add_shifted_assign(&self.translation, 0)?;
        Ok(Vertex::containing(level, &x))
    }

    /// Image of the root, `(n, b)` truncated below `n`.
    pub fn act_root(&self) -> Vertex {
        Vertex::containing(self.shift, &self.translation)
    }

    pub fn act_end(&self, xi: &End) -> Result<End> {
        ensure_same(self.alphabet(), xi.alphabet())?;
        match xi {
            End::Omega(a) => Ok(End::Omega(*a)),
            End::Stream(s) => Ok(End::Stream(s.shift(self.shift).add(&self.translation)?)),
        }
    }

    /// `φ(g) = h(g·o)`.
    pub fn horocyclic(&self) -> i64 {
        self.shift
    }

    /// `|g|_T = d(o, g·o)`.
    pub fn gauge(&self) -> u64 {
        self.act_root().norm()
    }

    /// The end other than `ω` fixed by a hyperbolic element; `None` when
    /// `n = 0`.
    ///
    /// For `n > 0` the fixed point is `Σ_{j≥0} t^{jn} b`, which is periodic
    /// with period `n` from the top of `b` on. For `n < 0` use the inverse.
    pub fn fixed_end(&self) -> Option<End> {
        if self.shift < 0 {
            return self.inverse().fixed_end();
        }
        if self.shift == 0 {
            return None;
        }
        let alphabet = self.alphabet();
        let b = &self.translation;
        let (Some(lo), Some(top)) = (b.valuation(), b.top()) else {
            return Some(End::Stream(Stream::zero(alphabet)));
        };
        let n = self.shift;
        let digit = |i: i64| {
            let mut acc = 0;
            let mut l = i;
            while l >= lo {
                acc = alphabet.add_digit(acc, b.get(l));
                l -= n;
            }
            acc
        };
        let pre = Digits::from_pairs(alphabet, (lo..top).map(|i| (i, digit(i)))).expect("in range");
        let period = (top..top + n).map(digit).collect();
        Some(End::Stream(Stream::new(pre, top, period).expect("canonical by construction")))
    }
}

impl fmt::Display for AffineElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:({}; ", self.alphabet(), self.shift)?;
        crate::digits::write_body(f, &self.translation)?;
        f.write_str(")")
    }
}

impl FromStr for AffineElem {
    type Err = Error;

    /// `q:(n; {i:d,...})`; the translation may also carry its own `q:` prefix.
    fn from_str(s: &str) -> Result<Self> {
        let (alphabet, shift, body) = parse_pair(s)?;
        Ok(AffineElem::new(shift, parse_digits_or_prefixed(alphabet, body)?))
    }
}

/// Element of `P = ∏ A(q_i)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProductElem {
    factors: Vec<AffineElem>,
}

impl ProductElem {
    pub fn new(factors: Vec<AffineElem>) -> Self {
        Self { factors }
    }

    /// Checks the factors against a product configuration.
    pub fn with_alphabets(factors: Vec<AffineElem>, alphabets: &[Alphabet]) -> Result<Self> {
        let out = Self::new(factors);
        out.check(alphabets)?;
        Ok(out)
    }

    pub fn check(&self, alphabets: &[Alphabet]) -> Result<()> {
        if self.factors.len() != alphabets.len() {
            return Err(Error::FactorCount { expected: alphabets.len(), got: self.factors.len() });
        }
        for (g, &a) in self.factors.iter().zip(alphabets) {
            ensure_same(a, g.alphabet())?;
        }
        Ok(())
    }

    pub fn identity(alphabets: &[Alphabet]) -> Self {
        Self::new(alphabets.iter().map(|&a| AffineElem::identity(a)).collect())
    }

    pub fn alphabets(&self) -> Vec<Alphabet> {
        self.factors.iter().map(AffineElem::alphabet).collect()
    }

    pub fn factors(&self) -> &[AffineElem] {
        &self.factors
    }

    pub fn factor(&self, j: usize) -> &AffineElem {
        &self.factors[j]
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.factors.iter().all(AffineElem::is_identity)
    }

    pub fn compose(&self, other: &ProductElem) -> Result<ProductElem> {
        let mut out = self.clone();
        out.compose_assign(other)?;
        Ok(out)
    }

    pub fn compose_assign(&mut self, other: &ProductElem) -> Result<()> {
        if self.factors.len() != other.factors.len() {
            return Err(Error::FactorCount { expected: self.factors.len(), got: other.factors.len() });
        }
        for (g, h) in self.factors.iter_mut().zip(&other.factors) {
            g.compose_assign(h)?;
        }
        Ok(())
    }

    pub fn inverse(&self) -> ProductElem {
        Self::new(self.factors.iter().map(AffineElem::inverse).collect())
    }

    pub fn act(&self, vs: &[Vertex]) -> Result<Vec<Vertex>> {
        if vs.len() != self.factors.len() {
            return Err(Error::FactorCount { expected: self.factors.len(), got: vs.len() });
        }
        self.factors.iter().zip(vs).map(|(g, v)| g.act_vertex(v)).collect()
    }

    pub fn horocyclic(&self) -> Vec<i64> {
        self.factors.iter().map(AffineElem::horocyclic).collect()
    }

    /// `|g|_P = Σ_i d(o_i, g_i·o_i)`.
    pub fn gauge(&self) -> u64 {
        self.factors.iter().map(AffineElem::gauge).sum()
    }

    /// Writes `self` as a product of elements of gauge at most 1.
    ///
    /// With `σ_i` the unit shift in factor `i`, `g = σ^φ(g)·β` where `β` is a
    /// pure translation in every factor. Conjugating `β` by `Ω = ∏ σ_i^{e_i}`
    /// with `e_i = -h(o ⋏ β_i o)` moves its translation to non-negative
    /// indices, so `S = ΩβΩ⁻¹` fixes the root. The result is
    /// `σ^φ(g) · Ω⁻¹ · S · Ω`, spelled out one unit shift at a time.
    pub fn decompose_into_j(&self) -> Vec<ProductElem> {
        let alphabets = self.alphabets();
        let unit = |i: usize, sign: i64| {
            let mut f = ProductElem::identity(&alphabets);
            f.factors[i] = AffineElem::pure_shift(alphabets[i], sign);
            f
        };
        let mut out = Vec::new();
        let mut s_factors = Vec::with_capacity(self.len());
        let mut exps = Vec::with_capacity(self.len());
        for (i, g) in self.factors.iter().enumerate() {
            let n = g.shift;
            for _ in 0..n.unsigned_abs() {
                out.push(unit(i, n.signum()));
            }
            let c = g.translation.shift(-n);
            let e = -c.valuation().map_or(0, |v| v.min(0));
            exps.push(e);
            s_factors.push(AffineElem::new(0, c.shift(e)));
        }
        for (i, &e) in exps.iter().enumerate() {
            for _ in 0..e {
                out.push(unit(i, -1));
            }
        }
        let s = ProductElem::new(s_factors);
        if !s.is_identity() {
            out.push(s);
        }
        for (i, &e) in exps.iter().enumerate() {
            for _ in 0..e {
                out.push(unit(i, 1));
            }
        }
        out
    }
}

impl From<AffineElem> for ProductElem {
    fn from(g: AffineElem) -> Self {
        Self::new(vec![g])
    }
}

impl fmt::Display for ProductElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, g) in self.factors.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            g.fmt(f)?;
        }
        f.write_str("]")
    }
}

impl FromStr for ProductElem {
    type Err = Error;

    /// `[q1:(n1; {...}), q2:(n2; {...})]`; a bare affine element is read as
    /// a one-factor product.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if !s.starts_with('[') {
            return Ok(Self::new(vec![s.parse()?]));
        }
        let inner = text::strip_delims(s, '[', ']')?;
        let factors = text::split_top_level(inner, ',')
            .into_iter()
            .map(str::parse)
            .collect::<Result<Vec<AffineElem>>>()?;
        Ok(Self::new(factors))
    }
}

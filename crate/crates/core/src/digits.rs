//! Finitely supported two-sided digit sequences.
//!
//! A [`Digits`] value is a map from an index in `i64` to a nonzero digit of
//! an [`Alphabet`]. Missing indices are zero, so equality and hashing are
//! structural. Addition is digitwise in the alphabet (no carries), which makes
//! the set of all values over a fixed alphabet an abelian group on which
//! [`Digits::shift`] acts by automorphisms.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_same, Error, Result};
use crate::text;

/// Digit alphabet `(Z/base)^width`, packed into `u32` values in base `base`.
///
/// `width == 1` is the cyclic alphabet `Z/q`. Wider alphabets add
/// componentwise, so the coset trees of shifts by `m > 1` can be modelled
/// with the same machinery.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Alphabet {
    base: u32,
    width: u32,
}

impl Alphabet {
    pub fn cyclic(q: u32) -> Result<Self> {
        Self::power(q, 1)
    }

    pub fn power(base: u32, width: u32) -> Result<Self> {
        if base < 2 {
            return Err(Error::InvalidAlphabet(format!("base must be >= 2, got {base}")));
        }
        if width == 0 {
            return Err(Error::InvalidAlphabet("width must be >= 1".into()));
        }
        base.checked_pow(width)
            .ok_or_else(|| Error::InvalidAlphabet(format!("{base}^{width} overflows u32")))?;
        Ok(Self { base, width })
    }

    pub fn base(self) -> u32 {
        self.base
    }

    pub fn width(self) -> u32 {
        self.width
    }

    /// Number of digits, which is also the branching number of the tree.
    pub fn size(self) -> u32 {
        self.base.pow(self.width)
    }

    pub fn add_digit(self, a: u32, b: u32) -> u32 {
        if self.width == 1 {
            return ((a as u64 + b as u64) % self.base as u64) as u32;
        }
        let mut out = 0u32;
        let mut place = 1u32;
        let (mut a, mut b) = (a, b);
        for _ in 0..self.width {
            let d = (a % self.base + b % self.base) % self.base;
            out += d * place;
            a /= self.base;
            b /= self.base;
            place = place.wrapping_mul(self.base);
        }
        out
    }

    pub fn neg_digit(self, a: u32) -> u32 {
        if self.width == 1 {
            return (self.base - a % self.base) % self.base;
        }
        let mut out = 0u32;
        let mut place = 1u32;
        let mut a = a;
        for _ in 0..self.width {
            let d = (self.base - a % self.base) % self.base;
            out += d * place;
            a /= self.base;
            place = place.wrapping_mul(self.base);
        }
        out
    }

    pub(crate) fn check_digit(self, digit: u32) -> Result<()> {
        if digit < self.size() {
            Ok(())
        } else {
            Err(Error::DigitOutOfRange { digit, size: self.size() })
        }
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.width == 1 {
            write!(f, "{}", self.base)
        } else {
            write!(f, "{}^{}", self.base, self.width)
        }
    }
}

impl FromStr for Alphabet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let parse = |t: &str| {
            t.trim()
                .parse::<u32>()
                .map_err(|e| Error::Parse(format!("bad alphabet '{s}': {e}")))
        };
        match s.split_once('^') {
            Some((b, w)) => Alphabet::power(parse(b)?, parse(w)?),
            None => Alphabet::cyclic(parse(s)?),
        }
    }
}

/// Finitely supported digit sequence in canonical form (zeros elided).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digits {
    alphabet: Alphabet,
    entries: BTreeMap<i64, u32>,
}

impl Digits {
    pub fn zero(alphabet: Alphabet) -> Self {
        Self { alphabet, entries: BTreeMap::new() }
    }

    /// Builds a value from `(index, digit)` pairs. Zero digits are dropped;
    /// a repeated index is rejected.
    pub fn from_pairs<I>(alphabet: Alphabet, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (i64, u32)>,
    {
        let mut entries = BTreeMap::new();
        for (index, digit) in pairs {
            alphabet.check_digit(digit)?;
            if entries.contains_key(&index) {
                return Err(Error::Parse(format!("index {index} given twice")));
            }
            if digit != 0 {
                entries.insert(index, digit);
            }
        }
        Ok(Self { alphabet, entries })
    }

    /// Single digit `digit` at `index`.
    pub fn monomial(alphabet: Alphabet, index: i64, digit: u32) -> Result<Self> {
        Self::from_pairs(alphabet, [(index, digit)])
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn get(&self, index: i64) -> u32 {
        self.entries.get(&index).copied().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    /// Nonzero entries in ascending index order.
    pub fn iter(&self) -> impl DoubleEndedIterator<Item = (i64, u32)> + '_ {
        self.entries.iter().map(|(&i, &d)| (i, d))
    }

    /// Minimum stored index; `None` stands for `+∞` (the zero sequence).
    pub fn valuation(&self) -> Option<i64> {
        self.entries.keys().next().copied()
    }

    /// Maximum stored index, `None` for zero.
    pub fn top(&self) -> Option<i64> {
        self.entries.keys().next_back().copied()
    }

    pub fn add(&self, other: &Digits) -> Result<Digits> {
        let mut out = self.clone();
        out.add_shifted_assign(other, 0)?;
        Ok(out)
    }

    pub fn sub(&self, other: &Digits) -> Result<Digits> {
        self.add(&other.negate())
    }

    pub fn negate(&self) -> Digits {
        let alphabet = self.alphabet;
        Digits {
            alphabet,
            entries: self.entries.iter().map(|(&i, &d)| (i, alphabet.neg_digit(d))).collect(),
        }
    }

    pub fn shift(&self, n: i64) -> Digits {
        if n == 0 {
            return self.clone();
        }
        Digits {
            alphabet: self.alphabet,
            entries: self.entries.iter().map(|(&i, &d)| (shift_index(i, n), d)).collect(),
        }
    }

    /// Entries with index `< k`.
    pub fn truncate_below(&self, k: i64) -> Digits {
        Digits {
            alphabet: self.alphabet,
            entries: self.entries.range(..k).map(|(&i, &d)| (i, d)).collect(),
        }
    }

    /// Entries with index `>= k`.
    pub fn truncate_at_or_above(&self, k: i64) -> Digits {
        Digits {
            alphabet: self.alphabet,
            entries: self.entries.range(k..).map(|(&i, &d)| (i, d)).collect(),
        }
    }

    /// Smallest index at which the two sequences differ.
    pub fn first_difference(&self, other: &Digits) -> Option<i64> {
        let mut a = self.entries.iter().peekable();
        let mut b = other.entries.iter().peekable();
        loop {
            match (a.peek(), b.peek()) {
                (None, None) => return None,
                (Some((&i, _)), None) | (None, Some((&i, _))) => return Some(i),
                (Some((&i, &x)), Some((&j, &y))) => {
                    if i != j {
                        return Some(i.min(j));
                    }
                    if x != y {
                        return Some(i);
                    }
                    a.next();
                    b.next();
                }
            }
        }
    }

    /// Sets one digit, eliding zero.
    pub fn set(&mut self, index: i64, digit: u32) -> Result<()> {
        self.alphabet.check_digit(digit)?;
        if digit == 0 {
            self.entries.remove(&index);
        } else {
            self.entries.insert(index, digit);
        }
        Ok(())
    }

    /// `self += shift(other, n)`, in place. Returns nothing; the touched
    /// indices are exactly `other`'s support moved by `n`.
    pub fn add_shifted_assign(&mut self, other: &Digits, n: i64) -> Result<()> {
        ensure_same(self.alphabet, other.alphabet)?;
        let alphabet = self.alphabet;
        for (&i, &d) in &other.entries {
            let index = shift_index(i, n);
            let sum = alphabet.add_digit(self.get(index), d);
            if sum == 0 {
                self.entries.remove(&index);
            } else {
                self.entries.insert(index, sum);
            }
        }
        Ok(())
    }

    /// Digits on `[lo, hi)` as a dense word.
    pub fn window(&self, lo: i64, hi: i64) -> Vec<u32> {
        (lo..hi).map(|i| self.get(i)).collect()
    }
}

pub(crate) fn shift_index(i: i64, n: i64) -> i64 {
    i.checked_add(n).expect("digit index left the 64-bit range")
}

impl fmt::Display for Digits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.alphabet)?;
        write_body(f, self)
    }
}

/// Writes `{i:d,...}` without the alphabet prefix.
pub(crate) fn write_body(f: &mut fmt::Formatter<'_>, digits: &Digits) -> fmt::Result {
    f.write_str("{")?;
    for (n, (i, d)) in digits.iter().enumerate() {
        if n > 0 {
            f.write_str(",")?;
        }
        write!(f, "{i}:{d}")?;
    }
    f.write_str("}")
}

/// Parses `{i:d,...}` for a known alphabet.
pub(crate) fn parse_body(alphabet: Alphabet, s: &str) -> Result<Digits> {
    let inner = text::strip_delims(s.trim(), '{', '}')?;
    let mut pairs = Vec::new();
    for item in text::split_top_level(inner, ',') {
        let item = item.trim();
        if item.is_empty() {
            continue;
        }
        let (i, d) = item
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("expected index:digit, got '{item}'")))?;
        let i = text::parse_int::<i64>(i)?;
        let d = text::parse_int::<u32>(d)?;
        pairs.push((i, d));
    }
    Digits::from_pairs(alphabet, pairs)
}

impl FromStr for Digits {
    type Err = Error;

    /// `q:{i1:d1,...}`; `q^w:{...}` for wide alphabets.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let brace = s
            .find('{')
            .ok_or_else(|| Error::Parse(format!("missing '{{' in '{s}'")))?;
        let head = s[..brace].trim();
        let head = head
            .strip_suffix(':')
            .ok_or_else(|| Error::Parse(format!("expected 'q:' prefix in '{s}'")))?;
        parse_body(head.parse()?, &s[brace..])
    }
}

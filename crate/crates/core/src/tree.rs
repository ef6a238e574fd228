//! The homogeneous tree `T_{q+1}` as the tree of balls, and its ends.
//!
//! A vertex `(k, r)` is the ball `r + tᵏO` where `r` has support below `k`.
//! Levels grow away from the distinguished end `ω`, so the Busemann function
//! relative to the root `o = (0, {})` is just the level. Every vertex has one
//! parent (toward `ω`) and `q` children.
//!
//! Ends other than `ω` are digit streams. Only eventually periodic streams are
//! represented; they are closed under the affine action and contain every
//! fixed end of a hyperbolic element.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::digits::{parse_body, write_body, Alphabet, Digits};
use crate::error::{ensure_same, Error, Result};
use crate::text;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Vertex {
    level: i64,
    residue: Digits,
}

impl Vertex {
    pub fn new(level: i64, residue: Digits) -> Result<Self> {
        if residue.top().is_some_and(|t| t >= level) {
            return Err(Error::NonCanonicalResidue { level });
        }
        Ok(Self { level, residue })
    }

    /// Ball of level `level` containing `x`, i.e. `x` truncated below `level`.
    pub fn containing(level: i64, x: &Digits) -> Self {
        Self { level, residue: x.truncate_below(level) }
    }

    pub fn root(alphabet: Alphabet) -> Self {
        Self { level: 0, residue: Digits::zero(alphabet) }
    }

    pub fn alphabet(&self) -> Alphabet {
        self.residue.alphabet()
    }

    pub fn level(&self) -> i64 {
        self.level
    }

    pub fn residue(&self) -> &Digits {
        &self.residue
    }

    pub fn is_root(&self) -> bool {
        self.level == 0 && self.residue.is_zero()
    }

    /// Neighbour toward `ω`.
    pub fn parent(&self) -> Vertex {
        Vertex::containing(self.level - 1, &self.residue)
    }

    pub fn children(&self) -> Vec<Vertex> {
        let alphabet = self.alphabet();
        (0..alphabet.size())
            .map(|d| {
                let mut residue = self.residue.clone();
                residue.set(self.level, d).expect("digit in range");
                Vertex { level: self.level + 1, residue }
            })
            .collect()
    }

    /// All `q + 1` neighbours, parent first.
    pub fn neighbours(&self) -> Vec<Vertex> {
        let mut out = vec![self.parent()];
        out.extend(self.children());
        out
    }

    /// Level of the common ancestor of `self` and `other` toward `ω`.
    pub fn meet_level(&self, other: &Vertex) -> Result<i64> {
        ensure_same(self.alphabet(), other.alphabet())?;
        let mut m = self.level.min(other.level);
        if let Some(i) = self.residue.first_difference(&other.residue) {
            m = m.min(i);
        }
        Ok(m)
    }

    pub fn distance(&self, other: &Vertex) -> Result<u64> {
        let m = self.meet_level(other)?;
        Ok(((self.level - m) + (other.level - m)) as u64)
    }

    /// Distance to the root.
    pub fn norm(&self) -> u64 {
        let m = match self.residue.valuation() {
            Some(v) => v.min(0).min(self.level),
            None => self.level.min(0),
        };
        (self.level - 2 * m) as u64
    }

    /// Busemann function relative to `o` and `ω`.
    pub fn busemann(&self) -> i64 {
        self.level
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:({}; ", self.alphabet(), self.level)?;
        write_body(f, &self.residue)?;
        f.write_str(")")
    }
}

impl FromStr for Vertex {
    type Err = Error;

    /// `q:(k; {i:d,...})`
    fn from_str(s: &str) -> Result<Self> {
        let (alphabet, level, body) = parse_pair(s)?;
        Vertex::new(level, parse_digits_or_prefixed(alphabet, body)?)
    }
}

/// Splits `q:(a; b)` into the alphabet, the integer `a` and the text of `b`.
pub(crate) fn parse_pair(s: &str) -> Result<(Alphabet, i64, &str)> {
    let s = s.trim();
    let open = s
        .find('(')
        .ok_or_else(|| Error::Parse(format!("missing '(' in '{s}'")))?;
    let head = s[..open].trim();
    let head = head
        .strip_suffix(':')
        .ok_or_else(|| Error::Parse(format!("expected 'q:' prefix in '{s}'")))?;
    let alphabet: Alphabet = head.parse()?;
    let inner = text::strip_delims(&s[open..], '(', ')')?;
    let (a, b) = inner
        .split_once(';')
        .ok_or_else(|| Error::Parse(format!("expected ';' in '{s}'")))?;
    Ok((alphabet, text::parse_int(a)?, b))
}

/// Accepts `{...}` or `q:{...}`; the prefixed form must agree with `alphabet`.
pub(crate) fn parse_digits_or_prefixed(alphabet: Alphabet, s: &str) -> Result<Digits> {
    let s = s.trim();
    if s.starts_with('{') {
        parse_body(alphabet, s)
    } else {
        let d: Digits = s.parse()?;
        ensure_same(alphabet, d.alphabet())?;
        Ok(d)
    }
}

/// Eventually periodic digit stream, in normal form.
///
/// The digit at `i >= start` is `period[(i - start) mod ℓ]`; below `start`
/// it is `pre[i]`. The period is primitive and `start` is as small as it can
/// be, so equal streams have equal representations. A stream whose period is
/// zero starts right after the top of `pre` (at `0` when `pre` is empty).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Stream {
    pre: Digits,
    start: i64,
    period: Vec<u32>,
}

impl Stream {
    pub fn new(pre: Digits, start: i64, period: Vec<u32>) -> Result<Self> {
        if period.is_empty() {
            return Err(Error::Parse("empty period".into()));
        }
        for &d in &period {
            if d >= pre.alphabet().size() {
                return Err(Error::DigitOutOfRange { digit: d, size: pre.alphabet().size() });
            }
        }
        if pre.top().is_some_and(|t| t >= start) {
            return Err(Error::NonCanonicalResidue { level: start });
        }
        Ok(Self::normalized(pre, start, period))
    }

    /// The stream equal to `x` below `start` and to zero from there on.
    pub fn finite(x: &Digits) -> Self {
        Self::normalized(x.clone(), x.top().map_or(0, |t| t + 1), vec![0])
    }

    pub fn zero(alphabet: Alphabet) -> Self {
        Self::finite(&Digits::zero(alphabet))
    }

    fn normalized(mut pre: Digits, mut start: i64, mut period: Vec<u32>) -> Self {
        let len = period.len();
        let minimal = (1..=len)
            .find(|&p| len.is_multiple_of(p) && (p..len).all(|i| period[i] == period[i - p]))
            .unwrap_or(len);
        period.truncate(minimal);
        if period.iter().all(|&d| d == 0) {
            let start = pre.top().map_or(0, |t| t + 1);
            return Self { pre, start, period };
        }
        loop {
            let below = pre.get(start - 1);
            if below != *period.last().expect("non-empty") {
                break;
            }
            pre.set(start - 1, 0).expect("zero is a digit");
            start -= 1;
            period.rotate_right(1);
        }
        Self { pre, start, period }
    }

    pub fn alphabet(&self) -> Alphabet {
        self.pre.alphabet()
    }

    pub fn pre(&self) -> &Digits {
        &self.pre
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn period(&self) -> &[u32] {
        &self.period
    }

    pub fn digit_at(&self, i: i64) -> u32 {
        if i >= self.start {
            self.period[(i - self.start).rem_euclid(self.period.len() as i64) as usize]
        } else {
            self.pre.get(i)
        }
    }

    /// Digits below index `k`, as a finite sequence.
    pub fn truncate_below(&self, k: i64) -> Digits {
        let mut out = self.pre.truncate_below(k);
        for i in self.start..k {
            out.set(i, self.digit_at(i)).expect("digit in range");
        }
        out
    }

    /// Smallest index with a nonzero digit; `None` for the zero stream.
    pub fn valuation(&self) -> Option<i64> {
        if let Some(v) = self.pre.valuation() {
            return Some(v);
        }
        self.period
            .iter()
            .position(|&d| d != 0)
            .map(|p| self.start + p as i64)
    }

    pub fn shift(&self, n: i64) -> Stream {
        Self::normalized(self.pre.shift(n), self.start + n, self.period.clone())
    }

    /// Adds a finitely supported sequence digitwise.
    pub fn add(&self, b: &Digits) -> Result<Stream> {
        ensure_same(self.alphabet(), b.alphabet())?;
        let Some(top) = b.top() else {
            return Ok(self.clone());
        };
        let new_start = self.start.max(top + 1);
        let mut pre = self.truncate_below(new_start);
        pre.add_shifted_assign(b, 0)?;
        let mut period = self.period.clone();
        let rot = (new_start - self.start).rem_euclid(period.len() as i64) as usize;
        period.rotate_left(rot);
        Ok(Self::normalized(pre, new_start, period))
    }

    /// Smallest index at which the two streams differ.
    pub fn first_difference(&self, other: &Stream) -> Result<Option<i64>> {
        ensure_same(self.alphabet(), other.alphabet())?;
        let lo = [self.pre.valuation(), other.pre.valuation(), Some(self.start), Some(other.start)]
            .into_iter()
            .flatten()
            .min()
            .expect("non-empty");
        let hi = self.start.max(other.start) + lcm(self.period.len(), other.period.len()) as i64;
        Ok((lo..hi).find(|&i| self.digit_at(i) != other.digit_at(i)))
    }

    /// First index below `k` where this stream and `x` disagree.
    pub fn first_difference_below(&self, x: &Digits, k: i64) -> Option<i64> {
        let lo = [self.pre.valuation(), Some(self.start), x.valuation()]
            .into_iter()
            .flatten()
            .min()
            .expect("non-empty");
        (lo..k).find(|&i| self.digit_at(i) != x.get(i))
    }
}

fn lcm(a: usize, b: usize) -> usize {
    let (mut x, mut y) = (a, b);
    while y != 0 {
        (x, y) = (y, x % y);
    }
    a / x * b
}

/// A point of `∂T`: the distinguished end or a digit stream.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum End {
    Omega(Alphabet),
    Stream(Stream),
}

impl End {
    pub fn alphabet(&self) -> Alphabet {
        match self {
            End::Omega(a) => *a,
            End::Stream(s) => s.alphabet(),
        }
    }

    pub fn is_omega(&self) -> bool {
        matches!(self, End::Omega(_))
    }

    /// Vertex at level `k` on the line from `ω` to this end (streams only).
    pub fn vertex_at_level(&self, k: i64) -> Option<Vertex> {
        match self {
            End::Omega(_) => None,
            End::Stream(s) => Some(Vertex { level: k, residue: s.truncate_below(k) }),
        }
    }
}

impl fmt::Display for End {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            End::Omega(a) => write!(f, "{a}:omega"),
            End::Stream(s) => {
                write!(f, "{}:stream(pre=", s.alphabet())?;
                write_body(f, &s.pre)?;
                write!(f, ", p={}, period=[", s.start)?;
                for (i, d) in s.period.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{d}")?;
                }
                f.write_str("])")
            }
        }
    }
}

impl FromStr for End {
    type Err = Error;

    /// `q:omega` or `q:stream(pre={...}, p=<int>, period=[d0,...])`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("expected 'q:' prefix in '{s}'")))?;
        let alphabet: Alphabet = head.parse()?;
        let rest = rest.trim();
        if rest == "omega" {
            return Ok(End::Omega(alphabet));
        }
        let inner = rest
            .strip_prefix("stream")
            .ok_or_else(|| Error::Parse(format!("expected 'omega' or 'stream(...)' in '{s}'")))?;
        let inner = text::strip_delims(inner, '(', ')')?;
        let (mut pre, mut start, mut period) = (None, None, None);
        for field in text::split_top_level(inner, ',') {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got '{field}'")))?;
            match key.trim() {
                "pre" => pre = Some(parse_digits_or_prefixed(alphabet, value)?),
                "p" => start = Some(text::parse_int::<i64>(value)?),
                "period" => {
                    let body = text::strip_delims(value, '[', ']')?;
                    period = Some(
                        body.split(',')
                            .filter(|t| !t.trim().is_empty())
                            .map(text::parse_int::<u32>)
                            .collect::<Result<Vec<_>>>()?,
                    );
                }
                other => return Err(Error::Parse(format!("unknown stream field '{other}'"))),
            }
        }
        let missing = |name: &str| Error::Parse(format!("stream is missing '{name}'"));
        Ok(End::Stream(Stream::new(
            pre.ok_or_else(|| missing("pre"))?,
            start.ok_or_else(|| missing("p"))?,
            period.ok_or_else(|| missing("period"))?,
        )?))
    }
}

/// A point of `T ∪ ∂T`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Point {
    Vertex(Vertex),
    End(End),
}

impl Point {
    pub fn alphabet(&self) -> Alphabet {
        match self {
            Point::Vertex(v) => v.alphabet(),
            Point::End(e) => e.alphabet(),
        }
    }

    /// The geodesic from `o` to this point, as a lazy sequence of vertices.
    /// It climbs toward `ω` to the meeting level and then descends.
    pub fn root_geodesic(&self) -> RootGeodesic<'_> {
        let top = match self {
            Point::Vertex(v) => {
                let m = v.level.min(0);
                Some(v.residue.valuation().map_or(m, |x| x.min(m)))
            }
            Point::End(End::Omega(_)) => None,
            Point::End(End::Stream(s)) => Some(s.valuation().map_or(0, |x| x.min(0))),
        };
        RootGeodesic { target: self, turn: top, next_level: 0, climbing: true, done: false }
    }
}

impl From<Vertex> for Point {
    fn from(v: Vertex) -> Self {
        Point::Vertex(v)
    }
}

impl From<End> for Point {
    fn from(e: End) -> Self {
        Point::End(e)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Point::Vertex(v) => v.fmt(f),
            Point::End(e) => e.fmt(f),
        }
    }
}

/// Iterator over the vertices of the geodesic from `o` to a point.
pub struct RootGeodesic<'a> {
    target: &'a Point,
    turn: Option<i64>,
    next_level: i64,
    climbing: bool,
    done: bool,
}

impl Iterator for RootGeodesic<'_> {
    type Item = Vertex;

    fn next(&mut self) -> Option<Vertex> {
        if self.done {
            return None;
        }
        let alphabet = self.target.alphabet();
        if self.climbing {
            let v = Vertex { level: self.next_level, residue: Digits::zero(alphabet) };
            match self.turn {
                Some(t) if self.next_level == t => {
                    self.climbing = false;
                    self.next_level += 1;
                    if let Point::Vertex(target) = self.target {
                        if target.level == t {
                            self.done = true;
                        }
                    }
                }
                _ => self.next_level -= 1,
            }
            return Some(v);
        }
        let level = self.next_level;
        self.next_level += 1;
        match self.target {
            Point::Vertex(target) => {
                if level == target.level {
                    self.done = true;
                }
                Some(Vertex::containing(level, &target.residue))
            }
            Point::End(end) => end.vertex_at_level(level),
        }
    }
}

/// Last common element of the geodesics from `o` to `x` and to `y`. Equal
/// ends are their own confluent.
pub fn confluent_from_root(x: &Point, y: &Point) -> Result<Point> {
    ensure_same(x.alphabet(), y.alphabet())?;
    if x == y {
        return Ok(x.clone());
    }
    let mut a = x.root_geodesic();
    let mut b = y.root_geodesic();
    let mut last = None;
    loop {
        match (a.next(), b.next()) {
            (Some(u), Some(v)) if u == v => last = Some(u),
            _ => break,
        }
    }
    Ok(Point::Vertex(last.expect("both geodesics start at o")))
}

/// `q^{-m}` or `0`; the value of the visual ultrametric.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Theta {
    Zero,
    /// `q^{-m}`
    Power(u64),
}

impl Theta {
    pub fn to_f64(self, q: u32) -> f64 {
        match self {
            Theta::Zero => 0.0,
            Theta::Power(m) => (q as f64).powf(-(m as f64)),
        }
    }
}

impl Ord for Theta {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Theta::Zero, Theta::Zero) => Ordering::Equal,
            (Theta::Zero, _) => Ordering::Less,
            (_, Theta::Zero) => Ordering::Greater,
            (Theta::Power(a), Theta::Power(b)) => b.cmp(a),
        }
    }
}

impl PartialOrd for Theta {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn theta(x: &Point, y: &Point) -> Result<Theta> {
    if x == y {
        return Ok(Theta::Zero);
    }
    match confluent_from_root(x, y)? {
        Point::Vertex(c) => Ok(Theta::Power(c.norm())),
        Point::End(_) => unreachable!("distinct points meet at a vertex"),
    }
}

/// The `n`-th vertex on the geodesic ray from `from` to `xi`.
pub fn ray_vertex(xi: &End, n: u64, from: &Vertex) -> Result<Vertex> {
    ensure_same(xi.alphabet(), from.alphabet())?;
    let n = n as i64;
    match xi {
        End::Omega(_) => Ok(Vertex::containing(from.level - n, &from.residue)),
        End::Stream(s) => {
            let turn = s
                .first_difference_below(&from.residue, from.level)
                .map_or(from.level, |i| i.min(from.level));
            let up = from.level - turn;
            if n <= up {
                Ok(Vertex::containing(from.level - n, &from.residue))
            } else {
                let level = turn + (n - up);
                Ok(Vertex { level, residue: s.truncate_below(level) })
            }
        }
    }
}

/// A point of `B = ∏ ∂T_i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BoundaryPoint(pub Vec<End>);

impl BoundaryPoint {
    pub fn new(ends: Vec<End>, alphabets: &[Alphabet]) -> Result<Self> {
        if ends.len() != alphabets.len() {
            return Err(Error::FactorCount { expected: alphabets.len(), got: ends.len() });
        }
        for (e, &a) in ends.iter().zip(alphabets) {
            ensure_same(a, e.alphabet())?;
        }
        Ok(Self(ends))
    }

    pub fn factors(&self) -> &[End] {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{HashMap, HashSet, VecDeque};

    fn q(n: u32) -> Alphabet {
        Alphabet::cyclic(n).unwrap()
    }

    fn d(a: u32, pairs: &[(i64, u32)]) -> Digits {
        Digits::from_pairs(q(a), pairs.iter().copied()).unwrap()
    }

    fn v(a: u32, k: i64, pairs: &[(i64, u32)]) -> Vertex {
        Vertex::new(k, d(a, pairs)).unwrap()
    }

    fn zero_end(a: u32) -> End {
        End::Stream(Stream::zero(q(a)))
    }

    /// Explicit ball of the given radius around `o`, with its edges.
    fn ball(a: u32, radius: u64) -> (Vec<Vertex>, HashMap<Vertex, Vec<Vertex>>) {
        let o = Vertex::root(q(a));
        let mut seen = HashSet::from([o.clone()]);
        let mut order = vec![o.clone()];
        let mut frontier = VecDeque::from([(o, 0)]);
        let mut adj: HashMap<Vertex, Vec<Vertex>> = HashMap::new();
        while let Some((x, r)) = frontier.pop_front() {
            for y in x.neighbours() {
                if r < radius {
                    adj.entry(x.clone()).or_default().push(y.clone());
                    if seen.insert(y.clone()) {
                        order.push(y.clone());
                        frontier.push_back((y, r + 1));
                    }
                }
            }
        }
        (order, adj)
    }

    fn bfs_distance(adj: &HashMap<Vertex, Vec<Vertex>>, from: &Vertex, to: &Vertex) -> u64 {
        let mut dist = HashMap::from([(from.clone(), 0u64)]);
        let mut queue = VecDeque::from([from.clone()]);
        while let Some(x) = queue.pop_front() {
            if &x == to {
                return dist[&x];
            }
            for y in adj.get(&x).into_iter().flatten() {
                if !dist.contains_key(y) {
                    dist.insert(y.clone(), dist[&x] + 1);
                    queue.push_back(y.clone());
                }
            }
            // edges are stored from the inner side; look the other way too
            for (z, ns) in adj {
                if ns.contains(&x) && !dist.contains_key(z) {
                    dist.insert(z.clone(), dist[&x] + 1);
                    queue.push_back(z.clone());
                }
            }
        }
        panic!("{to} unreachable from {from}");
    }

    #[test]
    fn parent_examples() {
        let o = Vertex::root(q(2));
        assert_eq!(o.parent(), v(2, -1, &[]));
        assert_eq!(v(2, 2, &[(0, 1)]).parent(), v(2, 1, &[(0, 1)]));
        assert_eq!(v(2, 1, &[(0, 1)]).parent(), o);
    }

    #[test]
    fn children_examples() {
        let o = Vertex::root(q(2));
        assert_eq!(o.children(), vec![v(2, 1, &[]), v(2, 1, &[(0, 1)])]);
        let x = v(3, -2, &[(-5, 2)]);
        assert_eq!(x.children().len(), 3);
        for c in x.children() {
            assert_eq!(c.parent(), x);
        }
        assert!(o.parent().children().contains(&o));
    }

    #[test]
    fn distance_examples() {
        let o = Vertex::root(q(2));
        let x = v(2, 2, &[(0, 1), (1, 1)]);
        assert_eq!(x.distance(&x).unwrap(), 0);
        assert_eq!(o.distance(&x).unwrap(), 2);
        let (_, adj) = ball(2, 3);
        let a = v(2, 1, &[]);
        let b = v(2, 1, &[(0, 1)]);
        assert_eq!(bfs_distance(&adj, &a, &b), 2);
        assert_eq!(a.distance(&b).unwrap(), 2);
        assert!(o.distance(&Vertex::root(q(3))).is_err());
    }

    #[test]
    fn busemann_examples() {
        let o = Vertex::root(q(2));
        assert_eq!(o.busemann(), 0);
        assert_eq!(o.parent().busemann(), -1);
        assert_eq!(v(2, 3, &[(0, 1)]).busemann(), 3);
    }

    #[test]
    fn ball_is_a_regular_tree_with_consistent_metric() {
        for a in [2, 3] {
            let radius = 4;
            let (verts, adj) = ball(a, radius);
            let o = Vertex::root(q(a));
            // connected by construction; acyclic iff |E| = |V| - 1
            let edges: HashSet<(Vertex, Vertex)> = adj
                .iter()
                .flat_map(|(x, ns)| {
                    ns.iter().map(move |y| if x < y { (x.clone(), y.clone()) } else { (y.clone(), x.clone()) })
                })
                .collect();
            assert_eq!(edges.len(), verts.len() - 1);
            let expected = 1 + (a as usize + 1) * (a.pow(radius as u32) as usize - 1) / (a as usize - 1);
            assert_eq!(verts.len(), expected);
            for x in &verts {
                if x.distance(&o).unwrap() < radius {
                    let mut deg: HashSet<Vertex> = adj[x].iter().cloned().collect();
                    for (z, ns) in &adj {
                        if ns.contains(x) {
                            deg.insert(z.clone());
                        }
                    }
                    assert_eq!(deg.len(), a as usize + 1, "degree at {x}");
                }
                assert_eq!(x.distance(&o).unwrap(), x.norm());
                assert!(x.norm() >= x.busemann().unsigned_abs());
                // definitional Busemann value via the confluent toward ω
                let c = (0..)
                    .map(|i| Vertex::containing(x.level() - i, x.residue()))
                    .find(|w| w.level() <= 0 && w.residue().is_zero())
                    .unwrap();
                let h = x.distance(&c).unwrap() as i64 - o.distance(&c).unwrap() as i64;
                assert_eq!(h, x.busemann());
            }
        }
    }

    #[test]
    fn bfs_matches_formula_on_small_ball() {
        let (verts, adj) = ball(2, 3);
        for x in verts.iter().step_by(2) {
            for y in verts.iter().step_by(3) {
                assert_eq!(bfs_distance(&adj, x, y), x.distance(y).unwrap());
            }
        }
    }

    #[test]
    fn stream_normalization() {
        let a = q(2);
        // 0101... from 0 written with a doubled period and an extra prefix digit
        let s1 = Stream::new(d(2, &[(-1, 1)]), 0, vec![0, 1, 0, 1]).unwrap();
        let s2 = Stream::new(Digits::zero(a), -1, vec![1, 0]).unwrap();
        assert_eq!(s1, s2);
        // the zero at -2 continues the period backwards
        assert_eq!(s2.start(), -2);
        assert_eq!(s2.period(), &[0, 1]);
        let z = Stream::new(d(2, &[(3, 1)]), 10, vec![0, 0]).unwrap();
        assert_eq!(z.start(), 4);
        assert_eq!(z, Stream::finite(&d(2, &[(3, 1)])));
        for i in -5..20 {
            assert_eq!(s1.digit_at(i), s2.digit_at(i));
        }
    }

    #[test]
    fn stream_add_and_shift() {
        let a = q(3);
        let s = Stream::new(d(3, &[(-2, 1)]), 0, vec![1, 2]).unwrap();
        let b = d(3, &[(-2, 2), (5, 1)]);
        let t = s.add(&b).unwrap();
        for i in -10..30 {
            assert_eq!(t.digit_at(i), a.add_digit(s.digit_at(i), b.get(i)));
        }
        let u = s.shift(-7);
        for i in -10..30 {
            assert_eq!(u.digit_at(i), s.digit_at(i + 7));
        }
        assert_eq!(t.add(&b.negate()).unwrap(), s);
    }

    #[test]
    fn end_text_round_trip() {
        let e = End::Stream(Stream::new(d(2, &[(-3, 1)]), 0, vec![1, 0, 0]).unwrap());
        let text = e.to_string();
        assert_eq!(text.parse::<End>().unwrap(), e);
        assert_eq!("2:omega".parse::<End>().unwrap(), End::Omega(q(2)));
        assert_eq!(
            "3:stream(pre={}, p=0, period=[0])".parse::<End>().unwrap(),
            zero_end(3)
        );
        let x = v(3, 2, &[(-1, 2), (1, 1)]);
        assert_eq!(x.to_string(), "3:(2; {-1:2,1:1})");
        assert_eq!(x.to_string().parse::<Vertex>().unwrap(), x);
        assert!("2:(0; {0:1})".parse::<Vertex>().is_err());
    }

    #[test]
    fn confluent_examples() {
        let xi: Point = zero_end(2).into();
        assert_eq!(confluent_from_root(&xi, &xi).unwrap(), xi);
        let a: Point = v(2, 2, &[(0, 1)]).into();
        let b: Point = v(2, 2, &[(0, 1), (1, 1)]).into();
        assert_eq!(confluent_from_root(&a, &b).unwrap(), Point::Vertex(v(2, 1, &[(0, 1)])));
        let omega: Point = End::Omega(q(2)).into();
        let below: Point = v(2, 1, &[(-2, 1)]).into();
        // o -> v climbs to level -2 first
        assert_eq!(confluent_from_root(&omega, &below).unwrap(), Point::Vertex(v(2, -2, &[])));
        let below_o: Point = v(2, 3, &[(1, 1)]).into();
        assert_eq!(confluent_from_root(&omega, &below_o).unwrap(), Point::Vertex(Vertex::root(q(2))));
    }

    #[test]
    fn theta_examples() {
        let x: Point = v(2, 1, &[]).into();
        assert_eq!(theta(&x, &x).unwrap(), Theta::Zero);
        let omega: Point = End::Omega(q(2)).into();
        let zero: Point = zero_end(2).into();
        assert_eq!(theta(&omega, &zero).unwrap(), Theta::Power(0));
        assert_eq!(Theta::Power(0).to_f64(2), 1.0);
        assert!(Theta::Power(3) < Theta::Power(1));
        assert!(Theta::Zero < Theta::Power(100));
    }

    #[test]
    fn ray_vertex_examples() {
        let o = Vertex::root(q(2));
        let xi = End::Stream(Stream::new(d(2, &[(0, 1)]), 1, vec![1]).unwrap());
        assert_eq!(ray_vertex(&xi, 0, &o).unwrap(), o);
        assert_eq!(ray_vertex(&End::Omega(q(2)), 5, &o).unwrap(), v(2, -5, &[]));
        assert_eq!(ray_vertex(&zero_end(2), 3, &o).unwrap(), v(2, 3, &[]));
        let from = v(2, 2, &[(1, 1)]);
        // ξ = 111... differs from the residue at index 0, so climb to level 0
        let path: Vec<Vertex> = (0..6).map(|n| ray_vertex(&xi, n, &from).unwrap()).collect();
        assert_eq!(path[2], o);
        assert_eq!(path[3], v(2, 1, &[(0, 1)]));
        for w in path.windows(2) {
            assert_eq!(w[0].distance(&w[1]).unwrap(), 1);
        }
    }
}

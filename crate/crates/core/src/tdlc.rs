//! The coset tree of `V⋊⟨α⟩` for the digit-group model.
//!
//! `G` is the additive group of finitely supported digits over `Z/q`, `α` is
//! the index shift by `+m` and `V` is the subgroup of digits supported on
//! `[0, ∞)`. Then `α(V) ⊂ V`, so `V_− = V`, `V_+` is trivial, `s(α) = 1` and
//! `s(α⁻¹) = q^m`. Everything is computed on `V` modulo the digits at indices
//! `≥ D`.
//!
//! Grouping `m` consecutive digits into one digit of `(Z/q)^m` identifies
//! the coset tree with the tree of the affine group over that alphabet. That
//! identification is [`pi_map`] on elements and [`coset_to_vertex`] on
//! vertices.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::boundary::{triviality_check, TrivialityReport};
use crate::digits::{Alphabet, Digits};
use crate::error::{ensure_same, Error, Result};
use crate::group::{AffineElem, ProductElem};
use crate::scale::{classify_factor, SubgroupSpec};
use crate::tree::Vertex;
use crate::walk::{rate_of_escape, Measure, WalkParams, WalkReport};

/// Largest number of elements any enumeration here will materialize.
pub const MAX_ENUMERATION: u64 = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlphaModel {
    q: u32,
    m: u32,
    depth: u32,
}

impl AlphaModel {
    /// `depth` defaults to `6m` and must be a positive multiple of `m`.
    pub fn new(q: u32, m: u32, depth: Option<u32>) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("m must be at least 1".into()));
        }
        let depth = depth.unwrap_or(6 * m);
        if depth == 0 || !depth.is_multiple_of(m) {
            return Err(Error::InvalidParameter(format!("depth {depth} is not a positive multiple of m = {m}")));
        }
        Alphabet::power(q, m)?;
        Ok(Self { q, m, depth })
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn alphabet(&self) -> Alphabet {
        Alphabet::cyclic(self.q).expect("checked in new")
    }

    /// `(Z/q)^m`, the alphabet of the tree the coset tree is identified with.
    pub fn packed_alphabet(&self) -> Alphabet {
        Alphabet::power(self.q, self.m).expect("checked in new")
    }

    /// `α^k(x)`.
    pub fn alpha(&self, x: &Digits, k: i64) -> Digits {
        x.shift(k * self.m as i64)
    }

    /// All digits supported on `[lo, hi)`.
    fn enumerate(&self, lo: i64, hi: i64) -> Result<Vec<Digits>> {
        let width = (hi - lo).max(0) as u32;
        let q = self.q as u64;
        let count = q.checked_pow(width).filter(|&c| c <= MAX_ENUMERATION).ok_or(Error::Overflow("coset enumeration"))?;
        let alphabet = self.alphabet();
        let mut out = Vec::with_capacity(count as usize);
        for code in 0..count {
            let mut x = Digits::zero(alphabet);
            let mut c = code;
            for i in lo..hi {
                x.set(i, (c % q) as u32)?;
                c /= q;
            }
            out.push(x);
        }
        Ok(out)
    }
}

fn supported_in(x: &Digits, lo: i64, hi: i64) -> bool {
    x.valuation().is_none_or(|v| v >= lo) && x.top().is_none_or(|t| t < hi)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TidyReport {
    pub q: u32,
    pub m: u32,
    pub depth: u32,
    pub v_size: u64,
    pub v_plus_size: u64,
    pub v_minus_size: u64,
    pub v_plus_trivial: bool,
    pub v_minus_is_v: bool,
    /// `V == V_+V_−`.
    pub tidy_above: bool,
    /// `α^{-1}(V_−) ⊇ V_−`, so `V_{−−}` is an increasing union.
    pub minus_chain_nested: bool,
    /// `[α(V) : V ∩ α(V)]`.
    pub index_alpha: u64,
    /// `[α⁻¹(V) : V ∩ α⁻¹(V)]`.
    pub index_alpha_inv: u64,
    /// `[α(V_+) : V_+]`.
    pub scale_alpha: u64,
    /// `[α⁻¹(V_−) : V_−]`.
    pub scale_alpha_inv: u64,
}

/// `[β(V) : V ∩ β(V)]` for `β = α^k`, on `V` mod indices `≥ D`.
fn index_of_image(model: &AlphaModel, v: &[Digits], k: i64) -> u64 {
    let d = model.depth as i64;
    let image: HashSet<Digits> = v.iter().map(|x| model.alpha(x, k).truncate_below(d)).collect();
    let inside = image.iter().filter(|x| supported_in(x, 0, d)).count() as u64;
    image.len() as u64 / inside
}

/// Computes `V_±`, the tidiness conditions and the scales of `α^{±1}` by
/// enumerating `V` modulo the digits at indices `≥ D`.
pub fn tidy_subgroups(model: &AlphaModel) -> Result<TidyReport> {
    let d = model.depth as i64;
    let k_max = (model.depth / model.m) as i64;
    let v = model.enumerate(0, d)?;
    // x ∈ α^k(V) iff α^{-k}(x) has no digits below 0
    let in_alpha_power = |x: &Digits, k: i64| model.alpha(x, -k).valuation().is_none_or(|v| v >= 0);
    let v_plus: Vec<&Digits> = v.iter().filter(|x| (0..=k_max).all(|k| in_alpha_power(x, k))).collect();
    let v_minus: Vec<&Digits> = v.iter().filter(|x| (0..=k_max).all(|k| in_alpha_power(x, -k))).collect();
    let products: HashSet<Digits> = v_plus
        .iter()
        .flat_map(|a| v_minus.iter().map(move |b| a.add(b).expect("same alphabet")))
        .collect();
    let v_set: HashSet<&Digits> = v.iter().collect();
    let tidy_above = products.len() == v_set.len() && products.iter().all(|x| v_set.contains(x));
    let minus_chain_nested = v_minus.iter().all(|x| in_alpha_power(x, -1));
    let minus: Vec<Digits> = v_minus.iter().map(|x| (*x).clone()).collect();
    let plus: Vec<Digits> = v_plus.iter().map(|x| (*x).clone()).collect();
    let plus_set: HashSet<&Digits> = plus.iter().collect();
    let scale_alpha = {
        // [α(V_+) : V_+] with V_+ finite here
        let image: HashSet<Digits> = plus.iter().map(|x| model.alpha(x, 1).truncate_below(d)).collect();
        (image.len() as u64).max(1) / plus_set.len().max(1) as u64
    };
    Ok(TidyReport {
        q: model.q,
        m: model.m,
        depth: model.depth,
        v_size: v.len() as u64,
        v_plus_size: plus.len() as u64,
        v_minus_size: minus.len() as u64,
        v_plus_trivial: plus.len() == 1,
        v_minus_is_v: minus.len() == v.len(),
        tidy_above,
        minus_chain_nested,
        index_alpha: index_of_image(model, &v, 1),
        index_alpha_inv: index_of_image(model, &v, -1),
        scale_alpha,
        scale_alpha_inv: index_of_image(model, &minus, -1),
    })
}

/// The coset `rep · α^j(V_−)`, with `rep` reduced to the digits below `jm`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CosetVertex {
    rep: Digits,
    j: i64,
}

impl CosetVertex {
    pub fn new(model: &AlphaModel, rep: &Digits, j: i64) -> Result<Self> {
        ensure_same(rep.alphabet(), model.alphabet())?;
        Ok(Self { rep: rep.truncate_below(j * model.m as i64), j })
    }

    pub fn rep(&self) -> &Digits {
        &self.rep
    }

    pub fn level(&self) -> i64 {
        self.j
    }

    /// The coset at level `j − 1` containing this one.
    pub fn parent(&self, model: &AlphaModel) -> CosetVertex {
        CosetVertex { rep: self.rep.truncate_below((self.j - 1) * model.m as i64), j: self.j - 1 }
    }
}

impl fmt::Display for CosetVertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}; {})", self.j, self.rep)
    }
}

/// `(v, α^j)` in `V_{−−}⋊⟨α⟩`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct VmmElem {
    pub v: Digits,
    pub j: i64,
}

impl VmmElem {
    pub fn identity(model: &AlphaModel) -> Self {
        Self { v: Digits::zero(model.alphabet()), j: 0 }
    }

    pub fn alpha_power(model: &AlphaModel, j: i64) -> Self {
        Self { v: Digits::zero(model.alphabet()), j }
    }

    /// `(v₁, j₁)(v₂, j₂) = (v₁ + α^{j₁}(v₂), j₁ + j₂)`.
    pub fn compose(&self, other: &VmmElem, model: &AlphaModel) -> Result<VmmElem> {
        let mut v = self.v.clone();
        v.add_shifted_assign(&other.v, self.j * model.m as i64)?;
        Ok(VmmElem { v, j: self.j + other.j })
    }

    pub fn inverse(&self, model: &AlphaModel) -> VmmElem {
        VmmElem { v: model.alpha(&self.v, -self.j).negate(), j: -self.j }
    }

    /// Left multiplication on cosets of `V_−`.
    pub fn act(&self, c: &CosetVertex, model: &AlphaModel) -> Result<CosetVertex> {
        let mut rep = self.v.clone();
        rep.add_shifted_assign(&c.rep, self.j * model.m as i64)?;
        CosetVertex::new(model, &rep, c.j + self.j)
    }
}

/// Groups `m` digits into one digit of `(Z/q)^m`: index `i` goes to
/// `⌊i/m⌋`, component `i mod m`.
pub fn pack(model: &AlphaModel, x: &Digits) -> Digits {
    let m = model.m as i64;
    let mut out: BTreeMap<i64, u32> = BTreeMap::new();
    for (i, d) in x.iter() {
        *out.entry(i.div_euclid(m)).or_default() += d * model.q.pow(i.rem_euclid(m) as u32);
    }
    Digits::from_pairs(model.packed_alphabet(), out).expect("packed digits are in range")
}

pub fn unpack(model: &AlphaModel, x: &Digits) -> Digits {
    let m = model.m as i64;
    let mut out = Vec::new();
    for (i, d) in x.iter() {
        let mut d = d;
        for c in 0..m {
            out.push((i * m + c, d % model.q));
            d /= model.q;
        }
    }
    Digits::from_pairs(model.alphabet(), out.into_iter().filter(|&(_, d)| d != 0)).expect("unpacked digits are in range")
}

pub fn pi_map(g: &VmmElem, model: &AlphaModel) -> AffineElem {
    AffineElem::new(g.j, pack(model, &g.v))
}

/// `η(v, j) = j`.
pub fn eta(g: &VmmElem) -> i64 {
    g.j
}

pub fn coset_to_vertex(c: &CosetVertex, model: &AlphaModel) -> Vertex {
    Vertex::new(c.j, pack(model, &c.rep)).expect("reduced representative")
}

/// Level of the largest common ancestor of two cosets.
fn meet_level(a: &CosetVertex, b: &CosetVertex, model: &AlphaModel) -> i64 {
    let m = model.m as i64;
    let diff = a.rep.sub(&b.rep).expect("same alphabet");
    let top = a.j.min(b.j);
    match diff.valuation() {
        Some(v) => top.min(v.div_euclid(m)),
        None => top,
    }
}

/// Graph distance in the coset tree.
pub fn coset_distance(a: &CosetVertex, b: &CosetVertex, model: &AlphaModel) -> u64 {
    let l = meet_level(a, b, model);
    ((a.j - l) + (b.j - l)) as u64
}

/// `d(V_−, g·V_−)` in the coset tree.
pub fn vmma_gauge(g: &VmmElem, model: &AlphaModel) -> u64 {
    let base = CosetVertex { rep: Digits::zero(model.alphabet()), j: 0 };
    let image = CosetVertex::new(model, &g.v, g.j).expect("same alphabet");
    coset_distance(&base, &image, model)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CosetTree {
    pub model: AlphaModel,
    pub j_min: i64,
    pub j_max: i64,
    pub vertices: Vec<CosetVertex>,
    /// `(parent, child)` indices into `vertices`.
    pub edges: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeReport {
    pub q: u32,
    pub m: u32,
    pub j_min: i64,
    pub j_max: i64,
    pub vertex_count: u64,
    pub edge_count: u64,
    pub expected_out_degree: u64,
    /// Out-degree to count, over vertices below level `j_max`.
    pub out_degrees: BTreeMap<u64, u64>,
    /// In-degree to count, over vertices above level `j_min`.
    pub in_degrees: BTreeMap<u64, u64>,
    pub root_in_degree: u64,
    pub degrees_regular: bool,
    pub is_tree: bool,
}

/// Materializes the root coset `α^{j_min}(V_−)` and its descendants down to
/// level `j_max`. Edges join cosets on consecutive levels that are nested.
pub fn build_coset_tree(model: &AlphaModel, j_min: i64, j_max: i64) -> Result<CosetTree> {
    if j_max < j_min {
        return Err(Error::InvalidParameter(format!("empty window [{j_min}, {j_max}]")));
    }
    let span = j_max - j_min;
    let limit = (model.depth / model.m) as i64 - 1;
    if span > limit {
        return Err(Error::WindowTooDeep { span, limit });
    }
    let m = model.m as i64;
    let mut vertices = Vec::new();
    for j in j_min..=j_max {
        for rep in model.enumerate(j_min * m, j * m)? {
            vertices.push(CosetVertex { rep, j });
        }
        if vertices.len() as u64 > MAX_ENUMERATION {
            return Err(Error::Overflow("coset tree window"));
        }
    }
    let index: HashMap<&CosetVertex, usize> = vertices.iter().enumerate().map(|(i, c)| (c, i)).collect();
    let mut edges = Vec::new();
    for (i, c) in vertices.iter().enumerate() {
        if c.j == j_min {
            continue;
        }
        if let Some(&p) = index.get(&c.parent(model)) {
            edges.push((p, i));
        }
    }
    Ok(CosetTree { model: *model, j_min, j_max, vertices, edges })
}

impl CosetTree {
    pub fn degree_report(&self) -> DegreeReport {
        let n = self.vertices.len();
        let mut out = vec![0u64; n];
        let mut inn = vec![0u64; n];
        for &(p, c) in &self.edges {
            out[p] += 1;
            inn[c] += 1;
        }
        let mut out_degrees = BTreeMap::new();
        let mut in_degrees = BTreeMap::new();
        let mut root_in_degree = 0;
        for (i, c) in self.vertices.iter().enumerate() {
            if c.j < self.j_max {
                *out_degrees.entry(out[i]).or_default() += 1;
            }
            if c.j > self.j_min {
                *in_degrees.entry(inn[i]).or_default() += 1;
            } else {
                root_in_degree += inn[i];
            }
        }
        let expected = (self.model.q as u64).pow(self.model.m);
        let degrees_regular = out_degrees.keys().all(|&d| d == expected) && in_degrees.keys().all(|&d| d == 1);
        let is_tree = self.edges.len() + 1 == n && inn.iter().filter(|&&d| d == 0).count() == 1;
        DegreeReport {
            q: self.model.q,
            m: self.model.m,
            j_min: self.j_min,
            j_max: self.j_max,
            vertex_count: n as u64,
            edge_count: self.edges.len() as u64,
            expected_out_degree: expected,
            out_degrees,
            in_degrees,
            root_in_degree,
            degrees_regular,
            is_tree,
        }
    }

    /// `(level, rep, parent_level, parent_rep)` for every edge.
    pub fn edge_rows(&self) -> Vec<(i64, String, i64, String)> {
        self.edges
            .iter()
            .map(|&(p, c)| {
                let (p, c) = (&self.vertices[p], &self.vertices[c]);
                (c.j, c.rep.to_string(), p.j, p.rep.to_string())
            })
            .collect()
    }
}

/// `μ` pushed through `π`, as a measure on the affine group over `(Z/q)^m`.
pub fn push_forward(model: &AlphaModel, atoms: &[(VmmElem, BigRational)]) -> Result<Measure> {
    let pushed = atoms.iter().map(|(g, w)| (ProductElem::from(pi_map(g, model)), w.clone())).collect();
    Measure::new(vec![model.packed_alphabet()], pushed)
}

/// Exact `m1(η_*μ)`.
pub fn eta_drift(atoms: &[(VmmElem, BigRational)]) -> BigRational {
    atoms.iter().fold(BigRational::zero(), |acc, (g, w)| acc + w * BigRational::from_integer(eta(g).into()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VmmWalkReport {
    pub walk: WalkReport,
    pub eta_drift: String,
    pub triviality: TrivialityReport,
}

/// Walks `μ` through `π`. The image of the support must be non-exceptional.
pub fn vmma_walk(model: &AlphaModel, atoms: &[(VmmElem, BigRational)], params: &WalkParams) -> Result<VmmWalkReport> {
    let measure = push_forward(model, atoms)?;
    let class = classify_factor(&SubgroupSpec::from_measure(&measure), 0)?.class;
    if class.is_exceptional() {
        return Err(Error::Hypothesis(format!("exceptional image ({class})")));
    }
    let walk = rate_of_escape(&measure, params)?;
    let triviality = triviality_check(&measure)?;
    let drift = eta_drift(atoms);
    debug_assert_eq!(triviality.trivial, !drift.is_positive());
    Ok(VmmWalkReport { walk, eta_drift: drift.to_string(), triviality })
}

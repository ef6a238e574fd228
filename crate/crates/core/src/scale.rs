//! Scale and modular functions on the affine model, and the exceptional /
//! uniscalar classification of finitely generated subgroups.
//!
//! Two notions of scale appear. The ambient scale is computed in the closed
//! affine group of each tree, where `s(t^n x + b) = q^{max(-n, 0)}`. The
//! closure scale is computed inside the closure of the subgroup `Γ` itself,
//! as the size of the orbit `stab_Γ(γv)·v` for a vertex `v` on the axis of
//! `γ`; it is the right notion for statements about `Γ` as a group.

use std::collections::HashSet;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::digits::{Alphabet, Digits};
use crate::error::{Error, Result};
use crate::group::{AffineElem, ProductElem};
use crate::tree::{End, Vertex};
use crate::walk::Measure;

/// Generators of a subgroup `Γ ≤ ∏ A(q_i)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubgroupSpec {
    alphabets: Vec<Alphabet>,
    generators: Vec<ProductElem>,
}

impl SubgroupSpec {
    pub fn new(alphabets: Vec<Alphabet>, generators: Vec<ProductElem>) -> Result<Self> {
        if generators.is_empty() {
            return Err(Error::InvalidParameter("no generators".into()));
        }
        for g in &generators {
            g.check(&alphabets)?;
        }
        Ok(Self { alphabets, generators })
    }

    /// The subgroup generated by the support of `μ`.
    pub fn from_measure(measure: &Measure) -> Self {
        Self { alphabets: measure.alphabets().to_vec(), generators: measure.atoms().to_vec() }
    }

    pub fn alphabets(&self) -> &[Alphabet] {
        &self.alphabets
    }

    pub fn generators(&self) -> &[ProductElem] {
        &self.generators
    }

    pub fn num_factors(&self) -> usize {
        self.alphabets.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleResult {
    pub element: String,
    pub per_factor: Vec<String>,
    pub total: String,
    pub inverse_total: String,
    pub modular: String,
}

fn big_pow(q: u32, e: u64) -> BigUint {
    num_traits::pow(BigUint::from(q), e as usize)
}

/// `q^{max(-n, 0)}`.
pub fn scale_affine(g: &AffineElem) -> BigUint {
    big_pow(g.alphabet().size(), (-g.shift()).max(0) as u64)
}

/// `Δ(g) = ∏_i q_i^{-n_i}`.
pub fn modular(g: &ProductElem) -> BigRational {
    g.factors().iter().fold(BigRational::one(), |acc, f| {
        let p = BigInt::from(big_pow(f.alphabet().size(), f.shift().unsigned_abs()));
        if f.shift() >= 0 {
            acc / BigRational::from_integer(p)
        } else {
            acc * BigRational::from_integer(p)
        }
    })
}

pub fn scale_total(g: &ProductElem) -> BigUint {
    g.factors().iter().map(scale_affine).product()
}

/// Ambient scale of `g` and of `g⁻¹`, and `Δ(g)`.
pub fn scale_element(g: &ProductElem) -> ScaleResult {
    let per_factor: Vec<BigUint> = g.factors().iter().map(scale_affine).collect();
    let total: BigUint = per_factor.iter().product();
    ScaleResult {
        element: g.to_string(),
        per_factor: per_factor.iter().map(ToString::to_string).collect(),
        total: total.to_string(),
        inverse_total: scale_total(&g.inverse()).to_string(),
        modular: modular(g).to_string(),
    }
}

/// `[αU : U ∩ αU]` for `α = conjugation by g` and `U = stab(o)`, counted by
/// enumerating `U` modulo the digits at indices `≥ depth`.
pub fn scale_oracle_affine(g: &AffineElem, depth: u32) -> Result<u64> {
    let needed = g.shift().unsigned_abs() as u32 + 2;
    if depth < needed {
        return Err(Error::DepthTooSmall { needed, got: depth });
    }
    let alphabet = g.alphabet();
    let q = alphabet.size() as u64;
    let count = q.checked_pow(depth).filter(|&c| c <= 1 << 24).ok_or(Error::Overflow("oracle enumeration"))?;
    let inv = g.inverse();
    let mut image = HashSet::new();
    for code in 0..count {
        let mut c = Digits::zero(alphabet);
        let mut x = code;
        for i in 0..depth as i64 {
            c.set(i, (x % q) as u32)?;
            x /= q;
        }
        let u = AffineElem::new(0, c);
        let conj = g.compose(&u)?.compose(&inv)?;
        debug_assert_eq!(conj.shift(), 0);
        image.insert(conj.translation().truncate_below(depth as i64));
    }
    let inside = image.iter().filter(|d| d.valuation().is_none_or(|v| v >= 0)).count() as u64;
    Ok(image.len() as u64 / inside)
}

pub fn scale_oracle(g: &ProductElem, depth: u32) -> Result<Vec<u64>> {
    g.factors().iter().map(|f| scale_oracle_affine(f, depth)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FactorClass {
    ExceptionalHorocyclic,
    ExceptionalFixedEnd,
    NonExceptional,
}

impl FactorClass {
    pub fn is_exceptional(self) -> bool {
        self != FactorClass::NonExceptional
    }
}

impl fmt::Display for FactorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FactorClass::ExceptionalHorocyclic => "exceptional-horocyclic",
            FactorClass::ExceptionalFixedEnd => "exceptional-fixed-end",
            FactorClass::NonExceptional => "non-exceptional",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FactorVerdict {
    pub class: FactorClass,
    /// The common fixed end other than `ω`, when there is one.
    pub fixed_end: Option<End>,
}

pub fn classify_factor(spec: &SubgroupSpec, j: usize) -> Result<FactorVerdict> {
    if j >= spec.num_factors() {
        return Err(Error::InvalidParameter(format!("factor {j} out of range")));
    }
    let gens: Vec<&AffineElem> = spec.generators.iter().map(|g| g.factor(j)).collect();
    let Some(hyp) = gens.iter().find(|g| g.shift() != 0) else {
        return Ok(FactorVerdict { class: FactorClass::ExceptionalHorocyclic, fixed_end: None });
    };
    let xi = hyp.fixed_end().expect("hyperbolic");
    for g in &gens {
        if g.act_end(&xi)? != xi {
            return Ok(FactorVerdict { class: FactorClass::NonExceptional, fixed_end: None });
        }
    }
    Ok(FactorVerdict { class: FactorClass::ExceptionalFixedEnd, fixed_end: Some(xi) })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubgroupClass {
    FullyExceptional,
    PartiallyExceptional,
    NotPartiallyExceptional,
}

impl fmt::Display for SubgroupClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SubgroupClass::FullyExceptional => "fully exceptional",
            SubgroupClass::PartiallyExceptional => "partially exceptional",
            SubgroupClass::NotPartiallyExceptional => "not partially exceptional",
        })
    }
}

pub fn classify_subgroup(spec: &SubgroupSpec) -> Result<SubgroupClass> {
    let mut exceptional = 0;
    for j in 0..spec.num_factors() {
        if classify_factor(spec, j)?.class.is_exceptional() {
            exceptional += 1;
        }
    }
    Ok(if exceptional == spec.num_factors() {
        SubgroupClass::FullyExceptional
    } else if exceptional > 0 {
        SubgroupClass::PartiallyExceptional
    } else {
        SubgroupClass::NotPartiallyExceptional
    })
}

/// Distinct elements given by words of length `≤ max_len` in the generators
/// and their inverses, in breadth-first order starting at the identity.
pub fn words(spec: &SubgroupSpec, max_len: usize) -> Vec<ProductElem> {
    let mut letters: Vec<ProductElem> = Vec::new();
    for g in &spec.generators {
        for x in [g.clone(), g.inverse()] {
            if !letters.contains(&x) {
                letters.push(x);
            }
        }
    }
    let id = ProductElem::identity(&spec.alphabets);
    let mut seen = HashSet::from([id.clone()]);
    let mut out = vec![id.clone()];
    let mut layer = vec![id];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &layer {
            for l in &letters {
                let x = w.compose(l).expect("same configuration");
                if seen.insert(x.clone()) {
                    next.push(x.clone());
                    out.push(x);
                }
            }
        }
        layer = next;
    }
    out
}

/// Where scales are measured.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleContext {
    /// The closed ambient product of affine groups.
    Ambient,
    /// The closure of `Γ`, probed with words of length `≤ search_len`.
    Closure { search_len: usize },
}

/// A vertex on the axis of `g` (hyperbolic) or fixed by `g` (elliptic).
fn axis_vertex(g: &AffineElem) -> Vertex {
    match g.fixed_end() {
        Some(xi) => xi.vertex_at_level(0).expect("stream end"),
        None => {
            let level = g.translation().valuation().map_or(0, |v| v.min(0));
            Vertex::containing(level, &Digits::zero(g.alphabet()))
        }
    }
}

/// `|stab_Γ(γv)·v|` with the stabiliser probed by `probe`, a list of
/// elements of `Γ`. A lower bound that is exact once `probe` contains
/// representatives of every coset involved.
pub fn closure_scale(gamma: &ProductElem, probe: &[ProductElem]) -> u64 {
    let v: Vec<Vertex> = gamma.factors().iter().map(axis_vertex).collect();
    let target = gamma.act(&v).expect("same configuration");
    let orbit: HashSet<Vec<Vertex>> = probe
        .iter()
        .filter(|w| w.act(&target).expect("same configuration") == target)
        .map(|w| w.act(&v).expect("same configuration"))
        .collect();
    orbit.len() as u64
}

fn scale_pair(g: &ProductElem, ctx: ScaleContext, probe: &[ProductElem]) -> (BigUint, BigUint) {
    match ctx {
        ScaleContext::Ambient => (scale_total(g), scale_total(&g.inverse())),
        ScaleContext::Closure { .. } => (
            BigUint::from(closure_scale(g, probe)),
            BigUint::from(closure_scale(&g.inverse(), probe)),
        ),
    }
}

fn probe_for(spec: &SubgroupSpec, ctx: ScaleContext) -> Vec<ProductElem> {
    match ctx {
        ScaleContext::Ambient => Vec::new(),
        ScaleContext::Closure { search_len } => words(spec, search_len),
    }
}

/// True iff every sampled word and its inverse has scale 1.
pub fn is_uniscalar(spec: &SubgroupSpec, bound: usize, ctx: ScaleContext) -> Result<bool> {
    if bound == 0 {
        return Err(Error::InvalidParameter("word bound must be at least 1".into()));
    }
    let probe = probe_for(spec, ctx);
    Ok(words(spec, bound).iter().all(|w| {
        let (s, t) = scale_pair(w, ctx, &probe);
        s.is_one() && t.is_one()
    }))
}

/// True iff `Δ(w) = s(w)/s(w⁻¹)` is 1 on every sampled word.
pub fn is_unimodular_on_words(spec: &SubgroupSpec, bound: usize, ctx: ScaleContext) -> Result<bool> {
    if bound == 0 {
        return Err(Error::InvalidParameter("word bound must be at least 1".into()));
    }
    let probe = probe_for(spec, ctx);
    Ok(words(spec, bound).iter().all(|w| match ctx {
        ScaleContext::Ambient => modular(w).is_one(),
        ScaleContext::Closure { .. } => {
            let (s, t) = scale_pair(w, ctx, &probe);
            s == t
        }
    }))
}

/// True iff the support of `μ` does not generate a fully exceptional group.
pub fn transience_hypothesis(measure: &Measure) -> bool {
    classify_subgroup(&SubgroupSpec::from_measure(measure)).expect("valid spec") != SubgroupClass::FullyExceptional
}

/// `Δ(g) == s(g)/s(g⁻¹)` with both sides computed separately.
pub fn modular_consistent(g: &ProductElem) -> bool {
    let lhs = modular(g);
    let rhs = BigRational::new(BigInt::from(scale_total(g)), BigInt::from(scale_total(&g.inverse())));
    lhs == rhs && !rhs.is_zero()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::Stream;

    fn q(n: u32) -> Alphabet {
        Alphabet::cyclic(n).unwrap()
    }

    fn g(a: u32, n: i64, pairs: &[(i64, u32)]) -> AffineElem {
        AffineElem::new(n, Digits::from_pairs(q(a), pairs.iter().copied()).unwrap())
    }

    fn single(gens: Vec<AffineElem>) -> SubgroupSpec {
        let a = gens[0].alphabet();
        SubgroupSpec::new(vec![a], gens.into_iter().map(ProductElem::from).collect()).unwrap()
    }

    #[test]
    fn scale_examples() {
        let id = ProductElem::identity(&[q(2), q(3)]);
        let s = scale_element(&id);
        assert_eq!(s.per_factor, vec!["1", "1"]);
        assert_eq!(s.modular, "1");
        let x: ProductElem = g(2, -1, &[]).into();
        let s = scale_element(&x);
        assert_eq!((s.total.as_str(), s.inverse_total.as_str(), s.modular.as_str()), ("2", "1", "2"));
        let opposite = ProductElem::new(vec![g(2, 1, &[]), g(2, -1, &[])]);
        let s = scale_element(&opposite);
        assert_eq!((s.total.as_str(), s.inverse_total.as_str(), s.modular.as_str()), ("2", "2", "1"));
    }

    #[test]
    fn oracle_examples() {
        assert_eq!(scale_oracle_affine(&AffineElem::identity(q(2)), 3).unwrap(), 1);
        assert_eq!(scale_oracle_affine(&g(2, -1, &[]), 4).unwrap(), 2);
        assert_eq!(scale_oracle_affine(&g(3, -2, &[(0, 1)]), 6).unwrap(), 9);
        assert_eq!(scale_oracle_affine(&g(3, -2, &[]), 6).unwrap(), 9);
        assert_eq!(scale_oracle_affine(&g(3, 2, &[(-1, 2)]), 4).unwrap(), 1);
        assert!(matches!(scale_oracle_affine(&g(2, -3, &[]), 4), Err(Error::DepthTooSmall { needed: 5, got: 4 })));
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify_factor(&single(vec![g(2, 0, &[(0, 1)]), g(2, 0, &[(-3, 1)])]), 0).unwrap().class, FactorClass::ExceptionalHorocyclic);
        let v = classify_factor(&single(vec![g(2, 2, &[])]), 0).unwrap();
        assert_eq!(v.class, FactorClass::ExceptionalFixedEnd);
        assert_eq!(v.fixed_end, Some(End::Stream(Stream::zero(q(2)))));
        assert_eq!(classify_factor(&single(vec![g(2, 1, &[]), g(2, 0, &[(0, 1)])]), 0).unwrap().class, FactorClass::NonExceptional);
        // a conjugate pair sharing a fixed end
        let h = g(3, 1, &[(0, 1)]);
        let h2 = h.compose(&h).unwrap();
        assert_eq!(classify_factor(&single(vec![h, h2]), 0).unwrap().class, FactorClass::ExceptionalFixedEnd);
    }

    #[test]
    fn classify_subgroup_examples() {
        let two = vec![q(2), q(2)];
        let spec = |gens: Vec<(AffineElem, AffineElem)>| {
            SubgroupSpec::new(two.clone(), gens.into_iter().map(|(a, b)| ProductElem::new(vec![a, b])).collect()).unwrap()
        };
        let horo = spec(vec![(g(2, 0, &[(0, 1)]), g(2, 0, &[(1, 1)]))]);
        assert_eq!(classify_subgroup(&horo).unwrap(), SubgroupClass::FullyExceptional);
        let mixed = spec(vec![(g(2, 1, &[]), g(2, 1, &[])), (g(2, 0, &[]), g(2, 0, &[(0, 1)]))]);
        assert_eq!(classify_subgroup(&mixed).unwrap(), SubgroupClass::PartiallyExceptional);
        let none = spec(vec![(g(2, 1, &[]), g(2, 1, &[])), (g(2, 0, &[(0, 1)]), g(2, 0, &[(0, 1)]))]);
        assert_eq!(classify_subgroup(&none).unwrap(), SubgroupClass::NotPartiallyExceptional);
    }

    #[test]
    fn classification_is_conjugation_invariant() {
        let c = g(2, 3, &[(-2, 1), (1, 1)]);
        let ci = c.inverse();
        for gens in [
            vec![g(2, 1, &[]), g(2, 0, &[(0, 1)])],
            vec![g(2, 2, &[(1, 1)])],
            vec![g(2, 0, &[(0, 1)]), g(2, 0, &[(4, 1)])],
            vec![g(2, -1, &[(0, 1)]), g(2, -2, &[(0, 1), (-1, 1)])],
        ] {
            let conj: Vec<AffineElem> = gens.iter().map(|x| c.compose(x).unwrap().compose(&ci).unwrap()).collect();
            assert_eq!(classify_factor(&single(gens), 0).unwrap().class, classify_factor(&single(conj), 0).unwrap().class);
        }
    }

    #[test]
    fn uniscalar_examples() {
        let horo = single(vec![g(2, 0, &[(0, 1)]), g(2, 0, &[(-1, 1)])]);
        let shift = single(vec![g(2, -1, &[])]);
        let mixed = single(vec![g(2, 1, &[]), g(2, 0, &[(0, 1)])]);
        let closure = ScaleContext::Closure { search_len: 4 };
        assert!(is_uniscalar(&horo, 3, ScaleContext::Ambient).unwrap());
        assert!(!is_uniscalar(&shift, 3, ScaleContext::Ambient).unwrap());
        assert!(is_uniscalar(&shift, 3, closure).unwrap());
        assert!(!is_uniscalar(&mixed, 3, closure).unwrap());
        assert!(is_unimodular_on_words(&horo, 3, ScaleContext::Ambient).unwrap());
        assert!(!is_unimodular_on_words(&mixed, 3, ScaleContext::Ambient).unwrap());
        assert!(!is_unimodular_on_words(&mixed, 3, closure).unwrap());
        let opposite = SubgroupSpec::new(vec![q(3), q(3)], vec![ProductElem::new(vec![g(3, 1, &[]), g(3, -1, &[])])]).unwrap();
        assert!(is_unimodular_on_words(&opposite, 4, ScaleContext::Ambient).unwrap());
        assert!(!is_uniscalar(&opposite, 4, ScaleContext::Ambient).unwrap());
    }

    #[test]
    fn closure_scale_of_shift_in_mixed_group() {
        let mixed = single(vec![g(2, 1, &[]), g(2, 0, &[(0, 1)])]);
        let probe = words(&mixed, 4);
        assert_eq!(closure_scale(&g(2, -1, &[]).into(), &probe), 2);
        assert_eq!(closure_scale(&g(2, 1, &[]).into(), &probe), 1);
        assert_eq!(closure_scale(&g(2, 0, &[(0, 1)]).into(), &probe), 1);
    }

    #[test]
    fn transience_examples() {
        let r = |s: &str| crate::walk::parse_rational(s).unwrap();
        let m = Measure::new(vec![q(2)], vec![(g(2, 1, &[]).into(), r("7/10")), (g(2, -1, &[(0, 1)]).into(), r("3/10"))]).unwrap();
        assert!(transience_hypothesis(&m));
        let horo = Measure::new(vec![q(2)], vec![(g(2, 0, &[(0, 1)]).into(), r("1"))]).unwrap();
        assert!(!transience_hypothesis(&horo));
        let two = vec![q(2), q(2)];
        let mixed = Measure::new(
            two.clone(),
            vec![
                (ProductElem::new(vec![g(2, 1, &[]), g(2, 1, &[])]), r("1/2")),
                (ProductElem::new(vec![g(2, 0, &[]), g(2, 0, &[(0, 1)])]), r("1/2")),
            ],
        )
        .unwrap();
        assert!(transience_hypothesis(&mixed));
    }

    #[test]
    fn words_are_deduplicated() {
        let horo = single(vec![g(2, 0, &[(0, 1)])]);
        // the generator is an involution
        assert_eq!(words(&horo, 5).len(), 2);
        let shift = single(vec![g(2, 1, &[])]);
        assert_eq!(words(&shift, 3).len(), 7);
    }
}

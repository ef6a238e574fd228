//! Seeded right random walks `R_n = X_1 X_2 ⋯ X_n` on a product group.
//!
//! Each trial draws its own 64-bit seed from the master seed, so trials are
//! independent of scheduling. Aggregation always folds in trial order, which
//! keeps reports bit-identical across thread counts.

use std::io::Write;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::digits::Alphabet;
use crate::error::{Error, Result};
use crate::group::ProductElem;

/// Finitely supported probability measure with exact rational weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Measure {
    alphabets: Vec<Alphabet>,
    atoms: Vec<ProductElem>,
    weights: Vec<BigRational>,
    /// `⌊C_i · 2⁶⁴⌋` for the cumulative weights `C_i`; the last is `2⁶⁴`.
    thresholds: Vec<u128>,
}

impl Measure {
    pub fn new(alphabets: Vec<Alphabet>, atoms: Vec<(ProductElem, BigRational)>) -> Result<Self> {
        if alphabets.is_empty() {
            return Err(Error::InvalidMeasure("no factors".into()));
        }
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        let mut total = BigRational::zero();
        let mut thresholds = Vec::with_capacity(atoms.len());
        let two64 = BigInt::one() << 64;
        for (i, (g, w)) in atoms.iter().enumerate() {
            g.check(&alphabets)?;
            if !w.is_positive() {
                return Err(Error::InvalidMeasure(format!("weight {w} of atom {g} is not positive")));
            }
            if atoms[..i].iter().any(|(h, _)| h == g) {
                return Err(Error::InvalidMeasure(format!("atom {g} listed twice")));
            }
            total += w;
            let t: BigInt = (total.numer() * &two64) / total.denom();
            thresholds.push(t.to_u128().ok_or(Error::Overflow("sampling threshold"))?);
        }
        if !total.is_one() {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}, not 1")));
        }
        let (atoms, weights) = atoms.into_iter().unzip();
        Ok(Self { alphabets, atoms, weights, thresholds })
    }

    pub fn dirac(g: ProductElem) -> Self {
        Self::new(g.alphabets(), vec![(g, BigRational::one())]).expect("valid point mass")
    }

    pub fn alphabets(&self) -> &[Alphabet] {
        &self.alphabets
    }

    pub fn num_factors(&self) -> usize {
        self.alphabets.len()
    }

    pub fn atoms(&self) -> &[ProductElem] {
        &self.atoms
    }

    pub fn weights(&self) -> &[BigRational] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `m1(μ_j) = Σ w · φ_j(g)`.
    pub fn drift(&self, j: usize) -> Result<BigRational> {
        if j >= self.num_factors() {
            return Err(Error::InvalidParameter(format!("factor {j} out of range")));
        }
        Ok(self
            .atoms
            .iter()
            .zip(&self.weights)
            .map(|(g, w)| w * BigRational::from_integer(g.factor(j).shift().into()))
            .sum())
    }

    pub fn drifts(&self) -> Vec<BigRational> {
        (0..self.num_factors()).map(|j| self.drift(j).expect("in range")).collect()
    }

    /// `Σ w · |g|_P`.
    pub fn first_moment(&self) -> BigRational {
        self.atoms
            .iter()
            .zip(&self.weights)
            .map(|(g, w)| w * BigRational::from_integer(g.gauge().into()))
            .sum()
    }

    pub fn max_atom_gauge(&self, j: usize) -> u64 {
        self.atoms.iter().map(|g| g.factor(j).gauge()).max().unwrap_or(0)
    }

    /// Lowest translation index over the atoms in factor `j` (0 if none).
    pub(crate) fn min_translation_index(&self, j: usize) -> i64 {
        self.atoms
            .iter()
            .filter_map(|g| g.factor(j).translation().valuation())
            .min()
            .unwrap_or(0)
            .min(0)
    }

    /// Atom index for a uniform 64-bit draw.
    pub fn sample_index(&self, u: u64) -> usize {
        let u = u as u128;
        self.thresholds.iter().position(|&t| u < t).expect("last threshold is 2^64")
    }
}

/// Parses `"7/10"`, `"0.7"` or `"1"` as an exact rational.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("bad rational '{s}'"));
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let digits: BigInt = format!("{int}{frac}").parse().map_err(|_| bad())?;
        let denom = BigInt::from(BigUint::from(10u32).pow(frac.len() as u32));
        return Ok(BigRational::new(digits, denom));
    }
    Ok(BigRational::from_integer(s.parse().map_err(|_| bad())?))
}

/// Seed of trial `trial`: the first output of ChaCha8 keyed by the master
/// seed on stream `trial`.
pub fn trial_seed(master_seed: u64, trial: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng.next_u64()
}

/// A sampled path. Only the atom indices are stored; partial products are
/// replayed on demand.
#[derive(Clone, Debug)]
pub struct Trajectory<'a> {
    measure: &'a Measure,
    seed: u64,
    steps: Vec<u32>,
}

pub fn run_trajectory(measure: &Measure, n: usize, seed: u64) -> Result<Trajectory<'_>> {
    if n == 0 {
        return Err(Error::InvalidParameter("trajectory length must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let steps = (0..n).map(|_| measure.sample_index(rng.next_u64()) as u32).collect();
    Ok(Trajectory { measure, seed, steps })
}

/// Per-step record written to checkpoint logs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub step: usize,
    pub element: String,
    pub h: Vec<i64>,
    pub distance: Vec<u64>,
}

impl<'a> Trajectory<'a> {
    pub fn measure(&self) -> &'a Measure {
        self.measure
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn steps(&self) -> &[u32] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `X_{m+1}`.
    pub fn increment(&self, m: usize) -> &'a ProductElem {
        &self.measure.atoms[self.steps[m] as usize]
    }

    /// Calls `f(m, R_m)` for `m = 0..=n`.
    pub fn replay(&self, mut f: impl FnMut(usize, &ProductElem)) {
        let mut r = ProductElem::identity(self.measure.alphabets());
        f(0, &r);
        for m in 0..self.len() {
            r.compose_assign(self.increment(m)).expect("atoms match the measure");
            f(m + 1, &r);
        }
    }

    pub fn partial_product(&self, m: usize) -> ProductElem {
        let mut r = ProductElem::identity(self.measure.alphabets());
        for i in 0..m.min(self.len()) {
            r.compose_assign(self.increment(i)).expect("atoms match the measure");
        }
        r
    }

    pub fn final_product(&self) -> ProductElem {
        self.partial_product(self.len())
    }

    /// Checkpoints at every multiple of `every` and at the horizon.
    pub fn checkpoints(&self, every: usize) -> Vec<Checkpoint> {
        let every = every.max(1);
        let n = self.len();
        let mut out = Vec::new();
        self.replay(|m, r| {
            if m % every == 0 || m == n {
                out.push(Checkpoint {
                    step: m,
                    element: r.to_string(),
                    h: r.horocyclic(),
                    distance: r.factors().iter().map(|g| g.gauge()).collect(),
                });
            }
        });
        out
    }

    pub fn write_checkpoints_jsonl(&self, every: usize, mut w: impl Write) -> std::io::Result<()> {
        for c in self.checkpoints(every) {
            serde_json::to_writer(&mut w, &c)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    RandomEnd,
    Omega,
    Undecided,
}

/// When a factor counts as converged.
///
/// Random end: the final level is at least `hi` and no digit in `[lo, hi)`
/// changed after the walk last rose through level `hi`. Toward `ω`: the
/// final level is below `-omega_depth` and the whole second half of the
/// walk stayed below 0. A factor with zero drift is always undecided.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerdictRule {
    pub windows: Vec<(i64, i64)>,
    pub omega_depth: i64,
}

impl VerdictRule {
    pub fn depth(factors: usize, depth: u32) -> Self {
        Self { windows: vec![(0, depth as i64); factors], omega_depth: depth as i64 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorSummary {
    pub final_level: i64,
    pub final_distance: u64,
    pub min_level: i64,
    pub max_step_distance: u64,
    pub verdict: Verdict,
    /// Digits of `R_n`'s translation on the verdict window, for random ends.
    pub word: Option<Vec<u32>>,
}

/// Distance from the root to `(k, b)` truncated below `k`.
fn norm_of(g: &crate::group::AffineElem) -> u64 {
    let k = g.shift();
    let m = match g.translation().valuation() {
        Some(v) if v < k => v.min(0),
        _ => 0,
    }
    .min(k);
    (k - 2 * m) as u64
}

/// `d(R_m o, R_{m+1} o)` from the level and the increment.
fn step_distance(level: i64, x: &crate::group::AffineElem) -> u64 {
    let next = level + x.shift();
    let mut m = level.min(next);
    if let Some(v) = x.translation().valuation() {
        m = m.min(level + v);
    }
    ((level - m) + (next - m)) as u64
}

/// One pass over the trajectory collecting levels, distances and verdicts.
pub fn summarize(trajectory: &Trajectory<'_>, rule: &VerdictRule) -> Vec<FactorSummary> {
    let measure = trajectory.measure();
    let k = measure.num_factors();
    let n = trajectory.len();
    let half = n.div_ceil(2);
    let zero_drift: Vec<bool> = measure.drifts().iter().map(Zero::is_zero).collect();
    let mut last_below = vec![0usize; k];
    let mut last_touch = vec![0usize; k];
    let mut min_level = vec![0i64; k];
    let mut max_late = vec![i64::MIN; k];
    let mut max_step = vec![0u64; k];
    let mut r = ProductElem::identity(measure.alphabets());
    if half == 0 {
        max_late.iter_mut().for_each(|x| *x = 0);
    }
    for m in 0..n {
        let x = trajectory.increment(m);
        for j in 0..k {
            let level = r.factor(j).shift();
            let (lo, hi) = rule.windows[j];
            for (i, _) in x.factor(j).translation().iter() {
                let idx = level + i;
                if lo <= idx && idx < hi {
                    last_touch[j] = m + 1;
                }
            }
            max_step[j] = max_step[j].max(step_distance(level, x.factor(j)));
        }
        r.compose_assign(x).expect("atoms match the measure");
        for j in 0..k {
            let level = r.factor(j).shift();
            if level < rule.windows[j].1 {
                last_below[j] = m + 1;
            }
            min_level[j] = min_level[j].min(level);
            if m + 1 >= half {
                max_late[j] = max_late[j].max(level);
            }
        }
    }
    (0..k)
        .map(|j| {
            let g = r.factor(j);
            let level = g.shift();
            let (lo, hi) = rule.windows[j];
            let verdict = if zero_drift[j] {
                Verdict::Undecided
            } else if level >= hi && last_touch[j] <= last_below[j] + 1 {
                Verdict::RandomEnd
            } else if level < -rule.omega_depth && max_late[j] < 0 {
                Verdict::Omega
            } else {
                Verdict::Undecided
            };
            let word = (verdict == Verdict::RandomEnd).then(|| g.translation().window(lo, hi));
            FactorSummary {
                final_level: level,
                final_distance: norm_of(g),
                min_level: min_level[j],
                max_step_distance: max_step[j],
                verdict,
                word,
            }
        })
        .collect()
}

/// Per-factor verdicts with the window `[0, depth)`.
pub fn convergence_verdict(trajectory: &Trajectory<'_>, depth: u32) -> Result<Vec<Verdict>> {
    if depth == 0 {
        return Err(Error::InvalidParameter("stabilization depth must be at least 1".into()));
    }
    let rule = VerdictRule::depth(trajectory.measure().num_factors(), depth);
    Ok(summarize(trajectory, &rule).into_iter().map(|s| s.verdict).collect())
}

/// Series `(1/m)·d(R_m o, R_{m+1} o)` and `(1/m)·|R_m o|` for `m = 1..=n`,
/// per factor.
#[derive(Clone, Debug, PartialEq)]
pub struct RegularityStats {
    pub step_distance: Vec<Vec<f64>>,
    pub normalized_distance: Vec<Vec<f64>>,
    pub max_step_distance: Vec<u64>,
}

pub fn regularity_stats(trajectory: &Trajectory<'_>) -> RegularityStats {
    let k = trajectory.measure().num_factors();
    let n = trajectory.len();
    let mut step_series = vec![Vec::with_capacity(n); k];
    let mut normalized_distance = vec![Vec::with_capacity(n); k];
    let mut max_step = vec![0u64; k];
    let mut r = ProductElem::identity(trajectory.measure().alphabets());
    for m in 0..n {
        let x = trajectory.increment(m);
        let before: Vec<i64> = r.horocyclic();
        r.compose_assign(x).expect("atoms match the measure");
        let t = (m + 1) as f64;
        for j in 0..k {
            normalized_distance[j].push(norm_of(r.factor(j)) as f64 / t);
            if m + 1 < n {
                let next = trajectory.increment(m + 1);
                let d = step_distance(r.factor(j).shift(), next.factor(j));
                max_step[j] = max_step[j].max(d);
                step_series[j].push(d as f64 / t);
            }
            if m == 0 {
                max_step[j] = max_step[j].max(step_distance(before[j], x.factor(j)));
            }
        }
    }
    RegularityStats { step_distance: step_series, normalized_distance, max_step_distance: max_step }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkParams {
    pub n: usize,
    pub trials: usize,
    pub depth: u32,
    pub master_seed: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictCounts {
    pub random_end: u64,
    pub omega: u64,
    pub undecided: u64,
}

impl VerdictCounts {
    pub fn add(&mut self, v: Verdict) {
        match v {
            Verdict::RandomEnd => self.random_end += 1,
            Verdict::Omega => self.omega += 1,
            Verdict::Undecided => self.undecided += 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorReport {
    pub factor: usize,
    /// Exact `m1(μ_j)` as a fraction.
    pub drift_exact: String,
    pub rate_mean: f64,
    pub rate_stderr: f64,
    pub h_drift_mean: f64,
    pub h_drift_stderr: f64,
    pub min_h_mean: f64,
    pub min_h_stderr: f64,
    pub verdict_counts: VerdictCounts,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkReport {
    pub trials: usize,
    pub horizon: usize,
    pub depth: u32,
    pub master_seed: u64,
    pub factors: Vec<FactorReport>,
}

impl WalkReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data")
    }
}

/// Mean and standard error of the mean, folded in order.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn check_params(params: &WalkParams) -> Result<()> {
    if params.n == 0 || params.trials == 0 {
        return Err(Error::InvalidParameter("n and trials must be at least 1".into()));
    }
    if params.depth == 0 {
        return Err(Error::InvalidParameter("depth must be at least 1".into()));
    }
    Ok(())
}

/// Runs every trial and returns the summaries in trial order.
pub fn run_trials(measure: &Measure, params: &WalkParams, rule: &VerdictRule) -> Result<Vec<Vec<FactorSummary>>> {
    check_params(params)?;
    (0..params.trials as u64)
        .into_par_iter()
        .map(|t| {
            let traj = run_trajectory(measure, params.n, trial_seed(params.master_seed, t))?;
            Ok(summarize(&traj, rule))
        })
        .collect()
}

/// Monte Carlo estimate of the per-factor rate of escape and drift, with
/// convergence verdicts at window `[0, depth)`.
pub fn rate_of_escape(measure: &Measure, params: &WalkParams) -> Result<WalkReport> {
    let k = measure.num_factors();
    let rule = VerdictRule::depth(k, params.depth);
    let runs = run_trials(measure, params, &rule)?;
    let n = params.n as f64;
    let drifts = measure.drifts();
    let factors = (0..k)
        .map(|j| {
            let rates: Vec<f64> = runs.iter().map(|r| r[j].final_distance as f64 / n).collect();
            let hs: Vec<f64> = runs.iter().map(|r| r[j].final_level as f64 / n).collect();
            let mins: Vec<f64> = runs.iter().map(|r| r[j].min_level as f64).collect();
            let mut counts = VerdictCounts::default();
            runs.iter().for_each(|r| counts.add(r[j].verdict));
            let (rate_mean, rate_stderr) = mean_stderr(&rates);
            let (h_drift_mean, h_drift_stderr) = mean_stderr(&hs);
            let (min_h_mean, min_h_stderr) = mean_stderr(&mins);
            FactorReport {
                factor: j,
                drift_exact: drifts[j].to_string(),
                rate_mean,
                rate_stderr,
                h_drift_mean,
                h_drift_stderr,
                min_h_mean,
                min_h_stderr,
                verdict_counts: counts,
            }
        })
        .collect();
    Ok(WalkReport {
        trials: params.trials,
        horizon: params.n,
        depth: params.depth,
        master_seed: params.master_seed,
        factors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::digits::Digits;
    use crate::group::AffineElem;
    use std::collections::HashMap;

    fn q2() -> Alphabet {
        Alphabet::cyclic(2).unwrap()
    }

    fn g(n: i64, pairs: &[(i64, u32)]) -> ProductElem {
        AffineElem::new(n, Digits::from_pairs(q2(), pairs.iter().copied()).unwrap()).into()
    }

    fn r(s: &str) -> BigRational {
        parse_rational(s).unwrap()
    }

    fn drift04() -> Measure {
        Measure::new(vec![q2()], vec![(g(1, &[]), r("7/10")), (g(-1, &[(0, 1)]), r("3/10"))]).unwrap()
    }

    #[test]
    fn rationals() {
        assert_eq!(r("0.7"), r("7/10"));
        assert_eq!(r("1"), BigRational::one());
        assert_eq!(r(" 3/6 "), r("1/2"));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }

    #[test]
    fn measure_validation() {
        assert!(Measure::new(vec![q2()], vec![(g(1, &[]), r("1/2"))]).is_err());
        assert!(Measure::new(vec![q2()], vec![(g(1, &[]), r("1/2")), (g(1, &[]), r("1/2"))]).is_err());
        assert!(Measure::new(vec![q2()], vec![(g(1, &[]), r("3/2")), (g(0, &[]), r("-1/2"))]).is_err());
        let three = Alphabet::cyclic(3).unwrap();
        assert!(Measure::new(vec![three], vec![(g(1, &[]), r("1"))]).is_err());
    }

    #[test]
    fn drift_examples() {
        assert!(Measure::dirac(g(0, &[])).drift(0).unwrap().is_zero());
        assert_eq!(drift04().drift(0).unwrap(), r("2/5"));
        let two = ProductElem::new(vec![AffineElem::pure_shift(q2(), 1), AffineElem::pure_shift(q2(), -2)]);
        assert_eq!(Measure::dirac(two).drifts(), vec![r("1"), r("-2")]);
    }

    #[test]
    fn first_moment_examples() {
        assert!(Measure::dirac(g(0, &[])).first_moment().is_zero());
        assert_eq!(Measure::dirac(g(1, &[])).first_moment(), r("1"));
        let m = Measure::new(vec![q2()], vec![(g(1, &[]), r("1/2")), (g(-1, &[(0, 1)]), r("1/2"))]).unwrap();
        assert_eq!(m.first_moment(), r("1"));
    }

    #[test]
    fn balanced_thresholds_are_exact() {
        let m = Measure::new(vec![q2()], vec![(g(1, &[]), r("1/2")), (g(-1, &[(0, 1)]), r("1/2"))]).unwrap();
        assert_eq!(m.thresholds, vec![1u128 << 63, 1u128 << 64]);
        assert_eq!(m.sample_index((1u64 << 63) - 1), 0);
        assert_eq!(m.sample_index(1u64 << 63), 1);
        assert_eq!(m.sample_index(u64::MAX), 1);
    }

    #[test]
    fn dirac_walk_is_a_power() {
        let x = g(1, &[(0, 1)]);
        let m = Measure::dirac(x.clone());
        let t = run_trajectory(&m, 7, 3).unwrap();
        let mut p = ProductElem::identity(&[q2()]);
        for k in 0..=7 {
            assert_eq!(t.partial_product(k), p);
            p.compose_assign(&x).unwrap();
        }
        assert!(run_trajectory(&m, 0, 3).is_err());
    }

    #[test]
    fn same_seed_same_path() {
        let m = drift04();
        let a = run_trajectory(&m, 500, 99).unwrap();
        let b = run_trajectory(&m, 500, 99).unwrap();
        assert_eq!(a.steps(), b.steps());
        assert_ne!(a.steps(), run_trajectory(&m, 500, 100).unwrap().steps());
    }

    #[test]
    fn golden_trajectories() {
        let m = drift04();
        let t = run_trajectory(&m, 24, 7).unwrap();
        let frozen: Vec<u32> = GOLDEN_SEED7.to_vec();
        assert_eq!(t.steps(), frozen.as_slice());
        assert_eq!(trial_seed(1, 0), GOLDEN_TRIAL_SEED_1_0);
        assert_eq!(trial_seed(1, 1), GOLDEN_TRIAL_SEED_1_1);
    }

    const GOLDEN_SEED7: [u32; 24] = [0, 0, 1, 1, 0, 0, 0, 1, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0];
    const GOLDEN_TRIAL_SEED_1_0: u64 = 7424550030962593201;
    const GOLDEN_TRIAL_SEED_1_1: u64 = 15715005604373573095;

    #[test]
    fn two_step_law_matches_convolution() {
        let m = drift04();
        let trials = 100_000u64;
        let mut counts: HashMap<ProductElem, u64> = HashMap::new();
        for s in 0..trials {
            let t = run_trajectory(&m, 2, trial_seed(5, s)).unwrap();
            *counts.entry(t.final_product()).or_default() += 1;
        }
        let mut exact: HashMap<ProductElem, BigRational> = HashMap::new();
        for (a, wa) in m.atoms().iter().zip(m.weights()) {
            for (b, wb) in m.atoms().iter().zip(m.weights()) {
                *exact.entry(a.compose(b).unwrap()).or_insert_with(BigRational::zero) += wa * wb;
            }
        }
        assert_eq!(exact.len(), 4);
        for (x, p) in &exact {
            let p = p.to_f64().unwrap();
            let phat = *counts.get(x).unwrap_or(&0) as f64 / trials as f64;
            let sigma = (p * (1.0 - p) / trials as f64).sqrt();
            assert!((phat - p).abs() <= 3.0 * sigma, "{x}: {phat} vs {p}");
        }
    }

    #[test]
    fn right_walk_recursion_and_bounds() {
        let m = drift04();
        let t = run_trajectory(&m, 400, 11).unwrap();
        let mut prev: Option<ProductElem> = None;
        let mut h = 0i64;
        let mut gauge_sum = 0u64;
        t.replay(|k, rk| {
            if let Some(p) = &prev {
                let x = t.increment(k - 1);
                assert_eq!(&p.compose(x).unwrap(), rk);
                h += x.factor(0).shift();
                gauge_sum += x.gauge();
            }
            assert_eq!(rk.factor(0).shift(), h);
            let d = rk.factor(0).gauge();
            assert_eq!(d, norm_of(rk.factor(0)));
            assert!(h.unsigned_abs() <= d && d <= gauge_sum);
            prev = Some(rk.clone());
        });
    }

    #[test]
    fn step_distance_matches_vertex_distance() {
        let m = Measure::new(
            vec![q2()],
            vec![(g(2, &[(-1, 1)]), r("1/3")), (g(-1, &[(0, 1), (2, 1)]), r("1/3")), (g(0, &[(-2, 1)]), r("1/3"))],
        )
        .unwrap();
        let t = run_trajectory(&m, 200, 4).unwrap();
        let mut prev: Option<ProductElem> = None;
        t.replay(|k, rk| {
            if let Some(p) = &prev {
                let a = p.factor(0).act_root();
                let b = rk.factor(0).act_root();
                assert_eq!(step_distance(p.factor(0).shift(), t.increment(k - 1).factor(0)), a.distance(&b).unwrap());
            }
            prev = Some(rk.clone());
        });
        let stats = regularity_stats(&t);
        assert!(stats.max_step_distance[0] <= m.max_atom_gauge(0));
        assert_eq!(stats.normalized_distance[0].len(), 200);
    }

    #[test]
    fn dirac_verdicts_and_rates() {
        let up = Measure::dirac(g(1, &[]));
        let t = run_trajectory(&up, 50, 1).unwrap();
        assert_eq!(convergence_verdict(&t, 10).unwrap(), vec![Verdict::RandomEnd]);
        let down = Measure::dirac(g(-1, &[]));
        let t = run_trajectory(&down, 50, 1).unwrap();
        assert_eq!(convergence_verdict(&t, 10).unwrap(), vec![Verdict::Omega]);
        let params = WalkParams { n: 100, trials: 5, depth: 5, master_seed: 1 };
        let rep = rate_of_escape(&up, &params).unwrap();
        assert_eq!(rep.factors[0].rate_mean, 1.0);
        assert_eq!(rep.factors[0].rate_stderr, 0.0);
        let stats = regularity_stats(&run_trajectory(&up, 100, 0).unwrap());
        assert!(stats.step_distance[0].iter().enumerate().all(|(m, &x)| x == 1.0 / (m + 1) as f64));
    }

    #[test]
    fn checkpoints_are_json_lines() {
        let m = drift04();
        let t = run_trajectory(&m, 10, 2).unwrap();
        let mut buf = Vec::new();
        t.write_checkpoints_jsonl(5, &mut buf).unwrap();
        let lines: Vec<Checkpoint> = String::from_utf8(buf)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(lines.iter().map(|c| c.step).collect::<Vec<_>>(), vec![0, 5, 10]);
        assert_eq!(lines[2].element, t.final_product().to_string());
    }
}

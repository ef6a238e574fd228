//! The boundary `B = ∏ ∂T_i`: empirical hitting measure on cylinders,
//! stationarity, and the temperate gauges centred on a boundary point.

use std::collections::{BTreeMap, HashSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::digits::{Alphabet, Digits};
use crate::error::{Error, Result};
use crate::group::{AffineElem, ProductElem};
use crate::scale;
use crate::tree::{ray_vertex, BoundaryPoint, End, Stream, Vertex};
use crate::walk::{mean_stderr, run_trajectory, run_trials, trial_seed, Measure, Verdict, VerdictRule, WalkParams};

/// Largest supported cylinder depth.
pub const MAX_DEPTH: u32 = 16;

/// Counts of limit streams by their digits on `[0, depth)`, for one factor.
///
/// Words are also kept on a wider window `[lo, hi)` so the image of a
/// cylinder under any atom can be read off without rerunning the walk.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CylinderHistogram {
    pub factor: usize,
    pub depth: u32,
    pub counts: BTreeMap<Vec<u32>, u64>,
    pub omega: u64,
    pub undecided: u64,
    pub total: u64,
    lo: i64,
    hi: i64,
    extended: BTreeMap<Vec<u32>, u64>,
}

impl CylinderHistogram {
    pub fn decided(&self) -> u64 {
        self.total - self.undecided
    }

    /// The same histogram at a smaller depth.
    pub fn project(&self, depth: u32) -> Result<CylinderHistogram> {
        if depth == 0 || depth > self.depth {
            return Err(Error::InvalidParameter(format!("cannot project depth {} to {depth}", self.depth)));
        }
        let mut counts = BTreeMap::new();
        for (w, &c) in &self.counts {
            *counts.entry(w[..depth as usize].to_vec()).or_insert(0) += c;
        }
        Ok(CylinderHistogram { depth, counts, ..self.clone() })
    }

    pub fn max_cylinder_mass(&self) -> f64 {
        self.counts.values().copied().max().unwrap_or(0) as f64 / self.total as f64
    }

    pub fn omega_mass(&self) -> f64 {
        self.omega as f64 / self.total as f64
    }

    pub fn undecided_mass(&self) -> f64 {
        self.undecided as f64 / self.total as f64
    }

    /// `(depth, word, count)` rows; digits are joined by `.`.
    pub fn rows(&self) -> Vec<(u32, String, u64)> {
        self.counts
            .iter()
            .map(|(w, &c)| {
                let word = w.iter().map(u32::to_string).collect::<Vec<_>>().join(".");
                (self.depth, word, c)
            })
            .collect()
    }

    /// Merges counts of another run over the same configuration.
    pub fn merge(&mut self, other: &CylinderHistogram) -> Result<()> {
        if (self.factor, self.depth, self.lo, self.hi) != (other.factor, other.depth, other.lo, other.hi) {
            return Err(Error::InvalidParameter("histograms have different shapes".into()));
        }
        for (w, &c) in &other.counts {
            *self.counts.entry(w.clone()).or_insert(0) += c;
        }
        for (w, &c) in &other.extended {
            *self.extended.entry(w.clone()).or_insert(0) += c;
        }
        self.omega += other.omega;
        self.undecided += other.undecided;
        self.total += other.total;
        Ok(())
    }
}

/// Window `[lo, hi)` wide enough that every atom maps `[0, depth)`-cylinders
/// to known words.
fn window(measure: &Measure, j: usize, depth: u32) -> (i64, i64) {
    let shifts = measure.atoms().iter().map(|g| g.factor(j).shift());
    let max_up = shifts.clone().max().unwrap_or(0).max(0);
    let max_down = (-shifts.min().unwrap_or(0)).max(0);
    (-max_up, depth as i64 + max_down)
}

/// Empirical hitting measure on depth-`params.depth` cylinders, per factor.
pub fn hitting_histogram(measure: &Measure, params: &WalkParams) -> Result<Vec<CylinderHistogram>> {
    let depth = params.depth;
    if depth == 0 || depth > MAX_DEPTH {
        return Err(Error::InvalidParameter(format!("depth must be in 1..={MAX_DEPTH}, got {depth}")));
    }
    if params.n <= depth as usize {
        return Err(Error::InvalidParameter(format!("n = {} must exceed depth {depth}", params.n)));
    }
    let k = measure.num_factors();
    let windows: Vec<(i64, i64)> = (0..k).map(|j| window(measure, j, depth)).collect();
    let rule = VerdictRule { windows: windows.clone(), omega_depth: depth as i64 };
    let runs = run_trials(measure, params, &rule)?;
    Ok((0..k)
        .map(|j| {
            let (lo, hi) = windows[j];
            let mut h = CylinderHistogram {
                factor: j,
                depth,
                counts: BTreeMap::new(),
                omega: 0,
                undecided: 0,
                total: runs.len() as u64,
                lo,
                hi,
                extended: BTreeMap::new(),
            };
            for r in &runs {
                match r[j].verdict {
                    Verdict::Omega => h.omega += 1,
                    Verdict::Undecided => h.undecided += 1,
                    Verdict::RandomEnd => {
                        let w = r[j].word.as_ref().expect("random ends carry a word");
                        let start = (-lo) as usize;
                        *h.counts.entry(w[start..start + depth as usize].to_vec()).or_insert(0) += 1;
                        *h.extended.entry(w.clone()).or_insert(0) += 1;
                    }
                }
            }
            h
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationarityGap {
    pub factor: usize,
    pub depth: u32,
    /// Exact total variation as a fraction.
    pub tv_exact: String,
    pub tv_gap: f64,
    /// `3 · ½ Σ_c sqrt(p̂_c (1 − p̂_c) / N)` over the decided categories.
    pub tv_radius: f64,
    pub undecided_mass: f64,
    /// Set when more than 1% of the trials are undecided.
    pub flagged: bool,
}

/// Category of a decided trial: a cylinder word or `ω`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Cell {
    Word(Vec<u32>),
    Omega,
}

/// Total variation between `ν̂` and `Σ_g μ(g) · g_*ν̂` on depth-`D` cylinders,
/// both restricted to decided trials.
pub fn stationarity_gap(measure: &Measure, hist: &CylinderHistogram) -> Result<StationarityGap> {
    let j = hist.factor;
    if j >= measure.num_factors() {
        return Err(Error::InvalidParameter(format!("factor {j} out of range")));
    }
    let decided = hist.decided();
    if decided == 0 {
        return Err(Error::InvalidParameter("no decided trials".into()));
    }
    let depth = hist.depth as i64;
    let alphabet = measure.alphabets()[j];
    let n_dec = BigRational::from_integer(BigInt::from(decided));
    let mut observed: BTreeMap<Cell, BigRational> = BTreeMap::new();
    for (w, &c) in &hist.counts {
        observed.insert(Cell::Word(w.clone()), BigRational::from_integer(c.into()) / &n_dec);
    }
    if hist.omega > 0 {
        observed.insert(Cell::Omega, BigRational::from_integer(hist.omega.into()) / &n_dec);
    }
    let mut pushed: BTreeMap<Cell, BigRational> = BTreeMap::new();
    for (g, wt) in measure.atoms().iter().zip(measure.weights()) {
        let g = g.factor(j);
        for (ext, &c) in &hist.extended {
            let word: Vec<u32> = (0..depth)
                .map(|i| {
                    let src = i - g.shift() - hist.lo;
                    debug_assert!(src >= 0 && (src as usize) < ext.len());
                    alphabet.add_digit(ext[src as usize], g.translation().get(i))
                })
                .collect();
            *pushed.entry(Cell::Word(word)).or_insert_with(BigRational::zero) +=
                wt * BigRational::from_integer(c.into()) / &n_dec;
        }
        if hist.omega > 0 {
            *pushed.entry(Cell::Omega).or_insert_with(BigRational::zero) +=
                wt * BigRational::from_integer(hist.omega.into()) / &n_dec;
        }
    }
    let zero = BigRational::zero();
    let cells: std::collections::BTreeSet<&Cell> = observed.keys().chain(pushed.keys()).collect();
    let tv: BigRational = cells
        .iter()
        .map(|c| (observed.get(c).unwrap_or(&zero) - pushed.get(c).unwrap_or(&zero)).abs())
        .sum::<BigRational>()
        / BigRational::from_integer(2.into());
    let n = decided as f64;
    let radius = 1.5
        * observed
            .values()
            .map(|p| {
                let p = p.to_f64().unwrap_or(0.0);
                (p * (1.0 - p) / n).sqrt()
            })
            .sum::<f64>();
    Ok(StationarityGap {
        factor: j,
        depth: hist.depth,
        tv_exact: tv.to_string(),
        tv_gap: tv.to_f64().unwrap_or(f64::NAN),
        tv_radius: radius,
        undecided_mass: hist.undecided_mass(),
        flagged: hist.undecided * 100 > hist.total,
    })
}

/// Anchors `(o_j u_j)_{⌊n |m1(μ_j)|⌋}` of the gauge centred on `u` at time `n`.
///
/// Positive-drift factors walk along the ray toward `u_j`, negative-drift
/// factors along the ray toward `ω`, and zero-drift factors stay at `o_j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TemperateGaugeSpec {
    anchors: Vec<Vertex>,
}

impl TemperateGaugeSpec {
    pub fn new(u: &BoundaryPoint, n: u64, drifts: &[BigRational]) -> Result<Self> {
        if u.factors().len() != drifts.len() {
            return Err(Error::FactorCount { expected: drifts.len(), got: u.factors().len() });
        }
        let anchors = u
            .factors()
            .iter()
            .zip(drifts)
            .map(|(end, m1)| {
                let o = Vertex::root(end.alphabet());
                let steps = (m1.abs() * BigRational::from_integer(n.into())).floor();
                let steps = steps.to_integer().to_u64().ok_or(Error::Overflow("anchor index"))?;
                if m1.is_positive() {
                    ray_vertex(end, steps, &o)
                } else if m1.is_negative() {
                    ray_vertex(&End::Omega(end.alphabet()), steps, &o)
                } else {
                    Ok(o)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { anchors })
    }

    pub fn from_anchors(anchors: Vec<Vertex>) -> Self {
        Self { anchors }
    }

    pub fn anchors(&self) -> &[Vertex] {
        &self.anchors
    }

    /// Element mapping each root `o_j` to the anchor, `(level; residue)`.
    pub fn approximation(&self) -> ProductElem {
        ProductElem::new(
            self.anchors
                .iter()
                .map(|a| AffineElem::new(a.level(), a.residue().clone()))
                .collect(),
        )
    }
}

/// `Σ_i d(anchor_i, g_i o_i)`.
pub fn gauge_value(g: &ProductElem, spec: &TemperateGaugeSpec) -> Result<u64> {
    if g.len() != spec.anchors.len() {
        return Err(Error::FactorCount { expected: spec.anchors.len(), got: g.len() });
    }
    g.factors()
        .iter()
        .zip(&spec.anchors)
        .map(|(x, a)| a.distance(&x.act_root()))
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
}

/// Per trial and grid point: `(gauge_value(R_n), |R_n⁻¹ Π_n|_P)` with both
/// centred on the limit point estimated from the same path run to `2n`.
fn anchored_distances(measure: &Measure, n_grid: &[usize], trials: usize, master_seed: u64) -> Result<Vec<Vec<(u64, u64)>>> {
    use rayon::prelude::*;
    if n_grid.is_empty() || n_grid.contains(&0) || trials == 0 {
        return Err(Error::InvalidParameter("grid points and trials must be positive".into()));
    }
    let n_max = *n_grid.iter().max().expect("non-empty");
    let k = measure.num_factors();
    let drifts = measure.drifts();
    let s_min: Vec<i64> = (0..k).map(|j| measure.min_translation_index(j)).collect();
    (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let traj = run_trajectory(measure, 2 * n_max, trial_seed(master_seed, t))?;
            let wanted: HashSet<usize> = n_grid.iter().flat_map(|&n| [n, 2 * n]).collect();
            let mut levels = vec![Vec::with_capacity(2 * n_max + 1); k];
            let mut snaps = BTreeMap::new();
            traj.replay(|m, r| {
                for (j, l) in levels.iter_mut().enumerate() {
                    l.push(r.factor(j).shift());
                }
                if wanted.contains(&m) {
                    snaps.insert(m, r.clone());
                }
            });
            n_grid
                .iter()
                .map(|&n| {
                    let rn = &snaps[&n];
                    let r2n = &snaps[&(2 * n)];
                    let ends = (0..k)
                        .map(|j| {
                            let alphabet: Alphabet = measure.alphabets()[j];
                            if drifts[j].is_positive() {
                                let low = *levels[j][n..=2 * n].iter().min().expect("non-empty");
                                let frozen: Digits = r2n.factor(j).translation().truncate_below(low + s_min[j]);
                                End::Stream(Stream::finite(&frozen))
                            } else {
                                End::Omega(alphabet)
                            }
                        })
                        .collect();
                    let spec = TemperateGaugeSpec::new(&BoundaryPoint(ends), n as u64, &drifts)?;
                    let gv = gauge_value(rn, &spec)?;
                    let gap = rn.inverse().compose(&spec.approximation())?.gauge();
                    Ok((gv, gap))
                })
                .collect()
        })
        .collect()
}

fn series(values: &[Vec<(u64, u64)>], n_grid: &[usize], pick: impl Fn((u64, u64)) -> u64) -> Vec<SeriesPoint> {
    n_grid
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let xs: Vec<f64> = values.iter().map(|v| pick(v[i]) as f64 / n as f64).collect();
            let (mean, stderr) = mean_stderr(&xs);
            SeriesPoint { n, mean, stderr }
        })
        .collect()
}

/// Mean of `(1/n)·|R_n|_{A^{(n)}(û)}` over trials for each `n` in the grid.
pub fn gauge_sublinearity(measure: &Measure, n_grid: &[usize], trials: usize, master_seed: u64) -> Result<Vec<SeriesPoint>> {
    let values = anchored_distances(measure, n_grid, trials, master_seed)?;
    Ok(series(&values, n_grid, |v| v.0))
}

/// Mean of `(1/n)·|R_n⁻¹ Π_n(û)|_P` over trials for each `n` in the grid.
pub fn approximation_gap(measure: &Measure, n_grid: &[usize], trials: usize, master_seed: u64) -> Result<Vec<SeriesPoint>> {
    let values = anchored_distances(measure, n_grid, trials, master_seed)?;
    Ok(series(&values, n_grid, |v| v.1))
}

/// Number of vertices `g·o` within distance `radius` of `center`, found by
/// enumerating affine elements `(n, b)` with `b` ranging over all digit
/// strings on the window that can matter.
pub fn ball_size_by_enumeration(center: &Vertex, radius: u32) -> u64 {
    let alphabet = center.alphabet();
    let q = alphabet.size() as u64;
    let a = center.level();
    let r = radius as i64;
    let base = center.residue().truncate_below(a - r);
    let mut seen = HashSet::new();
    for n in a - r..=a + r {
        let len = (n - (a - r)) as u32;
        for code in 0..q.pow(len) {
            let mut b = base.clone();
            let mut c = code;
            for i in 0..len as i64 {
                b.set(a - r + i, (c % q) as u32).expect("digit in range");
                c /= q;
            }
            let v = AffineElem::new(n, b).act_root();
            if v.distance(center).expect("same alphabet") <= radius as u64 {
                seen.insert(v);
            }
        }
    }
    seen.len() as u64
}

/// Sphere sizes `|{v : d(center, v) = r}|` for `r ≤ radius`, by enumeration.
fn sphere_sizes(center: &Vertex, radius: u32) -> Vec<u64> {
    let mut out = Vec::with_capacity(radius as usize + 1);
    let mut prev = 0;
    for r in 0..=radius {
        let b = ball_size_by_enumeration(center, r);
        out.push(b - prev);
        prev = b;
    }
    out
}

/// Number of tuples `(v_i)` with `Σ_i d(anchor_i, v_i) ≤ radius`.
pub fn gauge_ball_size(spec: &TemperateGaugeSpec, radius: u32) -> u64 {
    let mut conv = vec![1u64];
    for a in spec.anchors() {
        let s = sphere_sizes(a, radius);
        let mut next = vec![0u64; radius as usize + 1];
        for (i, &x) in conv.iter().enumerate() {
            for (j, &y) in s.iter().enumerate() {
                if i + j <= radius as usize {
                    next[i + j] += x * y;
                }
            }
        }
        conv = next;
    }
    conv.iter().sum()
}

/// `1 + (q+1)(q^r − 1)/(q − 1)`.
pub fn tree_ball_size(q: u64, radius: u32) -> u64 {
    1 + (q + 1) * (q.pow(radius) - 1) / (q - 1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrivialityReport {
    pub trivial: bool,
    pub drifts: Vec<String>,
    pub explanation: String,
}

/// The boundary is trivial iff every factor drift is `≤ 0`. Requires the
/// support not to be fully exceptional.
pub fn triviality_check(measure: &Measure) -> Result<TrivialityReport> {
    if !scale::transience_hypothesis(measure) {
        return Err(Error::Hypothesis("fully exceptional support".into()));
    }
    let drifts = measure.drifts();
    let trivial = drifts.iter().all(|d| !d.is_positive());
    let parts: Vec<String> = drifts
        .iter()
        .enumerate()
        .map(|(j, d)| format!("m1(mu_{j}) = {d}"))
        .collect();
    let explanation = if trivial {
        format!("{}; no factor has positive drift", parts.join(", "))
    } else {
        format!("{}; a positive-drift factor converges to a random end", parts.join(", "))
    };
    Ok(TrivialityReport { trivial, drifts: drifts.iter().map(ToString::to_string).collect(), explanation })
}

//! Inequalities between divergences of mixtures: coarse-graining lower
//! bounds, weight-based upper bounds, extended KL for unnormalized
//! mixtures, and identities for ε-mixtures of two distributions.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::density::{common_atoms, log_sum_exp, Blend, Density, MeasureKind};
use crate::divergence::{
    exact_fdiv, fdiv, fdiv_pmf, kl_pmf, mc_estimate_kl_extended, tv_pmf, Evaluation, FGenerator,
};
use crate::error::{Error, Result};
use crate::mixture::{FiniteMixture, WMixture, WeightVector};
use crate::stats::{chunk_rng, derive_seed, ext_float, map_chunks, Estimate, Moments};

/// Tolerance used for inequalities between exactly computed quantities.
pub const EXACT_SLACK: f64 = 1e-12;
/// Width, in combined standard errors, of the slack granted to Monte-Carlo
/// sides of an inequality.
pub const MC_SIGMAS: f64 = 4.0;

/// One checked inequality `lhs <= rhs + slack`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InequalityRecord {
    pub name: String,
    #[serde(with = "ext_float")]
    pub lhs: f64,
    #[serde(with = "ext_float")]
    pub rhs: f64,
    #[serde(with = "ext_float")]
    pub slack: f64,
    pub holds: bool,
}

impl InequalityRecord {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64, slack: f64) -> Self {
        let holds = lhs <= rhs + slack || lhs == rhs;
        InequalityRecord {
            name: name.into(),
            lhs,
            rhs,
            slack,
            holds,
        }
    }

    /// `lhs <= rhs` between two estimates, with slack from their stderrs
    /// (or [`EXACT_SLACK`] when both are exact).
    pub fn between(name: impl Into<String>, lhs: Estimate, rhs: Estimate) -> Self {
        InequalityRecord::new(name, lhs.value, rhs.value, slack_for(&[lhs, rhs]))
    }
}

/// Slack for an inequality whose sides carry the given estimates.
pub fn slack_for(parts: &[Estimate]) -> f64 {
    let se = parts
        .iter()
        .map(|e| e.stderr * e.stderr)
        .sum::<f64>()
        .sqrt();
    if se == 0.0 {
        EXACT_SLACK
    } else {
        MC_SIGMAS * se
    }
}

/// Result of [`convex_sum_inequality_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvexSumCheck {
    /// `Σ a_i f(b_i / a_i)`.
    pub lhs: f64,
    /// `a f(b / a)` with `a = Σ a_i`, `b = Σ b_i`.
    pub rhs: f64,
    pub holds: bool,
}

/// Generalized log-sum inequality `Σ a_i f(b_i/a_i) >= a f(b/a)`.
pub fn convex_sum_inequality_check(a: &[f64], b: &[f64], f: &FGenerator) -> Result<ConvexSumCheck> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.iter().chain(b).any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(Error::InvalidArgument("entries must be positive".into()));
    }
    let lhs: f64 = a.iter().zip(b).map(|(x, y)| x * f.eval(y / x)).sum();
    let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    let rhs = sa * f.eval(sb / sa);
    Ok(ConvexSumCheck {
        lhs,
        rhs,
        holds: lhs >= rhs - EXACT_SLACK * (1.0 + rhs.abs()),
    })
}

/// A partition of the support into `h >= 2` bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LumpingPartition {
    /// Bins `(-inf, e_1], (e_1, e_2], ..., (e_{h-1}, inf)`.
    Edges(Vec<f64>),
    /// Bin index for each atom of a finite alphabet.
    Map(Vec<usize>),
}

impl LumpingPartition {
    pub fn edges(edges: Vec<f64>) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::InvalidPartition("need at least one edge".into()));
        }
        if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidPartition(
                "edges must be finite and strictly increasing".into(),
            ));
        }
        Ok(LumpingPartition::Edges(edges))
    }

    pub fn map(map: Vec<usize>) -> Result<Self> {
        let h = map.iter().max().map_or(0, |m| m + 1);
        if h < 2 {
            return Err(Error::InvalidPartition("need at least two bins".into()));
        }
        let mut seen = vec![false; h];
        for &b in &map {
            seen[b] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidPartition("bin map must be surjective".into()));
        }
        Ok(LumpingPartition::Map(map))
    }

    /// `h` bins: two unbounded tails plus `h - 2` equal-width bins on `[lo, hi]`.
    pub fn uniform(lo: f64, hi: f64, h: usize) -> Result<Self> {
        if h < 3 || lo >= hi || lo.is_nan() || hi.is_nan() {
            return Err(Error::InvalidPartition(
                "uniform bins need h >= 3 and lo < hi".into(),
            ));
        }
        let n = h - 2;
        LumpingPartition::edges(
            (0..=n)
                .map(|i| lo + (hi - lo) * i as f64 / n as f64)
                .collect(),
        )
    }

    /// `h` bins of equal mass under `p`, located by bisection on its CDF.
    pub fn quantile<P: Density>(p: &P, h: usize) -> Result<Self> {
        if h < 2 {
            return Err(Error::InvalidPartition("need at least two bins".into()));
        }
        if let Some(atoms) = p.atoms() {
            let mut acc = 0.0;
            let map = atoms
                .iter()
                .map(|m| {
                    let bin = ((acc * h as f64).floor() as usize).min(h - 1);
                    acc += m;
                    bin
                })
                .collect();
            return LumpingPartition::map(map);
        }
        let (mut lo, mut hi) = (-1.0, 1.0);
        while p.cdf(lo) > 0.5 / h as f64 {
            lo *= 2.0;
        }
        while p.cdf(hi) < 1.0 - 0.5 / h as f64 {
            hi *= 2.0;
        }
        let edges: Vec<f64> = (1..h)
            .map(|i| {
                let target = i as f64 / h as f64;
                let (mut a, mut b) = (lo, hi);
                for _ in 0..200 {
                    let mid = 0.5 * (a + b);
                    if p.cdf(mid) < target {
                        a = mid;
                    } else {
                        b = mid;
                    }
                }
                0.5 * (a + b)
            })
            .collect();
        LumpingPartition::edges(edges.into_iter().dedup().collect())
    }

    pub fn bins(&self) -> usize {
        match self {
            LumpingPartition::Edges(e) => e.len() + 1,
            LumpingPartition::Map(m) => m.iter().max().map_or(0, |x| x + 1),
        }
    }

    /// Merges bin `i` with bin `i + 1`.
    pub fn merge(&self, i: usize) -> Result<Self> {
        if i + 1 >= self.bins() || self.bins() <= 2 {
            return Err(Error::InvalidPartition(
                "cannot merge below two bins".into(),
            ));
        }
        Ok(match self {
            LumpingPartition::Edges(e) => {
                let mut e = e.clone();
                e.remove(i);
                LumpingPartition::Edges(e)
            }
            LumpingPartition::Map(m) => {
                LumpingPartition::Map(m.iter().map(|&b| if b > i { b - 1 } else { b }).collect())
            }
        })
    }

    /// Bin masses of `p`.
    pub fn lump<P: Density>(&self, p: &P) -> Result<Vec<f64>> {
        match self {
            LumpingPartition::Edges(edges) => {
                let n = edges.len();
                let mut out = Vec::with_capacity(n + 1);
                out.push(p.cdf(edges[0]));
                for w in edges.windows(2) {
                    out.push(p.interval_mass(w[0], w[1]));
                }
                out.push(p.sf(edges[n - 1]));
                Ok(out)
            }
            LumpingPartition::Map(map) => {
                let atoms = p.atoms().ok_or_else(|| {
                    Error::UnsupportedSupport("bin maps need a finite alphabet".into())
                })?;
                if atoms.len() > map.len() {
                    return Err(Error::InvalidPartition(
                        "bin map does not cover the alphabet".into(),
                    ));
                }
                let mut out = vec![0.0; self.bins()];
                for (a, m) in atoms.iter().enumerate() {
                    out[map[a]] += m;
                }
                Ok(out)
            }
        }
    }
}

/// `I_f(p̃ : q̃)` for the lumped distributions, a lower bound on `I_f(p:q)`.
pub fn lumping_lower_bound<P: Density, Q: Density>(
    p: &P,
    q: &Q,
    partition: &LumpingPartition,
    f: &FGenerator,
) -> Result<f64> {
    if p.measure() != q.measure() {
        return Err(Error::UnsupportedSupport(
            "p and q must share a base measure".into(),
        ));
    }
    Ok(fdiv_pmf(&partition.lump(p)?, &partition.lump(q)?, f))
}

/// `KL(w:w') + Σ w_i KL(p_i : p'_i)` for mixtures paired index by index.
pub fn mixture_upper_bound_kl(m: &FiniteMixture, m2: &FiniteMixture) -> Result<f64> {
    paired_bound(m, m2, &(0..m.len()).collect::<Vec<_>>())
}

fn paired_bound(m: &FiniteMixture, m2: &FiniteMixture, perm: &[usize]) -> Result<f64> {
    if m.len() != m2.len() {
        return Err(Error::DimensionMismatch {
            expected: m.len(),
            got: m2.len(),
        });
    }
    let w = m.weights.as_slice();
    let sw: Vec<f64> = perm.iter().map(|&i| w[i]).collect();
    let mut total = kl_pmf(&sw, m2.weights.as_slice());
    for (i, &s) in perm.iter().enumerate() {
        total += w[s] * m.components[s].pairwise_kl(&m2.components[i])?;
    }
    Ok(total)
}

/// Result of [`permutation_strengthened_bound`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PermutationBound {
    #[serde(with = "ext_float")]
    pub best_bound: f64,
    /// `best_permutation[i]` is the component of `m` paired with `m2[i]`.
    pub best_permutation: Vec<usize>,
    #[serde(with = "ext_float")]
    pub identity_bound: f64,
}

/// Largest `k` for which all `k!` pairings are searched.
pub const PERMUTATION_LIMIT: usize = 8;

/// Minimizes the paired upper bound over all relabelings of `m`.
pub fn permutation_strengthened_bound(
    m: &FiniteMixture,
    m2: &FiniteMixture,
    max_k: usize,
) -> Result<PermutationBound> {
    let k = m.len();
    let cap = max_k.min(PERMUTATION_LIMIT);
    if k > cap {
        return Err(Error::TooManyComponents { k, max: cap });
    }
    let identity: Vec<usize> = (0..k).collect();
    let identity_bound = paired_bound(m, m2, &identity)?;
    let mut best = (identity_bound, identity);
    for perm in (0..k).permutations(k) {
        let b = paired_bound(m, m2, &perm)?;
        if b < best.0 {
            best = (b, perm);
        }
    }
    Ok(PermutationBound {
        best_bound: best.0,
        best_permutation: best.1,
        identity_bound,
    })
}

/// `Σ_ij w_i w'_j I_f(p_i : p'_j)`, an upper bound on `I_f(m:m')` by joint
/// convexity. Pairwise terms are closed-form KL or exact on finite alphabets.
pub fn joint_convexity_bound(m: &FiniteMixture, m2: &FiniteMixture, f: &FGenerator) -> Result<f64> {
    let mut total = 0.0;
    for (wi, pi) in m.weights.as_slice().iter().zip(&m.components) {
        for (wj, pj) in m2.weights.as_slice().iter().zip(&m2.components) {
            let d = if pi.measure() == MeasureKind::Counting {
                exact_fdiv(pi, pj, f)?
            } else if *f == FGenerator::Kl {
                pi.pairwise_kl(pj)?
            } else {
                return Err(Error::UnsupportedPair(pi.kind_name(), pj.kind_name()));
            };
            total += wi * wj * d;
        }
    }
    Ok(total)
}

/// Bounds on `I_f(w:w')` from the weights alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightBoundSuite {
    #[serde(with = "ext_float")]
    pub fdiv_exact: f64,
    /// `ln(max w / min w')`; KL only.
    pub log_maxmin_bound: Option<f64>,
    /// `max_i f(w'_i / w_i)`.
    #[serde(with = "ext_float")]
    pub max_generator_bound: f64,
    /// `-ln ε` with `ε = min w'`; KL only.
    pub fat_bound: Option<f64>,
}

impl WeightBoundSuite {
    pub fn records(&self) -> Vec<InequalityRecord> {
        let mut out = vec![InequalityRecord::new(
            "fdiv_le_max_generator",
            self.fdiv_exact,
            self.max_generator_bound,
            EXACT_SLACK,
        )];
        if let Some(b) = self.log_maxmin_bound {
            out.push(InequalityRecord::new(
                "kl_le_log_max_over_min",
                self.fdiv_exact,
                b,
                EXACT_SLACK,
            ));
        }
        if let Some(b) = self.fat_bound {
            out.push(InequalityRecord::new(
                "kl_le_neg_log_min_weight",
                self.fdiv_exact,
                b,
                EXACT_SLACK,
            ));
        }
        out
    }

    pub fn holds(&self) -> bool {
        self.records().iter().all(|r| r.holds)
    }
}

pub fn weight_bound_suite(
    w: &WeightVector,
    w2: &WeightVector,
    f: &FGenerator,
) -> Result<WeightBoundSuite> {
    if w.len() != w2.len() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            got: w2.len(),
        });
    }
    let fdiv_exact = fdiv_pmf(w.as_slice(), w2.as_slice(), f);
    let max_generator_bound = w
        .as_slice()
        .iter()
        .zip(w2.as_slice())
        .map(|(a, b)| f.eval(b / a))
        .fold(f64::NEG_INFINITY, f64::max);
    let is_kl = *f == FGenerator::Kl;
    Ok(WeightBoundSuite {
        fdiv_exact,
        log_maxmin_bound: is_kl.then(|| (w.max() / w2.min()).ln()),
        max_generator_bound,
        fat_bound: is_kl.then(|| -w2.min().ln()),
    })
}

/// `Σ w_i ln(w_i / w'_i) + w'_i - w_i` for positive, possibly unnormalized
/// weights; an upper bound on the extended KL between the unnormalized
/// mixtures `Σ w_i p_i` and `Σ w'_i p_i`.
pub fn extended_kl_unnormalized(wt: &[f64], wt2: &[f64]) -> Result<f64> {
    if wt.len() != wt2.len() {
        return Err(Error::DimensionMismatch {
            expected: wt.len(),
            got: wt2.len(),
        });
    }
    if wt.iter().chain(wt2).any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(Error::InvalidArgument("weights must be positive".into()));
    }
    Ok(wt
        .iter()
        .zip(wt2)
        .map(|(a, b)| a * (a / b).ln() + b - a)
        .sum())
}

/// Extended KL between `m` and `λ m` for a normalized `m`: `(λ-1) - ln λ`.
pub fn scaled_extended_kl(lambda: f64) -> f64 {
    (lambda - 1.0) - lambda.ln()
}

/// Monte-Carlo extended KL `∫ m̃ ln(m̃/m̃') + m̃' - m̃` between unnormalized
/// mixtures on `m`'s basis with total masses `mass` and `mass2`.
pub fn mc_extended_kl_unnormalized(
    m: &WMixture,
    mass: f64,
    m2: &WMixture,
    mass2: f64,
    s: usize,
    seed: u64,
) -> Result<Estimate> {
    let t =
        crate::divergence::sample_terms(m, m2, s, seed, crate::divergence::TAG_DRAWS, |lp, lq| {
            [lp - lq]
        })?;
    let e = t.estimate(0, s, seed);
    Ok(Estimate {
        value: mass * (e.value + (mass / mass2).ln()) + mass2 - mass,
        stderr: mass * e.stderr,
    })
}

/// Weights-only bracket on the Chernoff coefficient of two w-mixtures.
pub fn chernoff_weight_bounds(
    w: &WeightVector,
    w2: &WeightVector,
    alpha: f64,
) -> Result<(f64, f64)> {
    if !alpha.is_finite() || alpha == 0.0 {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    let lo = (w.min() / w2.max()).powf(alpha);
    let hi = (w.max() / w2.min()).powf(alpha);
    Ok(if alpha > 0.0 { (lo, hi) } else { (hi, lo) })
}

/// Two distributions and their ε-mixtures `m^ε(p,q) = (1-ε)p + εq` and
/// `m^ε(q,p) = (1-ε)q + εp`.
#[derive(Debug, Clone)]
pub struct EpsilonPair<P, Q> {
    pub p: P,
    pub q: Q,
    epsilon: f64,
}

impl<P: Density + Clone, Q: Density + Clone> EpsilonPair<P, Q> {
    pub fn new(p: P, q: Q, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::EpsilonOutOfRange(epsilon));
        }
        if p.measure() != q.measure() {
            return Err(Error::UnsupportedSupport(
                "p and q must share a base measure".into(),
            ));
        }
        Ok(EpsilonPair { p, q, epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `m^ε(p,q)`.
    pub fn forward(&self) -> Blend<P, Q> {
        Blend::new(self.p.clone(), self.q.clone(), self.epsilon)
    }

    /// `m^ε(q,p)`.
    pub fn backward(&self) -> Blend<Q, P> {
        Blend::new(self.q.clone(), self.p.clone(), self.epsilon)
    }

    /// `max(ε, 1-ε)`.
    pub fn big_c(&self) -> f64 {
        self.epsilon.max(1.0 - self.epsilon)
    }

    /// `min(ε, 1-ε)`.
    pub fn small_c(&self) -> f64 {
        self.epsilon.min(1.0 - self.epsilon)
    }
}

/// Draws `s` points from `r` and averages `φ(ln r, ln a, ln b)`.
fn reference_terms<R, A, B, T>(r: &R, a: &A, b: &B, s: usize, seed: u64, phi: T) -> Result<Estimate>
where
    R: Density,
    A: Density,
    B: Density,
    T: Fn(f64, f64, f64) -> f64 + Sync,
{
    if s < 2 {
        return Err(Error::TooFewSamples { min: 2, got: s });
    }
    let parts = map_chunks(s, |c, _, len| {
        let mut rng = chunk_rng(seed, crate::divergence::TAG_DRAWS, c);
        let mut m = Moments::default();
        let mut i = 0;
        while i < len {
            let x = r.sample(&mut rng);
            let lr = r.log_density(x);
            if lr == f64::NEG_INFINITY {
                continue;
            }
            m.push(phi(lr, a.log_density(x), b.log_density(x)));
            i += 1;
        }
        m
    });
    let m = Moments::merged(&parts);
    Ok(Estimate {
        value: m.mean,
        stderr: m.stderr(),
    })
}

/// `TV(a, b)` as `½ E_r[|a - b| / r]` under `r = (a + b)/2`.
fn tv_mc<A: Density + Clone, B: Density + Clone>(
    a: &A,
    b: &B,
    s: usize,
    seed: u64,
) -> Result<Estimate> {
    let r = Blend::new(a.clone(), b.clone(), 0.5);
    let e = reference_terms(&r, a, b, s, seed, |lr, la, lb| {
        ((la - lr).exp() - (lb - lr).exp()).abs()
    })?;
    Ok(Estimate {
        value: 0.5 * e.value,
        stderr: 0.5 * e.stderr,
    })
}

/// Result of [`tv_epsilon`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TvEpsilon {
    pub tv_eps: Estimate,
    pub tv_base: Estimate,
    /// `|tv_eps - |1-2ε| tv_base|`.
    pub identity_gap: Estimate,
}

/// Checks `TV(m^ε(p,q), m^ε(q,p)) = |1-2ε| TV(p,q)`. Under Monte Carlo the
/// two sides use independent draws.
pub fn tv_epsilon<P, Q>(pair: &EpsilonPair<P, Q>, eval: Evaluation) -> Result<TvEpsilon>
where
    P: Density + Clone,
    Q: Density + Clone,
{
    let (fw, bw) = (pair.forward(), pair.backward());
    let (tv_eps, tv_base) = match eval {
        Evaluation::Exact => {
            let (a, b) = common_atoms(&fw, &bw).ok_or(Error::ExactUnavailable)?;
            let (p, q) = common_atoms(&pair.p, &pair.q).ok_or(Error::ExactUnavailable)?;
            (
                Estimate::exact(tv_pmf(&a, &b)),
                Estimate::exact(tv_pmf(&p, &q)),
            )
        }
        Evaluation::MonteCarlo { samples, seed } => (
            tv_mc(&fw, &bw, samples, derive_seed(seed, 1))?,
            tv_mc(&pair.p, &pair.q, samples, derive_seed(seed, 2))?,
        ),
    };
    let c = (1.0 - 2.0 * pair.epsilon).abs();
    Ok(TvEpsilon {
        tv_eps,
        tv_base,
        identity_gap: Estimate {
            value: (tv_eps.value - c * tv_base.value).abs(),
            stderr: tv_eps.stderr.hypot(c * tv_base.stderr),
        },
    })
}

/// Result of [`kl_epsilon_bounds`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlEpsilon {
    /// `ln(c_ε / C_ε)`.
    pub lower: f64,
    /// `ln(C_ε / c_ε)`.
    pub upper: f64,
    /// `KL(m^ε(p,q) : m^ε(q,p))`.
    pub kl_eps: Estimate,
    /// The same quantity as the Bregman divergence `B_{F*}(ε : 1-ε)` of the
    /// order-1 family `p + η(q - p)`.
    pub bregman: Estimate,
}

impl KlEpsilon {
    pub fn records(&self) -> Vec<InequalityRecord> {
        let slack = slack_for(&[self.kl_eps]);
        vec![
            InequalityRecord::new("kl_eps_le_log_ratio", self.kl_eps.value, self.upper, slack),
            InequalityRecord::new(
                "log_inverse_ratio_le_kl_eps",
                self.lower,
                self.kl_eps.value,
                slack,
            ),
        ]
    }
}

fn ln_blend(eta: f64, lp: f64, lq: f64) -> f64 {
    log_sum_exp(&[(1.0 - eta).ln() + lp, eta.ln() + lq])
}

pub fn kl_epsilon_bounds<P, Q>(pair: &EpsilonPair<P, Q>, eval: Evaluation) -> Result<KlEpsilon>
where
    P: Density + Clone,
    Q: Density + Clone,
{
    let e = pair.epsilon;
    let lower = (pair.small_c() / pair.big_c()).ln();
    let upper = -lower;
    let (fw, bw) = (pair.forward(), pair.backward());
    let (kl_eps, bregman) = match eval {
        Evaluation::Exact => {
            let (p, q) = common_atoms(&pair.p, &pair.q).ok_or(Error::ExactUnavailable)?;
            let (a, b) = common_atoms(&fw, &bw).ok_or(Error::ExactUnavailable)?;
            let blend = |eta: f64| -> Vec<f64> {
                p.iter()
                    .zip(&q)
                    .map(|(x, y)| (1.0 - eta) * x + eta * y)
                    .collect()
            };
            let fstar = |eta: f64| -> f64 {
                blend(eta)
                    .iter()
                    .filter(|v| **v > 0.0)
                    .map(|v| v * v.ln())
                    .sum()
            };
            let grad = |eta: f64| -> f64 {
                blend(eta)
                    .iter()
                    .zip(p.iter().zip(&q))
                    .filter(|(v, _)| **v > 0.0)
                    .map(|(v, (x, y))| (y - x) * (v.ln() + 1.0))
                    .sum()
            };
            let b12 = fstar(e) - fstar(1.0 - e) - (e - (1.0 - e)) * grad(1.0 - e);
            (Estimate::exact(kl_pmf(&a, &b)), Estimate::exact(b12))
        }
        Evaluation::MonteCarlo { samples, seed } => {
            let kl: Estimate =
                mc_estimate_kl_extended(&fw, &bw, samples, derive_seed(seed, 1))?.into();
            // F*(η) = (1-η) E_p[ln m_η] + η E_q[ln m_η] and
            // F*'(η) = E_q[ln m_η] - E_p[ln m_η], on shared draws from p and q.
            let term = |from_q: bool| {
                move |_: f64, lp: f64, lq: f64| {
                    let (la, lb) = (ln_blend(e, lp, lq), ln_blend(1.0 - e, lp, lq));
                    let (wa, wb, g) = if from_q {
                        (e, 1.0 - e, 1.0)
                    } else {
                        (1.0 - e, e, -1.0)
                    };
                    wa * la - wb * lb - (2.0 * e - 1.0) * g * lb
                }
            };
            let from_p = reference_terms(
                &pair.p,
                &pair.p,
                &pair.q,
                samples,
                derive_seed(seed, 2),
                term(false),
            )?;
            let from_q = reference_terms(
                &pair.q,
                &pair.p,
                &pair.q,
                samples,
                derive_seed(seed, 3),
                term(true),
            )?;
            let b = Estimate {
                value: from_p.value + from_q.value,
                stderr: from_p.stderr.hypot(from_q.stderr),
            };
            (kl, b)
        }
    };
    Ok(KlEpsilon {
        lower,
        upper,
        kl_eps,
        bregman,
    })
}

/// Result of [`fdiv_epsilon_inequalities`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdivEpsilon {
    /// `I_f(m^ε(p,q) : m^ε(q,p))`.
    pub if_eps: Estimate,
    /// `(1-ε) I_f(p:q) + ε I_f(q:p)`.
    pub bound1: Estimate,
    /// `(1-ε) f(ε/(1-ε)) + ε f((1-ε)/ε)`.
    pub bound2: f64,
    pub holds: bool,
}

impl FdivEpsilon {
    pub fn records(&self) -> Vec<InequalityRecord> {
        vec![
            InequalityRecord::between("if_eps_le_mixed_divergences", self.if_eps, self.bound1),
            InequalityRecord::between(
                "if_eps_le_generator_bound",
                self.if_eps,
                Estimate::exact(self.bound2),
            ),
        ]
    }
}

pub fn fdiv_epsilon_inequalities<P, Q>(
    pair: &EpsilonPair<P, Q>,
    f: &FGenerator,
    eval: Evaluation,
) -> Result<FdivEpsilon>
where
    P: Density + Clone,
    Q: Density + Clone,
{
    let e = pair.epsilon;
    let sub = |tag: u64| match eval {
        Evaluation::Exact => Evaluation::Exact,
        Evaluation::MonteCarlo { samples, seed } => Evaluation::MonteCarlo {
            samples,
            seed: derive_seed(seed, tag),
        },
    };
    let if_eps = fdiv(&pair.forward(), &pair.backward(), f, sub(1))?;
    let pq = fdiv(&pair.p, &pair.q, f, sub(2))?;
    let qp = fdiv(&pair.q, &pair.p, f, sub(3))?;
    let bound1 = Estimate {
        value: (1.0 - e) * pq.value + e * qp.value,
        stderr: ((1.0 - e) * pq.stderr).hypot(e * qp.stderr),
    };
    let bound2 = (1.0 - e) * f.eval(e / (1.0 - e)) + e * f.eval((1.0 - e) / e);
    let mut out = FdivEpsilon {
        if_eps,
        bound1,
        bound2,
        holds: false,
    };
    out.holds = out.records().iter().all(|r| r.holds);
    Ok(out)
}

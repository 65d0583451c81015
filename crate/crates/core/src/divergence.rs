//! f-divergences: a small algebra of convex generators, exact evaluation on
//! finite alphabets and Monte-Carlo estimation with confidence intervals.

use std::f64::consts::{FRAC_1_SQRT_2, LN_2};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::density::{common_atoms, Density};
use crate::error::{Error, Result};
use crate::mixture::WeightVector;
use crate::stats::{chunk_rng, map_chunks, Estimate, McEstimate, Moments};

/// Convex generator `f` with `f(1) = 0`, built from the catalog and closed
/// under duality, symmetrization, extension and affine shifts.
#[derive(Debug, Clone, PartialEq)]
pub enum FGenerator {
    TotalVariation,
    SquaredHellinger,
    PearsonChi2,
    NeymanChi2,
    Kl,
    ReverseKl,
    SquaredTriangular,
    SquaredPerimeter,
    Alpha(f64),
    JensenShannon,
    /// `u f(1/u)`.
    Dual(Box<FGenerator>),
    /// `(f(u) + u f(1/u)) / 2`.
    Symmetrized(Box<FGenerator>),
    /// `f(u) - f'(1) (u - 1)`.
    Extended(Box<FGenerator>),
    /// `f(u) + λ (u - 1)`.
    Shifted(Box<FGenerator>, f64),
}

/// Names accepted by [`generator_catalog`] (`alpha` takes a parameter).
pub const CATALOG_NAMES: [&str; 10] = [
    "total_variation",
    "squared_hellinger",
    "pearson_chi2",
    "neyman_chi2",
    "kl",
    "reverse_kl",
    "squared_triangular",
    "squared_perimeter",
    "alpha",
    "jensen_shannon",
];

fn xlogx(u: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        u * u.ln()
    }
}

fn dual_eval(f: &FGenerator, u: f64) -> f64 {
    if u.is_infinite() {
        f.limit_at_0() * u
    } else {
        u * f.eval(1.0 / u)
    }
}

impl FGenerator {
    pub fn alpha(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha.abs() < 1.0) {
            return Err(Error::InvalidGeneratorParameter(format!(
                "alpha = {alpha} must lie in (-1, 1)"
            )));
        }
        Ok(FGenerator::Alpha(alpha))
    }

    pub fn dual(self) -> Self {
        FGenerator::Dual(Box::new(self))
    }

    pub fn symmetrize(self) -> Self {
        FGenerator::Symmetrized(Box::new(self))
    }

    pub fn extend(self) -> Result<Self> {
        if self.deriv_at_1().is_none() {
            return Err(Error::NonDifferentiableAt1(self.name()));
        }
        Ok(FGenerator::Extended(Box::new(self)))
    }

    pub fn shift(self, lambda: f64) -> Self {
        FGenerator::Shifted(Box::new(self), lambda)
    }

    pub fn name(&self) -> String {
        self.to_string()
    }

    /// `f(u)` for `u >= 0`; at `u = 0` this is the right limit `f(0+)`.
    pub fn eval(&self, u: f64) -> f64 {
        if u == 0.0 {
            return self.limit_at_0();
        }
        use FGenerator::*;
        match self {
            TotalVariation => 0.5 * (u - 1.0).abs(),
            SquaredHellinger => {
                let d = u.sqrt() - 1.0;
                d * d
            }
            PearsonChi2 => (u - 1.0) * (u - 1.0),
            NeymanChi2 => (1.0 - u) * (1.0 - u) / u,
            Kl => -u.ln(),
            ReverseKl => u * u.ln(),
            SquaredTriangular => (u - 1.0) * (u - 1.0) / (2.0 * (1.0 + u)),
            SquaredPerimeter => 1.0f64.hypot(u) - (1.0 + u) * FRAC_1_SQRT_2,
            Alpha(a) => -4.0 / (1.0 - a * a) * ((0.5 * (1.0 + a)) * u.ln()).exp_m1(),
            JensenShannon => -(u + 1.0) * ((1.0 + u) / 2.0).ln() + xlogx(u),
            Dual(f) => dual_eval(f, u),
            Symmetrized(f) => 0.5 * (f.eval(u) + dual_eval(f, u)),
            Extended(f) => f.eval(u) - f.deriv_at_1().unwrap_or(0.0) * (u - 1.0),
            Shifted(f, l) => f.eval(u) + l * (u - 1.0),
        }
    }

    /// `f'(1)`, or `None` when `f` has a kink at 1.
    pub fn deriv_at_1(&self) -> Option<f64> {
        use FGenerator::*;
        match self {
            TotalVariation => None,
            SquaredHellinger | PearsonChi2 | NeymanChi2 | SquaredTriangular | SquaredPerimeter
            | JensenShannon => Some(0.0),
            Kl => Some(-1.0),
            ReverseKl => Some(1.0),
            Alpha(a) => Some(-2.0 / (1.0 - a)),
            Dual(f) => f.deriv_at_1().map(|d| -d),
            Symmetrized(f) => f.deriv_at_1().map(|_| 0.0),
            Extended(_) => Some(0.0),
            Shifted(f, l) => f.deriv_at_1().map(|d| d + l),
        }
    }

    /// `f(0+)`, possibly `+inf`.
    pub fn limit_at_0(&self) -> f64 {
        use FGenerator::*;
        match self {
            TotalVariation | SquaredTriangular => 0.5,
            SquaredHellinger | PearsonChi2 => 1.0,
            NeymanChi2 | Kl => f64::INFINITY,
            ReverseKl => 0.0,
            SquaredPerimeter => 1.0 - FRAC_1_SQRT_2,
            Alpha(a) => 4.0 / (1.0 - a * a),
            JensenShannon => LN_2,
            Dual(f) => f.limit_slope_at_inf(),
            Symmetrized(f) => 0.5 * (f.limit_at_0() + f.limit_slope_at_inf()),
            Extended(f) => f.limit_at_0() + f.deriv_at_1().unwrap_or(0.0),
            Shifted(f, l) => f.limit_at_0() - l,
        }
    }

    /// `lim_{ε→0} ε f(1/ε)`, possibly `+inf`.
    pub fn limit_slope_at_inf(&self) -> f64 {
        use FGenerator::*;
        match self {
            TotalVariation | SquaredTriangular => 0.5,
            SquaredHellinger | NeymanChi2 => 1.0,
            PearsonChi2 | ReverseKl => f64::INFINITY,
            Kl | Alpha(_) => 0.0,
            SquaredPerimeter => 1.0 - FRAC_1_SQRT_2,
            JensenShannon => LN_2,
            Dual(f) => f.limit_at_0(),
            Symmetrized(f) => 0.5 * (f.limit_at_0() + f.limit_slope_at_inf()),
            Extended(f) => f.limit_slope_at_inf() - f.deriv_at_1().unwrap_or(0.0),
            Shifted(f, l) => f.limit_slope_at_inf() + l,
        }
    }

    /// Checks `f(1) = 0` and midpoint convexity on a log-spaced grid over
    /// `[1e-6, 1e6]`, returning the worst violation found.
    pub fn check(&self) -> GeneratorCheck {
        let grid: Vec<f64> = (0..=120)
            .map(|i| 10f64.powf(-6.0 + 0.1 * i as f64))
            .collect();
        let vals: Vec<f64> = grid.iter().map(|&u| self.eval(u)).collect();
        let mut worst = 0.0f64;
        for i in 0..grid.len() {
            for j in i + 1..grid.len() {
                let avg = 0.5 * (vals[i] + vals[j]);
                let mid = self.eval(0.5 * (grid[i] + grid[j]));
                let excess = (mid - avg) / (1.0 + avg.abs());
                worst = worst.max(excess);
            }
        }
        GeneratorCheck {
            at_one: self.eval(1.0),
            worst_convexity_excess: worst,
        }
    }
}

/// Outcome of [`FGenerator::check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorCheck {
    pub at_one: f64,
    /// Largest `(f(mid) - avg) / (1 + |avg|)` over grid pairs.
    pub worst_convexity_excess: f64,
}

impl GeneratorCheck {
    pub fn holds(&self) -> bool {
        self.at_one.abs() <= 1e-14 && self.worst_convexity_excess <= 1e-10
    }
}

impl fmt::Display for FGenerator {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        use FGenerator::*;
        match self {
            TotalVariation => write!(out, "total_variation"),
            SquaredHellinger => write!(out, "squared_hellinger"),
            PearsonChi2 => write!(out, "pearson_chi2"),
            NeymanChi2 => write!(out, "neyman_chi2"),
            Kl => write!(out, "kl"),
            ReverseKl => write!(out, "reverse_kl"),
            SquaredTriangular => write!(out, "squared_triangular"),
            SquaredPerimeter => write!(out, "squared_perimeter"),
            Alpha(a) => write!(out, "alpha({a})"),
            JensenShannon => write!(out, "jensen_shannon"),
            Dual(f) => write!(out, "dual({f})"),
            Symmetrized(f) => write!(out, "symmetrize({f})"),
            Extended(f) => write!(out, "extend({f})"),
            Shifted(f, l) => write!(out, "shift({f},{l})"),
        }
    }
}

fn split_call(s: &str) -> Option<(&str, &str)> {
    let open = s.find('(')?;
    let inner = s.strip_suffix(')')?;
    Some((&s[..open], &inner[open + 1..]))
}

fn split_last_arg(s: &str) -> Option<(&str, &str)> {
    let mut depth = 0i32;
    let mut last = None;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => last = Some(i),
            _ => {}
        }
    }
    last.map(|i| (s[..i].trim(), s[i + 1..].trim()))
}

fn parse_number(s: &str, whole: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::InvalidGeneratorParameter(format!("bad number in {whole:?}")))
}

/// Looks up a generator by name. Besides the catalog names this accepts
/// `alpha(a)` and the composite forms `dual(g)`, `symmetrize(g)`,
/// `extend(g)` and `shift(g,λ)`.
pub fn generator_catalog(name: &str) -> Result<FGenerator> {
    let s = name.trim();
    use FGenerator::*;
    let simple = match s {
        "total_variation" => Some(TotalVariation),
        "squared_hellinger" => Some(SquaredHellinger),
        "pearson_chi2" => Some(PearsonChi2),
        "neyman_chi2" => Some(NeymanChi2),
        "kl" => Some(Kl),
        "reverse_kl" => Some(ReverseKl),
        "squared_triangular" => Some(SquaredTriangular),
        "squared_perimeter" => Some(SquaredPerimeter),
        "jensen_shannon" => Some(JensenShannon),
        _ => None,
    };
    if let Some(g) = simple {
        return Ok(g);
    }
    let (head, arg) = split_call(s).ok_or_else(|| Error::UnknownGenerator(s.to_string()))?;
    match head.trim() {
        "alpha" => FGenerator::alpha(parse_number(arg, s)?),
        "dual" => Ok(generator_catalog(arg)?.dual()),
        "symmetrize" => Ok(generator_catalog(arg)?.symmetrize()),
        "extend" => generator_catalog(arg)?.extend(),
        "shift" => {
            let (inner, l) =
                split_last_arg(arg).ok_or_else(|| Error::UnknownGenerator(s.to_string()))?;
            Ok(generator_catalog(inner)?.shift(parse_number(l, s)?))
        }
        _ => Err(Error::UnknownGenerator(s.to_string())),
    }
}

impl std::str::FromStr for FGenerator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        generator_catalog(s)
    }
}

impl Serialize for FGenerator {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for FGenerator {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        generator_catalog(&String::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

pub fn dual_generator(f: &FGenerator) -> FGenerator {
    f.clone().dual()
}

pub fn symmetrize(f: &FGenerator) -> FGenerator {
    f.clone().symmetrize()
}

pub fn extend_generator(f: &FGenerator) -> Result<FGenerator> {
    f.clone().extend()
}

pub fn shift_generator(f: &FGenerator, lambda: f64) -> FGenerator {
    f.clone().shift(lambda)
}

/// `lim f(ε) + ε f(1/ε)`: an upper bound on every `I_f`.
pub fn vajda_upper_bound(f: &FGenerator) -> f64 {
    f.limit_at_0() + f.limit_slope_at_inf()
}

/// `Σ p_i f(q_i / p_i)` with the usual conventions on zero masses:
/// `0 f(0/0) = 0` and `0 f(q/0) = q lim ε f(1/ε)`. Terms are summed in
/// sorted order so relabeling the alphabet cannot change the result.
pub fn fdiv_pmf(p: &[f64], q: &[f64], f: &FGenerator) -> f64 {
    let mut terms: Vec<f64> = p
        .iter()
        .zip(q)
        .map(|(&pi, &qi)| match (pi > 0.0, qi > 0.0) {
            (true, _) => pi * f.eval(qi / pi),
            (false, true) => qi * f.limit_slope_at_inf(),
            (false, false) => 0.0,
        })
        .collect();
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

/// The f-divergence between two weight vectors viewed as pmfs.
pub fn discrete_fdiv(w: &WeightVector, w2: &WeightVector, f: &FGenerator) -> Result<f64> {
    if w.len() != w2.len() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            got: w2.len(),
        });
    }
    Ok(fdiv_pmf(w.as_slice(), w2.as_slice(), f))
}

/// Exact f-divergence between two counting-measure densities.
pub fn exact_fdiv<P: Density, Q: Density>(p: &P, q: &Q, f: &FGenerator) -> Result<f64> {
    let (a, b) = common_atoms(p, q).ok_or(Error::ExactUnavailable)?;
    Ok(fdiv_pmf(&a, &b, f))
}

fn kl_terms(p: &[f64], q: &[f64]) -> f64 {
    fdiv_pmf(p, q, &FGenerator::Kl)
}

/// `KL(p:q)` on a finite alphabet.
pub fn kl_pmf(p: &[f64], q: &[f64]) -> f64 {
    kl_terms(p, q)
}

/// `½ Σ |p_i - q_i|`.
pub fn tv_pmf(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// `K(p:q) = KL(p : (p+q)/2)`.
pub fn k_pmf(p: &[f64], q: &[f64]) -> f64 {
    let mid: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    kl_terms(p, &mid)
}

/// `JS(p;q) = (K(p:q) + K(q:p)) / 2`.
pub fn js_pmf(p: &[f64], q: &[f64]) -> f64 {
    0.5 * (k_pmf(p, q) + k_pmf(q, p))
}

/// `J(p;q) = KL(p:q) + KL(q:p)`.
pub fn jeffreys_pmf(p: &[f64], q: &[f64]) -> f64 {
    kl_terms(p, q) + kl_terms(q, p)
}

/// How a divergence-like quantity is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Evaluation {
    /// Closed-form sums on finite alphabets.
    Exact,
    /// Stochastic estimation from `samples` draws seeded with `seed`.
    MonteCarlo { samples: usize, seed: u64 },
}

impl Evaluation {
    pub fn monte_carlo(samples: usize, seed: u64) -> Self {
        Evaluation::MonteCarlo { samples, seed }
    }
}

/// Stream tag for draws from the first argument of an estimator.
pub const TAG_DRAWS: u32 = 1;
/// Consecutive zero-density draws tolerated before giving up.
pub const MAX_REJECTIONS: u32 = 1000;

/// Moments of `N` per-sample statistics computed from `(ln p(x), ln q(x))`
/// over `x ~ p`.
#[derive(Debug, Clone)]
pub struct SampleTerms<const N: usize> {
    pub moments: [Moments; N],
    /// Sum of the non-finite terms seen (zero when all were finite).
    pub overflow: [f64; N],
    pub rejected: u64,
    pub max_ratio: f64,
}

impl<const N: usize> SampleTerms<N> {
    pub fn estimate(&self, k: usize, samples: usize, seed: u64) -> McEstimate {
        let mut e = McEstimate::from_moments(&self.moments[k], samples, seed);
        if self.overflow[k] != 0.0 {
            e.value = self.overflow[k];
            e.stderr = f64::INFINITY;
        }
        e.rejected = self.rejected;
        e.max_ratio = self.max_ratio;
        e
    }
}

/// Core sampling loop shared by every estimator: draws `s` points from `p`
/// in fixed chunks, resampling points where `p` vanishes.
pub fn sample_terms<P, Q, T, const N: usize>(
    p: &P,
    q: &Q,
    s: usize,
    seed: u64,
    tag: u32,
    term: T,
) -> Result<SampleTerms<N>>
where
    P: Density,
    Q: Density,
    T: Fn(f64, f64) -> [f64; N] + Sync,
{
    if s < 2 {
        return Err(Error::TooFewSamples { min: 2, got: s });
    }
    if p.measure() != q.measure() {
        return Err(Error::UnsupportedSupport(
            "both densities must share a base measure".into(),
        ));
    }
    let parts = map_chunks(s, |chunk, offset, len| {
        let mut rng = chunk_rng(seed, tag, chunk);
        let mut out = SampleTerms {
            moments: [Moments::default(); N],
            overflow: [0.0; N],
            rejected: 0,
            max_ratio: 0.0f64,
        };
        for i in 0..len {
            let mut tries = 0;
            let (x, lp) = loop {
                let x = p.sample(&mut rng);
                let lp = p.log_density(x);
                if lp > f64::NEG_INFINITY {
                    break (x, lp);
                }
                out.rejected += 1;
                tries += 1;
                if tries >= MAX_REJECTIONS {
                    return Err(Error::DegenerateRatio { index: offset + i });
                }
            };
            let lq = q.log_density(x);
            let ratio = (lq - lp).exp();
            if ratio > out.max_ratio {
                out.max_ratio = ratio;
            }
            let t = term(lp, lq);
            for (k, &tk) in t.iter().enumerate() {
                if tk.is_finite() {
                    out.moments[k].push(tk);
                } else {
                    out.overflow[k] += tk;
                }
            }
        }
        Ok(out)
    });
    let mut acc = SampleTerms {
        moments: [Moments::default(); N],
        overflow: [0.0; N],
        rejected: 0,
        max_ratio: 0.0,
    };
    for part in parts {
        let part = part?;
        for k in 0..N {
            acc.moments[k].merge(&part.moments[k]);
            acc.overflow[k] += part.overflow[k];
        }
        acc.rejected += part.rejected;
        acc.max_ratio = acc.max_ratio.max(part.max_ratio);
    }
    Ok(acc)
}

/// `(1/s) Σ f(q(x_i)/p(x_i))` with `x_i ~ p`.
pub fn mc_estimate_fdiv<P: Density, Q: Density>(
    p: &P,
    q: &Q,
    f: &FGenerator,
    s: usize,
    seed: u64,
) -> Result<McEstimate> {
    let terms = sample_terms(p, q, s, seed, TAG_DRAWS, |lp, lq| [f.eval((lq - lp).exp())])?;
    Ok(terms.estimate(0, s, seed))
}

/// Extended-KL estimator `(1/s) Σ [ln(p/q) + q/p - 1]`: every summand is a
/// scalar Itakura-Saito divergence, hence nonnegative.
pub fn mc_estimate_kl_extended<P: Density, Q: Density>(
    p: &P,
    q: &Q,
    s: usize,
    seed: u64,
) -> Result<McEstimate> {
    let terms = sample_terms(p, q, s, seed, TAG_DRAWS, |lp, lq| {
        [extended_kl_term(lq - lp)]
    })?;
    Ok(terms.estimate(0, s, seed))
}

/// `e^t - 1 - t` for `t = ln(q/p)`; never negative.
pub fn extended_kl_term(t: f64) -> f64 {
    if t == f64::NEG_INFINITY {
        return f64::INFINITY;
    }
    (t.exp_m1() - t).max(0.0)
}

/// Result of [`reflexivity_breaking_lambda`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReflexivityBreak {
    pub lambda0: f64,
    /// The unshifted estimate on the same draws.
    pub estimate: f64,
    /// The estimate under `f + λ₀(u - 1)`, which is zero by construction.
    pub shifted_estimate: f64,
}

/// Finds the shift `λ₀` that drives the sample estimate to zero even though
/// the true divergence does not depend on the shift.
pub fn reflexivity_breaking_lambda<P: Density, Q: Density>(
    p: &P,
    q: &Q,
    f: &FGenerator,
    s: usize,
    seed: u64,
) -> Result<ReflexivityBreak> {
    let terms = sample_terms(p, q, s, seed, TAG_DRAWS, |lp, lq| {
        let r = (lq - lp).exp();
        [f.eval(r), r - 1.0, (r - 1.0).abs()]
    })?;
    let num = terms.estimate(0, s, seed).value;
    let den = terms.moments[1].mean;
    let scale = terms.moments[2].mean;
    if den == 0.0 || !den.is_finite() || den.abs() <= 1e-14 * scale || scale == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    let lambda0 = -num / den;
    let shifted = f.clone().shift(lambda0);
    let shifted_estimate = mc_estimate_fdiv(p, q, &shifted, s, seed)?.value;
    Ok(ReflexivityBreak {
        lambda0,
        estimate: num,
        shifted_estimate,
    })
}

/// `I_f(p:q)` evaluated according to `eval`.
pub fn fdiv<P: Density, Q: Density>(
    p: &P,
    q: &Q,
    f: &FGenerator,
    eval: Evaluation,
) -> Result<Estimate> {
    match eval {
        Evaluation::Exact => exact_fdiv(p, q, f).map(Estimate::exact),
        Evaluation::MonteCarlo { samples, seed } => {
            mc_estimate_fdiv(p, q, f, samples, seed).map(Estimate::from)
        }
    }
}

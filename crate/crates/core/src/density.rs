//! The common density interface shared by components, mixtures and blends.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Base measure of a density: Lebesgue on the real line, or counting measure
/// on a finite alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    #[default]
    Continuous,
    Counting,
}

/// A normalized univariate density (or pmf) that can be evaluated and sampled.
pub trait Density: Sync {
    /// Natural-log density with respect to the base measure; `-inf` off support.
    fn log_density(&self, x: f64) -> f64;

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64;

    fn measure(&self) -> MeasureKind;

    /// `P(X <= x)`; for counting measures the alphabet is ordered by index.
    fn cdf(&self, x: f64) -> f64;

    /// Full probability vector for counting-measure densities.
    fn atoms(&self) -> Option<Vec<f64>>;

    /// `P(X > x)`. Implementations avoid the cancellation in `1 - cdf`.
    fn sf(&self, x: f64) -> f64 {
        1.0 - self.cdf(x)
    }

    /// `P(a < X <= b)`, differencing whichever tail is smaller.
    fn interval_mass(&self, a: f64, b: f64) -> f64 {
        let lower = self.cdf(a);
        if lower > 0.5 {
            (self.sf(a) - self.sf(b)).max(0.0)
        } else {
            (self.cdf(b) - lower).max(0.0)
        }
    }

    fn density(&self, x: f64) -> f64 {
        self.log_density(x).exp()
    }
}

impl<T: Density + ?Sized> Density for &T {
    fn log_density(&self, x: f64) -> f64 {
        (**self).log_density(x)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        (**self).sample(rng)
    }

    fn measure(&self) -> MeasureKind {
        (**self).measure()
    }

    fn cdf(&self, x: f64) -> f64 {
        (**self).cdf(x)
    }

    fn atoms(&self) -> Option<Vec<f64>> {
        (**self).atoms()
    }

    fn sf(&self, x: f64) -> f64 {
        (**self).sf(x)
    }

    fn interval_mass(&self, a: f64, b: f64) -> f64 {
        (**self).interval_mass(a, b)
    }
}

/// Two-point blend `(1 - t) a + t b` of arbitrary densities.
#[derive(Debug, Clone, Copy)]
pub struct Blend<A, B> {
    pub a: A,
    pub b: B,
    pub t: f64,
}

impl<A: Density, B: Density> Blend<A, B> {
    pub fn new(a: A, b: B, t: f64) -> Self {
        Blend { a, b, t }
    }
}

impl<A: Density, B: Density> Density for Blend<A, B> {
    fn log_density(&self, x: f64) -> f64 {
        let terms = [
            (1.0 - self.t).ln() + self.a.log_density(x),
            self.t.ln() + self.b.log_density(x),
        ];
        log_sum_exp(&terms)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if rng.random::<f64>() < self.t {
            self.b.sample(rng)
        } else {
            self.a.sample(rng)
        }
    }

    fn measure(&self) -> MeasureKind {
        self.a.measure()
    }

    fn cdf(&self, x: f64) -> f64 {
        (1.0 - self.t) * self.a.cdf(x) + self.t * self.b.cdf(x)
    }

    fn sf(&self, x: f64) -> f64 {
        (1.0 - self.t) * self.a.sf(x) + self.t * self.b.sf(x)
    }

    fn interval_mass(&self, a: f64, b: f64) -> f64 {
        (1.0 - self.t) * self.a.interval_mass(a, b) + self.t * self.b.interval_mass(a, b)
    }

    fn atoms(&self) -> Option<Vec<f64>> {
        let a = self.a.atoms()?;
        let b = self.b.atoms()?;
        let n = a.len().max(b.len());
        Some(
            (0..n)
                .map(|i| {
                    (1.0 - self.t) * a.get(i).copied().unwrap_or(0.0)
                        + self.t * b.get(i).copied().unwrap_or(0.0)
                })
                .collect(),
        )
    }
}

/// `ln Σ exp(v_i)`, returning `-inf` when every term is `-inf`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `ln Σ w_i exp(l_i)` for weights `w_i >= 0` given as logs in `log_weights`.
pub fn log_mix(log_weights: &[f64], log_densities: &[f64]) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for (lw, ld) in log_weights.iter().zip(log_densities) {
        max = max.max(lw + ld);
    }
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let s: f64 = log_weights
        .iter()
        .zip(log_densities)
        .map(|(lw, ld)| (lw + ld - max).exp())
        .sum();
    max + s.ln()
}

/// Mass vector of two densities over a common alphabet, zero-padded.
pub fn common_atoms<P: Density, Q: Density>(p: &P, q: &Q) -> Option<(Vec<f64>, Vec<f64>)> {
    let mut a = p.atoms()?;
    let mut b = q.atoms()?;
    let n = a.len().max(b.len());
    a.resize(n, 0.0);
    b.resize(n, 0.0);
    Some((a, b))
}

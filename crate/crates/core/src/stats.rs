//! Monte-Carlo bookkeeping: deterministic chunked sampling streams, running
//! moments, and estimates with normal-theory confidence intervals.
//!
//! Every estimator in the crate is a pure function of `(inputs, seed, s)`.
//! Samples are drawn in fixed chunks of [`CHUNK_SIZE`]; chunk `c` of a stream
//! tagged `t` uses a ChaCha8 generator seeded with `seed` and positioned on
//! stream `(t << 32) | c`. Chunks may be evaluated on any number of threads,
//! and their partial moments are always merged in chunk order, so results are
//! bit-identical regardless of the thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

pub const CHUNK_SIZE: usize = 65_536;

/// Mixes a master seed with a tag (SplitMix64 finalizer) to obtain an
/// independent seed for a sub-computation.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for chunk `chunk` of stream `tag`.
pub fn chunk_rng(seed: u64, tag: u32, chunk: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((u64::from(tag) << 32) | u64::from(chunk));
    rng
}

/// Evaluates `f(chunk_index, offset, len)` for every chunk covering `total`
/// items, in parallel, returning results in chunk order.
pub fn map_chunks<T, F>(total: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u32, usize, usize) -> T + Sync,
{
    let chunks = total.div_ceil(CHUNK_SIZE);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let offset = c * CHUNK_SIZE;
            let len = CHUNK_SIZE.min(total - offset);
            f(c as u32, offset, len)
        })
        .collect()
}

/// Running count, mean and sum of squared deviations (Welford), mergeable
/// with Chan's pairwise update.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let (na, nb) = (self.n as f64, other.n as f64);
        self.mean += delta * nb / n as f64;
        self.m2 += other.m2 + delta * delta * na * nb / n as f64;
        self.n = n;
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }

    pub fn merged<'a>(parts: impl IntoIterator<Item = &'a Moments>) -> Moments {
        let mut acc = Moments::default();
        for p in parts {
            acc.merge(p);
        }
        acc
    }
}

/// Two-sided standard-normal quantile for a confidence level in (0, 1).
pub fn normal_quantile(level: f64) -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    normal.inverse_cdf(0.5 + level / 2.0)
}

/// A value with its standard error. Exact computations carry `stderr == 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    #[serde(with = "crate::stats::ext_float")]
    pub value: f64,
    #[serde(with = "crate::stats::ext_float")]
    pub stderr: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, stderr: 0.0 }
    }

    pub fn is_exact(&self) -> bool {
        self.stderr == 0.0
    }

    /// `|self - other|` and the combined standard error of two independent estimates.
    pub fn gap(&self, other: &Estimate) -> (f64, f64) {
        (
            (self.value - other.value).abs(),
            self.stderr.hypot(other.stderr),
        )
    }
}

impl From<McEstimate> for Estimate {
    fn from(e: McEstimate) -> Self {
        Estimate {
            value: e.value,
            stderr: e.stderr,
        }
    }
}

/// A Monte-Carlo estimate together with the sampling protocol that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    /// Sample standard deviation divided by `sqrt(samples)`.
    pub stderr: f64,
    pub samples: usize,
    pub seed: u64,
    /// Draws rejected because the sampling density evaluated to zero.
    pub rejected: u64,
    /// Largest density ratio `q/p` seen; above [`RATIO_WARNING`] the target
    /// integral may diverge and the estimate should not be trusted.
    pub max_ratio: f64,
}

/// Ratio beyond which an estimate is flagged as possibly diverging.
pub const RATIO_WARNING: f64 = 1e12;

impl McEstimate {
    pub fn from_moments(m: &Moments, samples: usize, seed: u64) -> Self {
        McEstimate {
            value: m.mean,
            stderr: m.stderr(),
            samples,
            seed,
            rejected: 0,
            max_ratio: 0.0,
        }
    }

    /// Normal-theory confidence interval at `level`.
    pub fn ci(&self, level: f64) -> (f64, f64) {
        let half = normal_quantile(level) * self.stderr;
        (self.value - half, self.value + half)
    }

    pub fn divergence_risk(&self) -> bool {
        self.max_ratio > RATIO_WARNING
    }

    pub fn report(&self) -> McEstimateReport {
        let (lo, hi) = self.ci(0.95);
        McEstimateReport {
            value: self.value,
            stderr: self.stderr,
            s: self.samples as u64,
            seed: self.seed,
            ci95: [lo, hi],
            rejected: self.rejected,
            warning: self.divergence_risk().then(|| {
                format!(
                    "density ratio reached {:e}; the target may diverge",
                    self.max_ratio
                )
            }),
        }
    }
}

/// Wire form of an [`McEstimate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McEstimateReport {
    #[serde(with = "ext_float")]
    pub value: f64,
    #[serde(with = "ext_float")]
    pub stderr: f64,
    pub s: u64,
    pub seed: u64,
    #[serde(with = "ext_float_pair")]
    pub ci95: [f64; 2],
    #[serde(default)]
    pub rejected: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Serializes non-finite floats as the strings `"inf"`, `"-inf"`, `"nan"` so
/// that reports stay valid JSON and round-trip.
pub mod ext_float {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Str(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(de::Error::custom(format!("invalid float `{other}`"))),
            },
        }
    }
}

pub mod ext_float_pair {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct W(#[serde(with = "super::ext_float")] f64);

    pub fn serialize<S: Serializer>(x: &[f64; 2], s: S) -> Result<S::Ok, S::Error> {
        [W(x[0]), W(x[1])].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[f64; 2], D::Error> {
        let [a, b] = <[W; 2]>::deserialize(d)?;
        Ok([a.0, b.0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merged_moments_match_single_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let mut whole = Moments::default();
        xs.iter().for_each(|&x| whole.push(x));
        let parts: Vec<Moments> = xs
            .chunks(77)
            .map(|c| {
                let mut m = Moments::default();
                c.iter().for_each(|&x| m.push(x));
                m
            })
            .collect();
        let merged = Moments::merged(&parts);
        assert_eq!(merged.n, whole.n);
        assert!((merged.mean - whole.mean).abs() < 1e-12);
        assert!((merged.variance() - whole.variance()).abs() < 1e-10);
    }

    #[test]
    fn ci95_half_width() {
        let e = McEstimate {
            value: 1.0,
            stderr: 0.5,
            samples: 10,
            seed: 0,
            rejected: 0,
            max_ratio: 1.0,
        };
        let (lo, hi) = e.ci(0.95);
        assert!(((hi - lo) / 2.0 - 1.959964 * 0.5).abs() < 1e-6);
    }

    #[test]
    fn non_finite_round_trip() {
        let e = Estimate {
            value: f64::INFINITY,
            stderr: 0.0,
        };
        let s = serde_json::to_string(&e).unwrap();
        assert_eq!(s, r#"{"value":"inf","stderr":0.0}"#);
        let back: Estimate = serde_json::from_str(&s).unwrap();
        assert_eq!(back, e);
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(7, 0), derive_seed(7, 1));
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
    }
}

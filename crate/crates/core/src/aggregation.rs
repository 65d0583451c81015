//! Distributed estimation of w-mixture weights: weight-only EM on each
//! shard, aggregation by averaging η, Bregman k-means in η, and the
//! moment-matching Gaussian simplification.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::components::{Component, ComponentBasis};
use crate::density::{log_sum_exp, Density, MeasureKind};
use crate::divergence::{exact_fdiv, mc_estimate_kl_extended, FGenerator};
use crate::error::{Error, Result};
use crate::geometry::PotentialOracle;
use crate::mixture::{EtaVector, WMixture, WeightVector};
use crate::stats::{derive_seed, map_chunks, Estimate};

/// Lower bound kept on every EM weight so iterates stay in the open simplex.
pub const EM_WEIGHT_FLOOR: f64 = 1e-9;
pub const EM_TOL: f64 = 1e-10;
pub const EM_MAX_ITER: usize = 10_000;

/// Output of [`fit_weights_em`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmFit {
    pub weights: WeightVector,
    /// Mean log-likelihood per sample, starting at the initial weights.
    pub loglik_trace: Vec<f64>,
    pub converged: bool,
}

/// `ln p_j(x_i)` for every sample, row-major.
struct LogTable {
    k: usize,
    rows: Vec<f64>,
}

impl LogTable {
    fn new(basis: &ComponentBasis, samples: &[f64]) -> Result<Self> {
        let k = basis.len();
        let mut rows = Vec::with_capacity(samples.len() * k);
        for (i, &x) in samples.iter().enumerate() {
            let start = rows.len();
            rows.extend(basis.components().iter().map(|c| c.log_density(x)));
            if rows[start..].iter().all(|v| *v == f64::NEG_INFINITY) {
                return Err(Error::AllZeroDensity { index: i });
            }
        }
        Ok(LogTable { k, rows })
    }

    fn len(&self) -> usize {
        self.rows.len() / self.k
    }

    /// Mean log-likelihood and mean responsibilities under `log_w`.
    fn e_step(&self, log_w: &[f64]) -> (f64, Vec<f64>) {
        let k = self.k;
        let n = self.len();
        let parts = map_chunks(n, |_, offset, len| {
            let mut ll = 0.0;
            let mut resp = vec![0.0; k];
            let mut joint = vec![0.0; k];
            for i in offset..offset + len {
                let row = &self.rows[i * k..(i + 1) * k];
                for j in 0..k {
                    joint[j] = log_w[j] + row[j];
                }
                let lm = log_sum_exp(&joint);
                ll += lm;
                for j in 0..k {
                    resp[j] += (joint[j] - lm).exp();
                }
            }
            (ll, resp)
        });
        let mut ll = 0.0;
        let mut resp = vec![0.0; k];
        for (l, r) in parts {
            ll += l;
            for (a, b) in resp.iter_mut().zip(r) {
                *a += b;
            }
        }
        for r in &mut resp {
            *r /= n as f64;
        }
        (ll / n as f64, resp)
    }
}

/// Maximizes `Σ r_j ln w_j` over the simplex subject to `w_j >= floor`.
fn floored_m_step(resp: &[f64], floor: f64) -> Vec<f64> {
    let k = resp.len();
    let mut pinned = vec![false; k];
    loop {
        let fixed = pinned.iter().filter(|p| **p).count() as f64;
        let free: f64 = resp
            .iter()
            .zip(&pinned)
            .filter(|(_, p)| !**p)
            .map(|(r, _)| r)
            .sum();
        let scale = (1.0 - fixed * floor) / free;
        let w: Vec<f64> = resp
            .iter()
            .zip(&pinned)
            .map(|(r, p)| if *p { floor } else { r * scale })
            .collect();
        let mut changed = false;
        for j in 0..k {
            if !pinned[j] && w[j] < floor {
                pinned[j] = true;
                changed = true;
            }
        }
        if !changed {
            return w;
        }
    }
}

/// Weight-only EM with the components held fixed.
pub fn fit_weights_em(
    basis: &ComponentBasis,
    samples: &[f64],
    init: &WeightVector,
    tol: f64,
    max_iter: usize,
) -> Result<EmFit> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    if init.len() != basis.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.len(),
            got: init.len(),
        });
    }
    let table = LogTable::new(basis, samples)?;
    let mut w = init.as_slice().to_vec();
    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..=max_iter {
        let log_w: Vec<f64> = w.iter().map(|x| x.ln()).collect();
        let (ll, resp) = table.e_step(&log_w);
        if let Some(&prev) = trace.last() {
            if ll - prev < tol {
                trace.push(ll);
                converged = true;
                break;
            }
        }
        trace.push(ll);
        if trace.len() > max_iter {
            break;
        }
        w = floored_m_step(&resp, EM_WEIGHT_FLOOR);
    }
    Ok(EmFit {
        weights: WeightVector::normalized(&w)?,
        loglik_trace: trace,
        converged,
    })
}

/// Arithmetic mean of the η vectors: the right-sided Bregman centroid for
/// any convex potential.
pub fn kl_average_aggregate(etas: &[EtaVector]) -> Result<EtaVector> {
    let sizes = vec![1.0; etas.len()];
    weighted_kl_average_aggregate(etas, &sizes)
}

/// `Σ (n_i / n) η_i`, used when shards have unequal sizes.
///
/// The size weighting is carried over from the exponential-family case,
/// where it is exact. For mixture families it is a heuristic: it reproduces
/// pooled frequencies on point-mass bases but has no optimality proof in
/// general.
pub fn weighted_kl_average_aggregate(etas: &[EtaVector], sizes: &[f64]) -> Result<EtaVector> {
    let first = etas.first().ok_or(Error::EmptyInput)?;
    if sizes.len() != etas.len() {
        return Err(Error::DimensionMismatch {
            expected: etas.len(),
            got: sizes.len(),
        });
    }
    if sizes.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::InvalidArgument(
            "shard sizes must be positive".into(),
        ));
    }
    let d = first.dim();
    let total: f64 = sizes.iter().sum();
    let mut mean = vec![0.0; d];
    for (eta, s) in etas.iter().zip(sizes) {
        if eta.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: eta.dim(),
            });
        }
        for (m, e) in mean.iter_mut().zip(eta.as_slice()) {
            *m += s * e;
        }
    }
    for m in &mut mean {
        *m /= total;
    }
    EtaVector::new(mean)
}

/// Samples split into contiguous shards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShardedDataset {
    pub shards: Vec<Vec<f64>>,
    pub truth: WMixture,
    pub seed: u64,
}

impl ShardedDataset {
    /// Draws `n` points from `truth` and splits them into `m` shards whose
    /// sizes differ by at most one.
    pub fn draw(truth: &WMixture, n: usize, m: usize, seed: u64) -> Result<Self> {
        if m == 0 || n < m {
            return Err(Error::InvalidArgument(format!(
                "need n >= m >= 1, got n={n}, m={m}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
        let all = truth.sample_n(&mut rng, n)?;
        let (base, extra) = (n / m, n % m);
        let mut shards = Vec::with_capacity(m);
        let mut start = 0;
        for i in 0..m {
            let len = base + usize::from(i < extra);
            shards.push(all[start..start + len].to_vec());
            start += len;
        }
        Ok(ShardedDataset {
            shards,
            truth: truth.clone(),
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.shards.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pooled(&self) -> Vec<f64> {
        self.shards.concat()
    }
}

/// Settings for [`run_distributed_experiment`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Sample count for the KL-to-truth estimates when no exact path exists.
    pub kl_samples: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            tol: EM_TOL,
            max_iter: EM_MAX_ITER,
            kl_samples: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlToTruth {
    pub aggregate: Estimate,
    pub global: Estimate,
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationReport {
    pub shard_sizes: Vec<usize>,
    pub local_etas: Vec<EtaVector>,
    pub aggregate_eta: EtaVector,
    pub global_eta: EtaVector,
    pub kl_to_truth: KlToTruth,
}

/// Fits each shard locally, aggregates by the size-weighted η mean and
/// compares the result with EM on the pooled data.
pub fn run_distributed_experiment(
    truth: &WMixture,
    n: usize,
    m: usize,
    seed: u64,
    config: &EstimatorConfig,
) -> Result<AggregationReport> {
    let data = ShardedDataset::draw(truth, n, m, seed)?;
    aggregate_dataset(&data, config)
}

pub fn aggregate_dataset(
    data: &ShardedDataset,
    config: &EstimatorConfig,
) -> Result<AggregationReport> {
    let basis = data.truth.basis().clone();
    let init = WeightVector::uniform(basis.len())?;
    let fit = |xs: &[f64]| -> Result<EtaVector> {
        fit_weights_em(&basis, xs, &init, config.tol, config.max_iter)?
            .weights
            .to_eta()
    };
    let local_etas: Vec<EtaVector> = data
        .shards
        .par_iter()
        .map(|s| fit(s))
        .collect::<Result<_>>()?;
    let sizes: Vec<usize> = data.shards.iter().map(Vec::len).collect();
    let aggregate_eta = if sizes.windows(2).all(|w| w[0] == w[1]) {
        kl_average_aggregate(&local_etas)?
    } else {
        let s: Vec<f64> = sizes.iter().map(|&x| x as f64).collect();
        weighted_kl_average_aggregate(&local_etas, &s)?
    };
    let global_eta = fit(&data.pooled())?;
    let agg = WMixture::from_eta(basis.clone(), &aggregate_eta)?;
    let glob = WMixture::from_eta(basis.clone(), &global_eta)?;
    let exact = basis.measure() == MeasureKind::Counting;
    let kl = |q: &WMixture| -> Result<Estimate> {
        if exact {
            Ok(Estimate::exact(exact_fdiv(
                &data.truth,
                q,
                &FGenerator::Kl,
            )?))
        } else {
            // The extended form has nonnegative per-sample terms, so tiny
            // divergences are not swamped by the zero-mean first-order
            // term. Both estimates share draws.
            let e = mc_estimate_kl_extended(
                &data.truth,
                q,
                config.kl_samples,
                derive_seed(data.seed, 2),
            )?;
            Ok(e.into())
        }
    };
    Ok(AggregationReport {
        shard_sizes: sizes,
        kl_to_truth: KlToTruth {
            aggregate: kl(&agg)?,
            global: kl(&glob)?,
            exact,
        },
        local_etas,
        aggregate_eta,
        global_eta,
    })
}

/// Output of [`bregman_kmeans`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    pub centroids: Vec<EtaVector>,
    /// `Σ_i B_{F*}(η_i : c_{a(i)})` after each assignment step.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
}

/// Right-sided Bregman k-means on the η coordinates of mixtures sharing the
/// oracle's basis. Distances are `B_{F*}(η_i : c_j) = KL(m_i : m(c_j))`
/// evaluated by the oracle, whose Monte-Carlo draws are fixed for the run.
/// Seeding is farthest-first in Euclidean η distance from a seeded start.
pub fn bregman_kmeans(
    mixtures: &[WMixture],
    k: usize,
    oracle: &PotentialOracle,
    seed: u64,
    max_iter: usize,
) -> Result<KMeansResult> {
    if mixtures.is_empty() {
        return Err(Error::EmptyInput);
    }
    if k == 0 || k > mixtures.len() {
        return Err(Error::InvalidArgument(format!(
            "k must lie in 1..={}, got {k}",
            mixtures.len()
        )));
    }
    let basis: &Arc<ComponentBasis> = oracle.basis();
    if mixtures
        .iter()
        .any(|m| !Arc::ptr_eq(m.basis(), basis) && m.basis().as_ref() != basis.as_ref())
    {
        return Err(Error::BasisMismatch);
    }
    let etas: Vec<EtaVector> = mixtures
        .iter()
        .map(|m| m.weights().to_eta())
        .collect::<Result<_>>()?;
    let mut centroids = farthest_first(&etas, k, seed);
    let mut assignments = vec![usize::MAX; etas.len()];
    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..max_iter.max(1) {
        let centers: Vec<WMixture> = centroids
            .iter()
            .map(|c| WMixture::from_eta(basis.clone(), c))
            .collect::<Result<_>>()?;
        let mut objective = 0.0;
        let mut next = Vec::with_capacity(etas.len());
        for m in mixtures {
            let mut best = (f64::INFINITY, 0);
            for (j, c) in centers.iter().enumerate() {
                let d = oracle.bregman_kl(m, c)?.value;
                if d < best.0 {
                    best = (d, j);
                }
            }
            objective += best.0;
            next.push(best.1);
        }
        trace.push(objective);
        if next == assignments {
            converged = true;
            break;
        }
        assignments = next;
        for (j, c) in centroids.iter_mut().enumerate() {
            let members: Vec<EtaVector> = assignments
                .iter()
                .zip(&etas)
                .filter(|(a, _)| **a == j)
                .map(|(_, e)| e.clone())
                .collect();
            if !members.is_empty() {
                *c = kl_average_aggregate(&members)?;
            }
        }
    }
    Ok(KMeansResult {
        assignments,
        centroids,
        objective_trace: trace,
        converged,
    })
}

fn farthest_first(etas: &[EtaVector], k: usize, seed: u64) -> Vec<EtaVector> {
    use rand::Rng;
    let dist = |a: &EtaVector, b: &EtaVector| -> f64 {
        a.as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| (x - y) * (x - y))
            .sum()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 3));
    let mut chosen = vec![rng.random_range(0..etas.len())];
    let mut nearest: Vec<f64> = etas.iter().map(|e| dist(e, &etas[chosen[0]])).collect();
    while chosen.len() < k {
        let mut far = None;
        for (i, d) in nearest.iter().enumerate() {
            if chosen.contains(&i) {
                continue;
            }
            if far.is_none_or(|(_, best)| *d > best) {
                far = Some((i, *d));
            }
        }
        let (next, _) = far.expect("k <= count");
        chosen.push(next);
        for (n, e) in nearest.iter_mut().zip(etas) {
            *n = n.min(dist(e, &etas[next]));
        }
    }
    chosen.into_iter().map(|i| etas[i].clone()).collect()
}

/// Moment-matched Gaussian: the KL projection `argmin_g KL(m : g)` of a
/// univariate Gaussian w-mixture onto the Gaussian family.
pub fn gaussian_simplify(m: &WMixture) -> Result<Component> {
    let mut mean = 0.0;
    let mut second = 0.0;
    for (w, c) in m.weights().as_slice().iter().zip(m.basis().components()) {
        match c {
            Component::Gaussian { mean: mu, stddev } => {
                mean += w * mu;
                second += w * (stddev * stddev + mu * mu);
            }
            _ => return Err(Error::NotGaussianBasis),
        }
    }
    Component::gaussian(mean, (second - mean * mean).max(0.0).sqrt())
}

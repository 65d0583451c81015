use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use wmix::aggregation::{bregman_kmeans, run_distributed_experiment, KMeansResult};
use wmix::stats::derive_seed;
use wmix::{
    Component, ComponentBasis, Evaluation, MeasureKind, PotentialOracle, WMixture, WeightVector,
};

use crate::config::{
    independent_basis, pick, require_independent, AggregateConfig, BasisMode, ClusterConfig,
};
use crate::error::{CliError, CliResult};
use crate::{CommandOutput, Globals};

/// Ground truth used when the config gives none.
pub fn default_truth(mode: BasisMode) -> WMixture {
    let (components, w) = match mode {
        BasisMode::Pmf => (
            (0..3)
                .map(|i| Component::dirac(i, 3).expect("valid"))
                .collect(),
            vec![0.2, 0.3, 0.5],
        ),
        BasisMode::Gmm => (
            vec![
                Component::gaussian(-3.0, 1.0).expect("valid"),
                Component::gaussian(3.0, 1.0).expect("valid"),
            ],
            vec![0.3, 0.7],
        ),
    };
    let basis = ComponentBasis::new(components).expect("preset basis is independent");
    WMixture::new(Arc::new(basis), WeightVector::new(w).expect("valid")).expect("valid")
}

pub fn run_aggregate(cfg: &AggregateConfig, g: &Globals) -> CliResult<CommandOutput> {
    let mut resolved = cfg.clone();
    resolved.seed = Some(pick(g.seed, cfg.seed, 0));
    if let Some(s) = g.samples {
        resolved.estimator.kl_samples = s;
    }
    let truth = resolved
        .truth
        .clone()
        .unwrap_or_else(|| default_truth(cfg.basis_mode));
    require_independent(truth.basis())?;
    let seed = resolved.seed.unwrap_or(0);
    let report = run_distributed_experiment(
        &truth,
        resolved.n,
        resolved.shards,
        seed,
        &resolved.estimator,
    )?;
    resolved.truth = Some(truth);
    CommandOutput::json("aggregate", &report, &resolved, seed, 0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterReport {
    pub mode: Evaluation,
    pub k: usize,
    pub weights: Vec<WeightVector>,
    pub result: KMeansResult,
}

/// Two groups of ten weight vectors around `w_2 = 0.1` and `w_2 = 0.9`.
fn default_cluster_input(seed: u64) -> (Vec<Component>, Vec<Vec<f64>>) {
    let basis = vec![
        Component::pmf(vec![0.6, 0.2, 0.1, 0.1]).expect("valid"),
        Component::pmf(vec![0.1, 0.5, 0.3, 0.1]).expect("valid"),
        Component::pmf(vec![0.05, 0.15, 0.2, 0.6]).expect("valid"),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
    let ws = (0..20)
        .map(|i| {
            let centre: f64 = if i % 2 == 0 { 0.1 } else { 0.9 };
            let a = centre + rng.random_range(-0.02..0.02);
            vec![0.5 * (1.0 - a), 0.5 * (1.0 - a), a]
        })
        .collect();
    (basis, ws)
}

pub fn run_cluster(cfg: &ClusterConfig, g: &Globals) -> CliResult<CommandOutput> {
    let seed = pick(g.seed, cfg.seed, 0);
    let samples = pick(g.samples, cfg.samples, 100_000);
    let (components, ws) = match (&cfg.basis, &cfg.mixtures) {
        (Some(b), Some(m)) => (b.clone(), m.clone()),
        (None, None) => default_cluster_input(seed),
        _ => {
            return Err(CliError::Usage(
                "`basis` and `mixtures` must be given together".into(),
            ))
        }
    };
    let basis = independent_basis(components.clone())?;
    let mode = if basis.measure() == MeasureKind::Counting {
        Evaluation::Exact
    } else {
        Evaluation::MonteCarlo {
            samples,
            seed: derive_seed(seed, 2),
        }
    };
    let oracle = PotentialOracle::new(basis.clone(), mode)?;
    let weights: Vec<WeightVector> = ws
        .iter()
        .map(|w| WeightVector::new(w.clone()))
        .collect::<wmix::Result<_>>()?;
    let mixtures: Vec<WMixture> = weights
        .iter()
        .map(|w| WMixture::new(basis.clone(), w.clone()))
        .collect::<wmix::Result<_>>()?;
    let result = bregman_kmeans(&mixtures, cfg.k, &oracle, seed, cfg.max_iter)?;
    let report = ClusterReport {
        mode,
        k: cfg.k,
        weights,
        result,
    };
    let mut resolved = cfg.clone();
    resolved.seed = Some(seed);
    resolved.samples = Some(samples);
    resolved.basis = Some(components);
    resolved.mixtures = Some(ws);
    CommandOutput::json("cluster", &report, &resolved, seed, 0)
}

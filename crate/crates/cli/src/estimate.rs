use serde::{Deserialize, Serialize};
use wmix::divergence::{exact_fdiv, mc_estimate_fdiv};
use wmix::stats::McEstimateReport;
use wmix::{Estimate, FGenerator, MeasureKind};

use crate::config::{pick, EstimateConfig};
use crate::error::CliResult;
use crate::{CommandOutput, Globals};

pub const DEFAULT_SAMPLES: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateRecord {
    pub generator: FGenerator,
    pub estimate: McEstimateReport,
    /// Present when both mixtures live on a finite alphabet.
    pub exact: Option<Estimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateReport {
    pub samples: usize,
    pub seed: u64,
    pub results: Vec<EstimateRecord>,
}

pub fn run(cfg: &EstimateConfig, g: &Globals) -> CliResult<CommandOutput> {
    let samples = pick(g.samples, cfg.samples, DEFAULT_SAMPLES);
    let seed = pick(g.seed, cfg.seed, 0);
    let discrete = cfg.p.basis().measure() == MeasureKind::Counting;
    let mut results = Vec::with_capacity(cfg.generators.len());
    for f in &cfg.generators {
        let e = mc_estimate_fdiv(&cfg.p, &cfg.q, f, samples, seed)?;
        let exact = if discrete {
            Some(Estimate::exact(exact_fdiv(&cfg.p, &cfg.q, f)?))
        } else {
            None
        };
        results.push(EstimateRecord {
            generator: f.clone(),
            estimate: e.report(),
            exact,
        });
    }
    let report = EstimateReport {
        samples,
        seed,
        results,
    };
    let mut resolved = cfg.clone();
    resolved.samples = Some(samples);
    resolved.seed = Some(seed);
    CommandOutput::json("estimate", &report, &resolved, seed, 0)
}

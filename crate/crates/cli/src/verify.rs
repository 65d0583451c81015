//! Identity and inequality suites over pairs of w-mixtures on one basis.

use serde::{Deserialize, Serialize};
use wmix::bounds::{
    fdiv_epsilon_inequalities, kl_epsilon_bounds, slack_for, tv_epsilon, weight_bound_suite,
    EpsilonPair, EXACT_SLACK, MC_SIGMAS,
};
use wmix::divergence::{discrete_fdiv, exact_fdiv, mc_estimate_kl_extended};
use wmix::geometry::skew_js;
use wmix::stats::{derive_seed, ext_float};
use wmix::{
    Component, Estimate, EtaVector, Evaluation, FGenerator, MeasureKind, PotentialOracle, WMixture,
    WeightVector,
};

use crate::config::{independent_basis, pick, Suite, VerifyConfig};
use crate::error::{CliError, CliResult};
use crate::{CommandOutput, Globals};

pub const DEFAULT_SAMPLES: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// `|lhs - rhs| <= slack`.
    Identity,
    /// `lhs <= rhs + slack`.
    Inequality,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckRecord {
    pub name: String,
    pub kind: CheckKind,
    #[serde(with = "ext_float")]
    pub lhs: f64,
    #[serde(with = "ext_float")]
    pub rhs: f64,
    #[serde(with = "ext_float")]
    pub slack: f64,
    pub pass: bool,
}

impl CheckRecord {
    fn identity(name: String, lhs: Estimate, rhs: Estimate) -> Self {
        let slack = slack_for(&[lhs, rhs]);
        CheckRecord {
            pass: (lhs.value - rhs.value).abs() <= slack,
            name,
            kind: CheckKind::Identity,
            lhs: lhs.value,
            rhs: rhs.value,
            slack,
        }
    }

    fn inequality(r: wmix::bounds::InequalityRecord) -> Self {
        CheckRecord {
            name: r.name,
            kind: CheckKind::Inequality,
            lhs: r.lhs,
            rhs: r.rhs,
            slack: r.slack,
            pass: r.holds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyReport {
    pub mode: Evaluation,
    pub checks: Vec<CheckRecord>,
    pub failures: usize,
}

fn preset(suite: Suite) -> (Vec<Component>, Vec<[Vec<f64>; 2]>) {
    let c = |r: wmix::Result<Component>| r.expect("preset components are valid");
    match suite {
        Suite::Categorical => (
            vec![
                c(Component::pmf(vec![0.6, 0.2, 0.1, 0.1])),
                c(Component::pmf(vec![0.1, 0.5, 0.3, 0.1])),
                c(Component::pmf(vec![0.05, 0.15, 0.2, 0.6])),
            ],
            vec![
                [vec![0.2, 0.3, 0.5], vec![0.5, 0.25, 0.25]],
                [vec![0.7, 0.2, 0.1], vec![0.1, 0.1, 0.8]],
            ],
        ),
        Suite::Gmm => (
            vec![
                c(Component::gaussian(-1.0, 1.0)),
                c(Component::gaussian(1.5, 0.8)),
            ],
            vec![
                [vec![0.3, 0.7], vec![0.6, 0.4]],
                [vec![0.85, 0.15], vec![0.25, 0.75]],
            ],
        ),
    }
}

pub fn run(cfg: &VerifyConfig, g: &Globals) -> CliResult<CommandOutput> {
    let (components, pairs) = match (&cfg.basis, &cfg.pairs) {
        (Some(b), Some(p)) => (b.clone(), p.clone()),
        (None, None) => preset(cfg.suite),
        _ => {
            return Err(CliError::Usage(
                "`basis` and `pairs` must be given together".into(),
            ))
        }
    };
    let basis = independent_basis(components)?;
    let seed = pick(g.seed, cfg.seed, 0);
    let samples = pick(g.samples, cfg.samples, DEFAULT_SAMPLES);
    let exact = basis.measure() == MeasureKind::Counting;
    let mode = if exact {
        Evaluation::Exact
    } else {
        Evaluation::MonteCarlo { samples, seed }
    };
    let oracle = PotentialOracle::new(basis.clone(), mode)?;
    let mut checks = Vec::new();
    for (j, [a, b]) in pairs.iter().enumerate() {
        let m1 = WMixture::new(basis.clone(), WeightVector::new(a.clone())?)?;
        let m2 = WMixture::new(basis.clone(), WeightVector::new(b.clone())?)?;
        let sub = |tag: u64| match mode {
            Evaluation::Exact => Evaluation::Exact,
            Evaluation::MonteCarlo { samples, seed } => Evaluation::MonteCarlo {
                samples,
                seed: derive_seed(seed, 100 * j as u64 + tag),
            },
        };
        checks.extend(pair_checks(&oracle, &m1, &m2, j, cfg, g.corrupt_eta, &sub)?);
    }
    let failures = checks.iter().filter(|c| !c.pass).count();
    let report = VerifyReport {
        mode,
        checks,
        failures,
    };
    let mut resolved = cfg.clone();
    resolved.seed = Some(seed);
    resolved.samples = Some(samples);
    CommandOutput::json("verify", &report, &resolved, seed, failures)
}

fn kl(p: &WMixture, q: &WMixture, eval: Evaluation) -> CliResult<Estimate> {
    Ok(match eval {
        Evaluation::Exact => Estimate::exact(exact_fdiv(p, q, &FGenerator::Kl)?),
        Evaluation::MonteCarlo { samples, seed } => {
            mc_estimate_kl_extended(p, q, samples, seed)?.into()
        }
    })
}

fn pair_checks(
    oracle: &PotentialOracle,
    m1: &WMixture,
    m2: &WMixture,
    j: usize,
    cfg: &VerifyConfig,
    corrupt_eta: Option<f64>,
    sub: &dyn Fn(u64) -> Evaluation,
) -> CliResult<Vec<CheckRecord>> {
    // The negative-control hook perturbs η₂ on the parametric side only.
    let m2p = match corrupt_eta {
        None => m2.clone(),
        Some(d) => {
            let mut eta = m2.eta().as_slice().to_vec();
            eta[0] += d;
            WMixture::from_eta(m2.basis().clone(), &EtaVector::new(eta)?)?
        }
    };
    let name = |s: &str| format!("pair{j}/{s}");
    let mut out = Vec::new();
    let kl12 = kl(m1, m2, sub(1))?;
    let kl21 = kl(m2, m1, sub(2))?;
    out.push(CheckRecord::identity(
        name("kl_equals_bregman"),
        kl12,
        oracle.bregman_kl(m1, &m2p)?,
    ));
    out.push(CheckRecord::identity(
        name("kl_equals_canonical"),
        kl12,
        oracle.canonical_divergence(m1, &m2p)?,
    ));
    for (tag, m) in [("m1", m1), ("m2", &m2p)] {
        let gap = oracle.young_gap(m)?;
        out.push(CheckRecord::identity(
            name(&format!("young_{tag}")),
            gap,
            Estimate::exact(0.0),
        ));
    }
    let sum = Estimate {
        value: kl12.value + kl21.value,
        stderr: kl12.stderr.hypot(kl21.stderr),
    };
    out.push(CheckRecord::identity(
        name("jeffreys_mixed"),
        oracle.jeffreys_mixed(m1, &m2p)?,
        sum,
    ));
    for (i, &alpha) in cfg.alphas.iter().enumerate() {
        let js = skew_js(m1, m2, alpha, sub(10 + i as u64))?;
        let sj = oracle.skew_jensen(m1, &m2p, alpha)?;
        out.push(CheckRecord::identity(
            name(&format!("skew_js_equals_skew_jensen({alpha})")),
            js,
            sj,
        ));
    }
    for (i, &eps) in cfg.epsilons.iter().enumerate() {
        let pair = EpsilonPair::new(m1.clone(), m2.clone(), eps)?;
        let tv = tv_epsilon(&pair, sub(30 + i as u64))?;
        let c = (1.0 - 2.0 * eps).abs();
        let scaled = Estimate {
            value: c * tv.tv_base.value,
            stderr: c * tv.tv_base.stderr,
        };
        out.push(CheckRecord::identity(
            name(&format!("tv_epsilon({eps})")),
            tv.tv_eps,
            scaled,
        ));
        if eps != 0.5 {
            let k = kl_epsilon_bounds(&pair, sub(50 + i as u64))?;
            out.push(CheckRecord::identity(
                name(&format!("kl_epsilon_bregman({eps})")),
                k.kl_eps,
                k.bregman,
            ));
            out.extend(k.records().into_iter().map(|mut r| {
                r.name = name(&format!("{}({eps})", r.name));
                CheckRecord::inequality(r)
            }));
        }
        for f in [FGenerator::Kl, FGenerator::TotalVariation] {
            let fe = fdiv_epsilon_inequalities(
                &pair,
                &f,
                sub(70 + 2 * i as u64 + u64::from(f == FGenerator::Kl)),
            )?;
            out.extend(fe.records().into_iter().map(|mut r| {
                r.name = name(&format!("{}({f},{eps})", r.name));
                CheckRecord::inequality(r)
            }));
        }
    }
    let suite = weight_bound_suite(m1.weights(), m2.weights(), &FGenerator::Kl)?;
    out.extend(suite.records().into_iter().map(|mut r| {
        r.name = name(&r.name);
        CheckRecord::inequality(r)
    }));
    let wkl = discrete_fdiv(m1.weights(), m2.weights(), &FGenerator::Kl)?;
    let slack = if kl12.is_exact() {
        EXACT_SLACK
    } else {
        MC_SIGMAS * kl12.stderr
    };
    out.push(CheckRecord::inequality(
        wmix::bounds::InequalityRecord::new(name("kl_le_weight_kl"), kl12.value, wkl, slack),
    ));
    Ok(out)
}

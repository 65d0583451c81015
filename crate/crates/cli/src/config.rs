//! Command configurations. Every document is strict: unknown fields are
//! rejected before anything runs.

use std::path::Path;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use wmix::aggregation::EstimatorConfig;
use wmix::components::DEFAULT_INDEPENDENCE_THRESHOLD;
use wmix::{Component, ComponentBasis, FGenerator, WMixture};

use crate::error::{CliError, CliResult};

pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => parse(&std::fs::read_to_string(p)?),
    }
}

pub fn parse<T: DeserializeOwned>(text: &str) -> CliResult<T> {
    Ok(serde_json::from_str(text)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    pub p: WMixture,
    pub q: WMixture,
    #[serde(default = "default_generators")]
    pub generators: Vec<FGenerator>,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_generators() -> Vec<FGenerator> {
    vec![FGenerator::Kl]
}

/// Built-in verification suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    #[default]
    Categorical,
    Gmm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub suite: Suite,
    /// Replaces the suite's basis; `pairs` must then be given too.
    pub basis: Option<Vec<Component>>,
    pub pairs: Option<Vec<[Vec<f64>; 2]>>,
    pub alphas: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            suite: Suite::Categorical,
            basis: None,
            pairs: None,
            alphas: vec![0.1, 0.25, 0.5, 0.75, 0.9],
            epsilons: vec![0.01, 0.1, 0.25, 0.4, 0.5],
            samples: None,
            seed: None,
        }
    }
}

/// Which built-in ground truth `aggregate` uses when none is given.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BasisMode {
    Pmf,
    #[default]
    Gmm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AggregateConfig {
    pub truth: Option<WMixture>,
    pub basis_mode: BasisMode,
    pub n: usize,
    pub shards: usize,
    pub seed: Option<u64>,
    pub estimator: EstimatorConfig,
}

impl Default for AggregateConfig {
    fn default() -> Self {
        AggregateConfig {
            truth: None,
            basis_mode: BasisMode::Gmm,
            n: 100_000,
            shards: 10,
            seed: None,
            estimator: EstimatorConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    /// Defaults to two groups of pmf mixtures when absent.
    pub basis: Option<Vec<Component>>,
    pub mixtures: Option<Vec<Vec<f64>>>,
    pub k: usize,
    pub max_iter: usize,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            basis: None,
            mixtures: None,
            k: 2,
            max_iter: 100,
            samples: None,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsConfig {
    /// Randomized instances per inequality family.
    pub instances: usize,
    /// Draws for the Monte-Carlo sides of continuous instances.
    pub samples: Option<usize>,
    pub seed: Option<u64>,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        BoundsConfig {
            instances: 1000,
            samples: None,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlotConfig {
    /// Two components; the curve is drawn over `η = w_1`.
    pub basis: Vec<Component>,
    pub points: usize,
    pub eta_min: f64,
    pub eta_max: f64,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
}

impl Default for PlotConfig {
    fn default() -> Self {
        PlotConfig {
            basis: vec![
                Component::gaussian(-2.0, 1.0).expect("valid"),
                Component::gaussian(2.0, 1.0).expect("valid"),
            ],
            points: 101,
            eta_min: 0.01,
            eta_max: 0.99,
            samples: None,
            seed: None,
        }
    }
}

impl PlotConfig {
    pub fn grid(&self) -> CliResult<Vec<f64>> {
        if self.points < 3
            || !(0.0 < self.eta_min && self.eta_min < self.eta_max && self.eta_max < 1.0)
        {
            return Err(CliError::Usage(
                "plot grid needs >= 3 points inside (0, 1)".into(),
            ));
        }
        let step = (self.eta_max - self.eta_min) / (self.points - 1) as f64;
        Ok((0..self.points)
            .map(|i| self.eta_min + step * i as f64)
            .collect())
    }
}

/// Builds a basis from user input, rejecting numerically dependent
/// components at the library's default threshold.
pub fn independent_basis(components: Vec<Component>) -> CliResult<Arc<ComponentBasis>> {
    Ok(Arc::new(ComponentBasis::validated(
        components,
        DEFAULT_INDEPENDENCE_THRESHOLD,
    )?))
}

/// Same check for a basis that arrived inside a mixture document.
pub fn require_independent(basis: &ComponentBasis) -> CliResult<()> {
    let report = basis.check_linear_independence(DEFAULT_INDEPENDENCE_THRESHOLD);
    if report.ok {
        Ok(())
    } else {
        Err(wmix::Error::LinearlyDependent {
            min_eigenvalue: report.min_eigenvalue,
            threshold: DEFAULT_INDEPENDENCE_THRESHOLD,
        }
        .into())
    }
}

/// First non-empty value among a flag, a config entry and a default.
pub fn pick<T: Copy>(flag: Option<T>, config: Option<T>, default: T) -> T {
    flag.or(config).unwrap_or(default)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(parse::<VerifyConfig>(r#"{"suite":"gmm","samplez":3}"#).is_err());
        assert!(parse::<BoundsConfig>(r#"{"instances":3,"extra":1}"#).is_err());
        let e = parse::<EstimateConfig>(r#"{"p":1}"#).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn defaults_fill_missing_fields() {
        let v: VerifyConfig = parse(r#"{"suite":"gmm"}"#).unwrap();
        assert_eq!(v.suite, Suite::Gmm);
        assert_eq!(v.alphas, VerifyConfig::default().alphas);
        let a: AggregateConfig = parse(r#"{"basis_mode":"pmf","shards":1}"#).unwrap();
        assert_eq!((a.basis_mode, a.shards, a.n), (BasisMode::Pmf, 1, 100_000));
    }

    #[test]
    fn configs_round_trip() {
        let p = PlotConfig::default();
        let back: PlotConfig = parse(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
        let a = AggregateConfig::default();
        let back: AggregateConfig = parse(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn unknown_generator_is_a_config_error() {
        let text = r#"{
            "p": {"basis": [{"kind":"pmf","p":[1.0,0.0]},{"kind":"pmf","p":[0.0,1.0]}], "w": [0.5,0.5]},
            "q": {"basis": [{"kind":"pmf","p":[1.0,0.0]},{"kind":"pmf","p":[0.0,1.0]}], "w": [0.25,0.75]},
            "generators": ["not_a_divergence"]
        }"#;
        assert!(matches!(
            parse::<EstimateConfig>(text),
            Err(CliError::Config(_))
        ));
        let ok = text.replace("not_a_divergence", "kl");
        assert_eq!(
            parse::<EstimateConfig>(&ok).unwrap().generators,
            vec![FGenerator::Kl]
        );
    }

    #[test]
    fn grid_spans_the_interval() {
        let g = PlotConfig::default().grid().unwrap();
        assert_eq!(g.len(), 101);
        assert_eq!(g[0], 0.01);
        assert!((g[100] - 0.99).abs() < 1e-15);
        let bad = PlotConfig {
            eta_max: 1.0,
            ..PlotConfig::default()
        };
        assert!(bad.grid().is_err());
    }

    #[test]
    fn flag_beats_config_beats_default() {
        assert_eq!(pick(Some(1), Some(2), 3), 1);
        assert_eq!(pick(None, Some(2), 3), 2);
        assert_eq!(pick(None, None, 3), 3);
    }
}

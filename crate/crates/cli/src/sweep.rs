//! Randomized sweep over every inequality family, summarized by the
//! worst-margin instance of each family.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use wmix::bounds::*;
use wmix::divergence::{
    discrete_fdiv, exact_fdiv, fdiv_pmf, generator_catalog, mc_estimate_kl_extended, CATALOG_NAMES,
};
use wmix::geometry::chernoff_alpha_exact;
use wmix::stats::derive_seed;
use wmix::{
    Component, ComponentBasis, Density, Estimate, Evaluation, FGenerator, FiniteMixture, WMixture,
    WeightVector,
};

use crate::config::{pick, BoundsConfig};
use crate::error::CliResult;
use crate::{CommandOutput, Globals};

pub const DEFAULT_SAMPLES: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySummary {
    pub name: String,
    pub checked: usize,
    pub violations: usize,
    /// The record with the largest `lhs - rhs - slack`.
    pub worst: InequalityRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsReport {
    pub instances: usize,
    pub samples: usize,
    pub seed: u64,
    pub families: Vec<FamilySummary>,
    pub violations: usize,
}

struct Family {
    name: &'static str,
    checked: usize,
    violations: usize,
    worst: Option<InequalityRecord>,
}

impl Family {
    fn new(name: &'static str) -> Self {
        Family {
            name,
            checked: 0,
            violations: 0,
            worst: None,
        }
    }

    fn push(&mut self, r: InequalityRecord) {
        self.checked += 1;
        self.violations += usize::from(!r.holds);
        let margin = |r: &InequalityRecord| {
            let m = r.lhs - r.rhs - r.slack;
            if m.is_nan() {
                f64::INFINITY
            } else {
                m
            }
        };
        if self.worst.as_ref().is_none_or(|w| margin(&r) > margin(w)) {
            self.worst = Some(r);
        }
    }

    fn finish(self) -> FamilySummary {
        FamilySummary {
            name: self.name.to_string(),
            checked: self.checked,
            violations: self.violations,
            worst: self.worst.expect("at least one instance per family"),
        }
    }
}

fn generators(rng: &mut ChaCha8Rng) -> FGenerator {
    let name = CATALOG_NAMES[rng.random_range(0..CATALOG_NAMES.len())];
    if name == "alpha" {
        FGenerator::alpha(rng.random_range(-0.9..0.9)).expect("|α| < 1")
    } else {
        generator_catalog(name).expect("catalog name")
    }
}

fn simplex(rng: &mut ChaCha8Rng, k: usize, floor: f64) -> Vec<f64> {
    let v: Vec<f64> = (0..k).map(|_| floor + rng.random::<f64>()).collect();
    let t: f64 = v.iter().sum();
    v.into_iter().map(|x| x / t).collect()
}

fn pmfs(rng: &mut ChaCha8Rng, k: usize, atoms: usize) -> Vec<Component> {
    (0..k)
        .map(|_| Component::pmf(simplex(rng, atoms, 0.02)).expect("valid pmf"))
        .collect()
}

fn gaussians(rng: &mut ChaCha8Rng, k: usize) -> Vec<Component> {
    (0..k)
        .map(|_| {
            Component::gaussian(rng.random_range(-3.0..3.0), rng.random_range(0.5..2.0))
                .expect("valid")
        })
        .collect()
}

fn weights(rng: &mut ChaCha8Rng, k: usize) -> WeightVector {
    WeightVector::new(simplex(rng, k, 0.05)).expect("valid weights")
}

fn finite(components: Vec<Component>, w: WeightVector) -> FiniteMixture {
    FiniteMixture::new(components, w).expect("matching lengths")
}

/// KL between finite mixtures: exact on finite alphabets, extended-KL Monte
/// Carlo otherwise.
fn mixture_kl(
    m: &FiniteMixture,
    m2: &FiniteMixture,
    samples: usize,
    seed: u64,
) -> wmix::Result<Estimate> {
    if m.atoms().is_some() {
        Ok(Estimate::exact(exact_fdiv(m, m2, &FGenerator::Kl)?))
    } else {
        Ok(mc_estimate_kl_extended(m, m2, samples, seed)?.into())
    }
}

fn le(name: &str, lhs: Estimate, rhs: f64) -> InequalityRecord {
    InequalityRecord::between(name, lhs, Estimate::exact(rhs))
}

/// Runs `instances` randomized checks of every family.
pub fn bounds_sweep(instances: usize, samples: usize, seed: u64) -> wmix::Result<BoundsReport> {
    let mut families = Vec::new();
    let rng_for = |tag: u64| ChaCha8Rng::seed_from_u64(derive_seed(seed, tag));

    // Paired, permutation-strengthened and jointly convex upper bounds on
    // KL between mixtures; even instances on pmfs, odd ones Gaussian.
    let mut paired = Family::new("mixture_upper_bound_kl");
    let mut perm = Family::new("permutation_strengthened_bound");
    let mut joint = Family::new("joint_convexity_bound");
    let mut rng = rng_for(1);
    for i in 0..instances {
        let k = rng.random_range(1..=3);
        let (a, b) = if i % 2 == 0 {
            (pmfs(&mut rng, k, 5), pmfs(&mut rng, k, 5))
        } else {
            (gaussians(&mut rng, k), gaussians(&mut rng, k))
        };
        let m = finite(a, weights(&mut rng, k));
        let m2 = finite(b, weights(&mut rng, k));
        let lhs = mixture_kl(&m, &m2, samples, derive_seed(seed, 1000 + i as u64))?;
        paired.push(le(
            "kl_le_paired_bound",
            lhs,
            mixture_upper_bound_kl(&m, &m2)?,
        ));
        perm.push(le(
            "kl_le_best_permutation",
            lhs,
            permutation_strengthened_bound(&m, &m2, PERMUTATION_LIMIT)?.best_bound,
        ));
        if i % 2 == 0 {
            let f = generators(&mut rng);
            let lhs_f = Estimate::exact(exact_fdiv(&m, &m2, &f)?);
            joint.push(le(
                "fdiv_le_joint_convexity",
                lhs_f,
                joint_convexity_bound(&m, &m2, &f)?,
            ));
        } else {
            joint.push(le(
                "kl_le_joint_convexity",
                lhs,
                joint_convexity_bound(&m, &m2, &FGenerator::Kl)?,
            ));
        }
    }
    families.extend([paired, perm, joint]);

    let mut fam = Family::new("weight_bound_suite");
    let mut rng = rng_for(2);
    for _ in 0..instances {
        let k = rng.random_range(2..8);
        let w = WeightVector::new(simplex(&mut rng, k, 0.001))?;
        let w2 = WeightVector::new(simplex(&mut rng, k, 0.001))?;
        for f in [generators(&mut rng), FGenerator::Kl] {
            for r in weight_bound_suite(&w, &w2, &f)?.records() {
                fam.push(r);
            }
        }
    }
    families.push(fam);

    // I_f(m:m') <= I_f(w:w') on a shared basis, and the lumping lower bound.
    let mut mono = Family::new("mixture_fdiv_le_weight_fdiv");
    let mut lump = Family::new("lumping_lower_bound");
    let mut rng = rng_for(3);
    for i in 0..instances {
        let f = generators(&mut rng);
        let k = rng.random_range(2..5);
        let atoms = 6;
        let basis = Arc::new(ComponentBasis::new(pmfs(&mut rng, k, atoms))?);
        let w = weights(&mut rng, k);
        let w2 = weights(&mut rng, k);
        let m = WMixture::new(basis.clone(), w.clone())?;
        let m2 = WMixture::new(basis, w2.clone())?;
        let full = exact_fdiv(&m, &m2, &f)?;
        mono.push(le(
            "fdiv_le_weight_fdiv",
            Estimate::exact(full),
            discrete_fdiv(&w, &w2, &f)?,
        ));
        let h = rng.random_range(2..atoms);
        let mut map: Vec<usize> = (0..atoms).map(|a| a % h).collect();
        map.sort_unstable();
        let part = LumpingPartition::map(map)?;
        lump.push(le(
            "lumped_le_full",
            Estimate::exact(lumping_lower_bound(&m, &m2, &part, &f)?),
            full,
        ));
        // Continuous pair with closed-form KL and an exact lumped side.
        if i % 2 == 0 {
            let g = gaussians(&mut rng, 2);
            let part = LumpingPartition::uniform(-8.0, 8.0, rng.random_range(3..40))?;
            let lb = lumping_lower_bound(&g[0], &g[1], &part, &FGenerator::Kl)?;
            lump.push(le(
                "lumped_kl_le_gaussian_kl",
                Estimate::exact(lb),
                g[0].pairwise_kl(&g[1])?,
            ));
        }
    }
    families.extend([mono, lump]);

    // ε-mixture inequalities on pmf pairs.
    let mut first = Family::new("epsilon_first_inequality");
    let mut second = Family::new("epsilon_second_inequality");
    let mut range = Family::new("kl_epsilon_range");
    let mut rng = rng_for(4);
    for _ in 0..instances {
        let f = generators(&mut rng);
        let n = rng.random_range(2..7);
        let p = Component::pmf(simplex(&mut rng, n, 0.01))?;
        let q = Component::pmf(simplex(&mut rng, n, 0.01))?;
        let pair = EpsilonPair::new(p, q, rng.random_range(0.01..0.99))?;
        let fe = fdiv_epsilon_inequalities(&pair, &f, Evaluation::Exact)?;
        let [a, b]: [InequalityRecord; 2] = fe.records().try_into().expect("two records");
        first.push(a);
        second.push(b);
        for r in kl_epsilon_bounds(&pair, Evaluation::Exact)?.records() {
            range.push(r);
        }
    }
    families.extend([first, second, range]);

    let mut chern = Family::new("chernoff_weight_extrema");
    let mut rng = rng_for(5);
    for _ in 0..instances {
        let k = rng.random_range(2..5);
        let basis = Arc::new(ComponentBasis::new(pmfs(&mut rng, k, 6))?);
        let (w, w2) = (weights(&mut rng, k), weights(&mut rng, k));
        let m = WMixture::new(basis.clone(), w.clone())?;
        let m2 = WMixture::new(basis, w2.clone())?;
        let mut alpha: f64 = rng.random_range(-2.0..2.0);
        if alpha.abs() < 1e-3 || (alpha - 1.0).abs() < 1e-3 {
            alpha = 0.5;
        }
        let (c, _) = chernoff_alpha_exact(&m, &m2, alpha)?;
        let (lo, hi) = chernoff_weight_bounds(&w, &w2, alpha)?;
        let slack = EXACT_SLACK * hi.abs().max(1.0);
        chern.push(InequalityRecord::new(
            "weight_lower_le_coefficient",
            lo,
            c,
            slack,
        ));
        chern.push(InequalityRecord::new(
            "coefficient_le_weight_upper",
            c,
            hi,
            slack,
        ));
    }
    families.push(chern);

    let mut convex = Family::new("convex_sum_inequality");
    let mut rng = rng_for(6);
    for _ in 0..instances {
        let n = rng.random_range(1..7);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..5.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..5.0)).collect();
        let c = convex_sum_inequality_check(&a, &b, &generators(&mut rng))?;
        // Stated as `a f(b/a) <= Σ a_i f(b_i/a_i)`.
        convex.push(InequalityRecord::new(
            "aggregate_le_sum",
            c.rhs,
            c.lhs,
            EXACT_SLACK * (1.0 + c.rhs.abs()),
        ));
    }
    families.push(convex);

    let mut ext = Family::new("extended_kl_unnormalized");
    let mut rng = rng_for(7);
    for _ in 0..instances {
        let k = rng.random_range(2..5);
        let comps: Vec<Vec<f64>> = (0..k).map(|_| simplex(&mut rng, 5, 0.02)).collect();
        let wt: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..3.0)).collect();
        let wt2: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..3.0)).collect();
        let mix = |w: &[f64]| -> Vec<f64> {
            (0..5)
                .map(|a| w.iter().zip(&comps).map(|(wi, c)| wi * c[a]).sum())
                .collect()
        };
        let (a, b) = (mix(&wt), mix(&wt2));
        let lhs = fdiv_pmf(
            &a,
            &b,
            &FGenerator::Kl.extend().expect("kl is differentiable at 1"),
        );
        ext.push(le(
            "extended_kl_le_weight_bound",
            Estimate::exact(lhs),
            extended_kl_unnormalized(&wt, &wt2)?,
        ));
    }
    families.push(ext);

    let families: Vec<FamilySummary> = families.into_iter().map(Family::finish).collect();
    let violations = families.iter().map(|f| f.violations).sum();
    Ok(BoundsReport {
        instances,
        samples,
        seed,
        families,
        violations,
    })
}

pub fn run(cfg: &BoundsConfig, g: &Globals) -> CliResult<CommandOutput> {
    let seed = pick(g.seed, cfg.seed, 0);
    let samples = pick(g.samples, cfg.samples, DEFAULT_SAMPLES);
    let report = bounds_sweep(cfg.instances, samples, seed)?;
    let mut resolved = cfg.clone();
    resolved.seed = Some(seed);
    resolved.samples = Some(samples);
    let failures = report.violations;
    CommandOutput::json("bounds", &report, &resolved, seed, failures)
}

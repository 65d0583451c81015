//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Reference values come from direct sums over atoms or
//! from estimators that never touch the potential oracle.

use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wmix::aggregation::{
    aggregate_dataset, run_distributed_experiment, EstimatorConfig, ShardedDataset,
};
use wmix::bounds::{tv_epsilon, EpsilonPair};
use wmix::density::log_mix;
use wmix::divergence::{mc_estimate_fdiv, mc_estimate_kl_extended, reflexivity_breaking_lambda};
use wmix::geometry::skew_js;
use wmix::{
    Component, ComponentBasis, Density as _, Estimate, EtaVector, Evaluation, FGenerator,
    PotentialOracle, WMixture, WeightVector,
};
use wmix_cli::aggregate::default_truth;
use wmix_cli::config::BasisMode;
use wmix_cli::plot::parse_csv;
use wmix_cli::sweep::bounds_sweep;

const ALPHAS: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];
const EPSILONS: [f64; 5] = [0.01, 0.1, 0.25, 0.4, 0.5];
const S_MC: usize = 1_000_000;
const SIGMAS: f64 = 4.0;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg)
    }
}

fn within(a: Estimate, b: Estimate) -> bool {
    (a.value - b.value).abs() <= SIGMAS * a.stderr.hypot(b.stderr)
}

// ---------------------------------------------------------------- oracles

fn random_simplex(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..k)
        .map(|_| -(1.0 - rng.random::<f64>()).ln() + 0.05)
        .collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// Pointwise mixture of pmf rows.
fn mix_pmf(w: &[f64], comps: &[Vec<f64>]) -> Vec<f64> {
    (0..comps[0].len())
        .map(|a| w.iter().zip(comps).map(|(wi, c)| wi * c[a]).sum())
        .collect()
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| a * (a / b).ln())
        .sum()
}

fn tv(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

fn blend(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(x, y)| (1.0 - t) * x + t * y)
        .collect()
}

struct PmfPair {
    comps: Vec<Vec<f64>>,
    basis: Arc<ComponentBasis>,
    w1: Vec<f64>,
    w2: Vec<f64>,
}

impl PmfPair {
    fn mixtures(&self) -> (WMixture, WMixture) {
        let m = |w: &[f64]| {
            WMixture::new(self.basis.clone(), WeightVector::new(w.to_vec()).unwrap()).unwrap()
        };
        (m(&self.w1), m(&self.w2))
    }

    fn densities(&self) -> (Vec<f64>, Vec<f64>) {
        (
            mix_pmf(&self.w1, &self.comps),
            mix_pmf(&self.w2, &self.comps),
        )
    }
}

fn pmf_pairs(n: usize, seed: u64) -> Vec<PmfPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let k = 2 + i % 5;
            let atoms = k + 1 + rng.random_range(0..3);
            let comps: Vec<Vec<f64>> = (0..k).map(|_| random_simplex(&mut rng, atoms)).collect();
            let basis = ComponentBasis::new(
                comps
                    .iter()
                    .map(|c| Component::pmf(c.clone()).unwrap())
                    .collect(),
            )
            .unwrap();
            PmfPair {
                comps,
                basis: Arc::new(basis),
                w1: random_simplex(&mut rng, k),
                w2: random_simplex(&mut rng, k),
            }
        })
        .collect()
}

fn gaussians(params: &[(f64, f64)]) -> Arc<ComponentBasis> {
    Arc::new(
        ComponentBasis::new(
            params
                .iter()
                .map(|&(m, s)| Component::gaussian(m, s).unwrap())
                .collect(),
        )
        .unwrap(),
    )
}

fn wmix(b: &Arc<ComponentBasis>, w: &[f64]) -> WMixture {
    WMixture::new(b.clone(), WeightVector::new(w.to_vec()).unwrap()).unwrap()
}

/// The five Gaussian-mixture pairs used by the Monte-Carlo criteria.
fn gmm_pairs() -> Vec<(WMixture, WMixture)> {
    let b2 = gaussians(&[(-1.0, 1.0), (1.5, 0.8)]);
    let b2w = gaussians(&[(0.0, 1.0), (0.5, 2.0)]);
    let b3 = gaussians(&[(-2.0, 0.7), (0.0, 1.0), (2.5, 1.2)]);
    vec![
        (wmix(&b2, &[0.3, 0.7]), wmix(&b2, &[0.6, 0.4])),
        (wmix(&b2, &[0.85, 0.15]), wmix(&b2, &[0.25, 0.75])),
        (wmix(&b2w, &[0.5, 0.5]), wmix(&b2w, &[0.1, 0.9])),
        (wmix(&b3, &[0.2, 0.5, 0.3]), wmix(&b3, &[0.4, 0.2, 0.4])),
        (wmix(&b3, &[0.6, 0.3, 0.1]), wmix(&b3, &[0.1, 0.3, 0.6])),
    ]
}

// --------------------------------------------------------------- criteria

fn c1_kl_bregman_exact() -> Outcome {
    let mut worst: f64 = 0.0;
    for (i, pair) in pmf_pairs(1000, 1).iter().enumerate() {
        let (m1, m2) = pair.mixtures();
        let (p, q) = pair.densities();
        let truth = kl(&p, &q);
        let o = PotentialOracle::exact(pair.basis.clone()).map_err(|e| e.to_string())?;
        let b = o.bregman_kl(&m1, &m2).unwrap().value;
        let d = o.canonical_divergence(&m1, &m2).unwrap().value;
        let gap = (truth - b).abs().max((truth - d).abs());
        worst = worst.max(gap);
        check(
            gap <= 1e-10,
            format!("instance {i}: KL {truth} vs B {b} vs D {d}"),
        )?;
    }
    Ok(format!("1000 pairs, max gap {worst:.2e}"))
}

fn c2_kl_bregman_mc() -> Outcome {
    let mut worst: f64 = 0.0;
    for (i, (m1, m2)) in gmm_pairs().iter().enumerate() {
        let direct: Estimate = mc_estimate_kl_extended(m1, m2, S_MC, 100 + i as u64)
            .unwrap()
            .into();
        let o = PotentialOracle::monte_carlo(m1.basis().clone(), S_MC, 200 + i as u64).unwrap();
        let b = o.bregman_kl(m1, m2).unwrap();
        let z = (direct.value - b.value).abs() / direct.stderr.hypot(b.stderr);
        worst = worst.max(z);
        check(within(direct, b), format!("pair {i}: {direct:?} vs {b:?}"))?;
    }
    Ok(format!("5 pairs, max |z| {worst:.2}"))
}

fn c3_young() -> Outcome {
    let mut worst_exact: f64 = 0.0;
    for pair in pmf_pairs(1000, 1) {
        let (m1, m2) = pair.mixtures();
        let o = PotentialOracle::exact(pair.basis.clone()).unwrap();
        for m in [&m1, &m2] {
            let g = o.young_gap(m).unwrap().value.abs();
            worst_exact = worst_exact.max(g);
        }
    }
    check(worst_exact <= 1e-12, format!("exact gap {worst_exact:e}"))?;
    let mut worst_z: f64 = 0.0;
    for (i, (m1, m2)) in gmm_pairs().iter().enumerate() {
        let o = PotentialOracle::monte_carlo(m1.basis().clone(), S_MC, 300 + i as u64).unwrap();
        for m in [m1, m2] {
            let g = o.young_gap(m).unwrap();
            worst_z = worst_z.max(g.value.abs() / g.stderr);
            check(
                g.value.abs() <= SIGMAS * g.stderr,
                format!("pair {i}: {g:?}"),
            )?;
        }
    }
    Ok(format!(
        "exact max {worst_exact:.2e}, MC max |z| {worst_z:.2}"
    ))
}

fn c4_skew_js() -> Outcome {
    let mut worst: f64 = 0.0;
    for pair in pmf_pairs(1000, 1) {
        let (m1, m2) = pair.mixtures();
        let (p, q) = pair.densities();
        let o = PotentialOracle::exact(pair.basis.clone()).unwrap();
        for a in ALPHAS {
            let ma = blend(&p, &q, a);
            let truth = (1.0 - a) * kl(&p, &ma) + a * kl(&q, &ma);
            let js = skew_js(&m1, &m2, a, Evaluation::Exact).unwrap().value;
            let sj = o.skew_jensen(&m1, &m2, a).unwrap().value;
            worst = worst.max((js - sj).abs()).max((truth - sj).abs());
        }
    }
    check(worst <= 1e-12, format!("exact gap {worst:e}"))?;
    let mut worst_z: f64 = 0.0;
    for (i, (m1, m2)) in gmm_pairs().iter().enumerate() {
        let o = PotentialOracle::monte_carlo(m1.basis().clone(), S_MC, 400 + i as u64).unwrap();
        for (j, a) in ALPHAS.into_iter().enumerate() {
            let eval = Evaluation::MonteCarlo {
                samples: S_MC,
                seed: 500 + 10 * i as u64 + j as u64,
            };
            let js = skew_js(m1, m2, a, eval).unwrap();
            let sj = o.skew_jensen(m1, m2, a).unwrap();
            worst_z = worst_z.max((js.value - sj.value).abs() / js.stderr.hypot(sj.stderr));
            check(
                within(js, sj),
                format!("pair {i} alpha {a}: {js:?} vs {sj:?}"),
            )?;
        }
    }
    Ok(format!("exact max {worst:.2e}, MC max |z| {worst_z:.2}"))
}

fn c5_tv_continuity() -> Outcome {
    let mut worst: f64 = 0.0;
    for pair in pmf_pairs(200, 5) {
        let (m1, m2) = pair.mixtures();
        let (p, q) = pair.densities();
        for eps in EPSILONS {
            let direct = tv(&blend(&p, &q, eps), &blend(&q, &p, eps));
            let ep = EpsilonPair::new(m1.clone(), m2.clone(), eps).unwrap();
            let r = tv_epsilon(&ep, Evaluation::Exact).unwrap();
            let gap = (r.tv_eps.value - (1.0 - 2.0 * eps).abs() * tv(&p, &q)).abs();
            worst = worst.max(gap).max((direct - r.tv_eps.value).abs());
        }
    }
    // Zero up to the rounding of sums of a few dozen terms of size <= 1.
    check(worst <= 1e-15 * 64.0, format!("exact gap {worst:e}"))?;
    let mut worst_z: f64 = 0.0;
    for (i, (m1, m2)) in gmm_pairs().iter().enumerate() {
        for (j, eps) in EPSILONS.into_iter().enumerate() {
            let ep = EpsilonPair::new(m1.clone(), m2.clone(), eps).unwrap();
            let eval = Evaluation::MonteCarlo {
                samples: S_MC,
                seed: 600 + 10 * i as u64 + j as u64,
            };
            let r = tv_epsilon(&ep, eval).unwrap();
            let c = (1.0 - 2.0 * eps).abs();
            let rhs = Estimate {
                value: c * r.tv_base.value,
                stderr: c * r.tv_base.stderr,
            };
            if r.tv_eps.stderr.hypot(rhs.stderr) > 0.0 {
                worst_z = worst_z
                    .max((r.tv_eps.value - rhs.value).abs() / r.tv_eps.stderr.hypot(rhs.stderr));
            }
            check(
                (r.tv_eps.value - rhs.value).abs()
                    <= SIGMAS * r.tv_eps.stderr.hypot(rhs.stderr) + 1e-15,
                format!("pair {i} eps {eps}: {:?} vs {rhs:?}", r.tv_eps),
            )?;
        }
    }
    Ok(format!("exact max {worst:.2e}, MC max |z| {worst_z:.2}"))
}

fn c6_bound_suite() -> Outcome {
    let report = bounds_sweep(1000, 20_000, 6).map_err(|e| e.to_string())?;
    let required = [
        "mixture_upper_bound_kl",
        "weight_bound_suite",
        "joint_convexity_bound",
        "lumping_lower_bound",
        "epsilon_first_inequality",
        "epsilon_second_inequality",
        "kl_epsilon_range",
        "chernoff_weight_extrema",
    ];
    for name in required {
        let fam = report
            .families
            .iter()
            .find(|f| f.name == name)
            .ok_or_else(|| format!("family {name} missing"))?;
        check(
            fam.checked >= 1000,
            format!("{name}: only {} records", fam.checked),
        )?;
        check(
            fam.violations == 0,
            format!(
                "{name}: {} violations, worst {:?}",
                fam.violations, fam.worst
            ),
        )?;
    }
    check(
        report.violations == 0,
        format!("{} violations", report.violations),
    )?;
    let total: usize = report.families.iter().map(|f| f.checked).sum();
    Ok(format!(
        "{} families, {total} records, 0 violations",
        report.families.len()
    ))
}

fn c7_aggregation() -> Outcome {
    let cfg = EstimatorConfig::default();
    let truth = default_truth(BasisMode::Pmf);
    let data = ShardedDataset::draw(&truth, 100_000, 10, 7).unwrap();
    let r = aggregate_dataset(&data, &cfg).unwrap();
    // Pooled empirical frequencies of atoms 1 and 2 (η drops atom 0).
    let pooled = data.pooled();
    let n = pooled.len() as f64;
    let freq: Vec<f64> = (1..3)
        .map(|a| pooled.iter().filter(|&&x| x == a as f64).count() as f64 / n)
        .collect();
    let agg = r.aggregate_eta.as_slice();
    let glob = r.global_eta.as_slice();
    for d in 0..2 {
        check(
            (agg[d] - freq[d]).abs() <= 1e-14,
            format!("aggregate {agg:?} vs pooled {freq:?}"),
        )?;
        check(
            (agg[d] - glob[d]).abs() <= 1e-14,
            format!("aggregate {agg:?} vs global {glob:?}"),
        )?;
    }
    let g =
        run_distributed_experiment(&default_truth(BasisMode::Gmm), 100_000, 10, 7, &cfg).unwrap();
    let (a, b) = (g.kl_to_truth.aggregate.value, g.kl_to_truth.global.value);
    check(a < 1e-3, format!("KL(truth:aggregate) = {a}"))?;
    check(
        a <= 2.0 * b,
        format!("KL(truth:aggregate) = {a} vs 2 x {b}"),
    )?;
    Ok(format!("pmf exact; gmm KL agg {a:.3e} glob {b:.3e}"))
}

fn c8_pathologies() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut min_ext = f64::INFINITY;
    for i in 0..20u64 {
        let k = 2 + (i % 2) as usize;
        let params: Vec<(f64, f64)> = (0..k)
            .map(|_| (rng.random_range(-3.0..3.0), rng.random_range(0.5..2.0)))
            .collect();
        let b = gaussians(&params);
        let (m1, m2) = (
            wmix(&b, &random_simplex(&mut rng, k)),
            wmix(&b, &random_simplex(&mut rng, k)),
        );
        let e = mc_estimate_kl_extended(&m1, &m2, S_MC, 800 + i).unwrap();
        min_ext = min_ext.min(e.value);
        check(
            e.value >= 0.0,
            format!("pair {i}: extended estimate {}", e.value),
        )?;
    }
    let mut worst_shift: f64 = 0.0;
    let mut min_exact = f64::INFINITY;
    for (i, pair) in pmf_pairs(20, 9).iter().enumerate() {
        let (m1, m2) = pair.mixtures();
        let (p, q) = pair.densities();
        let r =
            reflexivity_breaking_lambda(&m1, &m2, &FGenerator::Kl, S_MC, 900 + i as u64).unwrap();
        let exact = kl(&p, &q);
        worst_shift = worst_shift.max(r.shifted_estimate.abs());
        min_exact = min_exact.min(exact);
        check(
            r.shifted_estimate.abs() <= 1e-10,
            format!("pair {i}: shifted {}", r.shifted_estimate),
        )?;
        check(exact > 0.0, format!("pair {i}: exact {exact}"))?;
    }
    Ok(format!(
        "min extended {min_ext:.3e}, max |shifted| {worst_shift:.2e}, min exact {min_exact:.3e}"
    ))
}

fn c9_potential_curve() -> Outcome {
    let out = Command::new(env!("CARGO_BIN_EXE_wmix"))
        .args(["plot-potential", "--samples", "1000000", "--seed", "9"])
        .output()
        .map_err(|e| e.to_string())?;
    check(
        out.status.success(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )?;
    let pts = parse_csv(std::str::from_utf8(&out.stdout).unwrap()).map_err(|e| e.to_string())?;
    check(pts.len() == 101, format!("{} points", pts.len()))?;
    let mut worst: f64 = f64::INFINITY;
    for (i, w) in pts.windows(3).enumerate() {
        let d2 = w[0].fstar - 2.0 * w[1].fstar + w[2].fstar;
        let se = (w[0].stderr.powi(2) + 4.0 * w[1].stderr.powi(2) + w[2].stderr.powi(2)).sqrt();
        worst = worst.min(d2 / se);
        check(
            d2 > -SIGMAS * se,
            format!("point {}: second difference {d2} vs stderr {se}", i + 1),
        )?;
    }
    Ok(format!("101 points, min d2/stderr {worst:.2}"))
}

fn c10_fisher_christoffel() -> Outcome {
    let b = Arc::new(
        ComponentBasis::new(vec![
            Component::dirac(0, 2).unwrap(),
            Component::dirac(1, 2).unwrap(),
        ])
        .unwrap(),
    );
    let o = PotentialOracle::exact(b.clone()).unwrap();
    let (mut worst, mut worst_gamma): (f64, f64) = (0.0, 0.0);
    for i in 1..100 {
        let eta = i as f64 / 100.0;
        let m = WMixture::from_eta(b.clone(), &EtaVector::new(vec![eta]).unwrap()).unwrap();
        // η is the mass on atom 1.
        check(
            (m.log_density(1.0).exp() - eta).abs() < 1e-15,
            format!("eta {eta} is not the mass on atom 1"),
        )?;
        let g = o.fisher_information(&m).unwrap().values[0][0];
        let gamma = o.christoffel_symbols(&m).unwrap().values[0][0][0];
        let g_ref = 1.0 / (eta * (1.0 - eta));
        let gamma_ref = 0.5 * (1.0 / (1.0 - eta).powi(2) - 1.0 / (eta * eta));
        // |Γ| reaches 5e3 near the boundary, where 1e-12 is below one ulp;
        // the tolerance on Γ is therefore relative beyond magnitude 1.
        let gamma_gap = (gamma - gamma_ref).abs() / gamma_ref.abs().max(1.0);
        worst = worst.max((g - g_ref).abs());
        worst_gamma = worst_gamma.max(gamma_gap);
        check(
            (g - g_ref).abs() <= 1e-12,
            format!("eta {eta}: g {g} vs {g_ref}"),
        )?;
        check(
            gamma_gap <= 1e-12,
            format!("eta {eta}: gamma {gamma} vs {gamma_ref}"),
        )?;
    }

    let b = gaussians(&[(-2.0, 0.7), (0.0, 1.0), (2.5, 1.2)]);
    let o = PotentialOracle::monte_carlo(b.clone(), S_MC, 10).unwrap();
    let eta = [0.35, 0.25];
    let at =
        |e: &[f64]| WMixture::from_eta(b.clone(), &EtaVector::new(e.to_vec()).unwrap()).unwrap();
    let fim = o.fisher_information(&at(&eta)).unwrap();
    let mut worst_z: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let (hi, hj) = (1e-3, 1e-3);
            let c = 1.0 / (4.0 * hi * hj);
            let mut terms = Vec::new();
            for (si, sj, sign) in [
                (1.0, 1.0, 1.0),
                (1.0, -1.0, -1.0),
                (-1.0, 1.0, -1.0),
                (-1.0, -1.0, 1.0),
            ] {
                let mut e = eta.to_vec();
                e[i] += si * hi;
                e[j] += sj * hj;
                let m = at(&e);
                let w = m.weights().as_slice().to_vec();
                terms.push((sign * c, w.iter().map(|x| x.ln()).collect::<Vec<_>>(), w));
            }
            // Second difference of F* = ∫ m ln m, evaluated draw by draw so the
            // stderr reflects the shared samples.
            let fd = o.integrate_scalar(|l, row| {
                terms
                    .iter()
                    .map(|(c, lw, w)| c * w[l] * log_mix(lw, row))
                    .sum()
            });
            let g = Estimate {
                value: fim.values[i][j],
                stderr: fim.stderr[i][j],
            };
            worst_z = worst_z.max((g.value - fd.value).abs() / g.stderr.hypot(fd.stderr));
            check(within(g, fd), format!("entry ({i},{j}): {g:?} vs {fd:?}"))?;
        }
    }
    Ok(format!(
        "g max abs {worst:.2e}, gamma max rel {worst_gamma:.2e}, MC max |z| {worst_z:.2}"
    ))
}

fn c11_coverage() -> Outcome {
    let b = Arc::new(
        ComponentBasis::new(vec![
            Component::dirac(0, 2).unwrap(),
            Component::dirac(1, 2).unwrap(),
        ])
        .unwrap(),
    );
    let (m1, m2) = (wmix(&b, &[0.5, 0.5]), wmix(&b, &[0.25, 0.75]));
    let target = kl(&[0.5, 0.5], &[0.25, 0.75]);
    let covered = (0..200u64)
        .filter(|&seed| {
            let (lo, hi) = mc_estimate_fdiv(&m1, &m2, &FGenerator::Kl, 10_000, seed)
                .unwrap()
                .ci(0.95);
            lo <= target && target <= hi
        })
        .count() as f64
        / 200.0;
    check(
        (0.90..=0.99).contains(&covered),
        format!("coverage {covered}"),
    )?;
    Ok(format!("coverage {covered:.3} for target {target:.6}"))
}

fn c12_determinism() -> Outcome {
    let dir = std::env::temp_dir().join(format!("wmix-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let file = |name: &str, text: &str| {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p.to_str().unwrap().to_string()
    };
    let pmf = file(
        "pmf.json",
        r#"{"p": {"basis": [{"kind":"pmf","p":[1.0,0.0]},{"kind":"pmf","p":[0.0,1.0]}], "w": [0.5,0.5]},
            "q": {"basis": [{"kind":"pmf","p":[1.0,0.0]},{"kind":"pmf","p":[0.0,1.0]}], "w": [0.25,0.75]},
            "generators": ["kl", "total_variation", "jensen_shannon"]}"#,
    );
    let gmm = file(
        "gmm.json",
        r#"{"p": {"basis": [{"kind":"gaussian","mean":-1.0,"stddev":1.0},{"kind":"gaussian","mean":1.5,"stddev":0.8}], "w": [0.3,0.7]},
            "q": {"basis": [{"kind":"gaussian","mean":-1.0,"stddev":1.0},{"kind":"gaussian","mean":1.5,"stddev":0.8}], "w": [0.6,0.4]},
            "generators": ["kl", "squared_hellinger"]}"#,
    );
    let verify_gmm = file("verify_gmm.json", r#"{"suite": "gmm"}"#);
    let bounds = file("bounds.json", r#"{"instances": 100}"#);
    let cluster_gmm = file(
        "cluster.json",
        r#"{"basis": [{"kind":"gaussian","mean":-2.0,"stddev":1.0},{"kind":"gaussian","mean":2.0,"stddev":1.0}],
            "mixtures": [[0.1,0.9],[0.15,0.85],[0.9,0.1],[0.8,0.2],[0.12,0.88]]}"#,
    );
    let runs: Vec<Vec<String>> = [
        vec!["estimate", "--config", &pmf],
        vec!["estimate", "--config", &gmm, "--samples", "200000"],
        vec!["verify"],
        vec!["verify", "--config", &verify_gmm, "--samples", "100000"],
        vec!["aggregate", "--basis-mode", "pmf", "--n", "20000"],
        vec![
            "aggregate",
            "--basis-mode",
            "gmm",
            "--n",
            "20000",
            "--samples",
            "100000",
        ],
        vec!["cluster"],
        vec!["cluster", "--config", &cluster_gmm, "--samples", "50000"],
        vec!["bounds", "--config", &bounds],
        vec!["plot-potential", "--samples", "20000"],
    ]
    .into_iter()
    .map(|v| v.into_iter().map(String::from).collect())
    .collect();
    for args in &runs {
        let mut outputs = Vec::new();
        for threads in ["1", "1", "3", "8"] {
            let out = Command::new(env!("CARGO_BIN_EXE_wmix"))
                .args(args)
                .args(["--seed", "12", "--threads", threads])
                .output()
                .map_err(|e| e.to_string())?;
            check(
                out.status.success(),
                format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)),
            )?;
            check(!out.stdout.is_empty(), format!("{args:?}: empty output"))?;
            outputs.push(out.stdout);
        }
        check(
            outputs.windows(2).all(|w| w[0] == w[1]),
            format!("{args:?}: outputs differ across runs"),
        )?;
    }
    Ok(format!(
        "{} command configurations x 4 runs (threads 1,1,3,8) byte-identical",
        runs.len()
    ))
}

// ------------------------------------------------------------------ driver

struct Criterion {
    id: usize,
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Outcome,
}

fn main() {
    let criteria = [
        Criterion {
            id: 1,
            name: "KL equals Bregman and canonical divergence (exact)",
            budget: Some(Duration::from_secs(5)),
            run: c1_kl_bregman_exact,
        },
        Criterion {
            id: 2,
            name: "KL equals Bregman divergence (Monte Carlo)",
            budget: Some(Duration::from_secs(120)),
            run: c2_kl_bregman_mc,
        },
        Criterion {
            id: 3,
            name: "Young equality",
            budget: None,
            run: c3_young,
        },
        Criterion {
            id: 4,
            name: "skew Jensen-Shannon equals skew Jensen",
            budget: None,
            run: c4_skew_js,
        },
        Criterion {
            id: 5,
            name: "total variation continuity",
            budget: None,
            run: c5_tv_continuity,
        },
        Criterion {
            id: 6,
            name: "bound suite over randomized instances",
            budget: Some(Duration::from_secs(180)),
            run: c6_bound_suite,
        },
        Criterion {
            id: 7,
            name: "optimal aggregation",
            budget: Some(Duration::from_secs(60)),
            run: c7_aggregation,
        },
        Criterion {
            id: 8,
            name: "estimator pathologies",
            budget: None,
            run: c8_pathologies,
        },
        Criterion {
            id: 9,
            name: "potential curve convexity",
            budget: Some(Duration::from_secs(600)),
            run: c9_potential_curve,
        },
        Criterion {
            id: 10,
            name: "Fisher metric and Christoffel symbols",
            budget: None,
            run: c10_fisher_christoffel,
        },
        Criterion {
            id: 11,
            name: "confidence interval coverage",
            budget: None,
            run: c11_coverage,
        },
        Criterion {
            id: 12,
            name: "CLI determinism across threads",
            budget: None,
            run: c12_determinism,
        },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let mut result = (c.run)();
        let took = start.elapsed();
        if let (Ok(_), Some(b)) = (&result, c.budget) {
            if took > b {
                result = Err(format!("took {took:.1?}, budget {b:?}"));
            }
        }
        match result {
            Ok(detail) => println!("PASS {:>2} {}: {detail} [{took:.1?}]", c.id, c.name),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {}: {why} [{took:.1?}]", c.id, c.name);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

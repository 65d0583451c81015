//! The dually flat geometry of a w-mixture family.
//!
//! Everything here reduces to integrals of the form `Σ_l E_{p_l}[φ_l(x)]`
//! where `φ_l` only depends on the component log densities `ln p_j(x)` at
//! the point. [`PotentialOracle`] evaluates such integrals either exactly
//! (finite alphabets) or by stratified Monte Carlo: every component `p_l`
//! gets its own fixed sample set, and all evaluations reuse those same draws.
//! Identities between potentials are then checked on consistent noise.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::components::{Component, ComponentBasis};
use crate::density::{log_mix, Density, MeasureKind};
use crate::divergence::{
    exact_fdiv, mc_estimate_kl_extended, sample_terms, Evaluation, FGenerator, TAG_DRAWS,
};
use crate::error::{Error, Result};
use crate::mixture::{EtaVector, WMixture};
use crate::stats::{chunk_rng, derive_seed, map_chunks, Estimate, McEstimate, Moments};

/// Mixtures with a weight closer than this to the simplex boundary are
/// rejected by the oracle.
pub const BOUNDARY_GUARD: f64 = 1e-9;
/// Largest cached sample table, in stored log-density values.
pub const TABLE_BUDGET: usize = 1 << 24;
/// Stream tags `TAG_ORACLE + l` carry the draws from component `l`.
pub const TAG_ORACLE: u32 = 0x100;

struct SampleTable {
    /// Row-major `s x k` matrix of `ln p_j(x)` per component sample set.
    rows: Vec<Vec<f64>>,
}

/// Evaluates potentials and their derivatives on one basis.
pub struct PotentialOracle {
    basis: Arc<ComponentBasis>,
    mode: Evaluation,
    table_budget: usize,
    table: OnceLock<Option<SampleTable>>,
}

impl std::fmt::Debug for PotentialOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PotentialOracle")
            .field("basis", &self.basis)
            .field("mode", &self.mode)
            .finish()
    }
}

/// Integrated outputs plus a count of non-finite integrand values.
#[derive(Debug, Clone)]
pub struct Integral {
    pub estimates: Vec<Estimate>,
    pub nonfinite: u64,
}

impl PotentialOracle {
    pub fn new(basis: Arc<ComponentBasis>, mode: Evaluation) -> Result<Self> {
        match mode {
            Evaluation::Exact if basis.measure() != MeasureKind::Counting => {
                return Err(Error::ExactUnavailable)
            }
            Evaluation::MonteCarlo { samples, .. } if samples < 2 => {
                return Err(Error::TooFewSamples {
                    min: 2,
                    got: samples,
                })
            }
            _ => {}
        }
        Ok(PotentialOracle {
            basis,
            mode,
            table_budget: TABLE_BUDGET,
            table: OnceLock::new(),
        })
    }

    /// Caps the cached sample table at `entries` stored values; beyond that
    /// draws are regenerated on every evaluation. Results are identical
    /// either way.
    pub fn with_table_budget(mut self, entries: usize) -> Self {
        self.table_budget = entries;
        self.table = OnceLock::new();
        self
    }

    pub fn exact(basis: Arc<ComponentBasis>) -> Result<Self> {
        PotentialOracle::new(basis, Evaluation::Exact)
    }

    pub fn monte_carlo(basis: Arc<ComponentBasis>, samples: usize, seed: u64) -> Result<Self> {
        PotentialOracle::new(basis, Evaluation::MonteCarlo { samples, seed })
    }

    /// Exact on finite alphabets, Monte Carlo otherwise.
    pub fn auto(basis: Arc<ComponentBasis>, samples: usize, seed: u64) -> Result<Self> {
        if basis.measure() == MeasureKind::Counting {
            PotentialOracle::exact(basis)
        } else {
            PotentialOracle::monte_carlo(basis, samples, seed)
        }
    }

    pub fn basis(&self) -> &Arc<ComponentBasis> {
        &self.basis
    }

    pub fn mode(&self) -> Evaluation {
        self.mode
    }

    pub fn is_exact(&self) -> bool {
        self.mode == Evaluation::Exact
    }

    /// Order `D = k - 1` of the family.
    pub fn dim(&self) -> usize {
        self.basis.len() - 1
    }

    fn components(&self) -> &[Component] {
        self.basis.components()
    }

    fn draw_row<R: Rng + ?Sized>(&self, l: usize, rng: &mut R, row: &mut [f64]) {
        let comps = self.components();
        loop {
            let x = comps[l].sample(rng);
            let own = comps[l].log_density(x);
            if own > f64::NEG_INFINITY {
                for (r, c) in row.iter_mut().zip(comps) {
                    *r = c.log_density(x);
                }
                return;
            }
        }
    }

    fn sample_table(&self) -> Option<&SampleTable> {
        let Evaluation::MonteCarlo { samples, seed } = self.mode else {
            return None;
        };
        self.table
            .get_or_init(|| {
                let k = self.basis.len();
                if k * k * samples > self.table_budget {
                    return None;
                }
                let rows = (0..k)
                    .map(|l| {
                        map_chunks(samples, |c, _, len| {
                            let mut rng = chunk_rng(seed, TAG_ORACLE + l as u32, c);
                            let mut out = vec![0.0; len * k];
                            for row in out.chunks_mut(k) {
                                self.draw_row(l, &mut rng, row);
                            }
                            out
                        })
                        .concat()
                    })
                    .collect();
                Some(SampleTable { rows })
            })
            .as_ref()
    }

    /// `Σ_l E_{p_l}[φ(l, ln p(x))]` for `n_out` simultaneous outputs. The
    /// integrand receives the component index `l`, the vector of component
    /// log densities at the point, and the output buffer to fill.
    pub fn integrate<F>(&self, n_out: usize, phi: F) -> Integral
    where
        F: Fn(usize, &[f64], &mut [f64]) + Sync,
    {
        let k = self.basis.len();
        match self.mode {
            Evaluation::Exact => {
                let atoms: Vec<Vec<f64>> = self
                    .components()
                    .iter()
                    .map(|c| c.atoms().expect("counting basis"))
                    .collect();
                let n = atoms[0].len();
                let rows: Vec<Vec<f64>> = (0..n)
                    .map(|a| {
                        self.components()
                            .iter()
                            .map(|c| c.log_density(a as f64))
                            .collect()
                    })
                    .collect();
                let mut acc = vec![0.0; n_out];
                let mut out = vec![0.0; n_out];
                let mut nonfinite = 0;
                for (l, pmf) in atoms.iter().enumerate().take(k) {
                    for (a, &mass) in pmf.iter().enumerate().take(n) {
                        if mass > 0.0 {
                            phi(l, &rows[a], &mut out);
                            for (s, o) in acc.iter_mut().zip(&out) {
                                if !o.is_finite() {
                                    nonfinite += 1;
                                }
                                *s += mass * o;
                            }
                        }
                    }
                }
                Integral {
                    estimates: acc.into_iter().map(Estimate::exact).collect(),
                    nonfinite,
                }
            }
            Evaluation::MonteCarlo { samples, seed } => {
                let table = self.sample_table();
                let mut value = vec![0.0; n_out];
                let mut var = vec![0.0; n_out];
                let mut nonfinite = 0;
                for l in 0..k {
                    let parts = map_chunks(samples, |c, offset, len| {
                        let mut moments = vec![Moments::default(); n_out];
                        let mut overflow = vec![0.0; n_out];
                        let mut bad = 0u64;
                        let mut out = vec![0.0; n_out];
                        let mut visit = |row: &[f64]| {
                            phi(l, row, &mut out);
                            for ((m, o), v) in moments.iter_mut().zip(&mut overflow).zip(&out) {
                                if v.is_finite() {
                                    m.push(*v);
                                } else {
                                    *o += v;
                                    bad += 1;
                                }
                            }
                        };
                        match table {
                            Some(t) => {
                                for row in t.rows[l][offset * k..(offset + len) * k].chunks(k) {
                                    visit(row);
                                }
                            }
                            None => {
                                let mut rng = chunk_rng(seed, TAG_ORACLE + l as u32, c);
                                let mut row = vec![0.0; k];
                                for _ in 0..len {
                                    self.draw_row(l, &mut rng, &mut row);
                                    visit(&row);
                                }
                            }
                        }
                        (moments, overflow, bad)
                    });
                    let mut merged = vec![Moments::default(); n_out];
                    let mut overflow = vec![0.0; n_out];
                    for (m, o, b) in &parts {
                        for j in 0..n_out {
                            merged[j].merge(&m[j]);
                            overflow[j] += o[j];
                        }
                        nonfinite += b;
                    }
                    for j in 0..n_out {
                        if overflow[j] != 0.0 {
                            value[j] += overflow[j];
                            var[j] = f64::INFINITY;
                        } else {
                            value[j] += merged[j].mean;
                            var[j] += merged[j].variance() / samples as f64;
                        }
                    }
                }
                Integral {
                    estimates: value
                        .into_iter()
                        .zip(var)
                        .map(|(value, v)| Estimate {
                            value,
                            stderr: v.sqrt(),
                        })
                        .collect(),
                    nonfinite,
                }
            }
        }
    }

    /// Single-output convenience wrapper around [`PotentialOracle::integrate`].
    pub fn integrate_scalar<F>(&self, phi: F) -> Estimate
    where
        F: Fn(usize, &[f64]) -> f64 + Sync,
    {
        self.integrate(1, |l, row, out| out[0] = phi(l, row))
            .estimates[0]
    }

    /// Validates a mixture against the oracle's basis and the boundary guard,
    /// returning its log weights.
    pub fn admit(&self, m: &WMixture) -> Result<Vec<f64>> {
        if !(Arc::ptr_eq(m.basis(), &self.basis) || **m.basis() == *self.basis) {
            return Err(Error::BasisMismatch);
        }
        if m.weights().min() < BOUNDARY_GUARD {
            return Err(Error::NearBoundary {
                guard: BOUNDARY_GUARD,
            });
        }
        Ok(m.weights().as_slice().iter().map(|w| w.ln()).collect())
    }

    /// Mixture on the oracle's basis with coordinates `eta`.
    pub fn mixture_at(&self, eta: &EtaVector) -> Result<WMixture> {
        WMixture::from_eta(self.basis.clone(), eta)
    }

    /// Shannon information `F*(η) = -h(m) = ∫ m ln m`.
    pub fn fstar(&self, m: &WMixture) -> Result<Estimate> {
        let lw = self.admit(m)?;
        let w = m.weights().as_slice().to_vec();
        Ok(self.integrate_scalar(|l, row| w[l] * log_mix(&lw, row)))
    }

    pub fn fstar_at(&self, eta: &EtaVector) -> Result<Estimate> {
        self.fstar(&self.mixture_at(eta)?)
    }

    pub fn shannon_information(&self, m: &WMixture) -> Result<Estimate> {
        self.fstar(m)
    }

    /// Differential (or discrete) entropy `h(m)`.
    pub fn entropy(&self, m: &WMixture) -> Result<Estimate> {
        let f = self.fstar(m)?;
        Ok(Estimate {
            value: -f.value,
            stderr: f.stderr,
        })
    }

    /// `h×(p_i : m) = -E_{p_i}[ln m]`, estimated from the draws of `p_i`.
    pub fn cross_entropy_component(&self, i: usize, m: &WMixture) -> Result<Estimate> {
        let lw = self.admit(m)?;
        if i >= self.basis.len() {
            return Err(Error::InvalidArgument(format!(
                "component index {i} out of range"
            )));
        }
        Ok(self.integrate_scalar(|l, row| if l == i { -log_mix(&lw, row) } else { 0.0 }))
    }

    /// `h×(p : m) = -∫ p ln m` for an arbitrary density `p`. Exact on finite
    /// alphabets; otherwise sampled from `p` with a seed derived from the
    /// oracle's.
    pub fn cross_entropy<P: Density>(&self, p: &P, m: &WMixture) -> Result<Estimate> {
        self.admit(m)?;
        if p.measure() != m.measure() {
            return Err(Error::UnsupportedSupport(
                "p and m must share a base measure".into(),
            ));
        }
        match self.mode {
            Evaluation::Exact => {
                let masses = p.atoms().ok_or(Error::ExactUnavailable)?;
                let v = masses
                    .iter()
                    .enumerate()
                    .filter(|(_, pa)| **pa > 0.0)
                    .map(|(a, pa)| -pa * m.log_density(a as f64))
                    .sum();
                Ok(Estimate::exact(v))
            }
            Evaluation::MonteCarlo { samples, seed } => {
                let s = derive_seed(seed, 0xC505);
                let t = sample_terms(p, m, samples, s, TAG_DRAWS, |_, lm| [-lm])?;
                Ok(t.estimate(0, samples, s).into())
            }
        }
    }

    /// The convex conjugate `F(θ) = h×(p_0 : m)`.
    pub fn f_potential(&self, m: &WMixture) -> Result<Estimate> {
        self.cross_entropy_component(0, m)
    }

    /// Natural parameters `θ_i = h×(p_0:m) - h×(p_i:m) = ∂F*/∂η_i`.
    pub fn theta_coordinates(&self, m: &WMixture) -> Result<DualCoordinates> {
        let lw = self.admit(m)?;
        let d = self.dim();
        let res = self.integrate(d, |l, row, out| {
            let lm = log_mix(&lw, row);
            for (i, o) in out.iter_mut().enumerate() {
                *o = if l == i + 1 {
                    lm
                } else if l == 0 {
                    -lm
                } else {
                    0.0
                };
            }
        });
        Ok(DualCoordinates {
            eta: m.eta(),
            theta: res.estimates.iter().map(|e| e.value).collect(),
            stderr_theta: res.estimates.iter().map(|e| e.stderr).collect(),
            warning: nonfinite_warning(res.nonfinite),
        })
    }

    /// `F(θ) + F*(η) - ⟨θ, η⟩`, which vanishes by Young's equality. The
    /// reported stderr combines the three terms' stderrs in quadrature.
    pub fn young_gap(&self, m: &WMixture) -> Result<Estimate> {
        let f = self.f_potential(m)?;
        let fs = self.fstar(m)?;
        let th = self.theta_coordinates(m)?;
        let eta = m.eta();
        let inner: f64 = th
            .theta
            .iter()
            .zip(eta.as_slice())
            .map(|(t, e)| t * e)
            .sum();
        let se_inner: f64 = th
            .stderr_theta
            .iter()
            .zip(eta.as_slice())
            .map(|(s, e)| (s * e).powi(2))
            .sum();
        Ok(Estimate {
            value: f.value + fs.value - inner,
            stderr: (f.stderr.powi(2) + fs.stderr.powi(2) + se_inner).sqrt(),
        })
    }

    /// `g_ij = ∫ (p_i - p_0)(p_j - p_0) / m`, the Hessian of `F*`.
    pub fn fisher_information(&self, m: &WMixture) -> Result<FisherInformation> {
        let lw = self.admit(m)?;
        let d = self.dim();
        let w = m.weights().as_slice().to_vec();
        let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i..d).map(move |j| (i, j))).collect();
        let res = self.integrate(pairs.len(), |l, row, out| {
            let lm = log_mix(&lw, row);
            let r0 = (row[0] - lm).exp();
            let diff: Vec<f64> = (1..=d).map(|i| (row[i] - lm).exp() - r0).collect();
            for (o, &(i, j)) in out.iter_mut().zip(&pairs) {
                *o = w[l] * diff[i] * diff[j];
            }
        });
        let mut values = vec![vec![0.0; d]; d];
        let mut stderr = vec![vec![0.0; d]; d];
        for (e, &(i, j)) in res.estimates.iter().zip(&pairs) {
            values[i][j] = e.value;
            values[j][i] = e.value;
            stderr[i][j] = e.stderr;
            stderr[j][i] = e.stderr;
        }
        let min_eigenvalue = min_eigenvalue(&values);
        Ok(FisherInformation {
            values,
            stderr,
            min_eigenvalue,
        })
    }

    /// `Γ_ijk = -½ ∫ f_i f_j f_k / m²` with `f_i = p_i - p_0`; equals half
    /// the third derivative of `F*`.
    pub fn christoffel_symbols(&self, m: &WMixture) -> Result<ChristoffelSymbols> {
        let lw = self.admit(m)?;
        let d = self.dim();
        let w = m.weights().as_slice().to_vec();
        let triples: Vec<(usize, usize, usize)> = (0..d)
            .flat_map(|i| (i..d).flat_map(move |j| (j..d).map(move |k| (i, j, k))))
            .collect();
        let res = self.integrate(triples.len(), |l, row, out| {
            let lm = log_mix(&lw, row);
            let r0 = (row[0] - lm).exp();
            let diff: Vec<f64> = (1..=d).map(|i| (row[i] - lm).exp() - r0).collect();
            for (o, &(i, j, k)) in out.iter_mut().zip(&triples) {
                *o = -0.5 * w[l] * diff[i] * diff[j] * diff[k];
            }
        });
        let mut values = vec![vec![vec![0.0; d]; d]; d];
        let mut stderr = values.clone();
        for (e, &(i, j, k)) in res.estimates.iter().zip(&triples) {
            for (a, b, c) in [
                (i, j, k),
                (i, k, j),
                (j, i, k),
                (j, k, i),
                (k, i, j),
                (k, j, i),
            ] {
                values[a][b][c] = e.value;
                stderr[a][b][c] = e.stderr;
            }
        }
        Ok(ChristoffelSymbols { values, stderr })
    }

    fn pair(&self, m1: &WMixture, m2: &WMixture) -> Result<(Vec<f64>, Vec<f64>)> {
        if !m1.same_basis(m2) {
            return Err(Error::BasisMismatch);
        }
        Ok((self.admit(m1)?, self.admit(m2)?))
    }

    /// `B_{F*}(η1:η2) = F*(η1) - F*(η2) - ⟨η1 - η2, ∇F*(η2)⟩`, evaluated term
    /// by term on shared draws; equals `KL(m1:m2)`.
    pub fn bregman_kl(&self, m1: &WMixture, m2: &WMixture) -> Result<Estimate> {
        let (lw1, lw2) = self.pair(m1, m2)?;
        let w1 = m1.weights().as_slice().to_vec();
        let w2 = m2.weights().as_slice().to_vec();
        let de: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| a - b).collect();
        Ok(self.integrate_scalar(|l, row| {
            let l1 = log_mix(&lw1, row);
            let l2 = log_mix(&lw2, row);
            let grad = grad_term(l, &de, l2);
            w1[l] * l1 - w2[l] * l2 - grad
        }))
    }

    /// `D_{F*,F}(η1:θ2) = F*(η1) + F(θ2) - ⟨η1, θ2⟩`.
    pub fn canonical_divergence(&self, m1: &WMixture, m2: &WMixture) -> Result<Estimate> {
        let (lw1, lw2) = self.pair(m1, m2)?;
        let w1 = m1.weights().as_slice().to_vec();
        Ok(self.integrate_scalar(|l, row| {
            let l1 = log_mix(&lw1, row);
            let l2 = log_mix(&lw2, row);
            let f2 = if l == 0 { -l2 } else { 0.0 };
            w1[l] * l1 + f2 - grad_term(l, &w1, l2)
        }))
    }

    /// `⟨η2 - η1, θ2 - θ1⟩`, the Jeffreys divergence `KL(m1:m2) + KL(m2:m1)`.
    pub fn jeffreys_mixed(&self, m1: &WMixture, m2: &WMixture) -> Result<Estimate> {
        let (lw1, lw2) = self.pair(m1, m2)?;
        let de: Vec<f64> = m2
            .weights()
            .as_slice()
            .iter()
            .zip(m1.weights().as_slice())
            .map(|(a, b)| a - b)
            .collect();
        Ok(self
            .integrate_scalar(|l, row| grad_term(l, &de, log_mix(&lw2, row) - log_mix(&lw1, row))))
    }

    /// `J_{F*,α}(η1:η2) = (1-α)F*(η1) + αF*(η2) - F*((1-α)η1 + αη2)`.
    pub fn skew_jensen(&self, m1: &WMixture, m2: &WMixture, alpha: f64) -> Result<Estimate> {
        check_open_alpha(alpha)?;
        let (lw1, lw2) = self.pair(m1, m2)?;
        let ma = m1.convex_combine(m2, alpha)?;
        let lwa = self.admit(&ma)?;
        let w1 = m1.weights().as_slice().to_vec();
        let w2 = m2.weights().as_slice().to_vec();
        let wa = ma.weights().as_slice().to_vec();
        Ok(self.integrate_scalar(|l, row| {
            (1.0 - alpha) * w1[l] * log_mix(&lw1, row) + alpha * w2[l] * log_mix(&lw2, row)
                - wa[l] * log_mix(&lwa, row)
        }))
    }

    /// `F*` and `F` along a grid of `η_1` values for a two-component family.
    pub fn potential_curve(&self, etas: &[f64]) -> Result<Vec<PotentialPoint>> {
        if self.dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: self.dim(),
            });
        }
        etas.iter()
            .map(|&e| {
                let m = self.mixture_at(&EtaVector::new(vec![e])?)?;
                let fs = self.fstar(&m)?;
                let f = self.f_potential(&m)?;
                Ok(PotentialPoint {
                    eta: e,
                    fstar: fs.value,
                    stderr: fs.stderr,
                    f: f.value,
                    stderr_f: f.stderr,
                })
            })
            .collect()
    }
}

/// Contribution of sample set `l` to `Σ_{i>=1} c_i (E_{p_i} - E_{p_0})[v]`,
/// with `c` indexed by component (entry 0 unused).
fn grad_term(l: usize, c: &[f64], v: f64) -> f64 {
    if l == 0 {
        -c[1..].iter().sum::<f64>() * v
    } else {
        c[l] * v
    }
}

fn nonfinite_warning(n: u64) -> Option<String> {
    (n > 0).then(|| format!("{n} non-finite integrand values; the defining integral may diverge"))
}

fn check_open_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::AlphaOutOfRange(alpha))
    }
}

/// Smallest eigenvalue of a symmetric matrix given as rows.
pub fn min_eigenvalue(rows: &[Vec<f64>]) -> f64 {
    let d = rows.len();
    if d == 0 {
        return f64::NAN;
    }
    let m = DMatrix::from_fn(d, d, |i, j| rows[i][j]);
    SymmetricEigen::new(m)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Mixture and natural coordinates of one mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualCoordinates {
    pub eta: EtaVector,
    pub theta: Vec<f64>,
    /// Zero in exact mode.
    pub stderr_theta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FisherInformation {
    pub values: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChristoffelSymbols {
    pub values: Vec<Vec<Vec<f64>>>,
    pub stderr: Vec<Vec<Vec<f64>>>,
}

/// One row of a potential plot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialPoint {
    pub eta: f64,
    pub fstar: f64,
    pub stderr: f64,
    pub f: f64,
    pub stderr_f: f64,
}

/// Skew Jensen-Shannon divergence `(1-α) KL(m1:mα) + α KL(m2:mα)` with
/// `mα = (1-α) m1 + α m2`, computed directly from the densities.
pub fn skew_js(m1: &WMixture, m2: &WMixture, alpha: f64, eval: Evaluation) -> Result<Estimate> {
    check_open_alpha(alpha)?;
    let ma = m1.convex_combine(m2, alpha)?;
    match eval {
        Evaluation::Exact => {
            let a = exact_fdiv(m1, &ma, &FGenerator::Kl)?;
            let b = exact_fdiv(m2, &ma, &FGenerator::Kl)?;
            Ok(Estimate::exact((1.0 - alpha) * a + alpha * b))
        }
        Evaluation::MonteCarlo { samples, seed } => {
            skew_js_mc(m1, m2, alpha, samples, seed).map(Estimate::from)
        }
    }
}

/// Monte-Carlo skew Jensen-Shannon divergence from `s` draws per term, using
/// the nonnegative extended-KL estimator for both terms.
pub fn skew_js_mc(
    m1: &WMixture,
    m2: &WMixture,
    alpha: f64,
    s: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_open_alpha(alpha)?;
    let ma = m1.convex_combine(m2, alpha)?;
    let a = mc_estimate_kl_extended(m1, &ma, s, derive_seed(seed, 1))?;
    let b = mc_estimate_kl_extended(m2, &ma, s, derive_seed(seed, 2))?;
    Ok(McEstimate {
        value: (1.0 - alpha) * a.value + alpha * b.value,
        stderr: ((1.0 - alpha) * a.stderr).hypot(alpha * b.stderr),
        samples: s,
        seed,
        rejected: a.rejected + b.rejected,
        max_ratio: a.max_ratio.max(b.max_ratio),
    })
}

/// Closed-form bracket on a mixture's entropy from pairwise divergences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropyBounds {
    pub lower: f64,
    pub upper: f64,
}

/// `Σ w_i h(p_i) - Σ w_i ln Σ_j w_j e^{-D(p_i:p_j)}` with `D` the
/// Bhattacharyya distance (lower bound) or the KL divergence (upper bound).
pub fn entropy_bounds(m: &WMixture) -> Result<EntropyBounds> {
    let comps = m.basis().components();
    let w = m.weights().as_slice();
    let base: f64 = w.iter().zip(comps).map(|(wi, c)| wi * c.entropy()).sum();
    let mut lower = base;
    let mut upper = base;
    for (i, ci) in comps.iter().enumerate() {
        let mut sb = 0.0;
        let mut sk = 0.0;
        for (wj, cj) in w.iter().zip(comps) {
            sb += wj * (-ci.pairwise_bhattacharyya(cj)?).exp();
            sk += wj * (-ci.pairwise_kl(cj)?).exp();
        }
        lower -= w[i] * sb.ln();
        upper -= w[i] * sk.ln();
    }
    Ok(EntropyBounds { lower, upper })
}

/// Chernoff coefficient and the induced α-divergence.
#[derive(Debug, Clone, PartialEq)]
pub struct ChernoffEstimate {
    /// `c_α(p:q) = ∫ p^α q^{1-α}`.
    pub coefficient: McEstimate,
    /// `(1 - c_α) / (α (1 - α))`.
    pub divergence: McEstimate,
}

fn check_chernoff_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha == 0.0 || alpha == 1.0 {
        Err(Error::AlphaOutOfRange(alpha))
    } else {
        Ok(())
    }
}

/// Estimates `c_α = E_q[(p/q)^α]` from `s` draws of `q`.
pub fn chernoff_alpha_divergence<P: Density, Q: Density>(
    p: &P,
    q: &Q,
    alpha: f64,
    s: usize,
    seed: u64,
) -> Result<ChernoffEstimate> {
    check_chernoff_alpha(alpha)?;
    let t = sample_terms(q, p, s, seed, TAG_DRAWS, |lq, lp| {
        [(alpha * (lp - lq)).exp()]
    })?;
    let coefficient = t.estimate(0, s, seed);
    let scale = alpha * (1.0 - alpha);
    let mut divergence = coefficient.clone();
    divergence.value = (1.0 - coefficient.value) / scale;
    divergence.stderr = coefficient.stderr / scale.abs();
    Ok(ChernoffEstimate {
        coefficient,
        divergence,
    })
}

/// Exact `(c_α, I_α)` on a finite alphabet.
pub fn chernoff_alpha_exact<P: Density, Q: Density>(
    p: &P,
    q: &Q,
    alpha: f64,
) -> Result<(f64, f64)> {
    check_chernoff_alpha(alpha)?;
    let (a, b) = crate::density::common_atoms(p, q).ok_or(Error::ExactUnavailable)?;
    let c: f64 = a
        .iter()
        .zip(&b)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| x.powf(alpha) * y.powf(1.0 - alpha))
        .sum();
    Ok((c, (1.0 - c) / (alpha * (1.0 - alpha))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::WeightVector;

    fn dirac2() -> Arc<ComponentBasis> {
        Arc::new(
            ComponentBasis::new(vec![
                Component::dirac(0, 2).unwrap(),
                Component::dirac(1, 2).unwrap(),
            ])
            .unwrap(),
        )
    }

    fn mix(b: &Arc<ComponentBasis>, w: &[f64]) -> WMixture {
        WMixture::new(b.clone(), WeightVector::new(w.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn categorical_examples() {
        let b = dirac2();
        let o = PotentialOracle::exact(b.clone()).unwrap();
        let half = mix(&b, &[0.5, 0.5]);
        let m = mix(&b, &[0.25, 0.75]);
        assert!((o.fstar(&half).unwrap().value + 2f64.ln()).abs() < 1e-15);
        let fs = o.fstar(&m).unwrap().value;
        assert!((fs - (0.25 * 0.25f64.ln() + 0.75 * 0.75f64.ln())).abs() < 1e-15);
        assert!((fs + 0.562335).abs() < 1e-6);

        let p0 = Component::dirac(0, 2).unwrap();
        let ce = o.cross_entropy(&p0, &m).unwrap().value;
        assert!((ce + 0.25f64.ln()).abs() < 1e-15);
        assert!((o.f_potential(&m).unwrap().value - 1.386294).abs() < 1e-6);
        assert_eq!(o.cross_entropy(&m, &m).unwrap().value + fs, 0.0);

        let th = o.theta_coordinates(&m).unwrap();
        assert!((th.theta[0] - 3f64.ln()).abs() < 1e-15);
        assert_eq!(th.stderr_theta, vec![0.0]);
        assert_eq!(o.theta_coordinates(&half).unwrap().theta, vec![0.0]);

        assert!(o.young_gap(&m).unwrap().value.abs() < 1e-12);
        assert!(o.young_gap(&half).unwrap().value.abs() < 1e-15);

        let g = o.fisher_information(&half).unwrap();
        assert!((g.values[0][0] - 4.0).abs() < 1e-14);
        let g = o.fisher_information(&m).unwrap();
        assert!((g.values[0][0] - (4.0 + 1.0 / 0.75)).abs() < 1e-13);
        assert!(g.min_eigenvalue > 0.0);

        let c = o.christoffel_symbols(&half).unwrap();
        assert!(c.values[0][0][0].abs() < 1e-13);
        // η = 0.25 means w = (0.75, 0.25).
        let c = o.christoffel_symbols(&mix(&b, &[0.75, 0.25])).unwrap();
        assert!((c.values[0][0][0] + 0.5 * (16.0 - 1.0 / 0.5625)).abs() < 1e-12);
        assert!((c.values[0][0][0] + 7.111111).abs() < 1e-6);
    }

    #[test]
    fn categorical_divergences() {
        let b = dirac2();
        let o = PotentialOracle::exact(b.clone()).unwrap();
        let m1 = mix(&b, &[0.5, 0.5]);
        let m2 = mix(&b, &[0.25, 0.75]);
        let kl = 0.5 * (0.5f64 / 0.25).ln() + 0.5 * (0.5f64 / 0.75).ln();
        assert!((o.bregman_kl(&m1, &m2).unwrap().value - kl).abs() < 1e-15);
        assert!((o.canonical_divergence(&m1, &m2).unwrap().value - kl).abs() < 1e-15);
        assert_eq!(o.bregman_kl(&m1, &m1).unwrap().value, 0.0);
        assert!(o.canonical_divergence(&m2, &m2).unwrap().value.abs() < 1e-15);
        let j = o.jeffreys_mixed(&m1, &m2).unwrap().value;
        assert!((j - 0.25 * 3f64.ln()).abs() < 1e-15);
        assert_eq!(o.jeffreys_mixed(&m1, &m1).unwrap().value, 0.0);

        let a = mix(&b, &[0.9, 0.1]);
        let c = mix(&b, &[0.1, 0.9]);
        let h01 = -(0.1 * 0.1f64.ln() + 0.9 * 0.9f64.ln());
        let sj = o.skew_jensen(&a, &c, 0.5).unwrap().value;
        assert!((sj - (2f64.ln() - h01)).abs() < 1e-15);
        let js = skew_js(&a, &c, 0.5, Evaluation::Exact).unwrap().value;
        assert!((js - sj).abs() < 1e-12);
        assert!((sj - 0.368064).abs() < 1e-6);
        assert!(o.skew_jensen(&a, &a, 0.3).unwrap().value.abs() < 1e-15);
        assert!(matches!(
            o.skew_jensen(&a, &c, 1.0),
            Err(Error::AlphaOutOfRange(_))
        ));
    }

    #[test]
    fn guard_and_basis_checks() {
        let b = dirac2();
        let o = PotentialOracle::exact(b.clone()).unwrap();
        let edge = mix(&b, &[1.0 - 1e-10, 1e-10]);
        assert!(matches!(o.fstar(&edge), Err(Error::NearBoundary { .. })));
        let other = Arc::new(
            ComponentBasis::new(vec![
                Component::pmf(vec![0.5, 0.5]).unwrap(),
                Component::dirac(1, 2).unwrap(),
            ])
            .unwrap(),
        );
        assert_eq!(
            o.fstar(&mix(&other, &[0.5, 0.5])),
            Err(Error::BasisMismatch)
        );
        let g = Arc::new(
            ComponentBasis::new(vec![
                Component::gaussian(0.0, 1.0).unwrap(),
                Component::gaussian(1.0, 1.0).unwrap(),
            ])
            .unwrap(),
        );
        assert_eq!(
            PotentialOracle::exact(g).unwrap_err(),
            Error::ExactUnavailable
        );
    }

    #[test]
    fn chernoff_examples() {
        let b = dirac2();
        let p = mix(&b, &[0.5, 0.5]);
        let q = mix(&b, &[0.25, 0.75]);
        let (c, i) = chernoff_alpha_exact(&p, &q, 0.5).unwrap();
        assert!((c - (0.125f64.sqrt() + 0.375f64.sqrt())).abs() < 1e-15);
        assert!((c - 0.965926).abs() < 1e-6);
        assert!((i - 0.136297).abs() < 1e-6);
        let (c, i) = chernoff_alpha_exact(&p, &p, 0.3).unwrap();
        assert!((c - 1.0).abs() < 1e-15 && i.abs() < 1e-14);
        let mc = chernoff_alpha_divergence(&p, &p, 0.3, 1000, 1).unwrap();
        assert!((mc.coefficient.value - 1.0).abs() < 1e-15);
        assert!(chernoff_alpha_divergence(&p, &q, 1.0, 1000, 1).is_err());
    }

    #[test]
    fn entropy_bound_examples() {
        let b = dirac2();
        let m = mix(&b, &[0.3, 0.7]);
        let eb = entropy_bounds(&m).unwrap();
        let h = -(0.3 * 0.3f64.ln() + 0.7 * 0.7f64.ln());
        assert!(eb.lower <= h + 1e-15 && h <= eb.upper + 1e-15);
        let g = Arc::new(
            ComponentBasis::new(vec![
                Component::gaussian(0.0, 1.0).unwrap(),
                Component::gaussian(20.0, 1.0).unwrap(),
            ])
            .unwrap(),
        );
        let eb = entropy_bounds(&mix(&g, &[0.5, 0.5])).unwrap();
        let h = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln() + 2f64.ln();
        assert!(eb.lower <= h && h <= eb.upper);
        assert!(eb.upper - eb.lower < 1e-12);
        let eb = entropy_bounds(&mix(&g, &[1.0 - 1e-9, 1e-9])).unwrap();
        let h0 = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
        assert!((eb.lower - h0).abs() < 1e-6 && (eb.upper - h0).abs() < 1e-6);
        let c = Arc::new(
            ComponentBasis::new(vec![
                Component::cauchy(0.0, 1.0).unwrap(),
                Component::gaussian(1.0, 1.0).unwrap(),
            ])
            .unwrap(),
        );
        assert!(matches!(
            entropy_bounds(&mix(&c, &[0.5, 0.5])),
            Err(Error::UnsupportedPair(..))
        ));
    }
}

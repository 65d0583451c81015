//! w-mixtures: convex combinations of a fixed component basis, their weight
//! and η coordinate charts, evaluation, sampling and closure under mixing.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::components::{sample_categorical, Component, ComponentBasis};
use crate::density::{log_mix, Density, MeasureKind};
use crate::error::{Error, Result};

/// Smallest admissible weight; boundary points of the simplex are rejected.
pub const WEIGHT_FLOOR: f64 = 1e-12;
/// Tolerance on `Σ w_i = 1`.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// A point of the open probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::SimplexViolation("empty weight vector".into()));
        }
        if let Some((i, x)) = w
            .iter()
            .enumerate()
            .find(|(_, x)| !x.is_finite() || **x < WEIGHT_FLOOR)
        {
            return Err(Error::SimplexViolation(format!(
                "weight w[{i}] = {x} is not strictly positive (floor {WEIGHT_FLOOR:e})"
            )));
        }
        let total: f64 = w.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::SimplexViolation(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(WeightVector(w))
    }

    /// Normalizes strictly positive raw weights onto the simplex.
    pub fn normalized(raw: &[f64]) -> Result<Self> {
        let total: f64 = raw.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::SimplexViolation(
                "weights must have positive finite total".into(),
            ));
        }
        WeightVector::new(raw.iter().map(|x| x / total).collect())
    }

    pub fn uniform(k: usize) -> Result<Self> {
        WeightVector::new(vec![1.0 / k as f64; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Drops `w_0`: `η_i = w_i` for `i >= 1`.
    pub fn to_eta(&self) -> Result<EtaVector> {
        if self.0.len() < 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: self.0.len(),
            });
        }
        EtaVector::new(self.0[1..].to_vec())
    }

    /// Reorders the weights: entry `i` of the result is `w[perm[i]]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: perm.len(),
            });
        }
        Ok(WeightVector(perm.iter().map(|&i| self.0[i]).collect()))
    }
}

impl<'de> Deserialize<'de> for WeightVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        WeightVector::new(Vec::<f64>::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

/// Mixture coordinates `η ∈ H° = {η > 0, Σ η < 1}` of dimension `D = k - 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct EtaVector(Vec<f64>);

impl EtaVector {
    pub fn new(eta: Vec<f64>) -> Result<Self> {
        if eta.is_empty() {
            return Err(Error::SimplexViolation("empty eta vector".into()));
        }
        if eta.iter().any(|x| !x.is_finite() || *x <= 0.0) {
            return Err(Error::SimplexViolation("eta entries must be > 0".into()));
        }
        let total: f64 = eta.iter().sum();
        if total >= 1.0 {
            return Err(Error::SimplexViolation(format!(
                "eta entries sum to {total}, must be < 1"
            )));
        }
        Ok(EtaVector(eta))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Order `D` of the mixture family.
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// The implicit weight `η_0 = 1 - Σ η_i` of the first component.
    pub fn eta0(&self) -> f64 {
        1.0 - self.0.iter().sum::<f64>()
    }

    pub fn to_weights(&self) -> Result<WeightVector> {
        let mut w = Vec::with_capacity(self.0.len() + 1);
        w.push(self.eta0());
        w.extend_from_slice(&self.0);
        WeightVector::new(w)
    }
}

impl<'de> Deserialize<'de> for EtaVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        EtaVector::new(Vec::<f64>::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

pub fn weights_to_eta(w: &WeightVector) -> Result<EtaVector> {
    w.to_eta()
}

pub fn eta_to_weights(eta: &EtaVector, k: usize) -> Result<WeightVector> {
    if eta.dim() + 1 != k {
        return Err(Error::DimensionMismatch {
            expected: k - 1,
            got: eta.dim(),
        });
    }
    eta.to_weights()
}

/// `m(x; w) = Σ w_i p_i(x)` over a shared basis.
#[derive(Debug, Clone)]
pub struct WMixture {
    basis: Arc<ComponentBasis>,
    weights: WeightVector,
    log_weights: Vec<f64>,
}

impl PartialEq for WMixture {
    fn eq(&self, other: &Self) -> bool {
        self.same_basis(other) && self.weights == other.weights
    }
}

impl WMixture {
    pub fn new(basis: Arc<ComponentBasis>, weights: WeightVector) -> Result<Self> {
        if weights.len() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                got: weights.len(),
            });
        }
        let log_weights = weights.as_slice().iter().map(|w| w.ln()).collect();
        Ok(WMixture {
            basis,
            weights,
            log_weights,
        })
    }

    pub fn from_eta(basis: Arc<ComponentBasis>, eta: &EtaVector) -> Result<Self> {
        let k = basis.len();
        WMixture::new(basis, eta_to_weights(eta, k)?)
    }

    /// Same basis, different weights.
    pub fn with_weights(&self, weights: WeightVector) -> Result<Self> {
        WMixture::new(self.basis.clone(), weights)
    }

    pub fn basis(&self) -> &Arc<ComponentBasis> {
        &self.basis
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn eta(&self) -> EtaVector {
        self.weights.to_eta().expect("basis has k >= 2")
    }

    pub fn same_basis(&self, other: &WMixture) -> bool {
        Arc::ptr_eq(&self.basis, &other.basis) || *self.basis == *other.basis
    }

    /// Log density from precomputed component log densities `ln p_j(x)`.
    pub fn log_density_from(&self, component_log_densities: &[f64]) -> f64 {
        log_mix(&self.log_weights, component_log_densities)
    }

    /// Draws `n >= 1` points by ancestral sampling: a component index from
    /// `Categorical(w)`, then a draw from that component.
    pub fn sample_n<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::TooFewSamples { min: 1, got: 0 });
        }
        Ok((0..n).map(|_| self.sample(rng)).collect())
    }

    /// Draws one point and reports which component produced it.
    pub fn sample_labeled<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, f64) {
        let i = sample_categorical(self.weights.as_slice(), rng);
        (i, self.basis.components()[i].sample(rng))
    }

    /// `(1 - α) m1 + α m2`, again a w-mixture on the same basis.
    pub fn convex_combine(&self, other: &WMixture, alpha: f64) -> Result<WMixture> {
        if !self.same_basis(other) {
            return Err(Error::BasisMismatch);
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidArgument(format!(
                "alpha = {alpha} outside [0, 1]"
            )));
        }
        if alpha == 0.0 {
            return Ok(self.clone());
        }
        if alpha == 1.0 {
            return Ok(other.clone());
        }
        let w: Vec<f64> = self
            .weights
            .as_slice()
            .iter()
            .zip(other.weights.as_slice())
            .map(|(a, b)| (1.0 - alpha) * a + alpha * b)
            .collect();
        WMixture::new(self.basis.clone(), WeightVector::new(w)?)
    }

    pub fn to_finite(&self) -> FiniteMixture {
        FiniteMixture {
            components: self.basis.components().to_vec(),
            weights: self.weights.clone(),
        }
    }
}

pub fn mixture_log_density(m: &WMixture, x: f64) -> f64 {
    m.log_density(x)
}

pub fn sample_mixture<R: Rng + ?Sized>(m: &WMixture, rng: &mut R, n: usize) -> Result<Vec<f64>> {
    m.sample_n(rng, n)
}

pub fn convex_combine(m1: &WMixture, m2: &WMixture, alpha: f64) -> Result<WMixture> {
    m1.convex_combine(m2, alpha)
}

fn component_log_densities(components: &[Component], x: f64, out: &mut [f64]) {
    for (o, c) in out.iter_mut().zip(components) {
        *o = c.log_density(x);
    }
}

impl Density for WMixture {
    fn log_density(&self, x: f64) -> f64 {
        let comps = self.basis.components();
        let mut buf = [0.0; 16];
        if comps.len() <= buf.len() {
            let buf = &mut buf[..comps.len()];
            component_log_densities(comps, x, buf);
            log_mix(&self.log_weights, buf)
        } else {
            let mut v = vec![0.0; comps.len()];
            component_log_densities(comps, x, &mut v);
            log_mix(&self.log_weights, &v)
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sample_labeled(rng).1
    }

    fn measure(&self) -> MeasureKind {
        self.basis.measure()
    }

    fn cdf(&self, x: f64) -> f64 {
        self.weights
            .as_slice()
            .iter()
            .zip(self.basis.components())
            .map(|(w, c)| w * c.cdf(x))
            .sum()
    }

    fn sf(&self, x: f64) -> f64 {
        self.weights
            .as_slice()
            .iter()
            .zip(self.basis.components())
            .map(|(w, c)| w * c.sf(x))
            .sum()
    }

    fn interval_mass(&self, a: f64, b: f64) -> f64 {
        self.weights
            .as_slice()
            .iter()
            .zip(self.basis.components())
            .map(|(w, c)| w * c.interval_mass(a, b))
            .sum()
    }

    fn atoms(&self) -> Option<Vec<f64>> {
        mix_atoms(self.basis.components(), self.weights.as_slice())
    }
}

fn mix_atoms(components: &[Component], w: &[f64]) -> Option<Vec<f64>> {
    let n = components
        .iter()
        .map(|c| c.atoms().map(|a| a.len()))
        .max()??;
    let mut out = vec![0.0; n];
    for (c, wi) in components.iter().zip(w) {
        for (o, a) in out.iter_mut().zip(c.atoms()?) {
            *o += wi * a;
        }
    }
    Some(out)
}

/// A general finite mixture whose components need not form a basis (any
/// `k >= 1`, duplicates allowed). Used for bounds between mixtures with
/// different components.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMixture {
    pub components: Vec<Component>,
    pub weights: WeightVector,
}

impl FiniteMixture {
    pub fn new(components: Vec<Component>, weights: WeightVector) -> Result<Self> {
        if components.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: components.len(),
                got: weights.len(),
            });
        }
        let components = components
            .into_iter()
            .map(Component::validated)
            .collect::<Result<Vec<_>>>()?;
        if components
            .iter()
            .any(|c| c.measure() != components[0].measure())
        {
            return Err(Error::InvalidBasis(
                "components must share one base measure".into(),
            ));
        }
        Ok(FiniteMixture {
            components,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

impl Density for FiniteMixture {
    fn log_density(&self, x: f64) -> f64 {
        let lw: Vec<f64> = self.weights.as_slice().iter().map(|w| w.ln()).collect();
        let mut ld = vec![0.0; self.components.len()];
        component_log_densities(&self.components, x, &mut ld);
        log_mix(&lw, &ld)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let i = sample_categorical(self.weights.as_slice(), rng);
        self.components[i].sample(rng)
    }

    fn measure(&self) -> MeasureKind {
        self.components[0].measure()
    }

    fn cdf(&self, x: f64) -> f64 {
        self.weights
            .as_slice()
            .iter()
            .zip(&self.components)
            .map(|(w, c)| w * c.cdf(x))
            .sum()
    }

    fn sf(&self, x: f64) -> f64 {
        self.weights
            .as_slice()
            .iter()
            .zip(&self.components)
            .map(|(w, c)| w * c.sf(x))
            .sum()
    }

    fn interval_mass(&self, a: f64, b: f64) -> f64 {
        self.weights
            .as_slice()
            .iter()
            .zip(&self.components)
            .map(|(w, c)| w * c.interval_mass(a, b))
            .sum()
    }

    fn atoms(&self) -> Option<Vec<f64>> {
        mix_atoms(&self.components, self.weights.as_slice())
    }
}

/// Wire form `{"basis": [...], "w": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WMixtureJson {
    pub basis: Vec<Component>,
    pub w: Vec<f64>,
}

impl Serialize for WMixture {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        WMixtureJson {
            basis: self.basis.components().to_vec(),
            w: self.weights.as_slice().to_vec(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for WMixture {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = WMixtureJson::deserialize(d)?;
        let basis = ComponentBasis::new(raw.basis).map_err(serde::de::Error::custom)?;
        let w = WeightVector::new(raw.w).map_err(serde::de::Error::custom)?;
        WMixture::new(Arc::new(basis), w).map_err(serde::de::Error::custom)
    }
}

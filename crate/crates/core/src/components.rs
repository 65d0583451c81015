//! Fixed component distributions and the ordered basis they form.
//!
//! Points are `f64` throughout. For [`Component::Pmf`] a point is an atom
//! index stored as a non-negative integral `f64`; anything else has zero mass.

use std::f64::consts::{LN_2, PI};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::density::{Density, MeasureKind};
use crate::error::{Error, Result};
use crate::stats::{chunk_rng, map_chunks, Moments};

/// Tolerance on the total mass of a pmf component.
pub const PMF_SUM_TOLERANCE: f64 = 1e-12;
/// Default threshold on the smallest eigenvalue of the normalized Gram matrix.
pub const DEFAULT_INDEPENDENCE_THRESHOLD: f64 = 1e-9;
/// Monte-Carlo sample count for Gram matrices of continuous bases.
pub const GRAM_SAMPLES: usize = 100_000;
const GRAM_SEED: u64 = 0x6772_616d;

/// One prescribed component distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[serde(try_from = "RawComponent")]
pub enum Component {
    Gaussian { mean: f64, stddev: f64 },
    Laplace { location: f64, scale: f64 },
    Cauchy { location: f64, scale: f64 },
    Pmf { p: Vec<f64> },
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawComponent {
    Gaussian { mean: f64, stddev: f64 },
    Laplace { location: f64, scale: f64 },
    Cauchy { location: f64, scale: f64 },
    Pmf { p: Vec<f64> },
}

impl TryFrom<RawComponent> for Component {
    type Error = Error;

    fn try_from(raw: RawComponent) -> Result<Self> {
        match raw {
            RawComponent::Gaussian { mean, stddev } => Component::gaussian(mean, stddev),
            RawComponent::Laplace { location, scale } => Component::laplace(location, scale),
            RawComponent::Cauchy { location, scale } => Component::cauchy(location, scale),
            RawComponent::Pmf { p } => Component::pmf(p),
        }
    }
}

impl Component {
    pub fn gaussian(mean: f64, stddev: f64) -> Result<Self> {
        Component::Gaussian { mean, stddev }.validated()
    }

    pub fn laplace(location: f64, scale: f64) -> Result<Self> {
        Component::Laplace { location, scale }.validated()
    }

    pub fn cauchy(location: f64, scale: f64) -> Result<Self> {
        Component::Cauchy { location, scale }.validated()
    }

    pub fn pmf(p: Vec<f64>) -> Result<Self> {
        Component::Pmf { p }.validated()
    }

    /// Point mass on atom `atom` of an alphabet of `size` symbols.
    pub fn dirac(atom: usize, size: usize) -> Result<Self> {
        if atom >= size {
            return Err(Error::InvalidComponent(format!(
                "atom {atom} outside alphabet of size {size}"
            )));
        }
        let mut p = vec![0.0; size];
        p[atom] = 1.0;
        Component::pmf(p)
    }

    /// Checks the parameter invariants, returning the component unchanged.
    pub fn validated(self) -> Result<Self> {
        match &self {
            Component::Gaussian { mean, stddev: s } => check_location_scale("gaussian", *mean, *s)?,
            Component::Laplace { location, scale } => {
                check_location_scale("laplace", *location, *scale)?
            }
            Component::Cauchy { location, scale } => {
                check_location_scale("cauchy", *location, *scale)?
            }
            Component::Pmf { p } => {
                if p.is_empty() {
                    return Err(Error::InvalidComponent("empty pmf".into()));
                }
                if p.iter().any(|&x| !x.is_finite() || x < 0.0) {
                    return Err(Error::InvalidComponent(
                        "pmf entries must be finite and non-negative".into(),
                    ));
                }
                let total: f64 = p.iter().sum();
                if (total - 1.0).abs() > PMF_SUM_TOLERANCE {
                    return Err(Error::InvalidComponent(format!(
                        "pmf sums to {total}, expected 1"
                    )));
                }
            }
        }
        Ok(self)
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Component::Gaussian { .. } => "gaussian",
            Component::Laplace { .. } => "laplace",
            Component::Cauchy { .. } => "cauchy",
            Component::Pmf { .. } => "pmf",
        }
    }

    /// Shannon entropy in nats (differential for continuous kinds).
    pub fn entropy(&self) -> f64 {
        match self {
            Component::Gaussian { stddev, .. } => {
                0.5 * (2.0 * PI * std::f64::consts::E).ln() + stddev.ln()
            }
            Component::Laplace { scale, .. } => 1.0 + (2.0 * scale).ln(),
            Component::Cauchy { scale, .. } => (4.0 * PI * scale).ln(),
            Component::Pmf { p } => -p
                .iter()
                .filter(|&&x| x > 0.0)
                .map(|&x| x * x.ln())
                .sum::<f64>(),
        }
    }

    /// Exact Kullback-Leibler divergence `KL(self : other)`.
    ///
    /// Closed forms exist for Gaussian pairs and pmf pairs; other pairs return
    /// [`Error::UnsupportedPair`] so that callers fall back to Monte Carlo.
    pub fn pairwise_kl(&self, other: &Component) -> Result<f64> {
        match (self, other) {
            (
                Component::Gaussian {
                    mean: m1,
                    stddev: s1,
                },
                Component::Gaussian {
                    mean: m2,
                    stddev: s2,
                },
            ) => {
                let d = m1 - m2;
                Ok((s2 / s1).ln() + (s1 * s1 + d * d) / (2.0 * s2 * s2) - 0.5)
            }
            (Component::Pmf { p }, Component::Pmf { p: q }) => {
                let n = p.len().max(q.len());
                let mut kl = 0.0;
                for i in 0..n {
                    let a = p.get(i).copied().unwrap_or(0.0);
                    let b = q.get(i).copied().unwrap_or(0.0);
                    if a > 0.0 {
                        if b == 0.0 {
                            return Ok(f64::INFINITY);
                        }
                        kl += a * (a / b).ln();
                    }
                }
                Ok(kl.max(0.0))
            }
            (a, b) => Err(Error::UnsupportedPair(a.kind_name(), b.kind_name())),
        }
    }

    /// Exact Bhattacharyya divergence `-ln ∫ sqrt(p q)`.
    pub fn pairwise_bhattacharyya(&self, other: &Component) -> Result<f64> {
        match (self, other) {
            (
                Component::Gaussian {
                    mean: m1,
                    stddev: s1,
                },
                Component::Gaussian {
                    mean: m2,
                    stddev: s2,
                },
            ) => {
                let (v1, v2) = (s1 * s1, s2 * s2);
                let d = m1 - m2;
                Ok(d * d / (4.0 * (v1 + v2)) + 0.5 * ((v1 + v2) / (2.0 * s1 * s2)).ln())
            }
            (Component::Pmf { p }, Component::Pmf { p: q }) => {
                let bc: f64 = p.iter().zip(q).map(|(a, b)| (a * b).sqrt()).sum();
                Ok((-bc.min(1.0).ln()).max(0.0))
            }
            (a, b) => Err(Error::UnsupportedPair(a.kind_name(), b.kind_name())),
        }
    }

    fn atom_mass(p: &[f64], x: f64) -> f64 {
        if x >= 0.0 && x.fract() == 0.0 && (x as usize) < p.len() {
            p[x as usize]
        } else {
            0.0
        }
    }
}

fn check_location_scale(kind: &str, loc: f64, scale: f64) -> Result<()> {
    if !loc.is_finite() {
        return Err(Error::InvalidComponent(format!(
            "{kind} location must be finite"
        )));
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidComponent(format!(
            "{kind} scale must be finite and strictly positive, got {scale}"
        )));
    }
    Ok(())
}

impl Density for Component {
    fn log_density(&self, x: f64) -> f64 {
        match self {
            Component::Gaussian { mean, stddev } => {
                let z = (x - mean) / stddev;
                -0.5 * z * z - stddev.ln() - 0.5 * (2.0 * PI).ln()
            }
            Component::Laplace { location, scale } => {
                -(x - location).abs() / scale - scale.ln() - LN_2
            }
            Component::Cauchy { location, scale } => {
                let z = (x - location) / scale;
                -(PI * scale).ln() - z.mul_add(z, 1.0).ln()
            }
            Component::Pmf { p } => Component::atom_mass(p, x).ln(),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Component::Gaussian { mean, stddev } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + stddev * z
            }
            Component::Laplace { location, scale } => {
                // Inverse CDF on u in (-1/2, 1/2).
                let u: f64 = rng.random::<f64>() - 0.5;
                let v = (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE);
                location - scale * u.signum() * v.ln()
            }
            Component::Cauchy { location, scale } => {
                let u: f64 = rng.random();
                location + scale * (PI * (u - 0.5)).tan()
            }
            Component::Pmf { p } => sample_categorical(p, rng) as f64,
        }
    }

    fn measure(&self) -> MeasureKind {
        match self {
            Component::Pmf { .. } => MeasureKind::Counting,
            _ => MeasureKind::Continuous,
        }
    }

    fn cdf(&self, x: f64) -> f64 {
        match self {
            Component::Gaussian { mean, stddev } => {
                0.5 * erfc(-(x - mean) / (stddev * std::f64::consts::SQRT_2))
            }
            Component::Laplace { location, scale } => {
                let z = (x - location) / scale;
                if z < 0.0 {
                    0.5 * z.exp()
                } else {
                    1.0 - 0.5 * (-z).exp()
                }
            }
            Component::Cauchy { location, scale } => 0.5 + ((x - location) / scale).atan() / PI,
            Component::Pmf { p } => {
                if x < 0.0 {
                    return 0.0;
                }
                let upto = (x.floor() as usize).min(p.len() - 1);
                p[..=upto].iter().sum::<f64>().min(1.0)
            }
        }
    }

    fn sf(&self, x: f64) -> f64 {
        match self {
            Component::Gaussian { mean, stddev } => {
                0.5 * erfc((x - mean) / (stddev * std::f64::consts::SQRT_2))
            }
            Component::Laplace { location, scale } => {
                let z = (x - location) / scale;
                if z < 0.0 {
                    1.0 - 0.5 * z.exp()
                } else {
                    0.5 * (-z).exp()
                }
            }
            Component::Cauchy { location, scale } => {
                let z = (x - location) / scale;
                if z > 0.0 {
                    (1.0 / z).atan() / PI
                } else {
                    0.5 - z.atan() / PI
                }
            }
            Component::Pmf { p } => {
                if x < 0.0 {
                    return 1.0;
                }
                let from = (x.floor() as usize + 1).min(p.len());
                p[from..].iter().sum::<f64>().min(1.0)
            }
        }
    }

    fn atoms(&self) -> Option<Vec<f64>> {
        match self {
            Component::Pmf { p } => Some(p.clone()),
            _ => None,
        }
    }
}

/// Draws an index from nonnegative `weights` summing to one. Zero-weight
/// entries are never selected.
pub(crate) fn sample_categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Outcome of the numerical linear-independence check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndependenceReport {
    pub ok: bool,
    pub min_eigenvalue: f64,
}

/// An ordered list of `k >= 2` components sharing one base measure.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ComponentBasis {
    components: Vec<Component>,
    #[serde(skip)]
    measure: MeasureKind,
}

impl ComponentBasis {
    /// Builds a basis after structural validation (size, shared measure and
    /// alphabet). Linear independence is not enforced here; see
    /// [`ComponentBasis::validated`].
    pub fn new(components: Vec<Component>) -> Result<Self> {
        if components.len() < 2 {
            return Err(Error::InvalidBasis(format!(
                "a basis needs at least 2 components, got {}",
                components.len()
            )));
        }
        let components = components
            .into_iter()
            .map(Component::validated)
            .collect::<Result<Vec<_>>>()?;
        let measure = components[0].measure();
        if components.iter().any(|c| c.measure() != measure) {
            return Err(Error::InvalidBasis(
                "components must share one base measure".into(),
            ));
        }
        if measure == MeasureKind::Counting {
            let size = components[0].atoms().map(|a| a.len()).unwrap_or(0);
            if components
                .iter()
                .any(|c| c.atoms().map(|a| a.len()) != Some(size))
            {
                return Err(Error::InvalidBasis(
                    "pmf components must share one alphabet".into(),
                ));
            }
        }
        Ok(ComponentBasis {
            components,
            measure,
        })
    }

    /// Builds a basis and rejects it unless the components pass the
    /// linear-independence check at `threshold`.
    pub fn validated(components: Vec<Component>, threshold: f64) -> Result<Self> {
        let basis = ComponentBasis::new(components)?;
        let report = basis.check_linear_independence(threshold);
        if !report.ok {
            return Err(Error::LinearlyDependent {
                min_eigenvalue: report.min_eigenvalue,
                threshold,
            });
        }
        Ok(basis)
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn measure(&self) -> MeasureKind {
        self.measure
    }

    /// Alphabet size for counting bases.
    pub fn alphabet_size(&self) -> Option<usize> {
        self.components[0].atoms().map(|a| a.len())
    }

    /// Gram matrix `G_ij = ∫ p_i p_j` normalized to unit diagonal.
    ///
    /// Exact for pmf bases; for continuous bases the integrals are estimated
    /// with [`GRAM_SAMPLES`] draws from the uniform mixture of the components.
    pub fn gram_matrix(&self) -> DMatrix<f64> {
        let k = self.len();
        let raw = match self.measure {
            MeasureKind::Counting => {
                let atoms: Vec<Vec<f64>> =
                    self.components.iter().map(|c| c.atoms().unwrap()).collect();
                DMatrix::from_fn(k, k, |i, j| {
                    atoms[i].iter().zip(&atoms[j]).map(|(a, b)| a * b).sum()
                })
            }
            MeasureKind::Continuous => {
                let uniform = vec![1.0 / k as f64; k];
                let parts = map_chunks(GRAM_SAMPLES, |chunk, _, len| {
                    let mut rng = chunk_rng(GRAM_SEED, 0, chunk);
                    let mut acc = vec![Moments::default(); k * k];
                    let mut dens = vec![0.0; k];
                    for _ in 0..len {
                        let l = sample_categorical(&uniform, &mut rng);
                        let x = self.components[l].sample(&mut rng);
                        for (d, c) in dens.iter_mut().zip(&self.components) {
                            *d = c.log_density(x).exp();
                        }
                        let u: f64 = dens.iter().sum::<f64>() / k as f64;
                        for i in 0..k {
                            for j in 0..k {
                                acc[i * k + j].push(dens[i] * dens[j] / u);
                            }
                        }
                    }
                    acc
                });
                DMatrix::from_fn(k, k, |i, j| {
                    Moments::merged(parts.iter().map(|p| &p[i * k + j])).mean
                })
            }
        };
        let diag: Vec<f64> = (0..k).map(|i| raw[(i, i)].sqrt()).collect();
        DMatrix::from_fn(k, k, |i, j| raw[(i, j)] / (diag[i] * diag[j]))
    }

    /// Report-only linear-independence check on the normalized Gram matrix.
    pub fn check_linear_independence(&self, threshold: f64) -> IndependenceReport {
        let gram = self.gram_matrix();
        let min_eigenvalue = SymmetricEigen::new(gram)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        IndependenceReport {
            ok: min_eigenvalue >= threshold,
            min_eigenvalue,
        }
    }
}

impl<'de> Deserialize<'de> for ComponentBasis {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let components = Vec::<Component>::deserialize(d)?;
        ComponentBasis::new(components).map_err(serde::de::Error::custom)
    }
}

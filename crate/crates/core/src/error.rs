use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid component: {0}")]
    InvalidComponent(String),
    #[error("invalid basis: {0}")]
    InvalidBasis(String),
    #[error("components are numerically linearly dependent (min Gram eigenvalue {min_eigenvalue:e} < {threshold:e})")]
    LinearlyDependent { min_eigenvalue: f64, threshold: f64 },
    #[error("point outside the open simplex: {0}")]
    SimplexViolation(String),
    #[error("point within {guard:e} of the simplex boundary")]
    NearBoundary { guard: f64 },
    #[error("mixtures do not share the same component basis")]
    BasisMismatch,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no closed form for the pair ({0}, {1})")]
    UnsupportedPair(&'static str, &'static str),
    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),
    #[error("invalid generator parameter: {0}")]
    InvalidGeneratorParameter(String),
    #[error("generator `{0}` is not differentiable at u = 1")]
    NonDifferentiableAt1(String),
    #[error("sample count must be at least {min}, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error("degenerate density ratio 0/0 at sample index {index}")]
    DegenerateRatio { index: usize },
    #[error("sum of (q/p - 1) over the sample set is zero")]
    ZeroDenominator,
    #[error("alpha = {0} is outside the admissible range")]
    AlphaOutOfRange(f64),
    #[error("epsilon = {0} is outside (0, 1)")]
    EpsilonOutOfRange(f64),
    #[error("operation requires CDFs or a counting measure: {0}")]
    UnsupportedSupport(String),
    #[error("exact evaluation requires counting-measure densities")]
    ExactUnavailable,
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("exhaustive permutation search limited to {max} components, got {k}")]
    TooManyComponents { k: usize, max: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("sample {index} has zero density under every component")]
    AllZeroDensity { index: usize },
    #[error("every component must be a univariate Gaussian")]
    NotGaussianBasis,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

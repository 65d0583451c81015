//! Information geometry of w-mixtures: convex combinations of a fixed set of
//! prescribed components, their dual flat structure, f-divergence estimation,
//! bounds and aggregation.

pub mod aggregation;
pub mod bounds;
pub mod components;
pub mod density;
pub mod divergence;
pub mod error;
pub mod geometry;
pub mod mixture;
pub mod stats;

pub use components::{Component, ComponentBasis};
pub use density::{Density, MeasureKind};
pub use divergence::{Evaluation, FGenerator};
pub use error::{Error, Result};
pub use geometry::PotentialOracle;
pub use mixture::{EtaVector, FiniteMixture, WMixture, WeightVector};
pub use stats::{Estimate, McEstimate};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/components.md")]
    mod components {}
    #[doc = include_str!("../../../book/src/mixtures.md")]
    mod mixtures {}
    #[doc = include_str!("../../../book/src/divergences.md")]
    mod divergences {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/bounds.md")]
    mod bounds {}
    #[doc = include_str!("../../../book/src/aggregation.md")]
    mod aggregation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

//! Pointwise curvature analysis for 4-dimensional Riemannian metrics given
//! in coordinate charts: self-dual / anti-self-dual Weyl spectra,
//! biorthogonal curvature extremes with an independent plane-search oracle,
//! almost-Kahler data, and Weitzenboeck residuals, together with built-in
//! model geometries used to calibrate every convention.

pub use nalgebra;

pub mod akstruct;
pub mod biortho;
pub mod curvspec;
pub mod eig3;
pub mod expr;
pub mod geometry;
pub mod hodgeops;
pub mod jet;
pub mod lambda2;
pub mod models;

pub use biortho::{
    biorthogonal, hypothesis_report, kperp_extremes_closed, kperp_extremes_search,
    orthogonal_plane, sectional, Dichotomy, HypothesisReport, KperpExtremes, Plane, SearchBudget,
};
pub use curvspec::{
    positivity_check, random_curvature, spectra, CurvatureOperator, RandomMode, SpectralData,
};
pub use expr::{parse, Expression};
pub use geometry::{christoffel, riemann, CurvaturePoint, Domain, MetricField, Orientation};
pub use hodgeops::TwoFormField;
pub use lambda2::TwoFormPoint;
pub use models::{builtin, builtin_by_name, BuiltinModel, BuiltinParams, ModelGeometry};

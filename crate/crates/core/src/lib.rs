//! Numerical laboratory for stability of the Bakry-Emery bound on Poincare
//! and logarithmic Sobolev constants of uniformly log-concave measures.
//!
//! Measures live on uniform 1D grids (tensor products up to dimension 2);
//! the main pipelines compute spectral gaps, Wasserstein distances to the
//! best Gaussian split, Stein residuals, and theorem-level sweep reports.

pub mod error;
pub mod functionals;
pub mod harness;
pub mod measure;
pub mod quadrature;
pub mod spectral;
pub mod stein;
pub mod transport;

pub use error::{Error, Result};
pub use functionals::GridFunction;
pub use measure::{GaussianSplit, Interval, LogConcaveMeasure1D, PotentialFamily, ProductMeasure};
pub use spectral::SpectralResult;

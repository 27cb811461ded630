//! Random projections that preserve independent subspace structure.
//!
//! Projection matrices, subspace geometry, concentration bounds, an ℓ1
//! sparse-representation classifier, a PCA baseline and seeded experiment
//! runners.

pub mod baseline;
pub mod bounds;
pub mod data;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod randproj;
pub mod seed;
pub mod sparserep;

pub use data::LabeledDataset;
pub use error::{Error, Result};
pub use geometry::{MarginReport, SubspaceBasis};
pub use randproj::{ProjectionMatrix, Recipe};
pub use sparserep::{Dictionary, SparseCode};

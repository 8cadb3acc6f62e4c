//! Cellular sheaves on clique complexes, their Laplacians and mapping cones,
//! and spectral witnesses of inconsistency.

pub mod complex;
pub mod diagnostics;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod linalg;
pub mod operators;
pub mod sheaf;
pub mod spectral;

pub use complex::{CliqueComplex, Graph};
pub use diagnostics::{
    DiagnosticsConfig, DiagnosticsReport, ExperimentKind, ExperimentParams, ExperimentResult, GroundingKind,
};
pub use error::{Error, Result};
pub use operators::{CheckStatus, GroundingMorphism, SheafLaplacian, TargetSheaf};
pub use sheaf::{CellSheaf, FeaturePipelineConfig, Stalk};
pub use spectral::{Spectrum, Weight, WitnessConfig};

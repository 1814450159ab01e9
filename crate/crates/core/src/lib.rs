//! Two-dimensional SPH consistency laboratory.
//!
//! * [`kernels`]: cubic B-spline and Wendland C4 kernels with analytic
//!   derivatives and moment quadrature.
//! * [`particles`]: regular and jittered particle sets on the unit square,
//!   cell-grid neighbor search.
//! * [`schemes`]: standard SPH and the CSPM, FPM and MSPH corrective
//!   estimators.
//! * [`consistency`]: per-particle discrete moment diagnostics.
//! * [`experiments`]: analytic test fields, resolution-ladder studies,
//!   RMSE metrics and log-log slope fits.

pub mod consistency;
pub mod error;
pub mod experiments;
pub mod kernels;
pub mod particles;
pub mod schemes;

pub use consistency::{consistency_report, discrete_moments, ConsistencyReport, DefectStats};
pub use error::{Result, SphError};
pub use experiments::{
    run_studies, run_study, Distribution, ErrorScope, SlopeFit, StudyConfig, StudyResult, StudyRow, TestField,
};
pub use kernels::{KernelDerivatives, KernelFamily, SmoothingKernel};
pub use particles::{build_neighbor_list, mean_interior_neighbors, CellGrid, NeighborList, ParticleSet, Provenance};
pub use schemes::{
    estimate, smoothing_length_for, NeighborMode, Quantity, SchemeConfig, SchemeEstimate, SchemeKind, Variant,
};

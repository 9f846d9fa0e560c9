//! Coefficient fields, configuration, pointwise matrices and admissibility.

pub mod admissibility;
pub mod config;
pub mod expr;
pub mod field;
pub mod numrange;
pub mod pointwise;
pub mod theta;
pub mod validate;

pub use admissibility::{check_admissibility, evaluate_conditions, AdmissibilityInputs, AdmissibilityReport, ConditionName};
pub use config::{ConfigFile, ProblemConfig};
pub use field::{DiffField, Point, ScalarField, VectorField};
pub use numrange::{sector_angle, Mat3};
pub use pointwise::{compute_lambda, compute_matkl, compute_q};
pub use theta::{compute_theta, SectorReport};
pub use validate::{base_mesh, validate_config, validate_level, ValidatedProblem};

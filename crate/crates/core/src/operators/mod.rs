//! Boundary value problems `(𝒜, ℬ)`: evaluation, ellipticity, the
//! desingularizing transform and `ρ^λ`-conjugation.

mod coefficients;
mod compat;
mod discrete;
mod ellipticity;
mod transforms;

pub use coefficients::{expr_vars, CoefficientSet, ProblemData, SampledCoefficients, SpaceTimeFn};
pub use compat::{check_compatibility, CompatibilityCondition, CompatibilityReport};
pub use discrete::{apply_a, apply_a_nondivergence, apply_b, b1_form, conormal_flux, inward_normal, FaceValues};
pub use ellipticity::{check_rho_ellipticity, EllipticityReport};
pub use transforms::{
    coefficient_hypotheses, conjugate_by_rho_lambda, desingularize, exact_apply_a, exact_apply_b1,
    Desingularized, HypothesisReport,
};

//! Model singular manifolds, singularity data and sampled regularity checks.

mod functions;
mod models;
mod regularity;

pub use functions::{coord_names, ExprMetric, ScalarFn};
pub use models::{
    conformal_metric, make_cusp, make_euclidean_box, make_funnel, make_infinite_cusp,
    make_poincare_ball, make_poincare_box, make_wedge, registry_geometries, Base, Geometry,
    GeometryKind, ManifoldSpec, SingularityDatum,
};
pub use regularity::{
    check_chart_transitions, check_singularity_datum, check_uniform_regularity, hat_atlas, Patch,
    RegularityReport, TransitionReport,
};

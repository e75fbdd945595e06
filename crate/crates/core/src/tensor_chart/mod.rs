//! Chart-level tensor algebra and differential operators.

mod calculus;
mod field;
mod grid;
mod metric;

pub use calculus::{
    covariant_derivative, differential, divergence, divergence_form_expand, divergence_of_flux,
    divergence_vector_direct, gradient, hessian,
};
pub use field::{contract_full, contraction_c, tensor_product, TensorField};
pub use grid::{ChartGrid, Face, FaceLabel, Side};
pub use metric::{
    flat, sharp, tensor_inner, tensor_norm, DerivMode, DiagonalMetric, EuclideanMetric, MetricField,
    MetricPoint, MetricSource,
};


//! Fixtures shared by the criterion benchmarks under `benches/`.
use degenpde::experiments::tensor::{metric_on, polar_metric};
use degenpde::geometry::{make_cusp, Base, Geometry};
use degenpde::solver::{Mode, ProblemSpec, TimeSpec};
use degenpde::study::cusp_manufactured;
use degenpde::tensor_chart::{MetricField, TensorField};

/// Polar metric on `0.5 ≤ r ≤ 2`, `0 ≤ θ ≤ 1.5` with `n` points per axis.
pub fn polar(n: usize) -> MetricField {
    metric_on(&polar_metric(), &[0.5, 0.0], &[2.0, 1.5], &[n, n]).expect("polar chart is valid")
}

/// Smooth `(1,0)`-field `X = (r cos θ, sin θ)` on the grid of `g`.
pub fn smooth_vector(g: &MetricField) -> TensorField {
    TensorField::from_fn(g.grid(), 1, 0, |x| vec![x[0] * x[1].cos(), x[1].sin()])
}

pub fn cusp_2d() -> Geometry {
    make_cusp(1.0, Base::Circle, 0.1, 1.0).expect("cusp parameters are valid")
}

/// The manufactured cusp problem used by the convergence suite.
pub fn cusp_problem(n: usize, steps: usize, mode: Mode) -> ProblemSpec {
    cusp_manufactured(2.0, 0.1, n, TimeSpec::new(0.5, steps, 0.5), mode).expect("cusp problem builds")
}

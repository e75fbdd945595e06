//! Named verification experiments. Each returns an [`Outcome`] holding its
//! invariants, per-run rows and refinement tables.
use crate::error::{Error, Result};
use crate::report::Outcome;
use crate::tensor_chart::ChartGrid;

pub mod norms;
pub mod poincare;
pub mod solve;
pub mod tensor;
pub mod transform;

/// Residuals at or below this count as exact (rounding only).
pub const EXACT_TOL: f64 = 1e-10;

/// Sup of `f` over the nodes at least two coarsest-grid cells from every
/// face, so that all levels of a study measure the same region.
pub(crate) fn sup_over(grid: &ChartGrid, coarsest: usize, f: impl Fn(usize) -> f64) -> f64 {
    let collar = 2 * (grid.counts()[0] - 1) / coarsest;
    grid.interior_points(collar).into_iter().map(f).fold(0.0, f64::max)
}

pub const EXPERIMENTS: [&str; 7] = [
    "verify-tensor",
    "verify-transform",
    "verify-norms",
    "poincare-identity",
    "cusp-convergence",
    "maxreg-sweep",
    "semigroup-check",
];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentOptions {
    pub seed: u64,
    /// Base refinement level where the experiment has one.
    pub grid: Option<usize>,
}

/// Runs a registered experiment by name.
pub fn run_experiment(name: &str, opts: &ExperimentOptions) -> Result<Outcome> {
    let seed = opts.seed;
    match name {
        "verify-tensor" => tensor::verify_tensor(seed),
        "verify-transform" => transform::verify_transform(seed),
        "verify-norms" => norms::verify_norms(seed),
        "poincare-identity" => poincare::poincare_identity(opts.grid.unwrap_or(32), seed),
        "cusp-convergence" => {
            let levels = match opts.grid {
                Some(n) => vec![n + 1, 2 * n + 1, 4 * n + 1],
                None => solve::SPACE_LEVELS.to_vec(),
            };
            solve::cusp_convergence(seed, &levels)
        }
        "maxreg-sweep" => {
            let levels = match opts.grid {
                Some(n) => vec![(n + 1, 20), (2 * n + 1, 40), (4 * n + 1, 80)],
                None => solve::MAXREG_LEVELS.to_vec(),
            };
            solve::maxreg_sweep(seed, &levels)
        }
        "semigroup-check" => solve::semigroup_suite(seed, opts.grid.unwrap_or(32)),
        _ => Err(Error::schema(
            "suite",
            format!("unknown experiment `{name}`, expected one of {}", EXPERIMENTS.join(", ")),
        )),
    }
}

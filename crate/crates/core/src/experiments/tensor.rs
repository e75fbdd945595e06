use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::expr::Expr;
use crate::geometry::{coord_names, ExprMetric};
use crate::report::{Invariant, Outcome, Refinement, Table};
use crate::study::{random_positive_expr, random_smooth_expr};
use crate::tensor_chart::{
    contract_full, contraction_c, divergence, divergence_form_expand, divergence_of_flux, divergence_vector_direct,
    sharp, tensor_norm, ChartGrid, MetricField, TensorField,
};

use super::{sup_over, EXACT_TOL};

/// `dr² + r²dθ²` in the chart `(x, y) = (r, θ)`.
pub fn polar_metric() -> ExprMetric {
    ExprMetric::diagonal(vec![Expr::num(1.0), Expr::parse("x^2").expect("polar metric parses")])
        .expect("polar metric is diagonal")
}

pub fn metric_on(metric: &ExprMetric, lo: &[f64], hi: &[f64], n: &[usize]) -> Result<MetricField> {
    let grid = Arc::new(ChartGrid::new(lo, hi, n)?);
    MetricField::from_source(grid, metric)
}

/// Samples closed-form components onto the grid.
pub fn field_from_exprs(grid: &ChartGrid, sigma: usize, tau: usize, comps: &[Expr]) -> Result<TensorField> {
    let m = grid.dim();
    let compiled = comps
        .iter()
        .map(|e| e.compile(coord_names(m)))
        .collect::<Result<Vec<_>>>()?;
    let data = (0..grid.npts())
        .flat_map(|p| compiled.iter().map(move |c| c.eval(grid.point(p))))
        .collect();
    TensorField::from_vec(m, sigma, tau, data)
}

pub fn random_field(rng: &mut ChaCha8Rng, dim: usize, npts: usize, sigma: usize, tau: usize) -> TensorField {
    let n = npts * dim.pow((sigma + tau) as u32);
    let data = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    TensorField::from_vec(dim, sigma, tau, data).expect("sized to the order")
}

fn sample_metric() -> Result<MetricField> {
    metric_on(&polar_metric(), &[0.5, 0.0], &[2.0, 1.5], &[3, 3])
}

/// Largest relative gap `||a♯| − |a||/|a|` over random `(σ, τ+1)`-fields, `σ, τ+1 ≤ 2`.
pub fn sharp_isometry_defect(samples: usize, seed: u64) -> Result<f64> {
    let g = sample_metric()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for sigma in 0..=2 {
        for tau in 1..=2 {
            for _ in 0..samples {
                let a = random_field(&mut rng, 2, g.npts(), sigma, tau);
                let na = tensor_norm(&a, &g)?;
                let ns = tensor_norm(&sharp(&a, &g)?, &g)?;
                for (x, y) in na.iter().zip(&ns) {
                    worst = worst.max((x - y).abs() / x.max(f64::MIN_POSITIVE));
                }
            }
        }
    }
    Ok(worst)
}

/// Largest relative excess of `|a⨀b|` over `|a||b|`, for `b` of order
/// `(σ₁, τ₁) ≤ (2, 2)` and free orders `(σ₂, τ₂) ≤ (1, 1)`.
pub fn contraction_bound_excess(samples: usize, seed: u64) -> Result<f64> {
    let g = sample_metric()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for s1 in 0..=2 {
        for t1 in 0..=2 {
            for s2 in 0..=1 {
                for t2 in 0..=1 {
                    for _ in 0..samples {
                        let a = random_field(&mut rng, 2, g.npts(), s2 + t1, t2 + s1);
                        let b = random_field(&mut rng, 2, g.npts(), s1, t1);
                        let c = tensor_norm(&contract_full(&a, &b)?, &g)?;
                        let na = tensor_norm(&a, &g)?;
                        let nb = tensor_norm(&b, &g)?;
                        for p in 0..g.npts() {
                            let bound = na[p] * nb[p];
                            worst = worst.max((c[p] - bound) / bound);
                        }
                    }
                }
            }
        }
    }
    Ok(worst)
}

/// Largest relative excess of `|Ca|` over `√m|a|`.
pub fn contraction_c_excess(samples: usize, seed: u64) -> Result<f64> {
    let g = sample_metric()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for sigma in 1..=2 {
        for tau in 1..=2 {
            for _ in 0..samples {
                let a = random_field(&mut rng, 2, g.npts(), sigma, tau);
                let c = tensor_norm(&contraction_c(&a)?, &g)?;
                let na = tensor_norm(&a, &g)?;
                for p in 0..g.npts() {
                    let bound = 2f64.sqrt() * na[p];
                    worst = worst.max((c[p] - bound) / bound);
                }
            }
        }
    }
    Ok(worst)
}

/// `sup |C(∇X) − (1/√g)∂_i(√g X^i)|` on nodes two or more cells from the faces.
pub fn divergence_study(dim: usize, cells: &[usize], seed: u64) -> Result<Refinement> {
    let (metric, lo, hi) = if dim == 1 {
        (
            ExprMetric::diagonal(vec![Expr::parse("1 + x^2")?])?,
            vec![0.5],
            vec![1.5],
        )
    } else {
        (polar_metric(), vec![0.5, 0.0], vec![1.5, 1.0])
    };
    let comps: Vec<Expr> = (0..dim).map(|i| random_smooth_expr(dim, 3, seed + i as u64)).collect();
    let mut h = vec![];
    let mut res = vec![];
    for &c in cells {
        let g = metric_on(&metric, &lo, &hi, &vec![c + 1; dim])?;
        let x = field_from_exprs(g.grid(), 1, 0, &comps)?;
        let a = divergence(&x, &g)?;
        let b = divergence_vector_direct(&x, &g)?;
        h.push(g.grid().h_max());
        res.push(sup_over(g.grid(), cells[0], |p| (a.value(p) - b.value(p)).abs()));
    }
    Ok(Refinement::new(h, res))
}

/// `g`-symmetric `a = g⁻¹S` with `S` random symmetric and positive definite.
pub fn random_symmetric_coefficient(metric: &ExprMetric, seed: u64) -> Result<Vec<Expr>> {
    let m = metric.entries().len().isqrt();
    let g_inv = metric.inverse_exprs()?;
    let mut s = vec![Expr::num(0.0); m * m];
    for i in 0..m {
        s[i * m + i] = random_positive_expr(m, 1.0, seed + i as u64);
    }
    if m == 2 {
        let off = Expr::num(0.25) * random_smooth_expr(2, 1, seed + 10);
        s[1] = off.clone();
        s[2] = off;
    }
    let mut a = vec![Expr::num(0.0); m * m];
    for i in 0..m {
        for j in 0..m {
            a[i * m + j] = (0..m).fold(Expr::num(0.0), |acc, k| acc + g_inv[i * m + k].clone() * s[k * m + j].clone());
        }
    }
    Ok(a)
}

/// `sup |div(a⨀grad u) − (a♯⨀∇²u + div(a♯)⨀∇u)|` in 2D, Euclidean or polar.
pub fn divergence_form_study(polar: bool, cells: &[usize], seed: u64) -> Result<Refinement> {
    let (metric, lo, hi) = if polar {
        (polar_metric(), [0.5, 0.0], [1.5, 1.0])
    } else {
        (ExprMetric::euclidean(2), [0.0, 0.0], [1.0, 1.0])
    };
    let a_exprs = random_symmetric_coefficient(&metric, seed)?;
    let u_expr = random_smooth_expr(2, 3, seed + 100);
    let mut h = vec![];
    let mut res = vec![];
    for &c in cells {
        let g = metric_on(&metric, &lo, &hi, &[c + 1, c + 1])?;
        let a = field_from_exprs(g.grid(), 1, 1, &a_exprs)?;
        let u = field_from_exprs(g.grid(), 0, 0, std::slice::from_ref(&u_expr))?;
        let lhs = divergence_of_flux(&a, &u, &g)?;
        let rhs = divergence_form_expand(&a, &u, &g)?;
        h.push(g.grid().h_max());
        res.push(sup_over(g.grid(), cells[0], |p| (lhs.value(p) - rhs.value(p)).abs()));
    }
    Ok(Refinement::new(h, res))
}

pub fn verify_tensor(seed: u64) -> Result<Outcome> {
    let mut out = Outcome::new("verify-tensor", seed);
    let samples = 100;
    out.push(Invariant::at_most(
        "tensor.sharp_isometry",
        sharp_isometry_defect(samples, seed)?,
        1e-12,
        format!("{samples} random fields per order, polar metric"),
    ));
    out.push(Invariant::at_most(
        "tensor.contraction_bound",
        contraction_bound_excess(samples, seed + 1)?,
        1e-12,
        "relative excess of |a⨀b| over |a||b|",
    ));
    out.push(Invariant::at_most(
        "tensor.contraction_c_bound",
        contraction_c_excess(samples, seed + 2)?,
        1e-12,
        "relative excess of |Ca| over sqrt(m)|a|",
    ));
    let mut table = Table::new("divergence", &["study", "level_0", "level_1", "level_2"]);
    let studies = [
        ("tensor.divergence_order_1d", divergence_study(1, &[64, 128, 256], seed)?),
        ("tensor.divergence_order_2d", divergence_study(2, &[32, 64, 128], seed)?),
        ("tensor.divergence_form_order_euclidean", divergence_form_study(false, &[32, 64, 128], seed)?),
        ("tensor.divergence_form_order_polar", divergence_form_study(true, &[32, 64, 128], seed)?),
    ];
    for (id, study) in studies {
        table.push_numbers(id, &study.residual);
        out.push(Invariant::order(id, &study, 1.8, EXACT_TOL));
    }
    out.tables.push(table);
    Ok(out)
}

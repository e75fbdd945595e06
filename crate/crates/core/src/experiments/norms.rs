use crate::error::Result;
use crate::expr::Expr;
use crate::geometry::{make_cusp, make_poincare_ball, Base, Geometry};
use crate::report::{Invariant, Outcome, Table};
use crate::study::random_smooth_expr;
use crate::tensor_chart::TensorField;
use crate::weighted::{check_hat_equivalence, weighted_sobolev_norm, NormSpec};

use super::tensor::field_from_exprs;

fn study_geometries() -> Result<Vec<Geometry>> {
    Ok(vec![make_cusp(2.0, Base::PointPair, 0.1, 1.0)?, make_poincare_ball(2, 0.2, 0.8)?])
}

fn cells_for(geo: &Geometry) -> [usize; 3] {
    if geo.dim() == 1 {
        [32, 64, 128]
    } else {
        [16, 32, 64]
    }
}

/// `‖ρ^λu‖_{W_p^{k,λ'}} / ‖u‖_{W_p^{k,λ'+λ}}` on a grid with `cells` per axis.
pub fn multiplication_ratio(geo: &Geometry, u: &Expr, k: usize, p: f64, lambda: f64, lambda_prime: f64, cells: usize) -> Result<f64> {
    let grid = geo.grid(&vec![cells + 1; geo.dim()])?;
    let g = geo.metric_field(grid.clone())?;
    let (rho, _) = geo.datum.samples(&grid)?;
    let uf = field_from_exprs(&grid, 0, 0, std::slice::from_ref(u))?;
    let ru = TensorField::scalar(grid.dim(), uf.data().iter().zip(&rho).map(|(a, r)| a * r.powf(lambda)).collect());
    let left = weighted_sobolev_norm(&ru, &NormSpec::new(p, k, lambda_prime), &rho, &g)?.value;
    let right = weighted_sobolev_norm(&uf, &NormSpec::new(p, k, lambda_prime + lambda), &rho, &g)?.value;
    Ok(left / right)
}

/// Hat-equivalence ratio `‖u‖_{W_p^k(ĝ)} / ‖u‖_{W_p^{k,−m/p}(g;ρ)}`.
pub fn hat_ratio(geo: &Geometry, u: &Expr, k: usize, p: f64, cells: usize) -> Result<f64> {
    let grid = geo.grid(&vec![cells + 1; geo.dim()])?;
    let g = geo.metric_field(grid.clone())?;
    let gh = geo.hat_metric_field(grid.clone())?;
    let (rho, _) = geo.datum.samples(&grid)?;
    let uf = field_from_exprs(&grid, 0, 0, std::slice::from_ref(u))?;
    Ok(check_hat_equivalence(&uf, k, p, &rho, &g, &gh)?.ratio)
}

/// `max/min` of a list of positive ratios.
pub fn spread(v: &[f64]) -> f64 {
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    hi / lo
}

/// Test function for a geometry: the first Cartesian coordinate on the
/// Poincaré chart, a random smooth function elsewhere.
pub fn test_function(geo: &Geometry, seed: u64) -> Result<Expr> {
    if geo.dim() == 2 && geo.manifold.kind == crate::geometry::GeometryKind::PoincareBall {
        Ok(Expr::parse("x*cos(y)")?)
    } else {
        Ok(random_smooth_expr(geo.dim(), 2, seed))
    }
}

pub fn verify_norms(seed: u64) -> Result<Outcome> {
    let mut out = Outcome::new("verify-norms", seed);
    let mut table = Table::new("ratios", &["study", "level_0", "level_1", "level_2"]);
    for (k_geo, geo) in study_geometries()?.iter().enumerate() {
        let name = geo.name();
        let u = test_function(geo, seed + k_geo as u64)?;
        let mut worst = 0.0f64;
        for (lambda, lp, p) in [(1.0, 0.0, 2.0), (-0.5, 1.0, 3.0), (2.0, -1.0, 1.5)] {
            let r = multiplication_ratio(geo, &u, 0, p, lambda, lp, cells_for(geo)[1])?;
            worst = worst.max((r - 1.0).abs());
        }
        out.push(Invariant::at_most(
            format!("norms.multiplication_k0.{name}"),
            worst,
            1e-12,
            "relative gap over three (lambda, lambda', p) triples",
        ));
        for k in [1usize, 2] {
            let ratios = cells_for(geo)
                .iter()
                .map(|&c| multiplication_ratio(geo, &u, k, 2.0, 1.0, 0.0, c))
                .collect::<Result<Vec<_>>>()?;
            let id = format!("norms.multiplication_k{k}_stable.{name}");
            table.push_numbers(&id, &ratios);
            out.push(Invariant::at_most(id, spread(&ratios), 2.0, format!("ratios {ratios:?}")));
        }
        let r0 = hat_ratio(geo, &u, 0, 2.0, cells_for(geo)[1])?;
        out.push(Invariant::at_most(
            format!("norms.hat_equivalence_k0.{name}"),
            (r0 - 1.0).abs(),
            1e-12,
            format!("ratio {r0:.17}"),
        ));
        for k in [1usize, 2] {
            let ratios = cells_for(geo)
                .iter()
                .map(|&c| hat_ratio(geo, &u, k, 2.0, c))
                .collect::<Result<Vec<_>>>()?;
            let id = format!("norms.hat_equivalence_k{k}_stable.{name}");
            table.push_numbers(&id, &ratios);
            out.push(Invariant::at_most(id, spread(&ratios), 2.0, format!("ratios {ratios:?}")));
        }
    }
    out.tables.push(table);
    Ok(out)
}

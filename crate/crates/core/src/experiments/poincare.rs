use crate::error::Result;
use crate::geometry::make_poincare_ball;
use crate::report::{Invariant, Outcome, Refinement, Table};
use crate::study::random_smooth_expr;
use crate::tensor_chart::{contract_full, differential, divergence, divergence_of_flux, gradient, TensorField};

use super::sup_over;
use super::tensor::{field_from_exprs, random_symmetric_coefficient};

/// Residuals of the two forms of `div_ĝ(a⨀grad_ĝ u)` on the polar annulus
/// `0.2 ≤ r ≤ 0.8`, `0 ≤ θ ≤ π/2`:
/// the weighted form `ρ^m div(ρ^{2−m}a⨀grad u)` and the expanded form
/// `div(ρ²a⨀grad u) − m(ρa⨀grad ρ|grad u)`.
pub fn poincare_study(levels: &[usize], seed: u64) -> Result<(Refinement, Refinement)> {
    let geo = make_poincare_ball(2, 0.2, 0.8)?;
    let m = geo.dim() as f64;
    let a_exprs = random_symmetric_coefficient(&geo.manifold.metric, seed)?;
    let u_expr = random_smooth_expr(2, 3, seed + 100);
    let (mut h, mut r1, mut r2) = (vec![], vec![], vec![]);
    for &cells in levels {
        let grid = geo.grid(&[cells + 1, cells + 1])?;
        let g = geo.metric_field(grid.clone())?;
        let gh = geo.hat_metric_field(grid.clone())?;
        let (rho, _) = geo.datum.samples(&grid)?;
        let a = field_from_exprs(&grid, 1, 1, &a_exprs)?;
        let u = field_from_exprs(&grid, 0, 0, std::slice::from_ref(&u_expr))?;
        let lhs = divergence_of_flux(&a, &u, &gh)?;

        let flux = contract_full(&a, &gradient(&u, &g)?)?;
        let w: Vec<f64> = rho.iter().map(|r| r.powf(2.0 - m)).collect();
        let weighted = divergence(&flux.scale_pointwise(&w)?, &g)?;
        let rhs1: Vec<f64> = (0..grid.npts()).map(|p| rho[p].powf(m) * weighted.value(p)).collect();

        let rho2: Vec<f64> = rho.iter().map(|r| r * r).collect();
        let first = divergence_of_flux(&a.scale_pointwise(&rho2)?, &u, &g)?;
        let rho_f = TensorField::scalar(2, rho.clone());
        let drift = contract_full(&a.scale_pointwise(&rho)?, &gradient(&rho_f, &g)?)?;
        let cross = contract_full(&differential(&u, &g)?, &drift)?;
        let rhs2: Vec<f64> = (0..grid.npts()).map(|p| first.value(p) - m * cross.value(p)).collect();

        h.push(grid.h_max());
        r1.push(sup_over(&grid, levels[0], |p| (lhs.value(p) - rhs1[p]).abs()));
        r2.push(sup_over(&grid, levels[0], |p| (lhs.value(p) - rhs2[p]).abs()));
    }
    Ok((Refinement::new(h.clone(), r1), Refinement::new(h, r2)))
}

pub fn poincare_identity(base: usize, seed: u64) -> Result<Outcome> {
    let mut out = Outcome::new("poincare-identity", seed);
    let levels = [base, 2 * base, 4 * base];
    let (weighted, expanded) = poincare_study(&levels, seed)?;
    let mut table = Table::new("refinement", &["cells", "h", "residual_weighted", "residual_expanded"]);
    for (i, &c) in levels.iter().enumerate() {
        table.rows.push(vec![
            c.to_string(),
            format!("{:.12e}", weighted.h[i]),
            format!("{:.12e}", weighted.residual[i]),
            format!("{:.12e}", expanded.residual[i]),
        ]);
    }
    out.tables.push(table);
    out.push(Invariant::order("poincare.weighted_form_order", &weighted, 1.8, super::EXACT_TOL));
    out.push(Invariant::order("poincare.expanded_form_order", &expanded, 1.8, super::EXACT_TOL));
    Ok(out)
}

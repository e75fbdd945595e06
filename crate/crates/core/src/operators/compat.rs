use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::Geometry;
use crate::tensor_chart::{ChartGrid, FaceLabel};

use super::coefficients::{CoefficientSet, ProblemData, SpaceTimeFn};
use super::transforms::{exact_apply_a, exact_apply_b1};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompatibilityCondition {
    pub id: &'static str,
    pub applicable: bool,
    /// Sup of the residual over the relevant boundary points (0 if not applicable).
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompatibilityReport {
    pub p: f64,
    pub s: Option<f64>,
    pub conditions: Vec<CompatibilityCondition>,
    pub tolerance: f64,
    pub pass: bool,
}

fn is_excluded(p: f64) -> bool {
    (p - 1.5).abs() < 1e-12 || (p - 3.0).abs() < 1e-12
}

/// Checks the data at `t = 0`:
/// * `γu₀ = h₀(·,0)` on `∂₀M` when `p > 3/2`,
/// * additionally `ℬ₁(·,0)u₀ = h₁(·,0)` on `∂₁M` when `p > 3`,
/// * `∂h₀(·,0) + γ𝒜(·,0)u₀ = γf(·,0)` on `∂₀M` when `s > 2/p`.
///
/// `p ∈ {3/2, 3}` is rejected unless the boundary is purely Dirichlet
/// (admits `p = 3`) or purely flux (admits `p = 3/2`). Truncation faces are not
/// part of `∂M` and are skipped.
pub fn check_compatibility(
    data: &ProblemData,
    c: &CoefficientSet,
    geo: &Geometry,
    grid: &ChartGrid,
    p: f64,
    s: Option<f64>,
    tolerance: f64,
) -> Result<CompatibilityReport> {
    if !(p > 1.0) {
        return Err(Error::Config(format!("exponent p = {p} must exceed 1")));
    }
    let faces = grid.faces();
    let has = |l: FaceLabel| faces.iter().any(|f| grid.label(*f) == l);
    let (has_dirichlet, has_flux) = (has(FaceLabel::Dirichlet), has(FaceLabel::Flux));
    if is_excluded(p) {
        let pure_dirichlet = !has_flux && (p - 3.0).abs() < 1e-12;
        let pure_flux = !has_dirichlet && (p - 1.5).abs() < 1e-12;
        if !(pure_dirichlet || pure_flux) {
            return Err(Error::ExcludedExponent(p));
        }
    }
    let m = grid.dim();
    let at0 = |e: &Expr| -> Result<SpaceTimeFn> { SpaceTimeFn::new(e.substitute("t", &Expr::num(0.0)), m) };
    let u0_expr = data.u0.expr().substitute("t", &Expr::num(0.0));

    let points_with = |label: FaceLabel| -> Vec<(usize, crate::tensor_chart::Face)> {
        faces
            .iter()
            .filter(|f| grid.label(**f) == label)
            .flat_map(|f| grid.face_points(*f).into_iter().map(move |p| (p, *f)))
            .collect()
    };
    let dir_pts = points_with(FaceLabel::Dirichlet);
    let flux_pts = points_with(FaceLabel::Flux);

    let mut conditions = Vec::new();

    let applicable = p > 1.5 && has_dirichlet;
    let mut res = 0.0f64;
    if applicable {
        for &(q, _) in &dir_pts {
            let x = grid.point(q);
            res = res.max((data.u0.eval(x, 0.0) - data.h0.eval(x, 0.0)).abs());
        }
    }
    conditions.push(CompatibilityCondition { id: "order0_dirichlet", applicable, residual: res });

    let applicable = p > 3.0 && has_flux;
    let mut res = 0.0f64;
    if applicable {
        for &(q, face) in &flux_pts {
            let b1 = at0(&exact_apply_b1(c, &geo.manifold.metric, &u0_expr, face)?)?;
            let x = grid.point(q);
            res = res.max((b1.eval(x, 0.0) - data.h1_on(face).eval(x, 0.0)).abs());
        }
    }
    conditions.push(CompatibilityCondition { id: "order0_flux", applicable, residual: res });

    let applicable = s.is_some_and(|s| s > 2.0 / p) && has_dirichlet;
    let mut res = 0.0f64;
    if applicable {
        let au0 = at0(&exact_apply_a(c, &geo.manifold.metric, &u0_expr)?)?;
        let dh0 = at0(&data.h0.expr().diff("t"))?;
        for &(q, _) in &dir_pts {
            let x = grid.point(q);
            res = res.max((dh0.eval(x, 0.0) + au0.eval(x, 0.0) - data.f.eval(x, 0.0)).abs());
        }
    }
    conditions.push(CompatibilityCondition { id: "order1_dirichlet", applicable, residual: res });

    let pass = conditions.iter().all(|c| !c.applicable || c.residual <= tolerance);
    Ok(CompatibilityReport {
        p,
        s,
        conditions,
        tolerance,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_euclidean_box;

    fn setup() -> (Geometry, std::sync::Arc<ChartGrid>, CoefficientSet) {
        let geo = make_euclidean_box(1, &[0.0], &[1.0])
            .unwrap()
            .with_labels(&[[FaceLabel::Dirichlet, FaceLabel::Flux]])
            .unwrap();
        let grid = geo.grid(&[5]).unwrap();
        let c = CoefficientSet::isotropic(1, Expr::num(1.0)).unwrap();
        (geo, grid, c)
    }

    #[test]
    fn zero_data_is_compatible_for_every_admissible_p() {
        let (geo, grid, c) = setup();
        for p in [1.2, 2.0, 4.0] {
            let r = check_compatibility(&ProblemData::zero(1), &c, &geo, &grid, p, Some(1.9), 0.0).unwrap();
            assert!(r.pass);
            assert!(r.conditions.iter().all(|c| c.residual == 0.0));
        }
    }

    #[test]
    fn case_table_in_p() {
        let (geo, grid, c) = setup();
        let r = check_compatibility(&ProblemData::zero(1), &c, &geo, &grid, 2.0, None, 0.0).unwrap();
        let flags: Vec<bool> = r.conditions.iter().map(|c| c.applicable).collect();
        assert_eq!(flags, vec![true, false, false]);
        let r = check_compatibility(&ProblemData::zero(1), &c, &geo, &grid, 4.0, None, 0.0).unwrap();
        let flags: Vec<bool> = r.conditions.iter().map(|c| c.applicable).collect();
        assert_eq!(flags, vec![true, true, false]);
    }

    #[test]
    fn injected_mismatch_is_reported() {
        let (geo, grid, c) = setup();
        let mut data = ProblemData::zero(1);
        data.u0 = SpaceTimeFn::parse("0.25 + x", 1).unwrap();
        data.h1[1] = SpaceTimeFn::parse("1", 1).unwrap();
        let r = check_compatibility(&data, &c, &geo, &grid, 4.0, None, 1e-12).unwrap();
        assert!((r.conditions[0].residual - 0.25).abs() < 1e-15);
        // inward normal at x = 1 is −∂ₓ, so ℬ₁u₀ = −1 against h₁ = 1
        assert!((r.conditions[1].residual - 2.0).abs() < 1e-15);
        assert!(!r.pass);
    }

    #[test]
    fn excluded_exponents() {
        let (geo, grid, c) = setup();
        let d = ProblemData::zero(1);
        assert!(matches!(
            check_compatibility(&d, &c, &geo, &grid, 3.0, None, 0.0),
            Err(Error::ExcludedExponent(_))
        ));
        let dir = geo.clone().with_labels(&[[FaceLabel::Dirichlet; 2]]).unwrap();
        let g2 = dir.grid(&[5]).unwrap();
        assert!(check_compatibility(&d, &c, &dir, &g2, 3.0, None, 0.0).is_ok());
        assert!(check_compatibility(&d, &c, &dir, &g2, 1.5, None, 0.0).is_err());
        let neu = geo.with_labels(&[[FaceLabel::Flux; 2]]).unwrap();
        let g3 = neu.grid(&[5]).unwrap();
        assert!(check_compatibility(&d, &c, &neu, &g3, 1.5, None, 0.0).is_ok());
    }
}

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::expr::Expr;
use crate::geometry::{make_cusp, make_poincare_ball, registry_geometries, Base, Geometry};
use crate::operators::{
    apply_a, check_rho_ellipticity, conjugate_by_rho_lambda, conormal_flux, desingularize, inward_normal,
    CoefficientSet, SampledCoefficients,
};
use crate::report::{Invariant, Outcome, Refinement};
use crate::study::{random_positive_expr, random_smooth_expr};
use crate::tensor_chart::{tensor_norm, ChartGrid, Face, MetricField, TensorField};

use super::tensor::{field_from_exprs, random_field};
use super::{sup_over, EXACT_TOL};

/// Geometry label used in invariant ids, e.g. `cusp(alpha=2,t_min=0.1,point_pair)`.
fn tag(geo: &Geometry) -> String {
    geo.name()
}

/// `a = s ρ²·id` with `s ∈ [1, 2]`, `ā = ρ·(random)`, random `a₀`, `b₀`.
pub fn rho_elliptic_coefficients(geo: &Geometry, seed: u64) -> Result<CoefficientSet> {
    let m = geo.dim();
    let rho = geo.datum.rho.expr().clone();
    let s = random_positive_expr(m, 1.0, seed);
    let a_vec = (0..m)
        .map(|i| rho.clone() * random_smooth_expr(m, 1, seed + 1 + i as u64))
        .collect();
    CoefficientSet::isotropic(m, s * rho.clone() * rho)?.with_lower_order(
        a_vec,
        random_smooth_expr(m, 1, seed + 5),
        random_smooth_expr(m, 1, seed + 6),
    )
}

pub fn cells_for(geo: &Geometry) -> Vec<usize> {
    if geo.dim() == 1 {
        vec![32, 64, 128]
    } else {
        vec![16, 32, 64]
    }
}

/// Conjugation levels: one refinement past [`cells_for`], since `ρ^λ` with
/// negative `λ` stays pre-asymptotic on the coarser grids near the tip.
pub fn conjugation_cells(geo: &Geometry) -> Vec<usize> {
    cells_for(geo).iter().map(|c| 2 * c).collect()
}

fn scalar(grid: &ChartGrid, e: &Expr) -> Result<TensorField> {
    field_from_exprs(grid, 0, 0, std::slice::from_ref(e))
}

/// `ℬ₁u = (ν|a⨀grad u) + b₀u` on the given faces, concatenated.
fn flux_on(faces: &[Face], u: &TensorField, c: &SampledCoefficients, g: &MetricField) -> Result<Vec<f64>> {
    let grid = g.grid();
    let mut out = vec![];
    for &face in faces {
        let flux = conormal_flux(u, &c.a, g, face)?;
        let b0 = c.b0_on(face);
        for (k, p) in grid.face_points(face).into_iter().enumerate() {
            out.push(flux[k] + b0[k] * u.value(p));
        }
    }
    Ok(out)
}

fn face_values(faces: &[Face], grid: &ChartGrid, v: &[f64]) -> Vec<f64> {
    faces.iter().flat_map(|&f| grid.face_points(f).into_iter().map(|p| v[p])).collect()
}

/// Residuals of `𝒜u = Âu` (interior) and `ℬ₁u = ρB̂₁u` (faces) under refinement.
pub fn desingularization_study(geo: &Geometry, seed: u64) -> Result<(Refinement, Refinement)> {
    let c = rho_elliptic_coefficients(geo, seed)?;
    let d = desingularize(&c, geo)?;
    let u_expr = random_smooth_expr(geo.dim(), 2, seed + 50);
    let (mut h, mut ra, mut rb) = (vec![], vec![], vec![]);
    let cells = cells_for(geo);
    for &n in &cells {
        let grid = geo.grid(&vec![n + 1; geo.dim()])?;
        let g = geo.metric_field(grid.clone())?;
        let gh = MetricField::from_source(grid.clone(), &d.metric)?;
        let (rho, _) = geo.datum.samples(&grid)?;
        let u = scalar(&grid, &u_expr)?;
        let sc = c.sample(&grid, 0.0)?;
        let sh = d.coeffs.sample(&grid, 0.0)?;
        let a = apply_a(&u, &sc, &g)?;
        let ah = apply_a(&u, &sh, &gh)?;
        ra.push(sup_over(&grid, cells[0], |p| (a.value(p) - ah.value(p)).abs()));
        let faces = grid.faces();
        let b = flux_on(&faces, &u, &sc, &g)?;
        let bh = flux_on(&faces, &u, &sh, &gh)?;
        let fr = face_values(&faces, &grid, &rho);
        rb.push(
            b.iter()
                .zip(&bh)
                .zip(&fr)
                .map(|((x, y), r)| (x - r * y).abs())
                .fold(0.0, f64::max),
        );
        h.push(grid.h_max());
    }
    Ok((Refinement::new(h.clone(), ra), Refinement::new(h, rb)))
}

/// Largest relative gap in `|X|_ĝ = ρ^{τ−σ}|X|_g` over random fields.
pub fn norm_scaling_defect(geo: &Geometry, samples: usize, seed: u64) -> Result<f64> {
    let m = geo.dim();
    let grid = geo.grid(&vec![5; m])?;
    let g = geo.metric_field(grid.clone())?;
    let gh = geo.hat_metric_field(grid.clone())?;
    let (rho, _) = geo.datum.samples(&grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for (sigma, tau) in [(0, 0), (1, 0), (0, 1), (1, 1), (0, 2)] {
        for _ in 0..samples {
            let x = random_field(&mut rng, m, grid.npts(), sigma, tau);
            let n = tensor_norm(&x, &g)?;
            let nh = tensor_norm(&x, &gh)?;
            for p in 0..grid.npts() {
                let expect = rho[p].powi(tau as i32 - sigma as i32) * n[p];
                worst = worst.max((nh[p] - expect).abs() / expect.max(f64::MIN_POSITIVE));
            }
        }
    }
    Ok(worst)
}

/// Largest relative gap in `ν̂ = ρν` over all face points.
pub fn hat_normal_defect(geo: &Geometry) -> Result<f64> {
    let m = geo.dim();
    let grid = geo.grid(&vec![9; m])?;
    let g = geo.metric_field(grid.clone())?;
    let gh = geo.hat_metric_field(grid.clone())?;
    let (rho, _) = geo.datum.samples(&grid)?;
    let mut worst = 0.0f64;
    for face in grid.faces() {
        for p in grid.face_points(face) {
            let (nu, _) = inward_normal(&g, face, p);
            let (nuh, _) = inward_normal(&gh, face, p);
            let scale = nu.iter().fold(0.0f64, |s, v| s.max((rho[p] * v).abs()));
            for i in 0..m {
                worst = worst.max((nuh[i] - rho[p] * nu[i]).abs() / scale);
            }
        }
    }
    Ok(worst)
}

/// Residual of `(𝒜,ℬ₁)(ρ^λu) = ρ^λ(𝒜′,ℬ₁′)u`: interior and physical-face
/// parts combined.
pub fn conjugation_study(geo: &Geometry, lambda: f64, cells: &[usize], seed: u64) -> Result<Refinement> {
    let (interior, boundary) = conjugation_parts(geo, lambda, cells, seed)?;
    let res = interior.residual.iter().zip(&boundary.residual).map(|(a, b)| a.max(*b)).collect();
    Ok(Refinement::new(interior.h, res))
}

/// Interior and physical-face residuals of the conjugation identity, separately.
pub fn conjugation_parts(geo: &Geometry, lambda: f64, cells: &[usize], seed: u64) -> Result<(Refinement, Refinement)> {
    let c = rho_elliptic_coefficients(geo, seed)?;
    let u_expr = random_smooth_expr(geo.dim(), 2, seed + 70);
    let (mut h, mut r_in, mut r_bd) = (vec![], vec![], vec![]);
    for &n in cells {
        let grid = geo.grid(&vec![n + 1; geo.dim()])?;
        let g = geo.metric_field(grid.clone())?;
        let (rho, drho) = geo.datum.samples(&grid)?;
        let u = scalar(&grid, &u_expr)?;
        let rl: Vec<f64> = rho.iter().map(|r| r.powf(lambda)).collect();
        let ru = TensorField::scalar(grid.dim(), u.data().iter().zip(&rl).map(|(a, b)| a * b).collect());
        let sc = c.sample(&grid, 0.0)?;
        let conj = conjugate_by_rho_lambda(&sc, &rho, &drho, &g, lambda)?;
        let lhs = apply_a(&ru, &sc, &g)?;
        let rhs = apply_a(&u, &conj, &g)?;
        let interior = sup_over(&grid, cells[0], |p| (lhs.value(p) - rl[p] * rhs.value(p)).abs());
        // truncation faces are not part of the boundary of M
        let faces: Vec<Face> = grid.faces().into_iter().filter(|&f| grid.label(f).is_physical()).collect();
        let bl = flux_on(&faces, &ru, &sc, &g)?;
        let br = flux_on(&faces, &u, &conj, &g)?;
        let fr = face_values(&faces, &grid, &rl);
        let boundary = bl
            .iter()
            .zip(&br)
            .zip(&fr)
            .map(|((x, y), r)| (x - r * y).abs())
            .fold(0.0, f64::max);
        h.push(grid.h_max());
        r_in.push(interior);
        r_bd.push(boundary);
    }
    Ok((Refinement::new(h.clone(), r_in), Refinement::new(h, r_bd)))
}

/// `ε` reported for `a = ε₀ρ²·id`.
pub fn ellipticity_of_scaled_identity(geo: &Geometry, eps0: f64) -> Result<f64> {
    let m = geo.dim();
    let grid = geo.grid(&vec![17; m])?;
    let g = geo.metric_field(grid.clone())?;
    let (rho, _) = geo.datum.samples(&grid)?;
    let rho_expr = geo.datum.rho.expr().clone();
    let c = CoefficientSet::isotropic(m, Expr::num(eps0) * rho_expr.clone() * rho_expr)?;
    let a = c.sample(&grid, 0.0)?.a;
    Ok(check_rho_ellipticity(&a, &rho, &g, 8, 3)?.epsilon)
}

/// Flips the sign of `a` at one node and returns (reported worst node, pass flag).
pub fn injected_violation(geo: &Geometry, node: usize) -> Result<(usize, Vec<f64>, bool)> {
    let m = geo.dim();
    let grid = geo.grid(&vec![17; m])?;
    let g = geo.metric_field(grid.clone())?;
    let (rho, _) = geo.datum.samples(&grid)?;
    let rho_expr = geo.datum.rho.expr().clone();
    let c = CoefficientSet::isotropic(m, rho_expr.clone() * rho_expr)?;
    let mut a = c.sample(&grid, 0.0)?.a;
    for v in a.at_mut(node) {
        *v = -0.5 * *v;
    }
    let r = check_rho_ellipticity(&a, &rho, &g, 8, 3)?;
    Ok((r.worst_point, r.worst_coords, r.pass))
}

pub fn verify_transform(seed: u64) -> Result<Outcome> {
    let mut out = Outcome::new("verify-transform", seed);
    let geos = registry_geometries()?;
    for (k, geo) in geos.iter().enumerate() {
        let (daa, dbbr) = desingularization_study(geo, seed + 100 * k as u64)?;
        out.push(Invariant::order(format!("transform.daa.{}", tag(geo)), &daa, 1.8, EXACT_TOL));
        out.push(Invariant::order(format!("transform.dbbr.{}", tag(geo)), &dbbr, 1.8, EXACT_TOL));
        out.push(Invariant::at_most(
            format!("transform.norm_scaling.{}", tag(geo)),
            norm_scaling_defect(geo, 20, seed + k as u64)?,
            1e-12,
            "orders (0,0) (1,0) (0,1) (1,1) (0,2)",
        ));
        out.push(Invariant::at_most(
            format!("transform.hat_normal.{}", tag(geo)),
            hat_normal_defect(geo)?,
            1e-12,
            "all face points",
        ));
    }
    for (k, geo) in geos.iter().enumerate() {
        let lambdas: &[f64] = if geo.datum.is_trivial() { &[-1.0, 0.5, 2.0] } else { &[-1.0, 0.0, 0.5, 2.0] };
        for &lambda in lambdas {
            let study = conjugation_study(geo, lambda, &conjugation_cells(geo), seed + 7 * k as u64)?;
            let id = format!("transform.conjugation.{}.lambda={lambda}", tag(geo));
            if lambda == 0.0 || geo.datum.is_trivial() {
                let worst = study.residual.iter().cloned().fold(0.0, f64::max);
                out.push(Invariant::at_most(id, worst, 0.0, "commutator must vanish identically"));
            } else {
                out.push(Invariant::order(id, &study, 1.8, EXACT_TOL));
            }
        }
    }
    for geo in [make_cusp(2.0, Base::PointPair, 0.1, 1.0)?, make_poincare_ball(2, 0.2, 0.8)?] {
        let eps0 = 0.37;
        let eps = ellipticity_of_scaled_identity(&geo, eps0)?;
        out.push(Invariant::at_most(
            format!("ellipticity.exact_epsilon.{}", tag(&geo)),
            (eps - eps0).abs(),
            1e-10,
            format!("epsilon {eps:.15}"),
        ));
        let node = geo.grid(&vec![17; geo.dim()])?.npts() / 3;
        let (worst, coords, pass) = injected_violation(&geo, node)?;
        out.push(Invariant {
            id: format!("ellipticity.locates_violation.{}", tag(&geo)),
            pass: !pass && worst == node,
            value: worst as f64,
            threshold: node as f64,
            detail: format!("reported node {worst} at {coords:?}"),
        });
    }
    Ok(out)
}

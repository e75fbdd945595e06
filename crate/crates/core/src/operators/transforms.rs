use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{coord_names, ExprMetric, Geometry};
use crate::tensor_chart::{contract_full, divergence, Face, MetricField, TensorField};
use crate::weighted::weighted_sup_norm;

use super::coefficients::{CoefficientSet, SampledCoefficients};
use super::discrete::inward_normal;
use super::ellipticity::check_rho_ellipticity;

/// A coefficient set rewritten on `(M, ĝ)`.
#[derive(Debug, Clone)]
pub struct Desingularized {
    pub coeffs: CoefficientSet,
    pub metric: ExprMetric,
}

/// `â = ρ⁻²a`, `d̂ = ā − m â⨀ρ⁻¹grad_ĝ ρ = ā − m ρ⁻¹ a⨀grad_g ρ`, `a₀` unchanged,
/// `b̂₀ = ρ⁻¹b₀`, metric `ĝ = g/ρ²`. The result is validated on a coarse grid:
/// `â` must be uniformly elliptic with respect to `ĝ`.
pub fn desingularize(c: &CoefficientSet, geo: &Geometry) -> Result<Desingularized> {
    let m = c.dim();
    if m != geo.dim() {
        return Err(Error::Shape(format!("coefficients of dimension {m} on a {}-manifold", geo.dim())));
    }
    let metric = geo.hat_metric()?;
    let rho = geo.datum.rho.expr().clone();
    let a = c.a_exprs();
    let g_inv = geo.manifold.metric.inverse_exprs()?;
    let drho: Vec<Expr> = coord_names(m).iter().map(|v| rho.diff(v)).collect();
    let grad_rho: Vec<Expr> = (0..m)
        .map(|j| (0..m).fold(Expr::num(0.0), |acc, k| acc + g_inv[j * m + k].clone() * drho[k].clone()))
        .collect();
    let a_hat: Vec<Expr> = a.iter().map(|e| e.clone() / rho.clone().powf(2.0)).collect();
    let d_hat: Vec<Expr> = c
        .a_vec_exprs()
        .into_iter()
        .enumerate()
        .map(|(i, ai)| {
            let corr = (0..m).fold(Expr::num(0.0), |acc, j| acc + a[i * m + j].clone() * grad_rho[j].clone());
            ai - Expr::num(m as f64) * corr / rho.clone()
        })
        .collect();
    let b0_hat = c.b0_expr().clone() / rho.clone();
    let coeffs = CoefficientSet::new(m, a_hat, d_hat, c.a0_expr().clone(), b0_hat)?;

    let grid = geo.grid(&vec![9; m])?;
    let g_hat = MetricField::from_source(grid.clone(), &metric)?;
    let sampled = coeffs.sample(&grid, 0.0)?;
    let ones = vec![1.0; grid.npts()];
    match check_rho_ellipticity(&sampled.a, &ones, &g_hat, 0, 0) {
        Ok(rep) if rep.pass => Ok(Desingularized { coeffs, metric }),
        Ok(rep) => Err(Error::TransformInconsistency(format!(
            "â is not elliptic with respect to ĝ (ε = {:.3e} at {:?})",
            rep.epsilon, rep.worst_coords
        ))),
        Err(e) => Err(Error::TransformInconsistency(format!("â fails the ĝ checks: {e}"))),
    }
}

/// `(𝒜′, ℬ′)` with `(𝒜,ℬ)∘ρ^λ = ρ^λ∘(𝒜′,ℬ′)`: with `gl = grad log ρ` and
/// `Y = a⨀gl`, `ā′ = −2λY`, `a₀′ = λ((ā|gl) − div Y) − λ²(Y|gl)`,
/// `b₀′ = λ(ν|Y)`. `div Y` is taken as `C(∇Y)` on the grid of `g`.
pub fn conjugate_by_rho_lambda(
    c: &SampledCoefficients,
    rho: &[f64],
    rho_grad: &[f64],
    g: &MetricField,
    lambda: f64,
) -> Result<SampledCoefficients> {
    let m = g.dim();
    let npts = g.npts();
    if rho.len() != npts || rho_grad.len() != npts * m {
        return Err(Error::Shape("ρ samples do not match the grid".into()));
    }
    // d log ρ as a covector and its g-dual
    let dlog = TensorField::from_vec(
        m,
        0,
        1,
        (0..npts * m).map(|k| rho_grad[k] / rho[k / m]).collect(),
    )?;
    let gl = crate::tensor_chart::sharp(&dlog, g)?;
    let y = contract_full(&c.a, &gl)?;
    let div_y = divergence(&y, g)?;
    let a_bar_gl = contract_full(&c.a_vec, &dlog)?;
    let y_gl = contract_full(&y, &dlog)?;
    let a_vec = c.a_vec.axpy(-2.0 * lambda, &y)?;
    let a0 = (0..npts)
        .map(|p| {
            c.a0[p] + lambda * (a_bar_gl.value(p) - div_y.value(p)) - lambda * lambda * y_gl.value(p)
        })
        .collect();
    let b0 = g
        .grid()
        .faces()
        .into_iter()
        .map(|face| {
            g.grid()
                .face_points(face)
                .into_iter()
                .enumerate()
                .map(|(k, p)| {
                    let (_, nu_flat) = inward_normal(g, face, p);
                    let nu_y: f64 = (0..m).map(|i| nu_flat[i] * y.at(p)[i]).sum();
                    c.b0[face.id()][k] + lambda * nu_y
                })
                .collect()
        })
        .collect();
    Ok(SampledCoefficients {
        a: c.a.clone(),
        a_vec,
        a0,
        b0,
    })
}

/// `𝒜u` in closed form: `−(1/√g)∂_i(√g a^i_j g^{jk}∂_k u) + ā^i∂_i u + a₀u`.
pub fn exact_apply_a(c: &CoefficientSet, metric: &ExprMetric, u: &Expr) -> Result<Expr> {
    let m = c.dim();
    let vars = coord_names(m);
    let flux = exact_flux_vector(c, metric, u)?;
    let sqrt_g = metric.det_expr()?.sqrt();
    let div = (0..m).fold(Expr::num(0.0), |acc, i| acc + (sqrt_g.clone() * flux[i].clone()).diff(vars[i]));
    let a_vec = c.a_vec_exprs();
    let drift = (0..m).fold(Expr::num(0.0), |acc, i| acc + a_vec[i].clone() * u.diff(vars[i]));
    Ok(-(div / sqrt_g) + drift + c.a0_expr().clone() * u.clone())
}

fn exact_flux_vector(c: &CoefficientSet, metric: &ExprMetric, u: &Expr) -> Result<Vec<Expr>> {
    let m = c.dim();
    let vars = coord_names(m);
    let g_inv = metric.inverse_exprs()?;
    let a = c.a_exprs();
    let du: Vec<Expr> = vars.iter().map(|v| u.diff(v)).collect();
    let grad: Vec<Expr> = (0..m)
        .map(|j| (0..m).fold(Expr::num(0.0), |acc, k| acc + g_inv[j * m + k].clone() * du[k].clone()))
        .collect();
    Ok((0..m)
        .map(|i| (0..m).fold(Expr::num(0.0), |acc, j| acc + a[i * m + j].clone() * grad[j].clone()))
        .collect())
}

/// `ℬ₁u = (ν|a⨀grad u) + b₀u` on a face, in closed form.
pub fn exact_apply_b1(c: &CoefficientSet, metric: &ExprMetric, u: &Expr, face: Face) -> Result<Expr> {
    let m = c.dim();
    let flux = exact_flux_vector(c, metric, u)?;
    let g_inv = metric.inverse_exprs()?;
    let a = face.axis;
    let normal = Expr::num(face.inward_sign()) * flux[a].clone() / g_inv[a * m + a].clone().sqrt();
    Ok(normal + c.b0_expr().clone() * u.clone())
}

/// Weighted sup norms behind the coefficient hypotheses: `a ∈ BC^{1,−2}`,
/// `ρ⁻¹|ā|`, `|a₀|` and the boundary coefficient (weighted by `ρ⁻¹` unless `ρ ≡ 1`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub a: f64,
    pub a_vec: f64,
    pub a0: f64,
    pub b0: f64,
    pub b0_weighted: bool,
}

pub fn coefficient_hypotheses(
    c: &SampledCoefficients,
    rho: &[f64],
    g: &MetricField,
    trivial_rho: bool,
) -> Result<HypothesisReport> {
    let a = weighted_sup_norm(&c.a, 1, -2.0, rho, g)?;
    let a_vec = weighted_sup_norm(&c.a_vec, 0, 0.0, rho, g)?;
    let a0 = c.a0.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let mut b0 = 0.0f64;
    for face in g.grid().faces() {
        if g.grid().label(face) != crate::tensor_chart::FaceLabel::Flux {
            continue;
        }
        for (k, p) in g.grid().face_points(face).into_iter().enumerate() {
            let w = if trivial_rho { 1.0 } else { 1.0 / rho[p] };
            b0 = b0.max(w * c.b0[face.id()][k].abs());
        }
    }
    Ok(HypothesisReport {
        a,
        a_vec,
        a0,
        b0,
        b0_weighted: !trivial_rho,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_cusp, make_euclidean_box, Base};

    #[test]
    fn trivial_datum_leaves_coefficients_alone() {
        let geo = make_euclidean_box(2, &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let c = CoefficientSet::isotropic(2, Expr::parse("1 + x*y").unwrap())
            .unwrap()
            .with_lower_order(
                vec![Expr::parse("x").unwrap(), Expr::num(2.0)],
                Expr::num(1.0),
                Expr::parse("y").unwrap(),
            )
            .unwrap();
        let d = desingularize(&c, &geo).unwrap();
        assert_eq!(d.coeffs.a_exprs(), c.a_exprs());
        assert_eq!(d.coeffs.a_vec_exprs(), c.a_vec_exprs());
        assert_eq!(d.coeffs.b0_expr(), c.b0_expr());
    }

    #[test]
    fn cusp_drift_correction_in_one_dimension() {
        // g = dx², ρ = x, a = x²  ⇒  d̂ = −a ρ'/ρ = −x
        let geo = make_cusp(1.0, Base::PointPair, 0.1, 1.0).unwrap();
        let geo = crate::geometry::Geometry {
            manifold: crate::geometry::ManifoldSpec {
                metric: ExprMetric::euclidean(1),
                ..geo.manifold
            },
            ..geo
        };
        let c = CoefficientSet::isotropic(1, Expr::parse("x^2").unwrap()).unwrap();
        let d = desingularize(&c, &geo).unwrap();
        let s = d.coeffs.a_vec_at(&[0.3], 0.0)[0];
        assert!((s + 0.3).abs() < 1e-15, "{s}");
        assert!((d.coeffs.a_at(&[0.3], 0.0)[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_input_is_inconsistent() {
        let geo = make_cusp(1.0, Base::PointPair, 0.1, 1.0).unwrap();
        let c = CoefficientSet::isotropic(1, Expr::parse("x - 0.5").unwrap()).unwrap();
        assert!(matches!(desingularize(&c, &geo), Err(Error::TransformInconsistency(_))));
    }

    #[test]
    fn closed_form_operator_on_polynomial() {
        // a = x², Euclidean line: 𝒜(x²) = −(x²·2x)' = −6x²
        let c = CoefficientSet::isotropic(1, Expr::parse("x^2").unwrap()).unwrap();
        let e = exact_apply_a(&c, &ExprMetric::euclidean(1), &Expr::parse("x^2").unwrap()).unwrap();
        let f = e.compile(&["x"]).unwrap();
        assert!((f.eval(&[0.7]) + 6.0 * 0.49).abs() < 1e-14);
    }
}

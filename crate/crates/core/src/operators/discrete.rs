use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensor_chart::{
    contract_full, differential, divergence, divergence_of_flux, gradient, hessian, sharp, ChartGrid, Face,
    FaceLabel, MetricField, TensorField,
};

use super::coefficients::SampledCoefficients;

fn check_coeffs(c: &SampledCoefficients, g: &MetricField) -> Result<()> {
    c.a.check_order(1, 1, "coefficient a")?;
    c.a_vec.check_order(1, 0, "drift ā")?;
    if c.a.npts() != g.npts() || c.a0.len() != g.npts() || c.b0.len() != 2 * g.dim() {
        return Err(Error::Shape("coefficients sampled on a different grid".into()));
    }
    Ok(())
}

/// `𝒜u = −div(a⨀grad u) + (ā|grad u) + a₀u` with the divergence taken as `C(∇·)`.
pub fn apply_a(u: &TensorField, c: &SampledCoefficients, g: &MetricField) -> Result<TensorField> {
    check_coeffs(c, g)?;
    let div = divergence_of_flux(&c.a, u, g)?;
    let drift = contract_full(&c.a_vec, &differential(u, g)?)?;
    let data = (0..u.npts())
        .map(|p| -div.value(p) + drift.value(p) + c.a0[p] * u.value(p))
        .collect();
    Ok(TensorField::scalar(u.dim(), data))
}

/// `𝒜u = a₂⨀∇²u + a₁⨀∇u + a₀u` with `a₂ = −a♯` and `a₁ = ā − div(a♯)`.
pub fn apply_a_nondivergence(u: &TensorField, c: &SampledCoefficients, g: &MetricField) -> Result<TensorField> {
    check_coeffs(c, g)?;
    let a_sharp = sharp(&c.a, g)?;
    let a2 = a_sharp.scale(-1.0);
    let a1 = c.a_vec.axpy(-1.0, &divergence(&a_sharp, g)?)?;
    let second = contract_full(&a2, &hessian(u, g)?)?;
    let first = contract_full(&a1, &differential(u, g)?)?;
    let data = (0..u.npts())
        .map(|p| second.value(p) + first.value(p) + c.a0[p] * u.value(p))
        .collect();
    Ok(TensorField::scalar(u.dim(), data))
}

/// Inward unit normal `ν` and `ν_flat = g ν` at a point of a coordinate face:
/// `ν^i = s g^{i a}/√g^{aa}` with `s = ±1` pointing into the chart.
pub fn inward_normal(g: &MetricField, face: Face, p: usize) -> (Vec<f64>, Vec<f64>) {
    let m = g.dim();
    let a = face.axis;
    let gi = g.g_inv().at(p);
    let s = face.inward_sign() / gi[a * m + a].sqrt();
    let nu = (0..m).map(|i| s * gi[i * m + a]).collect();
    let mut nu_flat = vec![0.0; m];
    nu_flat[a] = s;
    (nu, nu_flat)
}

/// Values of the boundary operator on one face.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FaceValues {
    pub axis: usize,
    pub high: bool,
    pub label: FaceLabel,
    pub points: Vec<usize>,
    pub values: Vec<f64>,
}

/// `(ν|a⨀grad u)_g` at the points of a face, gradients one-sided across the face.
pub fn conormal_flux(u: &TensorField, a: &TensorField, g: &MetricField, face: Face) -> Result<Vec<f64>> {
    let y = contract_full(a, &gradient(u, g)?)?;
    let m = g.dim();
    Ok(g.grid()
        .face_points(face)
        .into_iter()
        .map(|p| {
            let gi = g.g_inv().at(p);
            face.inward_sign() * y.at(p)[face.axis] / gi[face.axis * m + face.axis].sqrt()
        })
        .collect())
}

/// `ℬu` face by face: traces on Dirichlet and truncation faces,
/// `(ν|a⨀grad u) + b₀u` on flux faces.
pub fn apply_b(u: &TensorField, c: &SampledCoefficients, g: &MetricField) -> Result<Vec<FaceValues>> {
    check_coeffs(c, g)?;
    let grid: &ChartGrid = g.grid();
    let mut out = Vec::new();
    for face in grid.faces() {
        let label = grid.label(face);
        let points = grid.face_points(face);
        let values = match label {
            FaceLabel::Unlabeled => {
                return Err(Error::Config(format!(
                    "face on axis {} ({:?}) has no boundary label",
                    face.axis, face.side
                )))
            }
            FaceLabel::Dirichlet | FaceLabel::Truncation => points.iter().map(|&p| u.value(p)).collect(),
            FaceLabel::Flux => {
                let flux = conormal_flux(u, &c.a, g, face)?;
                let b0 = c.b0_on(face);
                points
                    .iter()
                    .enumerate()
                    .map(|(k, &p)| flux[k] + b0[k] * u.value(p))
                    .collect()
            }
        };
        out.push(FaceValues {
            axis: face.axis,
            high: face.id() % 2 == 1,
            label,
            points,
            values,
        });
    }
    Ok(out)
}

/// `b₁⨀∇u` with `b₁ = ν_flat ⨀ a♯` (first slot of `a♯` paired with `ν_flat`).
pub fn b1_form(u: &TensorField, a: &TensorField, g: &MetricField, face: Face) -> Result<Vec<f64>> {
    let a_sharp = sharp(a, g)?;
    let du = differential(u, g)?;
    let m = g.dim();
    Ok(g.grid()
        .face_points(face)
        .into_iter()
        .map(|p| {
            let (_, nu_flat) = inward_normal(g, face, p);
            let asp = a_sharp.at(p);
            let mut acc = 0.0;
            for k in 0..m {
                let b1k: f64 = (0..m).map(|i| nu_flat[i] * asp[i * m + k]).sum();
                acc += b1k * du.at(p)[k];
            }
            acc
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::expr::Expr;
    use crate::operators::coefficients::CoefficientSet;
    use crate::tensor_chart::{EuclideanMetric, Side};

    fn line(n: usize, labels: [FaceLabel; 2]) -> MetricField {
        let grid = ChartGrid::new(&[0.0], &[1.0], &[n]).unwrap().with_labels(&[labels]).unwrap();
        MetricField::from_source(Arc::new(grid), &EuclideanMetric(1)).unwrap()
    }

    #[test]
    fn identity_coefficient_gives_minus_laplacian() {
        let g = line(11, [FaceLabel::Dirichlet; 2]);
        let c = CoefficientSet::isotropic(1, Expr::num(1.0)).unwrap().sample(g.grid(), 0.0).unwrap();
        let u = TensorField::scalar_from_fn(g.grid(), |x| x[0] * x[0]);
        let au = apply_a(&u, &c, &g).unwrap();
        for p in 2..9 {
            assert!((au.value(p) + 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zeroth_order_term_on_constants() {
        let g = line(7, [FaceLabel::Dirichlet; 2]);
        let c = CoefficientSet::isotropic(1, Expr::num(1.0))
            .unwrap()
            .with_lower_order(vec![Expr::num(0.0)], Expr::num(1.0), Expr::num(0.0))
            .unwrap()
            .sample(g.grid(), 0.0)
            .unwrap();
        let u = TensorField::scalar(1, vec![1.0; 7]);
        assert!(apply_a(&u, &c, &g).unwrap().data().iter().all(|v| *v == 1.0));
    }

    #[test]
    fn inward_flux_of_linear_function() {
        let g = line(9, [FaceLabel::Flux, FaceLabel::Dirichlet]);
        let c = CoefficientSet::isotropic(1, Expr::num(1.0)).unwrap().sample(g.grid(), 0.0).unwrap();
        let u = TensorField::scalar_from_fn(g.grid(), |x| x[0]);
        let b = apply_b(&u, &c, &g).unwrap();
        assert!((b[0].values[0] - 1.0).abs() < 1e-14);
        assert_eq!(b[1].values, vec![1.0]);
        let constant = TensorField::scalar(1, vec![1.0; 9]);
        let b = apply_b(&constant, &c, &g).unwrap();
        assert_eq!(b[0].values, vec![0.0]);
    }

    #[test]
    fn unlabeled_face_is_a_configuration_error() {
        let g = line(5, [FaceLabel::Unlabeled, FaceLabel::Dirichlet]);
        let c = CoefficientSet::isotropic(1, Expr::num(1.0)).unwrap().sample(g.grid(), 0.0).unwrap();
        let u = TensorField::scalar(1, vec![0.0; 5]);
        assert!(matches!(apply_b(&u, &c, &g), Err(Error::Config(_))));
    }

    #[test]
    fn normal_is_unit_and_points_inward() {
        let g = line(5, [FaceLabel::Flux; 2]);
        let (nu, nf) = inward_normal(&g, Face::new(0, Side::High), 4);
        assert_eq!(nu, vec![-1.0]);
        assert_eq!(nf, vec![-1.0]);
    }
}

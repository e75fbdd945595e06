use crate::error::{Error, Result};

use super::field::{contract_full, contraction_c, transform_slot, TensorField};
use super::metric::{sharp, MetricField};

/// Partial derivatives of every component, derivative index appended as the
/// last covariant slot.
fn partials(a: &TensorField, g: &MetricField) -> TensorField {
    let grid = g.grid();
    let m = a.dim();
    let nc = a.ncomp();
    let mut out = vec![0.0; a.npts() * nc * m];
    for k in 0..m {
        let dk = grid.partial(a.data(), nc, k);
        for p in 0..a.npts() {
            for c in 0..nc {
                out[(p * nc + c) * m + k] = dk[p * nc + c];
            }
        }
    }
    TensorField::from_vec(m, a.sigma(), a.tau() + 1, out).expect("finite partials of finite data")
}

/// Levi-Civita covariant derivative `∇a`, derivative index in the last
/// covariant slot.
pub fn covariant_derivative(a: &TensorField, g: &MetricField) -> Result<TensorField> {
    g.check_field(a)?;
    let m = a.dim();
    let rank = a.rank();
    let nc = a.ncomp();
    let mut out = partials(a, g);
    if rank == 0 {
        return Ok(out);
    }
    let mut mats = vec![0.0; m * m];
    for p in 0..a.npts() {
        let gam = g.christoffel_at(p);
        let ap = a.at(p);
        for k in 0..m {
            let mut corr = vec![0.0; nc];
            for s in 0..rank {
                let contravariant = s < a.sigma();
                for r in 0..m {
                    for q in 0..m {
                        // +Γ^r_{kq} on upper slots, −Γ^q_{kr} on lower slots
                        mats[r * m + q] = if contravariant {
                            gam[(r * m + k) * m + q]
                        } else {
                            -gam[(q * m + k) * m + r]
                        };
                    }
                }
                for (c, v) in transform_slot(ap, m, rank, s, &mats).into_iter().enumerate() {
                    corr[c] += v;
                }
            }
            let op = out.at_mut(p);
            for c in 0..nc {
                op[c * m + k] += corr[c];
            }
        }
    }
    Ok(out)
}

/// `div a = C(∇a)` for `a` with at least one contravariant slot.
pub fn divergence(a: &TensorField, g: &MetricField) -> Result<TensorField> {
    if a.sigma() == 0 {
        return Err(Error::Rank("divergence needs a contravariant slot".into()));
    }
    contraction_c(&covariant_derivative(a, g)?)
}

/// `(1/√g) ∂_i(√g X^i)` for a vector field.
pub fn divergence_vector_direct(x: &TensorField, g: &MetricField) -> Result<TensorField> {
    x.check_order(1, 0, "vector field")?;
    g.check_field(x)?;
    let m = x.dim();
    let sq = g.sqrt_det();
    if let Some(p) = sq.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Conditioning {
            index: p,
            coords: g.grid().point(p).to_vec(),
            detail: "nonpositive volume density".into(),
        });
    }
    let weighted: Vec<f64> = x
        .data()
        .iter()
        .enumerate()
        .map(|(k, v)| v * sq[k / m])
        .collect();
    let mut out = vec![0.0; x.npts()];
    for i in 0..m {
        let d = g.grid().partial(&weighted, m, i);
        for p in 0..x.npts() {
            out[p] += d[p * m + i];
        }
    }
    for (o, s) in out.iter_mut().zip(sq) {
        *o /= s;
    }
    Ok(TensorField::scalar(m, out))
}

/// The differential `du` as a `(0,1)`-field.
pub fn differential(u: &TensorField, g: &MetricField) -> Result<TensorField> {
    u.check_order(0, 0, "scalar")?;
    g.check_field(u)?;
    Ok(partials(u, g))
}

/// `grad u = g♯ du`.
pub fn gradient(u: &TensorField, g: &MetricField) -> Result<TensorField> {
    sharp(&differential(u, g)?, g)
}

/// `∇²u = ∇(du)`, components `∂_j∂_i u − Γ^k_{ji} ∂_k u` with `j` the last slot.
pub fn hessian(u: &TensorField, g: &MetricField) -> Result<TensorField> {
    covariant_derivative(&differential(u, g)?, g)
}

/// Right-hand side of `div(a grad u) = a♯⨀∇²u + div(a♯)⨀∇u`.
pub fn divergence_form_expand(a: &TensorField, u: &TensorField, g: &MetricField) -> Result<TensorField> {
    a.check_order(1, 1, "coefficient")?;
    let a_sharp = sharp(a, g)?;
    let second = contract_full(&a_sharp, &hessian(u, g)?)?;
    let first = contract_full(&divergence(&a_sharp, g)?, &differential(u, g)?)?;
    second.axpy(1.0, &first)
}

/// Left-hand side `div(a⨀grad u)` through the tensor route.
pub fn divergence_of_flux(a: &TensorField, u: &TensorField, g: &MetricField) -> Result<TensorField> {
    a.check_order(1, 1, "coefficient")?;
    divergence(&contract_full(a, &gradient(u, g)?)?, g)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::tensor_chart::grid::ChartGrid;
    use crate::tensor_chart::metric::{DiagonalMetric, EuclideanMetric};

    fn polar_field(n: usize) -> MetricField {
        let grid = Arc::new(ChartGrid::new(&[1.0, 0.0], &[2.0, 1.0], &[n, n]).unwrap());
        let src = DiagonalMetric::new(2, |x| (vec![1.0, x[0] * x[0]], vec![0.0, 2.0 * x[0], 0.0, 0.0]));
        MetricField::from_source(grid, &src).unwrap()
    }

    #[test]
    fn euclidean_covariant_derivative_is_plain_differencing() {
        let grid = Arc::new(ChartGrid::new(&[0.0, 0.0], &[1.0, 1.0], &[7, 6]).unwrap());
        let g = MetricField::from_source(grid.clone(), &EuclideanMetric(2)).unwrap();
        let a = TensorField::from_fn(&grid, 1, 1, |x| {
            vec![x[0].sin(), x[1] * x[0], (x[0] + x[1]).exp(), x[1].cos()]
        });
        let nab = covariant_derivative(&a, &g).unwrap();
        let d0 = grid.partial(a.data(), 4, 0);
        let d1 = grid.partial(a.data(), 4, 1);
        for p in 0..grid.npts() {
            for c in 0..4 {
                assert_eq!(nab.at(p)[c * 2], d0[p * 4 + c]);
                assert_eq!(nab.at(p)[c * 2 + 1], d1[p * 4 + c]);
            }
        }
    }

    #[test]
    fn polar_radial_divergence_is_inverse_radius() {
        let g = polar_field(9);
        let x = TensorField::from_fn(g.grid(), 1, 0, |_| vec![1.0, 0.0]);
        let via_c = divergence(&x, &g).unwrap();
        let direct = divergence_vector_direct(&x, &g).unwrap();
        for p in 0..g.npts() {
            let r = g.grid().point(p)[0];
            // ∂_r of constant X is exact, so only Γ^θ_{θr} = 1/r contributes
            assert!((via_c.value(p) - 1.0 / r).abs() < 1e-13);
            // √g X^r = r is linear, differenced exactly
            assert!((direct.value(p) - 1.0 / r).abs() < 1e-12);
        }
    }

    #[test]
    fn polar_gradient_of_r_squared() {
        let g = polar_field(9);
        let u = TensorField::scalar_from_fn(g.grid(), |x| x[0] * x[0]);
        let gr = gradient(&u, &g).unwrap();
        for p in 0..g.npts() {
            let r = g.grid().point(p)[0];
            assert!((gr.at(p)[0] - 2.0 * r).abs() < 1e-12);
            assert!(gr.at(p)[1].abs() < 1e-15);
        }
    }

    #[test]
    fn polar_laplacian_of_r_squared_is_four() {
        let g = polar_field(9);
        let u = TensorField::scalar_from_fn(g.grid(), |x| x[0] * x[0]);
        let id = TensorField::identity(2, g.npts());
        let rhs = divergence_form_expand(&id, &u, &g).unwrap();
        let lhs = divergence_of_flux(&id, &u, &g).unwrap();
        for p in 0..g.npts() {
            assert!((rhs.value(p) - 4.0).abs() < 1e-11, "{}", rhs.value(p));
            assert!((lhs.value(p) - 4.0).abs() < 1e-11, "{}", lhs.value(p));
        }
    }

    #[test]
    fn covariant_derivative_of_metric_vanishes_for_linear_data() {
        let g = polar_field(9);
        let nab = covariant_derivative(g.g(), &g).unwrap();
        // g_θθ = r² is quadratic in r, so one-sided and centered stencils are exact
        assert!(nab.max_abs() < 1e-12, "{}", nab.max_abs());
    }

    #[test]
    fn divergence_rejects_scalars() {
        let g = polar_field(5);
        let u = TensorField::scalar(2, vec![0.0; g.npts()]);
        assert!(matches!(divergence(&u, &g), Err(Error::Rank(_))));
    }
}

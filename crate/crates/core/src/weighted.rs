//! Discrete weighted Sobolev and weighted sup norms on a chart grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor_chart::{covariant_derivative, tensor_norm, MetricField, TensorField};

/// Which metric a norm is measured in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricChoice {
    #[default]
    G,
    Hat,
}

/// Parameters of `W_p^{k,λ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormSpec {
    pub p: f64,
    #[serde(default)]
    pub k: usize,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default)]
    pub metric: MetricChoice,
}

impl NormSpec {
    pub fn new(p: f64, k: usize, lambda: f64) -> Self {
        NormSpec {
            p,
            k,
            lambda,
            metric: MetricChoice::G,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0) || !self.p.is_finite() {
            return Err(Error::Config(format!("norm exponent p = {} must lie in (1, ∞)", self.p)));
        }
        if self.k > 2 {
            return Err(Error::Config(format!("norm order k = {} exceeds 2", self.k)));
        }
        if !self.lambda.is_finite() {
            return Err(Error::Config("weight exponent λ must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormReport {
    pub value: f64,
    /// `∫ ρ^{p(λ+j+τ−σ)} |∇^j u|^p dv` for `j = 0..=k`.
    pub per_order_terms: Vec<f64>,
    pub quadrature: &'static str,
    pub grid: Vec<usize>,
    /// Set when some order's term on the full grid exceeds ten times its value
    /// on the every-other-node subgrid, a sign of an integrand that is not
    /// resolved (or not integrable) near a face.
    pub blowup_warning: bool,
}

/// `|∇^j u|_g` for `j = 0..=k`, pointwise.
fn derivative_norms(u: &TensorField, k: usize, g: &MetricField) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(k + 1);
    let mut cur = u.clone();
    for j in 0..=k {
        if j > 0 {
            cur = covariant_derivative(&cur, g)?;
        }
        out.push(tensor_norm(&cur, g)?);
    }
    Ok(out)
}

fn check_rho(rho: &[f64], npts: usize) -> Result<()> {
    if rho.len() != npts {
        return Err(Error::Shape(format!("{} ρ samples for {npts} points", rho.len())));
    }
    if let Some(p) = rho.iter().position(|r| !(*r > 0.0)) {
        return Err(Error::Domain(format!("ρ = {} at point {p}", rho[p])));
    }
    Ok(())
}

/// Trapezoid rule over all nodes and over the stride-2 subgrid (when every
/// axis has an even number of intervals).
fn trapezoid_pair(g: &MetricField, integrand: &[f64]) -> (f64, Option<f64>) {
    let grid = g.grid();
    let w = grid.trapezoid_weights();
    let full: f64 = integrand.iter().zip(&w).map(|(f, w)| f * w).sum();
    let n = grid.counts();
    if n.iter().any(|&k| (k - 1) % 2 != 0 || k < 5) {
        return (full, None);
    }
    let mut coarse = 0.0;
    for p in 0..grid.npts() {
        let idx = grid.multi_index(p);
        if idx.iter().any(|i| i % 2 != 0) {
            continue;
        }
        let wc: f64 = idx
            .iter()
            .enumerate()
            .map(|(a, &i)| {
                let h = 2.0 * grid.spacing()[a];
                if i == 0 || i == n[a] - 1 {
                    0.5 * h
                } else {
                    h
                }
            })
            .product();
        coarse += integrand[p] * wc;
    }
    (full, Some(coarse))
}

/// `‖u‖_{W_p^{k,λ}} = (Σ_{j≤k} ∫ ρ^{p(λ+j+τ−σ)} |∇^j u|_g^p √g dx)^{1/p}` by the
/// trapezoid rule on the grid of `g`.
pub fn weighted_sobolev_norm(u: &TensorField, spec: &NormSpec, rho: &[f64], g: &MetricField) -> Result<NormReport> {
    spec.validate()?;
    check_rho(rho, u.npts())?;
    let shift = u.tau() as f64 - u.sigma() as f64;
    let norms = derivative_norms(u, spec.k, g)?;
    let sq = g.sqrt_det();
    let mut terms = Vec::with_capacity(spec.k + 1);
    let mut warn = false;
    for (j, nj) in norms.iter().enumerate() {
        let e = spec.p * (spec.lambda + j as f64 + shift);
        let integrand: Vec<f64> = (0..u.npts())
            .map(|q| rho[q].powf(e) * nj[q].powf(spec.p) * sq[q])
            .collect();
        let (full, coarse) = trapezoid_pair(g, &integrand);
        if let Some(c) = coarse {
            warn |= full > 10.0 * c && full > 0.0;
        }
        terms.push(full);
    }
    let total: f64 = terms.iter().sum();
    Ok(NormReport {
        value: total.powf(1.0 / spec.p),
        per_order_terms: terms,
        quadrature: "trapezoid",
        grid: g.grid().counts().to_vec(),
        blowup_warning: warn,
    })
}

/// `max_{j≤k} sup ρ^{λ+j+τ−σ} |∇^j u|_g` over the grid nodes.
pub fn weighted_sup_norm(u: &TensorField, k: usize, lambda: f64, rho: &[f64], g: &MetricField) -> Result<f64> {
    if k > 2 {
        return Err(Error::Config(format!("sup-norm order k = {k} exceeds 2")));
    }
    check_rho(rho, u.npts())?;
    let shift = u.tau() as f64 - u.sigma() as f64;
    let norms = derivative_norms(u, k, g)?;
    let mut best = 0.0f64;
    for (j, nj) in norms.iter().enumerate() {
        let e = lambda + j as f64 + shift;
        for q in 0..u.npts() {
            best = best.max(rho[q].powf(e) * nj[q]);
        }
    }
    Ok(best)
}

/// The two norms compared by the hat-space equivalence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HatEquivalence {
    /// `‖u‖_{W_p^k}` on `(ĝ, ∇̂, dv̂)`.
    pub hat_value: f64,
    /// `‖u‖_{W_p^{k,−m/p}(ρ)}` on `(g, ∇, dv)`.
    pub weighted_value: f64,
    pub ratio: f64,
}

pub fn check_hat_equivalence(
    u: &TensorField,
    k: usize,
    p: f64,
    rho: &[f64],
    g: &MetricField,
    g_hat: &MetricField,
) -> Result<HatEquivalence> {
    let ones = vec![1.0; u.npts()];
    let hat = weighted_sobolev_norm(u, &NormSpec::new(p, k, 0.0), &ones, g_hat)?;
    let m = u.dim() as f64;
    let weighted = weighted_sobolev_norm(u, &NormSpec::new(p, k, -m / p), rho, g)?;
    if weighted.value == 0.0 {
        return Err(Error::UndefinedRatio("weighted norm of u vanishes".into()));
    }
    Ok(HatEquivalence {
        hat_value: hat.value,
        weighted_value: weighted.value,
        ratio: hat.value / weighted.value,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::geometry::{make_cusp, make_poincare_ball, Base};
    use crate::tensor_chart::{ChartGrid, EuclideanMetric};

    fn unit_interval(n: usize) -> MetricField {
        let grid = Arc::new(ChartGrid::new(&[0.0], &[1.0], &[n]).unwrap());
        MetricField::from_source(grid, &EuclideanMetric(1)).unwrap()
    }

    #[test]
    fn constant_on_unit_interval() {
        let g = unit_interval(11);
        let u = TensorField::scalar(1, vec![1.0; 11]);
        let rep = weighted_sobolev_norm(&u, &NormSpec::new(2.0, 0, 0.0), &[1.0; 11], &g).unwrap();
        assert!((rep.value - 1.0).abs() < 1e-15);
        assert_eq!(weighted_sup_norm(&u, 0, 0.0, &[1.0; 11], &g).unwrap(), 1.0);
    }

    #[test]
    fn weight_cancels_inverse() {
        let grid = Arc::new(ChartGrid::new(&[0.1], &[1.0], &[19]).unwrap());
        let g = MetricField::from_source(grid.clone(), &EuclideanMetric(1)).unwrap();
        let rho: Vec<f64> = (0..19).map(|p| grid.point(p)[0]).collect();
        let u = TensorField::scalar(1, rho.iter().map(|t| 1.0 / t).collect());
        assert!((weighted_sup_norm(&u, 0, 1.0, &rho, &g).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn order_terms_sum_to_power() {
        let geo = make_cusp(2.0, Base::PointPair, 0.1, 1.0).unwrap();
        let grid = geo.grid(&[33]).unwrap();
        let g = geo.metric_field(grid.clone()).unwrap();
        let (rho, _) = geo.datum.samples(&grid).unwrap();
        let u = TensorField::scalar_from_fn(&grid, |x| (3.0 * x[0]).sin());
        let rep = weighted_sobolev_norm(&u, &NormSpec::new(3.0, 2, 0.5), &rho, &g).unwrap();
        let s: f64 = rep.per_order_terms.iter().sum();
        assert!((rep.value.powf(3.0) - s).abs() <= 1e-10 * s);
        assert!(!rep.blowup_warning);
        let lower = weighted_sobolev_norm(&u, &NormSpec::new(3.0, 1, 0.5), &rho, &g).unwrap();
        assert!(lower.value <= rep.value);
    }

    #[test]
    fn hat_equivalence_is_exact_at_orders_zero_and_one() {
        let geo = make_poincare_ball(2, 0.2, 0.8).unwrap();
        let grid = geo.grid(&[17, 17]).unwrap();
        let g = geo.metric_field(grid.clone()).unwrap();
        let gh = geo.hat_metric_field(grid.clone()).unwrap();
        let (rho, _) = geo.datum.samples(&grid).unwrap();
        let u = TensorField::scalar_from_fn(&grid, |x| x[0] * x[1].cos());
        for k in [0, 1] {
            let r = check_hat_equivalence(&u, k, 2.0, &rho, &g, &gh).unwrap();
            assert!((r.ratio - 1.0).abs() < 1e-12, "k={k}: {}", r.ratio);
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let g = unit_interval(5);
        let u = TensorField::scalar(1, vec![1.0; 5]);
        assert!(weighted_sobolev_norm(&u, &NormSpec::new(1.0, 0, 0.0), &[1.0; 5], &g).is_err());
        assert!(weighted_sobolev_norm(&u, &NormSpec::new(2.0, 3, 0.0), &[1.0; 5], &g).is_err());
        assert!(weighted_sobolev_norm(&u, &NormSpec::new(2.0, 0, 0.0), &[0.0; 5], &g).is_err());
    }
}

//! Manufactured problems, random smooth data and order fitting used by the
//! experiments and the acceptance suite.
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::expr::Expr;
use crate::geometry::{coord_names, make_cusp, Base, Geometry};
use crate::operators::{exact_apply_a, exact_apply_b1, CoefficientSet, ProblemData, SpaceTimeFn};
use crate::solver::{Mode, ProblemSpec, TimeSpec};
use crate::tensor_chart::FaceLabel;
use crate::weighted::NormSpec;

/// Least-squares slope of `log e` against `log h`.
pub fn fit_order(h: &[f64], e: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = h.iter().zip(e).map(|(h, e)| (h.ln(), e.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Data making `u` the exact solution: `f = ∂_t u + 𝒜u`, `h₀ = u`,
/// `h₁ = ℬ₁u` per face, `u₀ = u(·, 0)`.
pub fn manufactured_data(geo: &Geometry, coeffs: &CoefficientSet, u: &Expr) -> Result<ProblemData> {
    let m = geo.dim();
    let metric = &geo.manifold.metric;
    let f = u.diff("t") + exact_apply_a(coeffs, metric, u)?;
    let h1 = geo
        .grid(&vec![3; m])?
        .faces()
        .into_iter()
        .map(|face| {
            if geo.manifold.labels[face.axis][face.id() % 2] == FaceLabel::Flux {
                SpaceTimeFn::new(exact_apply_b1(coeffs, metric, u, face)?, m)
            } else {
                Ok(SpaceTimeFn::zero(m))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ProblemData {
        f: SpaceTimeFn::new(f, m)?,
        h0: SpaceTimeFn::new(u.clone(), m)?,
        h1,
        u0: SpaceTimeFn::new(u.substitute("t", &Expr::num(0.0)), m)?,
        exact: Some(SpaceTimeFn::new(u.clone(), m)?),
    })
}

/// `e^{−t}x²(1−x)`, the reference solution of the cusp problems.
pub fn cusp_reference_solution() -> Expr {
    Expr::parse("exp(-t)*x^2*(1-x)").expect("reference solution parses")
}

/// 1D `α`-cusp on `[t_min, 1]` with `a = ρ²·id`, Dirichlet at `x = 1`,
/// truncation at `t_min` and the reference solution manufactured in.
pub fn cusp_manufactured(alpha: f64, t_min: f64, n: usize, time: TimeSpec, mode: Mode) -> Result<ProblemSpec> {
    let geometry = make_cusp(alpha, Base::PointPair, t_min, 1.0)?;
    let rho = geometry.datum.rho.expr().clone();
    let coeffs = CoefficientSet::isotropic(1, rho.clone() * rho)?;
    let data = manufactured_data(&geometry, &coeffs, &cusp_reference_solution())?;
    Ok(ProblemSpec {
        geometry,
        coeffs,
        data,
        time,
        norms: vec![NormSpec::new(2.0, 2, 0.0)],
        mode,
        resolution: vec![n],
        waive_compatibility: false,
    })
}

/// Homogeneous cusp problem for the maximal-regularity ratio: `f = 0`,
/// `h = 0`, smooth `u₀` vanishing at both ends.
pub fn cusp_homogeneous(alpha: f64, lambda: f64, p: f64, t_min: f64, n: usize, time: TimeSpec) -> Result<ProblemSpec> {
    let geometry = make_cusp(alpha, Base::PointPair, t_min, 1.0)?;
    let rho = geometry.datum.rho.expr().clone();
    let coeffs = CoefficientSet::isotropic(1, rho.clone() * rho)?;
    let mut data = ProblemData::zero(1);
    let u0 = Expr::parse(&format!("sin(pi*(x - {t_min})/(1 - {t_min}))"))?;
    data.u0 = SpaceTimeFn::new(u0, 1)?;
    Ok(ProblemSpec {
        geometry,
        coeffs,
        data,
        time,
        norms: vec![NormSpec::new(p, 2, lambda)],
        mode: Mode::Direct,
        resolution: vec![n],
        waive_compatibility: false,
    })
}

/// Random smooth function `c₀ + Σ c_k sin(w_k·x + φ_k)` in the chart
/// coordinates, with frequencies and amplitudes of order one.
pub fn random_smooth_expr(dim: usize, terms: usize, seed: u64) -> Expr {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vars = coord_names(dim);
    let mut e = Expr::num(rng.gen_range(-1.0..1.0));
    for _ in 0..terms {
        let mut arg = Expr::num(rng.gen_range(0.0..std::f64::consts::TAU));
        for v in vars {
            arg = arg + Expr::num(rng.gen_range(-2.0..2.0)) * Expr::var(v);
        }
        e = e + Expr::num(rng.gen_range(-1.0..1.0)) * Expr::Call(crate::expr::Func::Sin, Box::new(arg));
    }
    e
}

/// Random positive function `1 + s·(1 + sin(...))/2` bounded in `[1, 1+s]`.
pub fn random_positive_expr(dim: usize, spread: f64, seed: u64) -> Expr {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vars = coord_names(dim);
    let mut arg = Expr::num(rng.gen_range(0.0..std::f64::consts::TAU));
    for v in vars {
        arg = arg + Expr::num(rng.gen_range(-2.0..2.0)) * Expr::var(v);
    }
    Expr::num(1.0 + 0.5 * spread) + Expr::num(0.5 * spread) * Expr::Call(crate::expr::Func::Sin, Box::new(arg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::solve_ibvp;

    #[test]
    fn order_of_exact_power_law() {
        let h = [0.1, 0.05, 0.025];
        let e: Vec<f64> = h.iter().map(|h| 3.0 * h * h).collect();
        assert!((fit_order(&h, &e) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn manufactured_cusp_forcing_matches_frozen_values() {
        // f = ∂_t u − (1/√g)(√g a u'/g)' evaluated independently
        let frozen = [
            (1.0, [-0.17099999999999999, 0.26748002093327117, -0.024417997907754483]),
            (2.0, [-0.088662846020761243, 0.035498740908191093, -0.0082611156786607659]),
        ];
        let pts = [(0.3, 0.0), (0.7, 0.5), (0.15, 1.0)];
        for (alpha, vals) in frozen {
            let p = cusp_manufactured(alpha, 0.1, 9, TimeSpec::new(1.0, 1, 1.0), Mode::Direct).unwrap();
            for (&(x, t), v) in pts.iter().zip(vals) {
                assert!((p.data.f.eval(&[x], t) - v).abs() < 1e-13, "alpha {alpha} at {x}");
            }
        }
    }

    #[test]
    fn random_smooth_is_deterministic() {
        assert_eq!(random_smooth_expr(2, 3, 5), random_smooth_expr(2, 3, 5));
        assert_ne!(random_smooth_expr(2, 3, 5), random_smooth_expr(2, 3, 6));
    }

    #[test]
    fn coarse_cusp_solve_is_accurate() {
        let p = cusp_manufactured(2.0, 0.1, 33, TimeSpec::new(0.5, 50, 0.5), Mode::Both).unwrap();
        let r = solve_ibvp(&p).unwrap();
        assert!(r.errors.unwrap().err_inf < 1e-3);
    }
}

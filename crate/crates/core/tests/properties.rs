use std::collections::BTreeSet;
use std::sync::Arc;

use degenpde::experiments::norms::{hat_ratio, multiplication_ratio};
use degenpde::experiments::transform::{hat_normal_defect, norm_scaling_defect};
use degenpde::experiments::{run_experiment, ExperimentOptions};
use degenpde::expr::Expr;
use degenpde::geometry::{make_cusp, make_infinite_cusp, make_poincare_ball, make_wedge, Base, Geometry};
use degenpde::operators::{check_rho_ellipticity, desingularize, CoefficientSet, SpaceTimeFn};
use degenpde::solver::{solve_ibvp, Mode, ProblemSpec, TimeSpec};
use degenpde::study::{cusp_homogeneous, random_smooth_expr};
use degenpde::tensor_chart::{contract_full, sharp, tensor_norm, ChartGrid, MetricField, TensorField};
use degenpde::weighted::{weighted_sobolev_norm, NormSpec};
use proptest::prelude::*;

/// Constant metric `LLᵀ + 0.2·id` on a 3×3 chart.
fn metric_from(l: &[f64]) -> MetricField {
    let grid = Arc::new(ChartGrid::new(&[0.0, 0.0], &[1.0, 1.0], &[3, 3]).unwrap());
    let g = [
        l[0] * l[0] + 0.2,
        l[0] * l[1],
        l[0] * l[1],
        l[1] * l[1] + l[2] * l[2] + 0.2,
    ];
    let data = (0..grid.npts()).flat_map(|_| g).collect();
    MetricField::from_samples(grid, TensorField::from_vec(2, 0, 2, data).unwrap()).unwrap()
}

fn field(g: &MetricField, sigma: usize, tau: usize, values: &[f64]) -> TensorField {
    let n = g.npts() * 2usize.pow((sigma + tau) as u32);
    let data = values.iter().cycle().take(n).cloned().collect();
    TensorField::from_vec(2, sigma, tau, data).unwrap()
}

fn cusp_or_wedge() -> impl Strategy<Value = Geometry> {
    (1.0f64..3.0, 0.05f64..0.3, 0..3usize).prop_map(|(alpha, t_min, kind)| match kind {
        0 => make_cusp(alpha, Base::PointPair, t_min, 1.0).unwrap(),
        1 => make_cusp(alpha, Base::Circle, t_min, 1.0).unwrap(),
        _ => make_wedge(alpha, t_min, 0.5).unwrap(),
    })
}

fn any_geometry() -> impl Strategy<Value = Geometry> {
    prop_oneof![
        cusp_or_wedge(),
        (-2.0f64..-0.5, 2.0f64..5.0).prop_map(|(a, t)| make_infinite_cusp(a, Base::PointPair, 1.0, t).unwrap()),
        (0.1f64..0.4, 0.6f64..0.9).prop_map(|(r0, r1)| make_poincare_ball(2, r0, r1).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sharp_is_an_isometry(
        l in prop::collection::vec(-1.5f64..1.5, 3),
        sigma in 0usize..=2,
        tau in 1usize..=2,
        values in prop::collection::vec(-1.0f64..1.0, 16),
    ) {
        let g = metric_from(&l);
        let a = field(&g, sigma, tau, &values);
        let na = tensor_norm(&a, &g).unwrap();
        let ns = tensor_norm(&sharp(&a, &g).unwrap(), &g).unwrap();
        for (x, y) in na.iter().zip(&ns) {
            prop_assert!((x - y).abs() <= 1e-12 * x.max(1.0));
        }
    }

    #[test]
    fn complete_contraction_is_bounded(
        l in prop::collection::vec(-1.5f64..1.5, 3),
        s1 in 0usize..=2,
        t1 in 0usize..=2,
        s2 in 0usize..=1,
        t2 in 0usize..=1,
        va in prop::collection::vec(-1.0f64..1.0, 32),
        vb in prop::collection::vec(-1.0f64..1.0, 16),
    ) {
        let g = metric_from(&l);
        let a = field(&g, s2 + t1, t2 + s1, &va);
        let b = field(&g, s1, t1, &vb);
        let c = tensor_norm(&contract_full(&a, &b).unwrap(), &g).unwrap();
        let na = tensor_norm(&a, &g).unwrap();
        let nb = tensor_norm(&b, &g).unwrap();
        for p in 0..g.npts() {
            prop_assert!(c[p] <= na[p] * nb[p] * (1.0 + 1e-10) + 1e-300);
        }
    }

    #[test]
    fn hat_volume_density_scales_by_rho_to_the_m(geo in any_geometry()) {
        let grid = geo.grid(&vec![7; geo.dim()]).unwrap();
        let g = geo.metric_field(grid.clone()).unwrap();
        let gh = geo.hat_metric_field(grid.clone()).unwrap();
        let (rho, _) = geo.datum.samples(&grid).unwrap();
        let m = geo.dim() as i32;
        for p in 0..grid.npts() {
            let lhs = gh.sqrt_det()[p] * rho[p].powi(m);
            prop_assert!((lhs - g.sqrt_det()[p]).abs() <= 1e-12 * g.sqrt_det()[p]);
        }
    }

    #[test]
    fn hat_norms_scale_by_rho_to_tau_minus_sigma(geo in any_geometry(), seed in any::<u64>()) {
        prop_assert!(norm_scaling_defect(&geo, 4, seed).unwrap() <= 1e-12);
    }

    #[test]
    fn hat_unit_normal_is_rho_times_normal(geo in any_geometry()) {
        prop_assert!(hat_normal_defect(&geo).unwrap() <= 1e-12);
    }

    #[test]
    fn zeroth_order_multiplication_is_exact(
        geo in cusp_or_wedge(),
        seed in any::<u64>(),
        p in 1.1f64..4.0,
        lambda in -2.0f64..2.0,
        lambda_prime in -2.0f64..2.0,
    ) {
        let u = random_smooth_expr(geo.dim(), 2, seed);
        let r = multiplication_ratio(&geo, &u, 0, p, lambda, lambda_prime, 8).unwrap();
        prop_assert!((r - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn zeroth_order_hat_norm_is_exact(geo in cusp_or_wedge(), seed in any::<u64>(), p in 1.1f64..4.0) {
        let u = random_smooth_expr(geo.dim(), 2, seed);
        prop_assert!((hat_ratio(&geo, &u, 0, p, 8).unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn sobolev_norm_grows_with_order(
        geo in cusp_or_wedge(),
        seed in any::<u64>(),
        p in 1.1f64..4.0,
        lambda in -1.0f64..1.0,
    ) {
        let grid = geo.grid(&vec![9; geo.dim()]).unwrap();
        let g = geo.metric_field(grid.clone()).unwrap();
        let (rho, _) = geo.datum.samples(&grid).unwrap();
        let u = random_smooth_expr(geo.dim(), 2, seed).compile(degenpde::geometry::coord_names(geo.dim())).unwrap();
        let uf = TensorField::scalar_from_fn(&grid, |x| u.eval(x));
        let norms: Vec<f64> = (0..=2)
            .map(|k| weighted_sobolev_norm(&uf, &NormSpec::new(p, k, lambda), &rho, &g).unwrap().value)
            .collect();
        prop_assert!(norms[0] <= norms[1] && norms[1] <= norms[2]);
    }

    #[test]
    fn rho_ellipticity_equals_hat_ellipticity(
        geo in cusp_or_wedge(),
        l in prop::collection::vec(-1.0f64..1.0, 3),
    ) {
        let m = geo.dim();
        let grid = geo.grid(&vec![7; m]).unwrap();
        let g = geo.metric_field(grid.clone()).unwrap();
        let gh = geo.hat_metric_field(grid.clone()).unwrap();
        let (rho, _) = geo.datum.samples(&grid).unwrap();
        // a = ρ² g⁻¹S with S symmetric positive definite, so g a is symmetric
        let s = if m == 1 {
            vec![l[0] * l[0] + 0.3]
        } else {
            vec![l[0] * l[0] + 0.3, l[0] * l[1], l[0] * l[1], l[1] * l[1] + l[2] * l[2] + 0.3]
        };
        let mut a = TensorField::zeros(m, 1, 1, grid.npts());
        let mut a_hat = TensorField::zeros(m, 1, 1, grid.npts());
        for p in 0..grid.npts() {
            let gi = g.g_inv().at(p);
            for i in 0..m {
                for j in 0..m {
                    let v: f64 = (0..m).map(|k| gi[i * m + k] * s[k * m + j]).sum::<f64>() * rho[p] * rho[p];
                    a.at_mut(p)[i * m + j] = v;
                    a_hat.at_mut(p)[i * m + j] = v / (rho[p] * rho[p]);
                }
            }
        }
        let ones = vec![1.0; grid.npts()];
        let eps = check_rho_ellipticity(&a, &rho, &g, 0, 0).unwrap().epsilon;
        let eps_hat = check_rho_ellipticity(&a_hat, &ones, &gh, 0, 0).unwrap().epsilon;
        prop_assert!((eps - eps_hat).abs() <= 1e-10 * eps.abs().max(1.0));
    }

    #[test]
    fn desingularization_keeps_a_hat_symmetric(geo in cusp_or_wedge(), c in 0.1f64..1.0) {
        let m = geo.dim();
        let rho = geo.datum.rho.expr().clone();
        let diag = |k: usize| Expr::num(1.0 + c * k as f64) * rho.clone() * rho.clone();
        let coeffs = if m == 1 {
            CoefficientSet::isotropic(1, diag(0)).unwrap()
        } else {
            // g = diag(1, g₂₂) for cusps over the circle and for wedges
            let entries = vec![diag(0), Expr::num(0.0), Expr::num(0.0), diag(1)];
            CoefficientSet::new(2, entries, vec![Expr::num(0.0); 2], Expr::num(0.0), Expr::num(0.0)).unwrap()
        };
        let d = desingularize(&coeffs, &geo).unwrap();
        let grid = geo.grid(&vec![7; m]).unwrap();
        let gh = MetricField::from_source(grid.clone(), &d.metric).unwrap();
        let sampled = d.coeffs.sample(&grid, 0.0).unwrap();
        // rejects g-asymmetric input with an error
        let ones = vec![1.0; grid.npts()];
        prop_assert!(check_rho_ellipticity(&sampled.a, &ones, &gh, 0, 0).is_ok());
    }
}

fn homogeneous(alpha: f64, theta: f64, mode: Mode, u0: Expr, f: Expr) -> ProblemSpec {
    let mut p = cusp_homogeneous(alpha, 0.0, 2.0, 0.1, 17, TimeSpec::new(0.2, 8, theta)).unwrap();
    p.data.u0 = SpaceTimeFn::new(u0, 1).unwrap();
    p.data.f = SpaceTimeFn::new(f, 1).unwrap();
    p.mode = mode;
    p.waive_compatibility = true;
    p
}

fn trajectory(p: &ProblemSpec) -> Vec<Vec<f64>> {
    solve_ibvp(p).unwrap().trajectory
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solve_is_linear_in_forcing_and_initial_data(
        alpha in 1.0f64..2.5,
        theta in prop_oneof![Just(0.5), Just(1.0)],
        desing in any::<bool>(),
        s in any::<u64>(),
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
    ) {
        let mode = if desing { Mode::Desingularized } else { Mode::Direct };
        let bump = Expr::parse("sin(pi*(x - 0.1)/0.9)").unwrap();
        let u1 = bump.clone() * random_smooth_expr(1, 2, s);
        let u2 = bump * random_smooth_expr(1, 2, s ^ 1);
        let f1 = random_smooth_expr(1, 2, s ^ 2) * Expr::parse("1 + t").unwrap();
        let f2 = random_smooth_expr(1, 2, s ^ 3) * Expr::parse("cos(t)").unwrap();
        let x1 = trajectory(&homogeneous(alpha, theta, mode, u1.clone(), f1.clone()));
        let x2 = trajectory(&homogeneous(alpha, theta, mode, u2.clone(), f2.clone()));
        let combined = homogeneous(
            alpha,
            theta,
            mode,
            Expr::num(a) * u1 + Expr::num(b) * u2,
            Expr::num(a) * f1 + Expr::num(b) * f2,
        );
        let x = trajectory(&combined);
        let scale = x1.iter().chain(&x2).flatten().fold(1.0f64, |s, v| s.max(v.abs()));
        for (n, step) in x.iter().enumerate() {
            for (i, v) in step.iter().enumerate() {
                let expect = a * x1[n][i] + b * x2[n][i];
                prop_assert!((v - expect).abs() <= 1e-10 * scale * (a.abs() + b.abs()).max(1.0));
            }
        }
    }

    #[test]
    fn zero_data_gives_zero_at_every_step(
        alpha in 1.0f64..2.5,
        theta in 0.5f64..=1.0,
        mode in prop_oneof![Just(Mode::Direct), Just(Mode::Desingularized), Just(Mode::Both)],
    ) {
        let r = solve_ibvp(&homogeneous(alpha, theta, mode, Expr::num(0.0), Expr::num(0.0))).unwrap();
        for step in r.trajectory.iter().chain(r.hat_trajectory.iter().flatten()) {
            prop_assert!(step.iter().all(|v| *v == 0.0));
        }
    }
}

#[test]
fn invariant_ids_are_unique_within_each_suite() {
    for name in ["verify-tensor", "verify-norms", "poincare-identity", "semigroup-check"] {
        let out = run_experiment(name, &ExperimentOptions { seed: 3, grid: None }).unwrap();
        let ids: BTreeSet<_> = out.invariants.iter().map(|i| i.id.as_str()).collect();
        assert_eq!(ids.len(), out.invariants.len(), "{name} repeats an invariant id");
        assert!(!out.invariants.is_empty());
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensor_chart::TensorField;
use crate::weighted::{weighted_sobolev_norm, NormSpec};

use super::assemble::{Discretization, Formulation};
use super::stepping::ThetaStepper;
use super::{lp_in_time, norm_context, volume_weights, Mode, ProblemSpec, SolveResult};

/// `(‖∂_t u‖_{L_p(J,L_p^λ)} + ‖u‖_{L_p(J,W^{2,λ})}) / (‖f‖_{L_p(J,L_p^λ)} + ‖u₀‖_{W^{2,λ}})`
/// with backward differences in time and `(p, λ)` of the first norm specification.
pub fn maximal_regularity_ratio(result: &SolveResult, problem: &ProblemSpec) -> Result<f64> {
    if !problem.data.is_homogeneous_boundary() {
        return Err(Error::Config("the maximal-regularity ratio needs homogeneous boundary data".into()));
    }
    let base = problem.primary_norm();
    let w2 = NormSpec { k: 2, ..base };
    let l0 = NormSpec { k: 0, ..base };
    let grid = &result.grid;
    let (metric, rho) = norm_context(problem, grid, &base)?;
    let m = grid.dim();
    let traj = &result.trajectory;
    let dt = problem.time.dt();
    let norm = |v: Vec<f64>, s: &NormSpec| weighted_sobolev_norm(&TensorField::scalar(m, v), s, &rho, &metric).map(|r| r.value);

    let mut du = Vec::with_capacity(traj.len());
    let mut u2 = Vec::with_capacity(traj.len());
    let mut fl = Vec::with_capacity(traj.len());
    for n in 1..traj.len() {
        du.push(norm(traj[n].iter().zip(&traj[n - 1]).map(|(a, b)| (a - b) / dt).collect(), &l0)?);
        u2.push(norm(traj[n].clone(), &w2)?);
        let t = result.times[n];
        fl.push(norm((0..grid.npts()).map(|q| problem.data.f.eval(grid.point(q), t)).collect(), &l0)?);
    }
    let p = base.p;
    let num = lp_in_time(du.into_iter(), dt, p) + lp_in_time(u2.into_iter(), dt, p);
    let den = lp_in_time(fl.into_iter(), dt, p) + norm(traj[0].clone(), &w2)?;
    if !(den > 0.0) {
        return Err(Error::UndefinedRatio("f = 0 and u₀ = 0 give a zero denominator".into()));
    }
    Ok(num / den)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SemigroupReport {
    pub n: usize,
    pub m: usize,
    /// `‖T^{n+m}u₀ − T^m T^n u₀‖_∞ / ‖T^{n+m}u₀‖_∞`.
    pub defect: f64,
    /// `t_k‖A_h u(t_k)‖/‖u₀‖` for `k = 1..N`.
    pub smoothing: Vec<f64>,
    pub smoothing_bound: f64,
}

/// Discrete semigroup property and smoothing bound for an autonomous problem
/// with `f = 0`, `h = 0`, started from random nodal values.
pub fn semigroup_check(problem: &ProblemSpec, n: usize, m: usize, seed: u64) -> Result<SemigroupReport> {
    problem.time.validate()?;
    let data = &problem.data;
    if !problem.coeffs.is_autonomous() || !data.f.expr().is_zero() || !data.is_homogeneous_boundary() {
        return Err(Error::Mode("semigroup check needs autonomous coefficients, f = 0 and h = 0".into()));
    }
    let form = match problem.mode {
        Mode::Desingularized => Formulation::Hat,
        _ => Formulation::Direct,
    };
    let disc = Discretization::new(problem, form)?;
    let grid = disc.grid().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u0: Vec<f64> = (0..grid.npts()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let dt = problem.time.dt();
    let theta = problem.time.theta;

    let march = |u: &mut Vec<f64>, k: usize| -> Result<()> {
        let mut s = ThetaStepper::new(&disc, 0.0, dt, theta)?;
        for _ in 0..k {
            s.advance(u)?;
        }
        Ok(())
    };
    let mut whole = u0.clone();
    march(&mut whole, n + m)?;
    let mut split = u0.clone();
    march(&mut split, n)?;
    march(&mut split, m)?;
    let scale = whole.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let diff = whole.iter().zip(&split).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    let defect = if scale > 0.0 { diff / scale } else { diff };

    let metric = match form {
        Formulation::Direct => problem.geometry.metric_field(grid.clone())?,
        Formulation::Hat => problem.geometry.hat_metric_field(grid.clone())?,
    };
    let vol = volume_weights(&metric);
    let l2 = |v: &[f64]| v.iter().zip(&vol).map(|(x, w)| w * x * x).sum::<f64>().sqrt();
    let norm0 = l2(&u0);
    let mut stepper = ThetaStepper::new(&disc, 0.0, dt, theta)?;
    let mut u = u0;
    let mut smoothing = Vec::with_capacity(problem.time.steps);
    for k in 1..=problem.time.steps {
        stepper.advance(&mut u)?;
        let au = stepper.system().apply_interior(&u);
        smoothing.push(k as f64 * dt * l2(&au) / norm0);
    }
    let smoothing_bound = smoothing.iter().cloned().fold(0.0, f64::max);
    Ok(SemigroupReport {
        n,
        m,
        defect,
        smoothing,
        smoothing_bound,
    })
}

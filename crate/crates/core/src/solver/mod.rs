//! Finite-difference solver for `∂u + 𝒜u = f`, `ℬu = h`, `u(0) = u₀`.
mod assemble;
mod diagnostics;
mod stepping;

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::operators::{check_compatibility, CoefficientSet, CompatibilityReport, ProblemData};
use crate::tensor_chart::{ChartGrid, MetricField, TensorField};
use crate::weighted::{weighted_sobolev_norm, MetricChoice, NormSpec};

pub use assemble::{DiscreteSystem, Discretization, Formulation, Load, RowKind};
pub use diagnostics::{maximal_regularity_ratio, semigroup_check, SemigroupReport};
pub use stepping::{step_theta, ThetaStepper};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Direct,
    Desingularized,
    Both,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Direct => "direct",
            Mode::Desingularized => "desingularized",
            Mode::Both => "both",
        }
    }
}

/// Time grid `t_n = n·T/N` and the θ of the scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    #[serde(rename = "T")]
    pub t_end: f64,
    pub steps: usize,
    #[serde(default = "default_theta")]
    pub theta: f64,
}

fn default_theta() -> f64 {
    1.0
}

impl TimeSpec {
    pub fn new(t_end: f64, steps: usize, theta: f64) -> Self {
        TimeSpec { t_end, steps, theta }
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.steps as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(Error::Config(format!("final time must be positive and finite, got {}", self.t_end)));
        }
        if self.steps == 0 {
            return Err(Error::Config("at least one time step is required".into()));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::Config(format!("theta must lie in [0, 1], got {}", self.theta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub geometry: Geometry,
    pub coeffs: CoefficientSet,
    pub data: ProblemData,
    pub time: TimeSpec,
    pub norms: Vec<NormSpec>,
    pub mode: Mode,
    /// Grid points per axis.
    pub resolution: Vec<usize>,
    pub waive_compatibility: bool,
}

impl ProblemSpec {
    /// First norm specification, or `p = 2, k = 2, λ = 0`.
    pub fn primary_norm(&self) -> NormSpec {
        self.norms.first().copied().unwrap_or_else(|| NormSpec::new(2.0, 2, 0.0))
    }

    pub fn grid(&self) -> Result<Arc<ChartGrid>> {
        self.geometry.grid(&self.resolution)
    }
}

/// Nodal error against the reference solution, maximized over time levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorNorms {
    pub err_inf: f64,
    /// Volume-weighted discrete `L₂(M, g)` error.
    pub err_l2: f64,
}

/// Discrete `L_p(J, W^{k,λ})` and `W¹_p(J, L_p^λ)` surrogates of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LedgerEntry {
    pub spec: NormSpec,
    pub space_norm: f64,
    pub time_derivative_norm: f64,
    pub blowup_warning: bool,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub grid: Arc<ChartGrid>,
    pub mode: Mode,
    pub times: Vec<f64>,
    /// Direct trajectory, or the hat trajectory when only that was solved.
    pub trajectory: Vec<Vec<f64>>,
    /// Hat trajectory in mode `both`.
    pub hat_trajectory: Option<Vec<Vec<f64>>>,
    /// Residual of each linear solve.
    pub residuals: Vec<f64>,
    pub errors: Option<ErrorNorms>,
    pub hat_errors: Option<ErrorNorms>,
    /// `sup_n ‖u_direct − u_hat‖_∞` in mode `both`.
    pub mode_difference: Option<f64>,
    pub ledger: Vec<LedgerEntry>,
    pub compatibility: Option<CompatibilityReport>,
    pub compatibility_waived: bool,
    pub wall_ms: f64,
}

impl SolveResult {
    pub fn final_state(&self) -> &[f64] {
        self.trajectory.last().expect("trajectory holds the initial state")
    }
}

/// Integrates a discretization over the time grid of `time`.
pub fn integrate(disc: &Discretization, time: &TimeSpec) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    time.validate()?;
    let mut stepper = ThetaStepper::new(disc, 0.0, time.dt(), time.theta)?;
    let mut u = disc.initial();
    let mut traj = Vec::with_capacity(time.steps + 1);
    let mut residuals = Vec::with_capacity(time.steps);
    traj.push(u.clone());
    for _ in 0..time.steps {
        residuals.push(stepper.advance(&mut u)?);
        traj.push(u.clone());
    }
    Ok((traj, residuals))
}

pub fn solve_ibvp(problem: &ProblemSpec) -> Result<SolveResult> {
    let start = Instant::now();
    problem.time.validate()?;
    for n in &problem.norms {
        n.validate()?;
    }
    let grid = problem.grid()?;
    let compatibility = if problem.norms.is_empty() {
        None
    } else {
        let p = problem.norms[0].p;
        Some(check_compatibility(&problem.data, &problem.coeffs, &problem.geometry, &grid, p, None, 1e-8)?)
    };
    if let Some(rep) = &compatibility {
        if !rep.pass && !problem.waive_compatibility {
            let bad: Vec<&str> = rep.conditions.iter().filter(|c| c.applicable && c.residual > rep.tolerance).map(|c| c.id).collect();
            return Err(Error::Compatibility(format!("conditions {bad:?} fail at p = {}", rep.p)));
        }
    }
    let times: Vec<f64> = (0..=problem.time.steps).map(|n| n as f64 * problem.time.dt()).collect();
    let run = |f: Formulation| -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        let disc = Discretization::new(problem, f)?;
        integrate(&disc, &problem.time)
    };
    let (trajectory, residuals, hat_trajectory) = match problem.mode {
        Mode::Direct => {
            let (t, r) = run(Formulation::Direct)?;
            (t, r, None)
        }
        Mode::Desingularized => {
            let (t, r) = run(Formulation::Hat)?;
            (t, r, None)
        }
        Mode::Both => {
            let (t, mut r) = run(Formulation::Direct)?;
            let (th, rh) = run(Formulation::Hat)?;
            r.extend(rh);
            (t, r, Some(th))
        }
    };

    let metric = problem.geometry.metric_field(grid.clone())?;
    let errors = problem
        .data
        .exact
        .as_ref()
        .map(|ex| trajectory_error(&trajectory, &times, &grid, &metric, |x, t| ex.eval(x, t)));
    let hat_errors = match (&problem.data.exact, &hat_trajectory) {
        (Some(ex), Some(th)) => Some(trajectory_error(th, &times, &grid, &metric, |x, t| ex.eval(x, t))),
        _ => None,
    };
    let mode_difference = hat_trajectory.as_ref().map(|th| {
        trajectory
            .iter()
            .zip(th)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    });
    let ledger = problem
        .norms
        .iter()
        .map(|spec| norm_ledger(problem, &grid, &trajectory, spec))
        .collect::<Result<Vec<_>>>()?;
    let waived = compatibility.as_ref().is_some_and(|r| !r.pass);
    Ok(SolveResult {
        grid,
        mode: problem.mode,
        times,
        trajectory,
        hat_trajectory,
        residuals,
        errors,
        hat_errors,
        mode_difference,
        ledger,
        compatibility,
        compatibility_waived: waived,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Trapezoid weights times `√g`.
pub fn volume_weights(metric: &MetricField) -> Vec<f64> {
    metric
        .grid()
        .trapezoid_weights()
        .iter()
        .zip(metric.sqrt_det())
        .map(|(w, s)| w * s)
        .collect()
}

fn trajectory_error<F: Fn(&[f64], f64) -> f64>(
    traj: &[Vec<f64>],
    times: &[f64],
    grid: &ChartGrid,
    metric: &MetricField,
    exact: F,
) -> ErrorNorms {
    let vol = volume_weights(metric);
    let mut out = ErrorNorms { err_inf: 0.0, err_l2: 0.0 };
    for (u, &t) in traj.iter().zip(times) {
        let mut l2 = 0.0;
        for p in 0..grid.npts() {
            let e = u[p] - exact(grid.point(p), t);
            out.err_inf = out.err_inf.max(e.abs());
            l2 += vol[p] * e * e;
        }
        out.err_l2 = out.err_l2.max(l2.sqrt());
    }
    out
}

/// Metric and `ρ` samples a norm specification is evaluated with.
pub(crate) fn norm_context(problem: &ProblemSpec, grid: &Arc<ChartGrid>, spec: &NormSpec) -> Result<(MetricField, Vec<f64>)> {
    let geo = &problem.geometry;
    let metric = match spec.metric {
        MetricChoice::G => geo.metric_field(grid.clone())?,
        MetricChoice::Hat => geo.hat_metric_field(grid.clone())?,
    };
    let (rho, _) = geo.datum.samples(grid)?;
    Ok((metric, rho))
}

/// `(Σ_n dt ‖v_n‖^p)^{1/p}` over `n = 1..N`.
pub(crate) fn lp_in_time(values: impl Iterator<Item = f64>, dt: f64, p: f64) -> f64 {
    values.map(|v| dt * v.powf(p)).sum::<f64>().powf(1.0 / p)
}

fn norm_ledger(problem: &ProblemSpec, grid: &Arc<ChartGrid>, traj: &[Vec<f64>], spec: &NormSpec) -> Result<LedgerEntry> {
    let (metric, rho) = norm_context(problem, grid, spec)?;
    let dt = problem.time.dt();
    let m = grid.dim();
    let mut warn = false;
    let mut space = Vec::with_capacity(traj.len());
    let mut deriv = Vec::with_capacity(traj.len());
    let l0 = NormSpec { k: 0, ..*spec };
    for n in 1..traj.len() {
        let u = TensorField::scalar(m, traj[n].clone());
        let rep = weighted_sobolev_norm(&u, spec, &rho, &metric)?;
        warn |= rep.blowup_warning;
        space.push(rep.value);
        let du = TensorField::scalar(m, traj[n].iter().zip(&traj[n - 1]).map(|(a, b)| (a - b) / dt).collect());
        deriv.push(weighted_sobolev_norm(&du, &l0, &rho, &metric)?.value);
    }
    Ok(LedgerEntry {
        spec: *spec,
        space_norm: lp_in_time(space.into_iter(), dt, spec.p),
        time_derivative_norm: lp_in_time(deriv.into_iter(), dt, spec.p),
        blowup_warning: warn,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::geometry::{make_cusp, make_euclidean_box, Base};
    use crate::operators::SpaceTimeFn;

    fn heat(n: usize, steps: usize, theta: f64) -> ProblemSpec {
        let geo = make_euclidean_box(1, &[0.0], &[1.0]).unwrap();
        let mut data = ProblemData::zero(1);
        // u = e^{-π² t} sin(πx)
        let exact = SpaceTimeFn::parse("exp(-pi^2*t)*sin(pi*x)", 1).unwrap();
        data.u0 = SpaceTimeFn::parse("sin(pi*x)", 1).unwrap();
        data.exact = Some(exact);
        ProblemSpec {
            geometry: geo,
            coeffs: CoefficientSet::isotropic(1, Expr::num(1.0)).unwrap(),
            data,
            time: TimeSpec::new(0.1, steps, theta),
            norms: vec![],
            mode: Mode::Direct,
            resolution: vec![n],
            waive_compatibility: false,
        }
    }

    #[test]
    fn zero_data_stays_zero() {
        let mut p = heat(17, 5, 0.5);
        p.data = ProblemData::zero(1);
        let r = solve_ibvp(&p).unwrap();
        assert!(r.trajectory.iter().all(|u| u.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn heat_equation_converges_in_time() {
        let e = |steps: usize, theta: f64| solve_ibvp(&heat(401, steps, theta)).unwrap().errors.unwrap().err_inf;
        let r1 = e(10, 1.0) / e(20, 1.0);
        assert!(r1 > 1.8 && r1 < 2.2, "implicit Euler ratio {r1}");
        let r2 = e(10, 0.5) / e(20, 0.5);
        assert!(r2 > 3.5, "Crank–Nicolson ratio {r2}");
    }

    #[test]
    fn cusp_solve_in_both_modes() {
        let geo = make_cusp(1.0, Base::PointPair, 0.1, 1.0).unwrap();
        let coeffs = CoefficientSet::isotropic(1, Expr::parse("x^2").unwrap()).unwrap();
        let mut data = ProblemData::zero(1);
        let u = Expr::parse("exp(-t)*x^2*(1-x)").unwrap();
        let au = crate::operators::exact_apply_a(&coeffs, &geo.manifold.metric, &u).unwrap();
        data.f = SpaceTimeFn::new(au - u.clone(), 1).unwrap();
        data.exact = Some(SpaceTimeFn::new(u.clone(), 1).unwrap());
        data.h0 = SpaceTimeFn::new(u.clone(), 1).unwrap();
        data.u0 = SpaceTimeFn::new(u.substitute("t", &Expr::num(0.0)), 1).unwrap();
        let p = ProblemSpec {
            geometry: geo,
            coeffs,
            data,
            time: TimeSpec::new(0.5, 40, 0.5),
            norms: vec![NormSpec::new(2.0, 2, 0.0)],
            mode: Mode::Both,
            resolution: vec![41],
            waive_compatibility: false,
        };
        let r = solve_ibvp(&p).unwrap();
        let e = r.errors.unwrap().err_inf;
        assert!(e < 1e-3, "{e}");
        assert!(r.hat_errors.unwrap().err_inf < 1e-3);
        assert!(r.mode_difference.unwrap() < 2e-3);
        assert!(r.residuals.iter().all(|x| *x < 1e-9));
        assert!(r.ledger[0].space_norm > 0.0);
        assert!(r.compatibility.unwrap().pass);
    }
}

use crate::error::Result;
use crate::expr::Expr;
use crate::geometry::make_euclidean_box;
use crate::operators::{CoefficientSet, ProblemData, SpaceTimeFn};
use crate::report::{Invariant, Outcome, Refinement, RunRow, Table};
use crate::solver::{maximal_regularity_ratio, semigroup_check, solve_ibvp, Mode, ProblemSpec, SolveResult, TimeSpec};
use crate::study::{cusp_homogeneous, cusp_manufactured};

use super::norms::spread;

const T_MIN: f64 = 0.1;
const T_END: f64 = 0.5;

fn run_row(problem: &ProblemSpec, r: &SolveResult, mode: Mode) -> RunRow {
    let errors = match mode {
        Mode::Desingularized => r.hat_errors.or(r.errors),
        _ => r.errors,
    };
    let norm = problem.primary_norm();
    RunRow {
        geometry: problem.geometry.name(),
        alpha: problem.geometry.manifold.param("alpha"),
        lambda: Some(norm.lambda),
        p: Some(norm.p),
        h: r.grid.h_max(),
        dt: problem.time.dt(),
        theta: problem.time.theta,
        mode: mode.name().to_string(),
        err_inf: errors.map(|e| e.err_inf),
        err_l2: errors.map(|e| e.err_l2),
        wall_ms: Some(r.wall_ms),
        ..Default::default()
    }
}

/// Solves and records one CSV row per formulation that was run.
fn solve_logged(out: &mut Outcome, problem: &ProblemSpec) -> Result<SolveResult> {
    let r = solve_ibvp(problem)?;
    match problem.mode {
        Mode::Both => {
            out.push_run(run_row(problem, &r, Mode::Direct));
            out.push_run(run_row(problem, &r, Mode::Desingularized));
        }
        m => out.push_run(run_row(problem, &r, m)),
    }
    Ok(r)
}

/// Spatial levels in points per axis for the convergence sweep.
pub const SPACE_LEVELS: [usize; 3] = [33, 65, 129];
pub const SPACE_STEPS: usize = 400;
pub const TIME_POINTS: usize = 2049;
pub const IMPLICIT_STEPS: [usize; 3] = [10, 20, 40];
pub const CN_STEPS: [usize; 3] = [5, 10, 20];

pub fn cusp_convergence(seed: u64, space_levels: &[usize]) -> Result<Outcome> {
    let mut out = Outcome::new("cusp-convergence", seed);
    let mut table = Table::new("convergence", &["study", "level_0", "level_1", "level_2"]);
    for alpha in [1.0, 2.0] {
        let (mut h, mut e_direct, mut e_hat, mut diff) = (vec![], vec![], vec![], vec![]);
        for &n in space_levels {
            let p = cusp_manufactured(alpha, T_MIN, n, TimeSpec::new(T_END, SPACE_STEPS, 0.5), Mode::Both)?;
            let r = solve_logged(&mut out, &p)?;
            h.push(r.grid.h_max());
            e_direct.push(r.errors.map(|e| e.err_inf).unwrap_or(f64::NAN));
            e_hat.push(r.hat_errors.map(|e| e.err_inf).unwrap_or(f64::NAN));
            diff.push(r.mode_difference.unwrap_or(f64::NAN));
        }
        for (label, e) in [("direct", &e_direct), ("hat", &e_hat)] {
            let id = format!("cusp.space_order.{label}.alpha={alpha}");
            let study = Refinement::new(h.clone(), e.clone());
            table.push_numbers(&id, e);
            out.push(Invariant::order(id, &study, 1.8, super::EXACT_TOL));
        }
        let excess = (0..h.len())
            .map(|i| diff[i] / e_direct[i].max(e_hat[i]))
            .fold(0.0f64, f64::max);
        out.push(Invariant::at_most(
            format!("cusp.mode_agreement.alpha={alpha}"),
            excess,
            3.0,
            format!("direct/hat gap over larger error, gaps {diff:?}"),
        ));
        let decreasing = Refinement::new(h.clone(), diff.clone()).is_decreasing();
        out.push(Invariant::at_least(
            format!("cusp.mode_gap_decreasing.alpha={alpha}"),
            f64::from(u8::from(decreasing)),
            1.0,
            "gap decreases under refinement",
        ));
        table.push_numbers(&format!("cusp.mode_gap.alpha={alpha}"), &diff);

        for (theta, steps, min_order) in [(1.0, IMPLICIT_STEPS, 0.9), (0.5, CN_STEPS, 1.8)] {
            let (mut dts, mut errs) = (vec![], vec![]);
            for s in steps {
                let p = cusp_manufactured(alpha, T_MIN, TIME_POINTS, TimeSpec::new(T_END, s, theta), Mode::Direct)?;
                let r = solve_logged(&mut out, &p)?;
                dts.push(p.time.dt());
                errs.push(r.errors.map(|e| e.err_inf).unwrap_or(f64::NAN));
            }
            let id = format!("cusp.time_order.theta={theta}.alpha={alpha}");
            table.push_numbers(&id, &errs);
            out.push(Invariant::order(id, &Refinement::new(dts, errs), min_order, super::EXACT_TOL));
        }
    }
    out.tables.push(table);
    Ok(out)
}

/// Joint `(points, steps)` refinement levels for the maximal-regularity sweep.
pub const MAXREG_LEVELS: [(usize, usize); 3] = [(33, 20), (65, 40), (129, 80)];

fn smoothing_stable(out: &mut Outcome, id: String, bounds: &[f64]) {
    let growth = bounds[bounds.len() - 1] / bounds[0];
    let worst = bounds.iter().cloned().fold(0.0f64, f64::max);
    out.push(Invariant::at_most(
        id,
        worst.max(growth),
        2.0,
        format!("bounds {bounds:?}, growth {growth:.3}"),
    ));
}

pub fn maxreg_sweep(seed: u64, levels: &[(usize, usize)]) -> Result<Outcome> {
    let p_exp = 2.0;
    let mut out = Outcome::new("maxreg-sweep", seed);
    let mut table = Table::new("maxreg", &["study", "level_0", "level_1", "level_2"]);
    for alpha in [1.0, 2.0] {
        for lambda in [0.0, 2.0 / p_exp] {
            let mut ratios = vec![];
            for &(n, steps) in levels {
                let p = cusp_homogeneous(alpha, lambda, p_exp, T_MIN, n, TimeSpec::new(T_END, steps, 1.0))?;
                let r = solve_ibvp(&p)?;
                let ratio = maximal_regularity_ratio(&r, &p)?;
                let mut row = run_row(&p, &r, Mode::Direct);
                row.maxreg_ratio = Some(ratio);
                out.push_run(row);
                ratios.push(ratio);
            }
            let id = format!("maxreg.ratio_spread.alpha={alpha}.lambda={lambda}");
            table.push_numbers(&id, &ratios);
            out.push(Invariant::at_most(id, spread(&ratios), 2.0, format!("ratios {ratios:?}")));
        }
        let mut defect = 0.0f64;
        for (mode, label) in [(Mode::Direct, "direct"), (Mode::Desingularized, "hat")] {
            let mut bounds = vec![];
            for &(n, steps) in levels {
                let mut p = cusp_homogeneous(alpha, 0.0, p_exp, T_MIN, n, TimeSpec::new(T_END, steps, 1.0))?;
                p.mode = mode;
                let rep = semigroup_check(&p, 3, 4, seed)?;
                defect = defect.max(rep.defect);
                let mut row = RunRow {
                    geometry: p.geometry.name(),
                    alpha: Some(alpha),
                    h: p.grid()?.h_max(),
                    dt: p.time.dt(),
                    theta: p.time.theta,
                    mode: mode.name().to_string(),
                    semigroup_bound: Some(rep.smoothing_bound),
                    ..Default::default()
                };
                row.p = Some(p_exp);
                out.push_run(row);
                bounds.push(rep.smoothing_bound);
            }
            let id = format!("maxreg.smoothing_stable.{label}.alpha={alpha}");
            table.push_numbers(&id, &bounds);
            smoothing_stable(&mut out, id, &bounds);
        }
        out.push(Invariant::at_most(
            format!("maxreg.semigroup_identity.alpha={alpha}"),
            defect,
            1e-10,
            "T^(n+m) against T^m T^n, n = 3, m = 4",
        ));
    }
    out.tables.push(table);
    Ok(out)
}

/// 1D heat equation on `[0, 1]` with homogeneous Dirichlet data.
pub fn heat_problem(n: usize, steps: usize) -> Result<ProblemSpec> {
    let mut data = ProblemData::zero(1);
    data.u0 = SpaceTimeFn::parse("sin(pi*x)", 1)?;
    Ok(ProblemSpec {
        geometry: make_euclidean_box(1, &[0.0], &[1.0])?,
        coeffs: CoefficientSet::isotropic(1, Expr::num(1.0))?,
        data,
        time: TimeSpec::new(0.2, steps, 1.0),
        norms: vec![],
        mode: Mode::Direct,
        resolution: vec![n],
        waive_compatibility: false,
    })
}

pub fn semigroup_suite(seed: u64, base: usize) -> Result<Outcome> {
    let mut out = Outcome::new("semigroup-check", seed);
    let mut table = Table::new("smoothing", &["study", "level_0", "level_1", "level_2"]);
    // (h, dt) refined together
    let levels = [(base + 1, 20), (2 * base + 1, 40), (4 * base + 1, 80)];
    let mut cases: Vec<(String, Box<dyn Fn(usize, usize) -> Result<ProblemSpec>>)> =
        vec![("heat".into(), Box::new(heat_problem))];
    for alpha in [1.0, 2.0] {
        cases.push((
            format!("cusp_hat.alpha={alpha}"),
            Box::new(move |n, steps| {
                let mut p = cusp_homogeneous(alpha, 0.0, 2.0, T_MIN, n, TimeSpec::new(T_END, steps, 1.0))?;
                p.mode = Mode::Desingularized;
                Ok(p)
            }),
        ));
    }
    for (name, build) in &cases {
        let mut defect = 0.0f64;
        let mut bounds = vec![];
        for &(n, steps) in &levels {
            let p = build(n, steps)?;
            let rep = semigroup_check(&p, 3, 4, seed)?;
            defect = defect.max(rep.defect);
            bounds.push(rep.smoothing_bound);
        }
        out.push(Invariant::at_most(format!("semigroup.identity.{name}"), defect, 1e-10, "n = 3, m = 4"));
        let id = format!("semigroup.smoothing_stable.{name}");
        table.push_numbers(&id, &bounds);
        smoothing_stable(&mut out, id, &bounds);
    }
    out.tables.push(table);
    Ok(out)
}

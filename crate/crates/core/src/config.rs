//! TOML problem-spec files, command-line overrides, single runs with
//! refinement levels and parameter sweeps.
use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{
    make_cusp, make_euclidean_box, make_funnel, make_infinite_cusp, make_poincare_ball, make_wedge, Base, Geometry,
    GeometryKind,
};
use crate::operators::{CoefficientSet, ProblemData, SpaceTimeFn};
use crate::report::{Invariant, Outcome, Refinement, RunRow, Table};
use crate::solver::{maximal_regularity_ratio, semigroup_check, solve_ibvp, Mode, ProblemSpec, SolveResult, TimeSpec};
use crate::study::{fit_order, manufactured_data};
use crate::tensor_chart::FaceLabel;
use crate::weighted::NormSpec;

/// Environment variable bounding the worker threads of a sweep.
pub const THREADS_ENV: &str = "DEGENPDE_THREADS";

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub waive_compatibility: bool,
    pub geometry: GeometrySection,
    #[serde(default)]
    pub coefficients: CoefficientSection,
    pub data: DataSection,
    pub time: TimeSpec,
    #[serde(default)]
    pub norms: Vec<NormSpec>,
    #[serde(default)]
    pub study: StudySection,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub kind: GeometryKind,
    pub m: Option<usize>,
    pub alpha: Option<f64>,
    pub base: Option<Base>,
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub t_lo: Option<f64>,
    pub r0: Option<f64>,
    pub r1: Option<f64>,
    pub lo: Option<Vec<f64>>,
    pub hi: Option<Vec<f64>>,
    pub ell: Option<f64>,
    pub labels: Option<Vec<[FaceLabel; 2]>>,
    /// Cells per axis.
    pub cells: usize,
}

/// A scalar expression or a list of them.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ExprList {
    One(String),
    Many(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSection {
    /// `s` for `a = s·id`, or the `m²` entries of `a^i_j` row by row.
    pub a: ExprList,
    pub a_vec: Option<Vec<String>>,
    pub a0: Option<String>,
    pub b0: Option<String>,
}

impl Default for CoefficientSection {
    fn default() -> Self {
        CoefficientSection {
            a: ExprList::One("1".into()),
            a_vec: None,
            a0: None,
            b0: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Manufactured solution; the remaining data are derived from it.
    pub exact: Option<String>,
    pub f: Option<String>,
    pub h0: Option<String>,
    /// One expression for every face, or one per face in the order
    /// `(axis 0 low, axis 0 high, axis 1 low, …)`.
    pub h1: Option<ExprList>,
    pub u0: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    /// Asserted minimum order of a refinement run.
    pub min_order: Option<f64>,
    /// Asserted bound on `max/min` of maximal-regularity ratios in a sweep.
    pub maxreg_spread: Option<f64>,
}

/// Parses a spec, reporting the dotted path of the offending field.
pub fn parse_spec(text: &str) -> Result<SpecFile> {
    let de = toml::Deserializer::parse(text).map_err(|e| Error::schema("<document>", e.message()))?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::schema(if path.is_empty() { "<root>".to_string() } else { path }, e.into_inner().message())
    })
}

pub fn load_spec(path: &std::path::Path) -> Result<SpecFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::schema(path.display().to_string(), format!("cannot read: {e}")))?;
    parse_spec(&text)
}

fn at(path: &'static str) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Schema { .. } => e,
        other => Error::schema(path, other.to_string()),
    }
}

fn need(v: Option<f64>, path: &'static str) -> Result<f64> {
    v.ok_or_else(|| Error::schema(path, "missing for this geometry kind"))
}

impl GeometrySection {
    pub fn build(&self) -> Result<Geometry> {
        use GeometryKind::*;
        let base = self.base.unwrap_or(Base::PointPair);
        let geo = match self.kind {
            EuclideanBox => {
                let m = self.m.unwrap_or(1);
                let lo = self.lo.clone().unwrap_or_else(|| vec![0.0; m]);
                let hi = self.hi.clone().unwrap_or_else(|| vec![1.0; m]);
                make_euclidean_box(m, &lo, &hi)
            }
            PoincareBall => make_poincare_ball(
                self.m.unwrap_or(2),
                need(self.r0, "geometry.r0")?,
                need(self.r1, "geometry.r1")?,
            ),
            Cusp => make_cusp(
                need(self.alpha, "geometry.alpha")?,
                base,
                need(self.t_min, "geometry.t_min")?,
                self.t_max.unwrap_or(1.0),
            ),
            InfiniteCusp => make_infinite_cusp(
                need(self.alpha, "geometry.alpha")?,
                base,
                self.t_lo.unwrap_or(1.0),
                need(self.t_max, "geometry.t_max")?,
            ),
            Funnel => make_funnel(
                need(self.alpha, "geometry.alpha")?,
                base,
                self.t_lo.unwrap_or(1.0),
                need(self.t_max, "geometry.t_max")?,
            ),
            Wedge => make_wedge(
                need(self.alpha, "geometry.alpha")?,
                need(self.t_min, "geometry.t_min")?,
                need(self.ell, "geometry.ell")?,
            ),
        }
        .map_err(at("geometry"))?;
        match &self.labels {
            Some(l) => geo.with_labels(l).map_err(at("geometry.labels")),
            None => Ok(geo),
        }
    }
}

/// Parses a user expression, replacing `rho` by the singularity datum and
/// binding the geometry parameters (`alpha`, `t_min`, …) as constants.
fn user_expr(src: &str, geo: &Geometry, path: impl Into<String>) -> Result<Expr> {
    let path = path.into();
    let e = Expr::parse(src).map_err(|e| Error::schema(path.clone(), e.to_string()))?;
    let e = e.substitute("rho", geo.datum.rho.expr());
    let e = e.bind_constants(&geo.manifold.params);
    // compile once here so unknown names are reported at this path
    SpaceTimeFn::new(e.clone(), geo.dim()).map_err(|err| Error::schema(path, err.to_string()))?;
    Ok(e)
}

fn opt_expr(src: &Option<String>, geo: &Geometry, path: &str) -> Result<Expr> {
    match src {
        Some(s) => user_expr(s, geo, path),
        None => Ok(Expr::num(0.0)),
    }
}

impl CoefficientSection {
    pub fn build(&self, geo: &Geometry) -> Result<CoefficientSet> {
        let m = geo.dim();
        let a = match &self.a {
            ExprList::One(s) => {
                let s = user_expr(s, geo, "coefficients.a")?;
                (0..m * m).map(|k| if k / m == k % m { s.clone() } else { Expr::num(0.0) }).collect()
            }
            ExprList::Many(v) => {
                if v.len() != m * m {
                    return Err(Error::schema("coefficients.a", format!("expected {} entries, got {}", m * m, v.len())));
                }
                v.iter()
                    .enumerate()
                    .map(|(k, s)| user_expr(s, geo, format!("coefficients.a[{k}]")))
                    .collect::<Result<Vec<_>>>()?
            }
        };
        let a_vec = match &self.a_vec {
            None => vec![Expr::num(0.0); m],
            Some(v) if v.len() == m => v
                .iter()
                .enumerate()
                .map(|(k, s)| user_expr(s, geo, format!("coefficients.a_vec[{k}]")))
                .collect::<Result<Vec<_>>>()?,
            Some(v) => return Err(Error::schema("coefficients.a_vec", format!("expected {m} entries, got {}", v.len()))),
        };
        let a0 = opt_expr(&self.a0, geo, "coefficients.a0")?;
        let b0 = opt_expr(&self.b0, geo, "coefficients.b0")?;
        CoefficientSet::new(m, a, a_vec, a0, b0).map_err(at("coefficients"))
    }
}

impl DataSection {
    pub fn build(&self, geo: &Geometry, coeffs: &CoefficientSet) -> Result<ProblemData> {
        let m = geo.dim();
        let fn_at = |e: Expr, path: &str| SpaceTimeFn::new(e, m).map_err(|err| Error::schema(path, err.to_string()));
        if let Some(exact) = &self.exact {
            for (given, name) in [
                (self.f.is_some(), "data.f"),
                (self.h0.is_some(), "data.h0"),
                (self.h1.is_some(), "data.h1"),
                (self.u0.is_some(), "data.u0"),
            ] {
                if given {
                    return Err(Error::schema(name, "cannot be combined with data.exact"));
                }
            }
            let u = user_expr(exact, geo, "data.exact")?;
            return manufactured_data(geo, coeffs, &u).map_err(at("data.exact"));
        }
        let faces = 2 * m;
        let h1 = match &self.h1 {
            None => vec![SpaceTimeFn::zero(m); faces],
            Some(ExprList::One(s)) => vec![fn_at(user_expr(s, geo, "data.h1")?, "data.h1")?; faces],
            Some(ExprList::Many(v)) => {
                if v.len() != faces {
                    return Err(Error::schema("data.h1", format!("expected {faces} entries, got {}", v.len())));
                }
                v.iter()
                    .enumerate()
                    .map(|(k, s)| {
                        let path = format!("data.h1[{k}]");
                        fn_at(user_expr(s, geo, path.clone())?, &path)
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        Ok(ProblemData {
            f: fn_at(opt_expr(&self.f, geo, "data.f")?, "data.f")?,
            h0: fn_at(opt_expr(&self.h0, geo, "data.h0")?, "data.h0")?,
            h1,
            u0: fn_at(opt_expr(&self.u0, geo, "data.u0")?, "data.u0")?,
            exact: None,
        })
    }
}

impl SpecFile {
    /// The problem on `cells` cells per axis.
    pub fn build(&self) -> Result<ProblemSpec> {
        let geometry = self.geometry.build()?;
        if self.geometry.cells < 2 {
            return Err(Error::schema("geometry.cells", "need at least 2 cells per axis"));
        }
        let coeffs = self.coefficients.build(&geometry)?;
        let data = self.data.build(&geometry, &coeffs)?;
        self.time.validate().map_err(at("time"))?;
        for (k, n) in self.norms.iter().enumerate() {
            n.validate().map_err(|e| Error::schema(format!("norms[{k}]"), e.to_string()))?;
        }
        Ok(ProblemSpec {
            resolution: vec![self.geometry.cells + 1; geometry.dim()],
            geometry,
            coeffs,
            data,
            time: self.time,
            norms: self.norms.clone(),
            mode: self.mode,
            waive_compatibility: self.waive_compatibility,
        })
    }
}

/// Command-line overrides of a spec.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Overrides {
    /// Cells per axis; more than one value gives a refinement run.
    pub grid: Option<Vec<usize>>,
    pub dt: Option<f64>,
    /// Number of time levels, each halving `dt`.
    pub dt_levels: Option<usize>,
    pub alpha: Option<f64>,
    pub lambda: Option<f64>,
    pub p: Option<f64>,
    pub theta: Option<f64>,
    pub mode: Option<Mode>,
    pub t_min: Option<f64>,
    pub seed: Option<u64>,
}

fn steps_for(t_end: f64, dt: f64, path: &str) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::schema(path, format!("time step {dt} must be positive")));
    }
    let steps = (t_end / dt).round();
    if steps < 1.0 || ((steps * dt - t_end).abs() > 1e-9 * t_end) {
        return Err(Error::schema(path, format!("time step {dt} does not divide T = {t_end}")));
    }
    Ok(steps as usize)
}

impl Overrides {
    /// Applies every scalar override; `grid` and `dt_levels` are handled by
    /// the run plan.
    pub fn apply(&self, spec: &SpecFile) -> Result<SpecFile> {
        let mut s = spec.clone();
        let kind = s.geometry.kind;
        if let Some(a) = self.alpha {
            if matches!(kind, GeometryKind::EuclideanBox | GeometryKind::PoincareBall) {
                return Err(Error::schema("--alpha", format!("geometry kind {} has no alpha", kind.name())));
            }
            s.geometry.alpha = Some(a);
        }
        if let Some(t) = self.t_min {
            if !matches!(kind, GeometryKind::Cusp | GeometryKind::Wedge) {
                return Err(Error::schema("--t-min", format!("geometry kind {} has no t_min", kind.name())));
            }
            s.geometry.t_min = Some(t);
        }
        if self.lambda.is_some() || self.p.is_some() {
            if s.norms.is_empty() {
                s.norms.push(NormSpec::new(2.0, 2, 0.0));
            }
            for n in &mut s.norms {
                n.lambda = self.lambda.unwrap_or(n.lambda);
                n.p = self.p.unwrap_or(n.p);
            }
        }
        if let Some(t) = self.theta {
            s.time.theta = t;
        }
        if let Some(m) = self.mode {
            s.mode = m;
        }
        if let Some(dt) = self.dt {
            s.time.steps = steps_for(s.time.t_end, dt, "--dt")?;
        }
        if let Some(g) = &self.grid {
            if g.len() == 1 {
                s.geometry.cells = g[0];
            }
        }
        s.time.validate().map_err(at("--theta"))?;
        Ok(s)
    }

    /// `(cells, steps)` per level.
    pub fn levels(&self, spec: &SpecFile) -> Result<Vec<(usize, usize)>> {
        let grid = self.grid.clone().unwrap_or_else(|| vec![spec.geometry.cells]);
        if grid.is_empty() {
            return Err(Error::schema("--grid", "empty level list"));
        }
        let nt = self.dt_levels.unwrap_or(1);
        if nt == 0 {
            return Err(Error::schema("--dt-levels", "must be at least 1"));
        }
        let count = grid.len().max(nt);
        if grid.len() != 1 && nt != 1 && grid.len() != nt {
            return Err(Error::schema(
                "--dt-levels",
                format!("{nt} time levels cannot pair with {} grid levels", grid.len()),
            ));
        }
        Ok((0..count)
            .map(|i| {
                let cells = if grid.len() == 1 { grid[0] } else { grid[i] };
                let steps = if nt == 1 { spec.time.steps } else { spec.time.steps << i };
                (cells, steps)
            })
            .collect())
    }
}

fn with_level(spec: &SpecFile, cells: usize, steps: usize) -> SpecFile {
    let mut s = spec.clone();
    s.geometry.cells = cells;
    s.time.steps = steps;
    s
}

/// Worker pool sized by [`THREADS_ENV`] when set.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .map_err(|_| Error::schema(THREADS_ENV, format!("expected a thread count, got `{v}`")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn formulations(mode: Mode) -> &'static [Mode] {
    match mode {
        Mode::Both => &[Mode::Direct, Mode::Desingularized],
        Mode::Direct => &[Mode::Direct],
        Mode::Desingularized => &[Mode::Desingularized],
    }
}

fn rows_for(problem: &ProblemSpec, r: &SolveResult) -> Vec<RunRow> {
    let norm = problem.primary_norm();
    formulations(problem.mode)
        .iter()
        .map(|&mode| {
            let e = match mode {
                Mode::Desingularized => r.hat_errors.or(r.errors),
                _ => r.errors,
            };
            RunRow {
                geometry: problem.geometry.name(),
                alpha: problem.geometry.manifold.param("alpha"),
                lambda: Some(norm.lambda),
                p: Some(norm.p),
                h: r.grid.h_max(),
                dt: problem.time.dt(),
                theta: problem.time.theta,
                mode: mode.name().to_string(),
                err_inf: e.map(|e| e.err_inf),
                err_l2: e.map(|e| e.err_l2),
                wall_ms: Some(r.wall_ms),
                ..Default::default()
            }
        })
        .collect()
}

/// Solves `spec` at every level of `ov`, concurrently, and reports measured
/// orders when the spec carries an exact solution.
pub fn run_spec(name: &str, spec: &SpecFile, ov: &Overrides) -> Result<Outcome> {
    let spec = ov.apply(spec)?;
    let levels = ov.levels(&spec)?;
    let problems = levels
        .iter()
        .map(|&(c, s)| with_level(&spec, c, s).build())
        .collect::<Result<Vec<_>>>()?;
    let pool = thread_pool()?;
    let results: Vec<Result<SolveResult>> = pool.install(|| problems.par_iter().map(solve_ibvp).collect());
    let mut out = Outcome::new(name, ov.seed.unwrap_or(0));
    let mut solved = vec![];
    for (p, r) in problems.iter().zip(results) {
        let r = r?;
        for row in rows_for(p, &r) {
            out.push_run(row);
        }
        solved.push(r);
    }
    if levels.len() < 2 || spec.data.exact.is_none() {
        return Ok(out);
    }
    let space = levels.windows(2).any(|w| w[0].0 != w[1].0);
    let mut table = Table::new("convergence", &["mode", "cells", "h", "dt", "err_inf", "err_l2", "order"]);
    for &mode in formulations(spec.mode) {
        let (mut hs, mut errs) = (vec![], vec![]);
        for (i, (r, p)) in solved.iter().zip(&problems).enumerate() {
            let e = match mode {
                Mode::Desingularized => r.hat_errors.or(r.errors),
                _ => r.errors,
            }
            .ok_or_else(|| Error::Config("exact solution present but no error recorded".into()))?;
            let h = if space { r.grid.h_max() } else { p.time.dt() };
            let order = if i == 0 {
                String::new()
            } else {
                format!("{:.6}", fit_order(&[hs[i - 1], h], &[errs[i - 1], e.err_inf]))
            };
            table.rows.push(vec![
                mode.name().to_string(),
                levels[i].0.to_string(),
                format!("{:.12e}", r.grid.h_max()),
                format!("{:.12e}", p.time.dt()),
                format!("{:.12e}", e.err_inf),
                format!("{:.12e}", e.err_l2),
                order,
            ]);
            hs.push(h);
            errs.push(e.err_inf);
        }
        if let Some(min) = spec.study.min_order {
            let var = if space { "space" } else { "time" };
            out.push(Invariant::order(
                format!("run.{var}_order.{}", mode.name()),
                &Refinement::new(hs, errs),
                min,
                crate::experiments::EXACT_TOL,
            ));
        }
    }
    out.tables.push(table);
    Ok(out)
}

/// Sweep axes and their values.
pub const SWEEP_AXES: [&str; 6] = ["alpha", "lambda", "p", "h", "dt", "t_min"];

/// Parses `name=v1,v2,…`.
pub fn parse_axis(s: &str) -> Result<(String, Vec<f64>)> {
    let (name, vals) = s
        .split_once('=')
        .ok_or_else(|| Error::schema("--axes", format!("expected name=v1,v2,…, got `{s}`")))?;
    let name = name.trim().replace('-', "_");
    if !SWEEP_AXES.contains(&name.as_str()) {
        return Err(Error::schema(
            "--axes",
            format!("unknown axis `{name}`, expected one of {}", SWEEP_AXES.join(", ")),
        ));
    }
    let values = vals
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::schema(format!("--axes {name}"), format!("`{v}` is not a number")))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(Error::schema(format!("--axes {name}"), "no values"));
    }
    if name == "h" && values.iter().any(|v| v.fract() != 0.0 || *v < 2.0) {
        return Err(Error::schema("--axes h", "cell counts must be integers ≥ 2"));
    }
    Ok((name, values))
}

fn point_overrides(base: &Overrides, point: &[(String, f64)]) -> Overrides {
    let mut o = base.clone();
    for (name, v) in point {
        match name.as_str() {
            "alpha" => o.alpha = Some(*v),
            "lambda" => o.lambda = Some(*v),
            "p" => o.p = Some(*v),
            "h" => o.grid = Some(vec![*v as usize]),
            "dt" => o.dt = Some(*v),
            "t_min" => o.t_min = Some(*v),
            _ => unreachable!("axis names are validated"),
        }
    }
    o
}

fn label(point: &[(String, f64)]) -> String {
    point.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(",")
}

/// Diagnostics attached to one sweep point.
fn sweep_point(spec: &SpecFile, ov: &Overrides, seed: u64) -> Result<Vec<RunRow>> {
    let s = ov.apply(spec)?;
    let problem = s.build()?;
    let r = solve_ibvp(&problem)?;
    let mut rows = rows_for(&problem, &r);
    let homogeneous = problem.data.is_homogeneous_boundary();
    if homogeneous && !problem.norms.is_empty() {
        let ratio = maximal_regularity_ratio(&r, &problem)?;
        for row in &mut rows {
            row.maxreg_ratio = Some(ratio);
        }
    }
    if homogeneous && problem.coeffs.is_autonomous() && problem.data.f.expr().is_zero() {
        let rep = semigroup_check(&problem, 3, 4, seed)?;
        for row in &mut rows {
            row.semigroup_bound = Some(rep.smoothing_bound);
        }
    }
    Ok(rows)
}

/// Cartesian product of the axes (first axis outermost), run concurrently.
/// Failed points are reported as failing invariants; the other rows are kept.
pub fn sweep_spec(name: &str, spec: &SpecFile, ov: &Overrides, axes: &[(String, Vec<f64>)]) -> Result<Outcome> {
    if axes.is_empty() {
        return Err(Error::schema("--axes", "at least one axis is required"));
    }
    for (i, (a, _)) in axes.iter().enumerate() {
        if axes[..i].iter().any(|(b, _)| a == b) {
            return Err(Error::schema("--axes", format!("axis `{a}` given twice")));
        }
    }
    let mut points: Vec<Vec<(String, f64)>> = vec![vec![]];
    for (name, values) in axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push((name.clone(), *v));
                    q
                })
            })
            .collect();
    }
    // schema problems surface before any solve
    for p in &points {
        point_overrides(ov, p).apply(spec)?.build()?;
    }
    let seed = ov.seed.unwrap_or(0);
    let pool = thread_pool()?;
    let results: Vec<Result<Vec<RunRow>>> =
        pool.install(|| points.par_iter().map(|p| sweep_point(spec, &point_overrides(ov, p), seed)).collect());

    let mut out = Outcome::new(name, seed);
    let mut groups: BTreeMap<String, Vec<(f64, f64, f64, Option<f64>, Option<f64>)>> = BTreeMap::new();
    let mut group_order = vec![];
    for (p, r) in points.iter().zip(results) {
        let rows = match r {
            Ok(rows) => rows,
            Err(e) => {
                out.push(Invariant {
                    id: format!("sweep.point.{}", label(p)),
                    pass: false,
                    value: f64::NAN,
                    threshold: f64::NAN,
                    detail: e.to_string(),
                });
                continue;
            }
        };
        let fixed: Vec<(String, f64)> = p.iter().filter(|(k, _)| !matches!(k.as_str(), "h" | "dt" | "t_min")).cloned().collect();
        let key = label(&fixed);
        if !groups.contains_key(&key) {
            group_order.push(key.clone());
        }
        let t_min = p.iter().find(|(k, _)| k == "t_min").map(|(_, v)| *v).unwrap_or(f64::NAN);
        let first = &rows[0];
        groups
            .entry(key)
            .or_default()
            .push((first.h, first.dt, t_min, first.err_inf, first.maxreg_ratio));
        for row in rows {
            out.push_run(row);
        }
    }

    let mut verdicts = Table::new("verdicts", &["group", "runs", "maxreg_spread", "order", "t_min_slope"]);
    for key in group_order {
        let runs = &groups[&key];
        let ratios: Vec<f64> = runs.iter().filter_map(|r| r.4).collect();
        let spread = if ratios.len() >= 2 && ratios.len() == runs.len() {
            let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
            Some(hi / lo)
        } else {
            None
        };
        if let (Some(s), Some(bound)) = (spread, spec.study.maxreg_spread) {
            out.push(Invariant::at_most(
                format!("sweep.maxreg_stable.{}", if key.is_empty() { "all" } else { &key }),
                s,
                bound,
                format!("ratios {ratios:?}"),
            ));
        }
        let errs: Vec<f64> = runs.iter().filter_map(|r| r.3).collect();
        let complete = errs.len() == runs.len() && errs.len() >= 2 && errs.iter().all(|e| *e > 0.0);
        let varies = |f: fn(&(f64, f64, f64, Option<f64>, Option<f64>)) -> f64| {
            runs.windows(2).any(|w| f(&w[0]) != f(&w[1]))
        };
        let order = if complete && varies(|r| r.0) && !varies(|r| r.2) {
            Some(fit_order(&runs.iter().map(|r| r.0).collect::<Vec<_>>(), &errs))
        } else if complete && varies(|r| r.1) && !varies(|r| r.2) {
            Some(fit_order(&runs.iter().map(|r| r.1).collect::<Vec<_>>(), &errs))
        } else {
            None
        };
        let slope = if complete && varies(|r| r.2) && !varies(|r| r.0) && !varies(|r| r.1) {
            Some(fit_order(&runs.iter().map(|r| r.2).collect::<Vec<_>>(), &errs))
        } else {
            None
        };
        let cell = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        verdicts
            .rows
            .push(vec![key.clone(), runs.len().to_string(), cell(spread), cell(order), cell(slope)]);
    }
    out.tables.push(verdicts);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CUSP: &str = r#"
mode = "both"

[geometry]
kind = "cusp"
alpha = 2.0
t_min = 0.1
cells = 32

[coefficients]
a = "rho^2"

[data]
exact = "exp(-t)*x^2*(1-x)"

[time]
T = 0.5
steps = 50
theta = 0.5

[[norms]]
p = 2.0
k = 2
lambda = 0.0
"#;

    #[test]
    fn cusp_spec_matches_the_study_builder() {
        let spec = parse_spec(CUSP).unwrap().build().unwrap();
        let reference = crate::study::cusp_manufactured(2.0, 0.1, 33, TimeSpec::new(0.5, 50, 0.5), Mode::Both).unwrap();
        for x in [0.2, 0.55, 0.9] {
            for t in [0.0, 0.3] {
                assert_eq!(spec.data.f.eval(&[x], t), reference.data.f.eval(&[x], t));
                assert_eq!(spec.coeffs.a_at(&[x], t), reference.coeffs.a_at(&[x], t));
            }
        }
        assert_eq!(spec.resolution, vec![33]);
    }

    #[test]
    fn unknown_key_reports_its_path() {
        let text = CUSP.replace("cells = 32", "cells = 32\nwidth = 3");
        match parse_spec(&text) {
            Err(Error::Schema { path, .. }) => assert_eq!(path, "geometry.width"),
            other => panic!("expected a schema error, got {other:?}"),
        }
        let text = CUSP.replace("steps = 50", "steps = -1");
        match parse_spec(&text) {
            Err(Error::Schema { path, .. }) => assert_eq!(path, "time.steps"),
            other => panic!("expected a schema error, got {other:?}"),
        }
    }

    #[test]
    fn bad_expression_reports_its_path() {
        let text = CUSP.replace("a = \"rho^2\"", "a = \"rho^2 + z\"");
        match parse_spec(&text).unwrap().build() {
            Err(Error::Schema { path, .. }) => assert_eq!(path, "coefficients.a"),
            other => panic!("expected a schema error, got {other:?}"),
        }
    }

    #[test]
    fn levels_pair_space_and_time() {
        let spec = parse_spec(CUSP).unwrap();
        let ov = Overrides {
            grid: Some(vec![16, 32, 64]),
            dt_levels: Some(3),
            ..Default::default()
        };
        assert_eq!(ov.levels(&spec).unwrap(), vec![(16, 50), (32, 100), (64, 200)]);
        let bad = Overrides {
            grid: Some(vec![16, 32]),
            dt_levels: Some(3),
            ..Default::default()
        };
        assert!(matches!(bad.levels(&spec), Err(Error::Schema { .. })));
    }

    #[test]
    fn dt_override_must_divide_the_horizon() {
        let spec = parse_spec(CUSP).unwrap();
        let ok = Overrides { dt: Some(0.05), ..Default::default() }.apply(&spec).unwrap();
        assert_eq!(ok.time.steps, 10);
        assert!(Overrides { dt: Some(0.3), ..Default::default() }.apply(&spec).is_err());
    }

    #[test]
    fn sweep_counts_the_product() {
        let text = CUSP.replace("cells = 32", "cells = 16").replace("steps = 50", "steps = 10");
        let spec = parse_spec(&text).unwrap();
        let axes = vec![parse_axis("alpha=1,2").unwrap(), parse_axis("lambda=0,1").unwrap()];
        let out = sweep_spec("s", &spec, &Overrides::default(), &axes).unwrap();
        // mode both gives two rows per point
        assert_eq!(out.runs.len(), 8);
        assert!(out.pass());
    }
}

//! Machine-readable experiment output: per-run CSV rows, refinement tables
//! and the PASS/FAIL summary.
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::study::fit_order;

/// One named, asserted property and the value it was judged on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Invariant {
    pub id: String,
    pub pass: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Invariant {
    pub fn at_most(id: impl Into<String>, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Invariant {
            id: id.into(),
            pass: value <= threshold,
            value,
            threshold,
            detail: detail.into(),
        }
    }

    pub fn at_least(id: impl Into<String>, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Invariant {
            id: id.into(),
            pass: value >= threshold,
            value,
            threshold,
            detail: detail.into(),
        }
    }

    /// Passes when every residual of the study is at rounding level or the
    /// measured order reaches `min_order`.
    pub fn order(id: impl Into<String>, study: &Refinement, min_order: f64, exact_tol: f64) -> Self {
        let exact = study.is_exact(exact_tol);
        Invariant {
            id: id.into(),
            pass: exact || study.order >= min_order,
            value: study.order,
            threshold: min_order,
            detail: format!(
                "residuals {} (h {}){}",
                fmt_list(&study.residual),
                fmt_list(&study.h),
                if exact { ", exact to rounding" } else { "" }
            ),
        }
    }
}

fn fmt_list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

/// Residuals of a refinement study and the least-squares order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Refinement {
    pub h: Vec<f64>,
    pub residual: Vec<f64>,
    pub order: f64,
}

impl Refinement {
    pub fn new(h: Vec<f64>, residual: Vec<f64>) -> Self {
        let order = if residual.iter().all(|r| *r > 0.0) { fit_order(&h, &residual) } else { f64::NAN };
        Refinement { h, residual, order }
    }

    pub fn is_exact(&self, tol: f64) -> bool {
        self.residual.iter().all(|r| *r <= tol)
    }

    pub fn is_decreasing(&self) -> bool {
        self.residual.windows(2).all(|w| w[1] < w[0])
    }
}

/// One solver run, as a row of the per-run CSV.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct RunRow {
    pub run_id: usize,
    pub geometry: String,
    pub alpha: Option<f64>,
    pub lambda: Option<f64>,
    pub p: Option<f64>,
    pub h: f64,
    pub dt: f64,
    pub theta: f64,
    pub mode: String,
    pub err_inf: Option<f64>,
    pub err_l2: Option<f64>,
    pub maxreg_ratio: Option<f64>,
    pub semigroup_bound: Option<f64>,
    pub wall_ms: Option<f64>,
}

pub const RUN_COLUMNS: [&str; 14] = [
    "run_id",
    "geometry",
    "alpha",
    "lambda",
    "p",
    "h",
    "dt",
    "theta",
    "mode",
    "err_inf",
    "err_l2",
    "maxreg_ratio",
    "semigroup_bound",
    "wall_ms",
];

fn num(v: f64) -> String {
    format!("{v:.12e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Free-form table (refinement columns, sweep verdicts).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: &[&str]) -> Self {
        Table {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: vec![],
        }
    }

    pub fn push_numbers(&mut self, label: &str, values: &[f64]) {
        let mut row = vec![label.to_string()];
        row.extend(values.iter().map(|v| num(*v)));
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        write_csv(&self.header, self.rows.iter().cloned())
    }
}

fn write_csv<I: Iterator<Item = Vec<String>>>(header: &[String], rows: I) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(vec![]);
    let io = |e: csv::Error| Error::Config(format!("csv: {e}"));
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Config(format!("csv: {e}")))
}

/// Everything an experiment produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub experiment: String,
    pub seed: u64,
    pub invariants: Vec<Invariant>,
    #[serde(skip)]
    pub runs: Vec<RunRow>,
    #[serde(skip)]
    pub tables: Vec<Table>,
}

#[derive(Serialize)]
struct Summary<'a> {
    experiment: &'a str,
    seed: u64,
    pass: bool,
    invariants: &'a [Invariant],
}

impl Outcome {
    pub fn new(experiment: impl Into<String>, seed: u64) -> Self {
        Outcome {
            experiment: experiment.into(),
            seed,
            invariants: vec![],
            runs: vec![],
            tables: vec![],
        }
    }

    pub fn pass(&self) -> bool {
        self.invariants.iter().all(|i| i.pass)
    }

    pub fn failures(&self) -> Vec<&Invariant> {
        self.invariants.iter().filter(|i| !i.pass).collect()
    }

    pub fn push(&mut self, inv: Invariant) {
        self.invariants.push(inv);
    }

    /// Appends a run, numbering it after the existing ones.
    pub fn push_run(&mut self, mut row: RunRow) {
        row.run_id = self.runs.len();
        self.runs.push(row);
    }

    /// Per-run CSV; `wall_ms` stays blank unless `timings` is set.
    pub fn runs_csv(&self, timings: bool) -> Result<String> {
        let header: Vec<String> = RUN_COLUMNS.iter().map(|s| s.to_string()).collect();
        write_csv(
            &header,
            self.runs.iter().map(|r| {
                vec![
                    r.run_id.to_string(),
                    r.geometry.clone(),
                    opt(r.alpha),
                    opt(r.lambda),
                    opt(r.p),
                    num(r.h),
                    num(r.dt),
                    num(r.theta),
                    r.mode.clone(),
                    opt(r.err_inf),
                    opt(r.err_l2),
                    opt(r.maxreg_ratio),
                    opt(r.semigroup_bound),
                    if timings { opt(r.wall_ms) } else { String::new() },
                ]
            }),
        )
    }

    pub fn summary_json(&self) -> Result<String> {
        let s = Summary {
            experiment: &self.experiment,
            seed: self.seed,
            pass: self.pass(),
            invariants: &self.invariants,
        };
        serde_json::to_string_pretty(&s).map_err(|e| Error::Config(format!("json: {e}")))
    }

    /// One line per invariant, for terminal output.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for i in &self.invariants {
            let _ = writeln!(
                s,
                "{} {} value={:.6e} threshold={:.6e} {}",
                if i.pass { "PASS" } else { "FAIL" },
                i.id,
                i.value,
                i.threshold,
                i.detail
            );
        }
        let _ = writeln!(s, "{}: {}", self.experiment, if self.pass() { "PASS" } else { "FAIL" });
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_leaves_missing_values_blank() {
        let mut o = Outcome::new("x", 1);
        o.push_run(RunRow {
            geometry: "cusp(alpha=1,point_pair)".into(),
            h: 0.5,
            dt: 0.1,
            theta: 1.0,
            mode: "direct".into(),
            err_inf: Some(1e-3),
            wall_ms: Some(3.0),
            ..Default::default()
        });
        let csv = o.runs_csv(false).unwrap();
        let line = csv.lines().nth(1).unwrap();
        assert_eq!(
            line,
            "0,\"cusp(alpha=1,point_pair)\",,,,5.000000000000e-1,1.000000000000e-1,1.000000000000e0,direct,1.000000000000e-3,,,,"
        );
        assert!(o.runs_csv(true).unwrap().contains("3.000000000000e0"));
    }

    #[test]
    fn exact_refinement_passes_order_check() {
        let r = Refinement::new(vec![0.1, 0.05], vec![1e-15, 2e-15]);
        assert!(Invariant::order("t", &r, 1.8, 1e-10).pass);
        let r = Refinement::new(vec![0.1, 0.05], vec![1e-3, 5e-4]);
        assert!(!Invariant::order("t", &r, 1.8, 1e-10).pass);
    }

    #[test]
    fn summary_lists_invariants() {
        let mut o = Outcome::new("demo", 7);
        o.push(Invariant::at_most("a.b", 0.5, 1.0, ""));
        let j: serde_json::Value = serde_json::from_str(&o.summary_json().unwrap()).unwrap();
        assert_eq!(j["pass"], true);
        assert_eq!(j["invariants"][0]["id"], "a.b");
    }
}

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::ExprMetric;
use crate::linalg::{det, invert, BandMatrix};
use crate::operators::{desingularize, CoefficientSet, ProblemData, SpaceTimeFn};
use crate::tensor_chart::{ChartGrid, Face, FaceLabel, Side};

use super::ProblemSpec;

/// Role of one row of the discrete system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Interior,
    Dirichlet,
    Truncation,
    Flux(Face),
}

impl RowKind {
    pub fn is_interior(self) -> bool {
        self == RowKind::Interior
    }
}

/// Which of the two equivalent problems a discretization represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formulation {
    /// `(𝒜, ℬ)` on `(M, g)`.
    Direct,
    /// `(Â, B̂)` on `(M, ĝ)` with flux data `ρ⁻¹h₁`.
    Hat,
}

/// Right-hand side at one time: `f` on interior rows and the boundary data
/// (Dirichlet values, reference values or flux data) on boundary rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Load {
    pub time: f64,
    pub f: Vec<f64>,
    pub boundary: Vec<f64>,
}

/// Operator matrix `A_h` at one time: stencil rows of `𝒜` on interior points
/// and constraint rows of `ℬ` on the boundary.
#[derive(Debug, Clone)]
pub struct DiscreteSystem {
    grid: Arc<ChartGrid>,
    rows: Vec<RowKind>,
    op: BandMatrix,
    time: f64,
}

impl DiscreteSystem {
    pub fn grid(&self) -> &Arc<ChartGrid> {
        &self.grid
    }

    pub fn rows(&self) -> &[RowKind] {
        &self.rows
    }

    pub fn operator(&self) -> &BandMatrix {
        &self.op
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// `A_h u` on interior rows, zero on boundary rows.
    pub fn apply_interior(&self, u: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| if r.is_interior() { self.op.row(i).map(|(j, v)| v * u[j]).sum() } else { 0.0 })
            .collect()
    }

    /// Boundary rows applied to `u`, zero on interior rows.
    pub fn apply_boundary(&self, u: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| if r.is_interior() { 0.0 } else { self.op.row(i).map(|(j, v)| v * u[j]).sum() })
            .collect()
    }

    /// `I + θ·dt·A_h` on interior rows, boundary rows unchanged.
    pub fn system_matrix(&self, dt: f64, theta: f64) -> BandMatrix {
        let mut s = self.op.clone();
        for (i, r) in self.rows.iter().enumerate() {
            if r.is_interior() {
                s.scale_row(i, theta * dt);
                s.add(i, i, 1.0);
            }
        }
        s
    }
}

/// Everything needed to assemble the operator and the load at any time on a
/// fixed grid.
#[derive(Debug, Clone)]
pub struct Discretization {
    grid: Arc<ChartGrid>,
    formulation: Formulation,
    metric: ExprMetric,
    coeffs: CoefficientSet,
    data: ProblemData,
    reference: SpaceTimeFn,
    rows: Vec<RowKind>,
}

impl Discretization {
    pub fn new(problem: &ProblemSpec, formulation: Formulation) -> Result<Self> {
        let geo = &problem.geometry;
        let grid = geo.grid(&problem.resolution)?;
        let m = geo.dim();
        if problem.coeffs.dim() != m {
            return Err(Error::Shape(format!(
                "coefficients of dimension {} on a {m}-manifold",
                problem.coeffs.dim()
            )));
        }
        let (metric, coeffs, data) = match formulation {
            Formulation::Direct => (geo.manifold.metric.clone(), problem.coeffs.clone(), problem.data.clone()),
            Formulation::Hat => {
                let d = desingularize(&problem.coeffs, geo)?;
                let rho = geo.datum.rho.expr().clone();
                let mut data = problem.data.clone();
                data.h1 = data
                    .h1
                    .iter()
                    .map(|h| SpaceTimeFn::new(h.expr().clone() / rho.clone(), m))
                    .collect::<Result<_>>()?;
                (d.metric, d.coeffs, data)
            }
        };
        let reference = data.exact.clone().unwrap_or_else(|| data.h0.clone());
        let rows = classify_rows(&grid)?;
        Ok(Discretization {
            grid,
            formulation,
            metric,
            coeffs,
            data,
            reference,
            rows,
        })
    }

    pub fn grid(&self) -> &Arc<ChartGrid> {
        &self.grid
    }

    pub fn formulation(&self) -> Formulation {
        self.formulation
    }

    pub fn rows(&self) -> &[RowKind] {
        &self.rows
    }

    pub fn metric(&self) -> &ExprMetric {
        &self.metric
    }

    pub fn coeffs(&self) -> &CoefficientSet {
        &self.coeffs
    }

    pub fn data(&self) -> &ProblemData {
        &self.data
    }

    /// True when neither the operator nor the boundary rows change in time.
    pub fn is_autonomous(&self) -> bool {
        self.coeffs.is_autonomous()
    }

    pub fn initial(&self) -> Vec<f64> {
        (0..self.grid.npts()).map(|p| self.data.u0.eval(self.grid.point(p), 0.0)).collect()
    }

    pub fn load(&self, t: f64) -> Load {
        let g = &self.grid;
        let mut f = vec![0.0; g.npts()];
        let mut boundary = vec![0.0; g.npts()];
        for (p, kind) in self.rows.iter().enumerate() {
            let x = g.point(p);
            match *kind {
                RowKind::Interior => f[p] = self.data.f.eval(x, t),
                RowKind::Dirichlet => boundary[p] = self.data.h0.eval(x, t),
                RowKind::Truncation => boundary[p] = self.reference.eval(x, t),
                RowKind::Flux(face) => boundary[p] = self.data.h1_on(face).eval(x, t),
            }
        }
        Load { time: t, f, boundary }
    }

    /// Flux-differenced `A_h` at time `t`.
    pub fn assemble(&self, t: f64) -> Result<DiscreteSystem> {
        let g = &self.grid;
        let rows: Vec<Vec<(usize, f64)>> = (0..g.npts())
            .map(|p| match self.rows[p] {
                RowKind::Interior => self.interior_row(p, t),
                RowKind::Dirichlet | RowKind::Truncation => vec![(p, 1.0)],
                RowKind::Flux(face) => self.flux_row(p, face, t),
            })
            .collect();
        let mut band = 0usize;
        for (i, row) in rows.iter().enumerate() {
            for &(j, v) in row {
                if !v.is_finite() {
                    return Err(Error::Domain(format!(
                        "non-finite stencil entry in row {i} at {:?}",
                        g.point(i)
                    )));
                }
                band = band.max(i.abs_diff(j));
            }
        }
        let mut op = BandMatrix::zeros(g.npts(), band, band);
        for (i, row) in rows.into_iter().enumerate() {
            for (j, v) in row {
                op.add(i, j, v);
            }
        }
        Ok(DiscreteSystem {
            grid: g.clone(),
            rows: self.rows.clone(),
            op,
            time: t,
        })
    }

    /// `√G`, `G⁻¹` at an arbitrary chart point.
    fn metric_at(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let m = self.grid.dim();
        let gm = self.metric.g_at(x);
        let inv = invert(m, &gm).ok_or_else(|| Error::Domain(format!("metric singular at {x:?}")))?;
        Ok((det(m, &gm).sqrt(), inv))
    }

    /// `K^{ik} = √G a^i_j G^{jk}` at `x`.
    fn flux_tensor(&self, x: &[f64], t: f64) -> Vec<f64> {
        let m = self.grid.dim();
        let (sg, inv) = self.metric_at(x).unwrap_or((f64::NAN, vec![f64::NAN; m * m]));
        let a = self.coeffs.a_at(x, t);
        let mut k = vec![0.0; m * m];
        for i in 0..m {
            for l in 0..m {
                k[i * m + l] = sg * (0..m).map(|j| a[i * m + j] * inv[j * m + l]).sum::<f64>();
            }
        }
        k
    }

    fn interior_row(&self, p: usize, t: f64) -> Vec<(usize, f64)> {
        let g = &self.grid;
        let m = g.dim();
        let h = g.spacing();
        let x = g.point(p).to_vec();
        let sg_p = self.metric_at(&x).map(|(s, _)| s).unwrap_or(f64::NAN);
        let nb = |q: usize, axis: usize, off: isize| g.neighbor(q, axis, off).expect("interior stencil");
        let mut row = Vec::with_capacity(1 + 6 * m * m);
        for i in 0..m {
            for side in [1isize, -1] {
                let q = nb(p, i, side);
                let xh: Vec<f64> = x.iter().zip(g.point(q)).map(|(a, b)| 0.5 * (a + b)).collect();
                let kmat = self.flux_tensor(&xh, t);
                let coef = -(side as f64) / (sg_p * h[i]);
                let (lo, hi) = if side > 0 { (p, q) } else { (q, p) };
                let kii = kmat[i * m + i] / h[i];
                row.push((hi, coef * kii));
                row.push((lo, -coef * kii));
                for k in (0..m).filter(|&k| k != i) {
                    let c = coef * kmat[i * m + k] / (4.0 * h[k]);
                    for r in [p, q] {
                        row.push((nb(r, k, 1), c));
                        row.push((nb(r, k, -1), -c));
                    }
                }
            }
        }
        let drift = self.coeffs.a_vec_at(&x, t);
        for k in 0..m {
            let c = drift[k] / (2.0 * h[k]);
            row.push((nb(p, k, 1), c));
            row.push((nb(p, k, -1), -c));
        }
        row.push((p, self.coeffs.a0_at(&x, t)));
        merge(row)
    }

    /// `s·(a⨀G⁻¹du)^a / √(G^{aa}) + b₀u` with the derivative stencils of
    /// [`ChartGrid::partial`].
    fn flux_row(&self, p: usize, face: Face, t: f64) -> Vec<(usize, f64)> {
        let g = &self.grid;
        let m = g.dim();
        let x = g.point(p);
        let a_ax = face.axis;
        let (_, inv) = self.metric_at(x).unwrap_or((f64::NAN, vec![f64::NAN; m * m]));
        let a = self.coeffs.a_at(x, t);
        let scale = face.inward_sign() / inv[a_ax * m + a_ax].sqrt();
        let mut row = Vec::with_capacity(3 * m + 1);
        for k in 0..m {
            let ck: f64 = (0..m).map(|j| a[a_ax * m + j] * inv[j * m + k]).sum();
            push_partial(g, &mut row, p, k, scale * ck);
        }
        row.push((p, self.coeffs.b0_at(x, t)));
        merge(row)
    }
}

fn push_partial(g: &ChartGrid, row: &mut Vec<(usize, f64)>, p: usize, axis: usize, coef: f64) {
    let i = g.index_along(p, axis);
    let n = g.counts()[axis];
    let s = g.stride(axis);
    let c = coef * 0.5 / g.spacing()[axis];
    if i == 0 {
        row.extend([(p, -3.0 * c), (p + s, 4.0 * c), (p + 2 * s, -c)]);
    } else if i == n - 1 {
        row.extend([(p, 3.0 * c), (p - s, -4.0 * c), (p - 2 * s, c)]);
    } else {
        row.extend([(p + s, c), (p - s, -c)]);
    }
}

fn merge(mut row: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    row.sort_by_key(|e| e.0);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(row.len());
    for (j, v) in row {
        match out.last_mut() {
            Some(last) if last.0 == j => last.1 += v,
            _ => out.push((j, v)),
        }
    }
    out
}

fn classify_rows(grid: &ChartGrid) -> Result<Vec<RowKind>> {
    let faces = grid.faces();
    (0..grid.npts())
        .map(|p| {
            let on: Vec<Face> = faces.iter().copied().filter(|f| grid.on_face(p, *f)).collect();
            if on.is_empty() {
                return Ok(RowKind::Interior);
            }
            let has = |l: FaceLabel| on.iter().any(|f| grid.label(*f) == l);
            if has(FaceLabel::Dirichlet) {
                Ok(RowKind::Dirichlet)
            } else if has(FaceLabel::Truncation) {
                Ok(RowKind::Truncation)
            } else if let Some(f) = on.iter().find(|f| grid.label(**f) == FaceLabel::Flux) {
                Ok(RowKind::Flux(*f))
            } else {
                let f = on[0];
                Err(Error::Config(format!(
                    "face {} of axis {} has no boundary label",
                    if f.side == Side::Low { "low" } else { "high" },
                    f.axis
                )))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_euclidean_box;
    use crate::operators::{apply_a, CoefficientSet, ProblemData};
    use crate::solver::{Mode, TimeSpec};
    use crate::tensor_chart::TensorField;
    use crate::expr::Expr;

    fn heat_problem(geo: crate::geometry::Geometry, n: Vec<usize>) -> ProblemSpec {
        let m = geo.dim();
        ProblemSpec {
            coeffs: CoefficientSet::isotropic(m, Expr::num(1.0)).unwrap(),
            data: ProblemData::zero(m),
            geometry: geo,
            time: TimeSpec::new(0.1, 10, 1.0),
            norms: vec![],
            mode: Mode::Direct,
            resolution: n,
            waive_compatibility: false,
        }
    }

    #[test]
    fn one_dimensional_laplacian_stencil() {
        let geo = make_euclidean_box(1, &[0.0], &[1.0]).unwrap();
        let disc = Discretization::new(&heat_problem(geo, vec![5]), Formulation::Direct).unwrap();
        let sys = disc.assemble(0.0).unwrap();
        let a = sys.operator();
        let h2 = 0.25f64 * 0.25;
        for i in 1..4 {
            assert!((a.get(i, i - 1) + 1.0 / h2).abs() < 1e-12);
            assert!((a.get(i, i) - 2.0 / h2).abs() < 1e-12);
            assert!((a.get(i, i + 1) + 1.0 / h2).abs() < 1e-12);
        }
        assert_eq!(a.get(0, 0), 1.0);
        assert_eq!(a.get(0, 1), 0.0);
        assert_eq!(sys.rows()[4], RowKind::Dirichlet);
    }

    #[test]
    fn two_dimensional_laplacian_is_symmetric_five_point() {
        let geo = make_euclidean_box(2, &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let disc = Discretization::new(&heat_problem(geo, vec![6, 6]), Formulation::Direct).unwrap();
        let sys = disc.assemble(0.0).unwrap();
        let a = sys.operator();
        let g = disc.grid();
        for i in g.interior_points(1) {
            let nz = a.row(i).filter(|(_, v)| *v != 0.0).count();
            assert_eq!(nz, 5);
            for j in g.interior_points(1) {
                assert!((a.get(i, j) - a.get(j, i)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn linear_function_is_exact_on_flux_rows() {
        let geo = make_euclidean_box(1, &[0.0], &[1.0])
            .unwrap()
            .with_labels(&[[FaceLabel::Flux, FaceLabel::Dirichlet]])
            .unwrap();
        let mut prob = heat_problem(geo, vec![9]);
        prob.data.h1[0] = SpaceTimeFn::parse("3", 1).unwrap();
        let disc = Discretization::new(&prob, Formulation::Direct).unwrap();
        let sys = disc.assemble(0.0).unwrap();
        let u: Vec<f64> = (0..9).map(|p| disc.grid().point(p)[0]).collect();
        let load = disc.load(0.0);
        let bu = sys.apply_boundary(&u);
        assert_eq!(load.boundary[0] - bu[0], 2.0);
    }

    #[test]
    fn operator_matches_apply_a_to_second_order() {
        let geo = make_euclidean_box(2, &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let coeffs = CoefficientSet::new(
            2,
            vec![
                Expr::parse("1 + x*y").unwrap(),
                Expr::parse("0.2*x").unwrap(),
                Expr::parse("0.2*x").unwrap(),
                Expr::parse("2 + y").unwrap(),
            ],
            vec![Expr::parse("x").unwrap(), Expr::num(0.5)],
            Expr::num(1.0),
            Expr::num(0.0),
        )
        .unwrap();
        let mut errs = vec![];
        for n in [17usize, 33] {
            let mut prob = heat_problem(geo.clone(), vec![n, n]);
            prob.coeffs = coeffs.clone();
            let disc = Discretization::new(&prob, Formulation::Direct).unwrap();
            let sys = disc.assemble(0.0).unwrap();
            let g = disc.grid().clone();
            let u = TensorField::scalar_from_fn(&g, |x| (x[0] * 2.0).sin() * (1.0 + x[1] * x[1]));
            let ah = sys.apply_interior(u.data());
            let metric = geo.metric_field(g.clone()).unwrap();
            let exact = apply_a(&u, &coeffs.sample(&g, 0.0).unwrap(), &metric).unwrap();
            let e = g
                .interior_points(2)
                .into_iter()
                .map(|p| (ah[p] - exact.value(p)).abs())
                .fold(0.0, f64::max);
            errs.push(e);
        }
        assert!(errs[0] / errs[1] > 3.4, "{errs:?}");
    }
}

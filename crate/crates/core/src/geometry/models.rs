use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::tensor_chart::{ChartGrid, FaceLabel, MetricField};

use super::functions::{ExprMetric, ScalarFn};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    EuclideanBox,
    PoincareBall,
    Cusp,
    InfiniteCusp,
    Funnel,
    Wedge,
}

impl GeometryKind {
    pub fn name(self) -> &'static str {
        match self {
            GeometryKind::EuclideanBox => "euclidean_box",
            GeometryKind::PoincareBall => "poincare_ball",
            GeometryKind::Cusp => "cusp",
            GeometryKind::InfiniteCusp => "infinite_cusp",
            GeometryKind::Funnel => "funnel",
            GeometryKind::Wedge => "wedge",
        }
    }
}

/// Cross-section of a cusp or funnel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Base {
    /// Two points `{±1}`: a one-dimensional manifold.
    PointPair,
    /// The unit circle, charted by the angle.
    Circle,
}

/// A single-chart model manifold with boundary split.
#[derive(Debug, Clone)]
pub struct ManifoldSpec {
    pub kind: GeometryKind,
    pub base: Option<Base>,
    pub params: BTreeMap<String, f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub labels: Vec<[FaceLabel; 2]>,
    pub metric: ExprMetric,
}

impl ManifoldSpec {
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }

    pub fn grid(&self, n: &[usize]) -> Result<Arc<ChartGrid>> {
        Ok(Arc::new(ChartGrid::new(&self.lo, &self.hi, n)?.with_labels(&self.labels)?))
    }

    /// Center of the chart box.
    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }
}

/// Singularity function `ρ` with its chart reference value.
#[derive(Debug, Clone)]
pub struct SingularityDatum {
    pub rho: ScalarFn,
    /// `ρ` at the chart center.
    pub rho_kappa: f64,
}

impl SingularityDatum {
    pub fn new(rho: ScalarFn, center: &[f64]) -> Self {
        let rho_kappa = rho.value(center);
        SingularityDatum { rho, rho_kappa }
    }

    pub fn is_trivial(&self) -> bool {
        matches!(self.rho.expr(), Expr::Num(v) if *v == 1.0)
    }

    /// Values and gradients (point-major) of `ρ` on a grid; rejects `ρ ≤ 0`.
    pub fn samples(&self, grid: &ChartGrid) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut vals = Vec::with_capacity(grid.npts());
        let mut grads = Vec::with_capacity(grid.npts() * grid.dim());
        for p in 0..grid.npts() {
            let x = grid.point(p);
            let v = self.rho.value(x);
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!("singularity function ρ = {v} at point {p} {x:?}")));
            }
            vals.push(v);
            grads.extend(self.rho.grad(x));
        }
        Ok((vals, grads))
    }
}

/// A model manifold together with its singularity datum.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub manifold: ManifoldSpec,
    pub datum: SingularityDatum,
}

impl Geometry {
    pub fn dim(&self) -> usize {
        self.manifold.dim()
    }

    /// Short identifier such as `cusp(alpha=2,point_pair)`.
    pub fn name(&self) -> String {
        let mut parts: Vec<String> = self
            .manifold
            .params
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        if let Some(b) = self.manifold.base {
            parts.push(match b {
                Base::PointPair => "point_pair".into(),
                Base::Circle => "circle".into(),
            });
        }
        format!("{}({})", self.manifold.kind.name(), parts.join(","))
    }

    pub fn grid(&self, n: &[usize]) -> Result<Arc<ChartGrid>> {
        self.manifold.grid(n)
    }

    pub fn with_labels(mut self, labels: &[[FaceLabel; 2]]) -> Result<Self> {
        if labels.len() != self.dim() {
            return Err(Error::Shape(format!("{} label pairs for dimension {}", labels.len(), self.dim())));
        }
        self.manifold.labels = labels.to_vec();
        Ok(self)
    }

    pub fn with_extent(mut self, axis: usize, lo: f64, hi: f64) -> Result<Self> {
        if axis >= self.dim() || !(hi > lo) {
            return Err(Error::Domain(format!("bad extent [{lo}, {hi}] on axis {axis}")));
        }
        self.manifold.lo[axis] = lo;
        self.manifold.hi[axis] = hi;
        let c = self.manifold.center();
        self.datum.rho_kappa = self.datum.rho.value(&c);
        Ok(self)
    }

    pub fn metric_field(&self, grid: Arc<ChartGrid>) -> Result<MetricField> {
        MetricField::from_source(grid, &self.manifold.metric)
    }

    /// `ĝ = g/ρ²` in closed form.
    pub fn hat_metric(&self) -> Result<ExprMetric> {
        self.manifold.metric.conformal(self.datum.rho.expr())
    }

    pub fn hat_metric_field(&self, grid: Arc<ChartGrid>) -> Result<MetricField> {
        self.datum.samples(&grid)?;
        MetricField::from_source(grid, &self.hat_metric()?)
    }
}

/// Conformal rescaling `ĝ = g/ρ²` of a sampled metric.
pub fn conformal_metric(g: &MetricField, datum: &SingularityDatum) -> Result<MetricField> {
    let (vals, grads) = datum.samples(g.grid())?;
    g.rescaled(&vals, &grads)
}

fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn parse_bound(src: &str, consts: &BTreeMap<String, f64>) -> Result<Expr> {
    Ok(Expr::parse(src)?.bind_constants(consts))
}

/// Flat box `[lo, hi] ⊂ ℝ^m` with `ρ ≡ 1`; every face Dirichlet.
pub fn make_euclidean_box(m: usize, lo: &[f64], hi: &[f64]) -> Result<Geometry> {
    if !(1..=2).contains(&m) || lo.len() != m || hi.len() != m {
        return Err(Error::Domain(format!("euclidean box needs m ∈ {{1,2}} with matching extents, got m={m}")));
    }
    ChartGrid::new(lo, hi, &vec![3; m])?;
    let manifold = ManifoldSpec {
        kind: GeometryKind::EuclideanBox,
        base: None,
        params: BTreeMap::new(),
        lo: lo.to_vec(),
        hi: hi.to_vec(),
        labels: vec![[FaceLabel::Dirichlet; 2]; m],
        metric: ExprMetric::euclidean(m),
    };
    let datum = SingularityDatum::new(ScalarFn::constant(1.0, m), &manifold.center());
    Ok(Geometry { manifold, datum })
}

/// Euclidean annulus `r0 ≤ |x| ≤ r1` inside the unit ball with
/// `ρ = (1 − |x|²)/2`. For `m = 1` the chart is the interval `[r0, r1]`; for
/// `m = 2` it is the polar sector `(r, θ) ∈ [r0, r1] × [0, π/2]` with θ-faces
/// treated as chart truncations.
pub fn make_poincare_ball(m: usize, r0: f64, r1: f64) -> Result<Geometry> {
    if !(0.0 < r0 && r0 < r1) {
        return Err(Error::Domain(format!("annulus needs 0 < r0 < r1, got [{r0}, {r1}]")));
    }
    if r1 >= 1.0 {
        return Err(Error::Domain(format!(
            "annulus radius r1 = {r1} reaches the ideal boundary |x| = 1"
        )));
    }
    let (lo, hi, metric, labels) = match m {
        1 => (
            vec![r0],
            vec![r1],
            ExprMetric::euclidean(1),
            vec![[FaceLabel::Dirichlet; 2]],
        ),
        2 => (
            vec![r0, 0.0],
            vec![r1, FRAC_PI_2],
            ExprMetric::diagonal(vec![Expr::num(1.0), Expr::parse("x^2")?])?,
            vec![[FaceLabel::Dirichlet; 2], [FaceLabel::Truncation; 2]],
        ),
        _ => return Err(Error::Domain(format!("poincare ball supports m ∈ {{1,2}}, got {m}"))),
    };
    let rho = ScalarFn::parse("(1 - x^2)/2", m)?;
    let manifold = ManifoldSpec {
        kind: GeometryKind::PoincareBall,
        base: None,
        params: params(&[("r0", r0), ("r1", r1)]),
        lo,
        hi,
        labels,
        metric,
    };
    let datum = SingularityDatum::new(rho, &manifold.center());
    Ok(Geometry { manifold, datum })
}

/// Cartesian chart `[−s, s]^m` of the unit ball (containing the origin) with
/// `ρ = (1 − |x|²)/2`.
pub fn make_poincare_box(m: usize, half_width: f64) -> Result<Geometry> {
    if !(half_width > 0.0) || half_width * (m as f64).sqrt() >= 1.0 {
        return Err(Error::Domain(format!(
            "box of half width {half_width} does not fit inside the unit ball"
        )));
    }
    let rho = match m {
        1 => ScalarFn::parse("(1 - x^2)/2", 1)?,
        2 => ScalarFn::parse("(1 - x^2 - y^2)/2", 2)?,
        _ => return Err(Error::Domain(format!("poincare box supports m ∈ {{1,2}}, got {m}"))),
    };
    let manifold = ManifoldSpec {
        kind: GeometryKind::PoincareBall,
        base: None,
        params: params(&[("half_width", half_width)]),
        lo: vec![-half_width; m],
        hi: vec![half_width; m],
        labels: vec![[FaceLabel::Dirichlet; 2]; m],
        metric: ExprMetric::euclidean(m),
    };
    let datum = SingularityDatum::new(rho, &manifold.center());
    Ok(Geometry { manifold, datum })
}

/// Metric induced by the embedding `(x, x^α y)`, `y` in the base.
fn embedded_metric(alpha: f64, base: Base) -> Result<ExprMetric> {
    let c = params(&[("alpha", alpha)]);
    let gxx = parse_bound("1 + alpha^2 * x^(2*alpha - 2)", &c)?;
    match base {
        Base::PointPair => ExprMetric::diagonal(vec![gxx]),
        Base::Circle => ExprMetric::diagonal(vec![gxx, parse_bound("x^(2*alpha)", &c)?]),
    }
}

fn tube(
    kind: GeometryKind,
    alpha: f64,
    base: Base,
    x_range: (f64, f64),
    x_labels: [FaceLabel; 2],
    rho: ScalarFn,
    extra: &[(&str, f64)],
) -> Result<Geometry> {
    let metric = embedded_metric(alpha, base)?;
    let (mut lo, mut hi, mut labels) = (vec![x_range.0], vec![x_range.1], vec![x_labels]);
    if base == Base::Circle {
        lo.push(0.0);
        hi.push(FRAC_PI_2);
        labels.push([FaceLabel::Truncation; 2]);
    }
    ChartGrid::new(&lo, &hi, &vec![3; lo.len()])?;
    let mut ps = vec![("alpha", alpha)];
    ps.extend_from_slice(extra);
    let manifold = ManifoldSpec {
        kind,
        base: Some(base),
        params: params(&ps),
        lo,
        hi,
        labels,
        metric,
    };
    let datum = SingularityDatum::new(rho, &manifold.center());
    Ok(Geometry { manifold, datum })
}

/// Model `α`-cusp over the base on `x ∈ [t_min, t_max] ⊂ (0, 1]`, `ρ = x^α`.
/// The face `x = t_min` is a truncation of the singular end.
pub fn make_cusp(alpha: f64, base: Base, t_min: f64, t_max: f64) -> Result<Geometry> {
    if !(alpha >= 1.0) {
        return Err(Error::Domain(format!("cusp needs alpha ≥ 1, got {alpha}")));
    }
    if !(t_min > 0.0) || !(t_max > t_min) || t_max > 1.0 {
        return Err(Error::Domain(format!(
            "cusp interval [{t_min}, {t_max}] must satisfy 0 < t_min < t_max ≤ 1"
        )));
    }
    let m = if base == Base::Circle { 2 } else { 1 };
    let rho = ScalarFn::new(parse_bound("x^alpha", &params(&[("alpha", alpha)]))?, m)?;
    tube(
        GeometryKind::Cusp,
        alpha,
        base,
        (t_min, t_max),
        [FaceLabel::Truncation, FaceLabel::Dirichlet],
        rho,
        &[("t_min", t_min)],
    )
}

/// Infinite `α`-cusp (`α < 0`) on `x ∈ [t_lo, t_max] ⊂ [1, ∞)`, `ρ = x^α`.
/// The far face `x = t_max` is a truncation.
pub fn make_infinite_cusp(alpha: f64, base: Base, t_lo: f64, t_max: f64) -> Result<Geometry> {
    if !(alpha < 0.0) {
        return Err(Error::Domain(format!("infinite cusp needs alpha < 0, got {alpha}")));
    }
    if !(t_lo >= 1.0) || !(t_max > t_lo) || !t_max.is_finite() {
        return Err(Error::Domain(format!(
            "infinite cusp interval [{t_lo}, {t_max}] must satisfy 1 ≤ t_lo < t_max < ∞"
        )));
    }
    let m = if base == Base::Circle { 2 } else { 1 };
    let rho = ScalarFn::new(parse_bound("x^alpha", &params(&[("alpha", alpha)]))?, m)?;
    tube(
        GeometryKind::InfiniteCusp,
        alpha,
        base,
        (t_lo, t_max),
        [FaceLabel::Dirichlet, FaceLabel::Truncation],
        rho,
        &[("t_max", t_max)],
    )
}

/// `α`-funnel (`0 ≤ α ≤ 1`) on `x ∈ [t_lo, t_max] ⊂ [1, ∞)` with `ρ ≡ 1`.
pub fn make_funnel(alpha: f64, base: Base, t_lo: f64, t_max: f64) -> Result<Geometry> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!("funnel needs alpha ∈ [0,1], got {alpha}")));
    }
    if !(t_lo >= 1.0) || !(t_max > t_lo) || !t_max.is_finite() {
        return Err(Error::Domain(format!(
            "funnel interval [{t_lo}, {t_max}] must satisfy 1 ≤ t_lo < t_max < ∞"
        )));
    }
    let m = if base == Base::Circle { 2 } else { 1 };
    tube(
        GeometryKind::Funnel,
        alpha,
        base,
        (t_lo, t_max),
        [FaceLabel::Dirichlet, FaceLabel::Truncation],
        ScalarFn::constant(1.0, m),
        &[("t_max", t_max)],
    )
}

/// Wedge: point-pair `α`-cusp times `z ∈ [0, ell]`, `ρ = x^α` independent of `z`.
pub fn make_wedge(alpha: f64, t_min: f64, ell: f64) -> Result<Geometry> {
    let cusp = make_cusp(alpha, Base::PointPair, t_min, 1.0)?;
    if !(ell > 0.0) {
        return Err(Error::Domain(format!("wedge length must be positive, got {ell}")));
    }
    let gxx = cusp.manifold.metric.entries()[0].clone();
    let metric = ExprMetric::diagonal(vec![gxx, Expr::num(1.0)])?;
    let rho = ScalarFn::new(cusp.datum.rho.expr().clone(), 2)?;
    let manifold = ManifoldSpec {
        kind: GeometryKind::Wedge,
        base: Some(Base::PointPair),
        params: params(&[("alpha", alpha), ("ell", ell), ("t_min", t_min)]),
        lo: vec![t_min, 0.0],
        hi: vec![1.0, ell],
        labels: vec![
            [FaceLabel::Truncation, FaceLabel::Dirichlet],
            [FaceLabel::Dirichlet; 2],
        ],
        metric,
    };
    let datum = SingularityDatum::new(rho, &manifold.center());
    Ok(Geometry { manifold, datum })
}

/// The geometries every transform identity is checked on.
pub fn registry_geometries() -> Result<Vec<Geometry>> {
    Ok(vec![
        make_euclidean_box(2, &[0.0, 0.0], &[1.0, 1.0])?,
        make_poincare_ball(2, 0.2, 0.8)?,
        make_cusp(1.0, Base::Circle, 0.1, 1.0)?,
        make_cusp(2.0, Base::PointPair, 0.1, 1.0)?,
        make_infinite_cusp(-1.0, Base::PointPair, 1.0, 4.0)?,
        make_funnel(0.0, Base::Circle, 1.0, 3.0)?,
        make_funnel(1.0, Base::PointPair, 1.0, 3.0)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_chart::MetricSource;

    #[test]
    fn unit_cusp_over_point_pair_has_constant_metric() {
        let geo = make_cusp(1.0, Base::PointPair, 0.1, 1.0).unwrap();
        for x in [0.1, 0.5, 1.0] {
            let mp = geo.manifold.metric.eval(&[x]);
            assert_eq!(mp.g, vec![2.0]);
            assert_eq!(mp.dg, vec![0.0]);
        }
        let geo = make_cusp(2.0, Base::PointPair, 0.1, 1.0).unwrap();
        assert_eq!(geo.datum.rho.value(&[0.5]), 0.25);
    }

    #[test]
    fn infinite_cusp_decays() {
        let geo = make_infinite_cusp(-1.0, Base::PointPair, 1.0, 8.0).unwrap();
        assert_eq!(geo.datum.rho.value(&[4.0]), 0.25);
        assert!(make_infinite_cusp(0.0, Base::PointPair, 1.0, 8.0).is_err());
    }

    #[test]
    fn funnels_interpolate_cylinder_and_cone() {
        let cyl = make_funnel(0.0, Base::Circle, 1.0, 3.0).unwrap();
        assert_eq!(cyl.manifold.metric.g_at(&[2.0, 0.3]), vec![1.0, 0.0, 0.0, 1.0]);
        let cone = make_funnel(1.0, Base::Circle, 1.0, 3.0).unwrap();
        assert_eq!(cone.manifold.metric.g_at(&[2.0, 0.3]), vec![2.0, 0.0, 0.0, 4.0]);
        let near = make_infinite_cusp(-0.01, Base::Circle, 1.0, 3.0).unwrap();
        let gn = near.manifold.metric.g_at(&[2.0, 0.3]);
        assert!((gn[0] - 1.0).abs() < 1e-3 && (gn[3] - 1.0).abs() < 2e-2);
    }

    #[test]
    fn poincare_hat_metric_is_hyperbolic() {
        let geo = make_poincare_box(2, 0.5).unwrap();
        let hat = geo.hat_metric().unwrap();
        assert_eq!(hat.g_at(&[0.0, 0.0]), vec![4.0, 0.0, 0.0, 4.0]);
        let r: f64 = 0.3;
        let gh = hat.g_at(&[r, 0.0]);
        assert!((gh[0] - 4.0 / (1.0 - r * r).powi(2)).abs() < 1e-12);
        assert!(make_poincare_ball(2, 0.2, 1.0).is_err());
    }

    #[test]
    fn sampled_and_closed_form_hat_metrics_agree() {
        for geo in registry_geometries().unwrap() {
            let n = vec![9; geo.dim()];
            let grid = geo.grid(&n).unwrap();
            let g = geo.metric_field(grid.clone()).unwrap();
            let sampled = conformal_metric(&g, &geo.datum).unwrap();
            let closed = geo.hat_metric_field(grid.clone()).unwrap();
            for (a, b) in sampled.g().data().iter().zip(closed.g().data()) {
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{}", geo.name());
            }
            for (a, b) in sampled.christoffel().iter().zip(closed.christoffel()) {
                assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0), "{}: {a} {b}", geo.name());
            }
        }
    }

    #[test]
    fn cusp_rejects_nonpositive_truncation() {
        assert!(matches!(make_cusp(1.0, Base::PointPair, 0.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(make_cusp(0.5, Base::PointPair, 0.1, 1.0), Err(Error::Domain(_))));
    }
}

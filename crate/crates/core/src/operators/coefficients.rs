use crate::error::{Error, Result};
use crate::expr::{CompiledExpr, Expr};
use crate::geometry::coord_names;
use crate::tensor_chart::{ChartGrid, Face, TensorField};

/// Variables available to coefficient and data expressions: the chart
/// coordinates followed by `t`.
pub fn expr_vars(dim: usize) -> Vec<&'static str> {
    let mut v = coord_names(dim).to_vec();
    v.push("t");
    v
}

/// An expression compiled against `(x[, y], t)`.
#[derive(Debug, Clone)]
pub struct SpaceTimeFn {
    expr: Expr,
    compiled: CompiledExpr,
    dim: usize,
}

impl SpaceTimeFn {
    pub fn new(expr: Expr, dim: usize) -> Result<Self> {
        let compiled = expr.compile(&expr_vars(dim))?;
        Ok(SpaceTimeFn { expr, compiled, dim })
    }

    pub fn parse(src: &str, dim: usize) -> Result<Self> {
        Self::new(Expr::parse(src)?, dim)
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(Expr::num(0.0), dim).expect("constant compiles")
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        let mut v = [0.0; 4];
        v[..self.dim].copy_from_slice(x);
        v[self.dim] = t;
        self.compiled.eval(&v[..=self.dim])
    }

    pub fn depends_on_time(&self) -> bool {
        self.expr.depends_on("t")
    }
}

/// Coefficients `(a, ā, a₀, b₀)` of `𝒜u = −div(a⨀grad u) + (ā|grad u) + a₀u`
/// and `ℬ₁u = (ν|a⨀grad u) + b₀u`, as closed-form expressions in the chart
/// coordinates and time.
#[derive(Debug, Clone)]
pub struct CoefficientSet {
    dim: usize,
    /// `a^i_j`, row-major.
    a: Vec<SpaceTimeFn>,
    a_vec: Vec<SpaceTimeFn>,
    a0: SpaceTimeFn,
    b0: SpaceTimeFn,
}

impl CoefficientSet {
    pub fn new(dim: usize, a: Vec<Expr>, a_vec: Vec<Expr>, a0: Expr, b0: Expr) -> Result<Self> {
        if a.len() != dim * dim || a_vec.len() != dim {
            return Err(Error::Shape(format!(
                "coefficients need {} entries for a and {dim} for ā, got {} and {}",
                dim * dim,
                a.len(),
                a_vec.len()
            )));
        }
        Ok(CoefficientSet {
            dim,
            a: a.into_iter().map(|e| SpaceTimeFn::new(e, dim)).collect::<Result<_>>()?,
            a_vec: a_vec.into_iter().map(|e| SpaceTimeFn::new(e, dim)).collect::<Result<_>>()?,
            a0: SpaceTimeFn::new(a0, dim)?,
            b0: SpaceTimeFn::new(b0, dim)?,
        })
    }

    /// `a = s·id`, no lower-order terms.
    pub fn isotropic(dim: usize, s: Expr) -> Result<Self> {
        let mut a = vec![Expr::num(0.0); dim * dim];
        for i in 0..dim {
            a[i * dim + i] = s.clone();
        }
        Self::new(dim, a, vec![Expr::num(0.0); dim], Expr::num(0.0), Expr::num(0.0))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn a_exprs(&self) -> Vec<Expr> {
        self.a.iter().map(|f| f.expr().clone()).collect()
    }

    pub fn a_vec_exprs(&self) -> Vec<Expr> {
        self.a_vec.iter().map(|f| f.expr().clone()).collect()
    }

    pub fn a0_expr(&self) -> &Expr {
        self.a0.expr()
    }

    pub fn b0_expr(&self) -> &Expr {
        self.b0.expr()
    }

    pub fn with_lower_order(mut self, a_vec: Vec<Expr>, a0: Expr, b0: Expr) -> Result<Self> {
        if a_vec.len() != self.dim {
            return Err(Error::Shape(format!("{} drift entries for dimension {}", a_vec.len(), self.dim)));
        }
        self.a_vec = a_vec.into_iter().map(|e| SpaceTimeFn::new(e, self.dim)).collect::<Result<_>>()?;
        self.a0 = SpaceTimeFn::new(a0, self.dim)?;
        self.b0 = SpaceTimeFn::new(b0, self.dim)?;
        Ok(self)
    }

    pub fn is_autonomous(&self) -> bool {
        !self
            .a
            .iter()
            .chain(&self.a_vec)
            .chain([&self.a0, &self.b0])
            .any(|f| f.depends_on_time())
    }

    pub fn a_at(&self, x: &[f64], t: f64) -> Vec<f64> {
        self.a.iter().map(|f| f.eval(x, t)).collect()
    }

    pub fn a_vec_at(&self, x: &[f64], t: f64) -> Vec<f64> {
        self.a_vec.iter().map(|f| f.eval(x, t)).collect()
    }

    pub fn a0_at(&self, x: &[f64], t: f64) -> f64 {
        self.a0.eval(x, t)
    }

    pub fn b0_at(&self, x: &[f64], t: f64) -> f64 {
        self.b0.eval(x, t)
    }

    /// Samples every coefficient at time `t`.
    pub fn sample(&self, grid: &ChartGrid, t: f64) -> Result<SampledCoefficients> {
        if grid.dim() != self.dim {
            return Err(Error::Shape(format!(
                "coefficients of dimension {} on a {}-dimensional grid",
                self.dim,
                grid.dim()
            )));
        }
        let m = self.dim;
        let a = TensorField::from_vec(m, 1, 1, (0..grid.npts()).flat_map(|p| self.a_at(grid.point(p), t)).collect())?;
        let a_vec =
            TensorField::from_vec(m, 1, 0, (0..grid.npts()).flat_map(|p| self.a_vec_at(grid.point(p), t)).collect())?;
        let a0: Vec<f64> = (0..grid.npts()).map(|p| self.a0_at(grid.point(p), t)).collect();
        if a0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite a₀ sample".into()));
        }
        let b0 = grid
            .faces()
            .into_iter()
            .map(|f| grid.face_points(f).iter().map(|&p| self.b0_at(grid.point(p), t)).collect())
            .collect();
        Ok(SampledCoefficients { a, a_vec, a0, b0 })
    }
}

/// Coefficients sampled on a grid at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledCoefficients {
    pub a: TensorField,
    pub a_vec: TensorField,
    pub a0: Vec<f64>,
    /// `b₀` per face (indexed by [`Face::id`]) at that face's points.
    pub b0: Vec<Vec<f64>>,
}

impl SampledCoefficients {
    pub fn b0_on(&self, face: Face) -> &[f64] {
        &self.b0[face.id()]
    }
}

/// Right-hand sides and initial value of `∂u + 𝒜u = f, ℬu = h, u(0) = u₀`.
#[derive(Debug, Clone)]
pub struct ProblemData {
    pub f: SpaceTimeFn,
    /// Dirichlet data on `∂₀M` (and on truncation faces).
    pub h0: SpaceTimeFn,
    /// Flux data on `∂₁M`, one expression per face (indexed by [`Face::id`]).
    pub h1: Vec<SpaceTimeFn>,
    pub u0: SpaceTimeFn,
    /// Reference solution, when known.
    pub exact: Option<SpaceTimeFn>,
}

impl ProblemData {
    pub fn zero(dim: usize) -> Self {
        ProblemData {
            f: SpaceTimeFn::zero(dim),
            h0: SpaceTimeFn::zero(dim),
            h1: (0..2 * dim).map(|_| SpaceTimeFn::zero(dim)).collect(),
            u0: SpaceTimeFn::zero(dim),
            exact: None,
        }
    }

    pub fn is_homogeneous_boundary(&self) -> bool {
        self.h0.expr().is_zero() && self.h1.iter().all(|h| h.expr().is_zero())
    }

    pub fn h1_on(&self, face: Face) -> &SpaceTimeFn {
        &self.h1[face.id()]
    }
}

use crate::error::{Error, Result};
use crate::expr::{CompiledExpr, Expr};
use crate::tensor_chart::{MetricPoint, MetricSource};

/// Chart coordinate names by dimension.
pub fn coord_names(m: usize) -> &'static [&'static str] {
    match m {
        1 => &["x"],
        2 => &["x", "y"],
        _ => &["x", "y", "z"],
    }
}

/// A smooth scalar given in closed form, with exact first and second
/// derivatives.
#[derive(Debug, Clone)]
pub struct ScalarFn {
    expr: Expr,
    dim: usize,
    value: CompiledExpr,
    grad: Vec<CompiledExpr>,
    hess: Vec<CompiledExpr>,
}

impl ScalarFn {
    pub fn new(expr: Expr, dim: usize) -> Result<Self> {
        let vars = coord_names(dim);
        let value = expr.compile(vars)?;
        let d1: Vec<Expr> = vars.iter().map(|v| expr.diff(v)).collect();
        let grad = d1.iter().map(|e| e.compile(vars)).collect::<Result<Vec<_>>>()?;
        let mut hess = Vec::with_capacity(dim * dim);
        for di in &d1 {
            for v in vars {
                hess.push(di.diff(v).compile(vars)?);
            }
        }
        Ok(ScalarFn {
            expr,
            dim,
            value,
            grad,
            hess,
        })
    }

    pub fn parse(src: &str, dim: usize) -> Result<Self> {
        Self::new(Expr::parse(src)?, dim)
    }

    pub fn constant(v: f64, dim: usize) -> Self {
        Self::new(Expr::num(v), dim).expect("constants compile")
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.expr, Expr::Num(_))
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.value.eval(x)
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        self.grad.iter().map(|c| c.eval(x)).collect()
    }

    /// Row-major `∂_i∂_j`.
    pub fn hessian(&self, x: &[f64]) -> Vec<f64> {
        self.hess.iter().map(|c| c.eval(x)).collect()
    }
}

/// A metric whose components are closed-form expressions in the chart
/// coordinates, with exact derivatives up to order two.
#[derive(Debug, Clone)]
pub struct ExprMetric {
    dim: usize,
    entries: Vec<Expr>,
    g: Vec<CompiledExpr>,
    dg: Vec<CompiledExpr>,
    d2g: Vec<CompiledExpr>,
}

impl ExprMetric {
    /// `entries` is the row-major `m×m` component matrix; it must be symmetric
    /// as expressions.
    pub fn new(dim: usize, entries: Vec<Expr>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::Shape(format!(
                "{} metric entries for dimension {dim}",
                entries.len()
            )));
        }
        for i in 0..dim {
            for j in 0..i {
                if entries[i * dim + j] != entries[j * dim + i] {
                    return Err(Error::Config(format!("metric entries ({i},{j}) and ({j},{i}) differ")));
                }
            }
        }
        let vars = coord_names(dim);
        let g = entries.iter().map(|e| e.compile(vars)).collect::<Result<Vec<_>>>()?;
        let mut dg = Vec::with_capacity(dim.pow(3));
        let mut d2g = Vec::with_capacity(dim.pow(4));
        let firsts: Vec<Vec<Expr>> = vars
            .iter()
            .map(|v| entries.iter().map(|e| e.diff(v)).collect())
            .collect();
        for fk in &firsts {
            for e in fk {
                dg.push(e.compile(vars)?);
            }
        }
        for fk in &firsts {
            for l in vars {
                for e in fk {
                    d2g.push(e.diff(l).compile(vars)?);
                }
            }
        }
        Ok(ExprMetric {
            dim,
            entries,
            g,
            dg,
            d2g,
        })
    }

    /// Diagonal metric from diagonal entries.
    pub fn diagonal(diag: Vec<Expr>) -> Result<Self> {
        let m = diag.len();
        let mut entries = vec![Expr::num(0.0); m * m];
        for (i, d) in diag.into_iter().enumerate() {
            entries[i * m + i] = d;
        }
        Self::new(m, entries)
    }

    pub fn euclidean(dim: usize) -> Self {
        Self::diagonal(vec![Expr::num(1.0); dim]).expect("identity metric compiles")
    }

    pub fn entries(&self) -> &[Expr] {
        &self.entries
    }

    /// `g / w²` as expressions.
    pub fn conformal(&self, w: &Expr) -> Result<ExprMetric> {
        let w2 = Expr::Pow(Box::new(w.clone()), Box::new(Expr::num(2.0)));
        let entries = self
            .entries
            .iter()
            .map(|e| Expr::Div(Box::new(e.clone()), Box::new(w2.clone())).simplify())
            .collect();
        ExprMetric::new(self.dim, entries)
    }

    /// Determinant as an expression (`m ≤ 2`).
    pub fn det_expr(&self) -> Result<Expr> {
        let e = &self.entries;
        match self.dim {
            1 => Ok(e[0].clone()),
            2 => Ok(e[0].clone() * e[3].clone() - e[1].clone() * e[2].clone()),
            m => Err(Error::Shape(format!("closed-form inverse needs m ≤ 2, got {m}"))),
        }
    }

    /// Inverse components `g^{ij}` as expressions (`m ≤ 2`).
    pub fn inverse_exprs(&self) -> Result<Vec<Expr>> {
        let e = &self.entries;
        let det = self.det_expr()?;
        Ok(match self.dim {
            1 => vec![Expr::num(1.0) / det],
            _ => vec![
                e[3].clone() / det.clone(),
                -(e[1].clone()) / det.clone(),
                -(e[2].clone()) / det.clone(),
                e[0].clone() / det,
            ],
        })
    }

    pub fn g_at(&self, x: &[f64]) -> Vec<f64> {
        self.g.iter().map(|c| c.eval(x)).collect()
    }

    /// `∂_k∂_l g_ij` stored `[k][l][i][j]`.
    pub fn d2g_at(&self, x: &[f64]) -> Vec<f64> {
        self.d2g.iter().map(|c| c.eval(x)).collect()
    }
}

impl MetricSource for ExprMetric {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> MetricPoint {
        MetricPoint {
            g: self.g_at(x),
            dg: self.dg.iter().map(|c| c.eval(x)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_derivatives_are_exact() {
        let f = ScalarFn::parse("(1 - x^2 - y^2)/2", 2).unwrap();
        assert_eq!(f.value(&[0.0, 0.0]), 0.5);
        assert_eq!(f.grad(&[0.5, 0.25]), vec![-0.5, -0.25]);
        assert_eq!(f.hessian(&[0.3, 0.1]), vec![-1.0, 0.0, 0.0, -1.0]);
    }

    #[test]
    fn conformal_metric_divides_by_square() {
        let g = ExprMetric::diagonal(vec![Expr::num(1.0), Expr::parse("x^2").unwrap()]).unwrap();
        let h = g.conformal(&Expr::parse("x").unwrap()).unwrap();
        let x = [3.0, 0.4];
        let gh = h.g_at(&x);
        assert!((gh[0] - 1.0 / 9.0).abs() < 1e-16 && (gh[3] - 1.0).abs() < 1e-15);
        let mp = h.eval(&x);
        // ∂_x(1/x²) = −2/x³
        assert!((mp.dg[0] + 2.0 / 27.0).abs() < 1e-15);
    }

    #[test]
    fn asymmetric_entries_are_rejected() {
        let e = vec![
            Expr::num(1.0),
            Expr::parse("x").unwrap(),
            Expr::num(0.0),
            Expr::num(1.0),
        ];
        assert!(ExprMetric::new(2, e).is_err());
    }
}

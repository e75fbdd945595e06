use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg;

use super::field::{permute_slots, transform_slot, TensorField};
use super::grid::ChartGrid;

/// Metric components and their first coordinate derivatives at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricPoint {
    /// `g_ij`, row-major `m×m`.
    pub g: Vec<f64>,
    /// `∂_k g_ij` stored at `[k][i][j]`.
    pub dg: Vec<f64>,
}

/// A metric given in closed form on a chart.
pub trait MetricSource: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> MetricPoint;
}

/// Flat metric `δ_ij`.
#[derive(Debug, Clone, Copy)]
pub struct EuclideanMetric(pub usize);

impl MetricSource for EuclideanMetric {
    fn dim(&self) -> usize {
        self.0
    }

    fn eval(&self, _x: &[f64]) -> MetricPoint {
        let m = self.0;
        let mut g = vec![0.0; m * m];
        for i in 0..m {
            g[i * m + i] = 1.0;
        }
        MetricPoint {
            g,
            dg: vec![0.0; m * m * m],
        }
    }
}

/// Diagonal metric `Σ_i w_i(x) (dx^i)²` given by closures returning the
/// diagonal and its gradient `[k][i] = ∂_k w_i`.
pub struct DiagonalMetric {
    dim: usize,
    #[allow(clippy::type_complexity)]
    f: Arc<dyn Fn(&[f64]) -> (Vec<f64>, Vec<f64>) + Send + Sync>,
}

impl DiagonalMetric {
    pub fn new<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> (Vec<f64>, Vec<f64>) + Send + Sync + 'static,
    {
        DiagonalMetric { dim, f: Arc::new(f) }
    }
}

impl MetricSource for DiagonalMetric {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> MetricPoint {
        let m = self.dim;
        let (w, dw) = (self.f)(x);
        let mut g = vec![0.0; m * m];
        let mut dg = vec![0.0; m * m * m];
        for i in 0..m {
            g[i * m + i] = w[i];
            for k in 0..m {
                dg[(k * m + i) * m + i] = dw[k * m + i];
            }
        }
        MetricPoint { g, dg }
    }
}

/// How the metric derivatives entering the Christoffel symbols were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivMode {
    Analytic,
    FiniteDifference,
}

/// A Riemannian metric sampled on a chart grid together with its inverse,
/// volume density and Levi-Civita Christoffel symbols.
#[derive(Debug, Clone)]
pub struct MetricField {
    grid: Arc<ChartGrid>,
    g: TensorField,
    g_inv: TensorField,
    sqrt_det: Vec<f64>,
    dg: Vec<f64>,
    christoffel: Vec<f64>,
    deriv_mode: DerivMode,
}

/// Condition numbers above this are treated as numerically singular.
const MAX_CONDITION: f64 = 1e12;

impl MetricField {
    /// Samples a closed-form metric, using its analytic derivatives.
    pub fn from_source(grid: Arc<ChartGrid>, source: &dyn MetricSource) -> Result<Self> {
        let m = grid.dim();
        if source.dim() != m {
            return Err(Error::Shape(format!(
                "metric of dimension {} on a {m}-dimensional grid",
                source.dim()
            )));
        }
        let npts = grid.npts();
        let mut g = Vec::with_capacity(npts * m * m);
        let mut dg = Vec::with_capacity(npts * m * m * m);
        for p in 0..npts {
            let mp = source.eval(grid.point(p));
            g.extend_from_slice(&mp.g);
            dg.extend_from_slice(&mp.dg);
        }
        let g = TensorField::from_vec(m, 0, 2, g)?;
        Self::assemble(grid, g, dg, DerivMode::Analytic)
    }

    /// Builds a metric from sampled components, differentiating them on the grid.
    pub fn from_samples(grid: Arc<ChartGrid>, g: TensorField) -> Result<Self> {
        g.check_order(0, 2, "metric")?;
        if g.npts() != grid.npts() || g.dim() != grid.dim() {
            return Err(Error::Shape("metric samples do not match the grid".into()));
        }
        let m = grid.dim();
        let npts = grid.npts();
        let mut dg = vec![0.0; npts * m * m * m];
        for k in 0..m {
            let dk = grid.partial(g.data(), m * m, k);
            for p in 0..npts {
                for ij in 0..m * m {
                    dg[p * m * m * m + k * m * m + ij] = dk[p * m * m + ij];
                }
            }
        }
        Self::assemble(grid, g, dg, DerivMode::FiniteDifference)
    }

    fn assemble(grid: Arc<ChartGrid>, g: TensorField, dg: Vec<f64>, mode: DerivMode) -> Result<Self> {
        let m = grid.dim();
        let npts = grid.npts();
        let mut g_inv = Vec::with_capacity(npts * m * m);
        let mut sqrt_det = Vec::with_capacity(npts);
        let mut christoffel = Vec::with_capacity(npts * m * m * m);
        for p in 0..npts {
            let gp = g.at(p);
            let bad = |detail: String| Error::Conditioning {
                index: p,
                coords: grid.point(p).to_vec(),
                detail,
            };
            for i in 0..m {
                for j in 0..i {
                    let (a, b) = (gp[i * m + j], gp[j * m + i]);
                    if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                        return Err(bad(format!("g not symmetric: g[{i}{j}]={a}, g[{j}{i}]={b}")));
                    }
                }
            }
            let eig = linalg::sym_eigenvalues(m, gp);
            let (lmin, lmax) = (eig[0], eig[m - 1]);
            if !(lmin > 0.0) || lmax / lmin > MAX_CONDITION {
                return Err(bad(format!("eigenvalues in [{lmin:.3e}, {lmax:.3e}]")));
            }
            let inv = linalg::invert(m, gp).ok_or_else(|| bad("inverse failed".into()))?;
            let det = linalg::det(m, gp);
            sqrt_det.push(det.sqrt());
            let dgp = &dg[p * m * m * m..(p + 1) * m * m * m];
            // Γ^k_{ij} = ½ g^{kl}(∂_i g_{jl} + ∂_j g_{il} − ∂_l g_{ij})
            for k in 0..m {
                for i in 0..m {
                    for j in 0..m {
                        let mut acc = 0.0;
                        for l in 0..m {
                            let s = dgp[(i * m + j) * m + l] + dgp[(j * m + i) * m + l]
                                - dgp[(l * m + i) * m + j];
                            acc += inv[k * m + l] * s;
                        }
                        christoffel.push(0.5 * acc);
                    }
                }
            }
            g_inv.extend_from_slice(&inv);
        }
        Ok(MetricField {
            g_inv: TensorField::from_vec(m, 2, 0, g_inv)?,
            g,
            sqrt_det,
            dg,
            christoffel,
            deriv_mode: mode,
            grid,
        })
    }

    pub fn grid(&self) -> &Arc<ChartGrid> {
        &self.grid
    }
    pub fn dim(&self) -> usize {
        self.grid.dim()
    }
    pub fn npts(&self) -> usize {
        self.grid.npts()
    }
    pub fn g(&self) -> &TensorField {
        &self.g
    }
    pub fn g_inv(&self) -> &TensorField {
        &self.g_inv
    }
    pub fn sqrt_det(&self) -> &[f64] {
        &self.sqrt_det
    }
    pub fn deriv_mode(&self) -> DerivMode {
        self.deriv_mode
    }

    /// `∂_k g_ij` at point `p`, stored `[k][i][j]`.
    pub fn dg_at(&self, p: usize) -> &[f64] {
        let m3 = self.dim().pow(3);
        &self.dg[p * m3..(p + 1) * m3]
    }

    /// `Γ^k_{ij}` at point `p`, stored `[k][i][j]`.
    pub fn christoffel_at(&self, p: usize) -> &[f64] {
        let m3 = self.dim().pow(3);
        &self.christoffel[p * m3..(p + 1) * m3]
    }

    pub fn christoffel(&self) -> &[f64] {
        &self.christoffel
    }

    pub(crate) fn check_field(&self, a: &TensorField) -> Result<()> {
        if a.npts() != self.npts() || a.dim() != self.dim() {
            return Err(Error::Shape(format!(
                "field with {} points in dimension {} on a metric with {} points in dimension {}",
                a.npts(),
                a.dim(),
                self.npts(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Conformal rescaling `g / w²` with analytic derivative data for `w`
    /// (`w` values and gradients per point).
    pub fn rescaled(&self, w: &[f64], dw: &[f64]) -> Result<MetricField> {
        let m = self.dim();
        let npts = self.npts();
        if w.len() != npts || dw.len() != npts * m {
            return Err(Error::Shape("rescaling weights do not match the grid".into()));
        }
        let mut g = self.g.data().to_vec();
        let mut dg = self.dg.clone();
        for p in 0..npts {
            let wp = w[p];
            if !(wp > 0.0) {
                return Err(Error::Domain(format!(
                    "nonpositive conformal factor {wp} at point {p} {:?}",
                    self.grid.point(p)
                )));
            }
            let inv2 = 1.0 / (wp * wp);
            let gp = self.g.at(p);
            for k in 0..m {
                let dlog = dw[p * m + k] / wp;
                for ij in 0..m * m {
                    let idx = p * m * m * m + k * m * m + ij;
                    dg[idx] = (self.dg[idx] - 2.0 * gp[ij] * dlog) * inv2;
                }
            }
            for v in &mut g[p * m * m..(p + 1) * m * m] {
                *v *= inv2;
            }
        }
        Self::assemble(
            self.grid.clone(),
            TensorField::from_vec(m, 0, 2, g)?,
            dg,
            self.deriv_mode,
        )
    }
}

/// Pointwise induced inner product `g_σ^τ(a, b)`.
pub fn tensor_inner(a: &TensorField, b: &TensorField, g: &MetricField) -> Result<Vec<f64>> {
    g.check_field(a)?;
    a.check_same_points(b)?;
    b.check_order(a.sigma(), a.tau(), "second argument")?;
    let m = a.dim();
    let rank = a.rank();
    Ok((0..a.npts())
        .map(|p| {
            let mut t = b.at(p).to_vec();
            for s in 0..a.sigma() {
                t = transform_slot(&t, m, rank, s, g.g().at(p));
            }
            for s in a.sigma()..rank {
                t = transform_slot(&t, m, rank, s, g.g_inv().at(p));
            }
            a.at(p).iter().zip(&t).map(|(x, y)| x * y).sum()
        })
        .collect())
}

/// Pointwise vector-bundle norm `|a|_{g_σ^τ}`.
pub fn tensor_norm(a: &TensorField, g: &MetricField) -> Result<Vec<f64>> {
    Ok(tensor_inner(a, a, g)?
        .into_iter()
        .map(|v| v.max(0.0).sqrt())
        .collect())
}

/// Raises the last covariant slot and appends it as the last contravariant
/// slot: `(a♯)^{(i;k)}_{(j)} = g^{kℓ} a^{(i)}_{(j;ℓ)}`.
pub fn sharp(a: &TensorField, g: &MetricField) -> Result<TensorField> {
    g.check_field(a)?;
    if a.tau() == 0 {
        return Err(Error::Rank("sharp needs at least one covariant slot".into()));
    }
    let m = a.dim();
    let rank = a.rank();
    let s = a.sigma();
    // output slot order: (i_1..i_σ, k, j_1..j_τ) taken from input (i, j, ℓ)
    let mut perm: Vec<usize> = (0..s).collect();
    perm.push(rank - 1);
    perm.extend(s..rank - 1);
    let mut out = TensorField::zeros(m, s + 1, a.tau() - 1, a.npts());
    for p in 0..a.npts() {
        let raised = transform_slot(a.at(p), m, rank, rank - 1, g.g_inv().at(p));
        out.at_mut(p).copy_from_slice(&permute_slots(&raised, m, rank, &perm));
    }
    Ok(out)
}

/// Lowers the last contravariant slot and appends it as the last covariant
/// slot (inverse of [`sharp`]).
pub fn flat(a: &TensorField, g: &MetricField) -> Result<TensorField> {
    g.check_field(a)?;
    if a.sigma() == 0 {
        return Err(Error::Rank("flat needs at least one contravariant slot".into()));
    }
    let m = a.dim();
    let rank = a.rank();
    let s = a.sigma() - 1;
    // output (i_1..i_{σ-1}, j_1..j_τ, ℓ) from input (i, k, j)
    let mut perm: Vec<usize> = (0..s).collect();
    perm.extend(s + 1..rank);
    perm.push(s);
    let mut out = TensorField::zeros(m, s, a.tau() + 1, a.npts());
    for p in 0..a.npts() {
        let lowered = transform_slot(a.at(p), m, rank, s, g.g().at(p));
        out.at_mut(p).copy_from_slice(&permute_slots(&lowered, m, rank, &perm));
    }
    Ok(out)
}

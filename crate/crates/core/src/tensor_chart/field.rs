use crate::error::{Error, Result};

use super::grid::ChartGrid;

/// Components of a `(σ, τ)`-tensor field sampled on the points of a chart grid.
///
/// Storage is row-major over `(point, contravariant slots, covariant slots)`,
/// multi-indices enumerated lexicographically with the first slot slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    dim: usize,
    sigma: usize,
    tau: usize,
    npts: usize,
    data: Vec<f64>,
}

impl TensorField {
    pub fn zeros(dim: usize, sigma: usize, tau: usize, npts: usize) -> Self {
        let ncomp = dim.pow((sigma + tau) as u32);
        TensorField {
            dim,
            sigma,
            tau,
            npts,
            data: vec![0.0; npts * ncomp],
        }
    }

    pub fn from_vec(dim: usize, sigma: usize, tau: usize, data: Vec<f64>) -> Result<Self> {
        let ncomp = dim.pow((sigma + tau) as u32);
        if ncomp == 0 || data.len() % ncomp != 0 {
            return Err(Error::Shape(format!(
                "{} values cannot hold a ({sigma},{tau})-tensor field in dimension {dim}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite tensor component at flat position {bad}"
            )));
        }
        Ok(TensorField {
            dim,
            sigma,
            tau,
            npts: data.len() / ncomp,
            data,
        })
    }

    pub fn scalar(dim: usize, values: Vec<f64>) -> Self {
        TensorField {
            dim,
            sigma: 0,
            tau: 0,
            npts: values.len(),
            data: values,
        }
    }

    /// Samples `f(x)` (returning all components at `x`) at every grid point.
    pub fn from_fn<F>(grid: &ChartGrid, sigma: usize, tau: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64>,
    {
        let dim = grid.dim();
        let ncomp = dim.pow((sigma + tau) as u32);
        let mut data = Vec::with_capacity(grid.npts() * ncomp);
        for p in 0..grid.npts() {
            let v = f(grid.point(p));
            assert_eq!(v.len(), ncomp, "component count mismatch in from_fn");
            data.extend_from_slice(&v);
        }
        TensorField {
            dim,
            sigma,
            tau,
            npts: grid.npts(),
            data,
        }
    }

    pub fn scalar_from_fn<F: Fn(&[f64]) -> f64>(grid: &ChartGrid, f: F) -> Self {
        TensorField::scalar(grid.dim(), (0..grid.npts()).map(|p| f(grid.point(p))).collect())
    }

    /// The identity `(1,1)`-tensor `δ^i_j` at every point.
    pub fn identity(dim: usize, npts: usize) -> Self {
        let mut t = TensorField::zeros(dim, 1, 1, npts);
        for p in 0..npts {
            for i in 0..dim {
                t.data[p * dim * dim + i * dim + i] = 1.0;
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn sigma(&self) -> usize {
        self.sigma
    }
    pub fn tau(&self) -> usize {
        self.tau
    }
    pub fn rank(&self) -> usize {
        self.sigma + self.tau
    }
    pub fn npts(&self) -> usize {
        self.npts
    }
    pub fn ncomp(&self) -> usize {
        self.dim.pow(self.rank() as u32)
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn at(&self, p: usize) -> &[f64] {
        let n = self.ncomp();
        &self.data[p * n..(p + 1) * n]
    }

    pub fn at_mut(&mut self, p: usize) -> &mut [f64] {
        let n = self.ncomp();
        &mut self.data[p * n..(p + 1) * n]
    }

    /// Value of a scalar field at point `p`.
    pub fn value(&self, p: usize) -> f64 {
        debug_assert_eq!(self.rank(), 0);
        self.data[p]
    }

    pub fn check_same_points(&self, other: &TensorField) -> Result<()> {
        if self.npts != other.npts || self.dim != other.dim {
            return Err(Error::Shape(format!(
                "fields live on different grids ({} pts, dim {} vs {} pts, dim {})",
                self.npts, self.dim, other.npts, other.dim
            )));
        }
        Ok(())
    }

    pub fn check_order(&self, sigma: usize, tau: usize, what: &str) -> Result<()> {
        if self.sigma != sigma || self.tau != tau {
            return Err(Error::Rank(format!(
                "{what} must be a ({sigma},{tau})-tensor, got ({},{})",
                self.sigma, self.tau
            )));
        }
        Ok(())
    }

    /// Pointwise `self + s·other`.
    pub fn axpy(&self, s: f64, other: &TensorField) -> Result<TensorField> {
        self.check_same_points(other)?;
        other.check_order(self.sigma, self.tau, "summand")?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + s * b)
            .collect();
        Ok(self.with_data(data))
    }

    pub fn scale(&self, s: f64) -> TensorField {
        self.with_data(self.data.iter().map(|v| v * s).collect())
    }

    /// Multiplies every component at point `p` by `w[p]`.
    pub fn scale_pointwise(&self, w: &[f64]) -> Result<TensorField> {
        if w.len() != self.npts {
            return Err(Error::Shape(format!(
                "{} weights for {} points",
                w.len(),
                self.npts
            )));
        }
        let n = self.ncomp();
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(k, v)| v * w[k / n])
            .collect();
        Ok(self.with_data(data))
    }

    /// Same shape, new components.
    pub fn with_data(&self, data: Vec<f64>) -> TensorField {
        assert_eq!(data.len(), self.data.len(), "component count mismatch");
        TensorField {
            dim: self.dim,
            sigma: self.sigma,
            tau: self.tau,
            npts: self.npts,
            data,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Applies the matrix `mat` (row-major `m×m`) to slot `slot` of one point's
/// components: `out[.., r, ..] = Σ_q mat[r][q] · comps[.., q, ..]`.
pub(crate) fn transform_slot(comps: &[f64], m: usize, rank: usize, slot: usize, mat: &[f64]) -> Vec<f64> {
    let inner = m.pow((rank - 1 - slot) as u32);
    let outer = comps.len() / (inner * m);
    let mut out = vec![0.0; comps.len()];
    for o in 0..outer {
        for r in 0..m {
            for q in 0..m {
                let w = mat[r * m + q];
                if w == 0.0 {
                    continue;
                }
                let src = (o * m + q) * inner;
                let dst = (o * m + r) * inner;
                for k in 0..inner {
                    out[dst + k] += w * comps[src + k];
                }
            }
        }
    }
    out
}

/// Reorders slots: slot `k` of the output is slot `perm[k]` of the input.
pub(crate) fn permute_slots(comps: &[f64], m: usize, rank: usize, perm: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; comps.len()];
    let mut digits = vec![0usize; rank];
    for (flat_out, slot) in out.iter_mut().enumerate() {
        let mut r = flat_out;
        for k in (0..rank).rev() {
            digits[k] = r % m;
            r /= m;
        }
        let mut src = 0;
        for s in 0..rank {
            // input slot s is the output slot k with perm[k] == s
            let k = perm.iter().position(|&x| x == s).unwrap();
            src = src * m + digits[k];
        }
        *slot = comps[src];
    }
    out
}

/// Complete contraction `a ⨀ b` of `a ∈ T^{σ₂+τ₁}_{τ₂+σ₁}` with `b ∈ T^{σ₁}_{τ₁}`,
/// summing `a^{(i₂;j₁)}_{(j₂;i₁)} b^{(i₁)}_{(j₁)}`.
pub fn contract_full(a: &TensorField, b: &TensorField) -> Result<TensorField> {
    a.check_same_points(b)?;
    let (s1, t1) = (b.sigma, b.tau);
    if a.sigma < t1 || a.tau < s1 {
        return Err(Error::Rank(format!(
            "cannot contract a ({},{})-tensor with a ({s1},{t1})-tensor",
            a.sigma, a.tau
        )));
    }
    let (s2, t2) = (a.sigma - t1, a.tau - s1);
    let m = a.dim;
    let (n_i2, n_j1, n_j2, n_i1) = (
        m.pow(s2 as u32),
        m.pow(t1 as u32),
        m.pow(t2 as u32),
        m.pow(s1 as u32),
    );
    let mut out = TensorField::zeros(m, s2, t2, a.npts);
    for p in 0..a.npts {
        let ap = a.at(p);
        let bp = b.at(p);
        let op = out.at_mut(p);
        for i2 in 0..n_i2 {
            for j2 in 0..n_j2 {
                let mut acc = 0.0;
                for j1 in 0..n_j1 {
                    for i1 in 0..n_i1 {
                        let ai = ((i2 * n_j1 + j1) * n_j2 + j2) * n_i1 + i1;
                        acc += ap[ai] * bp[i1 * n_j1 + j1];
                    }
                }
                op[i2 * n_j2 + j2] = acc;
            }
        }
    }
    Ok(out)
}

/// Contraction `C` of the last contravariant with the last covariant slot.
pub fn contraction_c(a: &TensorField) -> Result<TensorField> {
    if a.sigma == 0 || a.tau == 0 {
        return Err(Error::Rank(format!(
            "contraction needs a (σ+1,τ+1)-tensor, got ({},{})",
            a.sigma, a.tau
        )));
    }
    let m = a.dim;
    let (s, t) = (a.sigma - 1, a.tau - 1);
    let n_i = m.pow(s as u32);
    let n_j = m.pow(t as u32);
    let mut out = TensorField::zeros(m, s, t, a.npts);
    for p in 0..a.npts {
        let ap = a.at(p);
        let op = out.at_mut(p);
        for i in 0..n_i {
            for j in 0..n_j {
                let mut acc = 0.0;
                for k in 0..m {
                    // layout: (i, k, j, k)
                    acc += ap[((i * m + k) * n_j + j) * m + k];
                }
                op[i * n_j + j] = acc;
            }
        }
    }
    Ok(out)
}

/// Tensor product with contravariant slots `(a, b)` followed by covariant
/// slots `(a, b)`.
pub fn tensor_product(a: &TensorField, b: &TensorField) -> Result<TensorField> {
    a.check_same_points(b)?;
    let m = a.dim;
    let (na_c, na_o) = (m.pow(a.sigma as u32), m.pow(a.tau as u32));
    let (nb_c, nb_o) = (m.pow(b.sigma as u32), m.pow(b.tau as u32));
    let mut out = TensorField::zeros(m, a.sigma + b.sigma, a.tau + b.tau, a.npts);
    for p in 0..a.npts {
        let ap = a.at(p);
        let bp = b.at(p);
        let op = out.at_mut(p);
        for ia in 0..na_c {
            for ib in 0..nb_c {
                for ja in 0..na_o {
                    for jb in 0..nb_o {
                        let o = (((ia * nb_c + ib) * na_o + ja) * nb_o) + jb;
                        op[o] = ap[ia * na_o + ja] * bp[ib * nb_o + jb];
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(dim: usize, s: usize, t: usize, npts: usize, seed: u64) -> TensorField {
        let n = dim.pow((s + t) as u32) * npts;
        let data = (0..n)
            .map(|k| ((k as f64 + 1.0) * 0.37 + seed as f64).sin())
            .collect();
        TensorField::from_vec(dim, s, t, data).unwrap()
    }

    #[test]
    fn identity_contracts_to_vector() {
        let x = field(3, 1, 0, 4, 1);
        let id = TensorField::identity(3, 4);
        assert_eq!(contract_full(&id, &x).unwrap(), x);
    }

    #[test]
    fn contraction_of_identity_is_dimension() {
        let id = TensorField::identity(2, 3);
        let c = contraction_c(&id).unwrap();
        assert!(c.data().iter().all(|&v| v == 2.0));
    }

    #[test]
    fn rank_one_trace_is_pairing() {
        let x = field(2, 1, 0, 5, 2);
        let w = field(2, 0, 1, 5, 3);
        let c = contraction_c(&tensor_product(&x, &w).unwrap()).unwrap();
        for p in 0..5 {
            let pairing: f64 = x.at(p).iter().zip(w.at(p)).map(|(a, b)| a * b).sum();
            assert!((c.value(p) - pairing).abs() < 1e-15);
        }
    }

    #[test]
    fn contraction_rejects_bad_orders() {
        let x = field(2, 1, 0, 2, 0);
        assert!(matches!(contraction_c(&x), Err(Error::Rank(_))));
        let a = field(2, 0, 1, 2, 0);
        let b = field(2, 0, 2, 2, 0);
        assert!(matches!(contract_full(&a, &b), Err(Error::Rank(_))));
    }

    #[test]
    fn permute_swaps_two_slots() {
        let comps = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(permute_slots(&comps, 2, 2, &[1, 0]), vec![1.0, 3.0, 2.0, 4.0]);
    }

    #[test]
    fn from_vec_rejects_nan() {
        assert!(TensorField::from_vec(1, 0, 0, vec![f64::NAN]).is_err());
    }
}

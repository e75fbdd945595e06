//! Small dense helpers for per-point metric algebra and a banded LU for the
//! implicit time steps.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub fn matmul(m: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; m * m];
    for i in 0..m {
        for k in 0..m {
            let aik = a[i * m + k];
            for j in 0..m {
                out[i * m + j] += aik * b[k * m + j];
            }
        }
    }
    out
}

pub fn matvec(m: usize, a: &[f64], x: &[f64]) -> Vec<f64> {
    (0..m).map(|i| (0..m).map(|j| a[i * m + j] * x[j]).sum()).collect()
}

pub fn det(m: usize, a: &[f64]) -> f64 {
    match m {
        1 => a[0],
        2 => a[0] * a[3] - a[1] * a[2],
        _ => DMatrix::from_row_slice(m, m, a).determinant(),
    }
}

pub fn invert(m: usize, a: &[f64]) -> Option<Vec<f64>> {
    match m {
        1 => (a[0] != 0.0).then(|| vec![1.0 / a[0]]),
        2 => {
            let d = det(2, a);
            (d != 0.0).then(|| vec![a[3] / d, -a[1] / d, -a[2] / d, a[0] / d])
        }
        _ => {
            let inv = DMatrix::from_row_slice(m, m, a).try_inverse()?;
            Some((0..m).flat_map(|i| (0..m).map(move |j| (i, j))).map(|(i, j)| inv[(i, j)]).collect())
        }
    }
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(m: usize, a: &[f64]) -> Vec<f64> {
    let mut ev: Vec<f64> = match m {
        1 => vec![a[0]],
        2 => {
            let (p, q, r) = (a[0], 0.5 * (a[1] + a[2]), a[3]);
            let mean = 0.5 * (p + r);
            let rad = (0.25 * (p - r) * (p - r) + q * q).sqrt();
            vec![mean - rad, mean + rad]
        }
        _ => {
            let s = DMatrix::from_row_slice(m, m, a);
            SymmetricEigen::new(s).eigenvalues.iter().cloned().collect()
        }
    };
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

/// Eigenvalues (ascending) of the pencil `S x = λ G x` with `S` symmetric and
/// `G` symmetric positive definite, via the Cholesky factor of `G`.
pub fn sym_generalized_eigenvalues(m: usize, s: &[f64], g: &[f64]) -> Option<Vec<f64>> {
    let gm = DMatrix::from_row_slice(m, m, g);
    let chol = gm.cholesky()?;
    let l_inv = chol.l().try_inverse()?;
    let sm = DMatrix::from_row_slice(m, m, s);
    let mut c = &l_inv * sm * l_inv.transpose();
    c = (&c + c.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().cloned().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    Some(ev)
}

/// Square band matrix with `kl` sub- and `ku` super-diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        BandMatrix {
            n,
            kl,
            ku,
            data: vec![0.0; n * (kl + ku + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let off = j as isize - i as isize;
        (off >= -(self.kl as isize) && off <= self.ku as isize && i < self.n && j < self.n)
            .then(|| i * (self.kl + self.ku + 1) + (off + self.kl as isize) as usize)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Adds `v` at `(i, j)`; panics if the entry lies outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i},{j}) outside band ({},{})", self.kl, self.ku));
        self.data[s] += v;
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let s = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i},{j}) outside band ({},{})", self.kl, self.ku));
        self.data[s] = v;
    }

    /// Zeros row `i` and puts `v` on the diagonal.
    pub fn set_identity_row(&mut self, i: usize, v: f64) {
        let w = self.kl + self.ku + 1;
        self.data[i * w..(i + 1) * w].iter_mut().for_each(|x| *x = 0.0);
        self.set(i, i, v);
    }

    /// Multiplies row `i` by `s`.
    pub fn scale_row(&mut self, i: usize, s: f64) {
        let w = self.kl + self.ku + 1;
        self.data[i * w..(i + 1) * w].iter_mut().for_each(|x| *x *= s);
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = i.saturating_sub(self.kl);
        let hi = (i + self.ku).min(self.n - 1);
        (lo..=hi).map(move |j| (j, self.get(i, j)))
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `self + s·other` (same bandwidths).
    pub fn add_scaled(&self, s: f64, other: &BandMatrix) -> BandMatrix {
        assert_eq!((self.n, self.kl, self.ku), (other.n, other.kl, other.ku));
        BandMatrix {
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + s * b).collect(),
            ..self.clone()
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n * self.n];
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                d[i * self.n + j] = v;
            }
        }
        d
    }
}

/// LU factorization of a band matrix with partial (row) pivoting.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    width: usize,
    upper: usize,
    u: Vec<f64>,
    mult: Vec<f64>,
    perm: Vec<usize>,
    pivot_ratio: f64,
}

impl BandLu {
    pub fn factor(a: &BandMatrix) -> Result<Self> {
        let (n, kl, ku) = (a.n, a.kl, a.ku);
        let upper = kl + ku;
        let width = kl + upper + 1;
        let at = |i: usize, j: usize| i * width + (j + kl - i);
        let mut u = vec![0.0; n * width];
        let scale = a.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            for (j, v) in a.row(i) {
                u[at(i, j)] = v;
            }
        }
        let mut mult = vec![0.0; n * kl.max(1)];
        let mut perm = vec![0; n];
        let (mut pmin, mut pmax) = (f64::INFINITY, 0.0f64);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut r = k;
            for i in k + 1..=last_row {
                if u[at(i, k)].abs() > u[at(r, k)].abs() {
                    r = i;
                }
            }
            let piv = u[at(r, k)].abs();
            pmin = pmin.min(piv);
            pmax = pmax.max(piv);
            if !(piv > f64::EPSILON * scale * n as f64) {
                return Err(Error::SingularSystem {
                    pivot: k,
                    estimate: if piv > 0.0 { pmax / piv } else { f64::INFINITY },
                });
            }
            let last_col = (k + upper).min(n - 1);
            if r != k {
                for j in k..=last_col {
                    u.swap(at(k, j), at(r, j));
                }
            }
            perm[k] = r;
            let d = u[at(k, k)];
            for i in k + 1..=last_row {
                let l = u[at(i, k)] / d;
                mult[k * kl + (i - k - 1)] = l;
                if l != 0.0 {
                    for j in k + 1..=last_col {
                        u[at(i, j)] -= l * u[at(k, j)];
                    }
                }
                u[at(i, k)] = 0.0;
            }
        }
        Ok(BandLu {
            n,
            kl,
            width,
            upper,
            u,
            mult,
            perm,
            pivot_ratio: pmax / pmin,
        })
    }

    /// Ratio of largest to smallest pivot magnitude, a cheap conditioning proxy.
    pub fn pivot_ratio(&self) -> f64 {
        self.pivot_ratio
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, kl) = (self.n, self.kl);
        let at = |i: usize, j: usize| i * self.width + (j + kl - i);
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.perm[k]);
            let xk = x[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                x[i] -= self.mult[k * kl + (i - k - 1)] * xk;
            }
        }
        for k in (0..n).rev() {
            let mut acc = x[k];
            for j in k + 1..=(k + self.upper).min(n - 1) {
                acc -= self.u[at(k, j)] * x[j];
            }
            x[k] = acc / self.u[at(k, k)];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_eigenvalues_and_inverse() {
        let a = [2.0, 1.0, 1.0, 2.0];
        assert_eq!(sym_eigenvalues(2, &a), vec![1.0, 3.0]);
        let inv = invert(2, &a).unwrap();
        let id = matmul(2, &a, &inv);
        assert!((id[0] - 1.0).abs() < 1e-15 && id[1].abs() < 1e-15);
    }

    #[test]
    fn generalized_eigenvalues_match_scaled_problem() {
        let g = [4.0, 0.0, 0.0, 1.0];
        let s = [4.0, 0.0, 0.0, 3.0];
        let ev = sym_generalized_eigenvalues(2, &s, &g).unwrap();
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn band_lu_matches_dense_solution() {
        let n = 9;
        let mut a = BandMatrix::zeros(n, 2, 1);
        for i in 0..n {
            a.add(i, i, 0.1 + i as f64 * 0.01);
            if i >= 1 {
                a.add(i, i - 1, 1.0);
            }
            if i >= 2 {
                a.add(i, i - 2, -0.5);
            }
            if i + 1 < n {
                a.add(i, i + 1, 0.3);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let b = a.matvec(&x);
        let lu = BandLu::factor(&a).unwrap();
        let y = lu.solve(&b);
        for i in 0..n {
            assert!((x[i] - y[i]).abs() < 1e-12, "{i}: {} vs {}", x[i], y[i]);
        }
    }

    #[test]
    fn singular_band_is_reported() {
        let mut a = BandMatrix::zeros(3, 1, 1);
        a.add(0, 0, 1.0);
        a.add(1, 0, 1.0);
        a.add(2, 2, 1.0);
        assert!(matches!(BandLu::factor(&a), Err(Error::SingularSystem { pivot: 1, .. })));
    }

    #[test]
    fn scalar_implicit_euler_step() {
        let mut a = BandMatrix::zeros(1, 0, 0);
        a.add(0, 0, 1.1);
        let u1 = BandLu::factor(&a).unwrap().solve(&[1.0]);
        assert!((u1[0] - 1.0 / 1.1).abs() < 1e-16);
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::tensor_chart::{MetricField, TensorField};

/// Two-sided `ρ`-ellipticity constants of a coefficient field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EllipticityReport {
    /// `inf (a X|X)_g / (ρ²|X|²_g)` over points and directions.
    pub epsilon: f64,
    /// `sup (a X|X)_g / (ρ²|X|²_g)`.
    pub upper_const: f64,
    /// Smallest ratio seen along the seeded random directions (≥ `epsilon`).
    pub sampled_epsilon: f64,
    /// Grid index and coordinates where `epsilon` is attained.
    pub worst_point: usize,
    pub worst_coords: Vec<f64>,
    pub pass: bool,
}

/// Largest relative asymmetry of `g a` (`(g a)_{ij} = g_{ik} a^k_j`).
fn symmetry_defect(m: usize, ga: &[f64]) -> f64 {
    let scale = ga.iter().fold(1.0f64, |s, v| s.max(v.abs()));
    let mut d = 0.0f64;
    for i in 0..m {
        for j in 0..i {
            d = d.max((ga[i * m + j] - ga[j * m + i]).abs() / scale);
        }
    }
    d
}

/// Exact per-point generalized eigenvalues of `(g a, g)` give the optimal
/// constants; `n_directions` random directions are sampled as a cross-check.
pub fn check_rho_ellipticity(
    a: &TensorField,
    rho: &[f64],
    g: &MetricField,
    n_directions: usize,
    seed: u64,
) -> Result<EllipticityReport> {
    a.check_order(1, 1, "coefficient a")?;
    let m = g.dim();
    if a.npts() != g.npts() || rho.len() != g.npts() {
        return Err(Error::Shape("coefficient, ρ and metric sampled on different grids".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut eps, mut upper, mut sampled) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY);
    let mut worst = 0;
    for p in 0..g.npts() {
        let gp = g.g().at(p);
        let ga = linalg::matmul(m, gp, a.at(p));
        let defect = symmetry_defect(m, &ga);
        if defect > 1e-12 {
            return Err(Error::Symmetry {
                index: p,
                coords: g.grid().point(p).to_vec(),
                defect,
            });
        }
        let sym: Vec<f64> = (0..m * m)
            .map(|ij| 0.5 * (ga[ij] + ga[(ij % m) * m + ij / m]))
            .collect();
        let ev = linalg::sym_generalized_eigenvalues(m, &sym, gp).ok_or_else(|| Error::Conditioning {
            index: p,
            coords: g.grid().point(p).to_vec(),
            detail: "metric not positive definite".into(),
        })?;
        let r2 = rho[p] * rho[p];
        let lo = ev[0] / r2;
        if lo < eps {
            eps = lo;
            worst = p;
        }
        upper = upper.max(ev[m - 1] / r2);
        for _ in 0..n_directions {
            let x: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let gx = linalg::matvec(m, gp, &x);
            let nx: f64 = x.iter().zip(&gx).map(|(a, b)| a * b).sum();
            if nx <= 0.0 {
                continue;
            }
            let sx = linalg::matvec(m, &sym, &x);
            let ax: f64 = x.iter().zip(&sx).map(|(a, b)| a * b).sum();
            sampled = sampled.min(ax / (r2 * nx));
        }
    }
    Ok(EllipticityReport {
        epsilon: eps,
        upper_const: upper,
        sampled_epsilon: sampled,
        worst_point: worst,
        worst_coords: g.grid().point(worst).to_vec(),
        pass: eps > 0.0,
    })
}

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;

use super::functions::ExprMetric;
use super::models::Geometry;

/// A coordinate box `center ± radius` mapped affinely onto `[−1, 1]^m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Patch {
    pub center: Vec<f64>,
    pub radius: Vec<f64>,
}

impl Patch {
    fn samples(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let m = self.center.len();
        let total = per_axis.pow(m as u32);
        (0..total)
            .map(|mut k| {
                let mut x = vec![0.0; m];
                for a in (0..m).rev() {
                    let i = k % per_axis;
                    k /= per_axis;
                    let y = -1.0 + 2.0 * i as f64 / (per_axis - 1) as f64;
                    x[a] = self.center[a] + self.radius[a] * y;
                }
                x
            })
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.center.iter().zip(&self.radius))
            .all(|(xi, (c, r))| (xi - c).abs() <= *r * (1.0 + 1e-12))
    }
}

/// Empirical regularity constants measured on a family of patches.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityReport {
    pub k_max: usize,
    pub threshold: f64,
    /// Sup of the normalized derivatives of order `0..=k_max`.
    pub sup_norms: Vec<f64>,
    /// Two-sided equivalence constant (≥ 1).
    pub equivalence_ratio: f64,
    /// `sup |d log ρ|_{ĝ*}` for singularity-datum reports.
    pub log_derivative_sup: Option<f64>,
    /// Center of the patch attaining the equivalence ratio.
    pub worst_center: Vec<f64>,
    pub patches: usize,
    pub pass: bool,
}

/// Patches of unit size for `ĝ = g/ρ²`: radius along axis `a` is
/// `ρ(c) / (2 √g_aa(c))`, centers on a uniform lattice of the chart box.
pub fn hat_atlas(geo: &Geometry, centers_per_axis: usize) -> Vec<Patch> {
    let m = geo.dim();
    let (lo, hi) = (&geo.manifold.lo, &geo.manifold.hi);
    let n = centers_per_axis.max(2);
    let total = n.pow(m as u32);
    (0..total)
        .map(|mut k| {
            let mut c = vec![0.0; m];
            for a in (0..m).rev() {
                let i = k % n;
                k /= n;
                c[a] = lo[a] + (hi[a] - lo[a]) * i as f64 / (n - 1) as f64;
            }
            let g = geo.manifold.metric.g_at(&c);
            let rho = geo.datum.rho.value(&c);
            let radius = (0..m).map(|a| rho / (2.0 * g[a * m + a].sqrt())).collect();
            Patch { center: c, radius }
        })
        .collect()
}

fn check_inputs(k_max: usize, per_axis: usize) -> Result<()> {
    if k_max > 2 {
        return Err(Error::Resolution(format!("derivative order {k_max} exceeds the supported 2")));
    }
    if per_axis < 2 {
        return Err(Error::Resolution("at least 2 samples per axis are needed".into()));
    }
    Ok(())
}

/// Pulls `metric` back to `[−1,1]^m` on every patch and measures the
/// eigenvalue equivalence with the Euclidean metric and derivative sups.
pub fn check_uniform_regularity(
    metric: &ExprMetric,
    patches: &[Patch],
    k_max: usize,
    threshold: f64,
    per_axis: usize,
) -> Result<RegularityReport> {
    check_inputs(k_max, per_axis)?;
    let mut sups = vec![0.0f64; k_max + 1];
    let mut ratio = 1.0f64;
    let mut worst = Vec::new();
    for patch in patches {
        let r = &patch.radius;
        let m = r.len();
        for x in patch.samples(per_axis) {
            let g = metric.g_at(&x);
            let pulled: Vec<f64> = (0..m * m).map(|ij| r[ij / m] * r[ij % m] * g[ij]).collect();
            let ev = linalg::sym_eigenvalues(m, &pulled);
            let local = ev[m - 1].max(1.0 / ev[0]);
            if local > ratio || worst.is_empty() {
                ratio = ratio.max(local);
                worst = patch.center.clone();
            }
            sups[0] = pulled.iter().fold(sups[0], |s, v| s.max(v.abs()));
            if k_max >= 1 {
                let dg = crate::tensor_chart::MetricSource::eval(metric, &x).dg;
                for (idx, v) in dg.iter().enumerate() {
                    let (k, ij) = (idx / (m * m), idx % (m * m));
                    let s = r[k] * r[ij / m] * r[ij % m];
                    sups[1] = sups[1].max((s * v).abs());
                }
            }
            if k_max >= 2 {
                let d2 = metric.d2g_at(&x);
                for (idx, v) in d2.iter().enumerate() {
                    let (k, l, ij) = (idx / (m * m * m), (idx / (m * m)) % m, idx % (m * m));
                    let s = r[k] * r[l] * r[ij / m] * r[ij % m];
                    sups[2] = sups[2].max((s * v).abs());
                }
            }
        }
    }
    let pass = ratio <= threshold && sups.iter().all(|s| *s <= threshold);
    Ok(RegularityReport {
        k_max,
        threshold,
        sup_norms: sups,
        equivalence_ratio: ratio,
        log_derivative_sup: None,
        worst_center: worst,
        patches: patches.len(),
        pass,
    })
}

/// Measures `sup |∂^β(κ_*ρ)|/ρ_κ` for `|β| ≤ k_max`, the ratio `sup ρ / inf ρ`
/// per patch and `sup |d log ρ|_{ĝ*}`; `ρ_κ` is `ρ` at each patch center.
pub fn check_singularity_datum(
    geo: &Geometry,
    patches: &[Patch],
    k_max: usize,
    threshold: f64,
    per_axis: usize,
) -> Result<RegularityReport> {
    check_inputs(k_max, per_axis)?;
    let rho = &geo.datum.rho;
    let mut sups = vec![0.0f64; k_max + 1];
    let mut ratio = 1.0f64;
    let mut worst = Vec::new();
    let mut log_sup = 0.0f64;
    for patch in patches {
        let r = &patch.radius;
        let m = r.len();
        let rk = rho.value(&patch.center);
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for x in patch.samples(per_axis) {
            let v = rho.value(&x);
            if !(v > 0.0) {
                return Err(Error::Domain(format!("ρ = {v} at {x:?}")));
            }
            lo = lo.min(v);
            hi = hi.max(v);
            sups[0] = sups[0].max(v / rk);
            let d = rho.grad(&x);
            if k_max >= 1 {
                for a in 0..m {
                    sups[1] = sups[1].max((r[a] * d[a] / rk).abs());
                }
            }
            if k_max >= 2 {
                let h = rho.hessian(&x);
                for ab in 0..m * m {
                    sups[2] = sups[2].max((r[ab / m] * r[ab % m] * h[ab] / rk).abs());
                }
            }
            let g_inv = linalg::invert(m, &geo.manifold.metric.g_at(&x))
                .ok_or_else(|| Error::Domain(format!("singular metric at {x:?}")))?;
            let dd: f64 = (0..m * m).map(|ij| g_inv[ij] * d[ij / m] * d[ij % m]).sum();
            log_sup = log_sup.max(dd.max(0.0).sqrt());
        }
        if hi / lo > ratio || worst.is_empty() {
            ratio = ratio.max(hi / lo);
            worst = patch.center.clone();
        }
    }
    let pass = ratio <= threshold && log_sup <= threshold && sups.iter().all(|s| *s <= threshold);
    Ok(RegularityReport {
        k_max,
        threshold,
        sup_norms: sups,
        equivalence_ratio: ratio,
        log_derivative_sup: Some(log_sup),
        worst_center: worst,
        patches: patches.len(),
        pass,
    })
}

/// Overlap structure of a chain of normalized charts along axis 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionReport {
    pub charts: usize,
    /// Largest `|D(κ_k ∘ κ_j⁻¹)|` over overlapping pairs.
    pub max_jacobian: f64,
    /// Largest second derivative of a transition map (zero for affine charts).
    pub max_second_derivative: f64,
    /// Largest number of charts containing a sample point.
    pub multiplicity: usize,
    pub threshold: f64,
    pub pass: bool,
}

/// Marches unit-size patches (for `ĝ`) along axis 0 of the chart, each
/// new center placed one radius past the previous one, and reports the
/// transition-map regularity and the multiplicity of the resulting cover.
pub fn check_chart_transitions(geo: &Geometry, threshold: f64) -> Result<TransitionReport> {
    let m = geo.dim();
    let (lo, hi) = (geo.manifold.lo[0], geo.manifold.hi[0]);
    let mid: Vec<f64> = geo.manifold.center();
    let radius_at = |x0: f64| {
        let mut c = mid.clone();
        c[0] = x0;
        let g = geo.manifold.metric.g_at(&c);
        let rho = geo.datum.rho.value(&c);
        (0..m).map(|a| rho / (2.0 * g[a * m + a].sqrt())).collect::<Vec<_>>()
    };
    let mut patches = Vec::new();
    let mut c0 = lo;
    while c0 <= hi {
        let r = radius_at(c0);
        let mut center = mid.clone();
        center[0] = c0;
        c0 += r[0];
        patches.push(Patch { center, radius: r });
        if patches.len() > 100_000 {
            return Err(Error::Resolution("chart chain does not terminate".into()));
        }
    }
    let mut max_jac = 0.0f64;
    for (j, pj) in patches.iter().enumerate() {
        for pk in patches.iter().skip(j + 1) {
            let overlap = (pj.center[0] - pk.center[0]).abs() < pj.radius[0] + pk.radius[0];
            if !overlap {
                continue;
            }
            let jac = (0..m)
                .map(|a| (pj.radius[a] / pk.radius[a]).max(pk.radius[a] / pj.radius[a]))
                .fold(0.0, f64::max);
            max_jac = max_jac.max(jac);
        }
    }
    let mut multiplicity = 0;
    let samples = 20 * patches.len();
    for s in 0..=samples {
        let mut x = mid.clone();
        x[0] = lo + (hi - lo) * s as f64 / samples as f64;
        multiplicity = multiplicity.max(patches.iter().filter(|p| p.contains(&x)).count());
    }
    Ok(TransitionReport {
        charts: patches.len(),
        max_jacobian: max_jac,
        max_second_derivative: 0.0,
        multiplicity,
        threshold,
        pass: max_jac <= threshold && (multiplicity as f64) <= threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::models::*;

    #[test]
    fn euclidean_box_is_trivially_regular() {
        let geo = make_euclidean_box(2, &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let unit = vec![Patch { center: vec![0.5, 0.5], radius: vec![1.0, 1.0] }];
        let rep = check_uniform_regularity(&geo.manifold.metric, &unit, 2, 10.0, 5).unwrap();
        assert_eq!(rep.equivalence_ratio, 1.0);
        assert_eq!(&rep.sup_norms[1..], &[0.0, 0.0]);
        let sd = check_singularity_datum(&geo, &unit, 2, 10.0, 5).unwrap();
        assert_eq!(sd.sup_norms, vec![1.0, 0.0, 0.0]);
        assert_eq!(sd.equivalence_ratio, 1.0);
        assert!(rep.pass && sd.pass);
    }

    #[test]
    fn cusp_patch_ratio_is_three_to_the_alpha() {
        for alpha in [1.0, 2.0, 3.0] {
            let geo = make_cusp(alpha, Base::PointPair, 0.05, 1.0).unwrap();
            let t0 = 0.4;
            let p = vec![Patch { center: vec![t0], radius: vec![t0 / 2.0] }];
            let rep = check_singularity_datum(&geo, &p, 1, 100.0, 11).unwrap();
            let want = 3f64.powf(alpha);
            assert!((rep.equivalence_ratio - want).abs() < 1e-12 * want);
        }
    }

    #[test]
    fn raw_cusp_metric_degenerates_like_t_to_minus_two_alpha() {
        let mut ratios = Vec::new();
        for t_min in [0.1, 0.05, 0.025] {
            let geo = make_cusp(1.0, Base::PointPair, t_min, 1.0).unwrap();
            let p = hat_atlas(&geo, 9);
            let raw = check_uniform_regularity(&geo.manifold.metric, &p, 1, 10.0, 5).unwrap();
            let hat = check_uniform_regularity(&geo.hat_metric().unwrap(), &p, 2, 10.0, 5).unwrap();
            assert!(hat.pass, "{hat:?}");
            assert!(!raw.pass);
            ratios.push(raw.equivalence_ratio);
        }
        assert!((ratios[1] / ratios[0] - 4.0).abs() < 0.5);
        assert!((ratios[2] / ratios[1] - 4.0).abs() < 0.5);
    }

    #[test]
    fn poincare_datum_passes() {
        let geo = make_poincare_ball(2, 0.2, 0.8).unwrap();
        let rep = check_singularity_datum(&geo, &hat_atlas(&geo, 5), 2, 10.0, 5).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn funnel_chain_has_bounded_transitions() {
        let geo = make_funnel(1.0, Base::Circle, 1.0, 4.0).unwrap();
        let rep = check_chart_transitions(&geo, 10.0).unwrap();
        assert!(rep.pass && rep.charts > 3 && rep.multiplicity >= 2, "{rep:?}");
    }
}

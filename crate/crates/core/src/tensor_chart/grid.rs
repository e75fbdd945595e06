use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boundary role of a chart face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaceLabel {
    /// Part of the Dirichlet boundary `∂₀M`.
    Dirichlet,
    /// Part of the Neumann/Robin boundary `∂₁M`.
    Flux,
    /// Artificial cut of the domain (singular end or chart edge); receives
    /// auxiliary Dirichlet data from a reference solution.
    Truncation,
    Unlabeled,
}

impl FaceLabel {
    pub fn is_physical(self) -> bool {
        matches!(self, FaceLabel::Dirichlet | FaceLabel::Flux)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Low,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Face {
    pub axis: usize,
    pub side: Side,
}

impl Face {
    pub fn new(axis: usize, side: Side) -> Self {
        Face { axis, side }
    }

    /// Sign of the inward coordinate direction.
    pub fn inward_sign(&self) -> f64 {
        match self.side {
            Side::Low => 1.0,
            Side::High => -1.0,
        }
    }

    pub fn id(&self) -> usize {
        2 * self.axis + usize::from(self.side == Side::High)
    }

    pub fn from_id(id: usize) -> Self {
        let side = if id % 2 == 0 { Side::Low } else { Side::High };
        Face { axis: id / 2, side }
    }
}

/// Tensor-product grid on a coordinate box, axis 0 slowest in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartGrid {
    lo: Vec<f64>,
    hi: Vec<f64>,
    n: Vec<usize>,
    h: Vec<f64>,
    strides: Vec<usize>,
    labels: Vec<[FaceLabel; 2]>,
    points: Vec<f64>,
}

impl ChartGrid {
    pub fn new(lo: &[f64], hi: &[f64], n: &[usize]) -> Result<Self> {
        let m = lo.len();
        if m == 0 || hi.len() != m || n.len() != m {
            return Err(Error::Shape(format!(
                "grid needs matching extents and counts, got lo={}, hi={}, n={}",
                lo.len(),
                hi.len(),
                n.len()
            )));
        }
        for a in 0..m {
            if n[a] < 3 {
                return Err(Error::Resolution(format!(
                    "axis {a} has {} points, at least 3 are required",
                    n[a]
                )));
            }
            if !(hi[a] > lo[a]) || !lo[a].is_finite() || !hi[a].is_finite() {
                return Err(Error::Domain(format!(
                    "axis {a} extent [{}, {}] is empty or not finite",
                    lo[a], hi[a]
                )));
            }
        }
        let h: Vec<f64> = (0..m).map(|a| (hi[a] - lo[a]) / (n[a] - 1) as f64).collect();
        let mut strides = vec![1usize; m];
        for a in (0..m.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * n[a + 1];
        }
        let npts: usize = n.iter().product();
        let mut points = Vec::with_capacity(npts * m);
        let mut idx = vec![0usize; m];
        for _ in 0..npts {
            for a in 0..m {
                // Pin the last node to the upper extent so faces sit exactly on it.
                let x = if idx[a] == n[a] - 1 {
                    hi[a]
                } else {
                    lo[a] + idx[a] as f64 * h[a]
                };
                points.push(x);
            }
            for a in (0..m).rev() {
                idx[a] += 1;
                if idx[a] < n[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
        Ok(ChartGrid {
            lo: lo.to_vec(),
            hi: hi.to_vec(),
            n: n.to_vec(),
            h,
            strides,
            labels: vec![[FaceLabel::Unlabeled; 2]; m],
            points,
        })
    }

    pub fn with_labels(mut self, labels: &[[FaceLabel; 2]]) -> Result<Self> {
        if labels.len() != self.dim() {
            return Err(Error::Shape(format!(
                "{} face label pairs for a {}-dimensional grid",
                labels.len(),
                self.dim()
            )));
        }
        self.labels = labels.to_vec();
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.n.len()
    }

    pub fn npts(&self) -> usize {
        self.points.len() / self.dim()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn counts(&self) -> &[usize] {
        &self.n
    }

    pub fn spacing(&self) -> &[f64] {
        &self.h
    }

    /// Largest spacing over all axes.
    pub fn h_max(&self) -> f64 {
        self.h.iter().cloned().fold(0.0, f64::max)
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    pub fn point(&self, p: usize) -> &[f64] {
        let m = self.dim();
        &self.points[p * m..(p + 1) * m]
    }

    pub fn index_along(&self, p: usize, axis: usize) -> usize {
        (p / self.strides[axis]) % self.n[axis]
    }

    pub fn multi_index(&self, p: usize) -> Vec<usize> {
        (0..self.dim()).map(|a| self.index_along(p, a)).collect()
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn label(&self, face: Face) -> FaceLabel {
        self.labels[face.axis][usize::from(face.side == Side::High)]
    }

    pub fn labels(&self) -> &[[FaceLabel; 2]] {
        &self.labels
    }

    pub fn faces(&self) -> Vec<Face> {
        (0..2 * self.dim()).map(Face::from_id).collect()
    }

    pub fn on_face(&self, p: usize, face: Face) -> bool {
        let i = self.index_along(p, face.axis);
        match face.side {
            Side::Low => i == 0,
            Side::High => i == self.n[face.axis] - 1,
        }
    }

    /// Grid points lying on a face, in increasing flat order.
    pub fn face_points(&self, face: Face) -> Vec<usize> {
        (0..self.npts()).filter(|&p| self.on_face(p, face)).collect()
    }

    pub fn is_boundary(&self, p: usize) -> bool {
        (0..self.dim()).any(|a| {
            let i = self.index_along(p, a);
            i == 0 || i == self.n[a] - 1
        })
    }

    /// Distance (in nodes) from the nearest face.
    pub fn depth(&self, p: usize) -> usize {
        (0..self.dim())
            .map(|a| {
                let i = self.index_along(p, a);
                i.min(self.n[a] - 1 - i)
            })
            .min()
            .unwrap_or(0)
    }

    /// Points at least `collar` nodes away from every face.
    pub fn interior_points(&self, collar: usize) -> Vec<usize> {
        (0..self.npts()).filter(|&p| self.depth(p) >= collar).collect()
    }

    /// Neighbour offset along `axis`, `None` if it leaves the grid.
    pub fn neighbor(&self, p: usize, axis: usize, offset: isize) -> Option<usize> {
        let i = self.index_along(p, axis) as isize + offset;
        if i < 0 || i >= self.n[axis] as isize {
            return None;
        }
        Some((p as isize + offset * self.strides[axis] as isize) as usize)
    }

    /// Trapezoidal quadrature weights (cell volume in coordinates, no metric).
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        (0..self.npts())
            .map(|p| {
                (0..self.dim())
                    .map(|a| {
                        let i = self.index_along(p, a);
                        if i == 0 || i == self.n[a] - 1 {
                            0.5 * self.h[a]
                        } else {
                            self.h[a]
                        }
                    })
                    .product()
            })
            .collect()
    }

    /// Partial derivative along `axis` of a strided field with `ncomp`
    /// components per point: centered second order in the interior,
    /// second-order one-sided at the faces.
    pub fn partial(&self, data: &[f64], ncomp: usize, axis: usize) -> Vec<f64> {
        let npts = self.npts();
        debug_assert_eq!(data.len(), npts * ncomp);
        let s = self.strides[axis] * ncomp;
        let n = self.n[axis];
        let inv2h = 0.5 / self.h[axis];
        let mut out = vec![0.0; data.len()];
        for p in 0..npts {
            let i = self.index_along(p, axis);
            let base = p * ncomp;
            for c in 0..ncomp {
                let k = base + c;
                out[k] = if i == 0 {
                    (-3.0 * data[k] + 4.0 * data[k + s] - data[k + 2 * s]) * inv2h
                } else if i == n - 1 {
                    (3.0 * data[k] - 4.0 * data[k - s] + data[k - 2 * s]) * inv2h
                } else {
                    (data[k + s] - data[k - s]) * inv2h
                };
            }
        }
        out
    }

    /// Same grid with the node count per axis multiplied by `2^level` intervals.
    pub fn refined(&self, level: u32) -> Result<ChartGrid> {
        let n: Vec<usize> = self
            .n
            .iter()
            .map(|&k| (k - 1) * (1usize << level) + 1)
            .collect();
        ChartGrid::new(&self.lo, &self.hi, &n)?.with_labels(&self.labels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_and_empty_axes() {
        assert!(matches!(
            ChartGrid::new(&[0.0], &[1.0], &[2]),
            Err(Error::Resolution(_))
        ));
        assert!(matches!(
            ChartGrid::new(&[1.0], &[1.0], &[5]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn layout_is_row_major_axis0_slowest() {
        let g = ChartGrid::new(&[0.0, 0.0], &[1.0, 2.0], &[3, 5]).unwrap();
        assert_eq!(g.npts(), 15);
        assert_eq!(g.stride(0), 5);
        assert_eq!(g.stride(1), 1);
        assert_eq!(g.point(7), &[0.5, 1.0]);
        assert_eq!(g.multi_index(7), vec![1, 2]);
        assert_eq!(g.flat_index(&[2, 4]), 14);
        assert_eq!(g.point(14), &[1.0, 2.0]);
    }

    #[test]
    fn partial_is_exact_on_quadratics() {
        let g = ChartGrid::new(&[0.0], &[1.0], &[6]).unwrap();
        let f: Vec<f64> = (0..6).map(|p| g.point(p)[0].powi(2)).collect();
        let d = g.partial(&f, 1, 0);
        for p in 0..6 {
            assert!((d[p] - 2.0 * g.point(p)[0]).abs() < 1e-13);
        }
    }

    #[test]
    fn faces_and_depth() {
        let g = ChartGrid::new(&[0.0, 0.0], &[1.0, 1.0], &[5, 5]).unwrap();
        assert_eq!(g.face_points(Face::new(0, Side::Low)), vec![0, 1, 2, 3, 4]);
        assert_eq!(g.interior_points(2), vec![12]);
        assert_eq!(g.neighbor(12, 0, 1), Some(17));
        assert_eq!(g.neighbor(20, 0, 1), None);
        let w: f64 = g.trapezoid_weights().iter().sum();
        assert!((w - 1.0).abs() < 1e-14);
    }
}

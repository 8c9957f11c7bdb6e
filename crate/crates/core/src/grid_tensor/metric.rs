use super::field::{sym_index, Rank, TensorField};
use super::grid::{Grid, MAX_DIM};
use crate::error::{LabError, Result};

/// Relative eigenvalue threshold below which a metric counts as degenerate.
pub const DEGENERACY_THRESHOLD: f64 = 1e-10;

pub(crate) type Mat = [[f64; MAX_DIM]; MAX_DIM];

/// Smallest and largest eigenvalue of the leading `n x n` block of a
/// symmetric matrix, in closed form.
pub fn sym_eigen_range(m: &Mat, n: usize) -> (f64, f64) {
    if n == 2 {
        let mean = 0.5 * (m[0][0] + m[1][1]);
        let half = 0.5 * (m[0][0] - m[1][1]);
        let rad = half.hypot(m[0][1]);
        return (mean - rad, mean + rad);
    }
    let off = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
    if off == 0.0 {
        let d = [m[0][0], m[1][1], m[2][2]];
        return (d[0].min(d[1]).min(d[2]), d[0].max(d[1]).max(d[2]));
    }
    // trigonometric solution of the characteristic cubic
    let q = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
    let p2 = (m[0][0] - q).powi(2) + (m[1][1] - q).powi(2) + (m[2][2] - q).powi(2) + 2.0 * off;
    let p = (p2 / 6.0).sqrt();
    let b = |i: usize, j: usize| (m[i][j] - if i == j { q } else { 0.0 }) / p;
    let det = b(0, 0) * (b(1, 1) * b(2, 2) - b(1, 2) * b(2, 1)) - b(0, 1) * (b(1, 0) * b(2, 2) - b(1, 2) * b(2, 0))
        + b(0, 2) * (b(1, 0) * b(2, 1) - b(1, 1) * b(2, 0));
    let phi = (0.5 * det).clamp(-1.0, 1.0).acos() / 3.0;
    let hi = q + 2.0 * p * phi.cos();
    let lo = q + 2.0 * p * (phi + 2.0 * std::f64::consts::FRAC_PI_3).cos();
    (lo.min(hi), hi.max(lo))
}

/// Determinant and inverse of the leading `n x n` block (n = 2 or 3).
pub(crate) fn det_inverse(m: &Mat, n: usize) -> (f64, Mat) {
    let mut inv = [[0.0; MAX_DIM]; MAX_DIM];
    if n == 2 {
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        inv[0][0] = m[1][1] / det;
        inv[1][1] = m[0][0] / det;
        inv[0][1] = -m[0][1] / det;
        inv[1][0] = -m[1][0] / det;
        return (det, inv);
    }
    let c00 = m[1][1] * m[2][2] - m[1][2] * m[2][1];
    let c01 = m[1][2] * m[2][0] - m[1][0] * m[2][2];
    let c02 = m[1][0] * m[2][1] - m[1][1] * m[2][0];
    let det = m[0][0] * c00 + m[0][1] * c01 + m[0][2] * c02;
    inv[0][0] = c00 / det;
    inv[1][0] = c01 / det;
    inv[2][0] = c02 / det;
    inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
    inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
    inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
    inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
    inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
    inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
    (det, inv)
}

/// Checks positive definiteness: smallest eigenvalue above `1e-10 * trace`.
pub(crate) fn check_positive(m: &Mat, n: usize, node: usize) -> Result<()> {
    let trace: f64 = (0..n).map(|i| m[i][i]).sum();
    let (lo, _) = sym_eigen_range(m, n);
    let threshold = DEGENERACY_THRESHOLD * trace.abs();
    if !(lo > threshold) || !(trace > 0.0) {
        return Err(LabError::Degenerate { node, min_eig: lo, threshold });
    }
    Ok(())
}

/// Riemannian metric `g_ij` on a grid with cached inverse and volume density.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField {
    g: TensorField,
    inverse: TensorField,
    sqrt_det: TensorField,
}

impl MetricField {
    /// Validates positive definiteness and builds the caches.
    pub fn new(g: TensorField) -> Result<Self> {
        if g.rank() != Rank::SymCov2 {
            return Err(LabError::invalid("metric must be a symmetric covariant 2-tensor"));
        }
        g.check_finite("metric")?;
        let grid = *g.grid();
        let n = grid.dim();
        let mut inverse = TensorField::zeros(grid, Rank::SymContra2);
        let mut sqrt_det = TensorField::zeros(grid, Rank::Scalar);
        for node in 0..grid.len() {
            let m = g.sym_matrix(node);
            check_positive(&m, n, node)?;
            let (det, inv) = det_inverse(&m, n);
            sqrt_det.set(node, 0, det.sqrt());
            for i in 0..n {
                for j in i..n {
                    inverse.set(node, sym_index(n, i, j), inv[i][j]);
                }
            }
        }
        Ok(Self { g, inverse, sqrt_det })
    }

    /// The flat metric `g_eucl`.
    pub fn euclidean(grid: Grid) -> Self {
        Self::from_perturbation(&TensorField::zeros(grid, Rank::SymCov2))
            .expect("euclidean metric is positive definite")
    }

    /// `g = g_eucl + h`.
    pub fn from_perturbation(h: &TensorField) -> Result<Self> {
        if h.rank() != Rank::SymCov2 {
            return Err(LabError::invalid("perturbation must be a symmetric covariant 2-tensor"));
        }
        let n = h.grid().dim();
        let mut g = h.clone();
        for i in 0..n {
            g.component_mut(sym_index(n, i, i)).iter_mut().for_each(|v| *v += 1.0);
        }
        Self::new(g)
    }

    /// Conformally flat metric `e^{2u} g_eucl`.
    pub fn conformal(u: &TensorField) -> Result<Self> {
        if u.rank() != Rank::Scalar {
            return Err(LabError::invalid("conformal factor must be a scalar field"));
        }
        let grid = *u.grid();
        let n = grid.dim();
        let mut g = TensorField::zeros(grid, Rank::SymCov2);
        for node in 0..grid.len() {
            let f = (2.0 * u.get(node, 0)).exp();
            for i in 0..n {
                g.set(node, sym_index(n, i, i), f);
            }
        }
        Self::new(g)
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        self.g.grid()
    }

    #[inline]
    pub fn tensor(&self) -> &TensorField {
        &self.g
    }

    #[inline]
    pub fn inverse(&self) -> &TensorField {
        &self.inverse
    }

    /// `sqrt(det g)` per node (the Riemannian volume density).
    #[inline]
    pub fn sqrt_det(&self) -> &TensorField {
        &self.sqrt_det
    }

    pub fn into_tensor(self) -> TensorField {
        self.g
    }

    /// `h = g - g_eucl`.
    pub fn perturbation(&self) -> TensorField {
        let n = self.grid().dim();
        let mut h = self.g.clone();
        for i in 0..n {
            h.component_mut(sym_index(n, i, i)).iter_mut().for_each(|v| *v -= 1.0);
        }
        h
    }

    pub fn matrix(&self, node: usize) -> Mat {
        self.g.sym_matrix(node)
    }

    pub fn inverse_matrix(&self, node: usize) -> Mat {
        self.inverse.sym_matrix(node)
    }

    /// Smallest `Λ ≥ 1` with `Λ^{-1} g_eucl ≤ g ≤ Λ g_eucl` at every node.
    pub fn bilipschitz(&self) -> f64 {
        let n = self.grid().dim();
        (0..self.grid().len())
            .map(|node| {
                let (lo, hi) = sym_eigen_range(&self.matrix(node), n);
                hi.max(1.0 / lo).max(1.0)
            })
            .fold(1.0, f64::max)
    }

    /// Largest eigenvalue of `g^{-1}` over the grid.
    pub fn max_inverse_eigenvalue(&self) -> f64 {
        let n = self.grid().dim();
        (0..self.grid().len()).map(|node| sym_eigen_range(&self.inverse_matrix(node), n).1).fold(0.0, f64::max)
    }

    /// `∫ f dV_g` by the trapezoidal (periodic) rule.
    pub fn integrate(&self, f: &TensorField) -> f64 {
        let vol = self.grid().cell_volume();
        f.component(0).iter().zip(self.sqrt_det.component(0)).map(|(a, b)| a * b).sum::<f64>() * vol
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_and_volume_consistent() {
        let grid = Grid::new(3, 16, 0.2).unwrap();
        let h = TensorField::from_fn(grid, Rank::SymCov2, |p, out| {
            out[0] = 0.1 * p[0].sin();
            out[1] = 0.05 * p[1].cos();
            out[4] = -0.03 * (p[0] + p[2]).sin();
            out[5] = 0.02;
        });
        let g = MetricField::from_perturbation(&h).unwrap();
        for node in [0, 77, 2000] {
            let m = g.matrix(node);
            let inv = g.inverse_matrix(node);
            for i in 0..3 {
                for j in 0..3 {
                    let p: f64 = (0..3).map(|k| m[i][k] * inv[k][j]).sum();
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((p - e).abs() < 1e-12);
                }
            }
            let (det, _) = det_inverse(&m, 3);
            assert!((g.sqrt_det().get(node, 0) - det.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_form_eigenvalues_match_nalgebra() {
        use rand::{Rng, SeedableRng};
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let mut m = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in i..3 {
                    let v = r.gen_range(-1.0..1.0) + if i == j { 2.0 } else { 0.0 };
                    m[i][j] = v;
                    m[j][i] = v;
                }
            }
            let ev = nalgebra::Matrix3::from_fn(|i, j| m[i][j]).symmetric_eigenvalues();
            let (lo, hi) = sym_eigen_range(&m, 3);
            assert!((lo - ev.min()).abs() < 1e-12 && (hi - ev.max()).abs() < 1e-12);
            let ev2 = nalgebra::Matrix2::from_fn(|i, j| m[i][j]).symmetric_eigenvalues();
            let (lo, hi) = sym_eigen_range(&m, 2);
            assert!((lo - ev2.min()).abs() < 1e-12 && (hi - ev2.max()).abs() < 1e-12);
        }
    }

    #[test]
    fn euclidean_bilipschitz_is_one() {
        let grid = Grid::new(2, 16, 0.1).unwrap();
        assert_eq!(MetricField::euclidean(grid).bilipschitz(), 1.0);
        let u = TensorField::scalar_from_fn(grid, |p| 0.01 * p[0].cos());
        assert!(MetricField::conformal(&u).unwrap().bilipschitz() > 1.0);
    }

    #[test]
    fn degenerate_metric_rejected() {
        let grid = Grid::new(2, 16, 0.1).unwrap();
        let h = TensorField::from_fn(grid, Rank::SymCov2, |p, out| {
            if p[0] == 0.0 && p[1] == 0.0 {
                out[0] = -1.0;
            }
        });
        assert!(matches!(MetricField::from_perturbation(&h), Err(LabError::Degenerate { .. })));
    }
}

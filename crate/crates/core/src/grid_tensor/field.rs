use super::grid::{Grid, MAX_DIM};
use crate::error::{LabError, Result};

/// Index layout of the components stored at each node.
///
/// Symmetric slots share one stored component: a symmetric 2-tensor keeps the
/// upper triangle `(0,0), (0,1), .., (1,1), ..` and the Riemann tensor keeps
/// the upper triangle of its antisymmetric-pair matrix `R_{[ij][kl]}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rank {
    Scalar,
    /// Contravariant vector `X^i`.
    Vector,
    /// Covariant vector `w_i`.
    Covector,
    /// Symmetric covariant 2-tensor `h_ij`.
    SymCov2,
    /// Symmetric contravariant 2-tensor `g^ij`.
    SymContra2,
    /// Christoffel symbols `Γ^k_ij`, symmetric in `ij`.
    Christoffel,
    /// Fully lowered Riemann tensor `Rm_ijkl` in pair-compressed storage.
    Riemann,
}

impl Rank {
    pub fn components(self, dim: usize) -> usize {
        let s = dim * (dim + 1) / 2;
        let p = dim * (dim - 1) / 2;
        match self {
            Rank::Scalar => 1,
            Rank::Vector | Rank::Covector => dim,
            Rank::SymCov2 | Rank::SymContra2 => s,
            Rank::Christoffel => dim * s,
            Rank::Riemann => p * (p + 1) / 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Rank::Scalar => "scalar",
            Rank::Vector => "vector",
            Rank::Covector => "covector",
            Rank::SymCov2 => "sym_cov2",
            Rank::SymContra2 => "sym_contra2",
            Rank::Christoffel => "christoffel",
            Rank::Riemann => "riemann",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [Rank::Scalar, Rank::Vector, Rank::Covector, Rank::SymCov2, Rank::SymContra2, Rank::Christoffel, Rank::Riemann]
            .into_iter()
            .find(|r| r.name() == name)
    }
}

/// Storage slot of the symmetric pair `(i, j)` in dimension `dim`.
#[inline]
pub fn sym_index(dim: usize, i: usize, j: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    a * dim - a * (a + 1) / 2 + b
}

/// Slot of the antisymmetric pair `i < j`; `None` on the diagonal.
#[inline]
pub fn pair_index(dim: usize, i: usize, j: usize) -> Option<(usize, f64)> {
    if i == j {
        return None;
    }
    let (a, b, sign) = if i < j { (i, j, 1.0) } else { (j, i, -1.0) };
    // pairs ordered (0,1), (0,2), (1,2)
    let idx = a * (2 * dim - a - 1) / 2 + (b - a - 1);
    Some((idx, sign))
}

/// Real-valued tensor field on a [`Grid`], stored component-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    grid: Grid,
    rank: Rank,
    data: Vec<f64>,
}

impl TensorField {
    pub fn zeros(grid: Grid, rank: Rank) -> Self {
        let n = rank.components(grid.dim()) * grid.len();
        Self { grid, rank, data: vec![0.0; n] }
    }

    pub fn from_data(grid: Grid, rank: Rank, data: Vec<f64>) -> Result<Self> {
        let expected = rank.components(grid.dim()) * grid.len();
        if data.len() != expected {
            return Err(LabError::invalid(format!(
                "expected {expected} values for a {} field, got {}",
                rank.name(),
                data.len()
            )));
        }
        Ok(Self { grid, rank, data })
    }

    /// Scalar field sampled from a function of position.
    pub fn scalar_from_fn(grid: Grid, f: impl Fn([f64; MAX_DIM]) -> f64) -> Self {
        let data = (0..grid.len()).map(|i| f(grid.position(i))).collect();
        Self { grid, rank: Rank::Scalar, data }
    }

    /// Field whose components at each node are written by `f(position, out)`.
    pub fn from_fn(grid: Grid, rank: Rank, f: impl Fn([f64; MAX_DIM], &mut [f64])) -> Self {
        let nc = rank.components(grid.dim());
        let mut field = Self::zeros(grid, rank);
        let mut buf = vec![0.0; nc];
        for node in 0..grid.len() {
            buf.iter_mut().for_each(|v| *v = 0.0);
            f(grid.position(node), &mut buf);
            for (c, v) in buf.iter().enumerate() {
                field.data[c * grid.len() + node] = *v;
            }
        }
        field
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn rank(&self) -> Rank {
        self.rank
    }

    #[inline]
    pub fn n_components(&self) -> usize {
        self.rank.components(self.grid.dim())
    }

    #[inline]
    pub fn component(&self, c: usize) -> &[f64] {
        let n = self.grid.len();
        &self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn component_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.grid.len();
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, node: usize, c: usize) -> f64 {
        self.data[c * self.grid.len() + node]
    }

    #[inline]
    pub fn set(&mut self, node: usize, c: usize, v: f64) {
        let n = self.grid.len();
        self.data[c * n + node] = v;
    }

    /// Raw component-major storage.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Components at one node, in storage order.
    pub fn node_values(&self, node: usize) -> Vec<f64> {
        (0..self.n_components()).map(|c| self.get(node, c)).collect()
    }

    /// Full symmetric matrix at a node for 2-tensor ranks.
    pub fn sym_matrix(&self, node: usize) -> [[f64; MAX_DIM]; MAX_DIM] {
        debug_assert!(matches!(self.rank, Rank::SymCov2 | Rank::SymContra2));
        let n = self.grid.dim();
        let mut m = [[0.0; MAX_DIM]; MAX_DIM];
        for i in 0..n {
            for j in i..n {
                let v = self.get(node, sym_index(n, i, j));
                m[i][j] = v;
                m[j][i] = v;
            }
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn check_finite(&self, what: &str) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(k) => Err(LabError::NonFinite(format!(
                "{what}: component {} at node {}",
                k / self.grid.len(),
                k % self.grid.len()
            ))),
        }
    }

    fn check_compatible(&self, other: &TensorField) -> Result<()> {
        self.grid.check_same(&other.grid)?;
        if self.rank != other.rank {
            return Err(LabError::invalid(format!("rank mismatch: {} vs {}", self.rank.name(), other.rank.name())));
        }
        Ok(())
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &TensorField) -> Result<TensorField> {
        self.check_compatible(other)?;
        let data = self.data.iter().zip(&other.data).map(|(x, y)| x + a * y).collect();
        Ok(Self { grid: self.grid, rank: self.rank, data })
    }

    pub fn add_scaled(&mut self, a: f64, other: &TensorField) -> Result<()> {
        self.check_compatible(other)?;
        self.data.iter_mut().zip(&other.data).for_each(|(x, y)| *x += a * y);
        Ok(())
    }

    pub fn sub(&self, other: &TensorField) -> Result<TensorField> {
        self.axpy(-1.0, other)
    }

    pub fn scale(&self, a: f64) -> TensorField {
        let data = self.data.iter().map(|x| a * x).collect();
        Self { grid: self.grid, rank: self.rank, data }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> TensorField {
        let data = self.data.iter().map(|&x| f(x)).collect();
        Self { grid: self.grid, rank: self.rank, data }
    }

    /// Pointwise norm in the Euclidean frame.
    ///
    /// Scalars use the absolute value, vectors the Euclidean length, and
    /// symmetric 2-tensors the spectral norm (largest |eigenvalue|), which
    /// is the natural norm for C0 closeness of metrics. Christoffel and
    /// Riemann fields use the Frobenius norm of the full tensor.
    pub fn pointwise_norm(&self, node: usize) -> f64 {
        let n = self.grid.dim();
        match self.rank {
            Rank::Scalar => self.get(node, 0).abs(),
            Rank::Vector | Rank::Covector => (0..n).map(|c| self.get(node, c).powi(2)).sum::<f64>().sqrt(),
            Rank::SymCov2 | Rank::SymContra2 => {
                let (lo, hi) = super::metric::sym_eigen_range(&self.sym_matrix(node), n);
                lo.abs().max(hi.abs())
            }
            Rank::Christoffel => {
                let s = n * (n + 1) / 2;
                let mut acc = 0.0;
                for k in 0..n {
                    for i in 0..n {
                        for j in 0..n {
                            acc += self.get(node, k * s + sym_index(n, i, j)).powi(2);
                        }
                    }
                }
                acc.sqrt()
            }
            Rank::Riemann => {
                let p = n * (n - 1) / 2;
                let mut acc = 0.0;
                for a in 0..p {
                    for b in 0..p {
                        // each pair entry stands for 4 index orderings
                        acc += 4.0 * self.get(node, sym_index(p, a, b)).powi(2);
                    }
                }
                acc.sqrt()
            }
        }
    }

    /// Minimum and maximum of a scalar field.
    pub fn min_max(&self) -> (f64, f64) {
        self.component(0).iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

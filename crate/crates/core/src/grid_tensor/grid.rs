use crate::error::{LabError, Result};

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 3;

/// Periodic lattice of `n_ax^dim` nodes with uniform spacing.
///
/// Node `c` (lattice coordinate) sits at position `(c - origin) * dx`, so the
/// marked point `o` is the coordinate origin. Node indices are row-major with
/// the last axis fastest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    n_ax: usize,
    dx: f64,
    origin: [usize; MAX_DIM],
}

impl Grid {
    pub const MIN_POINTS: usize = 16;

    /// Builds a grid with the origin at the central node `n_ax / 2`.
    pub fn new(dim: usize, n_ax: usize, dx: f64) -> Result<Self> {
        let mut origin = [0; MAX_DIM];
        for o in origin.iter_mut().take(dim) {
            *o = n_ax / 2;
        }
        Self::with_origin(dim, n_ax, dx, origin)
    }

    /// Grid with side length `side` split into `n_ax` cells per axis.
    pub fn with_side(dim: usize, n_ax: usize, side: f64) -> Result<Self> {
        Self::new(dim, n_ax, side / n_ax as f64)
    }

    pub fn with_origin(dim: usize, n_ax: usize, dx: f64, origin: [usize; MAX_DIM]) -> Result<Self> {
        if !(2..=MAX_DIM).contains(&dim) {
            return Err(LabError::invalid(format!("dimension must be 2 or 3, got {dim}")));
        }
        if n_ax < Self::MIN_POINTS {
            return Err(LabError::invalid(format!("need at least {} points per axis, got {n_ax}", Self::MIN_POINTS)));
        }
        if !(dx.is_finite() && dx > 0.0) {
            return Err(LabError::invalid(format!("spacing must be positive, got {dx}")));
        }
        for (a, &o) in origin.iter().enumerate() {
            let bad = if a < dim { o >= n_ax } else { o != 0 };
            if bad {
                return Err(LabError::invalid(format!("origin index {o} invalid on axis {a}")));
            }
        }
        Ok(Self { dim, n_ax, dx, origin })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn n_ax(&self) -> usize {
        self.n_ax
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Box side length `L = n_ax * dx`.
    #[inline]
    pub fn side(&self) -> f64 {
        self.n_ax as f64 * self.dx
    }

    /// Number of nodes.
    #[inline]
    pub fn len(&self) -> usize {
        self.n_ax.pow(self.dim as u32)
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Volume of one lattice cell, `dx^dim`.
    #[inline]
    pub fn cell_volume(&self) -> f64 {
        self.dx.powi(self.dim as i32)
    }

    #[inline]
    pub fn origin_coord(&self) -> [usize; MAX_DIM] {
        self.origin
    }

    /// Flat index stride of `axis`.
    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        self.n_ax.pow((self.dim - 1 - axis) as u32)
    }

    pub fn index(&self, coord: [usize; MAX_DIM]) -> usize {
        (0..self.dim).fold(0, |acc, a| acc * self.n_ax + coord[a] % self.n_ax)
    }

    pub fn coord(&self, mut index: usize) -> [usize; MAX_DIM] {
        let mut c = [0; MAX_DIM];
        for a in (0..self.dim).rev() {
            c[a] = index % self.n_ax;
            index /= self.n_ax;
        }
        c
    }

    /// Flat index of the marked point `o`.
    pub fn origin_node(&self) -> usize {
        self.index(self.origin)
    }

    /// Position of a node in the fundamental domain around `o`.
    pub fn position(&self, index: usize) -> [f64; MAX_DIM] {
        let c = self.coord(index);
        let mut p = [0.0; MAX_DIM];
        for a in 0..self.dim {
            p[a] = (c[a] as f64 - self.origin[a] as f64) * self.dx;
        }
        p
    }

    /// Minimum-image displacement from node `from` to node `to`.
    pub fn delta(&self, from: usize, to: usize) -> [f64; MAX_DIM] {
        let a = self.coord(from);
        let b = self.coord(to);
        let n = self.n_ax as isize;
        let mut d = [0.0; MAX_DIM];
        for ax in 0..self.dim {
            let mut k = b[ax] as isize - a[ax] as isize;
            if k > n / 2 {
                k -= n;
            } else if k < -(n / 2) {
                k += n;
            }
            d[ax] = k as f64 * self.dx;
        }
        d
    }

    /// Euclidean (g_eucl) minimum-image distance between two nodes.
    pub fn distance(&self, from: usize, to: usize) -> f64 {
        self.delta(from, to).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Whether a node lies in the middle half of the box (|x_a| < L/4 on
    /// every axis, measured from the box centre).
    pub fn in_middle_half(&self, index: usize) -> bool {
        let c = self.coord(index);
        let centre = self.n_ax as f64 / 2.0;
        (0..self.dim).all(|a| ((c[a] as f64 - centre).abs() * self.dx) < self.side() / 4.0)
    }

    /// Node whose lattice coordinate is `node` shifted by `offset` along `axis`.
    #[inline]
    pub fn shift(&self, node: usize, axis: usize, offset: isize) -> usize {
        let s = self.stride(axis);
        let c = (node / s) % self.n_ax;
        let n = self.n_ax as isize;
        let nc = (c as isize + offset).rem_euclid(n) as usize;
        node + nc * s - c * s
    }

    /// Whether two grids describe the same lattice.
    pub fn same_lattice(&self, other: &Grid) -> bool {
        self.dim == other.dim && self.n_ax == other.n_ax && self.dx == other.dx
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self.same_lattice(other) {
            Ok(())
        } else {
            Err(LabError::invalid("fields live on different grids"))
        }
    }
}

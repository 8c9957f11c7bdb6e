//! Fourth-order central differences, norms, ball reductions and cubic
//! resampling on periodic grids.

use super::field::{Rank, TensorField};
use super::grid::{Grid, MAX_DIM};
use crate::error::{LabError, Result};

/// Central stencil of formal order four for the `order`-th derivative.
///
/// Coefficients run over offsets `-h..=h` and must be divided by `dx^order`.
pub fn stencil(order: usize) -> &'static [f64] {
    const D1: [f64; 5] = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
    const D2: [f64; 5] = [-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0];
    const D3: [f64; 7] = [1.0 / 8.0, -1.0, 13.0 / 8.0, 0.0, -13.0 / 8.0, 1.0, -1.0 / 8.0];
    const D4: [f64; 7] = [-1.0 / 6.0, 2.0, -13.0 / 2.0, 28.0 / 3.0, -13.0 / 2.0, 2.0, -1.0 / 6.0];
    const ID: [f64; 1] = [1.0];
    match order {
        0 => &ID,
        1 => &D1,
        2 => &D2,
        3 => &D3,
        4 => &D4,
        _ => panic!("no stencil for derivative order {order}"),
    }
}

/// Half-width of [`stencil`].
pub fn half_width(order: usize) -> usize {
    stencil(order).len() / 2
}

/// Applies `coeffs * scale` along `axis` to one component slice.
pub(crate) fn apply_axis(grid: &Grid, src: &[f64], axis: usize, coeffs: &[f64], scale: f64, dst: &mut [f64]) {
    let n = grid.n_ax();
    let stride = grid.stride(axis);
    let h = coeffs.len() / 2;
    // wrap[c * len + k] = flat offset of the k-th tap for axis coordinate c
    let len = coeffs.len();
    let mut wrap = vec![0usize; n * len];
    for c in 0..n {
        for k in 0..len {
            let nc = (c as isize + k as isize - h as isize).rem_euclid(n as isize) as usize;
            wrap[c * len + k] = nc * stride;
        }
    }
    for (node, out) in dst.iter_mut().enumerate() {
        let c = (node / stride) % n;
        let base = node - c * stride;
        let taps = &wrap[c * len..(c + 1) * len];
        // pair taps symmetrically so that antisymmetric stencils cancel exactly
        let mut acc = coeffs[h] * src[base + taps[h]];
        for k in (1..=h).rev() {
            acc += coeffs[h + k] * src[base + taps[h + k]] + coeffs[h - k] * src[base + taps[h - k]];
        }
        *out = acc * scale;
    }
}

fn check_order(grid: &Grid, axis: usize, order: usize) -> Result<()> {
    if axis >= grid.dim() {
        return Err(LabError::invalid(format!("axis {axis} out of range for dimension {}", grid.dim())));
    }
    if order > 4 {
        return Err(LabError::invalid(format!("derivative order {order} > 4 is not supported")));
    }
    let hw = half_width(order);
    if 2 * order * hw >= grid.n_ax() {
        return Err(LabError::Sizing { order, half_width: hw, n_ax: grid.n_ax() });
    }
    Ok(())
}

/// `∂^m f / ∂x_axis^m` for every component, fourth-order accurate.
pub fn partial_derivative(f: &TensorField, axis: usize, order: usize) -> Result<TensorField> {
    let grid = *f.grid();
    check_order(&grid, axis, order)?;
    let mut out = TensorField::zeros(grid, f.rank());
    let scale = grid.dx().powi(-(order as i32));
    let coeffs = stencil(order);
    for c in 0..f.n_components() {
        apply_axis(&grid, f.component(c), axis, coeffs, scale, out.component_mut(c));
    }
    Ok(out)
}

/// Mixed partial `∂^α f` for a multi-index given as per-axis orders.
pub fn mixed_partial(f: &TensorField, orders: &[usize]) -> Result<TensorField> {
    let mut cur = f.clone();
    for (axis, &m) in orders.iter().enumerate() {
        if m > 0 {
            cur = partial_derivative(&cur, axis, m)?;
        }
    }
    Ok(cur)
}

/// All multi-indices of total order `m` in `dim` dimensions (per-axis orders).
pub fn multi_indices(dim: usize, m: usize) -> Vec<[usize; MAX_DIM]> {
    let mut out = Vec::new();
    for a in 0..=m {
        for b in 0..=(m - a) {
            let rest = m - a - b;
            match dim {
                2 if rest == 0 => out.push([a, b, 0]),
                3 => out.push([a, b, rest]),
                _ => {}
            }
        }
    }
    out
}

/// Largest pointwise Euclidean-frame norm over all nodes.
pub fn sup_norm(f: &TensorField) -> f64 {
    (0..f.grid().len()).map(|i| f.pointwise_norm(i)).fold(0.0, f64::max)
}

/// `max_{|α| = m} sup |∂^α f|`.
pub fn sup_derivative_norm(f: &TensorField, m: usize) -> Result<f64> {
    if m == 0 {
        return Ok(sup_norm(f));
    }
    let mut best: f64 = 0.0;
    for alpha in multi_indices(f.grid().dim(), m) {
        let d = mixed_partial(f, &alpha[..f.grid().dim()])?;
        best = best.max(sup_norm(&d));
    }
    Ok(best)
}

/// Nodes within Euclidean distance `radius` of `center` (closed ball).
pub fn ball_nodes(grid: &Grid, center: usize, radius: f64) -> Result<Vec<usize>> {
    if !(radius > 0.0) || radius >= grid.side() / 2.0 {
        return Err(LabError::invalid(format!("ball radius {radius} must lie in (0, L/2) with L = {}", grid.side())));
    }
    let reach = (radius / grid.dx()).floor() as isize;
    let dim = grid.dim();
    let r2 = radius * radius * (1.0 + 1e-12);
    let mut nodes = Vec::new();
    let mut offs = [0isize; MAX_DIM];
    let span = (2 * reach + 1) as usize;
    let total = span.pow(dim as u32);
    for flat in 0..total {
        let mut rem = flat;
        let mut d2 = 0.0;
        for o in offs.iter_mut().take(dim).rev() {
            *o = (rem % span) as isize - reach;
            rem /= span;
            d2 += (*o as f64 * grid.dx()).powi(2);
        }
        if d2 <= r2 {
            let mut node = center;
            for (axis, &o) in offs.iter().enumerate().take(dim) {
                node = grid.shift(node, axis, o);
            }
            nodes.push(node);
        }
    }
    Ok(nodes)
}

/// Minimum of a scalar field over the closed Euclidean ball `B(center, radius)`.
pub fn ball_infimum(f: &TensorField, center: usize, radius: f64) -> Result<f64> {
    if f.rank() != Rank::Scalar {
        return Err(LabError::invalid("ball_infimum needs a scalar field"));
    }
    let vals = f.component(0);
    Ok(ball_nodes(f.grid(), center, radius)?.into_iter().map(|i| vals[i]).fold(f64::INFINITY, f64::min))
}

#[inline]
fn cubic_weights(xi: f64) -> [f64; 4] {
    [
        -xi * (xi - 1.0) * (xi - 2.0) / 6.0,
        (xi + 1.0) * (xi - 1.0) * (xi - 2.0) / 2.0,
        -(xi + 1.0) * xi * (xi - 2.0) / 2.0,
        (xi + 1.0) * xi * (xi - 1.0) / 6.0,
    ]
}

/// Interpolation taps (flat node index, weight) for one position.
pub(crate) fn cubic_taps(grid: &Grid, pos: &[f64; MAX_DIM]) -> Vec<(usize, f64)> {
    let dim = grid.dim();
    let n = grid.n_ax() as isize;
    let origin = grid.origin_coord();
    let mut base = [0isize; MAX_DIM];
    let mut w = [[0.0; 4]; MAX_DIM];
    for a in 0..dim {
        let mut s = pos[a] / grid.dx() + origin[a] as f64;
        // snap to lattice so that node positions reproduce stored values exactly
        if (s - s.round()).abs() < 1e-9 {
            s = s.round();
        }
        // window keyed to the nearest node, so the stencil switch (where the
        // interpolant has a kink) sits at half-cells rather than at nodes
        let i0 = s.round();
        w[a] = cubic_weights(s - i0);
        base[a] = i0 as isize - 1;
    }
    let mut taps = Vec::with_capacity(4usize.pow(dim as u32));
    for flat in 0..4usize.pow(dim as u32) {
        let mut weight = 1.0;
        let mut node = 0usize;
        for a in 0..dim {
            let k = (flat / 4usize.pow((dim - 1 - a) as u32)) % 4;
            weight *= w[a][k];
            let c = (base[a] + k as isize).rem_euclid(n) as usize;
            node = node * grid.n_ax() + c;
        }
        taps.push((node, weight));
    }
    taps
}

/// Cubic (per axis) interpolation of every component at arbitrary positions.
///
/// Positions wrap periodically. The result is position-major: value `c` at
/// position `p` is `out[p * n_components + c]`.
pub fn resample(f: &TensorField, positions: &[[f64; MAX_DIM]]) -> Vec<f64> {
    let nc = f.n_components();
    let mut out = vec![0.0; positions.len() * nc];
    for (p, pos) in positions.iter().enumerate() {
        let taps = cubic_taps(f.grid(), pos);
        for c in 0..nc {
            let comp = f.component(c);
            out[p * nc + c] = taps.iter().map(|&(node, w)| w * comp[node]).sum();
        }
    }
    out
}

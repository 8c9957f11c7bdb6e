//! Curvature tensors and the DeTurck vector field of a metric on the grid.
//!
//! All tensors are evaluated node by node from the metric's 2-jet
//! `(g, ∂g, ∂²g)`, with derivatives taken by the fourth-order stencils of
//! [`crate::grid_tensor::diff`]. Christoffel symbols, the Riemann tensor and the
//! derivative of `X` are then formed algebraically, so no stencil is ever
//! applied twice in the same direction.

pub(crate) mod pointwise;

use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::grid_tensor::metric::{check_positive, det_inverse};
use crate::grid_tensor::{pair_index, partial_derivative, sym_index, Grid, MetricField, Rank, TensorField, MAX_DIM};
use pointwise::Jet;

/// First and second coordinate derivatives of a metric on every node.
#[derive(Debug, Clone)]
pub(crate) struct MetricJet<'a> {
    metric: &'a MetricField,
    d1: Vec<TensorField>,
    d2: Vec<TensorField>,
}

impl<'a> MetricJet<'a> {
    pub fn new(metric: &'a MetricField) -> Result<Self> {
        let g = metric.tensor();
        let n = metric.grid().dim();
        let d1 = (0..n).map(|a| partial_derivative(g, a, 1)).collect::<Result<Vec<_>>>()?;
        let mut d2 = vec![TensorField::zeros(*metric.grid(), Rank::SymCov2); n * (n + 1) / 2];
        for a in 0..n {
            for b in a..n {
                d2[sym_index(n, a, b)] =
                    if a == b { partial_derivative(g, a, 2)? } else { partial_derivative(&d1[a], b, 1)? };
            }
        }
        Ok(Self { metric, d1, d2 })
    }

    pub fn at<const N: usize>(&self, node: usize) -> Jet<N> {
        let mut jet = Jet {
            g: shrink(&self.metric.matrix(node)),
            ginv: shrink(&self.metric.inverse_matrix(node)),
            dg: [[[0.0; N]; N]; N],
            ddg: [[[[0.0; N]; N]; N]; N],
        };
        for a in 0..N {
            jet.dg[a] = shrink(&self.d1[a].sym_matrix(node));
            for b in a..N {
                let m = shrink(&self.d2[sym_index(N, a, b)].sym_matrix(node));
                jet.ddg[a][b] = m;
                jet.ddg[b][a] = m;
            }
        }
        jet
    }

    /// Evaluates `f` on every node in parallel, keeping node order.
    pub fn map_jets<const N: usize, T: Send>(&self, f: impl Fn(&Jet<N>) -> T + Sync) -> Vec<T> {
        (0..self.metric.grid().len()).into_par_iter().map(|node| f(&self.at::<N>(node))).collect()
    }
}

fn shrink<const N: usize>(m: &[[f64; MAX_DIM]; MAX_DIM]) -> [[f64; N]; N] {
    let mut out = [[0.0; N]; N];
    for i in 0..N {
        out[i].copy_from_slice(&m[i][..N]);
    }
    out
}

/// Curvature quantities of one metric.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureBundle {
    /// `Γ^k_ij`, component `k * n(n+1)/2 + sym_index(i, j)`.
    pub christoffel: TensorField,
    /// Fully lowered `Rm_ijkl` in antisymmetric-pair storage.
    pub riemann: TensorField,
    pub ricci: TensorField,
    pub scalar: TensorField,
    /// DeTurck field `X(g)` relative to `g_eucl`.
    pub deturck: TensorField,
    /// `|Rm|_g` per node.
    pub rm_norm: TensorField,
    /// `|Ric|_g^2` per node.
    pub ric_norm_sq: TensorField,
}

impl CurvatureBundle {
    /// Full `Rm_ijkl` at one node, expanded from pair storage.
    pub fn riemann_at(&self, node: usize, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let n = self.riemann.grid().dim();
        match (pair_index(n, i, j), pair_index(n, k, l)) {
            (Some((a, sa)), Some((b, sb))) => {
                let p = n * (n - 1) / 2;
                sa * sb * self.riemann.get(node, sym_index(p, a, b))
            }
            _ => 0.0,
        }
    }

    pub fn christoffel_at(&self, node: usize, k: usize, i: usize, j: usize) -> f64 {
        let n = self.christoffel.grid().dim();
        let s = n * (n + 1) / 2;
        self.christoffel.get(node, k * s + sym_index(n, i, j))
    }
}

const NODE_SLOTS: usize = 18 + 6 + 6 + 3 + 3;

/// Christoffel symbols, Riemann, Ricci and scalar curvature, and the DeTurck field.
pub fn compute_curvature(g: &MetricField) -> Result<CurvatureBundle> {
    let jet = MetricJet::new(g)?;
    let bundle = match g.grid().dim() {
        2 => assemble::<2>(&jet, *g.grid()),
        _ => assemble::<3>(&jet, *g.grid()),
    };
    bundle.scalar.check_finite("scalar curvature")?;
    Ok(bundle)
}

fn assemble<const N: usize>(jet: &MetricJet, grid: Grid) -> CurvatureBundle {
    let n = N;
    let s = n * (n + 1) / 2;
    let p = n * (n - 1) / 2;
    let rows = jet.map_jets::<N, _>(|j| {
        let geo = j.geometry();
        let mut out = [0.0; NODE_SLOTS];
        let mut k = 0;
        for c in 0..n {
            for a in 0..n {
                for b in a..n {
                    out[k] = geo.gamma[c][a][b];
                    k += 1;
                }
            }
        }
        for a in 0..p {
            for b in a..p {
                let (i, jj) = pair_of(n, a);
                let (kk, l) = pair_of(n, b);
                // average the two pair orderings so storage is symmetric by construction
                out[k] = 0.5 * (geo.rm[i][jj][kk][l] + geo.rm[kk][l][i][jj]);
                k += 1;
            }
        }
        for a in 0..n {
            for b in a..n {
                out[k] = geo.ric[a][b];
                k += 1;
            }
        }
        out[k] = geo.scalar;
        out[k + 1] = geo.rm_norm(&j.ginv);
        out[k + 2] = geo.ric_norm_sq(&j.ginv);
        k += 3;
        out[k..k + n].copy_from_slice(&geo.x);
        out
    });

    let mut christoffel = TensorField::zeros(grid, Rank::Christoffel);
    let mut riemann = TensorField::zeros(grid, Rank::Riemann);
    let mut ricci = TensorField::zeros(grid, Rank::SymCov2);
    let mut scalar = TensorField::zeros(grid, Rank::Scalar);
    let mut rm_norm = TensorField::zeros(grid, Rank::Scalar);
    let mut ric_norm_sq = TensorField::zeros(grid, Rank::Scalar);
    let mut deturck = TensorField::zeros(grid, Rank::Vector);
    let nr = p * (p + 1) / 2;
    for (node, row) in rows.iter().enumerate() {
        let mut k = 0;
        for c in 0..n * s {
            christoffel.set(node, c, row[k]);
            k += 1;
        }
        for c in 0..nr {
            riemann.set(node, c, row[k]);
            k += 1;
        }
        for c in 0..s {
            ricci.set(node, c, row[k]);
            k += 1;
        }
        scalar.set(node, 0, row[k]);
        rm_norm.set(node, 0, row[k + 1]);
        ric_norm_sq.set(node, 0, row[k + 2]);
        k += 3;
        for c in 0..n {
            deturck.set(node, c, row[k + c]);
        }
    }
    CurvatureBundle { christoffel, riemann, ricci, scalar, deturck, rm_norm, ric_norm_sq }
}

fn pair_of(n: usize, idx: usize) -> (usize, usize) {
    let mut k = 0;
    for i in 0..n {
        for j in i + 1..n {
            if k == idx {
                return (i, j);
            }
            k += 1;
        }
    }
    unreachable!("pair index {idx} out of range")
}

/// Bianchi operator `X^i = g^{ij} g^{pq} (-∇_p h_qj + ½ ∇_j h_pq)` with
/// `g = ḡ + h` and `∇` the Levi-Civita connection of the background `ḡ`.
pub fn bianchi_operator(h: &TensorField, background: &MetricField) -> Result<TensorField> {
    if h.rank() != Rank::SymCov2 {
        return Err(LabError::invalid("bianchi operator expects a symmetric covariant 2-tensor"));
    }
    let grid = *h.grid();
    grid.check_same(background.grid())?;
    let n = grid.dim();
    let dh = (0..n).map(|a| partial_derivative(h, a, 1)).collect::<Result<Vec<_>>>()?;
    let dgb = (0..n).map(|a| partial_derivative(background.tensor(), a, 1)).collect::<Result<Vec<_>>>()?;
    let rows: Vec<Result<[f64; MAX_DIM]>> = (0..grid.len())
        .into_par_iter()
        .map(|node| {
            let gb = background.matrix(node);
            let gbi = background.inverse_matrix(node);
            let hm = h.sym_matrix(node);
            let mut g = gb;
            for i in 0..n {
                for j in 0..n {
                    g[i][j] += hm[i][j];
                }
            }
            check_positive(&g, n, node)?;
            let (_, gi) = det_inverse(&g, n);
            let mut dhm = [[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM];
            let mut dgm = [[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM];
            for a in 0..n {
                dhm[a] = dh[a].sym_matrix(node);
                dgm[a] = dgb[a].sym_matrix(node);
            }
            // background Christoffel symbols Γ̄^r_ij
            let mut gam = [[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM];
            for r in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        gam[r][i][j] =
                            (0..n).map(|l| 0.5 * gbi[r][l] * (dgm[i][j][l] + dgm[j][i][l] - dgm[l][i][j])).sum();
                    }
                }
            }
            // cov[p][q][j] = ∇_p h_qj
            let mut cov = [[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM];
            for p in 0..n {
                for q in 0..n {
                    for j in 0..n {
                        let mut v = dhm[p][q][j];
                        for r in 0..n {
                            v -= gam[r][p][q] * hm[r][j] + gam[r][p][j] * hm[q][r];
                        }
                        cov[p][q][j] = v;
                    }
                }
            }
            let mut w = [0.0; MAX_DIM];
            for j in 0..n {
                for p in 0..n {
                    for q in 0..n {
                        w[j] += gi[p][q] * (-cov[p][q][j] + 0.5 * cov[j][p][q]);
                    }
                }
            }
            let mut x = [0.0; MAX_DIM];
            for i in 0..n {
                x[i] = (0..n).map(|j| gi[i][j] * w[j]).sum();
            }
            Ok(x)
        })
        .collect();
    let mut out = TensorField::zeros(grid, Rank::Vector);
    for (node, row) in rows.into_iter().enumerate() {
        let x = row?;
        for c in 0..n {
            out.set(node, c, x[c]);
        }
    }
    Ok(out)
}

/// `(L_X g)_ij = X^k ∂_k g_ij + g_kj ∂_i X^k + g_ik ∂_j X^k`, derivatives by stencil.
pub fn lie_derivative_metric(x: &TensorField, g: &MetricField) -> Result<TensorField> {
    if x.rank() != Rank::Vector {
        return Err(LabError::invalid("lie derivative expects a vector field"));
    }
    let grid: Grid = *g.grid();
    grid.check_same(x.grid())?;
    let n = grid.dim();
    let dg = (0..n).map(|a| partial_derivative(g.tensor(), a, 1)).collect::<Result<Vec<_>>>()?;
    let dx = (0..n).map(|a| partial_derivative(x, a, 1)).collect::<Result<Vec<_>>>()?;
    let mut out = TensorField::zeros(grid, Rank::SymCov2);
    for node in 0..grid.len() {
        let gm = g.matrix(node);
        for i in 0..n {
            for j in i..n {
                let mut v = 0.0;
                for k in 0..n {
                    v += x.get(node, k) * dg[k].get(node, sym_index(n, i, j))
                        + gm[k][j] * dx[i].get(node, k)
                        + gm[i][k] * dx[j].get(node, k);
                }
                out.set(node, sym_index(n, i, j), v);
            }
        }
    }
    Ok(out)
}

/// `-2 Ric(g) - L_{X(g)} g` on every node, the Ricci DeTurck velocity.
pub fn deturck_velocity(g: &MetricField) -> Result<TensorField> {
    Ok(deturck_velocity_with_scalar(g)?.0)
}

/// Ricci DeTurck velocity together with the scalar curvature of `g`.
pub(crate) fn deturck_velocity_with_scalar(g: &MetricField) -> Result<(TensorField, TensorField)> {
    let jet = MetricJet::new(g)?;
    let (out, scalar) = match g.grid().dim() {
        2 => velocity_fields::<2>(&jet, *g.grid()),
        _ => velocity_fields::<3>(&jet, *g.grid()),
    };
    out.check_finite("deturck velocity")?;
    Ok((out, scalar))
}

fn velocity_fields<const N: usize>(jet: &MetricJet, grid: Grid) -> (TensorField, TensorField) {
    let rows = jet.map_jets::<N, _>(Jet::velocity);
    let mut out = TensorField::zeros(grid, Rank::SymCov2);
    let mut scalar = TensorField::zeros(grid, Rank::Scalar);
    for (node, (m, r)) in rows.iter().enumerate() {
        for i in 0..N {
            for j in i..N {
                out.set(node, sym_index(N, i, j), m[i][j]);
            }
        }
        scalar.set(node, 0, *r);
    }
    (out, scalar)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_metric_has_no_curvature() {
        for dim in [2, 3] {
            let grid = Grid::new(dim, 16, 0.25).unwrap();
            let b = compute_curvature(&MetricField::euclidean(grid)).unwrap();
            for f in [&b.christoffel, &b.riemann, &b.ricci, &b.scalar, &b.deturck, &b.rm_norm] {
                assert!(f.as_slice().iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn pair_order_matches_pair_index() {
        for n in [2, 3] {
            for a in 0..n * (n - 1) / 2 {
                let (i, j) = pair_of(n, a);
                assert_eq!(pair_index(n, i, j), Some((a, 1.0)));
            }
        }
    }
}

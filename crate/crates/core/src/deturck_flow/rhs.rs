use rayon::prelude::*;

use crate::curvature::deturck_velocity;
use crate::error::{LabError, Result};
use crate::grid_tensor::metric::{check_positive, det_inverse};
use crate::grid_tensor::{partial_derivative, sym_index, MetricField, Rank, TensorField, MAX_DIM};

/// Velocity `∂_t h` of the Ricci DeTurck flow relative to `g_eucl`,
/// computed geometrically as `-2 Ric(g) - L_X g` with `g = g_eucl + h`.
pub fn rhs(h: &TensorField) -> Result<TensorField> {
    deturck_velocity(&MetricField::from_perturbation(h)?)
}

/// The same velocity written as a quasilinear system in `h`:
///
/// `∂_t h_ij = g^ab ∂_a∂_b h_ij + ½ g^ab g^pq (∂_i h_pa ∂_j h_qb + 2 ∂_a h_jp ∂_q h_ib
///   - 2 ∂_a h_jp ∂_b h_iq - 2 ∂_j h_pa ∂_b h_iq - 2 ∂_i h_pa ∂_b h_jq)`.
///
/// The background is flat, so no curvature-times-h term appears.
pub fn rhs_h_form(h: &TensorField) -> Result<TensorField> {
    if h.rank() != Rank::SymCov2 {
        return Err(LabError::invalid("h must be a symmetric covariant 2-tensor"));
    }
    let grid = *h.grid();
    let n = grid.dim();
    let d1 = (0..n).map(|a| partial_derivative(h, a, 1)).collect::<Result<Vec<_>>>()?;
    let mut d2 = Vec::new();
    for a in 0..n {
        for b in a..n {
            d2.push(if a == b { partial_derivative(h, a, 2)? } else { partial_derivative(&d1[a], b, 1)? });
        }
    }
    let rows: Vec<Result<[[f64; MAX_DIM]; MAX_DIM]>> = (0..grid.len())
        .into_par_iter()
        .map(|node| {
            let mut g = h.sym_matrix(node);
            for (i, row) in g.iter_mut().enumerate().take(n) {
                row[i] += 1.0;
            }
            check_positive(&g, n, node)?;
            let (_, gi) = det_inverse(&g, n);
            let mut dh = [[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM];
            for a in 0..n {
                dh[a] = d1[a].sym_matrix(node);
            }
            let mut out = [[0.0; MAX_DIM]; MAX_DIM];
            for i in 0..n {
                for j in i..n {
                    let mut v = 0.0;
                    for a in 0..n {
                        for b in 0..n {
                            v += gi[a][b] * d2[sym_index(n, a, b)].get(node, sym_index(n, i, j));
                        }
                    }
                    let mut q = 0.0;
                    for a in 0..n {
                        for b in 0..n {
                            for p in 0..n {
                                for qq in 0..n {
                                    let w = gi[a][b] * gi[p][qq];
                                    if w == 0.0 {
                                        continue;
                                    }
                                    q += w
                                        * (dh[i][p][a] * dh[j][qq][b] + 2.0 * dh[a][j][p] * dh[qq][i][b]
                                            - 2.0 * dh[a][j][p] * dh[b][i][qq]
                                            - 2.0 * dh[j][p][a] * dh[b][i][qq]
                                            - 2.0 * dh[i][p][a] * dh[b][j][qq]);
                                }
                            }
                        }
                    }
                    out[i][j] = v + 0.5 * q;
                }
            }
            Ok(out)
        })
        .collect();
    let mut out = TensorField::zeros(grid, Rank::SymCov2);
    for (node, row) in rows.into_iter().enumerate() {
        let m = row?;
        for i in 0..n {
            for j in i..n {
                out.set(node, sym_index(n, i, j), m[i][j]);
            }
        }
    }
    Ok(out)
}

//! Curvature of a metric from its 2-jet at a single node.

pub(crate) type Mat<const N: usize> = [[f64; N]; N];
pub(crate) type T3<const N: usize> = [[[f64; N]; N]; N];
pub(crate) type T4<const N: usize> = [[[[f64; N]; N]; N]; N];

/// Metric, inverse and coordinate derivatives at one node.
///
/// `dg[a][i][j] = ∂_a g_ij`, `ddg[a][b][i][j] = ∂_a ∂_b g_ij`.
#[derive(Debug, Clone)]
pub(crate) struct Jet<const N: usize> {
    pub g: Mat<N>,
    pub ginv: Mat<N>,
    pub dg: T3<N>,
    pub ddg: T4<N>,
}

/// Everything the flow and the kernel need at one node.
#[derive(Debug, Clone)]
pub(crate) struct NodeGeometry<const N: usize> {
    /// `gamma[k][i][j] = Γ^k_ij`.
    pub gamma: T3<N>,
    /// Fully lowered `Rm_ijkl`.
    pub rm: T4<N>,
    pub ric: Mat<N>,
    pub scalar: f64,
    /// DeTurck field `X^i = -g^{pq} Γ^i_pq` (flat background).
    pub x: [f64; N],
}

/// Levi-Civita connection data at one node.
struct Connection<const N: usize> {
    gamma: T3<N>,
    dginv: T3<N>,
    /// `dgamma[m][k][i][j] = ∂_m Γ^k_ij`
    dgamma: T4<N>,
}

impl<const N: usize> Jet<N> {
    fn connection(&self) -> Connection<N> {
        let n = N;
        let (gi, dg, ddg) = (&self.ginv, &self.dg, &self.ddg);

        // Γ_{l,ij} and Γ^k_ij
        let mut low = [[[0.0; N]; N]; N];
        for l in 0..n {
            for i in 0..n {
                for j in i..n {
                    let v = 0.5 * (dg[i][j][l] + dg[j][i][l] - dg[l][i][j]);
                    low[l][i][j] = v;
                    low[l][j][i] = v;
                }
            }
        }
        let mut gamma = [[[0.0; N]; N]; N];
        for k in 0..n {
            for i in 0..n {
                for j in i..n {
                    let v: f64 = (0..n).map(|l| gi[k][l] * low[l][i][j]).sum();
                    gamma[k][i][j] = v;
                    gamma[k][j][i] = v;
                }
            }
        }

        // ∂_m g^{kl} = -g^{ka} ∂_m g_ab g^{bl}
        let mut dginv = [[[0.0; N]; N]; N];
        for m in 0..n {
            let mut tmp = [[0.0; N]; N];
            for k in 0..n {
                for b in 0..n {
                    tmp[k][b] = (0..n).map(|a| gi[k][a] * dg[m][a][b]).sum();
                }
            }
            for k in 0..n {
                for l in 0..n {
                    dginv[m][k][l] = -(0..n).map(|b| tmp[k][b] * gi[b][l]).sum::<f64>();
                }
            }
        }

        // dgamma[m][k][i][j] = ∂_m Γ^k_ij
        let mut dgamma = [[[[0.0; N]; N]; N]; N];
        for m in 0..n {
            let mut dlow = [[[0.0; N]; N]; N];
            for l in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        dlow[l][i][j] = 0.5 * (ddg[m][i][j][l] + ddg[m][j][i][l] - ddg[m][l][i][j]);
                    }
                }
            }
            for k in 0..n {
                for i in 0..n {
                    for j in i..n {
                        let v: f64 = (0..n).map(|l| dginv[m][k][l] * low[l][i][j] + gi[k][l] * dlow[l][i][j]).sum();
                        dgamma[m][k][i][j] = v;
                        dgamma[m][k][j][i] = v;
                    }
                }
            }
        }

        Connection { gamma, dginv, dgamma }
    }

    /// `X^i = -g^{pq} Γ^i_pq` and `∂_m X^i`.
    fn deturck_field(&self, c: &Connection<N>) -> ([f64; N], Mat<N>) {
        let n = N;
        let gi = &self.ginv;
        let mut x = [0.0; N];
        let mut dx = [[0.0; N]; N];
        for i in 0..n {
            for p in 0..n {
                for q in 0..n {
                    x[i] -= gi[p][q] * c.gamma[i][p][q];
                    for m in 0..n {
                        dx[m][i] -= c.dginv[m][p][q] * c.gamma[i][p][q] + gi[p][q] * c.dgamma[m][i][p][q];
                    }
                }
            }
        }
        (x, dx)
    }

    /// Ricci DeTurck velocity `-2 Ric - L_X g` and scalar curvature, without
    /// forming the full Riemann tensor.
    pub fn velocity(&self) -> (Mat<N>, f64) {
        let n = N;
        let c = self.connection();
        let (gamma, dgamma) = (&c.gamma, &c.dgamma);
        // Ric_jk = ∂_iΓ^i_jk - ∂_jΓ^i_ik + Γ^i_ip Γ^p_jk - Γ^i_jp Γ^p_ik
        let mut trace = [0.0; N];
        for p in 0..n {
            trace[p] = (0..n).map(|i| gamma[i][i][p]).sum();
        }
        let mut ric = [[0.0; N]; N];
        for j in 0..n {
            for k in j..n {
                let mut v = 0.0;
                for i in 0..n {
                    v += dgamma[i][i][j][k] - dgamma[j][i][i][k];
                    for p in 0..n {
                        v -= gamma[i][j][p] * gamma[p][i][k];
                    }
                }
                for p in 0..n {
                    v += trace[p] * gamma[p][j][k];
                }
                ric[j][k] = v;
            }
        }
        // the analytic Ricci tensor is symmetric; use the mean of both orderings
        for j in 0..n {
            for k in j + 1..n {
                let mut w = 0.0;
                for i in 0..n {
                    w += dgamma[i][i][k][j] - dgamma[k][i][i][j];
                    for p in 0..n {
                        w -= gamma[i][k][p] * gamma[p][i][j];
                    }
                }
                for p in 0..n {
                    w += trace[p] * gamma[p][k][j];
                }
                ric[j][k] = 0.5 * (ric[j][k] + w);
            }
        }
        let mut scalar = 0.0;
        for j in 0..n {
            scalar += self.ginv[j][j] * ric[j][j];
            for k in j + 1..n {
                scalar += 2.0 * self.ginv[j][k] * ric[j][k];
            }
        }
        let (x, dx) = self.deturck_field(&c);
        let mut out = [[0.0; N]; N];
        for i in 0..n {
            for j in i..n {
                let mut lie = 0.0;
                for k in 0..n {
                    lie += x[k] * self.dg[k][i][j] + self.g[k][j] * dx[i][k] + self.g[i][k] * dx[j][k];
                }
                let v = -2.0 * ric[i][j] - lie;
                out[i][j] = v;
                out[j][i] = v;
            }
        }
        (out, scalar)
    }

    pub fn geometry(&self) -> NodeGeometry<N> {
        let n = N;
        let g = &self.g;
        let c = self.connection();
        let (gamma, dgamma) = (&c.gamma, &c.dgamma);
        // R_{ijk}^l = ∂_iΓ^l_jk - ∂_jΓ^l_ik + Γ^l_ip Γ^p_jk - Γ^l_jp Γ^p_ik
        let mut up = [[[[0.0; N]; N]; N]; N];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                for k in 0..n {
                    for l in 0..n {
                        let mut v = dgamma[i][l][j][k] - dgamma[j][l][i][k];
                        for p in 0..n {
                            v += gamma[l][i][p] * gamma[p][j][k] - gamma[l][j][p] * gamma[p][i][k];
                        }
                        up[i][j][k][l] = v;
                    }
                }
            }
        }
        let mut rm = [[[[0.0; N]; N]; N]; N];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        rm[i][j][k][l] = (0..n).map(|m| g[l][m] * up[i][j][k][m]).sum();
                    }
                }
            }
        }
        let mut ric = [[0.0; N]; N];
        for j in 0..n {
            for k in 0..n {
                ric[j][k] = (0..n).map(|i| up[i][j][k][i]).sum();
            }
        }
        // symmetrize away roundoff
        for j in 0..n {
            for k in j + 1..n {
                let v = 0.5 * (ric[j][k] + ric[k][j]);
                ric[j][k] = v;
                ric[k][j] = v;
            }
        }
        let mut scalar = 0.0;
        for j in 0..n {
            for k in 0..n {
                scalar += self.ginv[j][k] * ric[j][k];
            }
        }

        let (x, _) = self.deturck_field(&c);
        NodeGeometry { gamma: c.gamma, rm, ric, scalar, x }
    }
}

impl<const N: usize> NodeGeometry<N> {
    /// `|Ric|^2` with contractions by `g^{-1}`.
    pub fn ric_norm_sq(&self, gi: &Mat<N>) -> f64 {
        let n = N;
        let mut raised = [[0.0; N]; N];
        for i in 0..n {
            for b in 0..n {
                raised[i][b] = (0..n).map(|j| self.ric[i][j] * gi[j][b]).sum();
            }
        }
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += raised[i][j] * raised[j][i];
            }
        }
        acc
    }

    /// `|Rm|` with contractions by `g^{-1}`.
    pub fn rm_norm(&self, gi: &Mat<N>) -> f64 {
        let n = N;
        // raise every index in turn
        let mut t = self.rm;
        for slot in 0..4 {
            let mut r = [[[[0.0; N]; N]; N]; N];
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        for d in 0..n {
                            let mut v = 0.0;
                            for e in 0..n {
                                let idx = match slot {
                                    0 => t[e][b][c][d],
                                    1 => t[a][e][c][d],
                                    2 => t[a][b][e][d],
                                    _ => t[a][b][c][e],
                                };
                                let w = match slot {
                                    0 => gi[a][e],
                                    1 => gi[b][e],
                                    2 => gi[c][e],
                                    _ => gi[d][e],
                                };
                                v += w * idx;
                            }
                            r[a][b][c][d] = v;
                        }
                    }
                }
            }
            t = r;
        }
        let mut acc = 0.0;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        acc += t[a][b][c][d] * self.rm[a][b][c][d];
                    }
                }
            }
        }
        acc.max(0.0).sqrt()
    }
}

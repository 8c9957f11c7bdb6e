#![allow(dead_code, clippy::needless_range_loop)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rdt_lab::grid_tensor::{sym_index, Grid, MetricField, Rank, TensorField};

pub type Mat = [[f64; 3]; 3];

/// Trigonometric polynomial `Σ a sin(k·x + φ)` with exact derivatives.
#[derive(Debug, Clone)]
pub struct Modes {
    pub terms: Vec<(f64, [f64; 3], f64)>,
}

impl Modes {
    pub fn random(rng: &mut ChaCha8Rng, dim: usize, side: f64, amp: f64, count: usize) -> Self {
        let k0 = 2.0 * PI / side;
        let terms = (0..count)
            .map(|_| {
                let mut k = [0.0; 3];
                for ka in k.iter_mut().take(dim) {
                    *ka = k0 * rng.gen_range(-2i32..=2) as f64;
                }
                (amp * rng.gen_range(-1.0..1.0), k, rng.gen_range(0.0..2.0 * PI))
            })
            .collect();
        Self { terms }
    }

    /// Value, gradient and Hessian at `p`.
    pub fn jet(&self, p: [f64; 3]) -> (f64, [f64; 3], Mat) {
        let mut v = 0.0;
        let mut d = [0.0; 3];
        let mut h = [[0.0; 3]; 3];
        for &(a, k, phi) in &self.terms {
            let arg = k[0] * p[0] + k[1] * p[1] + k[2] * p[2] + phi;
            v += a * arg.sin();
            for i in 0..3 {
                d[i] += a * k[i] * arg.cos();
                for j in 0..3 {
                    h[i][j] -= a * k[i] * k[j] * arg.sin();
                }
            }
        }
        (v, d, h)
    }

    pub fn field(&self, grid: Grid) -> TensorField {
        TensorField::scalar_from_fn(grid, |p| self.jet(p).0)
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random smooth symmetric perturbation with one mode set per component.
pub fn random_h(grid: Grid, seed: u64, amp: f64) -> (TensorField, Vec<Modes>) {
    let mut r = rng(seed);
    let n = grid.dim();
    let modes: Vec<Modes> = (0..n * (n + 1) / 2).map(|_| Modes::random(&mut r, n, grid.side(), amp, 3)).collect();
    let h = TensorField::from_fn(grid, Rank::SymCov2, |p, out| {
        for (c, m) in modes.iter().enumerate() {
            out[c] = m.jet(p).0;
        }
    });
    (h, modes)
}

pub fn random_metric(grid: Grid, seed: u64, amp: f64) -> MetricField {
    MetricField::from_perturbation(&random_h(grid, seed, amp).0).unwrap()
}

/// Exact metric 2-jet of `δ + h` where each component of `h` is a [`Modes`].
pub fn exact_jet(modes: &[Modes], n: usize, p: [f64; 3]) -> (Mat, [Mat; 3], [[Mat; 3]; 3]) {
    let mut g = [[0.0; 3]; 3];
    let mut dg = [[[0.0; 3]; 3]; 3];
    let mut ddg = [[[[0.0; 3]; 3]; 3]; 3];
    for i in 0..n {
        for j in 0..n {
            let (v, d, h) = modes[sym_index(n, i, j)].jet(p);
            g[i][j] = v + if i == j { 1.0 } else { 0.0 };
            for a in 0..n {
                dg[a][i][j] = d[a];
                for b in 0..n {
                    ddg[a][b][i][j] = h[a][b];
                }
            }
        }
    }
    (g, dg, ddg)
}

pub fn inverse(m: &Mat, n: usize) -> Mat {
    let mut out = [[0.0; 3]; 3];
    if n == 2 {
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        out[0][0] = m[1][1] / det;
        out[1][1] = m[0][0] / det;
        out[0][1] = -m[0][1] / det;
        out[1][0] = -m[1][0] / det;
    } else {
        let a = nalgebra::Matrix3::from_fn(|i, j| m[i][j]).try_inverse().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = a[(i, j)];
            }
        }
    }
    out
}

/// Scalar curvature by the textbook formula in second derivatives of `g`:
/// `R_iklm = ½(g_im,kl + g_kl,im - g_il,km - g_km,il) + g_np(Γ^n_kl Γ^p_im - Γ^n_km Γ^p_il)`,
/// `R_ik = g^lm R_limk`, `R = g^ik R_ik`.
pub fn naive_scalar(n: usize, g: &Mat, dg: &[Mat; 3], ddg: &[[Mat; 3]; 3]) -> f64 {
    let gi = inverse(g, n);
    let mut gam = [[[0.0; 3]; 3]; 3];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for l in 0..n {
                    gam[a][b][c] += 0.5 * gi[a][l] * (dg[b][c][l] + dg[c][b][l] - dg[l][b][c]);
                }
            }
        }
    }
    let riem = |i: usize, k: usize, l: usize, m: usize| {
        let mut v = 0.5 * (ddg[k][l][i][m] + ddg[i][m][k][l] - ddg[k][m][i][l] - ddg[i][l][k][m]);
        for a in 0..n {
            for b in 0..n {
                v += g[a][b] * (gam[a][k][l] * gam[b][i][m] - gam[a][k][m] * gam[b][i][l]);
            }
        }
        v
    };
    let mut r = 0.0;
    for i in 0..n {
        for k in 0..n {
            let mut ric = 0.0;
            for l in 0..n {
                for m in 0..n {
                    ric += gi[l][m] * riem(l, i, m, k);
                }
            }
            r += gi[i][k] * ric;
        }
    }
    r
}

pub fn sup_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Random node indices drawn from a seeded generator.
pub fn sample_nodes(grid: &Grid, count: usize, seed: u64) -> Vec<usize> {
    let mut r = rng(seed);
    (0..count).map(|_| r.gen_range(0..grid.len())).collect()
}

/// C∞ step: 1 for `r <= r0`, 0 for `r >= r1`.
pub fn smooth_step(r: f64, r0: f64, r1: f64) -> f64 {
    let f = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    let s = ((r - r0) / (r1 - r0)).clamp(0.0, 1.0);
    f(1.0 - s) / (f(1.0 - s) + f(s))
}

/// Conformal bump `e^{2u} g_eucl` with `u = amp · step(|x|; 0, radius)`.
pub fn conformal_bump(grid: Grid, amp: f64, radius: f64) -> MetricField {
    let u = TensorField::scalar_from_fn(grid, |p| {
        let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        amp * smooth_step(r, 0.0, radius)
    });
    MetricField::conformal(&u).unwrap()
}

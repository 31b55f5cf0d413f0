//! Constraint system for unrestricted extended-receiver rows.
//!
//! Unknowns are the constrained rows `a_0 .. a_{m-1}` of `W_ER`, stored per
//! row as `[Re a_i, Im a_i]`. With `p_ij = a_i . b_j` taken over the
//! k-excitation slice of each row, the residuals are
//!
//! 1. `p_ij` for distinct `i, j < N_S`,
//! 2. `p_ii - p_00` for `0 < i < N_S`,
//! 3. `p_ij` for the extra zero rows `i >= N_S`,
//! 4. `<a_i, a_i> - 1` and `<a_i, a_j>` for `i < j`.

use super::lm::{JacobianRow, LeastSquares};
use crate::C64;

pub struct GeneralSystem {
    /// Columns of the transfer block.
    b: Vec<Vec<C64>>,
    /// `[d Re p / dx, d Im p / dx]` for each column, over one row block.
    grad_p: Vec<(Vec<f64>, Vec<f64>)>,
    n_s_k: usize,
    m: usize,
    dim: usize,
    offset: usize,
}

impl GeneralSystem {
    /// `b` holds the transfer-block columns; rows have length `dim` and their
    /// k-slice starts at `offset`.
    pub fn new(b: Vec<Vec<C64>>, m: usize, dim: usize, offset: usize) -> Self {
        let grad_p = b
            .iter()
            .map(|col| {
                let mut gre = vec![0.0; 2 * dim];
                let mut gim = vec![0.0; 2 * dim];
                for (t, z) in col.iter().enumerate() {
                    gre[offset + t] = z.re;
                    gre[dim + offset + t] = -z.im;
                    gim[offset + t] = z.im;
                    gim[dim + offset + t] = z.re;
                }
                (gre, gim)
            })
            .collect();
        GeneralSystem {
            n_s_k: b.len(),
            b,
            grad_p,
            m,
            dim,
            offset,
        }
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn row<'a>(&self, x: &'a [f64], i: usize) -> (&'a [f64], &'a [f64]) {
        let base = 2 * self.dim * i;
        (
            &x[base..base + self.dim],
            &x[base + self.dim..base + 2 * self.dim],
        )
    }

    pub fn p(&self, x: &[f64], i: usize, j: usize) -> C64 {
        let (re, im) = self.row(x, i);
        self.b[j]
            .iter()
            .enumerate()
            .map(|(t, z)| C64::new(re[self.offset + t], im[self.offset + t]) * z)
            .sum()
    }

    pub fn overlap(&self, x: &[f64], i: usize, j: usize) -> C64 {
        let (ri, ii) = self.row(x, i);
        let (rj, ij) = self.row(x, j);
        (0..self.dim)
            .map(|t| C64::new(ri[t], ii[t]) * C64::new(rj[t], -ij[t]))
            .sum()
    }

    /// Complex constraint values in residual order (with targets removed).
    fn constraints(&self, x: &[f64]) -> Vec<C64> {
        let n = self.n_s_k;
        let mut out = Vec::new();
        let p00 = self.p(x, 0, 0);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    out.push(self.p(x, i, j));
                }
            }
        }
        for i in 1..n {
            out.push(self.p(x, i, i) - p00);
        }
        for i in n..self.m {
            for j in 0..n {
                out.push(self.p(x, i, j));
            }
        }
        for i in 0..self.m {
            out.push(self.overlap(x, i, i) - 1.0);
            for j in i + 1..self.m {
                out.push(self.overlap(x, i, j));
            }
        }
        out
    }

    /// Largest complex constraint violation.
    pub fn violation(&self, x: &[f64]) -> f64 {
        self.constraints(x)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn pack(rows: &[Vec<C64>]) -> Vec<f64> {
        let mut x = Vec::new();
        for r in rows {
            x.extend(r.iter().map(|z| z.re));
            x.extend(r.iter().map(|z| z.im));
        }
        x
    }

    pub fn unpack(&self, x: &[f64]) -> Vec<Vec<C64>> {
        (0..self.m)
            .map(|i| {
                let (re, im) = self.row(x, i);
                re.iter().zip(im).map(|(&a, &b)| C64::new(a, b)).collect()
            })
            .collect()
    }
}

impl LeastSquares for GeneralSystem {
    fn n_params(&self) -> usize {
        2 * self.dim * self.m
    }

    fn block_len(&self) -> usize {
        2 * self.dim
    }

    fn residuals(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n_s_k;
        let mut r = Vec::new();
        let p00 = self.p(x, 0, 0);
        let mut push = |z: C64| {
            r.push(z.re);
            r.push(z.im);
        };
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    push(self.p(x, i, j));
                }
            }
        }
        for i in 1..n {
            push(self.p(x, i, i) - p00);
        }
        for i in n..self.m {
            for j in 0..n {
                push(self.p(x, i, j));
            }
        }
        for i in 0..self.m {
            r.push(self.overlap(x, i, i).re - 1.0);
            for j in i + 1..self.m {
                let o = self.overlap(x, i, j);
                r.push(o.re);
                r.push(o.im);
            }
        }
        r
    }

    fn jacobian(&self, x: &[f64]) -> Vec<JacobianRow> {
        let n = self.n_s_k;
        let d = self.dim;
        let mut rows = Vec::new();
        let neg = |v: &[f64]| v.iter().map(|a| -a).collect::<Vec<f64>>();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let (gre, gim) = &self.grad_p[j];
                    rows.push(JacobianRow {
                        parts: vec![(i, gre.clone())],
                    });
                    rows.push(JacobianRow {
                        parts: vec![(i, gim.clone())],
                    });
                }
            }
        }
        for i in 1..n {
            let (gre, gim) = &self.grad_p[i];
            let (g0re, g0im) = &self.grad_p[0];
            rows.push(JacobianRow {
                parts: vec![(i, gre.clone()), (0, neg(g0re))],
            });
            rows.push(JacobianRow {
                parts: vec![(i, gim.clone()), (0, neg(g0im))],
            });
        }
        for i in n..self.m {
            for j in 0..n {
                let (gre, gim) = &self.grad_p[j];
                rows.push(JacobianRow {
                    parts: vec![(i, gre.clone())],
                });
                rows.push(JacobianRow {
                    parts: vec![(i, gim.clone())],
                });
            }
        }
        for i in 0..self.m {
            let (ri, ii) = self.row(x, i);
            let xi: Vec<f64> = ri.iter().chain(ii).copied().collect();
            rows.push(JacobianRow {
                parts: vec![(i, xi.iter().map(|v| 2.0 * v).collect())],
            });
            for j in i + 1..self.m {
                let (rj, ij) = self.row(x, j);
                let xj: Vec<f64> = rj.iter().chain(ij).copied().collect();
                rows.push(JacobianRow {
                    parts: vec![(i, xj), (j, xi.clone())],
                });
                let mut im_i = vec![0.0; 2 * d];
                let mut im_j = vec![0.0; 2 * d];
                for t in 0..d {
                    im_i[t] = -ij[t];
                    im_i[d + t] = rj[t];
                    im_j[t] = ii[t];
                    im_j[d + t] = -ri[t];
                }
                rows.push(JacobianRow {
                    parts: vec![(i, im_i), (j, im_j)],
                });
            }
        }
        rows
    }
}

#[cfg(test)]
mod tests {
    use super::super::lm::finite_difference;
    use super::*;

    #[test]
    fn analytic_jacobian_matches_differences() {
        let b: Vec<Vec<C64>> = (0..2)
            .map(|j| {
                (0..4)
                    .map(|t| C64::new((t + j) as f64 * 0.3 - 0.2, 0.1 * t as f64 - j as f64 * 0.4))
                    .collect()
            })
            .collect();
        let sys = GeneralSystem::new(b, 3, 6, 1);
        let x: Vec<f64> = (0..sys.n_params())
            .map(|i| ((i * 7) as f64 * 0.37).sin())
            .collect();
        let an = sys.jacobian(&x);
        let fd = finite_difference(|y| sys.residuals(y), &x, 1e-6);
        assert_eq!(an.len(), fd.len());
        let bl = sys.block_len();
        for (a, f) in an.iter().zip(&fd) {
            let mut dense = vec![0.0; sys.n_params()];
            for (blk, g) in &a.parts {
                for (t, v) in g.iter().enumerate() {
                    dense[blk * bl + t] += v;
                }
            }
            for (u, v) in dense.iter().zip(&f.parts[0].1) {
                assert!((u - v).abs() < 1e-7, "{u} vs {v}");
            }
        }
    }
}

//! Levenberg-Marquardt for underdetermined real least squares.
//!
//! Steps use the minimum-norm damped form `dx = -J^T (J J^T + mu I)^-1 r`.
//! Parameters are grouped in equal-length blocks and each Jacobian row lists
//! only the blocks it touches, so `J J^T` is assembled block by block.

use nalgebra::{DMatrix, DVector};

/// Gradient of one residual restricted to the parameter blocks it touches.
#[derive(Debug, Clone, Default)]
pub struct JacobianRow {
    pub parts: Vec<(usize, Vec<f64>)>,
}

pub trait LeastSquares {
    fn n_params(&self) -> usize;
    fn block_len(&self) -> usize;
    fn residuals(&self, x: &[f64]) -> Vec<f64>;
    fn jacobian(&self, x: &[f64]) -> Vec<JacobianRow>;
}

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    /// Stop when every residual component is at most this.
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub x: Vec<f64>,
    pub max_abs: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn max_abs(r: &[f64]) -> f64 {
    r.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn norm2(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn jjt(jac: &[JacobianRow], n_blocks: usize) -> DMatrix<f64> {
    let n = jac.len();
    let mut by_block: Vec<Vec<(usize, &[f64])>> = vec![Vec::new(); n_blocks];
    for (i, row) in jac.iter().enumerate() {
        for (b, g) in &row.parts {
            by_block[*b].push((i, g.as_slice()));
        }
    }
    let mut a = DMatrix::<f64>::zeros(n, n);
    for members in &by_block {
        for (p, &(i, gi)) in members.iter().enumerate() {
            for &(j, gj) in &members[p..] {
                let d: f64 = gi.iter().zip(gj).map(|(x, y)| x * y).sum();
                a[(i, j)] += d;
                if i != j {
                    a[(j, i)] += d;
                }
            }
        }
    }
    a
}

fn jt_times(jac: &[JacobianRow], y: &DVector<f64>, block_len: usize, n_params: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_params];
    for (i, row) in jac.iter().enumerate() {
        for (b, g) in &row.parts {
            let base = b * block_len;
            for (t, v) in g.iter().enumerate() {
                out[base + t] += y[i] * v;
            }
        }
    }
    out
}

pub fn minimize<P: LeastSquares + ?Sized>(problem: &P, x0: Vec<f64>, opts: LmOptions) -> LmOutcome {
    let block_len = problem.block_len();
    let n_params = problem.n_params();
    let n_blocks = n_params.div_ceil(block_len);
    let mut x = x0;
    let mut r = problem.residuals(&x);
    let mut cost = norm2(&r);
    let mut mu = 1e-3;
    let mut stalled = 0;
    for it in 0..opts.max_iter {
        if max_abs(&r) <= opts.tol {
            return LmOutcome {
                max_abs: max_abs(&r),
                x,
                iterations: it,
                converged: true,
            };
        }
        let jac = problem.jacobian(&x);
        let a = jjt(&jac, n_blocks);
        let rv = DVector::from_column_slice(&r);
        let mut accepted = false;
        for _ in 0..40 {
            let mut damped = a.clone();
            for i in 0..damped.nrows() {
                damped[(i, i)] += mu;
            }
            let Some(chol) = damped.cholesky() else {
                mu *= 10.0;
                continue;
            };
            let y = chol.solve(&rv);
            let step = jt_times(&jac, &y, block_len, n_params);
            let trial: Vec<f64> = x.iter().zip(&step).map(|(a, d)| a - d).collect();
            let r_trial = problem.residuals(&trial);
            let c_trial = norm2(&r_trial);
            if c_trial.is_finite() && c_trial < cost {
                if c_trial > 0.999 * cost {
                    stalled += 1;
                } else {
                    stalled = 0;
                }
                x = trial;
                r = r_trial;
                cost = c_trial;
                mu = (mu / 3.0).max(1e-15);
                accepted = true;
                break;
            }
            mu *= 4.0;
            if mu > 1e12 {
                break;
            }
        }
        if !accepted || stalled > 25 {
            break;
        }
    }
    LmOutcome {
        max_abs: max_abs(&r),
        converged: max_abs(&r) <= opts.tol,
        x,
        iterations: opts.max_iter,
    }
}

/// Central-difference Jacobian as a single dense block.
pub fn finite_difference<F: Fn(&[f64]) -> Vec<f64>>(f: F, x: &[f64], h: f64) -> Vec<JacobianRow> {
    let n = x.len();
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut xp = x.to_vec();
    for p in 0..n {
        let orig = xp[p];
        xp[p] = orig + h;
        let up = f(&xp);
        xp[p] = orig - h;
        let down = f(&xp);
        xp[p] = orig;
        cols.push(
            up.iter()
                .zip(&down)
                .map(|(a, b)| (a - b) / (2.0 * h))
                .collect(),
        );
    }
    let m = cols.first().map_or(0, |c| c.len());
    (0..m)
        .map(|i| JacobianRow {
            parts: vec![(0, cols.iter().map(|c| c[i]).collect())],
        })
        .collect()
}

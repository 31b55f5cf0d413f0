//! Extending orthonormal rows to a full unitary.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{PstError, Result};
use crate::{CMatrix, C64};

pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// Largest entry of `R R^dagger - I`.
pub fn row_orthonormality_error(rows: &CMatrix) -> f64 {
    let g = rows * rows.adjoint();
    let mut worst = 0.0f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

pub fn random_complex_vector(rng: &mut ChaCha20Rng, dim: usize) -> Vec<C64> {
    (0..dim)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            C64::new(re, im)
        })
        .collect()
}

/// Removes the components along `basis` (twice, for stability) and normalizes.
/// Returns `None` when almost nothing is left.
pub fn orthonormalize_against(mut v: Vec<C64>, basis: &[Vec<C64>]) -> Option<Vec<C64>> {
    let start: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for _ in 0..2 {
        for b in basis {
            let c: C64 = v.iter().zip(b).map(|(x, y)| x * y.conj()).sum();
            for (x, y) in v.iter_mut().zip(b) {
                *x -= c * y;
            }
        }
    }
    let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm < 1e-8 * start.max(1e-300) {
        return None;
    }
    v.iter_mut().for_each(|z| *z /= norm);
    Some(v)
}

/// `count` random orthonormal rows of length `dim`.
pub fn random_orthonormal_rows(rng: &mut ChaCha20Rng, count: usize, dim: usize) -> Vec<Vec<C64>> {
    let mut rows: Vec<Vec<C64>> = Vec::with_capacity(count);
    while rows.len() < count {
        if let Some(v) = orthonormalize_against(random_complex_vector(rng, dim), &rows) {
            rows.push(v);
        }
    }
    rows
}

/// Square unitary whose leading rows are `rows`.
pub fn complete_unitary(rows: &CMatrix, dim: usize, seed: u64) -> Result<CMatrix> {
    if rows.ncols() != dim || rows.nrows() > dim {
        return Err(PstError::DimensionMismatch {
            expected: dim,
            got: rows.ncols(),
            context: "row length vs unitary dimension",
        });
    }
    let err = row_orthonormality_error(rows);
    if err > ORTHONORMAL_TOL {
        return Err(PstError::NotOrthonormal(err));
    }
    let mut basis: Vec<Vec<C64>> = rows
        .row_iter()
        .map(|r| r.iter().copied().collect())
        .collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    while basis.len() < dim {
        if let Some(v) = orthonormalize_against(random_complex_vector(&mut rng, dim), &basis) {
            basis.push(v);
        }
    }
    Ok(CMatrix::from_fn(dim, dim, |i, j| basis[i][j]))
}

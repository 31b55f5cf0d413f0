//! Sector propagators and the sender-to-extended-receiver transfer block.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::basis::{embed_subsystem, k_states, EmbeddingMap};
use crate::chain::{hamiltonian_block, CouplingMatrix, Partition};
use crate::error::{PstError, Result};
use crate::{CMatrix, C64};

/// Largest tolerated `max |H - H^dagger|` entry.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Eigenvalues and eigenvectors of one Hamiltonian block.
#[derive(Debug, Clone)]
pub struct SectorEigensystem {
    pub values: DVector<f64>,
    pub vectors: CMatrix,
}

impl SectorEigensystem {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `U diag(values) U^dagger`.
    pub fn reconstruct(&self) -> CMatrix {
        let mut scaled = self.vectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= C64::new(self.values[j], 0.0);
        }
        scaled * self.vectors.adjoint()
    }
}

fn max_asymmetry(h: &CMatrix) -> f64 {
    let n = h.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..=i {
            worst = worst.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn eigendecompose(h: &CMatrix) -> Result<SectorEigensystem> {
    if !h.is_square() {
        return Err(PstError::DimensionMismatch {
            expected: h.nrows(),
            got: h.ncols(),
            context: "Hamiltonian block must be square",
        });
    }
    let asym = max_asymmetry(h);
    if asym > HERMITIAN_TOL {
        return Err(PstError::NotHermitian(asym));
    }
    if h.iter().all(|z| z.im == 0.0) {
        let re: DMatrix<f64> = h.map(|z| z.re);
        let eig = SymmetricEigen::new(re);
        return Ok(SectorEigensystem {
            values: eig.eigenvalues,
            vectors: eig.eigenvectors.map(|x| C64::new(x, 0.0)),
        });
    }
    let eig = SymmetricEigen::new(h.clone());
    Ok(SectorEigensystem {
        values: eig.eigenvalues,
        vectors: eig.eigenvectors,
    })
}

/// `V(tau) = U exp(-i Lambda tau) U^dagger`.
pub fn propagator(eig: &SectorEigensystem, tau: f64) -> CMatrix {
    let mut left = eig.vectors.clone();
    for (j, mut col) in left.column_iter_mut().enumerate() {
        col *= C64::from_polar(1.0, -eig.values[j] * tau);
    }
    left * eig.vectors.adjoint()
}

/// Amplitudes from sender k-states to extended-receiver k-states.
///
/// Row `r` is the ER-local k-state `r`, column `c` the S-local k-state `c`,
/// both with every other site in the ground state.
#[derive(Debug, Clone)]
pub struct TransferBlock {
    pub v_hat: CMatrix,
    pub tau: f64,
    pub k: usize,
    pub n_s: usize,
    pub n_er: usize,
}

impl TransferBlock {
    pub fn n_er_k(&self) -> usize {
        self.v_hat.nrows()
    }

    pub fn n_s_k(&self) -> usize {
        self.v_hat.ncols()
    }

    /// Column `j`, the image of sender state `j` inside the extended receiver.
    pub fn column(&self, j: usize) -> Vec<C64> {
        self.v_hat.column(j).iter().copied().collect()
    }
}

fn embeddings(partition: &Partition, k: usize) -> Result<(EmbeddingMap, EmbeddingMap)> {
    let n = partition.n_sites();
    let s = embed_subsystem(&partition.sender(), n, k)?;
    let er = embed_subsystem(&partition.extended_receiver(), n, k)?;
    Ok((s, er))
}

/// Selects `V-hat` from a full k-sector propagator.
pub fn transfer_block(
    v_k: &CMatrix,
    partition: &Partition,
    k: usize,
    tau: f64,
) -> Result<TransferBlock> {
    let dim = k_states(partition.n_sites(), k)?.len();
    if v_k.nrows() != dim || v_k.ncols() != dim {
        return Err(PstError::DimensionMismatch {
            expected: dim,
            got: v_k.nrows(),
            context: "propagator size vs chain k-sector",
        });
    }
    let (s, er) = embeddings(partition, k)?;
    let v_hat = CMatrix::from_fn(er.len(), s.len(), |r, c| {
        v_k[(er.chain_ordinal(r), s.chain_ordinal(c))]
    });
    Ok(TransferBlock {
        v_hat,
        tau,
        k,
        n_s: partition.n_s(),
        n_er: partition.n_er(),
    })
}

/// Cached evaluator of `V-hat(tau)` for one chain, partition and sector.
///
/// Only the ER rows and S rows of the eigenvector matrix are kept, so one
/// evaluation costs `O(N_ER * N_S * dim)` instead of a full propagator.
#[derive(Debug, Clone)]
pub struct TransferEvaluator {
    values: DVector<f64>,
    er_rows: CMatrix,
    s_rows_adj: CMatrix,
    k: usize,
    n_s: usize,
    n_er: usize,
    eig: SectorEigensystem,
}

impl TransferEvaluator {
    pub fn new(couplings: &CouplingMatrix, partition: &Partition, k: usize) -> Result<Self> {
        let n = partition.n_sites();
        if couplings.n() != n {
            return Err(PstError::DimensionMismatch {
                expected: n,
                got: couplings.n(),
                context: "partition size vs coupling matrix",
            });
        }
        let basis = k_states(n, k)?;
        let h = hamiltonian_block(couplings, &basis)?;
        let eig = eigendecompose(&h)?;
        let (s, er) = embeddings(partition, k)?;
        let dim = eig.dim();
        let er_rows = CMatrix::from_fn(er.len(), dim, |r, m| eig.vectors[(er.chain_ordinal(r), m)]);
        let s_rows_adj = CMatrix::from_fn(dim, s.len(), |m, c| {
            eig.vectors[(s.chain_ordinal(c), m)].conj()
        });
        Ok(TransferEvaluator {
            values: eig.values.clone(),
            er_rows,
            s_rows_adj,
            k,
            n_s: partition.n_s(),
            n_er: partition.n_er(),
            eig,
        })
    }

    pub fn eigensystem(&self) -> &SectorEigensystem {
        &self.eig
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn at(&self, tau: f64) -> TransferBlock {
        let mut right = self.s_rows_adj.clone();
        for (m, mut row) in right.row_iter_mut().enumerate() {
            row *= C64::from_polar(1.0, -self.values[m] * tau);
        }
        TransferBlock {
            v_hat: &self.er_rows * right,
            tau,
            k: self.k,
            n_s: self.n_s,
            n_er: self.n_er,
        }
    }
}

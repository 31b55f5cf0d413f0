//! Brute-force references built from Pauli matrices and Kronecker products.
#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use pstchain::basis::{embed_subsystem, lift_mask, mask_of, restrict_mask};
use pstchain::chain::{build_couplings, ChainSpec, CouplingMatrix, Partition};
use pstchain::dynamics::TransferEvaluator;
use pstchain::protocol::local_preserving_operator;
use pstchain::restore::{solve, RestoreProblem, RestoreSolution, SolverOptions};
use pstchain::{CMatrix, CVector, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)])
}

/// `factors[q]` acts on qubit `q`, which is bit `q` of the basis index.
pub fn kron_all(factors: &[CMatrix]) -> CMatrix {
    let mut op = CMatrix::identity(1, 1);
    for f in factors.iter().rev() {
        op = op.kronecker(f);
    }
    op
}

pub fn on_qubits(n: usize, ops: &[(usize, &CMatrix)]) -> CMatrix {
    let mut factors: Vec<CMatrix> = (0..n).map(|_| CMatrix::identity(2, 2)).collect();
    for (q, m) in ops {
        factors[*q] = (*m).clone();
    }
    kron_all(&factors)
}

/// `sum_{i<j} D_ij (Ix_i Ix_j + Iy_i Iy_j)` with `I = sigma / 2`, bitmask order.
pub fn pauli_hamiltonian(d: &CouplingMatrix) -> CMatrix {
    let n = d.n();
    let (x, y) = (pauli_x(), pauli_y());
    let mut h = CMatrix::zeros(1 << n, 1 << n);
    for i in 0..n {
        for j in i + 1..n {
            let xx = on_qubits(n, &[(i, &x), (j, &x)]);
            let yy = on_qubits(n, &[(i, &y), (j, &y)]);
            h += (xx + yy) * c(d.get(i, j) / 4.0, 0.0);
        }
    }
    h
}

/// `exp(-i H t)` from a dense Hermitian eigendecomposition.
pub fn expm_hermitian(h: &CMatrix, t: f64) -> CMatrix {
    let eig = SymmetricEigen::new(h.clone());
    let u = &eig.eigenvectors;
    let phases = CMatrix::from_diagonal(&eig.eigenvalues.map(|e| C64::from_polar(1.0, -e * t)));
    u * phases * u.adjoint()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Strictly increasing positions with random gaps in `[0.7, 1.3]`.
pub fn random_positions(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = vec![0.0];
    for _ in 1..n {
        let last = *p.last().unwrap();
        p.push(last + rng.random_range(0.7..1.3));
    }
    p
}

pub fn random_state(dim: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<C64> = (0..dim)
        .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

pub fn real_to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| c(x, 0.0))
}

pub fn solution_at(
    n: usize,
    n_er: usize,
    tau: f64,
    seed: u64,
) -> (CouplingMatrix, Partition, RestoreSolution) {
    let c = build_couplings(&ChainSpec::homogeneous(n)).unwrap();
    let part = Partition::new(n, 3, n_er).unwrap();
    let block = TransferEvaluator::new(&c, &part, 2).unwrap().at(tau);
    let sol = solve(&RestoreProblem::general(block, true, SolverOptions::general(seed)).unwrap())
        .unwrap();
    (c, part, sol)
}

/// The k-excitation protocol written out with dense Kronecker-built operators.
pub fn dense_protocol(
    c: &CouplingMatrix,
    part: &Partition,
    sol: &RestoreSolution,
    s: &[C64],
    tau: f64,
) -> (f64, Vec<C64>) {
    let n = part.n_sites();
    let dim = 1usize << (n + 1);
    let sender = embed_subsystem(&part.sender(), n, 2).unwrap();
    let mut psi = CVector::zeros(dim);
    for (j, &z) in s.iter().enumerate() {
        psi[sender.chain_mask(j) as usize] = z;
    }
    // B is the top bit, so the chain propagator repeats on both B halves
    let mut v_chain = CMatrix::zeros(dim, dim);
    let chain_dim = 1usize << n;
    let v = expm_hermitian(&pauli_hamiltonian(c), tau);
    for b in 0..2 {
        for i in 0..chain_dim {
            for j in 0..chain_dim {
                v_chain[(b * chain_dim + i, b * chain_dim + j)] = v[(i, j)];
            }
        }
    }
    let w_local = local_preserving_operator(sol).unwrap();
    let er_sites = part.extended_receiver();
    let mut w = CMatrix::zeros(dim, dim);
    for col in 0..dim {
        let local = restrict_mask(col as u64, &er_sites) as usize;
        let rest = col & !(mask_of(&er_sites) as usize);
        for r in 0..w_local.nrows() {
            w[(rest | lift_mask(r as u64, &er_sites) as usize, col)] = w_local[(r, local)];
        }
    }
    // B flip on every chain state whose receiver part is one of chi_j
    let recv = embed_subsystem(&part.receiver(), n, 2).unwrap();
    let r_mask = mask_of(&part.receiver()) as usize;
    let mut label = CMatrix::zeros(dim, dim);
    for col in 0..dim {
        let hit = recv
            .chain_masks()
            .iter()
            .any(|&m| col & r_mask == m as usize);
        let row = if hit { col ^ chain_dim } else { col };
        label[(row, col)] = C64::new(1.0, 0.0);
    }
    let out = label * w * v_chain * psi;
    let p: f64 = (chain_dim..dim).map(|i| out[i].norm_sqr()).sum();
    let amps = recv
        .chain_masks()
        .iter()
        .map(|&m| out[chain_dim | m as usize] / p.sqrt())
        .collect();
    (p, amps)
}

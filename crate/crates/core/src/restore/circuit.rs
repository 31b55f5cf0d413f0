//! Parameterized circuits for the extended-receiver unitary.
//!
//! Qubit `q` of an `n`-qubit register is bit `q` of the basis index, and
//! qubit 0 is the extended-receiver site closest to the sender.

use crate::basis::full_basis;
use crate::error::{PstError, Result};
use crate::{CMatrix, C64};

pub type Gate1 = [[C64; 2]; 2];

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `exp(-i sigma_z a / 2)`.
pub fn rz(a: f64) -> Gate1 {
    [
        [C64::from_polar(1.0, -a / 2.0), c(0.0, 0.0)],
        [c(0.0, 0.0), C64::from_polar(1.0, a / 2.0)],
    ]
}

/// `exp(-i sigma_y b / 2)`.
pub fn ry(b: f64) -> Gate1 {
    let (s, co) = (b / 2.0).sin_cos();
    [[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]]
}

pub fn hadamard() -> Gate1 {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    [[c(h, 0.0), c(h, 0.0)], [c(h, 0.0), c(-h, 0.0)]]
}

pub fn mul(a: &Gate1, b: &Gate1) -> Gate1 {
    let mut out = [[c(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn dagger(a: &Gate1) -> Gate1 {
    [
        [a[0][0].conj(), a[1][0].conj()],
        [a[0][1].conj(), a[1][1].conj()],
    ]
}

pub fn apply_1q(state: &mut [C64], q: usize, g: &Gate1) {
    let bit = 1usize << q;
    for i in 0..state.len() {
        if i & bit == 0 {
            let (a0, a1) = (state[i], state[i | bit]);
            state[i] = g[0][0] * a0 + g[0][1] * a1;
            state[i | bit] = g[1][0] * a0 + g[1][1] * a1;
        }
    }
}

pub fn apply_cnot(state: &mut [C64], control: usize, target: usize) {
    let (cb, tb) = (1usize << control, 1usize << target);
    for i in 0..state.len() {
        if i & cb != 0 && i & tb == 0 {
            state.swap(i, i | tb);
        }
    }
}

/// Rotation `Rz(beta) Ry(alpha) Rz(beta)^dagger` used inside the
/// excitation-preserving two-qubit gate.
pub fn sandwich_rotation(alpha: f64, beta: f64) -> Gate1 {
    mul(&mul(&rz(beta), &ry(alpha)), &dagger(&rz(beta)))
}

/// Two-qubit gate `C_ij R_i C_ji R_i^dagger C_ij` on qubits `i`, `j`.
pub fn apply_exchange_gate(state: &mut [C64], i: usize, j: usize, alpha: f64, beta: f64) {
    let r = sandwich_rotation(alpha, beta);
    apply_cnot(state, i, j);
    apply_1q(state, i, &dagger(&r));
    apply_cnot(state, j, i);
    apply_1q(state, i, &r);
    apply_cnot(state, i, j);
}

/// Which circuit family a parameter vector belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CircuitKind {
    Preserving,
    Nonpreserving,
}

/// A layered circuit ready to act on state vectors.
#[derive(Debug, Clone)]
pub struct Circuit {
    pub kind: CircuitKind,
    pub layers: usize,
    pub n_qubits: usize,
    /// Qubits receiving a final Hadamard (non-preserving family only).
    pub hadamards: Vec<usize>,
    pub params: Vec<f64>,
}

impl Circuit {
    pub fn param_count(kind: CircuitKind, layers: usize, n_qubits: usize) -> usize {
        match kind {
            CircuitKind::Preserving => 2 * layers * n_qubits,
            CircuitKind::Nonpreserving => 3 * layers * n_qubits,
        }
    }

    pub fn new(
        kind: CircuitKind,
        layers: usize,
        n_qubits: usize,
        hadamards: Vec<usize>,
        params: Vec<f64>,
    ) -> Result<Self> {
        let expected = Self::param_count(kind, layers, n_qubits);
        if params.len() != expected {
            return Err(PstError::ParameterCount {
                expected,
                got: params.len(),
            });
        }
        if !(2..=16).contains(&n_qubits) {
            return Err(PstError::InvalidArgument(format!(
                "circuit needs 2..=16 qubits, got {n_qubits}"
            )));
        }
        if hadamards.iter().any(|&q| q >= n_qubits) {
            return Err(PstError::InvalidArgument(
                "Hadamard qubit out of range".into(),
            ));
        }
        Ok(Circuit {
            kind,
            layers,
            n_qubits,
            hadamards,
            params,
        })
    }

    /// Applies the circuit to a `2^n` state vector in place.
    pub fn apply(&self, state: &mut [C64]) {
        let n = self.n_qubits;
        match self.kind {
            CircuitKind::Preserving => {
                for q in 0..self.layers {
                    for j in 0..n {
                        let p = 2 * (q * n + j);
                        apply_exchange_gate(
                            state,
                            j,
                            (j + 1) % n,
                            self.params[p],
                            self.params[p + 1],
                        );
                    }
                }
            }
            CircuitKind::Nonpreserving => {
                for q in 0..self.layers {
                    for l in 0..n {
                        let p = 3 * (q * n + l);
                        let (a, b, g) = (self.params[p], self.params[p + 1], self.params[p + 2]);
                        let u = mul(&mul(&rz(a), &ry(b)), &rz(g));
                        apply_1q(state, l, &u);
                    }
                    for i in 0..n {
                        for j in i + 1..n {
                            apply_cnot(state, i, j);
                        }
                    }
                }
                let h = hadamard();
                for &q in &self.hadamards {
                    apply_1q(state, q, &h);
                }
            }
        }
    }

    /// Full unitary in bitmask order.
    pub fn unitary(&self) -> CMatrix {
        let dim = 1usize << self.n_qubits;
        let mut u = CMatrix::zeros(dim, dim);
        let mut col = vec![C64::new(0.0, 0.0); dim];
        for j in 0..dim {
            col.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            col[j] = C64::new(1.0, 0.0);
            self.apply(&mut col);
            for i in 0..dim {
                u[(i, j)] = col[i];
            }
        }
        u
    }
}

/// Excitation-preserving circuit: `Q` layers of ring-coupled exchange gates.
/// Parameters are `(alpha, beta)` per gate, layer-major.
pub fn build_circuit_preserving(params: &[f64], layers: usize, n_er: usize) -> Result<CMatrix> {
    Ok(Circuit::new(
        CircuitKind::Preserving,
        layers,
        n_er,
        vec![],
        params.to_vec(),
    )?
    .unitary())
}

/// Non-preserving circuit: per layer, `Rz Ry Rz` on every qubit and then the
/// all-pairs CNOT cascade; finally Hadamards on `ancilla_qubits`.
/// Parameters are `(alpha, beta, gamma)` per qubit, layer-major.
pub fn build_circuit_nonpreserving(
    params: &[f64],
    layers: usize,
    n_er: usize,
    ancilla_qubits: &[usize],
) -> Result<CMatrix> {
    Ok(Circuit::new(
        CircuitKind::Nonpreserving,
        layers,
        n_er,
        ancilla_qubits.to_vec(),
        params.to_vec(),
    )?
    .unitary())
}

/// Reorders a bitmask-ordered operator into the excitation-sorted basis.
pub fn to_excitation_order(u: &CMatrix) -> Result<CMatrix> {
    let n = u.nrows().trailing_zeros() as usize;
    let order = full_basis(n)?;
    Ok(CMatrix::from_fn(u.nrows(), u.ncols(), |i, j| {
        u[(order[i] as usize, order[j] as usize)]
    }))
}

/// Largest entry coupling different excitation numbers.
pub fn off_block_mass(u: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..u.nrows() {
        for j in 0..u.ncols() {
            if (i as u64).count_ones() != (j as u64).count_ones() {
                worst = worst.max(u[(i, j)].norm());
            }
        }
    }
    worst
}

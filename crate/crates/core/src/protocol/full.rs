//! Full `2^N` state-vector machinery: sector-wise evolution, local operators
//! and controlled bit flips. Ancilla qubits sit above the chain bits.

use crate::basis::{full_basis, k_states, lift_mask, FULL_BASIS_MAX};
use crate::chain::{hamiltonian_block, CouplingMatrix};
use crate::dynamics::{eigendecompose, propagator};
use crate::error::{PstError, Result};
use crate::restore::RestoreSolution;
use crate::{CMatrix, C64};

/// Largest chain-plus-ancilla register simulated in the full space.
pub const FULL_SPACE_MAX: usize = FULL_BASIS_MAX;

pub fn check_full_size(n_chain: usize, n_ancilla: usize) -> Result<()> {
    if n_chain + n_ancilla > FULL_SPACE_MAX {
        return Err(PstError::SizeGuard {
            what: "chain sites plus ancillas",
            value: n_chain + n_ancilla,
            limit: FULL_SPACE_MAX,
        });
    }
    Ok(())
}

/// `exp(-i H tau)` on every excitation sector of an `n`-site chain.
#[derive(Debug, Clone)]
pub struct FullPropagator {
    n: usize,
    sectors: Vec<(Vec<usize>, CMatrix)>,
}

impl FullPropagator {
    pub fn new(couplings: &CouplingMatrix, tau: f64) -> Result<Self> {
        let n = couplings.n();
        check_full_size(n, 0)?;
        let mut sectors = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let basis = k_states(n, k)?;
            let h = hamiltonian_block(couplings, &basis)?;
            let u = propagator(&eigendecompose(&h)?, tau);
            sectors.push((basis.states().iter().map(|&m| m as usize).collect(), u));
        }
        Ok(FullPropagator { n, sectors })
    }

    /// Evolves the chain part of `amps`, leaving ancilla bits untouched.
    pub fn apply(&self, amps: &mut [C64]) {
        let chain_dim = 1usize << self.n;
        for hi in 0..amps.len() / chain_dim {
            let base = hi * chain_dim;
            for (masks, u) in &self.sectors {
                let v: Vec<C64> = masks.iter().map(|&m| amps[base | m]).collect();
                for (r, &m) in masks.iter().enumerate() {
                    amps[base | m] = (0..v.len()).map(|c| u[(r, c)] * v[c]).sum();
                }
            }
        }
    }
}

/// Applies `op` (local bitmask order, bit `t` on `sites[t]`) to the qubits
/// `sites` of a register of `n_bits` qubits.
pub fn apply_local(amps: &mut [C64], sites: &[usize], op: &CMatrix) {
    let local_dim = 1usize << sites.len();
    debug_assert_eq!(op.nrows(), local_dim);
    let lifts: Vec<usize> = (0..local_dim as u64)
        .map(|l| lift_mask(l, sites) as usize)
        .collect();
    let site_mask = lifts[local_dim - 1];
    let mut v = vec![C64::new(0.0, 0.0); local_dim];
    for rest in 0..amps.len() {
        if rest & site_mask != 0 {
            continue;
        }
        for (l, &lift) in lifts.iter().enumerate() {
            v[l] = amps[rest | lift];
        }
        for (r, &lift) in lifts.iter().enumerate() {
            amps[rest | lift] = (0..local_dim).map(|c| op[(r, c)] * v[c]).sum();
        }
    }
}

/// Flips `flip_mask` on every basis state with `idx & control_mask == control_value`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ControlledFlip {
    pub control_mask: usize,
    pub control_value: usize,
    pub flip_mask: usize,
}

impl ControlledFlip {
    pub fn new(control_mask: usize, control_value: usize, flip_mask: usize) -> Result<Self> {
        if control_mask & flip_mask != 0 || control_value & !control_mask != 0 {
            return Err(PstError::InvalidArgument(
                "controlled flip must act on qubits disjoint from its controls".into(),
            ));
        }
        Ok(ControlledFlip {
            control_mask,
            control_value,
            flip_mask,
        })
    }

    /// Controlled on the set bits of `pattern` only.
    pub fn on_excited(pattern: usize, flip_mask: usize) -> Result<Self> {
        Self::new(pattern, pattern, flip_mask)
    }

    pub fn apply(&self, amps: &mut [C64]) {
        if self.flip_mask == 0 {
            return;
        }
        let low = self.flip_mask & self.flip_mask.wrapping_neg();
        for idx in 0..amps.len() {
            if idx & low == 0 && idx & self.control_mask == self.control_value {
                let partner = idx ^ self.flip_mask;
                // each orbit {idx, partner} is visited once via its low-bit-clear member
                amps.swap(idx, partner);
            }
        }
    }
}

/// Preserving restoring operator on the ER qubits in local bitmask order:
/// the solved k-block, identity on every other sector.
pub fn local_preserving_operator(solution: &RestoreSolution) -> Result<CMatrix> {
    if !solution.mode.preserving() {
        return Err(PstError::ModeMismatch(format!(
            "{} restoring operator used where a preserving one is required",
            solution.mode.name()
        )));
    }
    let n_er = solution.n_er;
    check_full_size(n_er, 0)?;
    let states = k_states(n_er, solution.k)?;
    let block = &solution.completed_unitary;
    if block.nrows() != states.len() {
        return Err(PstError::DimensionMismatch {
            expected: states.len(),
            got: block.nrows(),
            context: "preserving restoring block vs ER sector",
        });
    }
    let mut op = CMatrix::identity(1 << n_er, 1 << n_er);
    for (r, &mr) in states.states().iter().enumerate() {
        for (c, &mc) in states.states().iter().enumerate() {
            op[(mr as usize, mc as usize)] = block[(r, c)];
        }
    }
    Ok(op)
}

/// Nonpreserving restoring operator on the ER qubits in local bitmask order.
pub fn local_full_operator(solution: &RestoreSolution) -> Result<CMatrix> {
    if solution.mode.preserving() {
        return Err(PstError::ModeMismatch(format!(
            "{} restoring operator used where a nonpreserving one is required",
            solution.mode.name()
        )));
    }
    let order = full_basis(solution.n_er)?;
    let u = &solution.completed_unitary;
    if u.nrows() != order.len() {
        return Err(PstError::DimensionMismatch {
            expected: order.len(),
            got: u.nrows(),
            context: "nonpreserving restoring operator vs ER register",
        });
    }
    let mut op = CMatrix::zeros(order.len(), order.len());
    for (r, &mr) in order.iter().enumerate() {
        for (c, &mc) in order.iter().enumerate() {
            op[(mr as usize, mc as usize)] = u[(r, c)];
        }
    }
    Ok(op)
}

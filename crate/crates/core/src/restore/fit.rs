//! Fitting circuit parameters to the restoring constraints.
//!
//! Circuits are unitary by construction, so only the restoring equations are
//! residuals: `p_ij = <target_i| W |b_j>` with `b_j` placed on the ER
//! k-states.

use rand::Rng;

use super::circuit::{to_excitation_order, Circuit, CircuitKind};
use super::lm::{finite_difference, minimize, JacobianRow, LeastSquares, LmOptions};
use super::{
    restart_rng, row_targets, run_restarts, Candidate, RestoreMode, RestoreProblem, RestoreSolution,
};
use crate::basis::{k_states, sector_offset};
use crate::error::{PstError, Result};
use crate::{CMatrix, C64};

const FD_STEP: f64 = 1e-6;

struct CircuitSystem {
    kind: CircuitKind,
    layers: usize,
    n_er: usize,
    hadamards: Vec<usize>,
    /// Transfer-block columns embedded in the `2^n_ER` register.
    inputs: Vec<Vec<C64>>,
    /// Bitmask of each constrained row, receiver rows first.
    target_masks: Vec<usize>,
    n_s_k: usize,
    n_params: usize,
}

impl CircuitSystem {
    fn circuit(&self, x: &[f64]) -> Circuit {
        Circuit {
            kind: self.kind,
            layers: self.layers,
            n_qubits: self.n_er,
            hadamards: self.hadamards.clone(),
            params: x.to_vec(),
        }
    }

    /// `p[i][j]`.
    fn overlaps(&self, x: &[f64]) -> Vec<Vec<C64>> {
        let c = self.circuit(x);
        let mut p = vec![vec![C64::new(0.0, 0.0); self.n_s_k]; self.target_masks.len()];
        for (j, input) in self.inputs.iter().enumerate() {
            let mut s = input.clone();
            c.apply(&mut s);
            for (i, &t) in self.target_masks.iter().enumerate() {
                p[i][j] = s[t];
            }
        }
        p
    }

    fn constraints(&self, x: &[f64]) -> (Vec<C64>, C64) {
        let p = self.overlaps(x);
        let n = self.n_s_k;
        let mut out = Vec::new();
        for (i, row) in p[..n].iter().enumerate() {
            out.extend(
                row[..n]
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, z)| *z),
            );
        }
        for i in 1..n {
            out.push(p[i][i] - p[0][0]);
        }
        for row in &p[n..] {
            out.extend(row.iter().copied());
        }
        (out, p[0][0])
    }

    fn residual_count(&self) -> usize {
        let n = self.n_s_k;
        2 * (n * (n - 1) + (n - 1) + (self.target_masks.len() - n) * n)
    }
}

impl LeastSquares for CircuitSystem {
    fn n_params(&self) -> usize {
        self.n_params
    }

    fn block_len(&self) -> usize {
        self.n_params
    }

    fn residuals(&self, x: &[f64]) -> Vec<f64> {
        self.constraints(x)
            .0
            .iter()
            .flat_map(|z| [z.re, z.im])
            .collect()
    }

    fn jacobian(&self, x: &[f64]) -> Vec<JacobianRow> {
        finite_difference(|y| self.residuals(y), x, FD_STEP)
    }
}

fn kind_of(preserving: bool) -> CircuitKind {
    if preserving {
        CircuitKind::Preserving
    } else {
        CircuitKind::Nonpreserving
    }
}

/// Working-space operator of a circuit: the k-block in ER k-state order for
/// the preserving family, the full excitation-ordered matrix otherwise.
pub fn circuit_operator(
    preserving: bool,
    params: &[f64],
    layers: usize,
    n_er: usize,
    n_s: usize,
    k: usize,
) -> Result<CMatrix> {
    let hadamards = if preserving {
        vec![]
    } else {
        (0..n_er - n_s).collect()
    };
    let u = Circuit::new(
        kind_of(preserving),
        layers,
        n_er,
        hadamards,
        params.to_vec(),
    )?
    .unitary();
    if preserving {
        let ks = k_states(n_er, k)?;
        let s = ks.states();
        Ok(CMatrix::from_fn(s.len(), s.len(), |i, j| {
            u[(s[i] as usize, s[j] as usize)]
        }))
    } else {
        to_excitation_order(&u)
    }
}

/// Best circuit over random restarts.
pub fn fit_circuit(problem: &RestoreProblem) -> Result<RestoreSolution> {
    problem.validate()?;
    let Some(layers) = problem.mode.layers() else {
        return Err(PstError::ModeMismatch(format!(
            "{} is not a circuit mode",
            problem.mode.name()
        )));
    };
    let preserving = problem.mode.preserving();
    let b = &problem.block;
    let n_er = b.n_er;
    if n_er > 12 {
        return Err(PstError::SizeGuard {
            what: "extended receiver qubits for circuit fitting",
            value: n_er,
            limit: 12,
        });
    }
    let kind = kind_of(preserving);
    let n_params = Circuit::param_count(kind, layers, n_er);
    let er_states = k_states(n_er, b.k)?;
    let dim = 1usize << n_er;
    let inputs: Vec<Vec<C64>> = (0..b.n_s_k())
        .map(|j| {
            let mut v = vec![C64::new(0.0, 0.0); dim];
            for (t, &mask) in er_states.states().iter().enumerate() {
                v[mask as usize] = b.v_hat[(t, j)];
            }
            v
        })
        .collect();
    let k_targets = row_targets(
        RestoreMode::CircuitPreserving { layers },
        n_er,
        b.n_s,
        b.k,
        problem.n_extra_zero_rows,
    )?;
    let sys = CircuitSystem {
        kind,
        layers,
        n_er,
        hadamards: if preserving {
            vec![]
        } else {
            (0..n_er - b.n_s).collect()
        },
        inputs,
        target_masks: k_targets
            .iter()
            .map(|&i| er_states.state(i) as usize)
            .collect(),
        n_s_k: b.n_s_k(),
        n_params,
    };
    if sys.residual_count() > n_params {
        return Err(PstError::InvalidArgument(format!(
            "{} real constraints exceed {} circuit parameters",
            sys.residual_count(),
            n_params
        )));
    }
    let opts = problem.options;
    let lm = LmOptions {
        tol: opts.tol / 2.0,
        max_iter: opts.max_iter,
    };
    let (best, records) = run_restarts(opts.restarts, opts.stop_at_first, |index| {
        let mut rng = restart_rng(opts.seed, index);
        let x0: Vec<f64> = (0..n_params)
            .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
            .collect();
        let out = minimize(&sys, x0, lm);
        let (c, lambda) = sys.constraints(&out.x);
        let residual = c.iter().map(|z| z.norm()).fold(0.0, f64::max);
        Candidate {
            index,
            converged: residual <= opts.tol,
            residual,
            lambda,
            x: out.x,
        }
    });
    let Some(best) = best else {
        let best_residual = records
            .iter()
            .map(|r| r.residual)
            .fold(f64::INFINITY, f64::min);
        return Err(PstError::NoConvergence {
            best_residual,
            restarts: opts.restarts,
        });
    };
    let completed_unitary = circuit_operator(preserving, &best.x, layers, n_er, b.n_s, b.k)?;
    let targets: Vec<usize> = if preserving {
        k_targets
    } else {
        let off = sector_offset(n_er, b.k);
        k_targets.iter().map(|i| i + off).collect()
    };
    let constrained_rows = CMatrix::from_fn(targets.len(), completed_unitary.ncols(), |i, j| {
        completed_unitary[(targets[i], j)]
    });
    Ok(RestoreSolution {
        mode: problem.mode,
        constrained_rows,
        row_targets: targets,
        lambda: best.lambda,
        residual: best.residual,
        completed_unitary,
        tau: b.tau,
        k: b.k,
        n_s: b.n_s,
        n_er,
        seed: opts.seed,
        restart: best.index,
        circuit_params: Some(best.x),
        records,
    })
}

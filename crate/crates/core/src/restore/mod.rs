//! Restoring unitaries on the extended receiver.
//!
//! A restoring `W_ER` maps every sender basis state's image `b_j` (a column
//! of the transfer block) onto `lambda` times the matching receiver state,
//! with a single `lambda` for all `j`. Rows of `W_ER` are the unknowns.

pub mod circuit;
pub mod complete;
pub mod fit;
pub mod general;
pub mod lm;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{binom, k_states, sector_offset};
use crate::dynamics::TransferBlock;
use crate::error::{PstError, Result};
use crate::lambda::feasibility;
use crate::{CMatrix, C64};

pub use circuit::{build_circuit_nonpreserving, build_circuit_preserving};
pub use complete::complete_unitary;
pub use fit::fit_circuit;

use complete::{
    orthonormalize_against, random_complex_vector, random_orthonormal_rows,
    row_orthonormality_error,
};
use general::GeneralSystem;
use lm::{minimize, LmOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RestoreMode {
    PreservingGeneral,
    NonpreservingGeneral,
    CircuitPreserving { layers: usize },
    CircuitNonpreserving { layers: usize },
}

impl RestoreMode {
    pub fn name(&self) -> &'static str {
        match self {
            RestoreMode::PreservingGeneral => "preserving-general",
            RestoreMode::NonpreservingGeneral => "nonpreserving-general",
            RestoreMode::CircuitPreserving { .. } => "circuit-preserving",
            RestoreMode::CircuitNonpreserving { .. } => "circuit-nonpreserving",
        }
    }

    pub fn parse(name: &str, layers: usize) -> Result<Self> {
        Ok(match name {
            "preserving-general" => RestoreMode::PreservingGeneral,
            "nonpreserving-general" => RestoreMode::NonpreservingGeneral,
            "circuit-preserving" => RestoreMode::CircuitPreserving { layers },
            "circuit-nonpreserving" => RestoreMode::CircuitNonpreserving { layers },
            other => return Err(PstError::Config(format!("unknown solver mode `{other}`"))),
        })
    }

    /// Whether `W_ER` keeps the excitation number.
    pub fn preserving(&self) -> bool {
        matches!(
            self,
            RestoreMode::PreservingGeneral | RestoreMode::CircuitPreserving { .. }
        )
    }

    pub fn layers(&self) -> Option<usize> {
        match self {
            RestoreMode::CircuitPreserving { layers }
            | RestoreMode::CircuitNonpreserving { layers } => Some(*layers),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub restarts: usize,
    pub tol: f64,
    pub seed: u64,
    pub max_iter: usize,
    /// Return the first converged restart instead of searching all of them.
    pub stop_at_first: bool,
}

impl SolverOptions {
    pub fn general(seed: u64) -> Self {
        SolverOptions {
            restarts: 200,
            tol: 1e-10,
            seed,
            max_iter: 500,
            stop_at_first: true,
        }
    }

    pub fn circuit(seed: u64) -> Self {
        SolverOptions {
            restarts: 1000,
            tol: 1e-10,
            seed,
            max_iter: 300,
            stop_at_first: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RestoreProblem {
    pub block: TransferBlock,
    pub mode: RestoreMode,
    pub n_extra_zero_rows: usize,
    pub options: SolverOptions,
}

impl RestoreProblem {
    /// Unrestricted problem with the extra zero rows that pin `|lambda|`.
    pub fn general(block: TransferBlock, preserving: bool, options: SolverOptions) -> Result<Self> {
        let n_s_k = block.n_s_k();
        let space = if preserving {
            block.n_er_k()
        } else {
            1usize << block.n_er
        };
        let need = 2 * n_s_k - 1;
        if space < need {
            return Err(PstError::Infeasible {
                n_er_k: space,
                required: need,
            });
        }
        let mode = if preserving {
            RestoreMode::PreservingGeneral
        } else {
            RestoreMode::NonpreservingGeneral
        };
        let p = RestoreProblem {
            block,
            mode,
            n_extra_zero_rows: space - need,
            options,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn circuit(
        block: TransferBlock,
        mode: RestoreMode,
        n_extra_zero_rows: usize,
        options: SolverOptions,
    ) -> Result<Self> {
        if mode.layers().is_none() {
            return Err(PstError::ModeMismatch(format!(
                "{} is not a circuit mode",
                mode.name()
            )));
        }
        let p = RestoreProblem {
            block,
            mode,
            n_extra_zero_rows,
            options,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.options.tol.is_nan() || self.options.tol <= 0.0 {
            return Err(PstError::InvalidArgument(
                "tolerance must be positive".into(),
            ));
        }
        if self.options.restarts == 0 {
            return Err(PstError::InvalidArgument(
                "at least one restart is needed".into(),
            ));
        }
        let b = &self.block;
        if b.n_s > b.n_er {
            return Err(PstError::InvalidPartition(
                "receiver larger than extended receiver".into(),
            ));
        }
        if b.n_s_k() == 0 {
            return Err(PstError::ExcitationOutOfRange { n: b.n_s, k: b.k });
        }
        match self.mode {
            RestoreMode::PreservingGeneral => {
                let f = feasibility(b.n_er, b.n_s, b.k);
                if !f.feasible {
                    return Err(PstError::Infeasible {
                        n_er_k: f.n_er_k as usize,
                        required: f.required as usize,
                    });
                }
                if self.n_extra_zero_rows != b.n_er_k() - (2 * b.n_s_k() - 1) {
                    return Err(PstError::InvalidArgument(
                        "extra zero rows must equal N_ER - (2 N_S - 1)".into(),
                    ));
                }
            }
            RestoreMode::NonpreservingGeneral => {
                if b.n_er > 12 {
                    return Err(PstError::SizeGuard {
                        what: "extended receiver qubits for non-preserving rows",
                        value: b.n_er,
                        limit: 12,
                    });
                }
                let need = 2 * b.n_s_k() - 1;
                if (1usize << b.n_er) < need {
                    return Err(PstError::Infeasible {
                        n_er_k: 1 << b.n_er,
                        required: need,
                    });
                }
            }
            RestoreMode::CircuitPreserving { layers }
            | RestoreMode::CircuitNonpreserving { layers } => {
                if layers == 0 {
                    return Err(PstError::InvalidArgument(
                        "circuit needs at least one layer".into(),
                    ));
                }
                let free = b.n_er_k() - b.n_s_k();
                if self.n_extra_zero_rows > free {
                    return Err(PstError::InvalidArgument(format!(
                        "only {free} non-receiver states available for extra zero rows"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Outcome of one random restart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestartRecord {
    pub index: usize,
    pub converged: bool,
    pub residual: f64,
    pub lambda_abs: f64,
}

#[derive(Debug, Clone)]
pub struct RestoreSolution {
    pub mode: RestoreMode,
    /// Constrained rows `a_i`: receiver rows first, then the extra zero rows.
    pub constrained_rows: CMatrix,
    /// Row index of each constrained row inside `completed_unitary`.
    pub row_targets: Vec<usize>,
    pub lambda: C64,
    pub residual: f64,
    /// Full `W_ER`: the k-block (ER k-state order) for preserving modes, the
    /// whole `2^n_ER` operator in excitation order otherwise.
    pub completed_unitary: CMatrix,
    pub tau: f64,
    pub k: usize,
    pub n_s: usize,
    pub n_er: usize,
    pub seed: u64,
    pub restart: usize,
    pub circuit_params: Option<Vec<f64>>,
    pub records: Vec<RestartRecord>,
}

/// Index of the receiver state `chi_j` (ancilla qubits ground) among the ER
/// k-states. `n_s` equals the receiver size.
pub fn receiver_targets(n_er: usize, n_s: usize, k: usize) -> Result<Vec<usize>> {
    let er = k_states(n_er, k)?;
    let s = k_states(n_s, k)?;
    let shift = n_er - n_s;
    Ok(s.states()
        .iter()
        .map(|&m| {
            er.index_of(m << shift)
                .expect("receiver state inside ER sector")
        })
        .collect())
}

/// Targets of all constrained rows in the working space of `mode`, receiver
/// rows first.
pub fn row_targets(
    mode: RestoreMode,
    n_er: usize,
    n_s: usize,
    k: usize,
    extra: usize,
) -> Result<Vec<usize>> {
    let recv = receiver_targets(n_er, n_s, k)?;
    let n_er_k = binom(n_er, k) as usize;
    let offset = sector_offset(n_er, k);
    let rest_k: Vec<usize> = (0..n_er_k).filter(|i| !recv.contains(i)).collect();
    Ok(match mode {
        RestoreMode::PreservingGeneral | RestoreMode::CircuitPreserving { .. } => recv
            .iter()
            .chain(rest_k.iter().take(extra))
            .copied()
            .collect(),
        RestoreMode::CircuitNonpreserving { .. } => recv
            .iter()
            .chain(rest_k.iter().take(extra))
            .map(|i| i + offset)
            .collect(),
        RestoreMode::NonpreservingGeneral => {
            let full: Vec<usize> = recv.iter().map(|i| i + offset).collect();
            let rest = (0..1usize << n_er)
                .filter(|i| !full.contains(i))
                .take(extra);
            full.iter().copied().chain(rest).collect()
        }
    })
}

/// Places constrained rows at their targets and fills the other rows with a
/// seeded orthonormal complement.
pub fn assemble_unitary(rows: &CMatrix, targets: &[usize], seed: u64) -> Result<CMatrix> {
    let dim = rows.ncols();
    let mut lead = rows.clone();
    if row_orthonormality_error(rows) > complete::ORTHONORMAL_TOL {
        let mut basis: Vec<Vec<C64>> = Vec::new();
        for r in rows.row_iter() {
            let v = orthonormalize_against(r.iter().copied().collect(), &basis)
                .ok_or(PstError::NotOrthonormal(1.0))?;
            basis.push(v);
        }
        lead = CMatrix::from_fn(rows.nrows(), dim, |i, j| basis[i][j]);
    }
    let full = complete_unitary(&lead, dim, seed)?;
    let mut out = CMatrix::zeros(dim, dim);
    let free: Vec<usize> = (0..dim).filter(|i| !targets.contains(i)).collect();
    for (i, &t) in targets.iter().enumerate() {
        out.row_mut(t).copy_from(&full.row(i));
    }
    for (c, &t) in free.iter().enumerate() {
        out.row_mut(t).copy_from(&full.row(targets.len() + c));
    }
    Ok(out)
}

/// A converged or failed restart carrying its raw parameters.
#[derive(Debug, Clone)]
pub(crate) struct Candidate {
    pub index: usize,
    pub converged: bool,
    pub residual: f64,
    pub lambda: C64,
    pub x: Vec<f64>,
}

impl Candidate {
    fn record(&self) -> RestartRecord {
        RestartRecord {
            index: self.index,
            converged: self.converged,
            residual: self.residual,
            lambda_abs: self.lambda.norm(),
        }
    }
}

/// Restart generator for `(seed, index)`.
pub fn restart_rng(seed: u64, index: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Best of two candidates: converged first, then larger `|lambda|`, lower
/// residual, lower index.
fn better(a: Candidate, b: Candidate) -> Candidate {
    use std::cmp::Ordering;
    let key = |c: &Candidate| {
        (
            c.converged,
            c.lambda.norm(),
            -c.residual,
            std::cmp::Reverse(c.index),
        )
    };
    let (ka, kb) = (key(&a), key(&b));
    let ord =
        ka.0.cmp(&kb.0)
            .then(ka.1.total_cmp(&kb.1))
            .then(ka.2.total_cmp(&kb.2))
            .then(ka.3.cmp(&kb.3));
    if ord == Ordering::Less {
        b
    } else {
        a
    }
}

/// Runs restarts in batches of the pool width. With `stop_at_first` the
/// lowest-index converged restart wins regardless of thread count.
pub(crate) fn run_restarts<F>(
    restarts: usize,
    stop_at_first: bool,
    run: F,
) -> (Option<Candidate>, Vec<RestartRecord>)
where
    F: Fn(usize) -> Candidate + Sync,
{
    let width = rayon::current_num_threads().max(1);
    let mut records = Vec::with_capacity(restarts);
    let mut best: Option<Candidate> = None;
    let mut start = 0;
    while start < restarts {
        let end = (start + width).min(restarts);
        let batch: Vec<Candidate> = (start..end).into_par_iter().map(&run).collect();
        records.extend(batch.iter().map(Candidate::record));
        if stop_at_first {
            if let Some(c) = batch.into_iter().find(|c| c.converged) {
                return (Some(c), records);
            }
        } else {
            for c in batch {
                best = Some(match best {
                    None => c,
                    Some(b) => better(b, c),
                });
            }
        }
        start = end;
    }
    if stop_at_first {
        return (None, records);
    }
    (best.filter(|b| b.converged), records)
}

fn best_residual(records: &[RestartRecord]) -> f64 {
    records
        .iter()
        .map(|r| r.residual)
        .fold(f64::INFINITY, f64::min)
}

/// Solves for unrestricted restoring rows (either general mode).
pub fn solve_general(problem: &RestoreProblem) -> Result<RestoreSolution> {
    problem.validate()?;
    let preserving = match problem.mode {
        RestoreMode::PreservingGeneral => true,
        RestoreMode::NonpreservingGeneral => false,
        m => {
            return Err(PstError::ModeMismatch(format!(
                "{} needs fit_circuit",
                m.name()
            )))
        }
    };
    let b = &problem.block;
    let n_s_k = b.n_s_k();
    let (dim, offset) = if preserving {
        (b.n_er_k(), 0)
    } else {
        (1usize << b.n_er, sector_offset(b.n_er, b.k))
    };
    let m = n_s_k + problem.n_extra_zero_rows;
    let cols: Vec<Vec<C64>> = (0..n_s_k).map(|j| b.column(j)).collect();
    let sys = GeneralSystem::new(cols.clone(), m, dim, offset);
    // Every zero row is orthogonal to the conjugated columns and to the
    // receiver rows, so the receiver rows live in a space of dimension
    // dim - extra spanned by the conjugated columns plus free directions.
    let reduced_dim = dim - problem.n_extra_zero_rows;
    let embedded: Vec<Vec<C64>> = cols
        .iter()
        .map(|c| {
            let mut v = vec![C64::new(0.0, 0.0); dim];
            v[offset..offset + c.len()].copy_from_slice(c);
            v
        })
        .collect();
    let opts = problem.options;
    let lm = LmOptions {
        tol: opts.tol / 2.0,
        max_iter: opts.max_iter,
    };
    let (best, records) = run_restarts(opts.restarts, opts.stop_at_first, |index| {
        let mut rng = restart_rng(opts.seed, index);
        let mut space: Vec<Vec<C64>> = Vec::with_capacity(reduced_dim);
        for e in &embedded {
            if let Some(v) = orthonormalize_against(e.iter().map(|z| z.conj()).collect(), &space) {
                space.push(v);
            }
        }
        while space.len() < reduced_dim {
            if let Some(v) = orthonormalize_against(random_complex_vector(&mut rng, dim), &space) {
                space.push(v);
            }
        }
        let reduced_cols: Vec<Vec<C64>> = embedded
            .iter()
            .map(|e| {
                space
                    .iter()
                    .map(|q| q.iter().zip(e).map(|(x, y)| x * y).sum())
                    .collect()
            })
            .collect();
        let reduced = GeneralSystem::new(reduced_cols, n_s_k, reduced_dim, 0);
        let x0 = GeneralSystem::pack(&random_orthonormal_rows(&mut rng, n_s_k, reduced_dim));
        let out = minimize(&reduced, x0, lm);

        let q = CMatrix::from_fn(reduced_dim, dim, |s, t| space[s][t]);
        let coeffs = reduced.unpack(&out.x);
        let c = CMatrix::from_fn(n_s_k, reduced_dim, |i, s| coeffs[i][s]);
        let receiver = &c * &q;
        let complement = complete_unitary(&q, dim, rng.random())
            .expect("orthonormal reduced basis")
            .rows(reduced_dim, dim - reduced_dim)
            .into_owned();
        let rows: Vec<Vec<C64>> = receiver
            .row_iter()
            .chain(complement.row_iter())
            .map(|r| r.iter().copied().collect())
            .collect();
        let x = GeneralSystem::pack(&rows);
        let residual = sys.violation(&x);
        Candidate {
            index,
            converged: residual <= opts.tol,
            residual,
            lambda: sys.p(&x, 0, 0),
            x,
        }
    });
    let Some(best) = best else {
        return Err(PstError::NoConvergence {
            best_residual: best_residual(&records),
            restarts: opts.restarts,
        });
    };
    let rows = sys.unpack(&best.x);
    let constrained_rows = CMatrix::from_fn(m, dim, |i, j| rows[i][j]);
    let targets = row_targets(problem.mode, b.n_er, b.n_s, b.k, problem.n_extra_zero_rows)?;
    let completed_unitary = assemble_unitary(&constrained_rows, &targets, opts.seed)?;
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
        n_er: b.n_er,
        seed: opts.seed,
        restart: best.index,
        circuit_params: None,
        records,
    })
}

/// Dispatches on the problem mode.
pub fn solve(problem: &RestoreProblem) -> Result<RestoreSolution> {
    match problem.mode {
        RestoreMode::PreservingGeneral | RestoreMode::NonpreservingGeneral => {
            solve_general(problem)
        }
        _ => fit_circuit(problem),
    }
}

/// `{abs, arg}` form of a complex number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarJson {
    pub abs: f64,
    pub arg: f64,
}

impl From<C64> for PolarJson {
    fn from(z: C64) -> Self {
        PolarJson {
            abs: z.norm(),
            arg: z.arg(),
        }
    }
}

/// On-disk form of a solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub mode: String,
    pub n_er: usize,
    pub n_s: usize,
    pub k: usize,
    pub tau: f64,
    pub lambda: PolarJson,
    pub residual: f64,
    pub seed: u64,
    pub rows: Vec<Vec<[f64; 2]>>,
    pub row_targets: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub layers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub circuit_params: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub config_hash: Option<String>,
}

impl RestoreSolution {
    pub fn to_file(&self) -> SolutionFile {
        SolutionFile {
            mode: self.mode.name().to_string(),
            n_er: self.n_er,
            n_s: self.n_s,
            k: self.k,
            tau: self.tau,
            lambda: self.lambda.into(),
            residual: self.residual,
            seed: self.seed,
            rows: self
                .constrained_rows
                .row_iter()
                .map(|r| r.iter().map(|z| [z.re, z.im]).collect())
                .collect(),
            row_targets: self.row_targets.clone(),
            layers: self.mode.layers(),
            circuit_params: self.circuit_params.clone(),
            config_hash: None,
        }
    }

    /// Rebuilds a solution, recomputing the completion from the stored seed
    /// (or the circuit from its parameters).
    pub fn from_file(f: &SolutionFile) -> Result<Self> {
        let mode = RestoreMode::parse(&f.mode, f.layers.unwrap_or(0))?;
        let dim = f.rows.first().map_or(0, |r| r.len());
        if f.rows.iter().any(|r| r.len() != dim) || f.rows.len() != f.row_targets.len() {
            return Err(PstError::InvalidArgument("ragged solution rows".into()));
        }
        let constrained_rows = CMatrix::from_fn(f.rows.len(), dim, |i, j| {
            C64::new(f.rows[i][j][0], f.rows[i][j][1])
        });
        let completed_unitary = match (&mode, &f.circuit_params) {
            (RestoreMode::CircuitPreserving { layers }, Some(p))
            | (RestoreMode::CircuitNonpreserving { layers }, Some(p)) => {
                fit::circuit_operator(mode.preserving(), p, *layers, f.n_er, f.n_s, f.k)?
            }
            _ => assemble_unitary(&constrained_rows, &f.row_targets, f.seed)?,
        };
        let lambda = C64::from_polar(f.lambda.abs, f.lambda.arg);
        Ok(RestoreSolution {
            mode,
            constrained_rows,
            row_targets: f.row_targets.clone(),
            lambda,
            residual: f.residual,
            completed_unitary,
            tau: f.tau,
            k: f.k,
            n_s: f.n_s,
            n_er: f.n_er,
            seed: f.seed,
            restart: 0,
            circuit_params: f.circuit_params.clone(),
            records: vec![],
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_file(&serde_json::from_str(s)?)
    }

    /// `max |a_i . b_j - lambda delta_ij|` against a transfer block, over the
    /// receiver rows and the extra zero rows.
    pub fn restoring_error(&self, block: &TransferBlock) -> f64 {
        let offset = if self.mode.preserving() {
            0
        } else {
            sector_offset(self.n_er, self.k)
        };
        let n = block.n_s_k();
        let mut worst = 0.0f64;
        for i in 0..self.constrained_rows.nrows() {
            for j in 0..n {
                let p: C64 = (0..block.n_er_k())
                    .map(|t| self.constrained_rows[(i, offset + t)] * block.v_hat[(t, j)])
                    .sum();
                let want = if i == j {
                    self.lambda
                } else {
                    C64::new(0.0, 0.0)
                };
                worst = worst.max((p - want).norm());
            }
        }
        worst
    }
}

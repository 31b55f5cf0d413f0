//! End-to-end transfer protocols simulated as state vectors with ancilla
//! post-selection.
//!
//! * [`run_k_excitation_pst`]: k-excitation sender states, run inside the
//!   chain's k-sector tensored with the flag qubit `B`.
//! * [`run_arbitrary_pst`]: an arbitrary state of a small register `S0`
//!   encoded into k-excitation states of `S` and decoded into `R0`.
//! * [`run_global_pst`]: garbage removal over the whole line.
//! * [`run_nonpreserving_pst`]: restoring operators that mix excitation
//!   sectors, with the extra marker qubit `D`.

mod full;
mod pipelines;
mod state;

pub use full::{
    apply_local, check_full_size, local_full_operator, local_preserving_operator, ControlledFlip,
    FullPropagator, FULL_SPACE_MAX,
};
pub use pipelines::{
    arbitrary_encoding_flips, prepare_k_state, run_arbitrary_pst, run_global_pst,
    run_k_excitation_pst, run_k_excitation_pst_full, run_nonpreserving_pst, s0_pattern,
    LineOperator,
};
pub use state::{measure_ancilla, measure_ancilla_sampled, Ancilla, BaseSpace, PureState};

use serde::{Deserialize, Serialize};

use crate::basis::binom;
use crate::error::{PstError, Result};
use crate::restore::{PolarJson, RestoreMode};
use crate::C64;

/// Largest residual for which a restoring solution counts as converged.
pub const ACCEPT_RESIDUAL: f64 = 1e-8;
/// Largest gap between a solution's time and the requested registration time.
pub const TAU_MATCH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    KExcitation,
    Arbitrary,
    Global,
    Nonpreserving,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::KExcitation => "k-excitation",
            Variant::Arbitrary => "arbitrary",
            Variant::Global => "global",
            Variant::Nonpreserving => "nonpreserving",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "k-excitation" => Ok(Variant::KExcitation),
            "arbitrary" => Ok(Variant::Arbitrary),
            "global" => Ok(Variant::Global),
            "nonpreserving" => Ok(Variant::Nonpreserving),
            other => Err(PstError::Config(format!(
                "unknown protocol variant '{other}'"
            ))),
        }
    }
}

/// Gate-count style cost of one protocol run, every constant set to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub encode_depth: usize,
    pub decode_depth: usize,
    pub label_depth: usize,
    /// Depth of a circuit-built restoring operator; `None` for general modes.
    pub wer_depth: Option<usize>,
    pub t0: f64,
    /// `ceil(1 / |lambda|^2)`; `None` when `lambda` vanishes.
    pub runs_expected: Option<u64>,
}

/// Register sizes entering [`cost_estimate`].
#[derive(Debug, Clone, Copy)]
pub struct CostSizes {
    pub n_sites: usize,
    pub n_s: usize,
    pub n_er: usize,
    pub k: usize,
    /// Qubits of `S0` (arbitrary variant only).
    pub n_s0: usize,
    pub mode: Option<RestoreMode>,
}

pub fn runs_expected(probability: f64) -> Option<u64> {
    (probability > 0.0).then(|| {
        let r = 1.0 / probability;
        // guard against 1/0.5 landing on 2.0000000000000004
        let near = r.round();
        if (r - near).abs() < 1e-12 {
            near as u64
        } else {
            r.ceil() as u64
        }
    })
}

pub fn cost_estimate(variant: Variant, sizes: CostSizes, lambda_abs: f64, t0: f64) -> CostEstimate {
    let k = sizes.k;
    let n_s_k = binom(sizes.n_s, k) as usize;
    let n_er_k = binom(sizes.n_er, k) as usize;
    let n_s0_states = 1usize << sizes.n_s0;
    let wer_depth = match sizes.mode {
        Some(RestoreMode::CircuitPreserving { layers }) => Some(layers * sizes.n_er),
        Some(RestoreMode::CircuitNonpreserving { layers }) => {
            Some(layers * sizes.n_er * sizes.n_er)
        }
        _ => None,
    };
    let (encode_depth, decode_depth, label_depth) = match variant {
        Variant::KExcitation => (0, 0, k * n_s_k),
        Variant::Arbitrary => {
            let map = k * n_s_k + n_s0_states * k * sizes.n_s0;
            (map, map, k * n_s0_states)
        }
        Variant::Global => (0, 0, sizes.n_sites - sizes.n_s),
        Variant::Nonpreserving => (0, 0, sizes.n_er * n_s_k + k * n_er_k),
    };
    CostEstimate {
        encode_depth,
        decode_depth,
        label_depth,
        wer_depth,
        t0,
        runs_expected: runs_expected(lambda_abs * lambda_abs),
    }
}

/// Repetitions needed so that every run fails with probability at most `epsilon`.
pub fn amplification_runs(p: f64, epsilon: f64) -> Result<u64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(PstError::InvalidArgument(format!(
            "success probability must lie in (0, 1), got {p}"
        )));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(PstError::InvalidArgument(format!(
            "failure target must lie in (0, 1), got {epsilon}"
        )));
    }
    let m = (1.0 / epsilon).log2() / (1.0 / (1.0 - p)).log2();
    Ok(m.ceil() as u64)
}

#[derive(Debug, Clone)]
pub struct ProtocolReport {
    pub variant: Variant,
    pub success_probability: f64,
    /// `|<psi_in|psi_out>|` of the normalized post-selected output.
    pub fidelity: f64,
    /// Normalized post-selected receiver amplitudes.
    pub output_amplitudes: Vec<C64>,
    pub lambda_expected: Option<C64>,
    /// Norm of the post-selected branch outside the expected output register.
    pub garbage_norm: f64,
    /// Largest deviation of `arg(out_j / in_j)` from a common phase.
    pub phase_spread: f64,
    pub cost: CostEstimate,
}

/// Overlap modulus of two vectors after normalizing both.
pub fn fidelity(a: &[C64], b: &[C64]) -> f64 {
    let na = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let nb = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: C64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    (dot.norm() / (na * nb)).min(1.0)
}

/// Spread of `arg(output_j / input_j)` over components with `|input_j| > 1e-6`.
pub fn phase_spread(input: &[C64], output: &[C64]) -> f64 {
    let ratios: Vec<C64> = input
        .iter()
        .zip(output)
        .filter(|(s, _)| s.norm() > 1e-6)
        .map(|(s, o)| o / s)
        .collect();
    let Some(first) = ratios.first().copied() else {
        return 0.0;
    };
    if first.norm() == 0.0 {
        return 0.0;
    }
    ratios
        .iter()
        .map(|r| (r / first).arg().abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Amplification {
    pub epsilon: f64,
    #[serde(rename = "M")]
    pub m: Option<u64>,
}

/// JSON form of a protocol run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportFile {
    pub variant: String,
    pub chain_id: String,
    pub k: usize,
    pub tau0: f64,
    pub lambda: Option<PolarJson>,
    pub success_probability: f64,
    pub fidelity: f64,
    pub runs_expected: Option<u64>,
    pub amplification: Amplification,
    pub seed: u64,
    pub output_amplitudes: Vec<[f64; 2]>,
    pub garbage_norm: f64,
    pub phase_spread: f64,
    pub cost: CostEstimate,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub config_hash: Option<String>,
}

impl ProtocolReport {
    pub fn to_file(&self, chain_id: &str, k: usize, seed: u64, epsilon: f64) -> ReportFile {
        let p = self.success_probability;
        ReportFile {
            variant: self.variant.name().into(),
            chain_id: chain_id.into(),
            k,
            tau0: self.cost.t0,
            lambda: self.lambda_expected.map(|l| PolarJson {
                abs: l.norm(),
                arg: l.arg(),
            }),
            success_probability: p,
            fidelity: self.fidelity,
            runs_expected: self.cost.runs_expected,
            amplification: Amplification {
                epsilon,
                m: amplification_runs(p, epsilon).ok(),
            },
            seed,
            output_amplitudes: self
                .output_amplitudes
                .iter()
                .map(|z| [z.re, z.im])
                .collect(),
            garbage_norm: self.garbage_norm,
            phase_spread: self.phase_spread,
            cost: self.cost.clone(),
            config_hash: None,
        }
    }
}

use log::warn;

use crate::basis::{binom, embed_subsystem, lift_mask, mask_of};
use crate::chain::{hamiltonian_block, CouplingMatrix, Partition};
use crate::dynamics::{eigendecompose, SectorEigensystem};
use crate::error::{PstError, Result};
use crate::restore::RestoreSolution;
use crate::{basis::k_states, CMatrix, CVector, C64};

use super::full::{
    apply_local, check_full_size, local_full_operator, local_preserving_operator, ControlledFlip,
    FullPropagator,
};
use super::state::{measure_ancilla, Ancilla, BaseSpace, PureState};
use super::{
    cost_estimate, fidelity, phase_spread, CostSizes, ProtocolReport, Variant, ACCEPT_RESIDUAL,
    TAU_MATCH_TOL,
};

const NORM_TOL: f64 = 1e-10;

fn normalized(s: &[C64], what: &str) -> Result<Vec<C64>> {
    let norm = s.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if !norm.is_finite() || norm == 0.0 {
        return Err(PstError::InvalidArgument(format!("{what} has zero norm")));
    }
    if (norm - 1.0).abs() > NORM_TOL {
        warn!("{what} has norm {norm}; renormalizing");
    }
    Ok(s.iter().map(|z| z / norm).collect())
}

fn check_solution(
    solution: &RestoreSolution,
    partition: &Partition,
    k: usize,
    tau0: f64,
    preserving: bool,
) -> Result<()> {
    if solution.mode.preserving() != preserving {
        return Err(PstError::ModeMismatch(format!(
            "protocol needs a {} restoring operator, solution is {}",
            if preserving {
                "preserving"
            } else {
                "nonpreserving"
            },
            solution.mode.name()
        )));
    }
    if solution.residual > ACCEPT_RESIDUAL || !solution.residual.is_finite() {
        return Err(PstError::Unconverged(solution.residual));
    }
    if (solution.tau - tau0).abs() > TAU_MATCH_TOL {
        return Err(PstError::TauMismatch {
            solution: solution.tau,
            requested: tau0,
        });
    }
    for (expected, got, context) in [
        (
            partition.n_er(),
            solution.n_er,
            "solution n_ER vs partition",
        ),
        (partition.n_s(), solution.n_s, "solution n_S vs partition"),
        (k, solution.k, "solution excitation number"),
    ] {
        if expected != got {
            return Err(PstError::DimensionMismatch {
                expected,
                got,
                context,
            });
        }
    }
    Ok(())
}

fn check_chain(couplings: &CouplingMatrix, partition: &Partition) -> Result<()> {
    if couplings.n() != partition.n_sites() {
        return Err(PstError::DimensionMismatch {
            expected: partition.n_sites(),
            got: couplings.n(),
            context: "partition size vs coupling matrix",
        });
    }
    Ok(())
}

fn sizes(
    partition: &Partition,
    k: usize,
    n_s0: usize,
    solution: Option<&RestoreSolution>,
) -> CostSizes {
    CostSizes {
        n_sites: partition.n_sites(),
        n_s: partition.n_s(),
        n_er: partition.n_er(),
        k,
        n_s0,
        mode: solution.map(|s| s.mode),
    }
}

/// Chain k-sector state carrying sender amplitudes `s`, everything else ground.
pub fn prepare_k_state(s: &[C64], partition: &Partition, k: usize) -> Result<PureState> {
    let n = partition.n_sites();
    let sender = embed_subsystem(&partition.sender(), n, k)?;
    if s.len() != sender.len() {
        return Err(PstError::DimensionMismatch {
            expected: sender.len(),
            got: s.len(),
            context: "sender amplitudes vs sender k-states",
        });
    }
    let s = normalized(s, "sender state")?;
    let mut amps = vec![C64::new(0.0, 0.0); binom(n, k) as usize];
    for (j, &z) in s.iter().enumerate() {
        amps[sender.chain_ordinal(j)] = z;
    }
    PureState::new(amps, BaseSpace::Sector { n, k }, vec![])
}

fn evolve_in_sector(eig: &SectorEigensystem, psi: &[C64], tau: f64) -> Vec<C64> {
    let v = CVector::from_column_slice(psi);
    let mut c = eig.vectors.adjoint() * v;
    for (m, z) in c.iter_mut().enumerate() {
        *z *= C64::from_polar(1.0, -eig.values[m] * tau);
    }
    (&eig.vectors * c).iter().copied().collect()
}

/// Norm of the post-selected state outside the output indices.
fn garbage_outside(post: Option<&PureState>, output_indices: &[usize]) -> f64 {
    let Some(post) = post else { return 0.0 };
    post.amplitudes
        .iter()
        .enumerate()
        .filter(|(i, _)| !output_indices.contains(i))
        .map(|(_, z)| z.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Reads the output register from the post-selected state.
fn read_output(post: Option<&PureState>, output_indices: &[usize]) -> (Vec<C64>, f64) {
    let output = match post {
        Some(post) => output_indices.iter().map(|&i| post.amplitudes[i]).collect(),
        None => vec![C64::new(0.0, 0.0); output_indices.len()],
    };
    (output, garbage_outside(post, output_indices))
}

fn finish(
    variant: Variant,
    input: &[C64],
    p: f64,
    (output, garbage_norm): (Vec<C64>, f64),
    lambda: Option<C64>,
    sizes: CostSizes,
    tau0: f64,
) -> ProtocolReport {
    let lambda_abs = lambda.map(|l| l.norm()).unwrap_or_else(|| p.sqrt());
    ProtocolReport {
        variant,
        success_probability: p,
        fidelity: fidelity(input, &output),
        phase_spread: phase_spread(input, &output),
        output_amplitudes: output,
        lambda_expected: lambda,
        garbage_norm,
        cost: cost_estimate(variant, sizes, lambda_abs, tau0),
    }
}

/// k-excitation protocol inside the chain k-sector tensored with `B`.
pub fn run_k_excitation_pst(
    couplings: &CouplingMatrix,
    partition: &Partition,
    k: usize,
    s: &[C64],
    solution: &RestoreSolution,
    tau0: f64,
) -> Result<ProtocolReport> {
    check_chain(couplings, partition)?;
    check_solution(solution, partition, k, tau0, true)?;
    let n = partition.n_sites();
    let input = normalized(s, "sender state")?;
    let state = prepare_k_state(&input, partition, k)?;
    let basis = k_states(n, k)?;
    let eig = eigendecompose(&hamiltonian_block(couplings, &basis)?)?;
    let evolved = evolve_in_sector(&eig, &state.amplitudes, tau0);
    let mut state = PureState::new(evolved, state.base, vec![])?.adjoin(Ancilla::B);
    let dim = basis.len();

    let er = embed_subsystem(&partition.extended_receiver(), n, k)?;
    let er_part = CVector::from_iterator(
        er.len(),
        er.chain_ordinals().iter().map(|&o| state.amplitudes[o]),
    );
    let restored = &solution.completed_unitary * er_part;
    for (r, &o) in er.chain_ordinals().iter().enumerate() {
        state.amplitudes[o] = restored[r];
    }

    let recv = embed_subsystem(&partition.receiver(), n, k)?;
    for &o in recv.chain_ordinals() {
        state.amplitudes.swap(o, dim + o);
    }
    let (p, post) = measure_ancilla(&state, Ancilla::B, true)?;
    let indices: Vec<usize> = recv.chain_ordinals().iter().map(|&o| dim + o).collect();
    let output = read_output(post.as_ref(), &indices);
    Ok(finish(
        Variant::KExcitation,
        &input,
        p,
        output,
        Some(solution.lambda),
        sizes(partition, k, 0, Some(solution)),
        tau0,
    ))
}

/// The k-excitation protocol simulated over all `2^N` chain states plus `B`.
pub fn run_k_excitation_pst_full(
    couplings: &CouplingMatrix,
    partition: &Partition,
    k: usize,
    s: &[C64],
    solution: &RestoreSolution,
    tau0: f64,
) -> Result<ProtocolReport> {
    check_chain(couplings, partition)?;
    check_solution(solution, partition, k, tau0, true)?;
    let n = partition.n_sites();
    check_full_size(n, 1)?;
    let input = normalized(s, "sender state")?;
    let sender = embed_subsystem(&partition.sender(), n, k)?;
    if input.len() != sender.len() {
        return Err(PstError::DimensionMismatch {
            expected: sender.len(),
            got: input.len(),
            context: "sender amplitudes vs sender k-states",
        });
    }
    let b = 1usize << n;
    let mut amps = vec![C64::new(0.0, 0.0); 2 * b];
    for (j, &z) in input.iter().enumerate() {
        amps[sender.chain_mask(j) as usize] = z;
    }
    FullPropagator::new(couplings, tau0)?.apply(&mut amps);
    apply_local(
        &mut amps,
        &partition.extended_receiver(),
        &local_preserving_operator(solution)?,
    );
    let recv = embed_subsystem(&partition.receiver(), n, k)?;
    for &m in recv.chain_masks() {
        ControlledFlip::on_excited(m as usize, b)?.apply(&mut amps);
    }
    let state = PureState::new(amps, BaseSpace::Full { n }, vec![Ancilla::B])?;
    let (p, post) = measure_ancilla(&state, Ancilla::B, true)?;
    let indices: Vec<usize> = recv.chain_masks().iter().map(|&m| b | m as usize).collect();
    let output = read_output(post.as_ref(), &indices);
    Ok(finish(
        Variant::KExcitation,
        &input,
        p,
        output,
        Some(solution.lambda),
        sizes(partition, k, 0, Some(solution)),
        tau0,
    ))
}

/// Basis pattern of ordinal `j` on a register: the first site holds the most
/// significant bit, as in the ket `|j>`.
pub fn s0_pattern(sites: &[usize], j: usize) -> usize {
    let m = sites.len();
    sites
        .iter()
        .enumerate()
        .filter(|(t, _)| j >> (m - 1 - t) & 1 == 1)
        .fold(0usize, |acc, (_, &s)| acc | (1 << s))
}

/// Encoding (`S0 -> S`, then `S0` reset) and decoding (`R -> R0`, then `R`
/// reset) cascades as controlled flips, in application order.
pub fn arbitrary_encoding_flips(
    partition: &Partition,
    k: usize,
) -> Result<(Vec<ControlledFlip>, Vec<ControlledFlip>)> {
    let n = partition.n_sites();
    let (Some(s0), Some(r0)) = (partition.s0(), partition.r0()) else {
        return Err(PstError::InvalidPartition(
            "arbitrary-state protocol needs S0 and R0 registers".into(),
        ));
    };
    let n_states = 1usize << s0.len();
    let sender = embed_subsystem(&partition.sender(), n, k)?;
    if n_states > sender.len() {
        return Err(PstError::DimensionMismatch {
            expected: sender.len(),
            got: n_states,
            context: "2^n_S0 exceeds the sender k-states",
        });
    }
    let recv = embed_subsystem(&partition.receiver(), n, k)?;
    let s0_mask = mask_of(s0) as usize;
    let r0_mask = mask_of(r0) as usize;
    let mut encode = Vec::with_capacity(2 * n_states);
    for j in 0..n_states {
        encode.push(ControlledFlip::new(
            s0_mask,
            s0_pattern(s0, j),
            sender.chain_mask(j) as usize,
        )?);
    }
    for j in 0..n_states {
        encode.push(ControlledFlip::on_excited(
            sender.chain_mask(j) as usize,
            s0_pattern(s0, j),
        )?);
    }
    let mut decode = Vec::with_capacity(2 * n_states);
    for j in 0..n_states {
        decode.push(ControlledFlip::on_excited(
            recv.chain_mask(j) as usize,
            s0_pattern(r0, j),
        )?);
    }
    for j in 0..n_states {
        decode.push(ControlledFlip::new(
            r0_mask,
            s0_pattern(r0, j),
            recv.chain_mask(j) as usize,
        )?);
    }
    Ok((encode, decode))
}

/// Arbitrary state of `S0` carried by k-excitation states of `S` and
/// delivered to `R0`.
pub fn run_arbitrary_pst(
    couplings: &CouplingMatrix,
    partition: &Partition,
    k: usize,
    input: &[C64],
    solution: &RestoreSolution,
    tau0: f64,
) -> Result<ProtocolReport> {
    check_chain(couplings, partition)?;
    let n = partition.n_sites();
    check_full_size(n, 1)?;
    let (encode, decode) = arbitrary_encoding_flips(partition, k)?;
    let s0 = partition.s0().expect("checked by encoding").to_vec();
    let r0 = partition.r0().expect("checked by encoding").to_vec();
    let n_states = 1usize << s0.len();
    if input.len() != n_states {
        return Err(PstError::DimensionMismatch {
            expected: n_states,
            got: input.len(),
            context: "S0 input state length",
        });
    }
    check_solution(solution, partition, k, tau0, true)?;
    let input = normalized(input, "S0 input state")?;

    let b = 1usize << n;
    let mut amps = vec![C64::new(0.0, 0.0); 2 * b];
    for (j, &z) in input.iter().enumerate() {
        amps[s0_pattern(&s0, j)] = z;
    }
    encode.iter().for_each(|f| f.apply(&mut amps));
    FullPropagator::new(couplings, tau0)?.apply(&mut amps);
    apply_local(
        &mut amps,
        &partition.extended_receiver(),
        &local_preserving_operator(solution)?,
    );
    let recv = embed_subsystem(&partition.receiver(), n, k)?;
    for j in 0..n_states {
        ControlledFlip::on_excited(recv.chain_mask(j) as usize, b)?.apply(&mut amps);
    }
    decode.iter().for_each(|f| f.apply(&mut amps));

    let state = PureState::new(amps, BaseSpace::Full { n }, vec![Ancilla::B])?;
    let (p, post) = measure_ancilla(&state, Ancilla::B, true)?;
    let indices: Vec<usize> = (0..n_states).map(|j| b | s0_pattern(&r0, j)).collect();
    let output = read_output(post.as_ref(), &indices);
    Ok(finish(
        Variant::Arbitrary,
        &input,
        p,
        output,
        Some(solution.lambda),
        sizes(partition, k, s0.len(), Some(solution)),
        tau0,
    ))
}

/// Operator applied to the line before garbage removal.
#[derive(Debug, Clone, Copy)]
pub enum LineOperator<'a> {
    /// `2^N` matrix over the whole chain in bitmask order.
    Dense(&'a CMatrix),
    /// Preserving restoring solution embedded on the extended receiver.
    Restoring(&'a RestoreSolution),
}

/// Largest chain for the global garbage-removal protocol.
pub const GLOBAL_MAX_SITES: usize = 12;

/// Garbage removal over the whole line: `B` flips on the subspace where
/// `S` and the transmission line are empty.
///
/// `input` is indexed by sender bitmask (bit `t` on sender site `t`) and must
/// lie in one excitation sector.
pub fn run_global_pst(
    couplings: &CouplingMatrix,
    partition: &Partition,
    input: &[C64],
    op: LineOperator<'_>,
    tau0: f64,
) -> Result<ProtocolReport> {
    check_chain(couplings, partition)?;
    let n = partition.n_sites();
    if n > GLOBAL_MAX_SITES {
        return Err(PstError::SizeGuard {
            what: "global protocol chain size",
            value: n,
            limit: GLOBAL_MAX_SITES,
        });
    }
    let sender = partition.sender();
    if input.len() != 1 << sender.len() {
        return Err(PstError::DimensionMismatch {
            expected: 1 << sender.len(),
            got: input.len(),
            context: "sender register state length",
        });
    }
    let input = normalized(input, "sender state")?;
    let mut sectors = input
        .iter()
        .enumerate()
        .filter(|(_, z)| z.norm() > 1e-14)
        .map(|(l, _)| l.count_ones() as usize);
    let k = sectors.next().expect("nonzero norm");
    if sectors.any(|m| m != k) {
        return Err(PstError::InvalidArgument(
            "sender state mixes excitation sectors; the global protocol needs a single sector"
                .into(),
        ));
    }
    let mut lambda = None;
    let mut mode = None;
    if let LineOperator::Restoring(solution) = op {
        check_solution(solution, partition, k, tau0, true)?;
        lambda = Some(solution.lambda);
        mode = Some(solution);
    }

    let b = 1usize << n;
    let mut amps = vec![C64::new(0.0, 0.0); 2 * b];
    for (l, &z) in input.iter().enumerate() {
        amps[lift_mask(l as u64, &sender) as usize] = z;
    }
    FullPropagator::new(couplings, tau0)?.apply(&mut amps);
    match op {
        LineOperator::Dense(w) => {
            if w.nrows() != b || w.ncols() != b {
                return Err(PstError::DimensionMismatch {
                    expected: b,
                    got: w.nrows(),
                    context: "line operator size",
                });
            }
            let all: Vec<usize> = (0..n).collect();
            apply_local(&mut amps, &all, w);
        }
        LineOperator::Restoring(solution) => {
            apply_local(
                &mut amps,
                &partition.extended_receiver(),
                &local_preserving_operator(solution)?,
            );
        }
    }
    let receiver = partition.receiver();
    let rest_mask = (b - 1) & !(mask_of(&receiver) as usize);
    ControlledFlip::new(rest_mask, 0, b)?.apply(&mut amps);

    let state = PureState::new(amps, BaseSpace::Full { n }, vec![Ancilla::B])?;
    let (p, post) = measure_ancilla(&state, Ancilla::B, true)?;
    let indices: Vec<usize> = (0..input.len() as u64)
        .map(|l| b | lift_mask(l, &receiver) as usize)
        .collect();
    let output = read_output(post.as_ref(), &indices);
    Ok(finish(
        Variant::Global,
        &input,
        p,
        output,
        lambda,
        sizes(partition, k, 0, mode),
        tau0,
    ))
}

/// Protocol with a restoring operator that mixes excitation sectors; the
/// marker `D` records that ER held exactly `k` excitations before restoring.
pub fn run_nonpreserving_pst(
    couplings: &CouplingMatrix,
    partition: &Partition,
    k: usize,
    s: &[C64],
    solution: &RestoreSolution,
    tau0: f64,
) -> Result<ProtocolReport> {
    check_chain(couplings, partition)?;
    check_solution(solution, partition, k, tau0, false)?;
    let n = partition.n_sites();
    check_full_size(n, 2)?;
    let input = normalized(s, "sender state")?;
    let sender = embed_subsystem(&partition.sender(), n, k)?;
    if input.len() != sender.len() {
        return Err(PstError::DimensionMismatch {
            expected: sender.len(),
            got: input.len(),
            context: "sender amplitudes vs sender k-states",
        });
    }
    let b = 1usize << n;
    let d = b << 1;
    let mut amps = vec![C64::new(0.0, 0.0); 4 * b];
    for (j, &z) in input.iter().enumerate() {
        amps[sender.chain_mask(j) as usize] = z;
    }
    FullPropagator::new(couplings, tau0)?.apply(&mut amps);

    let er_sites = partition.extended_receiver();
    let er = embed_subsystem(&er_sites, n, k)?;
    for &m in er.chain_masks() {
        ControlledFlip::on_excited(m as usize, d)?.apply(&mut amps);
    }
    apply_local(&mut amps, &er_sites, &local_full_operator(solution)?);
    let recv = embed_subsystem(&partition.receiver(), n, k)?;
    let control =
        (mask_of(&partition.ancilla_sites()) | mask_of(&partition.receiver())) as usize | d;
    for &m in recv.chain_masks() {
        ControlledFlip::new(control, m as usize | d, b)?.apply(&mut amps);
    }

    let state = PureState::new(amps, BaseSpace::Full { n }, vec![Ancilla::B, Ancilla::D])?;
    let (p, post) = measure_ancilla(&state, Ancilla::B, true)?;
    let indices: Vec<usize> = recv
        .chain_masks()
        .iter()
        .map(|&m| b | d | m as usize)
        .collect();
    let output = read_output(post.as_ref(), &indices);
    Ok(finish(
        Variant::Nonpreserving,
        &input,
        p,
        output,
        Some(solution.lambda),
        sizes(partition, k, 0, Some(solution)),
        tau0,
    ))
}

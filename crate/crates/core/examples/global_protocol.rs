//! Global variant: the ancilla is flipped only when every site outside the
//! receiver is in the ground state, over the full 2^N space.

use pstchain::chain::{build_couplings, ChainSpec, Partition};
use pstchain::dynamics::TransferEvaluator;
use pstchain::protocol::{run_global_pst, LineOperator};
use pstchain::restore::{solve, RestoreProblem, SolverOptions};
use pstchain::C64;

fn main() -> pstchain::error::Result<()> {
    let tau0 = 14.391;
    let couplings = build_couplings(&ChainSpec::homogeneous(10))?;
    let part = Partition::new(10, 3, 5)?;
    let block = TransferEvaluator::new(&couplings, &part, 2)?.at(tau0);
    let sol = solve(&RestoreProblem::general(
        block,
        true,
        SolverOptions::general(0),
    )?)?;

    // sender register in bitmask order; only two-excitation patterns populated
    let mut input = vec![C64::new(0.0, 0.0); 8];
    input[0b011] = C64::new(0.8, 0.0);
    input[0b110] = C64::new(0.0, 0.6);
    let r = run_global_pst(
        &couplings,
        &part,
        &input,
        LineOperator::Restoring(&sol),
        tau0,
    )?;
    println!(
        "probability {:.6}, fidelity {:.12}",
        r.success_probability, r.fidelity
    );
    for (mask, z) in r
        .output_amplitudes
        .iter()
        .enumerate()
        .filter(|(_, z)| z.norm() > 1e-12)
    {
        println!("receiver |{mask:03b}>: {z:.4}");
    }
    Ok(())
}

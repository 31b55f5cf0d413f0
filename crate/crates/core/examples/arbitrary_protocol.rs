//! Transfer an arbitrary one-qubit state: encode it into the two-excitation
//! sender, run the chain, restore, decode onto a receiver-side qubit.

use pstchain::chain::{build_couplings, ChainSpec, Partition};
use pstchain::dynamics::TransferEvaluator;
use pstchain::protocol::run_arbitrary_pst;
use pstchain::restore::{solve, RestoreProblem, SolverOptions};
use pstchain::C64;

fn main() -> pstchain::error::Result<()> {
    let tau0 = 14.391;
    let couplings = build_couplings(&ChainSpec::homogeneous(10))?;
    // input qubit on site 4, output qubit on site 7 (0-based 3 and 6)
    let part = Partition::new(10, 3, 5)?.with_registers(vec![3], vec![6])?;
    let block = TransferEvaluator::new(&couplings, &part, 2)?.at(tau0);
    let sol = solve(&RestoreProblem::general(
        block,
        true,
        SolverOptions::general(0),
    )?)?;

    let input = [C64::new(0.6, 0.0), C64::new(0.0, 0.8)];
    let r = run_arbitrary_pst(&couplings, &part, 2, &input, &sol, tau0)?;
    for (a, b) in input.iter().zip(&r.output_amplitudes) {
        println!("{a:.4}  ->  {b:.4}");
    }
    println!(
        "probability {:.6}, fidelity {:.12}",
        r.success_probability, r.fidelity
    );
    println!(
        "encode depth {}, decode depth {}, labelling depth {}",
        r.cost.encode_depth, r.cost.decode_depth, r.cost.label_depth
    );
    Ok(())
}

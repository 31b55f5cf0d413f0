//! Restoring unitary that mixes excitation sectors on the extended receiver,
//! with the second ancilla marking the two-excitation sector.

use pstchain::chain::{build_couplings, ChainSpec, Partition};
use pstchain::dynamics::TransferEvaluator;
use pstchain::protocol::run_nonpreserving_pst;
use pstchain::restore::{solve, RestoreProblem, SolverOptions};
use pstchain::C64;

fn main() -> pstchain::error::Result<()> {
    let tau0 = 14.391;
    let couplings = build_couplings(&ChainSpec::homogeneous(10))?;
    let part = Partition::new(10, 3, 5)?;
    let block = TransferEvaluator::new(&couplings, &part, 2)?.at(tau0);
    let sol = solve(&RestoreProblem::general(
        block,
        false,
        SolverOptions::general(0),
    )?)?;

    let s = [C64::new(0.0, 0.6), C64::new(0.8, 0.0), C64::new(0.0, 0.0)];
    let r = run_nonpreserving_pst(&couplings, &part, 2, &s, &sol, tau0)?;
    println!("|lambda| = {:.6}", sol.lambda.norm());
    println!(
        "probability {:.6}, fidelity {:.12}",
        r.success_probability, r.fidelity
    );
    Ok(())
}

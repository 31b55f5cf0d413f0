//! Solve for the restoring unitary on the extended receiver in both the
//! excitation-preserving and the unrestricted setting.

use pstchain::chain::{build_couplings, ChainSpec, Partition};
use pstchain::dynamics::TransferEvaluator;
use pstchain::restore::{solve, RestoreProblem, SolverOptions};

fn main() -> pstchain::error::Result<()> {
    let couplings = build_couplings(&ChainSpec::homogeneous(10))?;
    let block = TransferEvaluator::new(&couplings, &Partition::new(10, 3, 5)?, 2)?.at(14.391);
    for preserving in [true, false] {
        let problem =
            RestoreProblem::general(block.clone(), preserving, SolverOptions::general(7))?;
        let sol = solve(&problem)?;
        println!(
            "{:<22} lambda = {:.6} (|lambda| = {:.6}), residual {:.1e}, W_ER is {}x{}",
            sol.mode.name(),
            sol.lambda,
            sol.lambda.norm(),
            sol.residual,
            sol.completed_unitary.nrows(),
            sol.completed_unitary.ncols()
        );
    }
    Ok(())
}

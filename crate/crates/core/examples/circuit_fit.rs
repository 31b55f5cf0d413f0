//! Fit parameterized restoring circuits. Fewer restarts than the full search
//! keep this quick; raise `restarts` to approach the best published values.

use pstchain::chain::{build_couplings, ChainSpec, Partition};
use pstchain::dynamics::TransferEvaluator;
use pstchain::restore::{solve, RestoreMode, RestoreProblem, SolverOptions};

fn main() -> pstchain::error::Result<()> {
    let couplings = build_couplings(&ChainSpec::homogeneous(10))?;
    let block = TransferEvaluator::new(&couplings, &Partition::new(10, 3, 4)?, 2)?.at(12.493);
    let mut opts = SolverOptions::circuit(1);
    opts.restarts = 200;
    for mode in [
        RestoreMode::CircuitPreserving { layers: 3 },
        RestoreMode::CircuitNonpreserving { layers: 2 },
    ] {
        let sol = solve(&RestoreProblem::circuit(block.clone(), mode, 0, opts)?)?;
        let converged = sol.records.iter().filter(|r| r.converged).count();
        println!(
            "{:<24} best |lambda| = {:.5} at restart {} ({converged}/{} converged), {} angles",
            mode.name(),
            sol.lambda.norm(),
            sol.restart,
            sol.records.len(),
            sol.circuit_params.as_ref().map_or(0, Vec::len)
        );
    }
    Ok(())
}

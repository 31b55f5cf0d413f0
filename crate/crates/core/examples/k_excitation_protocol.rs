//! Perfect transfer of a two-excitation sender state with post-selection on
//! ancilla B, plus the number of repetitions needed for a target failure rate.

use pstchain::chain::{build_couplings, ChainSpec, Partition};
use pstchain::dynamics::TransferEvaluator;
use pstchain::protocol::{amplification_runs, run_k_excitation_pst};
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

    // amplitudes of |110>, |101>, |011> on the sender
    let s = [
        C64::new(0.5, 0.1),
        C64::new(-0.3, 0.6),
        C64::new(0.0, 0.5247),
    ];
    let norm = s.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let s: Vec<C64> = s.iter().map(|z| z / norm).collect();
    let r = run_k_excitation_pst(&couplings, &part, 2, &s, &sol, tau0)?;
    println!(
        "success probability {:.6} (|lambda|^2 = {:.6})",
        r.success_probability,
        sol.lambda.norm_sqr()
    );
    println!(
        "fidelity {:.12}, garbage norm {:.6}",
        r.fidelity, r.garbage_norm
    );
    for eps in [1e-2, 1e-3, 1e-6] {
        println!(
            "runs for failure <= {eps:e}: {}",
            amplification_runs(r.success_probability, eps)?
        );
    }
    Ok(())
}

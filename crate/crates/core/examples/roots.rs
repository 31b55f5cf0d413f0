//! All roots of the lambda polynomial at a fixed time. Only the smallest is
//! realizable by a restoring unitary.

use pstchain::chain::{build_couplings, ChainSpec, Partition};
use pstchain::dynamics::TransferEvaluator;
use pstchain::lambda::{gram, lambda_polynomial, roots_of};

fn main() -> pstchain::error::Result<()> {
    let couplings = build_couplings(&ChainSpec::homogeneous(10))?;
    let block = TransferEvaluator::new(&couplings, &Partition::new(10, 3, 6)?, 2)?.at(14.132);
    let poly = lambda_polynomial(&gram(&block))?;
    println!("coefficients (constant first): {:?}", poly.coeffs);
    for r in roots_of(&block.v_hat)? {
        println!("|lambda| = {:.6}  multiplicity {}", r.abs, r.multiplicity);
    }
    Ok(())
}

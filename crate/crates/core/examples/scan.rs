//! Scan the minimal realizable |lambda| over time for the 10-site chain and
//! print the registration time for each extended-receiver size.

use pstchain::chain::{build_couplings, ChainSpec, Partition};
use pstchain::lambda::{scan, ScanOptions, TauGrid};

fn main() -> pstchain::error::Result<()> {
    let couplings = build_couplings(&ChainSpec::homogeneous(10))?;
    let grid = TauGrid::new(0.0, 20.0, 0.001)?;
    for n_er in 4..=6 {
        let r = scan(
            &couplings,
            &Partition::new(10, 3, n_er)?,
            2,
            &grid,
            ScanOptions { refine: true },
        )?;
        let (t_ref, l_ref) = r.refined.unwrap_or((r.tau0, r.lambda_min));
        println!(
            "n_ER = {n_er}: tau0 = {:.3}, |lambda|_min = {:.5}  (refined {t_ref:.5}, {l_ref:.7})",
            r.tau0, r.lambda_min
        );
    }
    Ok(())
}

//! Drive a scan from a key-value config file and write the CSV to stdout.
//! Usage: `cargo run --example config_scan -- configs/table1a_ner5.conf`

use pstchain::chain::build_couplings;
use pstchain::config::load_config;
use pstchain::lambda::{scan, write_scan_csv, ScanOptions};

fn main() -> pstchain::error::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "configs/table1a_ner5.conf".into());
    let cfg = load_config(path.as_ref(), &[])?;
    let c = build_couplings(&cfg.chain)?;
    let r = scan(
        &c,
        &cfg.partition,
        cfg.k,
        &cfg.scan.grid,
        ScanOptions {
            refine: cfg.scan.refine,
        },
    )?;
    eprintln!(
        "{}: tau0 = {}, |lambda|_min = {}",
        cfg.chain_id, r.tau0, r.lambda_min
    );
    write_scan_csv(&r, std::io::stdout().lock())
}

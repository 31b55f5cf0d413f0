//! Compare the 10-site results and polynomial roots against the published
//! values. `cargo run --release --example reproduce -- 2` adds the long chains.

use pstchain::reproduce::{roots, table_1a, table_2};

fn main() -> pstchain::error::Result<()> {
    let mut cells = table_1a(0)?;
    cells.extend(roots()?);
    if std::env::args().nth(1).as_deref() == Some("2") {
        cells.extend(table_2()?);
    }
    for c in &cells {
        println!("{}", c.line());
    }
    let passed = cells.iter().filter(|c| c.pass).count();
    println!("{passed}/{} within tolerance", cells.len());
    Ok(())
}

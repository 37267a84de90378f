//! Grid sweep written as CSV, for plotting elsewhere.
//!
//!     cargo run --release --example monte_carlo_sweep > sweep.csv

use simo_ident::probability::{sweep, write_csv};

fn main() -> simo_ident::Result<()> {
    let rows = sweep(&[2, 4, 8, 16], &[2, 5, 10], 1.0, 10_000, 2024)?;
    write_csv(&rows, std::io::stdout().lock())
}

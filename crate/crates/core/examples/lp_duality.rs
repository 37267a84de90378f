//! The dual-norm value from the Chebyshev LP against brute-force sampling of
//! the ratio it bounds.
//!
//!     cargo run --example lp_duality

use simo_ident::channel_model::{gen_channel, partition_ab, sign_vector};
use simo_ident::identifiability::{check_condition, sup_ratio_sampling};

fn main() -> simo_ident::Result<()> {
    let (m, l) = (4, 4);
    for delta in 1..=3 {
        let h = gen_channel(m, l, 10 + delta as u64)?;
        let lp = l + delta;
        let report = check_condition(&h, lp, 1.0)?;
        let (a, b) = partition_ab(&h, lp)?;
        let v = sign_vector(&h, 1.0)?;
        print!("delta {delta}: LP {:.6}", report.margin);
        for dirs in [100, 10_000, 1_000_000] {
            let s = sup_ratio_sampling(&a.entries, &b.entries, &v.entries, dirs, 1)?;
            print!(", {dirs} dirs {s:.6}");
        }
        println!();
    }
    Ok(())
}

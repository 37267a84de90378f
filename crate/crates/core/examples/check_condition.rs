//! Decide identifiability of a random channel under l1 and under the weakest
//! feasible lp exponent.
//!
//!     cargo run --example check_condition -- [M] [L] [Lp] [seed]

use simo_ident::channel_model::gen_channel;
use simo_ident::identifiability::{check_condition, find_feasible_p};

fn main() -> simo_ident::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).map(|a| a.parse().expect("integer argument")).collect();
    let arg = |i: usize, default: u64| args.get(i).copied().unwrap_or(default);
    let (m, l) = (arg(0, 3) as usize, arg(1, 3) as usize);
    let lp = arg(2, l as u64 + 1) as usize;
    let h = gen_channel(m, l, arg(3, 4))?;

    let report = check_condition(&h, lp, 1.0)?;
    println!("l1: margin {:.6} -> {:?}", report.margin, report.verdict);
    match find_feasible_p(&h, lp) {
        Ok(p) => {
            let r = check_condition(&h, lp, p)?;
            println!("largest feasible p = {p:.4} (margin {:.6})", r.margin);
        }
        Err(e) => println!("no feasible p: {e}"),
    }
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

//! Closed-form lower bound on the probability that a Gaussian channel meets
//! the l1 condition with one extra tap, next to a Monte Carlo estimate.
//!
//!     cargo run --release --example probability_bound

use simo_ident::probability::monte_carlo_probability;

fn main() -> simo_ident::Result<()> {
    println!("{:>5} {:>3} {:>9} {:>7} {:>16}", "M", "L", "bound", "eps*", "monte carlo");
    for m in [2, 4, 8, 16, 64, 256] {
        for l in [2, 5] {
            let row = monte_carlo_probability(m, l, 1.0, 5_000, 1)?;
            println!(
                "{m:>5} {l:>3} {:>9.5} {:>7.4} {:>9.4} ± {:.4}",
                row.bound.unwrap(),
                row.eps_star.unwrap(),
                row.mc_estimate.unwrap(),
                row.mc_halfwidth.unwrap()
            );
        }
    }
    Ok(())
}

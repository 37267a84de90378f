//! Sparse selection among over-modeled solutions, given the true channel.
//!
//!     cargo run --example recover_channel

use nalgebra::DVector;
use simo_ident::channel_model::gen_channel;
use simo_ident::identifiability::check_condition;
use simo_ident::sparse_select::{solve_p1, solve_pp_local};

fn main() -> simo_ident::Result<()> {
    let (m, l, lp) = (4, 3, 5);
    for seed in 0..6 {
        let h = gen_channel(m, l, seed)?;
        let verdict = check_condition(&h, lp, 1.0)?.verdict;
        let l1 = solve_p1(&h, lp)?.with_reference(&h, lp)?;
        let lp_half = solve_pp_local(&h, lp, 0.5, &DVector::zeros(lp - l), 100)?.with_reference(&h, lp)?;
        println!(
            "seed {seed}: {verdict:?}, l1 offset {:?} corr {:.6}, l0.5 offset {:?} corr {:.6}",
            l1.g_star.iter().map(|g| format!("{g:.3}")).collect::<Vec<_>>(),
            l1.correlation.unwrap(),
            lp_half.g_star.iter().map(|g| format!("{g:.3}")).collect::<Vec<_>>(),
            lp_half.correlation.unwrap(),
        );
    }
    Ok(())
}

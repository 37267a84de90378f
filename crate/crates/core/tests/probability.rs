use std::f64::consts::PI;

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use simo_ident::channel_model::{gen_channel_with, partition_ab, sign_vector};
use simo_ident::probability::{bound_objective, lower_incomplete_gamma_half, trial_rng};

#[test]
fn gaussian_factor_is_a_normal_probability() {
    for (m, l) in [(2, 2), (4, 3), (16, 5), (64, 10)] {
        for eps in [0.1, 0.3, 0.5, 0.8] {
            let (mf, lf) = (m as f64, l as f64);
            let sigma = (lf * mf / (lf + 1.0)).sqrt();
            let alpha = (1.0 - eps) * (2.0 / (PI * (lf + 1.0))).sqrt() * mf;
            let normal = Normal::new(0.0, sigma).unwrap();
            let direct = normal.cdf(alpha) - normal.cdf(-alpha);
            let factor = lower_incomplete_gamma_half(mf * (1.0 - eps).powi(2) / (PI * lf)).unwrap() / PI.sqrt();
            assert!((direct - factor).abs() <= 1e-10, "M={m} L={l} eps={eps}: {direct} vs {factor}");

            let tail = 1.0 - (-mf * eps * eps / PI).exp();
            assert!((bound_objective(m, l, eps) - tail * factor).abs() <= 1e-12);
        }
    }
}

#[test]
fn numerator_and_denominator_events_are_uncorrelated() {
    let (m, l, draws) = (4usize, 3usize, 100_000u64);
    let alpha = 0.7 * (2.0 / (PI * (l + 1) as f64)).sqrt() * m as f64;
    let pairs: Vec<(f64, f64)> = (0..draws)
        .into_par_iter()
        .map(|t| {
            let h = gen_channel_with(m, l, &mut trial_rng(77, t)).unwrap();
            let (a, _) = partition_ab(&h, l + 1).unwrap();
            let v = sign_vector(&h, 1.0).unwrap().entries;
            let num = (v.transpose() * &a.entries)[(0, 0)].abs();
            let den: f64 = h.tap(l).iter().map(|x| x.abs()).sum();
            ((num <= alpha) as u8 as f64, (den >= alpha) as u8 as f64)
        })
        .collect();
    let n = draws as f64;
    let (mx, my) = pairs.iter().fold((0.0, 0.0), |(sx, sy), (x, y)| (sx + x / n, sy + y / n));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in &pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    let corr = sxy / (sxx * syy).sqrt();
    let se = 1.0 / n.sqrt();
    assert!(mx > 0.05 && mx < 0.95 && my > 0.05 && my < 0.95, "degenerate events: {mx} {my}");
    assert!(corr.abs() <= 3.0 * se, "correlation {corr} exceeds 3 standard errors ({se})");
}

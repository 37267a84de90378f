use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use simo_ident::channel_model::gen_channel;
use simo_ident::sparse_select::{
    offset_objective, recover_from_kernel, recovery_success, solve_p1, solve_pp_local, Normalization,
};
use simo_ident::subspace::{build_quadratic_form, exact_covariance, kernel_basis, noise_projector, KernelBasis};

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn returned_objectives_recompute_from_offsets() {
    for seed in 0..50u64 {
        let (m, l) = (3, 3);
        let lp = l + 1 + (seed % 3) as usize;
        let h = gen_channel(m, l, seed).unwrap();
        let sol = solve_p1(&h, lp).unwrap();
        let g = DVector::from_column_slice(&sol.g_star);
        assert!(close(sol.objective, offset_objective(&h, lp, 1.0, &g).unwrap()), "seed {seed}");

        let start = DVector::from_element(lp - l, 0.3);
        let sol = solve_pp_local(&h, lp, 0.6, &start, 50).unwrap();
        let g = DVector::from_column_slice(&sol.g_star);
        assert!(close(sol.objective, offset_objective(&h, lp, 0.6, &g).unwrap()), "seed {seed}");
    }
}

fn exact_kernel(seed: u64, m: usize, l: usize, lp: usize) -> (simo_ident::channel_model::ChannelVector, KernelBasis) {
    let h = gen_channel(m, l, seed).unwrap();
    let n = lp + 1;
    let pi = noise_projector(&exact_covariance(&h, n, 0.0).unwrap(), l + n + 1).unwrap();
    let q = build_quadratic_form(&pi, lp, m).unwrap();
    let k = kernel_basis(&q, lp - l + 1).unwrap();
    (h, k)
}

#[test]
fn recovery_does_not_depend_on_kernel_basis() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for seed in 0..20u64 {
        let (m, l, lp) = (3, 2, 4);
        let (h, kernel) = exact_kernel(100 + seed, m, l, lp);
        let base = recover_from_kernel(&kernel, &Normalization::Coordinate, 1.0).unwrap();
        let base_corr = recovery_success(&DVector::from_column_slice(&base.f_hat), &h, lp).unwrap();

        let mix = DMatrix::from_fn(kernel.dim, kernel.dim, |_, _| StandardNormal.sample(&mut rng));
        let rotation = mix.qr().q();
        let rotated = KernelBasis { k: &kernel.k * rotation, ..kernel.clone() };
        let other = recover_from_kernel(&rotated, &Normalization::Coordinate, 1.0).unwrap();
        let corr = recovery_success(&DVector::from_column_slice(&other.f_hat), &h, lp).unwrap();
        assert!((corr - base_corr).abs() <= 1e-8, "seed {seed}: {base_corr} vs {corr}");
    }
}

#[test]
fn identifiable_channels_come_back_through_the_blind_path() {
    use simo_ident::identifiability::{check_condition, Verdict};
    let (m, l, lp) = (4, 2, 3);
    let mut checked = 0;
    for seed in 0..60u64 {
        let (h, kernel) = exact_kernel(200 + seed, m, l, lp);
        if check_condition(&h, lp, 1.0).unwrap().verdict != Verdict::Identifiable {
            continue;
        }
        let res = recover_from_kernel(&kernel, &Normalization::Coordinate, 1.0).unwrap().with_reference(&h, lp).unwrap();
        assert!(res.correlation.unwrap() >= 1.0 - 1e-6, "seed {seed}: {:?}", res.correlation);
        checked += 1;
    }
    assert!(checked >= 20, "only {checked} identifiable channels");
}

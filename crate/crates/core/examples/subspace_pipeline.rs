//! Blind estimation end to end: covariance, noise projector, over-modeled
//! kernel, then l1 selection inside the kernel.
//!
//!     cargo run --example subspace_pipeline -- [samples]

use simo_ident::channel_model::{build_shift_matrix, gen_channel};
use simo_ident::sparse_select::{recover_from_kernel, Normalization};
use simo_ident::subspace::{
    build_quadratic_form, exact_covariance, kernel_basis, kernel_basis_nearest, noise_projector, sample_covariance,
    subspace_distance,
};

fn main() -> simo_ident::Result<()> {
    let samples: Option<usize> = std::env::args().nth(1).map(|s| s.parse().expect("sample count"));
    let (m, l, lp, n, sigma2) = (3, 2, 4, 6, 0.01);
    let h = gen_channel(m, l, 7)?;

    let cov = match samples {
        Some(k) => sample_covariance(&h, n, sigma2, k, 7)?,
        None => exact_covariance(&h, n, sigma2)?,
    };
    let pi = noise_projector(&cov, l + n + 1)?;
    let q = build_quadratic_form(&pi, lp, m)?;
    let kernel = if samples.is_some() { kernel_basis_nearest(&q, lp - l + 1)? } else { kernel_basis(&q, lp - l + 1)? };
    let angle = subspace_distance(&kernel, &build_shift_matrix(&h, lp)?)?;
    println!("kernel dim {}, gap ratio {:.3e}, angle to shift span {angle:.3e}", kernel.dim, kernel.gap_ratio);

    let res = recover_from_kernel(&kernel, &Normalization::Coordinate, 1.0)?.with_reference(&h, lp)?;
    println!("correlation with true channel: {:.8}", res.correlation.unwrap());
    Ok(())
}

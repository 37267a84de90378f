//! Second-order-statistics front end of the subspace method.
//!
//! Covariance of the stacked observations, its noise eigenspace projector
//! `Pi`, and the quadratic form `Q` with `f'Qf = ||Pi T(f)||_F^2` whose kernel
//! is the span of the shifted channel embeddings.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::channel_model::{build_filter_matrix, ChannelVector, FilterMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceSource {
    Exact,
    Sampled { num_samples: usize },
}

#[derive(Debug, Clone)]
pub struct Covariance {
    pub r: DMatrix<f64>,
    pub n: usize,
    pub sigma2: f64,
    pub source: CovarianceSource,
}

#[derive(Debug, Clone)]
pub struct NoiseProjector {
    pub pi: DMatrix<f64>,
    pub signal_dim: usize,
}

#[derive(Debug, Clone)]
pub struct KernelBasis {
    /// Orthonormal columns.
    pub k: DMatrix<f64>,
    pub dim: usize,
    /// First non-kernel eigenvalue over the largest kernel eigenvalue.
    pub gap_ratio: f64,
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(Error::Parameter(format!("noise variance must be finite and >= 0, got {sigma2}")));
    }
    Ok(())
}

/// `R = T_n(h) T_n(h)' + sigma2 I`.
pub fn exact_covariance(h: &ChannelVector, n: usize, sigma2: f64) -> Result<Covariance> {
    if n < h.l() {
        return Err(Error::Parameter(format!("stacking depth n = {n} must be >= L = {}", h.l())));
    }
    check_sigma2(sigma2)?;
    let t = build_filter_matrix(h, n).entries;
    let dim = t.nrows();
    let r = &t * t.transpose() + DMatrix::identity(dim, dim) * sigma2;
    Ok(Covariance { r, n, sigma2, source: CovarianceSource::Exact })
}

/// Empirical covariance over `num_samples` consecutive stacked windows, with
/// uniform `+-1` symbols and white Gaussian noise of variance `sigma2`.
pub fn sample_covariance(
    h: &ChannelVector,
    n: usize,
    sigma2: f64,
    num_samples: usize,
    seed: u64,
) -> Result<Covariance> {
    if num_samples == 0 {
        return Err(Error::Parameter("num_samples must be >= 1".into()));
    }
    check_sigma2(sigma2)?;
    let (m, l) = (h.m(), h.l());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma2.sqrt()).expect("finite nonnegative deviation");

    // y_t for t = 0 .. num_samples + n - 1; y_t uses symbols s_{t-l}, stored at offset l.
    let len = num_samples + n;
    let symbols: Vec<f64> = (0..len + l).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    let mut y = DMatrix::<f64>::zeros(m, len);
    for t in 0..len {
        for tap in 0..=l {
            let s = symbols[t + l - tap];
            for (i, &hv) in h.tap(tap).iter().enumerate() {
                y[(i, t)] += hv * s;
            }
        }
        if sigma2 > 0.0 {
            for i in 0..m {
                y[(i, t)] += noise.sample(&mut rng);
            }
        }
    }

    // Window k stacks [y_k; y_{k-1}; ...; y_{k-n}] for k = n .. n + num_samples - 1.
    let dim = m * (n + 1);
    let mut stacked = DMatrix::<f64>::zeros(dim, num_samples);
    for col in 0..num_samples {
        let k = col + n;
        for r in 0..=n {
            stacked.view_mut((r * m, col), (m, 1)).copy_from(&y.column(k - r));
        }
    }
    let r = &stacked * stacked.transpose() / num_samples as f64;
    Ok(Covariance { r, n, sigma2, source: CovarianceSource::Sampled { num_samples } })
}

fn sorted_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let mut idx: Vec<usize> = (0..m.nrows()).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| eig.eigenvectors[(r, idx[c])]);
    (values, vectors)
}

/// Projector onto the eigenvectors of the `dim - signal_dim` smallest eigenvalues.
pub fn noise_projector(cov: &Covariance, signal_dim: usize) -> Result<NoiseProjector> {
    let dim = cov.r.nrows();
    if signal_dim >= dim {
        return Err(Error::Parameter(format!("signal dimension {signal_dim} must be < {dim}")));
    }
    let (values, vectors) = sorted_eigen(&cov.r);
    let noise_dim = dim - signal_dim;
    if signal_dim > 0 {
        let gap = values[noise_dim] - values[noise_dim - 1];
        let scale = values[dim - 1].abs().max(1.0);
        if gap <= 1e-12 * scale {
            return Err(Error::DegenerateSplit { gap });
        }
    }
    let noise = vectors.columns(0, noise_dim);
    Ok(NoiseProjector { pi: noise * noise.transpose(), signal_dim })
}

/// `Q` with `f'Qf = ||Pi T_{n}(f)||_F^2` for stacked filters `f` of order `lp`,
/// where `n` is the stacking depth of `Pi`. Block `(i, j)` of `Q` is the sum of
/// the `Pi` blocks `(r, r + i - j)` over all placements that fit.
pub fn build_quadratic_form(pi: &NoiseProjector, lp: usize, m: usize) -> Result<DMatrix<f64>> {
    let dim = pi.pi.nrows();
    if m == 0 || !dim.is_multiple_of(m) || pi.pi.ncols() != dim {
        return Err(Error::Parameter(format!("projector of size {dim} is not a multiple of M = {m}")));
    }
    let n = dim / m - 1;
    if n < lp {
        return Err(Error::Parameter(format!("stacking depth n = {n} must be >= L' = {lp}")));
    }
    let size = m * (lp + 1);
    let mut q = DMatrix::zeros(size, size);
    for i in 0..=lp {
        for j in 0..=lp {
            let mut block = q.view_mut((i * m, j * m), (m, m));
            for r in 0..=n {
                let c = r + i;
                if c < j || c - j > n {
                    continue;
                }
                let rj = c - j;
                block += pi.pi.view((r * m, rj * m), (m, m));
            }
        }
    }
    // symmetrize away rounding
    let qt = q.transpose();
    Ok((q + qt) * 0.5)
}

/// `||Pi T_n(f)||_F^2` evaluated directly, without forming `Q`. For `f` in the
/// kernel this stays at rounding level squared rather than rounding level.
pub fn subspace_energy(pi: &NoiseProjector, f: &[f64], m: usize) -> Result<f64> {
    let dim = pi.pi.nrows();
    if m == 0 || !dim.is_multiple_of(m) || f.is_empty() || !f.len().is_multiple_of(m) {
        return Err(Error::Parameter(format!("projector size {dim} and filter length {} must be multiples of M = {m}", f.len())));
    }
    let n = dim / m - 1;
    Ok((&pi.pi * crate::channel_model::block_toeplitz(f, m, n)).norm_squared())
}

const KERNEL_REL_TOL: f64 = 1e-8;

fn basis_from(values: &[f64], vectors: &DMatrix<f64>, expected_dim: usize) -> KernelBasis {
    let k = vectors.columns(0, expected_dim).into_owned();
    // eigenvectors are orthonormal already; QR removes residual drift
    let k = k.qr().q();
    let largest_kernel = values[expected_dim - 1].abs();
    let gap_ratio = match values.get(expected_dim) {
        Some(&next) if largest_kernel > 0.0 => next / largest_kernel,
        Some(_) => f64::INFINITY,
        None => f64::NAN,
    };
    KernelBasis { k, dim: expected_dim, gap_ratio }
}

fn check_expected(q: &DMatrix<f64>, expected_dim: usize) -> Result<()> {
    if q.nrows() != q.ncols() || expected_dim == 0 || expected_dim > q.nrows() {
        return Err(Error::Parameter(format!(
            "expected kernel dimension {expected_dim} invalid for a {:?} form",
            q.shape()
        )));
    }
    Ok(())
}

/// Eigenvectors of the `expected_dim` smallest eigenvalues of `Q`, which must
/// form a numerical kernel (eigenvalues `<= 1e-8 ||Q||`) with nothing else below
/// that threshold.
pub fn kernel_basis(q: &DMatrix<f64>, expected_dim: usize) -> Result<KernelBasis> {
    check_expected(q, expected_dim)?;
    let (values, vectors) = sorted_eigen(q);
    let norm = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let threshold = KERNEL_REL_TOL * norm;
    let found = values.iter().filter(|&&v| v <= threshold).count();
    if found != expected_dim {
        return Err(Error::OvermodelAmbiguity { expected: expected_dim, found });
    }
    Ok(basis_from(&values, &vectors, expected_dim))
}

/// Like [`kernel_basis`] but without the null-threshold checks, for sampled
/// covariances whose kernel is only approximate.
pub fn kernel_basis_nearest(q: &DMatrix<f64>, expected_dim: usize) -> Result<KernelBasis> {
    check_expected(q, expected_dim)?;
    let (values, vectors) = sorted_eigen(q);
    Ok(basis_from(&values, &vectors, expected_dim))
}

/// Orthonormal basis for the column span (numerical rank, relative 1e-12).
fn range_basis(a: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("u requested");
    let max = svd.singular_values.max();
    let mut cols = Vec::new();
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > 1e-12 * max {
            cols.push(u.column(i).into_owned());
        }
    }
    DMatrix::from_columns(&cols)
}

/// Largest principal angle (radians) between two column spans.
pub fn principal_angle_max(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.nrows() != b.nrows() {
        return Err(Error::Parameter(format!("row mismatch: {} vs {}", a.nrows(), b.nrows())));
    }
    let qa = range_basis(a);
    let qb = range_basis(b);
    if qa.ncols() == 0 || qb.ncols() == 0 {
        return Err(Error::Degenerate("empty subspace".into()));
    }
    let (small, large) = if qa.ncols() <= qb.ncols() { (qa, qb) } else { (qb, qa) };
    let proj = large.transpose() * &small;
    let cos_min = proj.singular_values().min();
    let resid = &small - &large * &proj;
    let sin_max = resid.singular_values().max();
    Ok(sin_max.atan2(cos_min))
}

/// Largest principal angle between the kernel span and `range(H)`.
pub fn subspace_distance(kernel: &KernelBasis, h: &FilterMatrix) -> Result<f64> {
    principal_angle_max(&kernel.k, &h.entries)
}

//! Channel selection by sparsity over the over-modeled solution space.
//!
//! In analysis mode the true channel is known and the solution space is
//! parameterized as `f = [h_0; h_fixed + H~ g]` (first shift coefficient fixed
//! to one). In blind mode only an orthonormal kernel basis `K` is available
//! and the normalization is a linear functional on `f = K c`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::channel_model::{build_shift_matrix, offset_matrix, partition_ab, validate_exponent, ChannelVector};
use crate::error::{Error, Result};
use crate::lp_core::{solve_l1_regression, solve_weighted_l1_regression, LpStatus};
use crate::subspace::KernelBasis;

/// Smoothing added to residual magnitudes in the reweighting step.
pub const EPS_SMOOTH: f64 = 1e-8;
/// A reweighted step is accepted only if it lowers the objective by more than this.
pub const MIN_DECREASE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub f_hat: Vec<f64>,
    /// Offset coefficients `g` in analysis mode; kernel coefficients `c` in
    /// blind mode.
    pub g_star: Vec<f64>,
    /// `||.||_1` for `p = 1`, `||.||_p^p` otherwise.
    pub objective: f64,
    /// Normalized correlation with the zero-padded true channel, when known.
    pub correlation: Option<f64>,
    pub iterations: usize,
}

/// `sum |x_i|` for `p = 1`, `sum |x_i|^p` otherwise.
pub fn lp_objective(x: &DVector<f64>, p: f64) -> f64 {
    if p == 1.0 {
        x.iter().map(|v| v.abs()).sum()
    } else {
        x.iter().map(|v| v.abs().powf(p)).sum()
    }
}

/// `||h_fixed + H~ g||_p^p` (plain `l1` norm for `p = 1`).
pub fn offset_objective(h: &ChannelVector, lp: usize, p: f64, g: &DVector<f64>) -> Result<f64> {
    let tilde = offset_matrix(h, lp)?;
    if g.len() != tilde.ncols() {
        return Err(Error::Parameter(format!("offset has length {}, expected {}", g.len(), tilde.ncols())));
    }
    Ok(lp_objective(&(h.fixed_offset(lp)? + tilde * g), p))
}

fn correlation(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let den = a.norm() * b.norm();
    if den == 0.0 {
        0.0
    } else {
        (a.dot(b).abs() / den).min(1.0)
    }
}

fn analysis_setup(h: &ChannelVector, lp: usize) -> Result<(DMatrix<f64>, DVector<f64>)> {
    // validates 1 <= delta <= L
    partition_ab(h, lp)?;
    Ok((offset_matrix(h, lp)?, h.fixed_offset(lp)?))
}

fn analysis_result(h: &ChannelVector, lp: usize, g: DVector<f64>, objective: f64, iterations: usize) -> Result<RecoveryResult> {
    let shift = build_shift_matrix(h, lp)?.entries;
    let f_hat = shift.column(0) + shift.columns(1, g.len()) * &g;
    let h_pad = h.padded(lp)?;
    Ok(RecoveryResult {
        correlation: Some(correlation(&f_hat, &h_pad)),
        f_hat: f_hat.as_slice().to_vec(),
        g_star: g.as_slice().to_vec(),
        objective,
        iterations,
    })
}

fn require_optimal(status: LpStatus) -> Result<()> {
    match status {
        LpStatus::Optimal => Ok(()),
        other => Err(Error::Lp(format!("l1 regression ended {other:?}"))),
    }
}

/// Global minimizer of `||h_fixed + H~ g||_1`.
pub fn solve_p1(h: &ChannelVector, lp: usize) -> Result<RecoveryResult> {
    let (tilde, fixed) = analysis_setup(h, lp)?;
    let sol = solve_l1_regression(&(-tilde), &fixed)?;
    require_optimal(sol.status)?;
    analysis_result(h, lp, sol.g, sol.objective, 1)
}

/// Iteratively reweighted `l1` descent on `sum |y - X z|^p` from `z0`.
/// Returns the final point, its objective and the number of accepted steps.
fn irl1(x: &DMatrix<f64>, y: &DVector<f64>, p: f64, z0: DVector<f64>, max_iter: usize) -> Result<(DVector<f64>, f64, usize)> {
    let mut z = z0;
    let mut obj = lp_objective(&(y - x * &z), p);
    let mut accepted = 0;
    while accepted < max_iter {
        let r = y - x * &z;
        let w = r.map(|ri| (ri.abs() + EPS_SMOOTH).powf(p - 1.0));
        let sol = solve_weighted_l1_regression(x, y, &w)?;
        require_optimal(sol.status)?;
        let cand_obj = lp_objective(&(y - x * &sol.g), p);
        if cand_obj < obj - MIN_DECREASE {
            z = sol.g;
            obj = cand_obj;
            accepted += 1;
        } else {
            break;
        }
    }
    Ok((z, obj, accepted))
}

/// Local descent for the `lp` quasi-norm problem (`0 < p < 1`) from offset `g0`.
/// The result is stationary for the reweighting scheme; it need not be the
/// global minimizer.
pub fn solve_pp_local(h: &ChannelVector, lp: usize, p: f64, g0: &DVector<f64>, max_iter: usize) -> Result<RecoveryResult> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Parameter(format!("local lp descent needs 0 < p < 1, got {p}")));
    }
    let (tilde, fixed) = analysis_setup(h, lp)?;
    if g0.len() != tilde.ncols() {
        return Err(Error::Parameter(format!("g0 has length {}, expected {}", g0.len(), tilde.ncols())));
    }
    let (g, obj, iters) = irl1(&(-tilde), &fixed, p, g0.clone(), max_iter)?;
    analysis_result(h, lp, g, obj, iters)
}

/// Linear normalization used to exclude the trivial solution in blind mode.
#[derive(Debug, Clone, PartialEq)]
pub enum Normalization {
    /// `f_i = 1`, trying `i = 0, 1, ...` until one is feasible.
    Coordinate,
    /// `w' f = 1` for a fixed functional, without fallback.
    Functional(DVector<f64>),
}

const NORMALIZATION_TOL: f64 = 1e-10;
const MAX_IRL1_ITER: usize = 100;

/// Orthonormal basis of the complement of `a` in `R^k` (`k x (k-1)`).
fn complement_basis(a: &DVector<f64>) -> DMatrix<f64> {
    let k = a.len();
    let u = a / a.norm();
    let proj = DMatrix::identity(k, k) - &u * u.transpose();
    let eig = SymmetricEigen::new(proj);
    let mut idx: Vec<usize> = (0..k).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    DMatrix::from_fn(k, k - 1, |r, c| eig.eigenvectors[(r, idx[c])])
}

/// Sparsest element of `span(K)` under the normalization `w' f = 1`,
/// returned rescaled to unit norm.
pub fn recover_from_kernel(kernel: &KernelBasis, normalization: &Normalization, p: f64) -> Result<RecoveryResult> {
    validate_exponent(p)?;
    let k = &kernel.k;
    let rows = k.nrows();
    match normalization {
        Normalization::Functional(w) => {
            if w.len() != rows {
                return Err(Error::Parameter(format!("functional has length {}, expected {rows}", w.len())));
            }
            recover_with(k, w, p)?.ok_or(Error::Normalization)
        }
        Normalization::Coordinate => {
            for i in 0..rows {
                let mut w = DVector::zeros(rows);
                w[i] = 1.0;
                if let Some(res) = recover_with(k, &w, p)? {
                    return Ok(res);
                }
            }
            Err(Error::Normalization)
        }
    }
}

fn recover_with(k: &DMatrix<f64>, w: &DVector<f64>, p: f64) -> Result<Option<RecoveryResult>> {
    let a = k.transpose() * w;
    if a.norm() <= NORMALIZATION_TOL * w.norm() {
        return Ok(None);
    }
    let j = a.iamax();
    let mut c0 = DVector::zeros(a.len());
    c0[j] = 1.0 / a[j];

    let (c, objective, iterations) = if a.len() == 1 {
        let f = k * &c0;
        (c0, lp_objective(&f, p), 0)
    } else {
        let n = complement_basis(&a);
        let x = -(k * &n);
        let y = k * &c0;
        let sol = solve_l1_regression(&x, &y)?;
        require_optimal(sol.status)?;
        let (z, obj, iters) = if p == 1.0 {
            (sol.g, sol.objective, 1)
        } else {
            let (z, obj, iters) = irl1(&x, &y, p, sol.g, MAX_IRL1_ITER)?;
            (z, obj, iters + 1)
        };
        (&c0 + n * z, obj, iters)
    };
    let f = k * &c;
    let norm = f.norm();
    if norm == 0.0 {
        return Ok(None);
    }
    Ok(Some(RecoveryResult {
        f_hat: (f / norm).as_slice().to_vec(),
        g_star: c.as_slice().to_vec(),
        objective,
        correlation: None,
        iterations,
    }))
}

impl RecoveryResult {
    /// Fills in the correlation against the zero-padded true channel.
    pub fn with_reference(mut self, h: &ChannelVector, lp: usize) -> Result<Self> {
        let h_pad = h.padded(lp)?;
        if h_pad.len() != self.f_hat.len() {
            return Err(Error::Parameter("recovered vector does not match L'".into()));
        }
        self.correlation = Some(correlation(&DVector::from_column_slice(&self.f_hat), &h_pad));
        Ok(self)
    }
}

/// Shift-tolerant normalized correlation: the best match of `f_hat` against
/// any of the `delta + 1` shifted embeddings of `h`.
pub fn recovery_success(f_hat: &DVector<f64>, h: &ChannelVector, lp: usize) -> Result<f64> {
    let shift = build_shift_matrix(h, lp)?.entries;
    if f_hat.len() != shift.nrows() {
        return Err(Error::Parameter(format!(
            "f_hat has length {}, expected M(L'+1) = {}",
            f_hat.len(),
            shift.nrows()
        )));
    }
    let fnorm = f_hat.norm();
    if fnorm == 0.0 {
        return Err(Error::Degenerate("recovered vector is zero".into()));
    }
    let hnorm = DVector::from_column_slice(h.as_slice()).norm();
    Ok(shift
        .column_iter()
        .map(|col| (col.dot(f_hat).abs() / (fnorm * hnorm)).min(1.0))
        .fold(0.0, f64::max))
}

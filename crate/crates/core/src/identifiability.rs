//! Identifiability conditions for the zero-padded channel.
//!
//! With `v` the (possibly weighted) sign pattern of `[h_1; ...; h_L]` and
//! `(A, B)` the split of the offset matrix, the channel is recovered by the
//! `l1` selection problem iff `|v' A g| <= ||B g||_1` for every offset `g`
//! (for `p < 1` the same inequality with weighted `v` is sufficient for a
//! local minimum). The supremum of the ratio is the dual norm `||A'v||_B`,
//! computed exactly as `min ||d||_inf  s.t.  B'd = A'v`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::channel_model::{partition_ab, sign_vector, validate_exponent, ChannelVector};
use crate::error::{Error, Result};
use crate::lp_core::solve_chebyshev;

/// Half-width of the band around 1 reported as [`Verdict::Boundary`].
pub const VERDICT_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Identifiable,
    Boundary,
    NotIdentifiable,
}

impl Verdict {
    pub fn from_margin(margin: f64) -> Self {
        if margin < 1.0 - VERDICT_TOL {
            Verdict::Identifiable
        } else if margin > 1.0 + VERDICT_TOL {
            Verdict::NotIdentifiable
        } else {
            Verdict::Boundary
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    LpDual,
    ClosedForm,
    Sampling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifiabilityReport {
    /// `||A'v||_B`.
    pub margin: f64,
    pub verdict: Verdict,
    pub p: f64,
    pub delta: usize,
    pub method: Method,
    /// `d` with `B'd = A'v`; its sup-norm is the margin.
    pub dual_certificate: Vec<f64>,
}

/// The target `A'v` and the constraint matrix `B'` of the dual problem.
fn dual_problem(h: &ChannelVector, lp: usize, p: f64) -> Result<(DMatrix<f64>, DVector<f64>)> {
    validate_exponent(p)?;
    let (a, b) = partition_ab(h, lp)?;
    let v = sign_vector(h, p)?;
    Ok((b.entries.transpose(), a.entries.transpose() * v.entries))
}

/// Evaluates the identifiability condition through the dual linear program.
pub fn check_condition(h: &ChannelVector, lp: usize, p: f64) -> Result<IdentifiabilityReport> {
    let (bt, z) = dual_problem(h, lp, p)?;
    let sol = solve_chebyshev(&bt, &z)?;
    Ok(IdentifiabilityReport {
        margin: sol.value,
        verdict: Verdict::from_margin(sol.value),
        p,
        delta: lp - h.l(),
        method: Method::LpDual,
        dual_certificate: sol.d.as_slice().to_vec(),
    })
}

/// `|v'A| / ||h_L||_1` for a single extra tap (`L' = L + 1`).
pub fn closed_form_delta1(h: &ChannelVector, p: f64) -> Result<f64> {
    let (bt, z) = dual_problem(h, h.l() + 1, p)?;
    let b_l1 = bt.iter().map(|x| x.abs()).sum::<f64>();
    if b_l1 == 0.0 {
        return Err(Error::Degenerate("last tap h_L is zero".into()));
    }
    Ok(z[0].abs() / b_l1)
}

/// [`closed_form_delta1`] packaged as a report; the certificate is
/// `sign(h_L) * (v'A) / ||h_L||_1`, which attains the margin.
pub fn closed_form_report(h: &ChannelVector, p: f64) -> Result<IdentifiabilityReport> {
    let margin = closed_form_delta1(h, p)?;
    let (bt, z) = dual_problem(h, h.l() + 1, p)?;
    let b_l1 = bt.iter().map(|x| x.abs()).sum::<f64>();
    let dual_certificate = bt
        .iter()
        .map(|&b| match b.partial_cmp(&0.0) {
            Some(std::cmp::Ordering::Greater) => z[0] / b_l1,
            Some(std::cmp::Ordering::Less) => -z[0] / b_l1,
            _ => 0.0,
        })
        .collect();
    Ok(IdentifiabilityReport {
        margin,
        verdict: Verdict::from_margin(margin),
        p,
        delta: 1,
        method: Method::ClosedForm,
        dual_certificate,
    })
}

/// Lower estimate of `sup_g |v'Ag| / ||Bg||_1` over `num_dirs` uniformly random
/// unit directions.
pub fn sup_ratio_sampling(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    v: &DVector<f64>,
    num_dirs: usize,
    seed: u64,
) -> Result<f64> {
    if num_dirs == 0 {
        return Err(Error::Parameter("num_dirs must be >= 1".into()));
    }
    let delta = a.ncols();
    if b.ncols() != delta || a.nrows() != v.len() || delta == 0 {
        return Err(Error::Parameter(format!(
            "shape mismatch: A {:?}, B {:?}, v {}",
            a.shape(),
            b.shape(),
            v.len()
        )));
    }
    let z = a.transpose() * v;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    let mut g = DVector::zeros(delta);
    for _ in 0..num_dirs {
        let norm = loop {
            for gi in g.iter_mut() {
                *gi = StandardNormal.sample(&mut rng);
            }
            let n = g.norm();
            if n > 0.0 {
                break n;
            }
        };
        g /= norm;
        let num = z.dot(&g).abs();
        let den: f64 = (b * &g).iter().map(|x| x.abs()).sum();
        if den > 0.0 {
            best = best.max(num / den);
        } else if num > 0.0 {
            return Ok(f64::INFINITY);
        }
    }
    Ok(best)
}

/// One-sided directional derivative of `g -> ||h_tail + A g||_1 + ||B g||_1`
/// at the origin, `v'Ag + ||Bg||_1`. Valid for channels whose tail has no
/// zero entries.
pub fn directional_derivative(h: &ChannelVector, lp: usize, g: &DVector<f64>) -> Result<f64> {
    let (a, b) = partition_ab(h, lp)?;
    if g.len() != a.cols() {
        return Err(Error::Parameter(format!("offset has length {}, expected {}", g.len(), a.cols())));
    }
    let v = sign_vector(h, 1.0)?;
    let bg: f64 = (&b.entries * g).iter().map(|x| x.abs()).sum();
    Ok(v.entries.dot(&(&a.entries * g)) + bg)
}

const P_GRID_STEPS: usize = 20;
const P_RESOLUTION: f64 = 1e-3;

/// Largest exponent on the grid `{1, 0.95, ..., 0.05}` whose weighted
/// condition is satisfied, refined by bisection against the next grid point
/// up. The margin is not assumed monotone in `p`; bisection only runs on the
/// bracket found by the scan.
pub fn find_feasible_p(h: &ChannelVector, lp: usize) -> Result<f64> {
    let identifiable =
        |p: f64| -> Result<bool> { Ok(check_condition(h, lp, p)?.verdict == Verdict::Identifiable) };
    let grid = |k: usize| (P_GRID_STEPS - k) as f64 / P_GRID_STEPS as f64;

    for k in 0..P_GRID_STEPS {
        let p = grid(k);
        if !identifiable(p)? {
            continue;
        }
        if k == 0 {
            return Ok(1.0);
        }
        let (mut lo, mut hi) = (p, grid(k - 1));
        while hi - lo > P_RESOLUTION {
            let mid = 0.5 * (lo + hi);
            if identifiable(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        return Ok(lo);
    }
    let min_p = grid(P_GRID_STEPS - 1);
    Err(Error::NotFound { min_p, margin_at_min_p: check_condition(h, lp, min_p)?.margin })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel_model::gen_channel;

    fn fixture(h0: [f64; 2], h1: [f64; 2]) -> ChannelVector {
        ChannelVector::from_taps(2, 1, &[h0.to_vec(), h1.to_vec()]).unwrap()
    }

    #[test]
    fn antisymmetric_cancellation_is_identifiable() {
        let r = check_condition(&fixture([1.0, -1.0], [2.0, 2.0]), 2, 1.0).unwrap();
        assert!(r.margin.abs() < 1e-12);
        assert_eq!(r.verdict, Verdict::Identifiable);
        assert_eq!(r.method, Method::LpDual);
        assert_eq!(r.delta, 1);
    }

    #[test]
    fn dominant_first_tap_is_not_identifiable() {
        let h = fixture([3.0, 3.0], [1.0, 1.0]);
        let r = check_condition(&h, 2, 1.0).unwrap();
        assert!((r.margin - 3.0).abs() < 1e-9);
        assert_eq!(r.verdict, Verdict::NotIdentifiable);
        let sup = r.dual_certificate.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!((sup - r.margin).abs() < 1e-9);
        assert!((closed_form_delta1(&h, 1.0).unwrap() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn boundary_band() {
        assert_eq!(Verdict::from_margin(1.0), Verdict::Boundary);
        assert_eq!(Verdict::from_margin(1.0 + 5e-8), Verdict::Boundary);
        assert_eq!(Verdict::from_margin(1.0 - 2e-7), Verdict::Identifiable);
        assert_eq!(Verdict::from_margin(1.0 + 2e-7), Verdict::NotIdentifiable);
        // |v'A| = 2 = ||h_1||_1
        let r = check_condition(&fixture([1.0, 1.0], [1.0, 1.0]), 2, 1.0).unwrap();
        assert_eq!(r.verdict, Verdict::Boundary);
    }

    #[test]
    fn scale_invariance_for_l1() {
        let h = gen_channel(4, 3, 11).unwrap();
        let base = check_condition(&h, 5, 1.0).unwrap().margin;
        for c in [0.1, 7.3, 10.0] {
            let m = check_condition(&h.scaled(c).unwrap(), 5, 1.0).unwrap().margin;
            assert!((m - base).abs() < 1e-9);
        }
    }

    #[test]
    fn closed_form_matches_lp_and_report() {
        for seed in 0..200 {
            let h = gen_channel(3, 2, seed).unwrap();
            let lp = check_condition(&h, 3, 1.0).unwrap();
            let cf = closed_form_report(&h, 1.0).unwrap();
            assert!((lp.margin - cf.margin).abs() < 1e-9, "seed {seed}");
            let (a, b) = partition_ab(&h, 3).unwrap();
            let v = sign_vector(&h, 1.0).unwrap().entries;
            let z = a.entries.transpose() * v;
            let d = DVector::from_vec(cf.dual_certificate.clone());
            assert!((b.entries.transpose() * &d - z).amax() < 1e-12);
            assert!((d.amax() - cf.margin).abs() < 1e-12);
        }
    }

    #[test]
    fn sampling_agrees_with_closed_form_for_scalar_offset() {
        let h = gen_channel(4, 3, 5).unwrap();
        let (a, b) = partition_ab(&h, 4).unwrap();
        let v = sign_vector(&h, 1.0).unwrap().entries;
        let s = sup_ratio_sampling(&a.entries, &b.entries, &v, 1, 9).unwrap();
        assert!((s - closed_form_delta1(&h, 1.0).unwrap()).abs() < 1e-12);
        assert!(sup_ratio_sampling(&a.entries, &b.entries, &v, 0, 9).is_err());
    }

    #[test]
    fn rejects_out_of_range_inputs() {
        let h = fixture([3.0, 3.0], [1.0, 1.0]);
        assert!(check_condition(&h, 3, 1.0).is_err());
        assert!(check_condition(&h, 1, 1.0).is_err());
        assert!(check_condition(&h, 2, 0.0).is_err());
        let zero_tail = fixture([3.0, 3.0], [0.0, 1.0]);
        assert!(matches!(check_condition(&zero_tail, 2, 0.5), Err(Error::Domain(_))));
        let zero_last = ChannelVector::from_taps(2, 1, &[vec![1.0, 2.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(check_condition(&zero_last, 2, 1.0), Err(Error::Rank { .. })));
        assert!(matches!(closed_form_delta1(&zero_last, 1.0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn feasible_p_for_fixture_is_one_third() {
        let h = fixture([3.0, 3.0], [1.0, 1.0]);
        // weights are p at |h| = 1, so the margin is 3p
        let p = find_feasible_p(&h, 2).unwrap();
        assert!((p - 1.0 / 3.0).abs() < 1e-3, "p = {p}");
        assert!(p < 1.0 / 3.0);
        let r = check_condition(&h, 2, 0.3).unwrap();
        assert!((r.margin - 0.9).abs() < 1e-9);
    }

    #[test]
    fn feasible_p_is_one_when_already_identifiable() {
        let h = fixture([1.0, -1.0], [2.0, 2.0]);
        assert_eq!(find_feasible_p(&h, 2).unwrap(), 1.0);
    }

    #[test]
    fn margin_vanishes_as_p_shrinks() {
        for seed in 0..10 {
            let h = gen_channel(3, 3, 100 + seed).unwrap();
            // weights p|x|^(p-1) shrink roughly linearly in p near zero
            let small = check_condition(&h, 4, 1e-4).unwrap().margin;
            let tiny = check_condition(&h, 4, 1e-6).unwrap().margin;
            assert!(tiny < 1e-2, "seed {seed}: {tiny}");
            assert!(tiny < 0.05 * small, "seed {seed}: {tiny} vs {small}");
            // continuity: nearby exponents give nearby margins
            let a = check_condition(&h, 4, 0.5).unwrap().margin;
            let b = check_condition(&h, 4, 0.5 + 1e-6).unwrap().margin;
            assert!((a - b).abs() < 1e-3 * a.max(1.0));
        }
    }

    #[test]
    fn report_json_fields() {
        let r = check_condition(&fixture([3.0, 3.0], [1.0, 1.0]), 2, 1.0).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["verdict"], "not_identifiable");
        assert_eq!(v["method"], "lp_dual");
        assert_eq!(v["delta"], 1);
        assert!(v["dual_certificate"].is_array());
    }
}

//! Probability that the `l1` condition holds for Gaussian channels.
//!
//! For a single extra tap the identifiability probability is bounded below by
//!
//! ```text
//! max_{eps in [0,1]} (1 - exp(-M eps^2 / pi)) * gamma(1/2, M (1-eps)^2 / (pi L)) / sqrt(pi)
//! ```
//!
//! This module evaluates that bound, estimates the true probability by Monte
//! Carlo, and tabulates both over `(M, L)` grids.

use std::f64::consts::PI;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel_model::{gen_channel_with, validate_exponent};
use crate::error::{Error, Result};
use crate::identifiability::{check_condition, closed_form_delta1, Verdict};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;
pub const MIN_TRIALS: usize = 100;

/// One row of a bound / Monte Carlo table. Field names are the CSV headers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundPoint {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub p: f64,
    pub delta: usize,
    pub bound: Option<f64>,
    pub eps_star: Option<f64>,
    pub mc_estimate: Option<f64>,
    pub mc_halfwidth: Option<f64>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
}

pub type BoundCurve = Vec<BoundPoint>;

/// `gamma(1/2, x) = sqrt(pi) erf(sqrt(x))`.
pub fn lower_incomplete_gamma_half(x: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!("gamma(1/2, x) needs x >= 0, got {x}")));
    }
    Ok(PI.sqrt() * libm::erf(x.sqrt()))
}

/// The objective maximized over `eps`.
pub fn bound_objective(m: usize, l: usize, eps: f64) -> f64 {
    let mf = m as f64;
    let tail = -(-mf * eps * eps / PI).exp_m1();
    let x = mf * (1.0 - eps).powi(2) / (PI * l as f64);
    let gauss = lower_incomplete_gamma_half(x).expect("argument is a square") / PI.sqrt();
    tail * gauss
}

fn validate_grid_point(m: usize, l: usize) -> Result<()> {
    if m < 2 {
        return Err(Error::Parameter(format!("M must be >= 2, got {m}")));
    }
    if l < 1 {
        return Err(Error::Parameter(format!("L must be >= 1, got {l}")));
    }
    Ok(())
}

const EPS_GRID: usize = 1000;
const GOLDEN_TOL: f64 = 1e-12;

/// Lower bound on the identifiability probability for `delta = 1`, `p = 1`.
/// A 1001-point scan locates the best bracket, golden-section search refines it.
pub fn bound_l1_delta1(m: usize, l: usize) -> Result<BoundPoint> {
    validate_grid_point(m, l)?;
    let phi = |e: f64| bound_objective(m, l, e);
    let step = 1.0 / EPS_GRID as f64;
    let (best_i, best_v) = (0..=EPS_GRID)
        .map(|i| (i, phi(i as f64 * step)))
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });

    let mut lo = (best_i.saturating_sub(1)) as f64 * step;
    let mut hi = ((best_i + 1).min(EPS_GRID)) as f64 * step;
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (phi(c), phi(d));
    while hi - lo > GOLDEN_TOL {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = phi(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = phi(d);
        }
    }
    let mid = 0.5 * (lo + hi);
    let (eps_star, bound) = if phi(mid) >= best_v { (mid, phi(mid)) } else { (best_i as f64 * step, best_v) };

    Ok(BoundPoint {
        m,
        l,
        p: 1.0,
        delta: 1,
        bound: Some(bound),
        eps_star: Some(eps_star),
        mc_estimate: None,
        mc_halfwidth: None,
        trials: None,
        seed: None,
    })
}

/// Half-width of the 95% Wilson score interval.
pub fn wilson_halfwidth(successes: usize, trials: usize) -> f64 {
    let n = trials as f64;
    let phat = successes as f64 / n;
    let z2 = Z95 * Z95;
    Z95 / (1.0 + z2 / n) * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt()
}

/// Random stream for one trial: independent of how trials are partitioned.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Counts channels passing the condition; channels on which the condition is
/// undefined (zero entries for `p < 1`) count as failures.
fn count_identifiable(m: usize, l: usize, delta: usize, p: f64, trials: usize, seed: u64) -> Result<usize> {
    let outcomes: Vec<Result<bool>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let h = gen_channel_with(m, l, &mut trial_rng(seed, t))?;
            let margin = if delta == 1 {
                closed_form_delta1(&h, p)
            } else {
                check_condition(&h, l + delta, p).map(|r| r.margin)
            };
            match margin {
                Ok(mg) => Ok(Verdict::from_margin(mg) == Verdict::Identifiable),
                Err(Error::Domain(_) | Error::Degenerate(_) | Error::Rank { .. }) => Ok(false),
                Err(e) => Err(e),
            }
        })
        .collect();
    outcomes.into_iter().try_fold(0, |acc, o| Ok(acc + o? as usize))
}

/// Monte Carlo frequency of the identifiability condition with `L' = L + 1`.
pub fn monte_carlo_probability(m: usize, l: usize, p: f64, trials: usize, seed: u64) -> Result<BoundPoint> {
    monte_carlo_probability_delta(m, l, 1, p, trials, seed)
}

/// As [`monte_carlo_probability`] for an arbitrary over-modeling degree. The
/// closed-form bound only applies to `delta = 1`; other rows leave it empty.
pub fn monte_carlo_probability_delta(
    m: usize,
    l: usize,
    delta: usize,
    p: f64,
    trials: usize,
    seed: u64,
) -> Result<BoundPoint> {
    validate_grid_point(m, l)?;
    validate_exponent(p)?;
    if trials < MIN_TRIALS {
        return Err(Error::Parameter(format!("trials must be >= {MIN_TRIALS}, got {trials}")));
    }
    if delta < 1 || delta > l {
        return Err(Error::Parameter(format!("delta must satisfy 1 <= delta <= L = {l}, got {delta}")));
    }
    let hits = count_identifiable(m, l, delta, p, trials, seed)?;
    let (bound, eps_star) = if delta == 1 {
        let b = bound_l1_delta1(m, l)?;
        (b.bound, b.eps_star)
    } else {
        (None, None)
    };
    Ok(BoundPoint {
        m,
        l,
        p,
        delta,
        bound,
        eps_star,
        mc_estimate: Some(hits as f64 / trials as f64),
        mc_halfwidth: Some(wilson_halfwidth(hits, trials)),
        trials: Some(trials),
        seed: Some(seed),
    })
}

/// Bound and Monte Carlo estimate on every `(M, L)` pair, in lexicographic
/// order. Every grid point uses the same master seed.
pub fn sweep(m_list: &[usize], l_list: &[usize], p: f64, trials: usize, seed: u64) -> Result<BoundCurve> {
    if m_list.is_empty() || l_list.is_empty() {
        return Err(Error::Parameter("sweep grids must be nonempty".into()));
    }
    let mut grid: Vec<(usize, usize)> = m_list
        .iter()
        .flat_map(|&m| l_list.iter().map(move |&l| (m, l)))
        .collect();
    grid.sort_unstable();
    grid.dedup();
    grid.par_iter()
        .map(|&(m, l)| monte_carlo_probability(m, l, p, trials, seed))
        .collect()
}

/// Writes rows with the header `M,L,p,delta,bound,eps_star,mc_estimate,mc_halfwidth,trials,seed`.
/// Absent values are empty fields.
pub fn write_csv<W: Write>(rows: &[BoundPoint], out: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    if rows.is_empty() {
        wtr.write_record(["M", "L", "p", "delta", "bound", "eps_star", "mc_estimate", "mc_halfwidth", "trials", "seed"])
            .map_err(csv_err)?;
    }
    for row in rows {
        wtr.serialize(row).map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<BoundCurve> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(csv_err))
        .collect()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}

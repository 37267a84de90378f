//! The two linear-programming shapes used by the identifiability analysis:
//! minimum-`l_inf` solutions of an underdetermined system, and (weighted)
//! `l1` regression. Both reduce to standard form and go through the same
//! Bland-rule simplex.

mod simplex;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use simplex::Outcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

impl From<Outcome> for LpStatus {
    fn from(o: Outcome) -> Self {
        match o {
            Outcome::Optimal => LpStatus::Optimal,
            Outcome::Infeasible => LpStatus::Infeasible,
            Outcome::Unbounded => LpStatus::Unbounded,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChebyshevSolution {
    pub d: DVector<f64>,
    /// `||d||_inf`.
    pub value: f64,
    pub status: LpStatus,
}

#[derive(Debug, Clone)]
pub struct L1RegressionSolution {
    pub g: DVector<f64>,
    /// `sum_i w_i |y_i - (X g)_i|`, with unit weights for the plain problem.
    pub objective: f64,
    pub status: LpStatus,
}

pub(crate) fn numeric_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.singular_values();
    let max = sv.max();
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}

/// `min ||d||_inf  s.t.  Bt d = z` for a full-row-rank `Bt` (`delta x m`).
pub fn solve_chebyshev(bt: &DMatrix<f64>, z: &DVector<f64>) -> Result<ChebyshevSolution> {
    let (delta, m) = bt.shape();
    if delta == 0 || m == 0 || z.len() != delta {
        return Err(Error::Parameter(format!(
            "Chebyshev problem needs a nonempty {delta}x{m} matrix and a length-{delta} target, got {}",
            z.len()
        )));
    }
    let rank = numeric_rank(bt, 1e-12);
    if rank < delta {
        return Err(Error::Rank { expected: delta, found: rank });
    }
    if z.iter().all(|&x| x == 0.0) {
        return Ok(ChebyshevSolution { d: DVector::zeros(m), value: 0.0, status: LpStatus::Optimal });
    }

    // Columns: d+ (m), d- (m), t, slack (m).
    let cols = 3 * m + 1;
    let t_col = 2 * m;
    let mut a = DMatrix::zeros(delta + m, cols);
    let mut b = DVector::zeros(delta + m);
    a.view_mut((0, 0), (delta, m)).copy_from(bt);
    a.view_mut((0, m), (delta, m)).copy_from(&(-bt));
    b.rows_mut(0, delta).copy_from(z);
    for i in 0..m {
        let r = delta + i;
        a[(r, i)] = 1.0;
        a[(r, m + i)] = 1.0;
        a[(r, t_col)] = -1.0;
        a[(r, t_col + 1 + i)] = 1.0;
    }
    let mut c = DVector::zeros(cols);
    c[t_col] = 1.0;

    let sol = simplex::solve(&a, &b, &c)?;
    if sol.outcome != Outcome::Optimal {
        return Ok(ChebyshevSolution { d: DVector::zeros(m), value: f64::NAN, status: sol.outcome.into() });
    }
    let d = sol.x.rows(0, m) - sol.x.rows(m, m);
    let residual = (bt * &d - z).amax();
    if residual > 1e-9 * (1.0 + z.amax()) {
        return Err(Error::Lp(format!("Chebyshev solution residual {residual:e} exceeds tolerance")));
    }
    let value = d.amax();
    Ok(ChebyshevSolution { d, value, status: LpStatus::Optimal })
}

/// A global minimizer of `||y - X g||_1`.
pub fn solve_l1_regression(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<L1RegressionSolution> {
    solve_weighted_l1_regression(x, y, &DVector::from_element(y.len(), 1.0))
}

/// A global minimizer of `sum_i w_i |y_i - (X g)_i|` for nonnegative weights.
pub fn solve_weighted_l1_regression(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    w: &DVector<f64>,
) -> Result<L1RegressionSolution> {
    let (m, delta) = x.shape();
    if delta == 0 || m < delta || y.len() != m || w.len() != m {
        return Err(Error::Parameter(format!(
            "l1 regression needs m >= delta >= 1 with matching lengths; got X {m}x{delta}, y {}, w {}",
            y.len(),
            w.len()
        )));
    }
    if w.iter().any(|&wi| !(wi.is_finite() && wi >= 0.0)) {
        return Err(Error::Parameter("regression weights must be finite and nonnegative".into()));
    }

    // Columns: g+ (delta), g- (delta), u (m), v (m) with X g + u - v = y.
    let cols = 2 * delta + 2 * m;
    let mut a = DMatrix::zeros(m, cols);
    a.view_mut((0, 0), (m, delta)).copy_from(x);
    a.view_mut((0, delta), (m, delta)).copy_from(&(-x));
    let mut c = DVector::zeros(cols);
    for i in 0..m {
        a[(i, 2 * delta + i)] = 1.0;
        a[(i, 2 * delta + m + i)] = -1.0;
        c[2 * delta + i] = w[i];
        c[2 * delta + m + i] = w[i];
    }

    let sol = simplex::solve(&a, y, &c)?;
    if sol.outcome != Outcome::Optimal {
        return Ok(L1RegressionSolution {
            g: DVector::zeros(delta),
            objective: f64::NAN,
            status: sol.outcome.into(),
        });
    }
    let g = sol.x.rows(0, delta) - sol.x.rows(delta, delta);
    let objective = weighted_l1(&(y - x * &g), w);
    Ok(L1RegressionSolution { g, objective, status: LpStatus::Optimal })
}

fn weighted_l1(r: &DVector<f64>, w: &DVector<f64>) -> f64 {
    r.iter().zip(w.iter()).map(|(ri, wi)| wi * ri.abs()).sum()
}

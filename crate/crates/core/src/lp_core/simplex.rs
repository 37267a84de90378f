//! Dense two-phase tableau simplex for `min c'x  s.t.  Ax = b, x >= 0`.
//!
//! Pivoting follows Bland's rule (lowest eligible index enters, lowest basic
//! index breaks ratio ties), so the method terminates on degenerate problems
//! and the pivot sequence is a pure function of the input. Once an optimal
//! basis is found the basic values are recomputed from the original data by
//! an LU solve, which removes the rounding accumulated by the tableau updates.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Outcome {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub(crate) struct Solution {
    pub outcome: Outcome,
    pub x: DVector<f64>,
}

struct Tableau {
    /// `rows x (cols + 1)`; the last column is the right-hand side.
    t: DMatrix<f64>,
    /// Objective row of reduced costs, same width as `t`.
    obj: DVector<f64>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let width = self.t.ncols();
        let p = self.t[(row, col)];
        for j in 0..width {
            self.t[(row, j)] /= p;
        }
        for i in 0..self.t.nrows() {
            if i == row {
                continue;
            }
            let f = self.t[(i, col)];
            if f != 0.0 {
                for j in 0..width {
                    let v = self.t[(row, j)];
                    self.t[(i, j)] -= f * v;
                }
                self.t[(i, col)] = 0.0;
            }
        }
        let f = self.obj[col];
        if f != 0.0 {
            for j in 0..width {
                self.obj[j] -= f * self.t[(row, j)];
            }
            self.obj[col] = 0.0;
        }
        self.basis[row] = col;
    }

    /// Runs Bland-rule pivots over columns `< allowed` until optimal or unbounded.
    fn optimize(&mut self, allowed: usize) -> Result<Outcome> {
        let rhs = self.cols;
        for _ in 0..MAX_PIVOTS {
            let Some(enter) = (0..allowed).find(|&j| self.obj[j] < -COST_TOL) else {
                return Ok(Outcome::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.t.nrows() {
                let a = self.t[(i, enter)];
                if a > PIVOT_TOL {
                    let ratio = self.t[(i, rhs)].max(0.0) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((r, best)) => {
                            if ratio < best - 1e-15 * best.abs().max(1.0)
                                || (ratio <= best + 1e-15 * best.abs().max(1.0)
                                    && self.basis[i] < self.basis[r])
                            {
                                Some((i, ratio))
                            } else {
                                Some((r, best))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return Ok(Outcome::Unbounded),
                Some((row, _)) => self.pivot(row, enter),
            }
        }
        Err(Error::Lp(format!("exceeded {MAX_PIVOTS} pivots")))
    }
}

pub(crate) fn solve(a: &DMatrix<f64>, b: &DVector<f64>, c: &DVector<f64>) -> Result<Solution> {
    let (m, n) = a.shape();
    assert_eq!(b.len(), m);
    assert_eq!(c.len(), n);

    // Rows with negative right-hand side are negated so the artificial basis is feasible.
    let mut a_std = a.clone();
    let mut b_std = b.clone();
    for i in 0..m {
        if b_std[i] < 0.0 {
            b_std[i] = -b_std[i];
            a_std.row_mut(i).neg_mut();
        }
    }

    let cols = n + m;
    let mut t = DMatrix::zeros(m, cols + 1);
    t.view_mut((0, 0), (m, n)).copy_from(&a_std);
    for i in 0..m {
        t[(i, n + i)] = 1.0;
        t[(i, cols)] = b_std[i];
    }

    // Phase 1: minimize the sum of artificials.
    let mut obj = DVector::zeros(cols + 1);
    for i in 0..m {
        for j in 0..=cols {
            if j < n || j == cols {
                obj[j] -= t[(i, j)];
            }
        }
    }
    let mut tab = Tableau { t, obj, basis: (n..n + m).collect(), cols };
    tab.optimize(cols)?;
    let infeasibility = -tab.obj[cols];
    let scale = 1.0 + b_std.amax();
    if infeasibility > FEAS_TOL * scale {
        return Ok(Solution { outcome: Outcome::Infeasible, x: DVector::zeros(n) });
    }

    // Drive zero-level artificials out of the basis where a structural column allows it.
    for row in 0..m {
        if tab.basis[row] >= n {
            if let Some(col) = (0..n).find(|&j| tab.t[(row, j)].abs() > 1e-9) {
                tab.pivot(row, col);
            }
        }
    }

    // Phase 2 over structural columns only.
    let mut obj = DVector::zeros(cols + 1);
    obj.rows_mut(0, n).copy_from(c);
    for (row, &bj) in tab.basis.iter().enumerate() {
        let cb = if bj < n { c[bj] } else { 0.0 };
        if cb != 0.0 {
            for j in 0..=cols {
                obj[j] -= cb * tab.t[(row, j)];
            }
        }
    }
    tab.obj = obj;
    if tab.optimize(n)? == Outcome::Unbounded {
        return Ok(Solution { outcome: Outcome::Unbounded, x: DVector::zeros(n) });
    }

    let x = refine(&a_std, &b_std, &tab.basis, n).unwrap_or_else(|| {
        let mut x = DVector::zeros(n);
        for (row, &bj) in tab.basis.iter().enumerate() {
            if bj < n {
                x[bj] = tab.t[(row, cols)].max(0.0);
            }
        }
        x
    });
    Ok(Solution { outcome: Outcome::Optimal, x })
}

/// Re-solves `B x_B = b` for the final basis (artificial columns are unit vectors).
fn refine(a: &DMatrix<f64>, b: &DVector<f64>, basis: &[usize], n: usize) -> Option<DVector<f64>> {
    let m = a.nrows();
    let mut bm = DMatrix::zeros(m, m);
    for (k, &j) in basis.iter().enumerate() {
        if j < n {
            bm.set_column(k, &a.column(j));
        } else {
            bm[(j - n, k)] = 1.0;
        }
    }
    let xb = bm.lu().solve(b)?;
    if xb.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let scale = 1.0 + b.amax();
    let mut x = DVector::zeros(n);
    for (k, &j) in basis.iter().enumerate() {
        if j < n {
            let v = xb[k];
            x[j] = if v.abs() <= 1e-13 * scale { 0.0 } else { v.max(0.0) };
        }
    }
    Some(x)
}

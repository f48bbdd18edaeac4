//! Dense two-phase primal simplex with Bland's anti-cycling rule.
//!
//! Small and exact enough to serve as a verification oracle; it makes no
//! attempt at sparsity or steepest-edge pricing.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Pivot elements and reduced costs smaller than this are treated as zero.
pub const PIVOT_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `opt c·x` subject to the constraints and `x ≥ 0`.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub sense: Sense,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
    pub pivots: usize,
}

struct Tableau {
    /// `rows × (cols + 1)`, last column is the right-hand side.
    a: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
    pivots: usize,
    max_pivots: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.a[row][col];
        for v in self.a[row].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.a[row].clone();
        for (r, line) in self.a.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let f = line[col];
            if f != 0.0 {
                for (v, pv) in line.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                line[col] = 0.0;
            }
        }
        self.basis[row] = col;
        self.pivots += 1;
    }

    /// Minimizes `cost · x` over columns allowed by `allowed`. Returns the
    /// objective value.
    fn minimize(&mut self, cost: &[f64], allowed: &dyn Fn(usize) -> bool) -> Result<f64> {
        let rows = self.a.len();
        loop {
            if self.pivots > self.max_pivots {
                return Err(Error::PivotLimit(self.max_pivots));
            }
            // reduced costs d_j = c_j − Σ_r c_{B(r)} a_rj
            let mut entering = None;
            for j in 0..self.cols {
                if !allowed(j) || self.basis.contains(&j) {
                    continue;
                }
                let mut d = cost[j];
                for r in 0..rows {
                    d -= cost[self.basis[r]] * self.a[r][j];
                }
                if d < -PIVOT_TOL {
                    entering = Some(j);
                    break;
                }
            }
            let Some(col) = entering else {
                let value = (0..rows).map(|r| cost[self.basis[r]] * self.a[r][self.cols]).sum();
                return Ok(value);
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..rows {
                let coef = self.a[r][col];
                if coef > PIVOT_TOL {
                    let ratio = self.a[r][self.cols] / coef;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - PIVOT_TOL
                                || (ratio <= lratio + PIVOT_TOL && self.basis[r] < self.basis[lr])
                            {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            match leave {
                Some((row, _)) => self.pivot(row, col),
                None => return Err(Error::Unbounded),
            }
        }
    }
}

pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    let n = lp.objective.len();
    if lp.objective.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("LP objective"));
    }
    for c in &lp.constraints {
        if c.coeffs.len() != n {
            return Err(Error::shape("constraint width differs from objective"));
        }
        if !c.rhs.is_finite() || c.coeffs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("LP constraint"));
        }
    }
    // normalize to nonnegative right-hand sides
    let rows: Vec<(Vec<f64>, Relation, f64)> = lp
        .constraints
        .iter()
        .map(|c| {
            if c.rhs < 0.0 {
                let rel = match c.relation {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
                (c.coeffs.iter().map(|v| -v).collect(), rel, -c.rhs)
            } else {
                (c.coeffs.clone(), c.relation, c.rhs)
            }
        })
        .collect();
    let m = rows.len();
    let slack_count = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let art_count = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let cols = n + slack_count + art_count;
    let art_start = n + slack_count;

    let mut a = vec![vec![0.0; cols + 1]; m];
    let mut basis = vec![0; m];
    let (mut s, mut art) = (n, art_start);
    for (r, (coeffs, rel, rhs)) in rows.iter().enumerate() {
        a[r][..n].copy_from_slice(coeffs);
        a[r][cols] = *rhs;
        match rel {
            Relation::Le => {
                a[r][s] = 1.0;
                basis[r] = s;
                s += 1;
            }
            Relation::Ge => {
                a[r][s] = -1.0;
                s += 1;
                a[r][art] = 1.0;
                basis[r] = art;
                art += 1;
            }
            Relation::Eq => {
                a[r][art] = 1.0;
                basis[r] = art;
                art += 1;
            }
        }
    }
    let mut t = Tableau {
        a,
        basis,
        cols,
        pivots: 0,
        max_pivots: 100_000 + 50 * (m + cols),
    };

    if art_count > 0 {
        let mut phase1 = vec![0.0; cols];
        phase1[art_start..].iter_mut().for_each(|c| *c = 1.0);
        let infeas = t.minimize(&phase1, &|_| true)?;
        if infeas > FEAS_TOL * (1.0 + m as f64) {
            return Err(Error::Infeasible);
        }
        // drive zero-valued artificials out of the basis
        let mut r = 0;
        while r < t.a.len() {
            if t.basis[r] >= art_start {
                match (0..art_start).find(|&j| t.a[r][j].abs() > PIVOT_TOL && !t.basis.contains(&j)) {
                    Some(j) => {
                        t.pivot(r, j);
                        r += 1;
                    }
                    None => {
                        // redundant row
                        t.a.remove(r);
                        t.basis.remove(r);
                    }
                }
            } else {
                r += 1;
            }
        }
    }

    let sign = match lp.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut cost = vec![0.0; cols];
    for (c, o) in cost.iter_mut().zip(&lp.objective) {
        *c = sign * o;
    }
    t.minimize(&cost, &|j| j < art_start)?;

    let mut x = vec![0.0; n];
    for (r, &b) in t.basis.iter().enumerate() {
        if b < n {
            x[b] = t.a[r][t.cols].max(0.0);
        }
    }
    let value = x.iter().zip(&lp.objective).map(|(a, b)| a * b).sum();
    Ok(LpSolution {
        x,
        value,
        pivots: t.pivots,
    })
}

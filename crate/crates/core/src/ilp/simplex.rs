//! Dense bounded-variable primal simplex with Bland's rule.
//!
//! Solves `min cᵀx` subject to `Σ a_ij x_j (≤ | =) b_i` and `l ≤ x ≤ u`
//! with finite bounds. Non-basic variables sit at one of their bounds, so
//! the `[0, 1]` boxes of the relaxation never become explicit rows. A
//! two-phase scheme with artificial variables finds the first basis.

use super::problem::{Row, Sense};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const FEASIBILITY_TOL: f64 = 1e-7;
const MAX_ITERATIONS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Basic,
    AtLower,
    AtUpper,
}

struct Tableau {
    rows: usize,
    cols: usize,
    /// `B⁻¹ A`, row-major.
    t: Vec<f64>,
    /// Values of the basic variables.
    beta: Vec<f64>,
    basis: Vec<usize>,
    status: Vec<Status>,
    /// Upper bound of each (shifted) column; lower bounds are zero.
    ub: Vec<f64>,
    /// Reduced costs for the current phase.
    d: Vec<f64>,
    frozen: Vec<bool>,
}

enum Step {
    Optimal,
    Unbounded,
    Moved,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.cols + j]
    }

    fn value(&self, j: usize, row_of: &[Option<usize>]) -> f64 {
        match self.status[j] {
            Status::Basic => self.beta[row_of[j].expect("basic column has a row")],
            Status::AtLower => 0.0,
            Status::AtUpper => self.ub[j],
        }
    }

    fn price(&mut self, cost: &[f64]) {
        self.d = cost.to_vec();
        for i in 0..self.rows {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * self.cols..(i + 1) * self.cols];
                for (dj, tij) in self.d.iter_mut().zip(row) {
                    *dj -= cb * tij;
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let cols = self.cols;
        let p = self.t[r * cols + q];
        for v in &mut self.t[r * cols..(r + 1) * cols] {
            *v /= p;
        }
        let pivot_row: Vec<f64> = self.t[r * cols..(r + 1) * cols].to_vec();
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.t[i * cols + q];
            if f != 0.0 {
                for (v, pr) in self.t[i * cols..(i + 1) * cols].iter_mut().zip(&pivot_row) {
                    *v -= f * pr;
                }
                self.t[i * cols + q] = 0.0;
            }
        }
        let f = self.d[q];
        if f != 0.0 {
            for (v, pr) in self.d.iter_mut().zip(&pivot_row) {
                *v -= f * pr;
            }
            self.d[q] = 0.0;
        }
        let leaving = self.basis[r];
        self.basis[r] = q;
        self.status[q] = Status::Basic;
        debug_assert_ne!(leaving, q);
    }

    /// One Bland iteration on the current reduced costs.
    fn step(&mut self) -> Step {
        let entering = (0..self.cols).find(|&j| {
            !self.frozen[j]
                && match self.status[j] {
                    Status::Basic => false,
                    Status::AtLower => self.d[j] < -COST_TOL,
                    Status::AtUpper => self.d[j] > COST_TOL,
                }
        });
        let Some(q) = entering else {
            return Step::Optimal;
        };
        let dir = if self.status[q] == Status::AtLower { 1.0 } else { -1.0 };

        // Ratio test; a bound flip of the entering column competes with pivots.
        let mut limit = self.ub[q];
        let mut leave: Option<(usize, bool)> = None;
        for i in 0..self.rows {
            let alpha = dir * self.at(i, q);
            let b = self.basis[i];
            let (t, to_upper) = if alpha > PIVOT_TOL {
                (self.beta[i] / alpha, false)
            } else if alpha < -PIVOT_TOL && self.ub[b].is_finite() {
                ((self.ub[b] - self.beta[i]) / -alpha, true)
            } else {
                continue;
            };
            let t = t.max(0.0);
            let better = match leave {
                _ if t < limit - 1e-12 => true,
                Some((r, _)) => (t - limit).abs() <= 1e-12 && b < self.basis[r],
                None => false,
            };
            if better {
                limit = t;
                leave = Some((i, to_upper));
            }
        }
        if !limit.is_finite() {
            return Step::Unbounded;
        }

        for i in 0..self.rows {
            let alpha = dir * self.at(i, q);
            if alpha != 0.0 {
                self.beta[i] -= alpha * limit;
            }
        }
        match leave {
            None => {
                self.status[q] = if dir > 0.0 { Status::AtUpper } else { Status::AtLower };
            }
            Some((r, to_upper)) => {
                let leaving = self.basis[r];
                let entering_value = if dir > 0.0 { limit } else { self.ub[q] - limit };
                self.pivot(r, q);
                self.beta[r] = entering_value;
                self.status[leaving] = if to_upper { Status::AtUpper } else { Status::AtLower };
                if !to_upper {
                    // Snap drift so the leaving column sits exactly on its bound.
                    self.beta.iter_mut().for_each(|v| {
                        if v.abs() < 1e-13 {
                            *v = 0.0
                        }
                    });
                }
            }
        }
        Step::Moved
    }

    fn optimize(&mut self) -> Option<Step> {
        for _ in 0..MAX_ITERATIONS {
            match self.step() {
                Step::Moved => continue,
                other => return Some(other),
            }
        }
        None
    }
}

/// Solves the linear program described by `rows` over the box `[lower, upper]`.
pub fn solve(cost: &[f64], rows: &[Row], lower: &[f64], upper: &[f64]) -> LpOutcome {
    let n = cost.len();
    debug_assert!(lower.len() == n && upper.len() == n);
    if (0..n).any(|j| upper[j] < lower[j] - FEASIBILITY_TOL) {
        return LpOutcome::Infeasible;
    }

    // Columns with a non-degenerate range become tableau columns; the rest
    // are constants at their lower bound.
    let mut col_of = vec![None; n];
    let mut structural = Vec::new();
    for j in 0..n {
        if upper[j] - lower[j] > 1e-12 {
            col_of[j] = Some(structural.len());
            structural.push(j);
        }
    }
    let k = structural.len();

    struct Shifted {
        coeffs: Vec<(usize, f64)>,
        rhs: f64,
        le: bool,
    }
    let mut shifted = Vec::new();
    for row in rows {
        let mut rhs = row.rhs;
        let mut coeffs = Vec::new();
        for &(j, a) in &row.terms {
            rhs -= a * lower[j];
            if let Some(c) = col_of[j] {
                if a != 0.0 {
                    coeffs.push((c, a));
                }
            }
        }
        let le = row.sense == Sense::LessEqual;
        if coeffs.is_empty() {
            let ok = if le {
                rhs >= -FEASIBILITY_TOL
            } else {
                rhs.abs() <= FEASIBILITY_TOL
            };
            if !ok {
                return LpOutcome::Infeasible;
            }
            continue;
        }
        shifted.push(Shifted { coeffs, rhs, le });
    }

    let m = shifted.len();
    let n_slack = shifted.iter().filter(|r| r.le).count();
    let n_art = shifted.iter().filter(|r| !r.le || r.rhs < 0.0).count();
    let cols = k + n_slack + n_art;

    let mut tab = Tableau {
        rows: m,
        cols,
        t: vec![0.0; m * cols],
        beta: vec![0.0; m],
        basis: vec![0; m],
        status: vec![Status::AtLower; cols],
        ub: vec![f64::INFINITY; cols],
        d: vec![0.0; cols],
        frozen: vec![false; cols],
    };
    for (c, &j) in structural.iter().enumerate() {
        tab.ub[c] = upper[j] - lower[j];
    }
    let mut next_slack = k;
    let mut next_art = k + n_slack;
    let mut phase1 = vec![0.0; cols];
    for (i, row) in shifted.iter().enumerate() {
        let sign = if row.rhs < 0.0 { -1.0 } else { 1.0 };
        for &(c, a) in &row.coeffs {
            tab.t[i * cols + c] += sign * a;
        }
        tab.beta[i] = sign * row.rhs;
        let mut basic = None;
        if row.le {
            tab.t[i * cols + next_slack] = sign;
            if sign > 0.0 {
                basic = Some(next_slack);
            }
            next_slack += 1;
        }
        let b = basic.unwrap_or_else(|| {
            let a = next_art;
            next_art += 1;
            tab.t[i * cols + a] = 1.0;
            phase1[a] = 1.0;
            a
        });
        tab.basis[i] = b;
        tab.status[b] = Status::Basic;
    }

    if n_art > 0 {
        tab.price(&phase1);
        match tab.optimize() {
            None => return LpOutcome::IterationLimit,
            Some(Step::Unbounded) => return LpOutcome::Unbounded,
            Some(_) => {}
        }
        let infeasibility: f64 = (0..m)
            .filter(|&i| tab.basis[i] >= k + n_slack)
            .map(|i| tab.beta[i])
            .sum();
        if infeasibility > FEASIBILITY_TOL {
            return LpOutcome::Infeasible;
        }
        // Drive zero-valued artificials out of the basis where possible.
        for r in 0..m {
            if tab.basis[r] < k + n_slack {
                continue;
            }
            let q = (0..k + n_slack).find(|&j| tab.status[j] != Status::Basic && tab.at(r, j).abs() > FEASIBILITY_TOL);
            if let Some(q) = q {
                let value = if tab.status[q] == Status::AtUpper {
                    tab.ub[q]
                } else {
                    0.0
                };
                let leaving = tab.basis[r];
                tab.pivot(r, q);
                tab.beta[r] = value;
                tab.status[leaving] = Status::AtLower;
            }
        }
        for a in k + n_slack..cols {
            tab.frozen[a] = true;
            tab.ub[a] = 0.0;
        }
    }

    let mut phase2 = vec![0.0; cols];
    for (c, &j) in structural.iter().enumerate() {
        phase2[c] = cost[j];
    }
    tab.price(&phase2);
    match tab.optimize() {
        None => return LpOutcome::IterationLimit,
        Some(Step::Unbounded) => return LpOutcome::Unbounded,
        Some(_) => {}
    }

    let mut row_of = vec![None; cols];
    for (i, &b) in tab.basis.iter().enumerate() {
        row_of[b] = Some(i);
    }
    let mut x = lower.to_vec();
    for (c, &j) in structural.iter().enumerate() {
        x[j] = (lower[j] + tab.value(c, &row_of)).clamp(lower[j], upper[j]);
    }
    let value = cost.iter().zip(&x).map(|(c, v)| c * v).sum();
    LpOutcome::Optimal { x, value }
}

use super::problem::{AssignmentProblem, Solution};
use super::BoundPoint;
use crate::error::{Error, Result};

/// Largest number of target assignments the oracle will enumerate.
pub const ORACLE_LIMIT: u128 = 5_000_000;

struct Search<'a> {
    problem: &'a AssignmentProblem,
    /// Compatible candidates per target.
    options: Vec<Vec<usize>>,
    used: Vec<bool>,
    choice: Vec<Option<usize>>,
    best: Option<(f64, Vec<Option<usize>>)>,
}

impl Search<'_> {
    fn pair_gain(&self, d: usize) -> f64 {
        let layout = self.problem.layout;
        let mut gain = 0.0;
        for (e, used) in self.used.iter().enumerate() {
            if *used && e != d {
                gain += self.problem.cost[layout.pair(d, e)].min(0.0);
                gain += self.problem.cost[layout.pair(e, d)].min(0.0);
            }
        }
        gain
    }

    fn visit(&mut self, target: usize, partial: f64) {
        let layout = self.problem.layout;
        if target == layout.n_targets {
            if self.best.as_ref().is_none_or(|(b, _)| partial < *b) {
                self.best = Some((partial, self.choice.clone()));
            }
            return;
        }
        let fake = self.problem.cost[layout.fake(target)];
        self.choice[target] = None;
        self.visit(target + 1, partial + fake);
        for k in 0..self.options[target].len() {
            let d = self.options[target][k];
            if self.used[d] {
                continue;
            }
            let step = self.problem.cost[layout.assign(target, d)] + self.pair_gain(d);
            self.used[d] = true;
            self.choice[target] = Some(d);
            self.visit(target + 1, partial + step);
            self.used[d] = false;
        }
        self.choice[target] = None;
    }
}

/// Exact minimum by enumerating every feasible target assignment.
///
/// Given the target assignments, each pair variable is independent: it is
/// set exactly when both candidates are assigned and its cost is negative.
/// Refuses instances where the product over targets of
/// `1 + compatible candidates` exceeds [`ORACLE_LIMIT`].
pub fn exhaustive_oracle(problem: &AssignmentProblem) -> Result<Solution> {
    let layout = problem.layout;
    let options: Vec<Vec<usize>> = (0..layout.n_targets)
        .map(|t| {
            (0..layout.n_detections)
                .filter(|&d| !problem.is_fixed_zero(layout.assign(t, d)))
                .collect()
        })
        .collect();
    let mut assignments: u128 = 1;
    for o in &options {
        assignments = assignments.saturating_mul(1 + o.len() as u128);
        if assignments > ORACLE_LIMIT {
            return Err(Error::OracleTooLarge {
                assignments,
                limit: ORACLE_LIMIT,
            });
        }
    }

    let mut search = Search {
        problem,
        options,
        used: vec![false; layout.n_detections],
        choice: vec![None; layout.n_targets],
        best: None,
    };
    search.visit(0, 0.0);
    let (_, choice) = search.best.expect("the all-fake assignment is always feasible");

    let mut x = vec![0u8; layout.len()];
    let mut assigned = vec![false; layout.n_detections];
    for (t, c) in choice.iter().enumerate() {
        match c {
            Some(d) => {
                x[layout.assign(t, *d)] = 1;
                assigned[*d] = true;
            }
            None => x[layout.fake(t)] = 1,
        }
    }
    for a in 0..layout.n_detections {
        for b in 0..layout.n_detections {
            let j = layout.pair(a, b);
            if a != b && assigned[a] && assigned[b] && problem.cost[j] < 0.0 {
                x[j] = 1;
            }
        }
    }
    let objective = problem.objective(&x);
    Ok(Solution {
        assignment: x,
        objective,
        node_count: 0,
        bound_trace: vec![BoundPoint {
            lower: objective,
            upper: objective,
        }],
    })
}

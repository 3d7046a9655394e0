use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::feasibility::check_feasible;
use super::problem::{AssignmentProblem, Sense, Solution};
use super::simplex::{self, LpOutcome};
use crate::error::{Error, Result};

/// A relaxed value within this distance of 0 or 1 counts as integral.
pub const INTEGRALITY_TOLERANCE: f64 = 1e-7;
/// Search stops once the incumbent is within this of the best open bound.
pub const GAP_TOLERANCE: f64 = 1e-9;

/// Global bounds after one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundPoint {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Relaxation {
    pub x: Vec<f64>,
    pub value: f64,
}

/// Columns that only appear with positive coefficients in `≤` rows and have
/// non-negative cost. Some LP optimum has them at zero, so fixing them there
/// leaves the relaxation value unchanged.
fn dominated_columns(problem: &AssignmentProblem) -> Vec<bool> {
    let mut dominated: Vec<bool> = problem.cost.iter().map(|c| *c >= 0.0).collect();
    for row in &problem.rows {
        for &(j, a) in &row.terms {
            if row.sense == Sense::Equal || a < 0.0 {
                dominated[j] = false;
            }
        }
    }
    dominated
}

fn relax(problem: &AssignmentProblem, dominated: &[bool], fixings: &[Option<bool>]) -> Result<Relaxation> {
    let n = problem.len();
    let mut lower = vec![0.0; n];
    let mut upper = problem.upper.clone();
    for j in 0..n {
        match fixings.get(j).copied().flatten() {
            Some(true) => {
                if problem.upper[j] < 1.0 {
                    return Err(Error::Infeasible);
                }
                lower[j] = 1.0;
            }
            Some(false) => upper[j] = 0.0,
            None if dominated[j] => upper[j] = 0.0,
            None => {}
        }
    }
    match simplex::solve(&problem.cost, &problem.rows, &lower, &upper) {
        LpOutcome::Optimal { x, value } => Ok(Relaxation { x, value }),
        LpOutcome::Infeasible => Err(Error::Infeasible),
        LpOutcome::Unbounded => Err(Error::invalid("relaxation", "unbounded linear program")),
        LpOutcome::IterationLimit => Err(Error::invalid("relaxation", "simplex iteration limit reached")),
    }
}

/// Solves the `[0, 1]` relaxation with some variables fixed. An infeasible
/// subproblem is reported as [`Error::Infeasible`].
pub fn lp_relax_solve(problem: &AssignmentProblem, fixings: &[Option<bool>]) -> Result<Relaxation> {
    relax(problem, &dominated_columns(problem), fixings)
}

fn fractionality(v: f64) -> f64 {
    v.min(1.0 - v).max(0.0)
}

fn is_integral(x: &[f64]) -> bool {
    x.iter().all(|v| fractionality(*v) <= INTEGRALITY_TOLERANCE)
}

/// The fractional variable nearest to integrality; ties to the lowest index.
fn branching_variable(x: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, v) in x.iter().enumerate() {
        let f = fractionality(*v);
        if f > INTEGRALITY_TOLERANCE && best.is_none_or(|(_, b)| f < b) {
            best = Some((j, f));
        }
    }
    best.map(|(j, _)| j)
}

struct Node {
    bound: f64,
    seq: usize,
    fixings: Vec<Option<bool>>,
    x: Vec<f64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // Reversed so the max-heap pops the smallest bound, then the oldest node.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then(other.seq.cmp(&self.seq))
    }
}

/// Best-first branch-and-bound over LP relaxations.
///
/// The incumbent starts at the all-fake solution. Each expanded node
/// branches on [`branching_variable`] into `= 0` and `= 1` children; a child
/// whose relaxation is integral updates the incumbent, otherwise it is queued
/// if its bound can still beat the incumbent. `node_count` counts solved
/// relaxations, root included.
pub fn branch_and_bound(problem: &AssignmentProblem) -> Result<Solution> {
    let n = problem.len();
    let dominated = dominated_columns(problem);
    let root = relax(problem, &dominated, &vec![None; n])?;

    let mut incumbent = problem.all_fake();
    let mut upper = problem.objective(&incumbent);
    let mut node_count = 1;
    let mut seq = 0;
    let mut open = BinaryHeap::new();
    let mut trace = Vec::new();

    let offer = |x: &[f64], incumbent: &mut Vec<u8>, upper: &mut f64| {
        let rounded: Vec<u8> = x.iter().map(|v| u8::from(*v > 0.5)).collect();
        if !check_feasible(&rounded, problem).is_feasible() {
            return;
        }
        let value = problem.objective(&rounded);
        if value < *upper {
            *upper = value;
            *incumbent = rounded;
        }
    };

    if is_integral(&root.x) {
        offer(&root.x, &mut incumbent, &mut upper);
    } else if root.value < upper - GAP_TOLERANCE {
        open.push(Node {
            bound: root.value,
            seq,
            fixings: vec![None; n],
            x: root.x,
        });
        seq += 1;
    }
    let global = |open: &BinaryHeap<Node>, upper: f64| BoundPoint {
        lower: open.peek().map_or(upper, |node| node.bound.min(upper)),
        upper,
    };
    trace.push(global(&open, upper));

    while let Some(node) = open.pop() {
        if node.bound >= upper - GAP_TOLERANCE {
            break;
        }
        let var = branching_variable(&node.x).expect("queued nodes are fractional");
        for value in [false, true] {
            let mut fixings = node.fixings.clone();
            fixings[var] = Some(value);
            let child = match relax(problem, &dominated, &fixings) {
                Ok(r) => r,
                Err(Error::Infeasible) => continue,
                Err(e) => return Err(e),
            };
            node_count += 1;
            // Added fixings can only tighten the bound.
            let bound = child.value.max(node.bound);
            if is_integral(&child.x) {
                offer(&child.x, &mut incumbent, &mut upper);
            } else if bound < upper - GAP_TOLERANCE {
                open.push(Node {
                    bound,
                    seq,
                    fixings,
                    x: child.x,
                });
                seq += 1;
            }
        }
        trace.push(global(&open, upper));
    }
    // Whatever is left open cannot improve on the incumbent.
    trace.push(BoundPoint { lower: upper, upper });

    Ok(Solution {
        objective: problem.objective(&incumbent),
        assignment: incumbent,
        node_count,
        bound_trace: trace,
    })
}

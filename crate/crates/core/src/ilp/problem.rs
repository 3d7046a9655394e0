use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::layout::{Variable, VariableLayout};
use crate::types::{Detection, PartType};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    LessEqual,
    Equal,
}

/// Which family a constraint row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    /// (a) a candidate goes to at most one target.
    AtMostOneTarget { detection: usize },
    /// (b) a target takes exactly one candidate, the fake one included.
    OneChoice { target: usize },
    /// (d) `s[first][second]` needs `first` assigned.
    PairNeedsFirst { first: usize, second: usize },
    /// (d) `s[first][second]` needs `second` assigned.
    PairNeedsSecond { first: usize, second: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub kind: ConstraintKind,
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// The frame's binary program. Type-incompatible assignments and self pairs
/// are fixed to zero through `upper`; every other variable lies in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentProblem {
    pub layout: VariableLayout,
    pub cost: Vec<f64>,
    pub rows: Vec<Row>,
    pub upper: Vec<f64>,
    pub target_types: Vec<PartType>,
    pub detection_types: Vec<PartType>,
}

/// Scored inputs for [`build_problem`]; all matrices are indexed
/// `[target][candidate]` or `[candidate][candidate]`.
#[derive(Debug, Clone, Copy)]
pub struct CostInputs<'a> {
    pub target_types: &'a [PartType],
    pub detections: &'a [Detection],
    /// `log Δ(a[n][d])`.
    pub geo_log: &'a [Vec<f64>],
    /// Log of the marginal detection likelihood under the target's prediction.
    pub motion_loglik: &'a [Vec<f64>],
    /// Association score `p(s[d][e])`, before the logarithm.
    pub affinity: &'a [Vec<f64>],
    pub beta: f64,
}

/// Builds costs and constraints:
/// fake `-log β`, real `-(log Δ + log p̂ + log N)`, pair `-log p(s)`.
pub fn build_problem(inputs: CostInputs<'_>) -> Result<AssignmentProblem> {
    if !(inputs.beta > 0.0) {
        return Err(Error::NonPositiveClutter(inputs.beta));
    }
    let n = inputs.target_types.len();
    let m = inputs.detections.len();
    let fake = vec![-inputs.beta.ln(); n];
    let mut assign = vec![vec![0.0; m]; n];
    for (t, row) in assign.iter_mut().enumerate() {
        for (d, det) in inputs.detections.iter().enumerate() {
            if det.part_type == inputs.target_types[t] {
                row[d] = -(inputs.geo_log[t][d] + det.confidence.ln() + inputs.motion_loglik[t][d]);
            }
        }
    }
    let pair: Vec<Vec<f64>> = (0..m)
        .map(|a| {
            (0..m)
                .map(|b| if a == b { 0.0 } else { -inputs.affinity[a][b].ln() })
                .collect()
        })
        .collect();
    AssignmentProblem::from_costs(
        inputs.target_types.to_vec(),
        inputs.detections.iter().map(|d| d.part_type).collect(),
        fake,
        assign,
        pair,
    )
}

impl AssignmentProblem {
    /// Assembles the program from explicit costs. Entries of `assign_cost`
    /// for type-incompatible pairs and the diagonal of `pair_cost` are ignored.
    pub fn from_costs(
        target_types: Vec<PartType>,
        detection_types: Vec<PartType>,
        fake_cost: Vec<f64>,
        assign_cost: Vec<Vec<f64>>,
        pair_cost: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = target_types.len();
        let m = detection_types.len();
        if fake_cost.len() != n
            || assign_cost.len() != n
            || assign_cost.iter().any(|r| r.len() != m)
            || pair_cost.len() != m
            || pair_cost.iter().any(|r| r.len() != m)
        {
            return Err(Error::invalid("assignment problem", "cost matrix shapes do not match"));
        }
        let layout = VariableLayout::new(n, m);
        let mut cost = vec![0.0; layout.len()];
        let mut upper = vec![1.0; layout.len()];
        for t in 0..n {
            cost[layout.fake(t)] = fake_cost[t];
            for d in 0..m {
                let j = layout.assign(t, d);
                if detection_types[d] == target_types[t] {
                    cost[j] = assign_cost[t][d];
                } else {
                    upper[j] = 0.0;
                }
            }
        }
        for a in 0..m {
            for b in 0..m {
                let j = layout.pair(a, b);
                if a == b {
                    upper[j] = 0.0;
                } else {
                    cost[j] = pair_cost[a][b];
                }
            }
        }
        if let Some((index, &value)) = cost.iter().enumerate().find(|(_, c)| !c.is_finite()) {
            return Err(Error::NonFiniteCost { index, value });
        }

        let mut rows = Vec::with_capacity(m + n + 2 * m * m);
        for d in 0..m {
            rows.push(Row {
                kind: ConstraintKind::AtMostOneTarget { detection: d },
                terms: (0..n).map(|t| (layout.assign(t, d), 1.0)).collect(),
                sense: Sense::LessEqual,
                rhs: 1.0,
            });
        }
        for t in 0..n {
            rows.push(Row {
                kind: ConstraintKind::OneChoice { target: t },
                terms: std::iter::once(layout.fake(t))
                    .chain((0..m).map(|d| layout.assign(t, d)))
                    .map(|j| (j, 1.0))
                    .collect(),
                sense: Sense::Equal,
                rhs: 1.0,
            });
        }
        for a in 0..m {
            for b in 0..m {
                if a == b {
                    continue;
                }
                let s = layout.pair(a, b);
                for (kind, d) in [
                    (ConstraintKind::PairNeedsFirst { first: a, second: b }, a),
                    (ConstraintKind::PairNeedsSecond { first: a, second: b }, b),
                ] {
                    let mut terms = vec![(s, 1.0)];
                    terms.extend((0..n).map(|t| (layout.assign(t, d), -1.0)));
                    rows.push(Row {
                        kind,
                        terms,
                        sense: Sense::LessEqual,
                        rhs: 0.0,
                    });
                }
            }
        }

        Ok(Self {
            layout,
            cost,
            rows,
            upper,
            target_types,
            detection_types,
        })
    }

    pub fn len(&self) -> usize {
        self.cost.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cost.is_empty()
    }

    pub fn is_fixed_zero(&self, j: usize) -> bool {
        self.upper[j] <= 0.0
    }

    /// `Φᵀ Λ`, summed in index order.
    pub fn objective(&self, assignment: &[u8]) -> f64 {
        self.cost
            .iter()
            .zip(assignment)
            .filter(|(_, x)| **x == 1)
            .map(|(c, _)| *c)
            .sum()
    }

    /// Every target on the fake candidate, no associations. Always feasible.
    pub fn all_fake(&self) -> Vec<u8> {
        let mut x = vec![0u8; self.len()];
        for t in 0..self.layout.n_targets {
            x[self.layout.fake(t)] = 1;
        }
        x
    }

    pub fn variable_name(&self, j: usize) -> String {
        match self.layout.decode(j) {
            Some(Variable::Fake { target }) => format!("a[{target}][fake]"),
            Some(Variable::Assign { target, detection }) => format!("a[{target}][{detection}]"),
            Some(Variable::Pair { first, second }) => format!("s[{first}][{second}]"),
            None => format!("x{j}"),
        }
    }

    /// Line-oriented listing of the program:
    ///
    /// ```text
    /// program targets <N> candidates <M> variables <J>
    /// var <j> <name> cost <c> upper <u>
    /// row <i> <kind> <coef> <name> ... <= | = <rhs>
    /// ```
    ///
    /// Numbers use Rust's shortest round-trip formatting.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "program targets {} candidates {} variables {}",
            self.layout.n_targets,
            self.layout.n_detections,
            self.len()
        );
        for j in 0..self.len() {
            let _ = writeln!(
                out,
                "var {j} {} cost {} upper {}",
                self.variable_name(j),
                self.cost[j],
                self.upper[j]
            );
        }
        for (i, row) in self.rows.iter().enumerate() {
            let kind = match row.kind {
                ConstraintKind::AtMostOneTarget { .. } => "a",
                ConstraintKind::OneChoice { .. } => "b",
                ConstraintKind::PairNeedsFirst { .. } | ConstraintKind::PairNeedsSecond { .. } => "d",
            };
            let _ = write!(out, "row {i} {kind}");
            for (j, c) in &row.terms {
                let _ = write!(out, " {c:+} {}", self.variable_name(*j));
            }
            let sense = match row.sense {
                Sense::LessEqual => "<=",
                Sense::Equal => "=",
            };
            let _ = writeln!(out, " {sense} {}", row.rhs);
        }
        out
    }
}

/// Optimal binary vector with solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub assignment: Vec<u8>,
    pub objective: f64,
    pub node_count: usize,
    pub bound_trace: Vec<super::BoundPoint>,
}

impl Solution {
    /// Candidate chosen for `target`, `None` for the fake candidate.
    pub fn target_choice(&self, layout: &VariableLayout, target: usize) -> Option<usize> {
        (0..layout.n_detections).find(|&d| self.assignment[layout.assign(target, d)] == 1)
    }

    /// Ordered candidate pairs with `s = 1`.
    pub fn active_pairs(&self, layout: &VariableLayout) -> Vec<(usize, usize)> {
        let m = layout.n_detections;
        (0..m)
            .flat_map(|a| (0..m).map(move |b| (a, b)))
            .filter(|&(a, b)| self.assignment[layout.pair(a, b)] == 1)
            .collect()
    }
}

use std::fmt;

use super::problem::AssignmentProblem;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    WrongLength {
        expected: usize,
        found: usize,
    },
    NotBinary {
        index: usize,
    },
    /// (a)
    DetectionShared {
        detection: usize,
        targets: usize,
    },
    /// (b)
    TargetChoices {
        target: usize,
        choices: usize,
    },
    /// (c)
    TypeMismatch {
        target: usize,
        detection: usize,
    },
    /// (d)
    PairEndpointUnassigned {
        first: usize,
        second: usize,
        endpoint: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::WrongLength { expected, found } => {
                write!(f, "vector has {found} entries, expected {expected}")
            }
            Violation::NotBinary { index } => write!(f, "entry {index} is not 0 or 1"),
            Violation::DetectionShared { detection, targets } => {
                write!(f, "(a) candidate {detection} assigned to {targets} targets")
            }
            Violation::TargetChoices { target, choices } => {
                write!(f, "(b) target {target} has {choices} choices")
            }
            Violation::TypeMismatch { target, detection } => {
                write!(f, "(c) target {target} takes candidate {detection} of another type")
            }
            Violation::PairEndpointUnassigned {
                first,
                second,
                endpoint,
            } => {
                write!(
                    f,
                    "(d) s[{first}][{second}] set while candidate {endpoint} is unassigned"
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FeasibilityReport {
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks constraints (a)–(d) on a binary vector directly from the part
/// types, without going through the constraint rows.
pub fn check_feasible(assignment: &[u8], problem: &AssignmentProblem) -> FeasibilityReport {
    let layout = problem.layout;
    let mut violations = Vec::new();
    if assignment.len() != layout.len() {
        violations.push(Violation::WrongLength {
            expected: layout.len(),
            found: assignment.len(),
        });
        return FeasibilityReport { violations };
    }
    violations.extend(
        assignment
            .iter()
            .enumerate()
            .filter(|(_, v)| **v > 1)
            .map(|(index, _)| Violation::NotBinary { index }),
    );

    let (n, m) = (layout.n_targets, layout.n_detections);
    let mut assigned = vec![0usize; m];
    for t in 0..n {
        let mut choices = usize::from(assignment[layout.fake(t)] == 1);
        for (d, count) in assigned.iter_mut().enumerate() {
            if assignment[layout.assign(t, d)] == 1 {
                choices += 1;
                *count += 1;
                if problem.target_types[t] != problem.detection_types[d] {
                    violations.push(Violation::TypeMismatch {
                        target: t,
                        detection: d,
                    });
                }
            }
        }
        if choices != 1 {
            violations.push(Violation::TargetChoices { target: t, choices });
        }
    }
    for (d, &targets) in assigned.iter().enumerate() {
        if targets > 1 {
            violations.push(Violation::DetectionShared { detection: d, targets });
        }
    }
    for a in 0..m {
        for b in 0..m {
            if assignment[layout.pair(a, b)] != 1 {
                continue;
            }
            for endpoint in [a, b] {
                if assigned[endpoint] == 0 {
                    violations.push(Violation::PairEndpointUnassigned {
                        first: a,
                        second: b,
                        endpoint,
                    });
                }
            }
        }
    }
    FeasibilityReport { violations }
}

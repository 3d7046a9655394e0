//! Indexing of the joint binary vector `[theta, gamma]`.
//!
//! For `N` targets and `M` part candidates the vector has
//! `J = N (M + 1) + M * M` entries. Target `n` owns the block
//! `n (M + 1) .. (n + 1)(M + 1)`: offset 0 is the fake candidate, offset
//! `1 + d` is candidate `d`. The association block follows, row-major over
//! ordered candidate pairs `(d, d2)`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableLayout {
    pub n_targets: usize,
    pub n_detections: usize,
}

/// Meaning of one coordinate of the binary vector. Candidate indices are
/// zero-based positions in the frame's part-candidate list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Variable {
    Fake { target: usize },
    Assign { target: usize, detection: usize },
    Pair { first: usize, second: usize },
}

impl VariableLayout {
    pub fn new(n_targets: usize, n_detections: usize) -> Self {
        Self {
            n_targets,
            n_detections,
        }
    }

    pub fn len(&self) -> usize {
        self.theta_len() + self.n_detections * self.n_detections
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Length of the target-assignment block.
    pub fn theta_len(&self) -> usize {
        self.n_targets * (self.n_detections + 1)
    }

    pub fn fake(&self, target: usize) -> usize {
        debug_assert!(target < self.n_targets);
        target * (self.n_detections + 1)
    }

    pub fn assign(&self, target: usize, detection: usize) -> usize {
        debug_assert!(target < self.n_targets && detection < self.n_detections);
        target * (self.n_detections + 1) + 1 + detection
    }

    pub fn pair(&self, first: usize, second: usize) -> usize {
        debug_assert!(first < self.n_detections && second < self.n_detections);
        self.theta_len() + first * self.n_detections + second
    }

    pub fn index_of(&self, var: Variable) -> usize {
        match var {
            Variable::Fake { target } => self.fake(target),
            Variable::Assign { target, detection } => self.assign(target, detection),
            Variable::Pair { first, second } => self.pair(first, second),
        }
    }

    pub fn decode(&self, index: usize) -> Option<Variable> {
        if index < self.theta_len() {
            let block = self.n_detections + 1;
            let target = index / block;
            Some(match index % block {
                0 => Variable::Fake { target },
                off => Variable::Assign {
                    target,
                    detection: off - 1,
                },
            })
        } else if index < self.len() {
            let rel = index - self.theta_len();
            Some(Variable::Pair {
                first: rel / self.n_detections,
                second: rel % self.n_detections,
            })
        } else {
            None
        }
    }

    pub fn variables(&self) -> impl Iterator<Item = Variable> + '_ {
        (0..self.len()).map(|j| self.decode(j).expect("index in range"))
    }
}

/// Layout for `n_targets` targets and `n_detections` part candidates.
pub fn layout(n_targets: usize, n_detections: usize) -> VariableLayout {
    VariableLayout::new(n_targets, n_detections)
}

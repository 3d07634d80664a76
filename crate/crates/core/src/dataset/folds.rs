use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SignalRecord;
use crate::{Error, Result};

pub const MIN_FOLDS: usize = 5;
pub const MAX_FOLDS: usize = 10;

/// Stratified assignment of records to `p` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub p: usize,
    pub assignments: Vec<usize>,
    pub seed: u64,
}

/// Index sets for one fold choice. All three are sorted and disjoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldRoles {
    pub test_fold: usize,
    pub eval_fold: usize,
    pub train: Vec<usize>,
    pub eval: Vec<usize>,
    pub test: Vec<usize>,
}

impl FoldRoles {
    /// Rows visible to selection and model tuning (train then eval).
    pub fn search_rows(&self) -> Vec<usize> {
        let mut rows: Vec<usize> = self.train.iter().chain(&self.eval).copied().collect();
        rows.sort_unstable();
        rows
    }
}

/// How fold roles are laid out over a plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FoldScheme {
    /// Every fold serves once as test; eval is the next fold.
    Rotating,
    /// One fold stays hidden as test; the eval role rotates over the rest.
    HiddenTest { test_fold: usize },
}

impl Default for FoldScheme {
    fn default() -> Self {
        FoldScheme::HiddenTest { test_fold: 0 }
    }
}

impl FoldPlan {
    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn members(&self, fold: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, &f)| f == fold)
            .map(|(i, _)| i)
            .collect()
    }

    /// Test = `test_fold`, eval = `(test_fold + 1) mod p`, train = the rest.
    pub fn roles(&self, test_fold: usize) -> Result<FoldRoles> {
        if test_fold >= self.p {
            return Err(Error::Argument(format!(
                "test fold {test_fold} out of range for p = {}",
                self.p
            )));
        }
        self.roles_with(test_fold, (test_fold + 1) % self.p)
    }

    pub fn roles_with(&self, test_fold: usize, eval_fold: usize) -> Result<FoldRoles> {
        if test_fold >= self.p || eval_fold >= self.p || test_fold == eval_fold {
            return Err(Error::Argument(format!(
                "invalid fold pair (test {test_fold}, eval {eval_fold}) for p = {}",
                self.p
            )));
        }
        let mut roles = FoldRoles {
            test_fold,
            eval_fold,
            train: Vec::new(),
            eval: Vec::new(),
            test: Vec::new(),
        };
        for (i, &f) in self.assignments.iter().enumerate() {
            if f == test_fold {
                roles.test.push(i);
            } else if f == eval_fold {
                roles.eval.push(i);
            } else {
                roles.train.push(i);
            }
        }
        Ok(roles)
    }

    pub fn schedule(&self, scheme: FoldScheme) -> Result<Vec<FoldRoles>> {
        match scheme {
            FoldScheme::Rotating => (0..self.p).map(|t| self.roles(t)).collect(),
            FoldScheme::HiddenTest { test_fold } => {
                if test_fold >= self.p {
                    return Err(Error::Argument(format!(
                        "hidden test fold {test_fold} out of range for p = {}",
                        self.p
                    )));
                }
                (1..self.p)
                    .map(|off| self.roles_with(test_fold, (test_fold + off) % self.p))
                    .collect()
            }
        }
    }
}

/// Stratified, seeded fold assignment.
///
/// Each class is shuffled and dealt round-robin, starting where the previous
/// class stopped, so per-class and total fold sizes both differ by at most one.
pub fn make_folds(records: &[SignalRecord], p: usize, seed: u64) -> Result<FoldPlan> {
    let labels: Vec<usize> = records.iter().map(|r| r.label).collect();
    make_folds_from_labels(&labels, p, seed)
}

pub fn make_folds_from_labels(labels: &[usize], p: usize, seed: u64) -> Result<FoldPlan> {
    if !(MIN_FOLDS..=MAX_FOLDS).contains(&p) {
        return Err(Error::Config(format!(
            "fold count {p} outside [{MIN_FOLDS}, {MAX_FOLDS}]"
        )));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &label) in labels.iter().enumerate() {
        by_class.entry(label).or_default().push(i);
    }
    if let Some((label, members)) = by_class.iter().find(|(_, m)| m.len() < p) {
        return Err(Error::Config(format!(
            "class {label} has {} record(s), fewer than p = {p}",
            members.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignments = vec![0; labels.len()];
    let mut next = 0;
    for members in by_class.values_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            assignments[i] = next;
            next = (next + 1) % p;
        }
    }
    Ok(FoldPlan {
        p,
        assignments,
        seed,
    })
}

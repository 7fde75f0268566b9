//! Run budgets, evaluation accounting and solver run results.
//!
//! One "evaluation" is one solution considered: a full [`evaluate`]
//! (crate::model::evaluate) counts one, and so does each incremental
//! neighbor probed through the swap delta machinery. Eval-count budgets
//! therefore make runs fully deterministic; wall-clock budgets are for
//! timed experiments and are inherently machine-dependent.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::model::{Evaluation, Solution};

/// Stop condition: maximum evaluations and/or wall-clock seconds,
/// whichever is hit first. At least one bound must be set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    max_evaluations: Option<u64>,
    max_seconds: Option<f64>,
}

impl Budget {
    pub fn evaluations(n: u64) -> Self {
        Budget {
            max_evaluations: Some(n),
            max_seconds: None,
        }
    }

    pub fn seconds(s: f64) -> Self {
        Budget {
            max_evaluations: None,
            max_seconds: Some(s),
        }
    }

    /// Both bounds; `None, None` is rejected because such a run could
    /// never stop on algorithms without a natural termination.
    pub fn new(max_evaluations: Option<u64>, max_seconds: Option<f64>) -> Result<Self, &'static str> {
        if max_evaluations.is_none() && max_seconds.is_none() {
            return Err("budget must set at least one of max evaluations / max seconds");
        }
        Ok(Budget {
            max_evaluations,
            max_seconds,
        })
    }

    pub fn max_evaluations(&self) -> Option<u64> {
        self.max_evaluations
    }

    pub fn max_seconds(&self) -> Option<f64> {
        self.max_seconds
    }
}

/// Tracks elapsed evaluations and time for one run against an optional
/// budget. Checked inside the innermost solver loops so wall-clock limits
/// are honored promptly.
#[derive(Debug)]
pub struct Clock {
    start: Instant,
    evaluations: u64,
    budget: Option<Budget>,
}

impl Clock {
    pub fn new(budget: Budget) -> Self {
        Clock {
            start: Instant::now(),
            evaluations: 0,
            budget: Some(budget),
        }
    }

    /// A clock that never expires; handy for calling local searches
    /// directly in tests.
    pub fn unbounded() -> Self {
        Clock {
            start: Instant::now(),
            evaluations: 0,
            budget: None,
        }
    }

    /// Records one solution evaluation.
    #[inline]
    pub fn tick(&mut self) {
        self.evaluations += 1;
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    pub fn elapsed_seconds(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    #[inline]
    pub fn exhausted(&self) -> bool {
        let Some(budget) = &self.budget else {
            return false;
        };
        if let Some(max) = budget.max_evaluations {
            if self.evaluations >= max {
                return true;
            }
        }
        if let Some(max) = budget.max_seconds {
            if self.start.elapsed().as_secs_f64() >= max {
                return true;
            }
        }
        false
    }
}

/// One sample of the best-so-far fitness. Violations come first so that
/// trajectories are monotone under the same lexicographic order the
/// solvers optimize.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub evaluations: u64,
    pub violations: usize,
    pub avg_distance: f64,
}

impl TrajectoryPoint {
    pub(crate) fn of(evaluations: u64, eval: &Evaluation) -> Self {
        TrajectoryPoint {
            evaluations,
            violations: eval.violations(),
            avg_distance: eval.avg_distance,
        }
    }

    /// Lexicographic fitness order used for monotonicity checks.
    pub fn fitness_not_worse_than(&self, other: &TrajectoryPoint) -> bool {
        self.violations < other.violations
            || (self.violations == other.violations && self.avg_distance <= other.avg_distance)
    }
}

/// Outcome of a single solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub seed: u64,
    pub best_solution: Solution,
    pub best_evaluation: Evaluation,
    /// Total evaluations consumed (full and incremental).
    pub evaluations: u64,
    /// Wall-clock time of the run. The only field not reproducible across
    /// repeats; everything else is seed-deterministic under eval budgets.
    pub wall_seconds: f64,
    /// Best-so-far fitness after initialization and after every iteration.
    pub trajectory: Vec<TrajectoryPoint>,
}

impl RunResult {
    /// True when the best-so-far trajectory never worsens.
    pub fn trajectory_is_monotone(&self) -> bool {
        self.trajectory
            .windows(2)
            .all(|w| w[1].fitness_not_worse_than(&w[0]))
    }
}

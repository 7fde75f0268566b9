//! Objective evaluation, constraint bookkeeping and the incremental swap
//! machinery the local searches build on.

use std::cmp::Ordering;

use thiserror::Error;

use super::instance::Instance;
use super::matching::match_substations;
use super::solution::Solution;

/// Station index used in [`Assignment`] when no station applies (the
/// second-nearest slot of a single-station solution).
pub const NO_STATION: usize = usize::MAX;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SwapError {
    #[error("candidate {0} is not open in the evaluated solution")]
    NotOpen(usize),
    #[error("candidate {0} is not closed in the evaluated solution")]
    NotClosed(usize),
}

/// One client-to-station assignment: the candidate index of the station
/// and the distance to it in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assignment {
    pub station: usize,
    pub distance: f64,
}

impl Assignment {
    /// Lexicographic (distance, station) order; station index breaks ties
    /// so that evaluation is fully deterministic.
    #[inline]
    fn key_less(&self, distance: f64, station: usize) -> bool {
        match self.distance.partial_cmp(&distance).unwrap() {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => self.station < station,
        }
    }
}

/// Full evaluation of a solution: objective, per-client nearest and
/// second-nearest open stations, substation assignment and violation
/// counts. Keeps a copy of the open set so swaps can be validated and
/// applied against it.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    open: Vec<usize>,
    /// Weighted distance sum in meters·persons.
    pub objective: f64,
    /// `objective / total_users`; the fitness figure reported everywhere.
    pub avg_distance: f64,
    /// Per-client nearest open station.
    pub nearest: Vec<Assignment>,
    /// Per-client second-nearest open station; `NO_STATION` when only one
    /// station is open.
    pub second_nearest: Vec<Assignment>,
    /// Substation feeding each open station (aligned with `open()`), or
    /// `None` where the matching left a station unfed.
    pub substation_assignment: Vec<Option<usize>>,
    /// Clients whose nearest open station violates the client distance cap.
    pub dc_violations: usize,
    /// Whether a full substation assignment exists.
    pub substation_feasible: bool,
}

impl Evaluation {
    /// Sorted open candidate indices of the evaluated solution.
    pub fn open(&self) -> &[usize] {
        &self.open
    }

    pub fn solution(&self) -> Solution {
        Solution::from_sorted_unchecked(self.open.clone())
    }

    pub fn is_open(&self, candidate: usize) -> bool {
        self.open.binary_search(&candidate).is_ok()
    }

    /// Total violation count used by [`compare`]: distance-cap violations
    /// plus one if no substation assignment exists.
    pub fn violations(&self) -> usize {
        self.dc_violations + usize::from(!self.substation_feasible)
    }

    pub fn is_feasible(&self) -> bool {
        self.violations() == 0
    }
}

/// Evaluates `solution` from scratch. Clients are assigned to their
/// nearest open station, ties broken by lowest candidate index.
/// Infeasibility is reported in the returned fields, never as an error.
pub fn evaluate(instance: &Instance, solution: &Solution) -> Evaluation {
    let open = solution.open().to_vec();
    let n = instance.n_clients();
    let mut nearest = Vec::with_capacity(n);
    let mut second = Vec::with_capacity(n);

    for c in 0..n {
        let (best, runner_up) = best_two(instance.client_distances(c), &open);
        nearest.push(best);
        second.push(runner_up);
    }

    let (substation_feasible, substation_assignment) = match_substations(instance, &open);
    let (objective, avg_distance, dc_violations) = accumulate(instance, &nearest);

    Evaluation {
        open,
        objective,
        avg_distance,
        nearest,
        second_nearest: second,
        substation_assignment,
        dc_violations,
        substation_feasible,
    }
}

/// Objective, average distance and cap-violation count from a nearest
/// assignment. One pass in client order, so repeated calls accumulate in
/// the same floating-point order and agree bit-for-bit.
fn accumulate(instance: &Instance, nearest: &[Assignment]) -> (f64, f64, usize) {
    let cap = instance.max_client_dist();
    let mut objective = 0.0;
    let mut violations = 0usize;
    for (c, a) in nearest.iter().enumerate() {
        objective += instance.users()[c] * a.distance;
        if !cap.allows(a.distance) {
            violations += 1;
        }
    }
    (objective, objective / instance.total_users(), violations)
}

/// Constraint-first ordering shared by every algorithm: fewer total
/// violations wins, ties broken by lower objective. Any feasible solution
/// therefore beats any infeasible one.
pub fn compare(a: &Evaluation, b: &Evaluation) -> Ordering {
    a.violations()
        .cmp(&b.violations())
        .then_with(|| a.objective.partial_cmp(&b.objective).unwrap())
}

/// Exact objective change of swapping open station `close` for closed
/// candidate `open_new`, in O(N) using the nearest/second-nearest
/// bookkeeping. No state is modified.
pub fn delta_swap(
    instance: &Instance,
    eval: &Evaluation,
    close: usize,
    open_new: usize,
) -> Result<f64, SwapError> {
    validate_swap(instance, eval, close, open_new)?;
    Ok(swap_deltas(instance, eval, close, open_new).0)
}

/// Objective delta plus the change in distance-cap violations. The cheap
/// pre-filter used by the interchange local search.
pub(crate) fn swap_deltas(
    instance: &Instance,
    eval: &Evaluation,
    close: usize,
    open_new: usize,
) -> (f64, i64) {
    let cap = instance.max_client_dist();
    let users = instance.users();
    let mut delta = 0.0;
    let mut viol_delta = 0i64;

    for c in 0..instance.n_clients() {
        let d_new = instance.client_distance(c, open_new);
        let near = eval.nearest[c];
        let new_dist = if near.station == close {
            // The nearest station goes away; the survivor is the better of
            // the second-nearest and the incoming candidate.
            let second = eval.second_nearest[c];
            if second.key_less(d_new, open_new) {
                second.distance
            } else {
                d_new
            }
        } else if near.key_less(d_new, open_new) {
            continue;
        } else {
            d_new
        };
        delta += users[c] * (new_dist - near.distance);
        viol_delta += i64::from(!cap.allows(new_dist)) - i64::from(!cap.allows(near.distance));
    }
    (delta, viol_delta)
}

/// Applies the swap and returns the updated evaluation. Field-for-field
/// identical to re-evaluating the swapped solution from scratch; the
/// substation matching is re-run in full.
pub fn apply_swap(
    instance: &Instance,
    eval: &Evaluation,
    close: usize,
    open_new: usize,
) -> Result<Evaluation, SwapError> {
    validate_swap(instance, eval, close, open_new)?;

    let mut open = eval.open.clone();
    let pos = open.binary_search(&close).unwrap();
    open.remove(pos);
    let ins = open.binary_search(&open_new).unwrap_err();
    open.insert(ins, open_new);

    let mut nearest = eval.nearest.clone();
    let mut second = eval.second_nearest.clone();

    for c in 0..instance.n_clients() {
        let d_new = instance.client_distance(c, open_new);
        let near = nearest[c];
        let sec = second[c];
        let incoming = Assignment { station: open_new, distance: d_new };

        if near.station == close {
            // Nearest removed. Every survivor ranks at or behind the old
            // second-nearest.
            if sec.key_less(d_new, open_new) {
                // Old second still leads, but the new runner-up could be
                // the incoming candidate or some hidden third: rescan.
                rescan_client(instance, &open, c, &mut nearest, &mut second);
            } else {
                // Incoming beats the old second, hence every survivor.
                nearest[c] = incoming;
                second[c] = sec;
            }
        } else if !near.key_less(d_new, open_new) {
            // Incoming beats the surviving nearest, which slides to second
            // (it led all other survivors, including any removed second).
            second[c] = near;
            nearest[c] = incoming;
        } else if sec.station == close {
            // Second removed while nearest survives and still leads.
            if sec.key_less(d_new, open_new) {
                // Incoming ranks behind the removed second; the new second
                // is the better of incoming and a hidden third: rescan.
                rescan_client(instance, &open, c, &mut nearest, &mut second);
            } else {
                // Incoming beats the removed second, hence any third.
                second[c] = incoming;
            }
        } else if !sec.key_less(d_new, open_new) {
            second[c] = incoming;
        }
        // Otherwise the incoming candidate ranks behind both cached
        // assignments and the pair is untouched.
    }

    let (substation_feasible, substation_assignment) = match_substations(instance, &open);
    let (objective, avg_distance, dc_violations) = accumulate(instance, &nearest);

    Ok(Evaluation {
        open,
        objective,
        avg_distance,
        nearest,
        second_nearest: second,
        substation_assignment,
        dc_violations,
        substation_feasible,
    })
}

fn validate_swap(
    instance: &Instance,
    eval: &Evaluation,
    close: usize,
    open_new: usize,
) -> Result<(), SwapError> {
    if !eval.is_open(close) {
        return Err(SwapError::NotOpen(close));
    }
    if open_new >= instance.n_candidates() || eval.is_open(open_new) {
        return Err(SwapError::NotClosed(open_new));
    }
    Ok(())
}

/// Recomputes the best-two pair for one client by scanning the open set.
fn rescan_client(
    instance: &Instance,
    open: &[usize],
    c: usize,
    nearest: &mut [Assignment],
    second: &mut [Assignment],
) {
    let (best, runner_up) = best_two(instance.client_distances(c), open);
    nearest[c] = best;
    second[c] = runner_up;
}

/// Nearest and second-nearest open station for one distance row. `open`
/// is sorted ascending, so strict `<` comparisons yield exactly the
/// (distance, station-index) lexicographic order: on equal distances the
/// earlier (lower) index is kept. This is the hottest loop in the crate.
#[inline]
fn best_two(row: &[f64], open: &[usize]) -> (Assignment, Assignment) {
    let mut best_d = f64::INFINITY;
    let mut best_s = NO_STATION;
    let mut sec_d = f64::INFINITY;
    let mut sec_s = NO_STATION;
    for &s in open {
        let d = row[s];
        if d < best_d {
            sec_d = best_d;
            sec_s = best_s;
            best_d = d;
            best_s = s;
        } else if d < sec_d {
            sec_d = d;
            sec_s = s;
        }
    }
    (
        Assignment { station: best_s, distance: best_d },
        Assignment { station: sec_s, distance: sec_d },
    )
}

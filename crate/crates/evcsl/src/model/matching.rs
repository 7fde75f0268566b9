//! Substation feasibility: can every open station be fed by a substation
//! within the distance cap without exceeding any substation's capacity?
//!
//! This is a capacitated bipartite matching (equivalently a max-flow with
//! unit station capacities and `mp_e` substation capacities). Stations are
//! matched one by one with augmenting paths; the solution is feasible iff
//! the maximum matching covers all `Ms` stations.

use super::instance::Instance;
use super::solution::Solution;

/// Tests whether `solution` admits a substation assignment satisfying the
/// distance cap and capacities, and returns one witness. Unmatched
/// stations get `None` in the returned vector (aligned with the sorted
/// open list).
pub fn check_substation_feasibility(
    instance: &Instance,
    solution: &Solution,
) -> (bool, Vec<Option<usize>>) {
    match_substations(instance, solution.open())
}

/// Core matcher over a sorted open list. Deterministic: stations are
/// processed in list order and substations probed in index order, so the
/// witness is reproducible.
pub(crate) fn match_substations(
    instance: &Instance,
    open: &[usize],
) -> (bool, Vec<Option<usize>>) {
    let n_sub = instance.n_substations();
    let cap = instance.max_substation_dist();

    // feeds[e] holds the station positions currently assigned to substation e.
    let mut feeds: Vec<Vec<usize>> = vec![Vec::new(); n_sub];
    let mut assigned: Vec<Option<usize>> = vec![None; open.len()];
    let mut visited = vec![false; n_sub];
    let mut matched = 0usize;

    let allowed = |e: usize, pos: usize| cap.allows(instance.substation_distance(e, open[pos]));

    for pos in 0..open.len() {
        visited.fill(false);
        if augment(instance, open, pos, &mut feeds, &mut assigned, &mut visited, &allowed) {
            matched += 1;
        }
    }
    (matched == open.len(), assigned)
}

/// Tries to assign station `pos`, recursively displacing earlier
/// assignments when a substation is full.
fn augment(
    instance: &Instance,
    open: &[usize],
    pos: usize,
    feeds: &mut Vec<Vec<usize>>,
    assigned: &mut Vec<Option<usize>>,
    visited: &mut [bool],
    allowed: &dyn Fn(usize, usize) -> bool,
) -> bool {
    for e in 0..instance.n_substations() {
        if visited[e] || !allowed(e, pos) {
            continue;
        }
        visited[e] = true;
        if feeds[e].len() < instance.substation_capacity()[e] as usize {
            feeds[e].push(pos);
            assigned[pos] = Some(e);
            return true;
        }
        // Full: try to move one of its stations elsewhere.
        for k in 0..feeds[e].len() {
            let other = feeds[e][k];
            if augment(instance, open, other, feeds, assigned, visited, allowed) {
                // `other` found a new home; its old slot may have been
                // appended elsewhere, so rewrite this slot with `pos`.
                let idx = feeds[e].iter().position(|&p| p == other);
                if let Some(idx) = idx {
                    feeds[e][idx] = pos;
                } else {
                    feeds[e].push(pos);
                }
                assigned[pos] = Some(e);
                return true;
            }
        }
    }
    false
}

/// Exhaustive oracle used by tests here and in the oracle module: try
/// every station->substation map.
#[cfg(test)]
pub(crate) fn feasible_by_enumeration(instance: &Instance, open: &[usize]) -> bool {
    let t = instance.n_substations();
    let ms = open.len();
    let mut assign = vec![0usize; ms];
    loop {
        let mut counts = vec![0u32; t];
        let mut ok = true;
        for (pos, &e) in assign.iter().enumerate() {
            counts[e] += 1;
            if counts[e] > instance.substation_capacity()[e]
                || !instance
                    .max_substation_dist()
                    .allows(instance.substation_distance(e, open[pos]))
            {
                ok = false;
                break;
            }
        }
        if ok {
            return true;
        }
        // next assignment in base-t counting
        let mut i = 0;
        loop {
            if i == ms {
                return false;
            }
            assign[i] += 1;
            if assign[i] < t {
                break;
            }
            assign[i] = 0;
            i += 1;
        }
    }
}

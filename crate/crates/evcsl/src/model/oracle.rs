//! Exhaustive optimum for small instances. The problem is NP-hard, so this
//! only exists as a ground-truth oracle for tests and tiny scenarios.

use thiserror::Error;

use super::evaluation::{compare, evaluate, Evaluation};
use super::instance::Instance;
use super::solution::Solution;

/// Enumeration guard: refuse instances with more than this many subsets.
pub const MAX_SUBSETS: u64 = 10_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("C({m}, {ms}) = {subsets} subsets exceeds the enumeration limit of {MAX_SUBSETS}")]
    TooLarge { m: usize, ms: usize, subsets: u64 },
}

/// Best solution over all `Ms`-subsets under [`compare`], ties resolved to
/// the lexicographically smallest open set (the enumeration order). When
/// no feasible subset exists the best infeasible one is returned; check
/// `Evaluation::is_feasible` on the result.
pub fn brute_force_optimum(instance: &Instance) -> Result<(Solution, Evaluation), OracleError> {
    let m = instance.n_candidates();
    let ms = instance.n_stations();
    let subsets = binomial_capped(m, ms, MAX_SUBSETS);
    if subsets > MAX_SUBSETS {
        return Err(OracleError::TooLarge { m, ms, subsets });
    }

    let mut best: Option<(Solution, Evaluation)> = None;
    let mut current: Vec<usize> = (0..ms).collect();
    loop {
        let sol = Solution::from_sorted_unchecked(current.clone());
        let eval = evaluate(instance, &sol);
        let is_better = match &best {
            None => true,
            Some((_, b)) => compare(&eval, b) == std::cmp::Ordering::Less,
        };
        if is_better {
            best = Some((sol, eval));
        }
        if !next_combination(&mut current, m) {
            break;
        }
    }
    Ok(best.expect("at least one subset exists"))
}

/// Advances `comb` to the next Ms-subset of `0..m` in lexicographic order.
fn next_combination(comb: &mut [usize], m: usize) -> bool {
    let k = comb.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if comb[i] != i + m - k {
            comb[i] += 1;
            for j in i + 1..k {
                comb[j] = comb[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// C(m, k), saturating once it exceeds `cap` to avoid overflow.
fn binomial_capped(m: usize, k: usize, cap: u64) -> u64 {
    let k = k.min(m - k);
    let mut result: u64 = 1;
    for i in 0..k {
        result = result.saturating_mul((m - i) as u64) / (i as u64 + 1);
        if result > cap {
            return cap + 1;
        }
    }
    result
}

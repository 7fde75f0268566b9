//! Solution encoding: the set of open candidate locations.

use rand::Rng;

use super::instance::{Instance, ValidationError};

/// A solution is the set of exactly `Ms` open candidate indices, kept
/// sorted and duplicate-free. Conceptually this is the sparse form of the
/// binary location vector: it lists the positions of the 1-entries.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Solution {
    open: Vec<usize>,
}

impl Solution {
    /// Validates `open` against the instance: exactly `Ms` distinct
    /// indices, all within `[0, M)`. The input order does not matter.
    pub fn new(mut open: Vec<usize>, instance: &Instance) -> Result<Self, ValidationError> {
        open.sort_unstable();
        if open.windows(2).any(|w| w[0] == w[1]) {
            return Err(ValidationError::new("open", "duplicate candidate index"));
        }
        if open.len() != instance.n_stations() {
            return Err(ValidationError::new(
                "open",
                format!(
                    "has {} open stations, instance requires exactly {}",
                    open.len(),
                    instance.n_stations()
                ),
            ));
        }
        if let Some(&last) = open.last() {
            if last >= instance.n_candidates() {
                return Err(ValidationError::new(
                    "open",
                    format!("index {} out of range, instance has {} candidates", last, instance.n_candidates()),
                ));
            }
        }
        Ok(Solution { open })
    }

    /// Builds from indices already known to be sorted, distinct and in range.
    pub(crate) fn from_sorted_unchecked(open: Vec<usize>) -> Self {
        debug_assert!(open.windows(2).all(|w| w[0] < w[1]));
        Solution { open }
    }

    /// A uniformly random `Ms`-subset of the candidates.
    pub fn random<R: Rng + ?Sized>(instance: &Instance, rng: &mut R) -> Self {
        let picked = rand::seq::index::sample(rng, instance.n_candidates(), instance.n_stations());
        let mut open: Vec<usize> = picked.into_iter().collect();
        open.sort_unstable();
        Solution { open }
    }

    /// Sorted open candidate indices.
    pub fn open(&self) -> &[usize] {
        &self.open
    }

    pub fn is_open(&self, candidate: usize) -> bool {
        self.open.binary_search(&candidate).is_ok()
    }

    /// The solution with `close` swapped out for `open_idx`, preserving
    /// sort order. Caller guarantees `close` is open and `open_idx` closed.
    pub(crate) fn with_swap(&self, close: usize, open_idx: usize) -> Solution {
        let mut open = self.open.clone();
        let pos = open.binary_search(&close).expect("close must be open");
        open.remove(pos);
        let ins = open.binary_search(&open_idx).unwrap_err();
        open.insert(ins, open_idx);
        Solution { open }
    }
}

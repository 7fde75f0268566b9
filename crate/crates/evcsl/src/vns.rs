//! Variable neighborhood search: shake at growing intensity, improve with
//! a first-improvement interchange, accept only strict improvements, stop
//! after a full block of non-improving sweeps or on budget exhaustion.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ga::ConfigError;
use crate::model::{
    apply_swap, compare, evaluate, point_distance_key, swap_deltas, Evaluation, Instance,
    Solution,
};
use crate::run::{Budget, Clock, RunResult, TrajectoryPoint};

/// How a station's shake neighborhood is sized: a fixed number of nearest
/// candidates (`Closest`) or one that widens with the shake intensity `k`
/// (`Quadratic`, width = size * k).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NeighborhoodModel {
    Quadratic,
    Closest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShakeMode {
    Random,
}

/// Schedule mapping the loop index to the shake intensity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NextMode {
    /// Identity schedule: k = i.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocalSearchMode {
    None,
    Ialt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocalSearch2Mode {
    Fi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AcceptMode {
    /// Accept a candidate only when strictly better than the incumbent.
    Elitist,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VnsConfig {
    pub neighborhood_model: NeighborhoodModel,
    pub neighborhood_size: usize,
    pub shake_mode: ShakeMode,
    pub next_mode: NextMode,
    /// Local search applied once to the initial solution.
    pub localsearch_mode: LocalSearchMode,
    /// Iteration cap L of the alternate heuristic.
    pub ialt_max_iters: usize,
    /// Local search applied after every shake.
    pub localsearch2_mode: LocalSearch2Mode,
    pub k_max: usize,
    /// K: how many k_max-sweeps without improvement end the run.
    pub max_non_improving_sweeps: usize,
    pub accept_mode: AcceptMode,
}

impl VnsConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.neighborhood_size == 0 {
            return Err(ConfigError::Invalid("neighborhood_size must be positive".into()));
        }
        if self.k_max == 0 {
            return Err(ConfigError::Invalid("k_max must be positive".into()));
        }
        if self.max_non_improving_sweeps == 0 {
            return Err(ConfigError::Invalid(
                "max_non_improving_sweeps (K) must be positive".into(),
            ));
        }
        if self.localsearch_mode == LocalSearchMode::Ialt && self.ialt_max_iters == 0 {
            return Err(ConfigError::Invalid("ialt_max_iters (L) must be positive".into()));
        }
        Ok(())
    }

    /// Widest neighbor list any shake under this config can request.
    pub fn required_rank_width(&self, n_candidates: usize) -> usize {
        let w = match self.neighborhood_model {
            NeighborhoodModel::Closest => self.neighborhood_size,
            NeighborhoodModel::Quadratic => self.neighborhood_size.saturating_mul(self.k_max),
        };
        w.min(n_candidates.saturating_sub(1))
    }
}

/// Per-candidate lists of the nearest other candidates, ascending by
/// distance with index tie-breaks. Built once per instance and shared
/// read-only by every run.
///
/// The metric is the instance's coordinate metric when coordinates exist;
/// matrix-only instances fall back to the L2 distance between client
/// distance columns, which ranks candidates by how similarly clients see
/// them.
#[derive(Debug, Clone)]
pub struct CandidateRanks {
    width: usize,
    n_candidates: usize,
    lists: Vec<u32>,
}

impl CandidateRanks {
    /// Builds lists of the `width` nearest neighbors of every candidate
    /// (`width` is capped at M-1).
    pub fn build(instance: &Instance, width: usize) -> Self {
        let m = instance.n_candidates();
        let width = width.min(m.saturating_sub(1));
        let mut lists = Vec::with_capacity(m * width);
        let mut scored: Vec<(f64, u32)> = Vec::with_capacity(m.saturating_sub(1));

        for s in 0..m {
            scored.clear();
            match instance.coords() {
                Some(coords) => {
                    let origin = coords.candidates[s];
                    for t in 0..m {
                        if t != s {
                            let key =
                                point_distance_key(coords.metric, origin, coords.candidates[t]);
                            scored.push((key, t as u32));
                        }
                    }
                }
                None => {
                    let own = instance.client_matrix().column(s);
                    for t in 0..m {
                        if t == s {
                            continue;
                        }
                        let mut key = 0.0;
                        for (c, &dv) in own.iter().enumerate() {
                            let diff = dv - instance.client_distance(c, t);
                            key += diff * diff;
                        }
                        scored.push((key, t as u32));
                    }
                }
            }
            let cmp = |a: &(f64, u32), b: &(f64, u32)| {
                a.0.partial_cmp(&b.0).unwrap().then_with(|| a.1.cmp(&b.1))
            };
            if width < scored.len() {
                scored.select_nth_unstable_by(width, cmp);
                scored.truncate(width);
            }
            scored.sort_unstable_by(cmp);
            lists.extend(scored.iter().map(|&(_, t)| t));
        }

        CandidateRanks {
            width,
            n_candidates: m,
            lists,
        }
    }

    /// Full neighbor lists (width M-1), mostly for tests and inspection.
    pub fn build_full(instance: &Instance) -> Self {
        Self::build(instance, instance.n_candidates().saturating_sub(1))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// The stored neighbors of `candidate`, nearest first.
    pub fn neighbors(&self, candidate: usize) -> &[u32] {
        &self.lists[candidate * self.width..(candidate + 1) * self.width]
    }
}

/// Shake intensity schedule. The `None` mode is the identity: k = i.
pub fn next_intensity(i: usize, k_max: usize, mode: NextMode) -> usize {
    debug_assert!(i >= 1 && i <= k_max);
    match mode {
        NextMode::None => i,
    }
}

/// Performs `k` random swap moves. Each move closes a uniformly chosen
/// open station and opens a uniformly chosen closed candidate from that
/// station's neighborhood (falling back to all closed candidates when the
/// neighborhood is fully open). Returns the shaken solution, unevaluated.
pub fn shake_random<R: Rng + ?Sized>(
    solution: &Solution,
    k: usize,
    ranks: &CandidateRanks,
    model: NeighborhoodModel,
    size: usize,
    rng: &mut R,
) -> Solution {
    let m = ranks.n_candidates;
    let ms = solution.open().len();
    if k == 0 || ms == m {
        return solution.clone();
    }

    let mut open = solution.open().to_vec();
    let mut is_open = vec![false; m];
    for &s in &open {
        is_open[s] = true;
    }

    for _ in 0..k {
        let pos = rng.random_range(0..ms);
        let closing = open[pos];
        let width = match model {
            NeighborhoodModel::Closest => size,
            NeighborhoodModel::Quadratic => size.saturating_mul(k),
        }
        .min(ranks.width);

        let neighborhood = &ranks.neighbors(closing)[..width];
        let closed_in_hood: Vec<usize> = neighborhood
            .iter()
            .map(|&t| t as usize)
            .filter(|&t| !is_open[t])
            .collect();

        let opening = if closed_in_hood.is_empty() {
            // Everything nearby is already open: any closed candidate.
            let rank = rng.random_range(0..m - ms);
            nth_closed_of(&is_open, rank)
        } else {
            closed_in_hood[rng.random_range(0..closed_in_hood.len())]
        };

        is_open[closing] = false;
        is_open[opening] = true;
        open[pos] = opening;
    }

    open.sort_unstable();
    Solution::from_sorted_unchecked(open)
}

fn nth_closed_of(is_open: &[bool], rank: usize) -> usize {
    let mut seen = 0;
    for (i, &o) in is_open.iter().enumerate() {
        if !o {
            if seen == rank {
                return i;
            }
            seen += 1;
        }
    }
    unreachable!("rank is below the closed-candidate count")
}

/// First-improvement interchange local search. Scans (open, closed) swap
/// pairs in a freshly randomized order each pass, probing each pair with
/// the O(N) objective delta; the first swap that strictly improves the
/// solution under [`compare`] is applied and the scan restarts. Stops at a
/// local optimum or when the clock runs out. Never returns a result worse
/// than its input.
pub fn local_search_fi<R: Rng + ?Sized>(
    instance: &Instance,
    eval: Evaluation,
    rng: &mut R,
    clock: &mut Clock,
) -> Evaluation {
    let m = instance.n_candidates();
    let ms = eval.open().len();
    if ms == m {
        return eval;
    }

    let mut current = eval;
    let mut open_order: Vec<usize> = Vec::with_capacity(ms);
    let mut closed_order: Vec<usize> = Vec::with_capacity(m - ms);

    'passes: loop {
        open_order.clear();
        open_order.extend_from_slice(current.open());
        open_order.shuffle(rng);
        closed_order.clear();
        closed_order.extend((0..m).filter(|&i| !current.is_open(i)));
        closed_order.shuffle(rng);

        // When the incumbent has no substation assignment, any swap might
        // repair it, so the cheap delta filter cannot rule pairs out.
        let check_all = !current.substation_feasible;

        for &cand in &closed_order {
            for &station in &open_order {
                if clock.exhausted() {
                    return current;
                }
                clock.tick();
                let (obj_delta, viol_delta) = swap_deltas(instance, &current, station, cand);
                let promising =
                    check_all || viol_delta < 0 || (viol_delta == 0 && obj_delta < 0.0);
                if !promising {
                    continue;
                }
                let candidate_eval = apply_swap(instance, &current, station, cand)
                    .expect("scan only pairs open stations with closed candidates");
                if compare(&candidate_eval, &current) == Ordering::Less {
                    current = candidate_eval;
                    continue 'passes;
                }
            }
        }
        return current;
    }
}

/// Alternate location-allocation heuristic: reassign clients to their
/// nearest stations, then move every station to the candidate minimizing
/// its own cluster's weighted distance (processed in index order, already
/// claimed targets skipped, empty clusters stay put), and repeat up to
/// `l_max` times or until no station moves. Returns the best evaluation
/// seen under [`compare`], so the result is never worse than the input.
pub fn local_search_ialt(
    instance: &Instance,
    eval: Evaluation,
    l_max: usize,
    clock: &mut Clock,
) -> Evaluation {
    let m = instance.n_candidates();
    let mut best = eval.clone();
    let mut current = eval;

    for _ in 0..l_max {
        if clock.exhausted() {
            break;
        }

        let open = current.open();
        let mut is_taken = vec![false; m];
        for &s in open {
            is_taken[s] = true;
        }

        // Clusters from the current allocation, keyed by open position.
        let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); open.len()];
        for c in 0..instance.n_clients() {
            let station = current.nearest[c].station;
            let pos = open.binary_search(&station).expect("nearest station is open");
            clusters[pos].push(c);
        }

        let mut new_open: Vec<usize> = open.to_vec();
        let mut moved = false;
        for (pos, cluster) in clusters.iter().enumerate() {
            if cluster.is_empty() {
                continue;
            }
            let home = new_open[pos];
            let mut best_cand = home;
            let mut best_cost = cluster_cost(instance, cluster, home);
            for target in 0..m {
                if is_taken[target] && target != home {
                    continue;
                }
                let cost = cluster_cost(instance, cluster, target);
                if cost < best_cost {
                    best_cost = cost;
                    best_cand = target;
                }
            }
            if best_cand != home {
                is_taken[home] = false;
                is_taken[best_cand] = true;
                new_open[pos] = best_cand;
                moved = true;
            }
        }

        if !moved {
            break;
        }
        new_open.sort_unstable();
        clock.tick();
        current = evaluate(instance, &Solution::from_sorted_unchecked(new_open));
        if compare(&current, &best) == Ordering::Less {
            best = current.clone();
        }
    }
    best
}

/// Weighted distance of `cluster`'s clients to candidate `target`.
fn cluster_cost(instance: &Instance, cluster: &[usize], target: usize) -> f64 {
    cluster
        .iter()
        .map(|&c| instance.users()[c] * instance.client_distance(c, target))
        .sum()
}

/// Runs the VNS until a full block of `K` non-improving sweeps over
/// `k = 1..k_max` or until the budget expires. Deterministic for a fixed
/// seed and evaluation budget. Rank lists are built on demand; use
/// [`run_vns_with_ranks`] to share them across runs.
pub fn run_vns(
    instance: &Instance,
    config: &VnsConfig,
    seed: u64,
    budget: Budget,
) -> Result<RunResult, ConfigError> {
    config.validate()?;
    let ranks = CandidateRanks::build(
        instance,
        config.required_rank_width(instance.n_candidates()),
    );
    run_vns_with_ranks(instance, config, &ranks, seed, budget)
}

/// [`run_vns`] with precomputed candidate ranks. The ranks must be at
/// least as wide as the config's widest shake neighborhood.
pub fn run_vns_with_ranks(
    instance: &Instance,
    config: &VnsConfig,
    ranks: &CandidateRanks,
    seed: u64,
    budget: Budget,
) -> Result<RunResult, ConfigError> {
    config.validate()?;
    let needed = config.required_rank_width(instance.n_candidates());
    if ranks.width() < needed {
        return Err(ConfigError::Invalid(format!(
            "candidate ranks of width {} are narrower than the configured neighborhood ({})",
            ranks.width(),
            needed
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut clock = Clock::new(budget);

    clock.tick();
    let mut incumbent = evaluate(instance, &Solution::random(instance, &mut rng));
    let mut trajectory = vec![TrajectoryPoint::of(clock.evaluations(), &incumbent)];

    incumbent = match config.localsearch_mode {
        LocalSearchMode::None => incumbent,
        LocalSearchMode::Ialt => {
            local_search_ialt(instance, incumbent, config.ialt_max_iters, &mut clock)
        }
    };
    trajectory.push(TrajectoryPoint::of(clock.evaluations(), &incumbent));

    'search: loop {
        let mut improved = false;
        'sweeps: for _j in 1..=config.max_non_improving_sweeps {
            for i in 1..=config.k_max {
                if clock.exhausted() {
                    break 'search;
                }
                let k = next_intensity(i, config.k_max, config.next_mode);
                let shaken = shake_random(
                    &incumbent.solution(),
                    k,
                    ranks,
                    config.neighborhood_model,
                    config.neighborhood_size,
                    &mut rng,
                );
                clock.tick();
                let candidate = evaluate(instance, &shaken);
                let candidate = match config.localsearch2_mode {
                    LocalSearch2Mode::Fi => {
                        local_search_fi(instance, candidate, &mut rng, &mut clock)
                    }
                };
                let accepted = match config.accept_mode {
                    AcceptMode::Elitist => compare(&candidate, &incumbent) == Ordering::Less,
                };
                if accepted {
                    incumbent = candidate;
                }
                trajectory.push(TrajectoryPoint::of(clock.evaluations(), &incumbent));
                if accepted {
                    // Improvement resets both loop counters.
                    improved = true;
                    break 'sweeps;
                }
            }
        }
        if !improved {
            break;
        }
    }

    Ok(RunResult {
        seed,
        best_solution: incumbent.solution(),
        best_evaluation: incumbent,
        evaluations: clock.evaluations(),
        wall_seconds: clock.elapsed_seconds(),
        trajectory,
    })
}

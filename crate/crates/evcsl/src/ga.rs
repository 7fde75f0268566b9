//! Generational genetic algorithm over fixed-cardinality station sets.
//!
//! Each iteration produces `lambda` offspring by tournament selection,
//! crossover and single-swap mutation, then forms the next population per
//! the replacement mode. Every individual is a valid `Ms`-subset by
//! construction, so no repair step exists anywhere.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{compare, evaluate, Evaluation, Instance, Solution};
use crate::run::{Budget, Clock, RunResult, TrajectoryPoint};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// How the two parents of each offspring are picked: a size-2 tournament
/// returning the loser (`WorseOne`) or the winner (`BetterOne`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMode {
    WorseOne,
    BetterOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CrossoverMode {
    /// Offspring is a copy of the first parent.
    None,
    /// Keep stations common to both parents, fill the rest uniformly from
    /// their symmetric difference.
    Cupcap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReplacementMode {
    /// Next population from the offspring alone; when `lambda < mu` the
    /// shortfall is padded with the best old individuals.
    Comma,
    /// Best `mu` of parents and offspring together.
    Plus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    /// Population size (mu).
    pub population_size: usize,
    /// Offspring per generation.
    pub lambda: usize,
    pub selection: SelectionMode,
    pub crossover: CrossoverMode,
    /// Per-offspring probability of the single-swap mutation.
    pub mutation_prob: f64,
    pub replacement: ReplacementMode,
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.population_size == 0 {
            return Err(ConfigError::Invalid("population_size must be positive".into()));
        }
        if self.lambda == 0 {
            return Err(ConfigError::Invalid("lambda must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.mutation_prob) {
            return Err(ConfigError::Invalid(format!(
                "mutation_prob {} must lie in [0, 1]",
                self.mutation_prob
            )));
        }
        Ok(())
    }
}

/// A population member: the solution plus its cached evaluation.
#[derive(Debug, Clone)]
pub struct Individual {
    pub solution: Solution,
    pub evaluation: Evaluation,
}

impl Individual {
    fn new(instance: &Instance, solution: Solution, clock: &mut Clock) -> Self {
        clock.tick();
        let evaluation = evaluate(instance, &solution);
        Individual { solution, evaluation }
    }
}

/// Runs the GA until the budget expires. The initial population is always
/// created and evaluated, so a zero budget returns the best random
/// individual. Deterministic for a fixed seed and evaluation budget.
pub fn run_ga(
    instance: &Instance,
    config: &GaConfig,
    seed: u64,
    budget: Budget,
) -> Result<RunResult, ConfigError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut clock = Clock::new(budget);

    let mut population: Vec<Individual> = (0..config.population_size)
        .map(|_| Individual::new(instance, Solution::random(instance, &mut rng), &mut clock))
        .collect();

    let mut best = best_of(&population).clone();
    let mut trajectory = vec![TrajectoryPoint::of(clock.evaluations(), &best.evaluation)];

    while !clock.exhausted() {
        let mut offspring = Vec::with_capacity(config.lambda);
        for _ in 0..config.lambda {
            if clock.exhausted() {
                break;
            }
            let (p1, p2) = select_parents(&population, config.selection, &mut rng);
            let child = match config.crossover {
                CrossoverMode::None => population[p1].solution.clone(),
                CrossoverMode::Cupcap => crossover_cupcap(
                    &population[p1].solution,
                    &population[p2].solution,
                    &mut rng,
                ),
            };
            let child = mutate_random(&child, config.mutation_prob, instance.n_candidates(), &mut rng);
            let child = Individual::new(instance, child, &mut clock);
            if compare(&child.evaluation, &best.evaluation) == Ordering::Less {
                best = child.clone();
            }
            offspring.push(child);
        }
        if !offspring.is_empty() {
            population = replace(population, offspring, config.replacement);
        }
        trajectory.push(TrajectoryPoint::of(clock.evaluations(), &best.evaluation));
    }

    Ok(RunResult {
        seed,
        best_solution: best.solution,
        best_evaluation: best.evaluation,
        evaluations: clock.evaluations(),
        wall_seconds: clock.elapsed_seconds(),
        trajectory,
    })
}

fn best_of(population: &[Individual]) -> &Individual {
    population
        .iter()
        .reduce(|a, b| {
            if compare(&b.evaluation, &a.evaluation) == Ordering::Less {
                b
            } else {
                a
            }
        })
        .expect("population is non-empty")
}

/// Picks two parent indices, each by an independent size-2 tournament with
/// replacement. `WorseOne` keeps the tournament loser, `BetterOne` the
/// winner; on a fitness tie the first draw counts as the winner.
pub fn select_parents<R: Rng + ?Sized>(
    population: &[Individual],
    mode: SelectionMode,
    rng: &mut R,
) -> (usize, usize) {
    let tournament = |rng: &mut R| {
        let a = rng.random_range(0..population.len());
        let b = rng.random_range(0..population.len());
        let b_wins = compare(&population[b].evaluation, &population[a].evaluation) == Ordering::Less;
        match (mode, b_wins) {
            (SelectionMode::BetterOne, true) | (SelectionMode::WorseOne, false) => b,
            _ => a,
        }
    };
    let p1 = tournament(rng);
    let p2 = tournament(rng);
    (p1, p2)
}

/// CUPCAP crossover: the child keeps every station open in both parents
/// and completes to `Ms` with a uniform sample (without replacement) from
/// the parents' symmetric difference. Identical parents reproduce as-is.
pub fn crossover_cupcap<R: Rng + ?Sized>(p1: &Solution, p2: &Solution, rng: &mut R) -> Solution {
    let ms = p1.open().len();
    debug_assert_eq!(ms, p2.open().len());

    let mut child: Vec<usize> = Vec::with_capacity(ms);
    let mut difference: Vec<usize> = Vec::new();
    // Merge walk over the two sorted parents.
    let (a, b) = (p1.open(), p2.open());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) if x == y => {
                child.push(x);
                i += 1;
                j += 1;
            }
            (Some(&x), Some(&y)) if x < y => {
                difference.push(x);
                i += 1;
            }
            (Some(_), Some(&y)) => {
                difference.push(y);
                j += 1;
            }
            (Some(&x), None) => {
                difference.push(x);
                i += 1;
            }
            (None, Some(&y)) => {
                difference.push(y);
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }

    let need = ms - child.len();
    if need > 0 {
        let picked = rand::seq::index::sample(rng, difference.len(), need);
        child.extend(picked.into_iter().map(|k| difference[k]));
        child.sort_unstable();
    }
    Solution::from_sorted_unchecked(child)
}

/// With probability `prob`, swaps one uniformly chosen open station for
/// one uniformly chosen closed candidate; otherwise returns the solution
/// unchanged. Cardinality is preserved, so a solution using every
/// candidate cannot mutate.
pub fn mutate_random<R: Rng + ?Sized>(
    solution: &Solution,
    prob: f64,
    n_candidates: usize,
    rng: &mut R,
) -> Solution {
    let ms = solution.open().len();
    if ms == n_candidates || !rng.random_bool(prob) {
        return solution.clone();
    }
    let close = solution.open()[rng.random_range(0..ms)];
    let open_new = nth_closed(solution.open(), rng.random_range(0..n_candidates - ms));
    solution.with_swap(close, open_new)
}

/// The `rank`-th candidate index (ascending) that is absent from the
/// sorted `open` list.
fn nth_closed(open: &[usize], rank: usize) -> usize {
    let mut candidate = rank;
    for &o in open {
        if o <= candidate {
            candidate += 1;
        } else {
            break;
        }
    }
    candidate
}

/// Forms the next population. Ordering is by fitness with stable ties
/// (insertion order), so elitism in `Plus` mode keeps earlier individuals
/// on exact ties.
pub fn replace(
    population: Vec<Individual>,
    offspring: Vec<Individual>,
    mode: ReplacementMode,
) -> Vec<Individual> {
    let mu = population.len();
    match mode {
        ReplacementMode::Plus => {
            let mut combined = population;
            combined.extend(offspring);
            combined.sort_by(|a, b| compare(&a.evaluation, &b.evaluation));
            combined.truncate(mu);
            combined
        }
        ReplacementMode::Comma => {
            let mut next = offspring;
            next.sort_by(|a, b| compare(&a.evaluation, &b.evaluation));
            next.truncate(mu);
            if next.len() < mu {
                // lambda < mu: pad with the best survivors of the old
                // population so the population size stays fixed.
                let mut parents = population;
                parents.sort_by(|a, b| compare(&a.evaluation, &b.evaluation));
                parents.truncate(mu - next.len());
                next.extend(parents);
            }
            next
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DistanceCap, Matrix};

    fn flat_instance(m: usize, ms: usize) -> Instance {
        // One client at distance i from candidate i: lower indices win.
        Instance::new(
            None,
            vec![1.0],
            Matrix::from_flat(1, m, (0..m).map(|i| i as f64).collect()).unwrap(),
            Matrix::from_flat(1, m, vec![0.0; m]).unwrap(),
            DistanceCap::Unbounded,
            DistanceCap::Unbounded,
            vec![m as u32],
            ms,
            None,
        )
        .unwrap()
    }

    fn individual(inst: &Instance, open: Vec<usize>) -> Individual {
        let solution = Solution::new(open, inst).unwrap();
        let evaluation = evaluate(inst, &solution);
        Individual { solution, evaluation }
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn selection_from_singleton_population() {
        let inst = flat_instance(4, 2);
        let pop = vec![individual(&inst, vec![0, 1])];
        let mut r = rng(1);
        let (a, b) = select_parents(&pop, SelectionMode::BetterOne, &mut r);
        assert_eq!((a, b), (0, 0));
    }

    #[test]
    fn tournament_probabilities_match_enumeration() {
        // Two individuals with distinct fitness: the favored one must be
        // picked with probability 3/4 (the four equally likely draw pairs).
        let inst = flat_instance(4, 2);
        let pop = vec![individual(&inst, vec![2, 3]), individual(&inst, vec![0, 1])];
        let better = 1; // {0,1} has the lower objective

        for (mode, favored) in [(SelectionMode::BetterOne, better), (SelectionMode::WorseOne, 0)] {
            let mut r = rng(7);
            let trials = 40_000;
            let mut hits = 0;
            for _ in 0..trials {
                let (p1, p2) = select_parents(&pop, mode, &mut r);
                hits += usize::from(p1 == favored) + usize::from(p2 == favored);
            }
            let freq = hits as f64 / (2 * trials) as f64;
            assert!((freq - 0.75).abs() < 0.01, "{mode:?}: freq {freq}");
        }
    }

    #[test]
    fn cupcap_identity_on_equal_parents() {
        let inst = flat_instance(6, 3);
        let p = Solution::new(vec![1, 2, 3], &inst).unwrap();
        let child = crossover_cupcap(&p, &p.clone(), &mut rng(3));
        assert_eq!(child.open(), &[1, 2, 3]);
    }

    #[test]
    fn cupcap_keeps_intersection_and_fills_from_difference() {
        let inst = flat_instance(6, 3);
        let p1 = Solution::new(vec![1, 2, 3], &inst).unwrap();
        let p2 = Solution::new(vec![2, 3, 4], &inst).unwrap();
        let mut r = rng(11);
        let mut seen_third: Vec<usize> = Vec::new();
        for _ in 0..200 {
            let child = crossover_cupcap(&p1, &p2, &mut r);
            assert!(child.open().contains(&2) && child.open().contains(&3));
            let third = *child.open().iter().find(|&&g| g != 2 && g != 3).unwrap();
            assert!(third == 1 || third == 4);
            seen_third.push(third);
        }
        assert!(seen_third.contains(&1) && seen_third.contains(&4));
    }

    #[test]
    fn cupcap_disjoint_parents_yield_subsets_of_the_union() {
        let inst = flat_instance(6, 3);
        let p1 = Solution::new(vec![0, 1, 2], &inst).unwrap();
        let p2 = Solution::new(vec![3, 4, 5], &inst).unwrap();
        let mut r = rng(13);
        for _ in 0..100 {
            let child = crossover_cupcap(&p1, &p2, &mut r);
            assert_eq!(child.open().len(), 3);
            assert!(child.open().iter().all(|&g| g < 6));
        }
    }

    #[test]
    fn mutation_prob_zero_is_identity() {
        let inst = flat_instance(5, 2);
        let s = Solution::new(vec![1, 3], &inst).unwrap();
        let mut r = rng(17);
        for _ in 0..20 {
            assert_eq!(mutate_random(&s, 0.0, 5, &mut r), s);
        }
    }

    #[test]
    fn mutation_with_no_closed_candidate_is_identity() {
        let inst = flat_instance(3, 3);
        let s = Solution::new(vec![0, 1, 2], &inst).unwrap();
        assert_eq!(mutate_random(&s, 1.0, 3, &mut rng(19)), s);
    }

    #[test]
    fn forced_mutation_hits_both_outcomes_evenly() {
        // {1,2} over three candidates: the only closed candidate is 0, so
        // the child is {0,2} or {0,1}... wait, closing 1 gives {0,2} and
        // closing 2 gives {0,1}; each must appear about half the time.
        let inst = flat_instance(3, 2);
        let s = Solution::new(vec![1, 2], &inst).unwrap();
        let mut r = rng(23);
        let mut first = 0usize;
        let trials = 20_000;
        for _ in 0..trials {
            let child = mutate_random(&s, 1.0, 3, &mut r);
            assert!(child.open() == [0, 2] || child.open() == [0, 1]);
            first += usize::from(child.open() == [0, 2]);
        }
        let freq = first as f64 / trials as f64;
        assert!((freq - 0.5).abs() < 0.02, "freq {freq}");
    }

    #[test]
    fn nth_closed_walks_past_open_indices() {
        assert_eq!(nth_closed(&[1, 2], 0), 0);
        assert_eq!(nth_closed(&[1, 2], 1), 3);
        assert_eq!(nth_closed(&[0, 1, 2], 0), 3);
        assert_eq!(nth_closed(&[2, 4], 2), 3);
    }

    #[test]
    fn plus_replacement_keeps_parents_when_offspring_worse() {
        let inst = flat_instance(8, 2);
        let pop = vec![individual(&inst, vec![0, 1]), individual(&inst, vec![0, 2])];
        let off = vec![individual(&inst, vec![6, 7]), individual(&inst, vec![5, 7])];
        let next = replace(pop.clone(), off, ReplacementMode::Plus);
        let opens: Vec<_> = next.iter().map(|i| i.solution.open().to_vec()).collect();
        assert_eq!(opens, vec![vec![0, 1], vec![0, 2]]);
    }

    #[test]
    fn comma_replacement_with_enough_offspring_uses_offspring_only() {
        let inst = flat_instance(8, 2);
        let pop = vec![individual(&inst, vec![0, 1]), individual(&inst, vec![0, 2])];
        let off = vec![
            individual(&inst, vec![6, 7]),
            individual(&inst, vec![5, 7]),
            individual(&inst, vec![4, 7]),
        ];
        let next = replace(pop, off, ReplacementMode::Comma);
        assert_eq!(next.len(), 2);
        let opens: Vec<_> = next.iter().map(|i| i.solution.open().to_vec()).collect();
        // Best two offspring by objective: {4,7} then {5,7}.
        assert_eq!(opens, vec![vec![4, 7], vec![5, 7]]);
    }

    #[test]
    fn comma_replacement_pads_with_elite_parents() {
        let inst = flat_instance(8, 2);
        let pop = vec![
            individual(&inst, vec![3, 4]),
            individual(&inst, vec![0, 1]), // elite parent
            individual(&inst, vec![2, 3]),
        ];
        let off = vec![individual(&inst, vec![6, 7]), individual(&inst, vec![5, 6])];
        let next = replace(pop, off, ReplacementMode::Comma);
        assert_eq!(next.len(), 3);
        let opens: Vec<_> = next.iter().map(|i| i.solution.open().to_vec()).collect();
        assert_eq!(opens, vec![vec![5, 6], vec![6, 7], vec![0, 1]]);
    }

    #[test]
    fn plus_replacement_best_never_worsens_across_generations() {
        let inst = flat_instance(12, 3);
        let mut r = rng(31);
        let mut pop: Vec<Individual> = (0..6)
            .map(|_| {
                let s = Solution::random(&inst, &mut r);
                let e = evaluate(&inst, &s);
                Individual { solution: s, evaluation: e }
            })
            .collect();
        for _ in 0..30 {
            let offspring: Vec<Individual> = (0..4)
                .map(|_| {
                    let s = Solution::random(&inst, &mut r);
                    let e = evaluate(&inst, &s);
                    Individual { solution: s, evaluation: e }
                })
                .collect();
            let before = best_of(&pop).evaluation.clone();
            pop = replace(pop, offspring, ReplacementMode::Plus);
            let after = best_of(&pop).evaluation.clone();
            assert!(compare(&after, &before) != Ordering::Greater);
        }
    }

    #[test]
    fn zero_budget_returns_best_of_initial_population() {
        let inst = flat_instance(10, 3);
        let cfg = GaConfig {
            population_size: 8,
            lambda: 4,
            selection: SelectionMode::BetterOne,
            crossover: CrossoverMode::Cupcap,
            mutation_prob: 0.5,
            replacement: ReplacementMode::Plus,
        };
        let result = run_ga(&inst, &cfg, 5, Budget::evaluations(0)).unwrap();
        assert_eq!(result.evaluations, 8);
        assert_eq!(result.trajectory.len(), 1);

        // Reproduce the initial population by hand with the same stream.
        let mut r = rng(5);
        let mut best: Option<Evaluation> = None;
        for _ in 0..8 {
            let e = evaluate(&inst, &Solution::random(&inst, &mut r));
            if best.as_ref().map_or(true, |b| compare(&e, b) == Ordering::Less) {
                best = Some(e);
            }
        }
        assert_eq!(result.best_evaluation, best.unwrap());
    }

    #[test]
    fn fixed_seed_and_budget_reproduce_identical_results() {
        let inst = flat_instance(12, 4);
        let cfg = GaConfig {
            population_size: 10,
            lambda: 5,
            selection: SelectionMode::WorseOne,
            crossover: CrossoverMode::None,
            mutation_prob: 0.65,
            replacement: ReplacementMode::Comma,
        };
        let a = run_ga(&inst, &cfg, 99, Budget::evaluations(500)).unwrap();
        let b = run_ga(&inst, &cfg, 99, Budget::evaluations(500)).unwrap();
        assert_eq!(a.best_solution, b.best_solution);
        assert_eq!(a.best_evaluation, b.best_evaluation);
        assert_eq!(a.evaluations, b.evaluations);
        assert_eq!(a.trajectory, b.trajectory);
    }

    #[test]
    fn trajectory_is_monotone_and_solutions_stay_valid() {
        let inst = flat_instance(15, 4);
        let cfg = GaConfig {
            population_size: 6,
            lambda: 10,
            selection: SelectionMode::BetterOne,
            crossover: CrossoverMode::Cupcap,
            mutation_prob: 0.76,
            replacement: ReplacementMode::Plus,
        };
        let result = run_ga(&inst, &cfg, 3, Budget::evaluations(2000)).unwrap();
        assert!(result.trajectory_is_monotone());
        assert_eq!(result.best_solution.open().len(), 4);
        assert!(result.evaluations <= 2000 + 6);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let inst = flat_instance(5, 2);
        let mut cfg = GaConfig {
            population_size: 0,
            lambda: 1,
            selection: SelectionMode::BetterOne,
            crossover: CrossoverMode::None,
            mutation_prob: 0.5,
            replacement: ReplacementMode::Plus,
        };
        assert!(run_ga(&inst, &cfg, 1, Budget::evaluations(10)).is_err());
        cfg.population_size = 5;
        cfg.mutation_prob = 1.5;
        assert!(run_ga(&inst, &cfg, 1, Budget::evaluations(10)).is_err());
    }
}

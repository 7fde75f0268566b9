//! The four tuned algorithm configurations and the dispatch type that
//! unifies GA and VNS behind one interface.

use serde::{Deserialize, Serialize};

use crate::ga::{run_ga, ConfigError, CrossoverMode, GaConfig, ReplacementMode, SelectionMode};
use crate::model::Instance;
use crate::run::{Budget, RunResult};
use crate::vns::{
    run_vns, run_vns_with_ranks, AcceptMode, CandidateRanks, LocalSearch2Mode, LocalSearchMode,
    NeighborhoodModel, NextMode, ShakeMode, VnsConfig,
};

pub const GA_1: &str = "GA-1";
pub const GA_2: &str = "GA-2";
pub const VNS_1: &str = "VNS-1";
pub const VNS_2: &str = "VNS-2";

/// All built-in preset names.
pub fn preset_names() -> [&'static str; 4] {
    [GA_1, GA_2, VNS_1, VNS_2]
}

/// A fully specified algorithm: which solver to run and with what
/// parameters. Serializes with an `algorithm` tag, so config files read
/// `{"algorithm": "ga", ...}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "kebab-case")]
pub enum AlgoSpec {
    Ga(GaConfig),
    Vns(VnsConfig),
}

impl AlgoSpec {
    pub fn algorithm_name(&self) -> &'static str {
        match self {
            AlgoSpec::Ga(_) => "ga",
            AlgoSpec::Vns(_) => "vns",
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        match self {
            AlgoSpec::Ga(cfg) => cfg.validate(),
            AlgoSpec::Vns(cfg) => cfg.validate(),
        }
    }

    /// Runs the configured solver.
    pub fn run(
        &self,
        instance: &Instance,
        seed: u64,
        budget: Budget,
    ) -> Result<RunResult, ConfigError> {
        match self {
            AlgoSpec::Ga(cfg) => run_ga(instance, cfg, seed, budget),
            AlgoSpec::Vns(cfg) => run_vns(instance, cfg, seed, budget),
        }
    }

    /// Runs the solver, reusing precomputed candidate ranks for VNS.
    pub fn run_with_ranks(
        &self,
        instance: &Instance,
        ranks: Option<&CandidateRanks>,
        seed: u64,
        budget: Budget,
    ) -> Result<RunResult, ConfigError> {
        match (self, ranks) {
            (AlgoSpec::Ga(cfg), _) => run_ga(instance, cfg, seed, budget),
            (AlgoSpec::Vns(cfg), Some(r)) => run_vns_with_ranks(instance, cfg, r, seed, budget),
            (AlgoSpec::Vns(cfg), None) => run_vns(instance, cfg, seed, budget),
        }
    }
}

/// Resolves one of the four tuned configurations by name.
pub fn preset(name: &str) -> Option<AlgoSpec> {
    match name {
        GA_1 => Some(AlgoSpec::Ga(GaConfig {
            population_size: 30,
            lambda: 12,
            selection: SelectionMode::WorseOne,
            crossover: CrossoverMode::None,
            mutation_prob: 0.65,
            replacement: ReplacementMode::Comma,
        })),
        GA_2 => Some(AlgoSpec::Ga(GaConfig {
            population_size: 50,
            lambda: 6,
            selection: SelectionMode::BetterOne,
            crossover: CrossoverMode::Cupcap,
            mutation_prob: 0.76,
            replacement: ReplacementMode::Plus,
        })),
        VNS_1 => Some(AlgoSpec::Vns(VnsConfig {
            neighborhood_model: NeighborhoodModel::Quadratic,
            neighborhood_size: 17,
            shake_mode: ShakeMode::Random,
            next_mode: NextMode::None,
            localsearch_mode: LocalSearchMode::None,
            ialt_max_iters: 20,
            localsearch2_mode: LocalSearch2Mode::Fi,
            k_max: 44,
            max_non_improving_sweeps: 85,
            accept_mode: AcceptMode::Elitist,
        })),
        VNS_2 => Some(AlgoSpec::Vns(VnsConfig {
            neighborhood_model: NeighborhoodModel::Closest,
            neighborhood_size: 6,
            shake_mode: ShakeMode::Random,
            next_mode: NextMode::None,
            localsearch_mode: LocalSearchMode::Ialt,
            ialt_max_iters: 20,
            localsearch2_mode: LocalSearch2Mode::Fi,
            k_max: 34,
            max_non_improving_sweeps: 59,
            accept_mode: AcceptMode::Elitist,
        })),
        _ => None,
    }
}

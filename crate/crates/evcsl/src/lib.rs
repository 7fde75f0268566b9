//! EV charging station location toolkit.
//!
//! Models the placement of a fixed number of EV charging stations across a
//! city's candidate street segments, minimizing the population-weighted
//! distance from clients to their nearest station subject to substation
//! power constraints. Ships two metaheuristic solvers (a genetic algorithm
//! and a variable neighborhood search) with their tuned presets, an
//! exhaustive oracle, instance generation and import, and a benchmark /
//! statistics harness.

pub mod bench;
pub mod ga;
pub mod io;
pub mod model;
pub mod presets;
pub mod run;
pub mod vns;

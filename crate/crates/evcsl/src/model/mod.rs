//! Problem data model: instances, solutions, evaluation (full and
//! incremental), constraint checks and the exhaustive oracle.

mod evaluation;
mod instance;
mod matching;
mod oracle;
mod solution;

pub use evaluation::{
    apply_swap, compare, delta_swap, evaluate, Assignment, Evaluation, SwapError, NO_STATION,
};
pub(crate) use evaluation::swap_deltas;
pub use instance::{
    euclidean_m, haversine_m, point_distance, point_distance_key, Coords, DistanceCap, Instance,
    Matrix, Metric, ValidationError, EARTH_RADIUS_M,
};
pub use matching::check_substation_feasibility;
pub use oracle::{brute_force_optimum, OracleError, MAX_SUBSETS};
pub use solution::Solution;

//! Benchmark fixtures shared by the criterion targets.

use berkcal::simulation::{generate_dataset, SimConfig};
use berkcal::SufficientStats;

/// A simulated dataset with `n` standards and `k` repeated readings.
pub fn dataset(n: usize, k: usize) -> SufficientStats {
    generate_dataset(&SimConfig::study_cell(n, k, 0.8, 0.01), 0).summarize()
}

/// A small simulation cell for end-to-end timing.
pub fn small_cell() -> SimConfig {
    SimConfig {
        replications: 200,
        ..SimConfig::study_cell(20, 20, 0.8, 0.01)
    }
}

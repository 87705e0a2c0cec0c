//! Shared reduced configurations for integration tests.

#![allow(dead_code)]

use physlaw::harness::ExperimentConfig;

/// Small enough for the whole grid to run in seconds.
pub const TINY: &str = "scenarios=drift,freefall\n\
n_train_videos=4\n\
n_test_videos=2\n\
frames_per_video=12\n\
render.resolution=256\n\
gp.population_size=100\n\
gp.generations=4\n\
baseline.forest_trees=4\n";

pub fn tiny() -> ExperimentConfig {
    ExperimentConfig::from_text(TINY).unwrap()
}

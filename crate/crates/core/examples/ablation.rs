//! Runs a reduced observer × physicist grid and prints the Markdown report.
//!
//! `cargo run --release --example ablation`

use physlaw::harness::report::markdown;
use physlaw::harness::{generate_dataset, run_ablation, ExperimentConfig};

fn main() -> physlaw::Result<()> {
    let cfg = ExperimentConfig::from_text(
        "scenarios=drift,freefall,parabola\n\
         n_train_videos=10\n\
         n_test_videos=4\n\
         frames_per_video=20\n\
         gp.population_size=500\n\
         gp.generations=20\n\
         baseline.forest_trees=20\n",
    )?;
    let ds = generate_dataset(&cfg)?;
    let report = run_ablation(&cfg, &ds)?;
    print!("{}", markdown(&report));
    Ok(())
}

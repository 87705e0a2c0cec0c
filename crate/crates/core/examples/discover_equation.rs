//! Evolves a displacement law from ground-truth kinematics.
//!
//! `cargo run --release --example discover_equation -- [scenario] [x|y] [seed] [videos]`

use std::time::Instant;

use physlaw::observer::{build_samples, Component, Feature, ObservationSet, SampleTable, VelocityScheme};
use physlaw::symreg::{evolve, GpConfig};
use physlaw::world::{sample_trajectory, ScenarioKind, WorldConfig};

fn main() -> physlaw::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let kind: ScenarioKind = args.first().map_or("freefall", String::as_str).parse()?;
    let component = match args.get(1).map_or("y", String::as_str) {
        "x" => Component::X,
        _ => Component::Y,
    };
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0);
    let videos: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(50);

    let world = WorldConfig::default();
    let mut table = SampleTable::new(Feature::for_kind(kind));
    for v in 0..videos {
        let traj = sample_trajectory(kind, &world, seed * 1_000_003 + v)?;
        let obs = ObservationSet::ground_truth(&traj);
        table.append(&build_samples(&obs, kind, &traj.params, VelocityScheme::Truth)?)?;
    }

    let cfg = GpConfig { seed, ..GpConfig::default() };
    let start = Instant::now();
    let fit = evolve(&table, component, &cfg)?;
    println!("scenario:    {kind}");
    println!("component:   {}", component.name());
    println!("rows:        {}", table.len());
    println!("equation:    {}", fit.infix);
    println!("train mae:   {:e}", fit.best.raw_mae);
    println!("generations: {}", fit.generations_run);
    println!("seconds:     {:.1}", start.elapsed().as_secs_f64());
    Ok(())
}

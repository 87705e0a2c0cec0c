//! Fits the four regression baselines to ground-truth samples of one scenario.
//!
//! `cargo run --release --example baselines -- [scenario] [x|y]`

use physlaw::baselines::{fit, BaselineConfig, BaselineKind};
use physlaw::metrics::MetricReport;
use physlaw::observer::{build_samples, Component, Feature, ObservationSet, SampleTable, VelocityScheme};
use physlaw::world::{sample_trajectory, ScenarioKind, WorldConfig};

fn table(kind: ScenarioKind, seeds: std::ops::Range<u64>) -> physlaw::Result<SampleTable> {
    let world = WorldConfig::default();
    let mut t = SampleTable::new(Feature::for_kind(kind));
    for seed in seeds {
        let traj = sample_trajectory(kind, &world, seed)?;
        let obs = ObservationSet::ground_truth(&traj);
        t.append(&build_samples(&obs, kind, &traj.params, VelocityScheme::Truth)?)?;
    }
    Ok(t)
}

fn main() -> physlaw::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let kind: ScenarioKind = args.first().map_or("parabola", String::as_str).parse()?;
    let component = match args.get(1).map_or("y", String::as_str) {
        "x" => Component::X,
        _ => Component::Y,
    };
    let train = table(kind, 0..50)?;
    let test = table(kind, 1000..1020)?;
    let truth = test.target(component);
    println!("{kind} {}: {} train rows, {} test rows", component.name(), train.len(), test.len());
    for kind in BaselineKind::ALL {
        match fit(kind, &train, component, &BaselineConfig::default()).and_then(|m| m.predict(&test)) {
            Ok(pred) => {
                let m = MetricReport::score(&pred, &truth)?;
                println!("  {kind:<14} mapa {:>10.4}  r2 {:>10.6}", m.mapa.unwrap_or(f64::NAN), m.r2.unwrap_or(f64::NAN));
            }
            Err(e) => println!("  {kind:<14} failed: {e}"),
        }
    }
    Ok(())
}

//! Compares the three visual observers on rendered videos.
//!
//! `cargo run --release --example localize -- [scenario] [videos]`

use physlaw::metrics::med;
use physlaw::observer::{observe_frames, ObserverConfig, ObserverMethod};
use physlaw::render::{render_sequence, RenderConfig};
use physlaw::world::{sample_trajectory, ScenarioKind, WorldConfig};

fn main() -> physlaw::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let kind: ScenarioKind = args.first().map_or("parabola", String::as_str).parse()?;
    let videos: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(5);

    let world = WorldConfig::default();
    let obs_cfg = ObserverConfig::default();
    let px = world.extent / obs_cfg.resolution as f64;
    let mut totals = [0.0; 3];
    for v in 0..videos {
        let traj = sample_trajectory(kind, &world, v)?;
        let render = RenderConfig {
            noise_seed: 1000 + v,
            ..RenderConfig::default()
        };
        let seq = render_sequence(&traj, &render)?;
        for (i, method) in ObserverMethod::VISUAL.into_iter().enumerate() {
            let obs = observe_frames(&seq.frames, traj.dt, method, &obs_cfg)?;
            totals[i] += med(&obs.positions, &seq.truth)? / px;
        }
    }
    println!("{kind}, {videos} videos, mean Euclidean distance in pixels:");
    for (i, method) in ObserverMethod::VISUAL.into_iter().enumerate() {
        println!("  {:<26} {:.4}", method.label(), totals[i] / videos as f64);
    }
    Ok(())
}

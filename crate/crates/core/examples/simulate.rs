//! Samples one trajectory per scenario and checks the exact step law.
//!
//! `cargo run --example simulate -- [seed]`

use physlaw::world::{acceleration, sample_trajectory, step_displacement, ScenarioKind, WorldConfig};

fn main() -> physlaw::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let cfg = WorldConfig::default();
    for kind in ScenarioKind::ALL {
        let traj = sample_trajectory(kind, &cfg, seed)?;
        let p = &traj.params;
        println!("{kind}: dt={} m={:.3} theta={:?} frames={}", traj.dt, p.m, p.theta, traj.len());
        let mut worst: f64 = 0.0;
        for w in traj.states.windows(2) {
            let acc = acceleration(kind, &w[0], p)?;
            let expected = w[0].pos + step_displacement(w[0].vel, acc, traj.dt);
            worst = worst.max((w[1].pos - expected).norm());
        }
        let (first, last) = (traj.states[0], traj.states[traj.len() - 1]);
        println!(
            "  start ({:.1}, {:.1})  end ({:.1}, {:.1})  max law residual {worst:e}",
            first.pos.x, first.pos.y, last.pos.x, last.pos.y
        );
    }
    Ok(())
}

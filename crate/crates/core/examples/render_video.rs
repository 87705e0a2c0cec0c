//! Renders one video to a directory of PGM frames plus a truth manifest.
//!
//! `cargo run --release --example render_video -- [scenario] [out_dir] [seed]`

use std::path::PathBuf;

use physlaw::render::{render_sequence, write_frames, RenderConfig};
use physlaw::world::{sample_trajectory, ScenarioKind, WorldConfig};

fn main() -> physlaw::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let kind: ScenarioKind = args.first().map_or("slope", String::as_str).parse()?;
    let dir = PathBuf::from(args.get(1).map_or("render_video_out", String::as_str));
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);

    let traj = sample_trajectory(kind, &WorldConfig::default(), seed)?;
    let cfg = RenderConfig {
        noise_seed: seed,
        ..RenderConfig::default()
    };
    let seq = render_sequence(&traj, &cfg)?;
    let manifest = write_frames(&seq, &dir)?;
    let proj = cfg.projection();
    let (px, py) = proj.to_pixel(traj.states[0].pos);
    println!("{} frames of {kind} at {}x{}", seq.frames.len(), cfg.resolution, cfg.resolution);
    println!("first frame object at pixel ({px:.2}, {py:.2})");
    println!("manifest: {}", manifest.display());
    Ok(())
}

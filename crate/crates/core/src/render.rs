//! Rasterizes trajectories into 8-bit grayscale frames.
//!
//! Pixel `(i, j)` has its centre at continuous pixel coordinate `(i, j)`;
//! row `j` grows downward. The world square `[0, extent]²` maps onto the
//! frame with `y` flipped.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::mix;
use crate::world::{ScenarioKind, Trajectory, Vec2};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    /// Row-major.
    pub data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0)
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        GrayImage {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }

    /// Binary PGM (`P5`, maxval 255).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn from_pgm(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0usize;
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(Error::Parse("truncated PGM header".into()));
            }
            fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
        }
        // exactly one whitespace byte separates the header from the raster
        pos += 1;
        if fields[0] != "P5" {
            return Err(Error::Parse(format!("not a binary PGM (magic {:?})", fields[0])));
        }
        let num = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| Error::Parse(format!("PGM header field {s:?}: {e}")))
        };
        let (width, height, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
        if maxval != 255 {
            return Err(Error::Parse(format!("unsupported PGM maxval {maxval}")));
        }
        let raster = bytes.get(pos..).unwrap_or_default();
        if raster.len() != width * height {
            return Err(Error::Parse(format!(
                "PGM raster has {} bytes, expected {}",
                raster.len(),
                width * height
            )));
        }
        Ok(GrayImage {
            width,
            height,
            data: raster.to_vec(),
        })
    }
}

/// World-to-pixel mapping for a square frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    pub resolution: usize,
    pub world_extent: f64,
}

impl Projection {
    /// World units per pixel.
    pub fn scale(&self) -> f64 {
        self.world_extent / self.resolution as f64
    }

    pub fn to_pixel(&self, p: Vec2) -> (f64, f64) {
        let s = self.scale();
        (p.x / s - 0.5, (self.world_extent - p.y) / s - 0.5)
    }

    pub fn to_world(&self, px: f64, py: f64) -> Vec2 {
        let s = self.scale();
        Vec2::new((px + 0.5) * s, self.world_extent - (py + 0.5) * s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BackgroundKind {
    Plain,
    ProceduralTexture,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderConfig {
    pub resolution: usize,
    pub world_extent: f64,
    pub sprite_radius: f64,
    pub sprite_intensity: u8,
    pub background_kind: BackgroundKind,
    pub noise_seed: u64,
    /// Gray level of a plain background.
    pub plain_level: u8,
    /// Texture gray-level range.
    pub texture_range: (f64, f64),
    /// Lattice period of the coarsest noise octave, in pixels.
    pub texture_period: f64,
    /// Gray level of the slope line, wall and spring.
    pub dressing_level: u8,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            resolution: 512,
            world_extent: 4096.0,
            sprite_radius: 6.0,
            sprite_intensity: 255,
            background_kind: BackgroundKind::ProceduralTexture,
            noise_seed: 0,
            plain_level: 0,
            texture_range: (20.0, 180.0),
            texture_period: 64.0,
            dressing_level: 0,
        }
    }
}

impl RenderConfig {
    pub fn projection(&self) -> Projection {
        Projection {
            resolution: self.resolution,
            world_extent: self.world_extent,
        }
    }

    /// Brightest gray level the background can take.
    pub fn background_max(&self) -> f64 {
        match self.background_kind {
            BackgroundKind::Plain => self.plain_level as f64,
            BackgroundKind::ProceduralTexture => self.texture_range.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.resolution < 64 {
            return bad(format!("resolution {} below 64", self.resolution));
        }
        if self.sprite_radius < 2.0 {
            return bad(format!("sprite radius {} below 2", self.sprite_radius));
        }
        if 2.0 * (self.sprite_radius + 1.0) >= self.resolution as f64 {
            return bad("sprite does not fit in the frame".into());
        }
        if !(self.world_extent > 0.0) {
            return bad("world extent must be positive".into());
        }
        let (lo, hi) = self.texture_range;
        if !(0.0 <= lo && lo <= hi && hi <= 255.0) {
            return bad("texture range must lie within [0, 255]".into());
        }
        Ok(())
    }
}

/// Anti-aliased disk coverage at distance `dist` from the centre.
#[inline]
pub fn sprite_alpha(radius: f64, dist: f64) -> f64 {
    (radius + 0.5 - dist).clamp(0.0, 1.0)
}

/// Background gray levels (as reals) for one configuration.
pub fn background(cfg: &RenderConfig) -> Vec<f64> {
    let n = cfg.resolution;
    match cfg.background_kind {
        BackgroundKind::Plain => vec![cfg.plain_level as f64; n * n],
        BackgroundKind::ProceduralTexture => {
            let (lo, hi) = cfg.texture_range;
            let mut out = vec![0.0; n * n];
            out.par_chunks_mut(n).enumerate().for_each(|(y, row)| {
                for (x, v) in row.iter_mut().enumerate() {
                    *v = lo + (hi - lo) * value_noise(cfg.noise_seed, cfg.texture_period, x as f64, y as f64);
                }
            });
            out
        }
    }
}

fn lattice(seed: u64, octave: u64, ix: i64, iy: i64) -> f64 {
    let h = mix(mix(mix(seed, octave), ix as u64), iy as u64);
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn smooth(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Three octaves of smoothed lattice noise, normalized to `[0, 1]`.
pub fn value_noise(seed: u64, period: f64, x: f64, y: f64) -> f64 {
    const AMPS: [f64; 3] = [1.0, 0.5, 0.25];
    let mut acc = 0.0;
    for (o, amp) in AMPS.iter().enumerate() {
        let p = period / (1 << o) as f64;
        let (fx, fy) = (x / p, y / p);
        let (ix, iy) = (fx.floor(), fy.floor());
        let (tx, ty) = (smooth(fx - ix), smooth(fy - iy));
        let (ix, iy) = (ix as i64, iy as i64);
        let o = o as u64;
        let v00 = lattice(seed, o, ix, iy);
        let v10 = lattice(seed, o, ix + 1, iy);
        let v01 = lattice(seed, o, ix, iy + 1);
        let v11 = lattice(seed, o, ix + 1, iy + 1);
        let top = v00 + (v10 - v00) * tx;
        let bottom = v01 + (v11 - v01) * tx;
        acc += amp * (top + (bottom - top) * ty);
    }
    acc / AMPS.iter().sum::<f64>()
}

/// Composites an anti-aliased segment of width `width` over `canvas`.
fn draw_segment(canvas: &mut [f64], n: usize, a: (f64, f64), b: (f64, f64), width: f64, level: f64) {
    let pad = width / 2.0 + 1.0;
    let x0 = (a.0.min(b.0) - pad).floor().max(0.0) as usize;
    let x1 = (a.0.max(b.0) + pad).ceil().min(n as f64 - 1.0);
    let y0 = (a.1.min(b.1) - pad).floor().max(0.0) as usize;
    let y1 = (a.1.max(b.1) + pad).ceil().min(n as f64 - 1.0);
    if x1 < 0.0 || y1 < 0.0 {
        return;
    }
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    for y in y0..=y1 as usize {
        for x in x0..=x1 as usize {
            let (px, py) = (x as f64 - a.0, y as f64 - a.1);
            let t = if len2 > 0.0 {
                ((px * dx + py * dy) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let d = (px - t * dx).hypot(py - t * dy);
            let alpha = (width / 2.0 + 0.5 - d).clamp(0.0, 1.0);
            if alpha > 0.0 {
                let v = &mut canvas[y * n + x];
                *v = alpha * level + (1.0 - alpha) * *v;
            }
        }
    }
}

/// Draws the slope surface, or the wall and spring, depending on the scenario.
fn draw_dressing(canvas: &mut [f64], traj: &Trajectory, cfg: &RenderConfig, frame: usize) {
    let n = cfg.resolution;
    let proj = cfg.projection();
    let level = cfg.dressing_level as f64;
    let r = cfg.sprite_radius;
    match traj.kind {
        ScenarioKind::Slope => {
            let Some(theta) = traj.params.theta else { return };
            // the incline, offset below the sprite so it never touches it
            let (c, s) = (theta.cos(), theta.sin());
            let start = proj.to_pixel(traj.states[0].pos);
            let gap = r + 7.0;
            // downhill direction in pixel space is (cos, +sin) since rows grow downward
            let normal = (-s, c);
            let base = (start.0 + normal.0 * gap, start.1 + normal.1 * gap);
            let reach = 2.0 * n as f64;
            let a = (base.0 - c * reach, base.1 - s * reach);
            let b = (base.0 + c * reach, base.1 + s * reach);
            draw_segment(canvas, n, a, b, 1.5, level);
        }
        ScenarioKind::Spring => {
            let Some(wall_y) = traj.params.anchor_y else { return };
            let obj = proj.to_pixel(traj.states[frame].pos);
            let (_, wy) = proj.to_pixel(Vec2::new(0.0, wall_y));
            draw_segment(canvas, n, (obj.0 - 40.0, wy), (obj.0 + 40.0, wy), 3.0, level);
            // zigzag from the wall down to a few pixels above the sprite
            let end = obj.1 - (r + 6.0);
            if end <= wy {
                return;
            }
            let turns = 12;
            let mut prev = (obj.0, wy);
            for i in 1..=turns {
                let y = wy + (end - wy) * i as f64 / turns as f64;
                let x = if i == turns {
                    obj.0
                } else if i % 2 == 1 {
                    obj.0 - 5.0
                } else {
                    obj.0 + 5.0
                };
                draw_segment(canvas, n, prev, (x, y), 1.0, level);
                prev = (x, y);
            }
        }
        _ => {}
    }
}

/// Composites the sprite centred at pixel `(cx, cy)` over `canvas`.
pub fn draw_sprite(canvas: &mut [f64], n: usize, cx: f64, cy: f64, radius: f64, level: f64) {
    let reach = radius + 1.0;
    let x0 = (cx - reach).floor().max(0.0) as usize;
    let x1 = ((cx + reach).ceil() as usize).min(n - 1);
    let y0 = (cy - reach).floor().max(0.0) as usize;
    let y1 = ((cy + reach).ceil() as usize).min(n - 1);
    for y in y0..=y1 {
        for x in x0..=x1 {
            let alpha = sprite_alpha(radius, (x as f64 - cx).hypot(y as f64 - cy));
            if alpha > 0.0 {
                let v = &mut canvas[y * n + x];
                *v = alpha * level + (1.0 - alpha) * *v;
            }
        }
    }
}

fn quantize(canvas: &[f64], n: usize) -> GrayImage {
    GrayImage {
        width: n,
        height: n,
        data: canvas.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect(),
    }
}

/// One rendered video: frames plus the world-space truth of each frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSequence {
    pub frames: Vec<GrayImage>,
    pub truth: Vec<Vec2>,
    pub config: RenderConfig,
}

pub fn render_sequence(traj: &Trajectory, cfg: &RenderConfig) -> Result<FrameSequence> {
    cfg.validate()?;
    let proj = cfg.projection();
    let n = cfg.resolution;
    let hi = n as f64 - 1.0;
    let r = cfg.sprite_radius;
    for (i, s) in traj.states.iter().enumerate() {
        let (px, py) = proj.to_pixel(s.pos);
        let fits = px - r >= 0.0 && py - r >= 0.0 && px + r <= hi && py + r <= hi;
        if !s.pos.is_finite() || !fits {
            return Err(Error::Render { frame: i });
        }
    }
    let bg = background(cfg);
    let frames = (0..traj.len())
        .into_par_iter()
        .map(|i| {
            let mut canvas = bg.clone();
            draw_dressing(&mut canvas, traj, cfg, i);
            let (px, py) = proj.to_pixel(traj.states[i].pos);
            draw_sprite(&mut canvas, n, px, py, r, cfg.sprite_intensity as f64);
            quantize(&canvas, n)
        })
        .collect();
    Ok(FrameSequence {
        frames,
        truth: traj.positions(),
        config: cfg.clone(),
    })
}

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:04}.pgm")
}

pub const MANIFEST_NAME: &str = "manifest.csv";

/// Writes one PGM per frame plus `manifest.csv`; returns the manifest path.
pub fn write_frames(seq: &FrameSequence, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    for (i, frame) in seq.frames.iter().enumerate() {
        let path = dir.join(frame_file_name(i));
        fs::write(&path, frame.to_pgm()).map_err(Error::io(&path))?;
    }
    let manifest = dir.join(MANIFEST_NAME);
    let mut f = fs::File::create(&manifest).map_err(Error::io(&manifest))?;
    let mut text = String::from("frame,truth_x,truth_y\n");
    for (i, p) in seq.truth.iter().enumerate() {
        text.push_str(&format!("{i},{},{}\n", p.x, p.y));
    }
    f.write_all(text.as_bytes()).map_err(Error::io(&manifest))?;
    Ok(manifest)
}

/// Reads frames and truth written by [`write_frames`].
pub fn read_frames(dir: &Path) -> Result<(Vec<GrayImage>, Vec<Vec2>)> {
    let truth = read_manifest(&dir.join(MANIFEST_NAME))?;
    let frames = (0..truth.len())
        .map(|i| {
            let path = dir.join(frame_file_name(i));
            let bytes = fs::read(&path).map_err(Error::io(&path))?;
            GrayImage::from_pgm(&bytes)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((frames, truth))
}

pub fn read_manifest(path: &Path) -> Result<Vec<Vec2>> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Parse(format!("{}:{}: {e}", path.display(), i + 1)))
        };
        if cols.len() != 3 {
            return Err(Error::Parse(format!("{}:{}: expected 3 columns", path.display(), i + 1)));
        }
        out.push(Vec2::new(parse(cols[1])?, parse(cols[2])?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{simulate, KinState, ScenarioParams};

    fn plain() -> RenderConfig {
        RenderConfig {
            background_kind: BackgroundKind::Plain,
            ..RenderConfig::default()
        }
    }

    fn still_at_pixel(cfg: &RenderConfig, px: f64, py: f64, frames: usize) -> Trajectory {
        let pos = cfg.projection().to_world(px, py);
        let init = KinState {
            pos,
            vel: Vec2::ZERO,
            t: 0.0,
        };
        simulate(ScenarioKind::Drift, &ScenarioParams::new(9.8, 1.0), init, 0.1, frames).unwrap()
    }

    fn centroid(img: &GrayImage) -> (f64, f64) {
        let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
        for y in 0..img.height {
            for x in 0..img.width {
                let w = img.get(x, y) as f64;
                sx += w * x as f64;
                sy += w * y as f64;
                sw += w;
            }
        }
        (sx / sw, sy / sw)
    }

    #[test]
    fn projection_round_trips() {
        let p = RenderConfig::default().projection();
        assert_eq!(p.scale(), 8.0);
        let w = Vec2::new(1234.5, 777.25);
        let (px, py) = p.to_pixel(w);
        assert!((p.to_world(px, py) - w).norm() < 1e-9);
        // y up in the world is row down in the image
        assert!(p.to_pixel(Vec2::new(0.0, 4000.0)).1 < p.to_pixel(Vec2::new(0.0, 100.0)).1);
    }

    #[test]
    fn sprite_centroid_is_exact_on_plain_background() {
        let cfg = plain();
        for (px, py) in [(100.0, 100.0), (100.5, 100.5), (200.25, 131.75)] {
            let seq = render_sequence(&still_at_pixel(&cfg, px, py, 2), &cfg).unwrap();
            let (cx, cy) = centroid(&seq.frames[0]);
            assert!((cx - px).abs() < 0.05 && (cy - py).abs() < 0.05, "({px},{py}) -> ({cx},{cy})");
        }
    }

    #[test]
    fn sprite_energy_is_phase_independent() {
        let r = 6.0;
        let energy = |cx: f64, cy: f64| {
            let mut canvas = vec![0.0; 64 * 64];
            draw_sprite(&mut canvas, 64, cx, cy, r, 1.0);
            canvas.iter().sum::<f64>()
        };
        let reference = energy(32.0, 32.0);
        for i in 0..10 {
            for j in 0..10 {
                let e = energy(32.0 + i as f64 / 10.0, 32.0 + j as f64 / 10.0);
                assert!((e / reference - 1.0).abs() < 0.005, "phase ({i},{j}): {e} vs {reference}");
            }
        }
    }

    #[test]
    fn rendering_is_deterministic() {
        let cfg = RenderConfig {
            noise_seed: 77,
            ..RenderConfig::default()
        };
        let traj = still_at_pixel(&cfg, 250.3, 260.7, 3);
        let a = render_sequence(&traj, &cfg).unwrap();
        let b = render_sequence(&traj, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn texture_is_bounded_and_seeded() {
        let cfg = RenderConfig {
            noise_seed: 5,
            ..RenderConfig::default()
        };
        let bg = background(&cfg);
        let (lo, hi) = bg.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(lo >= 20.0 && hi <= 180.0, "{lo}..{hi}");
        assert!(hi - lo > 60.0, "texture should have visible contrast");
        let other = background(&RenderConfig {
            noise_seed: 6,
            ..cfg.clone()
        });
        assert_ne!(bg, other);
        assert!(cfg.sprite_intensity as f64 - cfg.background_max() >= 40.0);
    }

    #[test]
    fn background_is_stationary_across_frames() {
        let cfg = RenderConfig {
            noise_seed: 3,
            ..RenderConfig::default()
        };
        let seq = render_sequence(&still_at_pixel(&cfg, 100.0, 100.0, 2), &cfg).unwrap();
        // far from the sprite every frame shows the same texture
        let (a, b) = (&seq.frames[0], &seq.frames[1]);
        for y in 300..400 {
            for x in 300..400 {
                assert_eq!(a.get(x, y), b.get(x, y));
            }
        }
    }

    #[test]
    fn out_of_window_positions_are_rejected() {
        let cfg = plain();
        let traj = still_at_pixel(&cfg, 2.0, 200.0, 3);
        assert!(matches!(render_sequence(&traj, &cfg), Err(Error::Render { frame: 0 })));
    }

    #[test]
    fn pgm_header_is_exact() {
        let img = GrayImage::filled(3, 2, 7);
        let bytes = img.to_pgm();
        assert_eq!(&bytes[..11], b"P5\n3 2\n255\n");
        assert_eq!(bytes.len(), 11 + 6);
        assert_eq!(GrayImage::from_pgm(&bytes).unwrap(), img);
        assert!(GrayImage::from_pgm(b"P2\n1 1\n255\n\x00").is_err());
        assert!(GrayImage::from_pgm(b"P5\n2 2\n255\n\x00").is_err());
    }

    #[test]
    fn frames_round_trip_through_disk() {
        let cfg = RenderConfig {
            noise_seed: 11,
            resolution: 128,
            world_extent: 1024.0,
            ..RenderConfig::default()
        };
        let init = KinState {
            pos: Vec2::new(200.0, 300.0),
            vel: Vec2::new(40.0, 30.0),
            t: 0.0,
        };
        let traj = simulate(ScenarioKind::Drift, &ScenarioParams::new(9.8, 1.0), init, 0.1, 50).unwrap();
        let seq = render_sequence(&traj, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let manifest = write_frames(&seq, dir.path()).unwrap();
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 51);
        assert!(manifest.ends_with(MANIFEST_NAME));
        let (frames, truth) = read_frames(dir.path()).unwrap();
        assert_eq!(frames, seq.frames);
        assert_eq!(truth, traj.positions());
    }

    #[test]
    fn dressing_is_drawn_for_slope_and_spring() {
        let cfg = plain();
        let mut dressing = RenderConfig {
            dressing_level: 90,
            ..cfg
        };
        dressing.plain_level = 0;
        let p = ScenarioParams::new(9.8, 2.0).with_spring(2.0, 2000.0, -1000.0);
        let init = KinState {
            pos: Vec2::new(2000.0, 1200.0),
            vel: Vec2::ZERO,
            t: 0.0,
        };
        let traj = simulate(ScenarioKind::Spring, &p, init, 0.1, 2).unwrap();
        let seq = render_sequence(&traj, &dressing).unwrap();
        let (_, wall_row) = dressing.projection().to_pixel(Vec2::new(0.0, 2000.0));
        let (ox, _) = dressing.projection().to_pixel(init.pos);
        assert!(seq.frames[0].get(ox.round() as usize + 20, wall_row.round() as usize) > 40);

        let p = ScenarioParams::new(9.8, 2.0).with_theta(0.5);
        let traj = simulate(ScenarioKind::Slope, &p, init, 0.1, 2).unwrap();
        let seq = render_sequence(&traj, &dressing).unwrap();
        let lit = seq.frames[0].data.iter().filter(|&&v| v > 40 && v < 255).count();
        assert!(lit > 500, "slope line should span the frame, lit {lit}");
    }
}

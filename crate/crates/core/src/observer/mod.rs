//! Object localization in rendered frames.
//!
//! Three localizers of increasing precision share one coarse detector:
//!
//! * [`locate_single`]: normalized cross-correlation on an 8× block-mean
//!   downsample, returning the centre of the best coarse cell.
//! * [`locate_segment_centroid`]: coarse detection, then the intensity
//!   weighted centroid of thresholded pixels in a 64 px window.
//! * [`locate_twostage`]: coarse detection, then full-resolution correlation
//!   with the analytic sprite inside the window and a quadratic fit to the
//!   3×3 neighbourhood of the peak. The fit is repeated with the template
//!   re-rendered at the current sub-pixel phase, which removes the
//!   peak-locking bias of a single fit.

mod samples;

pub use samples::{
    build_samples, estimate_velocity, estimate_velocity_second_order, read_sample_table,
    write_sample_table, Component, Feature, SampleMeta, SampleRow, SampleTable, VelocityScheme,
};

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::render::{draw_sprite, GrayImage, Projection, RenderConfig};
use crate::world::{Trajectory, Vec2};

/// Gray-level gap between sprite and brightest background that the
/// renderer guarantees; the segmentation threshold sits halfway into it.
pub const CONTRAST_MARGIN: f64 = 40.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ObserverMethod {
    SingleStage,
    SegmentCentroid,
    TwoStage,
    GroundTruth,
}

impl ObserverMethod {
    pub const ALL: [ObserverMethod; 4] = [
        ObserverMethod::SingleStage,
        ObserverMethod::SegmentCentroid,
        ObserverMethod::TwoStage,
        ObserverMethod::GroundTruth,
    ];

    pub const VISUAL: [ObserverMethod; 3] = [
        ObserverMethod::SingleStage,
        ObserverMethod::SegmentCentroid,
        ObserverMethod::TwoStage,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ObserverMethod::SingleStage => "single",
            ObserverMethod::SegmentCentroid => "segment",
            ObserverMethod::TwoStage => "twostage",
            ObserverMethod::GroundTruth => "truth",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ObserverMethod::SingleStage => "Single stage",
            ObserverMethod::SegmentCentroid => "Detection + segmentation",
            ObserverMethod::TwoStage => "Two-stage",
            ObserverMethod::GroundTruth => "Ground-truth position",
        }
    }
}

impl fmt::Display for ObserverMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ObserverMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ObserverMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown observer method `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObserverConfig {
    pub resolution: usize,
    pub world_extent: f64,
    pub sprite_radius: f64,
    pub coarse_factor: usize,
    pub window: usize,
    /// Minimum coarse correlation peak accepted as an object.
    pub min_peak: f64,
    pub segment_threshold: f64,
    /// Background ring around the sprite included in the fine template.
    pub template_pad: usize,
    pub refine_iterations: usize,
}

impl ObserverConfig {
    pub fn for_render(cfg: &RenderConfig) -> Self {
        ObserverConfig {
            resolution: cfg.resolution,
            world_extent: cfg.world_extent,
            sprite_radius: cfg.sprite_radius,
            coarse_factor: 8,
            window: 64,
            min_peak: 0.2,
            segment_threshold: cfg.background_max() + CONTRAST_MARGIN / 2.0,
            template_pad: 2,
            refine_iterations: 4,
        }
    }

    pub fn projection(&self) -> Projection {
        Projection {
            resolution: self.resolution,
            world_extent: self.world_extent,
        }
    }
}

impl Default for ObserverConfig {
    fn default() -> Self {
        Self::for_render(&RenderConfig::default())
    }
}

/// A localization result.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Location {
    pub world: Vec2,
    pub pixel: (f64, f64),
    /// Set when the method fell back to a cruder estimate.
    pub flagged: bool,
}

impl Location {
    fn at_pixel(cfg: &ObserverConfig, px: f64, py: f64, flagged: bool) -> Self {
        Location {
            world: cfg.projection().to_world(px, py),
            pixel: (px, py),
            flagged,
        }
    }
}

/// A real-valued image patch.
#[derive(Clone, Debug)]
struct Plane {
    w: usize,
    h: usize,
    data: Vec<f64>,
}

impl Plane {
    fn crop(frame: &GrayImage, x0: usize, y0: usize, w: usize, h: usize) -> Plane {
        let mut data = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            let row = &frame.data[y * frame.width + x0..y * frame.width + x0 + w];
            data.extend(row.iter().map(|&v| v as f64));
        }
        Plane { w, h, data }
    }

    fn block_mean(frame: &GrayImage, f: usize) -> Plane {
        let (w, h) = (frame.width / f, frame.height / f);
        let mut data = vec![0.0; w * h];
        for y in 0..h * f {
            let row = &frame.data[y * frame.width..y * frame.width + w * f];
            let out = &mut data[(y / f) * w..(y / f + 1) * w];
            for (bx, chunk) in row.chunks_exact(f).enumerate() {
                out[bx] += chunk.iter().map(|&v| v as f64).sum::<f64>();
            }
        }
        let norm = (f * f) as f64;
        data.iter_mut().for_each(|v| *v /= norm);
        Plane { w, h, data }
    }
}

/// Zero-mean template with precomputed norm.
#[derive(Clone, Debug)]
struct Template {
    w: usize,
    h: usize,
    data: Vec<f64>,
    norm: f64,
}

impl Template {
    fn new(w: usize, h: usize, raw: Vec<f64>) -> Template {
        let mean = raw.iter().sum::<f64>() / raw.len() as f64;
        let data: Vec<f64> = raw.iter().map(|v| v - mean).collect();
        let norm = data.iter().map(|v| v * v).sum::<f64>().sqrt();
        Template { w, h, data, norm }
    }

    /// Sprite coverage on a `(2·half+1)²` grid, centred at `half + phase`.
    fn sprite(radius: f64, half: usize, phase: (f64, f64)) -> Template {
        let n = 2 * half + 1;
        let mut raw = vec![0.0; n * n];
        draw_sprite(&mut raw, n, half as f64 + phase.0, half as f64 + phase.1, radius, 1.0);
        Template::new(n, n, raw)
    }

    /// Sprite rendered at full resolution and block-averaged by `f`.
    fn coarse_sprite(radius: f64, f: usize) -> (Template, usize) {
        let half = ((radius + 0.5) / f as f64 + 0.5).ceil() as usize;
        let cells = 2 * half + 1;
        let n = cells * f;
        let mut fine = vec![0.0; n * n];
        let c = (half * f) as f64 + (f as f64 - 1.0) / 2.0;
        draw_sprite(&mut fine, n, c, c, radius, 1.0);
        let mut raw = vec![0.0; cells * cells];
        for y in 0..n {
            for x in 0..n {
                raw[(y / f) * cells + x / f] += fine[y * n + x];
            }
        }
        (Template::new(cells, cells, raw), half)
    }

    /// Zero-mean normalized cross-correlation with the template's top-left at `(x0, y0)`.
    fn ncc(&self, img: &Plane, x0: usize, y0: usize) -> f64 {
        let count = (self.w * self.h) as f64;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut cross = 0.0;
        for ty in 0..self.h {
            let row = &img.data[(y0 + ty) * img.w + x0..(y0 + ty) * img.w + x0 + self.w];
            let trow = &self.data[ty * self.w..(ty + 1) * self.w];
            for (&v, &t) in row.iter().zip(trow) {
                sum += v;
                sum_sq += v * v;
                cross += v * t;
            }
        }
        // the template is zero-mean, so the patch mean drops out of `cross`
        let var = sum_sq - sum * sum / count;
        if var <= 1e-12 || self.norm == 0.0 {
            0.0
        } else {
            cross / (var.sqrt() * self.norm)
        }
    }
}

fn check_frame(frame: &GrayImage, cfg: &ObserverConfig) -> Result<()> {
    if frame.width != cfg.resolution || frame.height != cfg.resolution {
        return Err(Error::Config(format!(
            "frame is {}x{}, observer expects {}x{}",
            frame.width, frame.height, cfg.resolution, cfg.resolution
        )));
    }
    Ok(())
}

/// Summed-area table of coarse cells holding at least one pixel above a threshold.
struct BrightCells {
    w: usize,
    h: usize,
    /// `(w + 1) × (h + 1)` prefix sums.
    sums: Vec<u32>,
}

impl BrightCells {
    fn total(&self, x: usize, y: usize, w: usize, h: usize) -> u32 {
        let at = |x: usize, y: usize| self.sums[y * (self.w + 1) + x];
        at(x + w, y + h) + at(x, y) - at(x + w, y) - at(x, y + h)
    }
}

fn bright_cells(frame: &GrayImage, f: usize, threshold: f64) -> BrightCells {
    let (w, h) = (frame.width / f, frame.height / f);
    let mut cell = vec![0u32; w * h];
    for y in 0..h * f {
        let row = &frame.data[y * frame.width..y * frame.width + w * f];
        for (bx, chunk) in row.chunks_exact(f).enumerate() {
            if chunk.iter().any(|&v| v as f64 > threshold) {
                cell[(y / f) * w + bx] = 1;
            }
        }
    }
    let mut sums = vec![0u32; (w + 1) * (h + 1)];
    for y in 0..h {
        for x in 0..w {
            sums[(y + 1) * (w + 1) + x + 1] =
                cell[y * w + x] + sums[y * (w + 1) + x + 1] + sums[(y + 1) * (w + 1) + x] - sums[y * (w + 1) + x];
        }
    }
    BrightCells { w, h, sums }
}

/// Coarse detection: returns the pixel centre of the best coarse cell and its score.
fn coarse_peak(frame: &GrayImage, cfg: &ObserverConfig) -> Result<((f64, f64), f64)> {
    check_frame(frame, cfg)?;
    let f = cfg.coarse_factor;
    let coarse = Plane::block_mean(frame, f);
    let (tmpl, half) = Template::coarse_sprite(cfg.sprite_radius, f);
    if coarse.w < tmpl.w || coarse.h < tmpl.h {
        return Err(Error::Config("frame too small for the coarse template".into()));
    }
    // Only placements covering a pixel brighter than any background can hold
    // the object; texture blobs of the right shape are skipped.
    let bright = bright_cells(frame, f, cfg.segment_threshold);
    let any_bright = bright.total(0, 0, bright.w, bright.h) > 0;
    let mut best = (f64::NEG_INFINITY, 0, 0);
    for y in 0..=coarse.h - tmpl.h {
        for x in 0..=coarse.w - tmpl.w {
            if any_bright && bright.total(x, y, tmpl.w, tmpl.h) == 0 {
                continue;
            }
            let s = tmpl.ncc(&coarse, x, y);
            if s > best.0 {
                best = (s, x, y);
            }
        }
    }
    let (score, bx, by) = best;
    if !(score >= cfg.min_peak) {
        return Err(Error::NoObject { peak: score.max(0.0) });
    }
    let centre = |b: usize| ((b + half) * f) as f64 + (f as f64 - 1.0) / 2.0;
    Ok(((centre(bx), centre(by)), score))
}

pub fn locate_single(frame: &GrayImage, cfg: &ObserverConfig) -> Result<Location> {
    let ((px, py), _) = coarse_peak(frame, cfg)?;
    Ok(Location::at_pixel(cfg, px, py, false))
}

/// Top-left corner of the refinement window around a coarse estimate.
fn window_origin(cfg: &ObserverConfig, px: f64, py: f64) -> (usize, usize, usize) {
    let size = cfg.window.min(cfg.resolution);
    let clamp = |c: f64| {
        let start = c.round() as i64 - (size / 2) as i64;
        start.clamp(0, (cfg.resolution - size) as i64) as usize
    };
    (clamp(px), clamp(py), size)
}

pub fn locate_segment_centroid(frame: &GrayImage, cfg: &ObserverConfig) -> Result<Location> {
    let ((cx, cy), _) = coarse_peak(frame, cfg)?;
    let (x0, y0, size) = window_origin(cfg, cx, cy);
    let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
    for y in y0..y0 + size {
        for x in x0..x0 + size {
            let v = frame.get(x, y) as f64;
            if v > cfg.segment_threshold {
                sx += v * x as f64;
                sy += v * y as f64;
                sw += v;
            }
        }
    }
    if sw == 0.0 {
        return Ok(Location::at_pixel(cfg, cx, cy, true));
    }
    Ok(Location::at_pixel(cfg, sx / sw, sy / sw, false))
}

/// Maximum of the least-squares quadratic through a 3×3 neighbourhood,
/// as an offset from its centre. `None` when the surface has no interior maximum.
pub fn quadratic_peak(n: [[f64; 3]; 3]) -> Option<(f64, f64)> {
    let (mut b, mut c, mut d, mut e, mut g) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (j, row) in n.iter().enumerate() {
        for (i, &f) in row.iter().enumerate() {
            let (u, v) = (i as f64 - 1.0, j as f64 - 1.0);
            b += u * f;
            c += v * f;
            e += u * v * f;
            d += (u * u - 2.0 / 3.0) * f;
            g += (v * v - 2.0 / 3.0) * f;
        }
    }
    let (b, c, e, d, g) = (b / 6.0, c / 6.0, e / 4.0, d / 2.0, g / 2.0);
    // f = a + b·u + c·v + d·u² + e·u·v + g·v²
    let det = 4.0 * d * g - e * e;
    if !(d < 0.0 && g < 0.0 && det > 0.0) {
        return None;
    }
    let u = (-2.0 * g * b + e * c) / det;
    let v = (-2.0 * d * c + e * b) / det;
    (u.abs() <= 1.0 && v.abs() <= 1.0).then_some((u, v))
}

/// 1-D parabola vertex through three samples, clamped to half a pixel.
fn parabola_vertex(a: f64, b: f64, c: f64) -> f64 {
    let denom = a - 2.0 * b + c;
    if denom.abs() < 1e-12 {
        0.0
    } else {
        (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
    }
}

pub fn locate_twostage(frame: &GrayImage, cfg: &ObserverConfig) -> Result<Location> {
    let ((cx, cy), _) = coarse_peak(frame, cfg)?;
    let (x0, y0, size) = window_origin(cfg, cx, cy);
    let win = Plane::crop(frame, x0, y0, size, size);

    let half = (cfg.sprite_radius + 0.5).ceil() as usize + cfg.template_pad;
    let tmpl = Template::sprite(cfg.sprite_radius, half, (0.0, 0.0));
    if tmpl.w > win.w {
        return Err(Error::Config("refinement window smaller than the template".into()));
    }
    let span = win.w - tmpl.w + 1;
    let mut scores = vec![0.0; span * span];
    let mut best = (f64::NEG_INFINITY, 0, 0);
    for ty in 0..span {
        for tx in 0..span {
            let s = tmpl.ncc(&win, tx, ty);
            scores[ty * span + tx] = s;
            if s > best.0 {
                best = (s, tx, ty);
            }
        }
    }
    let (_, bx, by) = best;
    // window coordinates of the sprite centre for a template at (tx, ty)
    let centre = |tx: f64, ty: f64| (tx + half as f64, ty + half as f64);
    if bx == 0 || by == 0 || bx == span - 1 || by == span - 1 {
        let (px, py) = centre(bx as f64, by as f64);
        return Ok(Location::at_pixel(cfg, x0 as f64 + px, y0 as f64 + py, true));
    }

    let neighbourhood = |score: &dyn Fn(usize, usize) -> f64, tx: usize, ty: usize| {
        let mut n = [[0.0; 3]; 3];
        for (j, row) in n.iter_mut().enumerate() {
            for (i, v) in row.iter_mut().enumerate() {
                *v = score(tx + i - 1, ty + j - 1);
            }
        }
        n
    };
    let refine = |n: [[f64; 3]; 3]| {
        quadratic_peak(n).unwrap_or_else(|| {
            (
                parabola_vertex(n[1][0], n[1][1], n[1][2]),
                parabola_vertex(n[0][1], n[1][1], n[2][1]),
            )
        })
    };

    let n = neighbourhood(&|x, y| scores[y * span + x], bx, by);
    let (du, dv) = refine(n);
    let (mut px, mut py) = centre(bx as f64 + du, by as f64 + dv);

    // re-correlate with the template shifted to the current phase
    for _ in 0..cfg.refine_iterations {
        let (rx, ry) = (px.round(), py.round());
        let phase = (px - rx, py - ry);
        let tx = rx - half as f64;
        let ty = ry - half as f64;
        if tx < 1.0 || ty < 1.0 || tx + 1.0 >= span as f64 || ty + 1.0 >= span as f64 {
            break;
        }
        let shifted = Template::sprite(cfg.sprite_radius, half, phase);
        let n = neighbourhood(&|x, y| shifted.ncc(&win, x, y), tx as usize, ty as usize);
        let (du, dv) = refine(n);
        let (nx, ny) = (rx + phase.0 + du, ry + phase.1 + dv);
        let moved = (nx - px).hypot(ny - py);
        px = nx;
        py = ny;
        if moved < 1e-4 {
            break;
        }
    }
    Ok(Location::at_pixel(cfg, x0 as f64 + px, y0 as f64 + py, false))
}

pub fn locate(frame: &GrayImage, method: ObserverMethod, cfg: &ObserverConfig) -> Result<Location> {
    match method {
        ObserverMethod::SingleStage => locate_single(frame, cfg),
        ObserverMethod::SegmentCentroid => locate_segment_centroid(frame, cfg),
        ObserverMethod::TwoStage => locate_twostage(frame, cfg),
        ObserverMethod::GroundTruth => Err(Error::Config(
            "ground truth cannot be recovered from a frame".into(),
        )),
    }
}

/// Estimated (or true) positions of one video.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationSet {
    pub positions: Vec<Vec2>,
    /// Instantaneous velocities; only known for ground-truth observations.
    pub velocities: Option<Vec<Vec2>>,
    pub dt: f64,
    pub method: ObserverMethod,
    /// Per-frame fallback flags.
    pub flagged: Vec<bool>,
}

impl ObservationSet {
    pub fn ground_truth(traj: &Trajectory) -> Self {
        ObservationSet {
            positions: traj.positions(),
            velocities: Some(traj.velocities()),
            dt: traj.dt,
            method: ObserverMethod::GroundTruth,
            flagged: vec![false; traj.len()],
        }
    }

    /// Writes `frame,est_x,est_y,method`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut text = String::from("frame,est_x,est_y,method\n");
        for (i, p) in self.positions.iter().enumerate() {
            text.push_str(&format!("{i},{},{},{}\n", p.x, p.y, self.method));
        }
        std::fs::write(path, text).map_err(Error::io(path))
    }

    pub fn read_csv(path: &Path, dt: f64) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        let mut positions = Vec::new();
        let mut method = None;
        for (i, line) in text.lines().enumerate().skip(1) {
            let cols: Vec<&str> = line.split(',').collect();
            let bad = |m: String| Error::Parse(format!("{}:{}: {m}", path.display(), i + 1));
            if cols.len() != 4 {
                return Err(bad("expected 4 columns".into()));
            }
            let x = cols[1].parse::<f64>().map_err(|e| bad(e.to_string()))?;
            let y = cols[2].parse::<f64>().map_err(|e| bad(e.to_string()))?;
            method = Some(cols[3].parse::<ObserverMethod>()?);
            positions.push(Vec2::new(x, y));
        }
        let n = positions.len();
        Ok(ObservationSet {
            positions,
            velocities: None,
            dt,
            method: method.unwrap_or(ObserverMethod::GroundTruth),
            flagged: vec![false; n],
        })
    }
}

/// Localizes every frame of a video. Frames are processed in parallel.
pub fn observe_frames(
    frames: &[GrayImage],
    dt: f64,
    method: ObserverMethod,
    cfg: &ObserverConfig,
) -> Result<ObservationSet> {
    let located: Vec<Location> = frames
        .par_iter()
        .map(|f| locate(f, method, cfg))
        .collect::<Result<_>>()?;
    Ok(ObservationSet {
        positions: located.iter().map(|l| l.world).collect(),
        velocities: None,
        dt,
        method,
        flagged: located.iter().map(|l| l.flagged).collect(),
    })
}

//! Flat `key=value` experiment configuration with dotted section prefixes.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::PhysicistMethod;
use crate::baselines::BaselineConfig;
use crate::error::{Error, Result};
use crate::observer::{ObserverConfig, ObserverMethod, VelocityScheme};
use crate::render::{BackgroundKind, RenderConfig};
use crate::symreg::GpConfig;
use crate::world::{ScenarioKind, WorldConfig};

/// Parses `key=value` lines. Blank lines and `#` comments are skipped;
/// duplicate keys are rejected.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got `{line}`", n + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", n + 1)));
        }
        if out.insert(k.to_string(), v.trim().to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key `{k}`", n + 1)));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenarios: Vec<ScenarioKind>,
    pub n_train_videos: usize,
    pub n_test_videos: usize,
    pub frames_per_video: usize,
    pub world: WorldConfig,
    pub render: RenderConfig,
    pub observer: ObserverConfig,
    pub velocity: VelocityScheme,
    pub gp: GpConfig,
    pub baseline: BaselineConfig,
    pub observer_methods: Vec<ObserverMethod>,
    pub physicist_methods: Vec<PhysicistMethod>,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    /// Write PGM frames to disk during generation.
    pub save_frames: bool,
    /// A cell fails when more than this fraction of its videos cannot be observed.
    pub max_failure_fraction: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let render = RenderConfig::default();
        ExperimentConfig {
            scenarios: ScenarioKind::ALL.to_vec(),
            n_train_videos: 50,
            n_test_videos: 20,
            frames_per_video: 50,
            world: WorldConfig::default(),
            observer: ObserverConfig::for_render(&render),
            render,
            velocity: VelocityScheme::SecondOrder,
            gp: GpConfig::default(),
            baseline: BaselineConfig::default(),
            observer_methods: ObserverMethod::ALL.to_vec(),
            physicist_methods: PhysicistMethod::ALL.to_vec(),
            master_seed: 0,
            output_dir: PathBuf::from("out"),
            save_frames: true,
            max_failure_fraction: 0.1,
        }
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: Display,
{
    v.parse::<T>()
        .map_err(|e| Error::Config(format!("{key}: cannot parse `{v}`: {e}")))
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got `{v}`"))),
    }
}

fn auto(key: &str, v: &str) -> Result<Option<f64>> {
    if v == "auto" {
        Ok(None)
    } else {
        num(key, v).map(Some)
    }
}

fn list<T: FromStr<Err = Error>>(key: &str, v: &str) -> Result<Vec<T>> {
    let items = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| Error::Config(format!("{key}: {e}"))))
        .collect::<Result<Vec<T>>>()?;
    if items.is_empty() {
        return Err(Error::Config(format!("{key}: list is empty")));
    }
    Ok(items)
}

fn join<T: Display>(items: &[T]) -> String {
    items.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(",")
}

fn show_auto(v: Option<f64>) -> String {
    v.map_or_else(|| "auto".to_string(), |x| x.to_string())
}

fn depth_key(v: Option<usize>) -> String {
    v.map_or_else(|| "none".to_string(), |d| d.to_string())
}

fn parse_depth(key: &str, v: &str) -> Result<Option<usize>> {
    if v == "none" {
        Ok(None)
    } else {
        num(key, v).map(Some)
    }
}

impl ExperimentConfig {
    /// Entries that determine results; the output location is left out so
    /// identical runs written to different places stay byte-identical.
    pub fn result_entries(&self) -> Vec<(&'static str, String)> {
        self.entries().into_iter().filter(|(k, _)| *k != "output_dir").collect()
    }

    /// Every key with its current value, in a stable order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let w = &self.world;
        let r = &self.render;
        let o = &self.observer;
        let g = &self.gp;
        let b = &self.baseline;
        vec![
            ("scenarios", join(&self.scenarios)),
            ("n_train_videos", self.n_train_videos.to_string()),
            ("n_test_videos", self.n_test_videos.to_string()),
            ("frames_per_video", self.frames_per_video.to_string()),
            ("master_seed", self.master_seed.to_string()),
            ("output_dir", self.output_dir.display().to_string()),
            ("save_frames", self.save_frames.to_string()),
            ("observer_methods", join(&self.observer_methods)),
            ("physicist_methods", join(&self.physicist_methods)),
            ("max_failure_fraction", self.max_failure_fraction.to_string()),
            ("world.extent", w.extent.to_string()),
            ("world.margin", w.margin.to_string()),
            ("world.g", w.g.to_string()),
            ("world.k", w.k.to_string()),
            ("world.anchor_y", w.anchor_y.to_string()),
            ("world.rest_offset", w.rest_offset.to_string()),
            ("world.dt_min", w.dt_range.0.to_string()),
            ("world.dt_max", w.dt_range.1.to_string()),
            ("world.speed_min", w.speed_range.0.to_string()),
            ("world.speed_max", w.speed_range.1.to_string()),
            ("world.mass_min", w.mass_range.0.to_string()),
            ("world.mass_max", w.mass_range.1.to_string()),
            ("world.theta_min", w.theta_range.0.to_string()),
            ("world.theta_max", w.theta_range.1.to_string()),
            ("world.spawn_fraction", w.spawn_fraction.to_string()),
            ("world.max_attempts", w.max_attempts.to_string()),
            ("render.resolution", r.resolution.to_string()),
            ("render.sprite_radius", r.sprite_radius.to_string()),
            ("render.sprite_intensity", r.sprite_intensity.to_string()),
            (
                "render.background",
                match r.background_kind {
                    BackgroundKind::Plain => "plain",
                    BackgroundKind::ProceduralTexture => "texture",
                }
                .to_string(),
            ),
            ("render.plain_level", r.plain_level.to_string()),
            ("render.texture_min", r.texture_range.0.to_string()),
            ("render.texture_max", r.texture_range.1.to_string()),
            ("render.texture_period", r.texture_period.to_string()),
            ("render.dressing_level", r.dressing_level.to_string()),
            ("observer.coarse_factor", o.coarse_factor.to_string()),
            ("observer.window", o.window.to_string()),
            ("observer.min_peak", o.min_peak.to_string()),
            ("observer.template_pad", o.template_pad.to_string()),
            ("observer.refine_iterations", o.refine_iterations.to_string()),
            ("observer.velocity", self.velocity.name().to_string()),
            ("gp.population_size", g.population_size.to_string()),
            ("gp.generations", g.generations.to_string()),
            ("gp.tournament_size", g.tournament_size.to_string()),
            ("gp.p_crossover", g.p_crossover.to_string()),
            ("gp.p_subtree_mut", g.p_subtree_mut.to_string()),
            ("gp.p_hoist_mut", g.p_hoist_mut.to_string()),
            ("gp.p_point_mut", g.p_point_mut.to_string()),
            ("gp.p_point_replace", g.p_point_replace.to_string()),
            ("gp.init_depth_min", g.init_depth.0.to_string()),
            ("gp.init_depth_max", g.init_depth.1.to_string()),
            ("gp.max_depth", g.max_depth.to_string()),
            ("gp.const_min", g.const_range.0.to_string()),
            ("gp.const_max", g.const_range.1.to_string()),
            ("gp.parsimony_coeff", show_auto(g.parsimony_coeff)),
            ("gp.stop_mae", show_auto(g.stop_mae)),
            ("gp.tune_top", g.tune_top.to_string()),
            ("gp.tune_fraction", g.tune_fraction.to_string()),
            ("gp.tune_iterations", g.tune_iterations.to_string()),
            ("gp.tune_rows", g.tune_rows.to_string()),
            ("gp.final_tune_iterations", g.final_tune_iterations.to_string()),
            ("baseline.ridge_lambda", b.ridge_lambda.to_string()),
            ("baseline.tree_max_depth", depth_key(b.tree.max_depth)),
            ("baseline.tree_min_leaf", b.tree.min_leaf.to_string()),
            ("baseline.forest_trees", b.forest_trees.to_string()),
            ("baseline.forest_max_depth", depth_key(b.forest_tree.max_depth)),
            ("baseline.forest_min_leaf", b.forest_tree.min_leaf.to_string()),
            ("baseline.forest_bootstrap", b.forest_bootstrap.to_string()),
        ]
    }

    /// Sets one key; unknown keys are errors.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let w = &mut self.world;
        let r = &mut self.render;
        let o = &mut self.observer;
        let g = &mut self.gp;
        let b = &mut self.baseline;
        match key {
            "scenarios" => self.scenarios = list(key, v)?,
            "n_train_videos" => self.n_train_videos = num(key, v)?,
            "n_test_videos" => self.n_test_videos = num(key, v)?,
            "frames_per_video" => self.frames_per_video = num(key, v)?,
            "master_seed" => self.master_seed = num(key, v)?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            "save_frames" => self.save_frames = flag(key, v)?,
            "observer_methods" => self.observer_methods = list(key, v)?,
            "physicist_methods" => self.physicist_methods = list(key, v)?,
            "max_failure_fraction" => self.max_failure_fraction = num(key, v)?,
            "world.extent" => w.extent = num(key, v)?,
            "world.margin" => w.margin = num(key, v)?,
            "world.g" => w.g = num(key, v)?,
            "world.k" => w.k = num(key, v)?,
            "world.anchor_y" => w.anchor_y = num(key, v)?,
            "world.rest_offset" => w.rest_offset = num(key, v)?,
            "world.dt_min" => w.dt_range.0 = num(key, v)?,
            "world.dt_max" => w.dt_range.1 = num(key, v)?,
            "world.speed_min" => w.speed_range.0 = num(key, v)?,
            "world.speed_max" => w.speed_range.1 = num(key, v)?,
            "world.mass_min" => w.mass_range.0 = num(key, v)?,
            "world.mass_max" => w.mass_range.1 = num(key, v)?,
            "world.theta_min" => w.theta_range.0 = num(key, v)?,
            "world.theta_max" => w.theta_range.1 = num(key, v)?,
            "world.spawn_fraction" => w.spawn_fraction = num(key, v)?,
            "world.max_attempts" => w.max_attempts = num(key, v)?,
            "render.resolution" => r.resolution = num(key, v)?,
            "render.sprite_radius" => r.sprite_radius = num(key, v)?,
            "render.sprite_intensity" => r.sprite_intensity = num(key, v)?,
            "render.background" => {
                r.background_kind = match v {
                    "plain" => BackgroundKind::Plain,
                    "texture" => BackgroundKind::ProceduralTexture,
                    _ => return Err(Error::Config(format!("{key}: expected plain or texture, got `{v}`"))),
                }
            }
            "render.plain_level" => r.plain_level = num(key, v)?,
            "render.texture_min" => r.texture_range.0 = num(key, v)?,
            "render.texture_max" => r.texture_range.1 = num(key, v)?,
            "render.texture_period" => r.texture_period = num(key, v)?,
            "render.dressing_level" => r.dressing_level = num(key, v)?,
            "observer.coarse_factor" => o.coarse_factor = num(key, v)?,
            "observer.window" => o.window = num(key, v)?,
            "observer.min_peak" => o.min_peak = num(key, v)?,
            "observer.template_pad" => o.template_pad = num(key, v)?,
            "observer.refine_iterations" => o.refine_iterations = num(key, v)?,
            "observer.velocity" => {
                self.velocity = v.parse().map_err(|e: Error| Error::Config(format!("{key}: {e}")))?
            }
            "gp.population_size" => g.population_size = num(key, v)?,
            "gp.generations" => g.generations = num(key, v)?,
            "gp.tournament_size" => g.tournament_size = num(key, v)?,
            "gp.p_crossover" => g.p_crossover = num(key, v)?,
            "gp.p_subtree_mut" => g.p_subtree_mut = num(key, v)?,
            "gp.p_hoist_mut" => g.p_hoist_mut = num(key, v)?,
            "gp.p_point_mut" => g.p_point_mut = num(key, v)?,
            "gp.p_point_replace" => g.p_point_replace = num(key, v)?,
            "gp.init_depth_min" => g.init_depth.0 = num(key, v)?,
            "gp.init_depth_max" => g.init_depth.1 = num(key, v)?,
            "gp.max_depth" => g.max_depth = num(key, v)?,
            "gp.const_min" => g.const_range.0 = num(key, v)?,
            "gp.const_max" => g.const_range.1 = num(key, v)?,
            "gp.parsimony_coeff" => g.parsimony_coeff = auto(key, v)?,
            "gp.stop_mae" => g.stop_mae = auto(key, v)?,
            "gp.tune_top" => g.tune_top = num(key, v)?,
            "gp.tune_fraction" => g.tune_fraction = num(key, v)?,
            "gp.tune_iterations" => g.tune_iterations = num(key, v)?,
            "gp.tune_rows" => g.tune_rows = num(key, v)?,
            "gp.final_tune_iterations" => g.final_tune_iterations = num(key, v)?,
            "baseline.ridge_lambda" => b.ridge_lambda = num(key, v)?,
            "baseline.tree_max_depth" => b.tree.max_depth = parse_depth(key, v)?,
            "baseline.tree_min_leaf" => b.tree.min_leaf = num(key, v)?,
            "baseline.forest_trees" => b.forest_trees = num(key, v)?,
            "baseline.forest_max_depth" => b.forest_tree.max_depth = parse_depth(key, v)?,
            "baseline.forest_min_leaf" => b.forest_tree.min_leaf = num(key, v)?,
            "baseline.forest_bootstrap" => b.forest_bootstrap = flag(key, v)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Copies shared settings between sections.
    fn sync(&mut self) {
        self.world.n_frames = self.frames_per_video;
        self.render.world_extent = self.world.extent;
        let tuned = self.observer.clone();
        self.observer = ObserverConfig {
            coarse_factor: tuned.coarse_factor,
            window: tuned.window,
            min_peak: tuned.min_peak,
            template_pad: tuned.template_pad,
            refine_iterations: tuned.refine_iterations,
            ..ObserverConfig::for_render(&self.render)
        };
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_train_videos < 1 || self.n_test_videos < 1 {
            return bad("video counts must be at least 1");
        }
        if self.frames_per_video < 4 {
            return bad("frames_per_video must be at least 4");
        }
        if self.scenarios.is_empty() || self.observer_methods.is_empty() || self.physicist_methods.is_empty() {
            return bad("scenarios and method lists must be nonempty");
        }
        if !(0.0..=1.0).contains(&self.max_failure_fraction) {
            return bad("max_failure_fraction must lie in [0, 1]");
        }
        if self.observer.coarse_factor == 0 || self.observer.window == 0 {
            return bad("observer coarse_factor and window must be positive");
        }
        if self.velocity == VelocityScheme::Truth {
            return bad("observer.velocity must be backward or second_order");
        }
        self.world.validate()?;
        self.render.validate()?;
        self.gp.validate()?;
        if self.baseline.ridge_lambda < 0.0 || self.baseline.forest_trees == 0 {
            return bad("baseline settings out of range");
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (k, v) in parse_key_values(text)? {
            cfg.set(&k, &v)?;
        }
        cfg.sync();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        Self::from_text(&text)
    }

    /// Applies `key=value` overrides on top of this configuration.
    pub fn with_overrides(mut self, pairs: &[(String, String)]) -> Result<Self> {
        for (k, v) in pairs {
            self.set(k, v)?;
        }
        self.sync();
        self.validate()?;
        Ok(self)
    }

    pub fn to_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_whitespace() {
        let kv = parse_key_values("# c\n\n a = 1 \nb=x=y\n").unwrap();
        assert_eq!(kv["a"], "1");
        assert_eq!(kv["b"], "x=y");
        assert!(parse_key_values("novalue\n").is_err());
        assert!(parse_key_values("a=1\na=2\n").is_err());
    }

    #[test]
    fn defaults_round_trip_through_text() {
        let d = ExperimentConfig::default();
        let back = ExperimentConfig::from_text(&d.to_text()).unwrap();
        assert_eq!(back, d);
        assert_eq!(ExperimentConfig::from_text("").unwrap(), d);
    }

    #[test]
    fn dotted_keys_apply() {
        let c = ExperimentConfig::from_text("gp.population_size=300\nworld.extent=2048\nscenarios=drift,spring\n").unwrap();
        assert_eq!(c.gp.population_size, 300);
        assert_eq!(c.render.world_extent, 2048.0);
        assert_eq!(c.observer.world_extent, 2048.0);
        assert_eq!(c.scenarios, vec![ScenarioKind::Drift, ScenarioKind::Spring]);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_errors() {
        for text in [
            "gp.populaton_size=3\n",
            "gp.population_size=many\n",
            "scenarios=drift,orbit\n",
            "n_train_videos=0\n",
            "render.background=stripes\n",
        ] {
            assert!(matches!(ExperimentConfig::from_text(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn every_listed_key_is_settable() {
        let d = ExperimentConfig::default();
        let mut c = ExperimentConfig::default();
        for (k, v) in d.entries() {
            c.set(k, &v).unwrap();
        }
        assert_eq!(c, d);
    }
}

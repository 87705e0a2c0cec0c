//! Deterministic generation, storage and loading of the video corpus.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::render::{read_frames, render_sequence, write_frames, GrayImage, RenderConfig};
use crate::seed::derive;
use crate::world::{export_trajectory, import_trajectory, sample_trajectory, ScenarioKind, Trajectory};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub const BOTH: [Split; 2] = [Split::Train, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }

    pub fn index(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Split::BOTH
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown split `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VideoId {
    pub scenario: ScenarioKind,
    pub split: Split,
    pub index: usize,
}

impl VideoId {
    /// Directory of this video relative to the dataset root.
    pub fn rel_dir(&self) -> PathBuf {
        PathBuf::from(self.scenario.name())
            .join(self.split.name())
            .join(format!("{:03}", self.index))
    }
}

impl fmt::Display for VideoId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{:03}", self.scenario, self.split, self.index)
    }
}

const STREAM_WORLD: u64 = 10;
const STREAM_TEXTURE: u64 = 11;

pub fn world_seed(master: u64, id: VideoId) -> u64 {
    derive(master, &[STREAM_WORLD, id.scenario.index(), id.split.index(), id.index as u64])
}

/// Train seeds are even and test seeds odd, so the splits never share a texture.
pub fn texture_seed(master: u64, id: VideoId) -> u64 {
    let h = derive(master, &[STREAM_TEXTURE, id.scenario.index(), id.split.index(), id.index as u64]);
    (h & !1) | id.split.index()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Video {
    pub id: VideoId,
    pub world_seed: u64,
    pub texture_seed: u64,
    pub trajectory: Trajectory,
}

/// All videos of an experiment, ordered by scenario, split and index.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    /// Directory holding saved frames, when there is one.
    pub root: Option<PathBuf>,
    pub frames_saved: bool,
    pub videos: Vec<Video>,
}

pub const DATASET_DIR: &str = "dataset";
pub const INDEX_NAME: &str = "index.csv";
pub const CONFIG_NAME: &str = "config.txt";
const TRAJECTORY_NAME: &str = "trajectory.csv";
const META_NAME: &str = "meta.txt";

fn video_ids(cfg: &ExperimentConfig) -> Vec<VideoId> {
    let mut ids = Vec::new();
    for &scenario in &cfg.scenarios {
        for split in Split::BOTH {
            let n = match split {
                Split::Train => cfg.n_train_videos,
                Split::Test => cfg.n_test_videos,
            };
            ids.extend((0..n).map(|index| VideoId { scenario, split, index }));
        }
    }
    ids
}

/// Samples every trajectory of the experiment in memory.
pub fn generate_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    cfg.validate()?;
    let videos = video_ids(cfg)
        .into_par_iter()
        .map(|id| {
            let seed = world_seed(cfg.master_seed, id);
            let trajectory = sample_trajectory(id.scenario, &cfg.world, seed).map_err(|e| Error::Video {
                video: id.to_string(),
                source: Box::new(e),
            })?;
            Ok(Video {
                id,
                world_seed: seed,
                texture_seed: texture_seed(cfg.master_seed, id),
                trajectory,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        root: None,
        frames_saved: false,
        videos,
    })
}

impl Dataset {
    pub fn videos_of(&self, scenario: ScenarioKind, split: Split) -> Vec<&Video> {
        self.videos
            .iter()
            .filter(|v| v.id.scenario == scenario && v.id.split == split)
            .collect()
    }

    pub fn render_config(cfg: &ExperimentConfig, video: &Video) -> RenderConfig {
        RenderConfig {
            noise_seed: video.texture_seed,
            ..cfg.render.clone()
        }
    }

    /// Frames of one video, read from disk when saved and rendered otherwise.
    pub fn frames(&self, cfg: &ExperimentConfig, video: &Video) -> Result<Vec<GrayImage>> {
        let wrap = |e| Error::Video {
            video: video.id.to_string(),
            source: Box::new(e),
        };
        match (&self.root, self.frames_saved) {
            (Some(root), true) => read_frames(&root.join(video.id.rel_dir())).map(|(f, _)| f).map_err(wrap),
            _ => render_sequence(&video.trajectory, &Self::render_config(cfg, video))
                .map(|s| s.frames)
                .map_err(wrap),
        }
    }

    /// Writes trajectories, the index, the resolved configuration and, when
    /// `cfg.save_frames` is set, every frame under `root`.
    pub fn save(&mut self, cfg: &ExperimentConfig, root: &Path) -> Result<()> {
        fs::create_dir_all(root).map_err(Error::io(root))?;
        self.videos.par_iter().try_for_each(|v| -> Result<()> {
            let dir = root.join(v.id.rel_dir());
            fs::create_dir_all(&dir).map_err(Error::io(&dir))?;
            export_trajectory(&v.trajectory, v.world_seed, &dir.join(TRAJECTORY_NAME), &dir.join(META_NAME))?;
            if cfg.save_frames {
                let seq = render_sequence(&v.trajectory, &Self::render_config(cfg, v)).map_err(|e| Error::Video {
                    video: v.id.to_string(),
                    source: Box::new(e),
                })?;
                write_frames(&seq, &dir)?;
            }
            Ok(())
        })?;
        let mut index = String::from("scenario,split,index,world_seed,texture_seed,dt,frames\n");
        for v in &self.videos {
            index.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                v.id.scenario,
                v.id.split,
                v.id.index,
                v.world_seed,
                v.texture_seed,
                v.trajectory.dt,
                v.trajectory.len()
            ));
        }
        let path = root.join(INDEX_NAME);
        fs::write(&path, index).map_err(Error::io(&path))?;
        let text: String = cfg.result_entries().into_iter().map(|(k, v)| format!("{k}={v}\n")).collect();
        let path = root.join(CONFIG_NAME);
        fs::write(&path, text).map_err(Error::io(&path))?;
        self.root = Some(root.to_path_buf());
        self.frames_saved = cfg.save_frames;
        Ok(())
    }

    /// Reads a dataset written by [`Dataset::save`] with the configuration it
    /// was made with; `output_dir` is left at its default.
    pub fn load(root: &Path) -> Result<(Dataset, ExperimentConfig)> {
        let cfg = ExperimentConfig::from_file(&root.join(CONFIG_NAME))?;
        let path = root.join(INDEX_NAME);
        let text = fs::read_to_string(&path).map_err(Error::io(&path))?;
        let mut ids = Vec::new();
        for (n, line) in text.lines().enumerate().skip(1) {
            let cols: Vec<&str> = line.split(',').collect();
            let bad = |m: String| Error::Parse(format!("{}:{}: {m}", path.display(), n + 1));
            if cols.len() != 7 {
                return Err(bad("expected 7 columns".into()));
            }
            let id = VideoId {
                scenario: cols[0].parse()?,
                split: cols[1].parse()?,
                index: cols[2].parse().map_err(|e| bad(format!("{e}")))?,
            };
            let tex: u64 = cols[4].parse().map_err(|e| bad(format!("{e}")))?;
            ids.push((id, tex));
        }
        let videos = ids
            .into_par_iter()
            .map(|(id, texture_seed)| {
                let dir = root.join(id.rel_dir());
                let (trajectory, world_seed) = import_trajectory(&dir.join(TRAJECTORY_NAME), &dir.join(META_NAME))?;
                Ok(Video {
                    id,
                    world_seed,
                    texture_seed,
                    trajectory,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((
            Dataset {
                root: Some(root.to_path_buf()),
                frames_saved: cfg.save_frames,
                videos,
            },
            cfg,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig::from_text(
            "n_train_videos=3\nn_test_videos=2\nframes_per_video=6\nrender.resolution=128\nrender.sprite_radius=3\nworld.extent=1024\nworld.margin=64\nworld.anchor_y=600\nworld.rest_offset=-300\n",
        )
        .unwrap()
    }

    #[test]
    fn cardinality_and_order() {
        let cfg = tiny();
        let ds = generate_dataset(&cfg).unwrap();
        assert_eq!(ds.videos.len(), 5 * 5);
        assert!(ds.videos.iter().all(|v| v.trajectory.len() == 6));
        assert_eq!(ds.videos_of(ScenarioKind::Slope, Split::Test).len(), 2);
        let ids: Vec<VideoId> = ds.videos.iter().map(|v| v.id).collect();
        let mut sorted = ids.clone();
        sorted.sort_by_key(|id| (cfg.scenarios.iter().position(|s| *s == id.scenario), id.split, id.index));
        assert_eq!(ids, sorted);
    }

    #[test]
    fn splits_never_share_textures() {
        let ds = generate_dataset(&tiny()).unwrap();
        for a in ds.videos.iter().filter(|v| v.id.split == Split::Train) {
            for b in ds.videos.iter().filter(|v| v.id.split == Split::Test) {
                assert_ne!(a.texture_seed, b.texture_seed);
            }
        }
    }

    #[test]
    fn save_and_load_round_trip() {
        let cfg = tiny();
        let dir = tempfile::tempdir().unwrap();
        let mut ds = generate_dataset(&cfg).unwrap();
        ds.save(&cfg, dir.path()).unwrap();
        let (back, back_cfg) = Dataset::load(dir.path()).unwrap();
        assert_eq!(back_cfg, ExperimentConfig { output_dir: back_cfg.output_dir.clone(), ..cfg.clone() });
        assert_eq!(back.videos, ds.videos);
        let v = &back.videos[7];
        assert_eq!(back.frames(&cfg, v).unwrap(), generate_dataset(&cfg).unwrap().frames(&cfg, v).unwrap());
    }
}

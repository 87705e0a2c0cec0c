//! One observer × physicist cell: observe every video, pool samples per split,
//! fit on the training split and score on the test split.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::dataset::{Dataset, Split, Video, VideoId};
use super::PhysicistMethod;
use crate::baselines::{self, BaselineConfig};
use crate::error::{Error, Result};
use crate::metrics::{mapa_pooled, med, MetricReport};
use crate::observer::{
    build_samples, observe_frames, Component, ObservationSet, ObserverMethod, SampleTable, VelocityScheme,
};
use crate::seed::derive;
use crate::symreg::{evolve, FitResult, GpConfig};
use crate::world::{acceleration, step_displacement, KinState, ScenarioKind, Vec2};

/// Velocity scheme paired with an observer: recorded velocities for ground
/// truth, finite differences of the estimates otherwise.
pub fn velocity_scheme(cfg: &ExperimentConfig, method: ObserverMethod) -> VelocityScheme {
    match method {
        ObserverMethod::GroundTruth => VelocityScheme::Truth,
        _ => cfg.velocity,
    }
}

/// Observes one video with several methods, loading its frames at most once.
pub fn observe_video(
    cfg: &ExperimentConfig,
    ds: &Dataset,
    video: &Video,
    methods: &[ObserverMethod],
) -> Vec<std::result::Result<ObservationSet, String>> {
    let needs_frames = methods.iter().any(|&m| m != ObserverMethod::GroundTruth);
    let frames = if needs_frames {
        Some(ds.frames(cfg, video).map_err(|e| e.to_string()))
    } else {
        None
    };
    methods
        .iter()
        .map(|&m| match (m, &frames) {
            (ObserverMethod::GroundTruth, _) => Ok(ObservationSet::ground_truth(&video.trajectory)),
            (_, Some(Ok(frames))) => observe_frames(frames, video.trajectory.dt, m, &cfg.observer).map_err(|e| {
                Error::Video {
                    video: video.id.to_string(),
                    source: Box::new(e),
                }
                .to_string()
            }),
            (_, Some(Err(e))) => Err(e.clone()),
            (_, None) => unreachable!("frames are loaded for every visual method"),
        })
        .collect()
}

/// Observations of every video of one scenario.
#[derive(Clone, Debug)]
pub struct ScenarioObservations {
    pub scenario: ScenarioKind,
    pub methods: Vec<ObserverMethod>,
    pub videos: Vec<VideoId>,
    /// `results[v][m]` is video `v` observed by `methods[m]`.
    pub results: Vec<Vec<std::result::Result<ObservationSet, String>>>,
}

pub fn observe_scenario(
    cfg: &ExperimentConfig,
    ds: &Dataset,
    scenario: ScenarioKind,
    methods: &[ObserverMethod],
) -> ScenarioObservations {
    let videos: Vec<&Video> = ds.videos.iter().filter(|v| v.id.scenario == scenario).collect();
    let results = videos.par_iter().map(|v| observe_video(cfg, ds, v, methods)).collect();
    ScenarioObservations {
        scenario,
        methods: methods.to_vec(),
        videos: videos.iter().map(|v| v.id).collect(),
        results,
    }
}

impl ScenarioObservations {
    fn slot(&self, method: ObserverMethod) -> Result<usize> {
        self.methods
            .iter()
            .position(|&m| m == method)
            .ok_or_else(|| Error::Config(format!("scenario was not observed with {method}")))
    }

    /// Per-video MED in world units over the videos of `split`; failed videos are skipped.
    pub fn med_world(&self, ds: &Dataset, method: ObserverMethod, split: Split) -> Result<Vec<f64>> {
        let m = self.slot(method)?;
        let mut out = Vec::new();
        for (id, row) in self.videos.iter().zip(&self.results) {
            if id.split != split {
                continue;
            }
            if let Ok(obs) = &row[m] {
                let video = ds
                    .videos
                    .iter()
                    .find(|v| v.id == *id)
                    .ok_or_else(|| Error::Config(format!("video {id} missing from dataset")))?;
                out.push(med(&obs.positions, &video.trajectory.positions())?);
            }
        }
        Ok(out)
    }
}

/// Pooled samples of one split, with the true law evaluated on every row.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitData {
    pub table: SampleTable,
    /// Prediction of the ground-truth equation for each row of `table`.
    pub law: Vec<Vec2>,
    pub videos: usize,
    pub failures: Vec<String>,
}

/// Displacement predicted by the true law from an observed state.
fn law_displacement(kind: ScenarioKind, video: &Video, d: Vec2, v: Vec2, dt: f64) -> Result<Vec2> {
    let state = KinState { pos: d, vel: v, t: 0.0 };
    let a = acceleration(kind, &state, &video.trajectory.params)?;
    Ok((d + step_displacement(v, a, dt)) - d)
}

/// Builds the pooled table of `split`, concatenating videos in index order.
pub fn split_data(
    cfg: &ExperimentConfig,
    ds: &Dataset,
    obs: &ScenarioObservations,
    method: ObserverMethod,
    split: Split,
) -> Result<SplitData> {
    let m = obs.slot(method)?;
    let scheme = velocity_scheme(cfg, method);
    let kind = obs.scenario;
    let mut table = SampleTable::new(crate::observer::Feature::for_kind(kind));
    let mut law = Vec::new();
    let mut failures = Vec::new();
    let mut videos = 0;
    for (id, row) in obs.videos.iter().zip(&obs.results) {
        if id.split != split {
            continue;
        }
        videos += 1;
        let video = ds
            .videos
            .iter()
            .find(|v| v.id == *id)
            .ok_or_else(|| Error::Config(format!("video {id} missing from dataset")))?;
        let part = row[m]
            .as_ref()
            .map_err(|e| e.clone())
            .and_then(|o| build_samples(o, kind, &video.trajectory.params, scheme).map_err(|e| format!("video {id}: {e}")));
        match part {
            Ok(part) => {
                for r in &part.rows {
                    law.push(law_displacement(kind, video, r.d, r.v, r.dt)?);
                }
                table.append(&part)?;
            }
            Err(e) => failures.push(e),
        }
    }
    Ok(SplitData {
        table,
        law,
        videos,
        failures,
    })
}

/// True when the true displacement of `component` never varies in `scenario`,
/// which leaves R² undefined for that component.
pub fn component_is_trivial(ds: &Dataset, scenario: ScenarioKind, component: Component) -> bool {
    let mut values = ds
        .videos
        .iter()
        .filter(|v| v.id.scenario == scenario)
        .flat_map(|v| {
            let p = v.trajectory.positions();
            (1..p.len()).map(move |i| component.of(p[i] - p[i - 1])).collect::<Vec<_>>()
        });
    let Some(first) = values.next() else {
        return true;
    };
    values.all(|x| x == first)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Equation {
    pub infix: String,
    pub sexpr: String,
    pub train_mae: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentResult {
    pub component: Component,
    pub metrics: MetricReport,
    /// Left out of the R² aggregate because the true displacement is constant.
    pub r2_excluded: bool,
    pub equation: Option<Equation>,
    /// Short description of a fitted baseline.
    pub model: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub scenario: ScenarioKind,
    pub observer: ObserverMethod,
    pub physicist: PhysicistMethod,
    pub videos: usize,
    pub failed_videos: Vec<String>,
    pub components: Vec<ComponentResult>,
    /// MAPA over the eligible samples of both components.
    pub mapa: Option<f64>,
    /// Mean R² over the components not excluded.
    pub r2: Option<f64>,
    pub failure: Option<String>,
}

impl CellResult {
    fn failed(scenario: ScenarioKind, observer: ObserverMethod, physicist: PhysicistMethod, videos: usize, failed_videos: Vec<String>, reason: String) -> Self {
        CellResult {
            scenario,
            observer,
            physicist,
            videos,
            failed_videos,
            components: Vec::new(),
            mapa: None,
            r2: None,
            failure: Some(reason),
        }
    }
}

fn method_index(m: ObserverMethod) -> u64 {
    ObserverMethod::ALL.iter().position(|&x| x == m).unwrap_or(0) as u64
}

const STREAM_SR: u64 = 20;
const STREAM_FOREST: u64 = 21;

pub fn gp_config(cfg: &ExperimentConfig, scenario: ScenarioKind, observer: ObserverMethod, component: Component) -> GpConfig {
    GpConfig {
        seed: derive(cfg.master_seed, &[STREAM_SR, scenario.index(), method_index(observer), component as u64]),
        ..cfg.gp.clone()
    }
}

pub fn baseline_config(cfg: &ExperimentConfig, scenario: ScenarioKind, observer: ObserverMethod, component: Component) -> BaselineConfig {
    BaselineConfig {
        seed: derive(cfg.master_seed, &[STREAM_FOREST, scenario.index(), method_index(observer), component as u64]),
        ..cfg.baseline.clone()
    }
}

/// One fitted component with its test predictions.
#[derive(Clone, Debug)]
pub struct ComponentFit {
    pub result: ComponentResult,
    pub predictions: Vec<f64>,
    /// Full search record for symbolic regression.
    pub search: Option<FitResult>,
}

/// Fits one displacement component on `train` and scores it on `test`.
#[allow(clippy::too_many_arguments)]
pub fn fit_component(
    cfg: &ExperimentConfig,
    ds: &Dataset,
    scenario: ScenarioKind,
    observer: ObserverMethod,
    physicist: PhysicistMethod,
    component: Component,
    train: &SplitData,
    test: &SplitData,
) -> Result<ComponentFit> {
    let (predictions, equation, model, search) = match physicist {
        PhysicistMethod::GroundTruthEquation => (test.law.iter().map(|&v| component.of(v)).collect(), None, None, None),
        PhysicistMethod::SymbolicRegression => {
            let fit = evolve(&train.table, component, &gp_config(cfg, scenario, observer, component))?;
            let eq = Equation {
                infix: fit.infix.clone(),
                sexpr: fit.sexpr.clone(),
                train_mae: fit.best.raw_mae,
            };
            (fit.predict(&test.table)?, Some(eq), None, Some(fit))
        }
        _ => {
            let kind = physicist.baseline().expect("baseline method");
            let m = baselines::fit(kind, &train.table, component, &baseline_config(cfg, scenario, observer, component))?;
            (m.predict(&test.table)?, None, Some(m.summary()), None)
        }
    };
    let metrics = MetricReport::score(&predictions, &test.table.target(component))?;
    Ok(ComponentFit {
        result: ComponentResult {
            component,
            metrics,
            r2_excluded: component_is_trivial(ds, scenario, component),
            equation,
            model,
        },
        predictions,
        search,
    })
}

/// Fits `physicist` on `train` and scores it on `test`.
pub fn run_cell(
    cfg: &ExperimentConfig,
    ds: &Dataset,
    scenario: ScenarioKind,
    observer: ObserverMethod,
    physicist: PhysicistMethod,
    train: &SplitData,
    test: &SplitData,
) -> CellResult {
    let videos = train.videos + test.videos;
    let failed: Vec<String> = train.failures.iter().chain(&test.failures).cloned().collect();
    if failed.len() as f64 > cfg.max_failure_fraction * videos as f64 {
        let reason = format!("{} of {videos} videos failed; first: {}", failed.len(), failed[0]);
        return CellResult::failed(scenario, observer, physicist, videos, failed, reason);
    }
    if train.table.is_empty() || test.table.is_empty() {
        let reason = "no usable samples".to_string();
        return CellResult::failed(scenario, observer, physicist, videos, failed, reason);
    }
    let mut components = Vec::new();
    let mut parts: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for component in Component::BOTH {
        match fit_component(cfg, ds, scenario, observer, physicist, component, train, test) {
            Ok(fitted) => {
                parts.push((fitted.predictions, test.table.target(component)));
                components.push(fitted.result);
            }
            Err(e) => {
                let reason = format!("{}: {e}", component.name());
                return CellResult::failed(scenario, observer, physicist, videos, failed, reason);
            }
        }
    }
    let pooled: Vec<(&[f64], &[f64])> = parts.iter().map(|(p, t)| (p.as_slice(), t.as_slice())).collect();
    let mapa = mapa_pooled(&pooled).ok().map(|(m, _)| m);
    let r2s: Vec<f64> = components
        .iter()
        .filter(|c| !c.r2_excluded)
        .filter_map(|c| c.metrics.r2)
        .collect();
    let r2 = (!r2s.is_empty()).then(|| r2s.iter().sum::<f64>() / r2s.len() as f64);
    CellResult {
        scenario,
        observer,
        physicist,
        videos,
        failed_videos: failed,
        components,
        mapa,
        r2,
        failure: None,
    }
}

/// Runs one cell end to end.
pub fn run_pipeline(
    cfg: &ExperimentConfig,
    ds: &Dataset,
    scenario: ScenarioKind,
    observer: ObserverMethod,
    physicist: PhysicistMethod,
) -> Result<CellResult> {
    let obs = observe_scenario(cfg, ds, scenario, &[observer]);
    let train = split_data(cfg, ds, &obs, observer, Split::Train)?;
    let test = split_data(cfg, ds, &obs, observer, Split::Test)?;
    Ok(run_cell(cfg, ds, scenario, observer, physicist, &train, &test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::dataset::generate_dataset;

    fn small() -> ExperimentConfig {
        ExperimentConfig::from_text(
            "n_train_videos=4\nn_test_videos=2\nframes_per_video=20\ngp.population_size=200\ngp.generations=10\nbaseline.forest_trees=5\n",
        )
        .unwrap()
    }

    #[test]
    fn ground_truth_law_is_exact_on_true_positions() {
        let cfg = small();
        let ds = generate_dataset(&cfg).unwrap();
        for kind in ScenarioKind::ALL {
            let cell = run_pipeline(&cfg, &ds, kind, ObserverMethod::GroundTruth, PhysicistMethod::GroundTruthEquation).unwrap();
            assert_eq!(cell.failure, None);
            assert_eq!(cell.r2, Some(1.0), "{kind}");
            assert_eq!(cell.mapa, Some(1.0), "{kind}");
        }
    }

    #[test]
    fn trivial_components_are_detected() {
        let ds = generate_dataset(&small()).unwrap();
        assert!(component_is_trivial(&ds, ScenarioKind::FreeFall, Component::X));
        assert!(component_is_trivial(&ds, ScenarioKind::Spring, Component::X));
        assert!(!component_is_trivial(&ds, ScenarioKind::Drift, Component::X));
        assert!(!component_is_trivial(&ds, ScenarioKind::Spring, Component::Y));
    }

    #[test]
    fn drift_symbolic_regression_scores_one() {
        let cfg = small();
        let ds = generate_dataset(&cfg).unwrap();
        let cell = run_pipeline(&cfg, &ds, ScenarioKind::Drift, ObserverMethod::GroundTruth, PhysicistMethod::SymbolicRegression).unwrap();
        let r2 = cell.r2.unwrap();
        assert!((r2 - 1.0).abs() <= 1e-6, "{r2}");
        assert_eq!(cell.components[0].equation.as_ref().unwrap().infix, "v_x*dt");
    }

    #[test]
    fn too_many_failed_videos_fail_the_cell() {
        let cfg = small();
        let ds = generate_dataset(&cfg).unwrap();
        let obs = observe_scenario(&cfg, &ds, ScenarioKind::Drift, &[ObserverMethod::GroundTruth]);
        let train = split_data(&cfg, &ds, &obs, ObserverMethod::GroundTruth, Split::Train).unwrap();
        let mut test = split_data(&cfg, &ds, &obs, ObserverMethod::GroundTruth, Split::Test).unwrap();
        test.failures.push("video drift/test/009: lost".into());
        let cell = run_cell(&cfg, &ds, ScenarioKind::Drift, ObserverMethod::GroundTruth, PhysicistMethod::Linear, &train, &test);
        assert!(cell.failure.is_some());
        assert!(cell.components.is_empty());
    }
}

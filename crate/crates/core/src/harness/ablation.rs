//! The full observer × physicist grid with localization and accuracy summaries.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::dataset::{Dataset, Split};
use super::pipeline::{observe_scenario, run_cell, split_data, CellResult};
use super::PhysicistMethod;
use crate::error::{Error, Result};
use crate::observer::{Component, ObserverMethod};
use crate::world::ScenarioKind;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MedEntry {
    pub method: ObserverMethod,
    pub med_pixels: Option<f64>,
    pub med_world: Option<f64>,
    /// Test videos localized without error.
    pub videos: usize,
    pub failed_videos: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapaEntry {
    pub scenario: ScenarioKind,
    pub physicist: PhysicistMethod,
    pub mapa: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct R2Entry {
    pub observer: ObserverMethod,
    pub physicist: PhysicistMethod,
    /// Unweighted mean of the per-(scenario, component) R² values.
    pub r2: Option<f64>,
    pub components: usize,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquationEntry {
    pub scenario: ScenarioKind,
    pub component: Component,
    pub observer: ObserverMethod,
    pub infix: String,
    pub sexpr: String,
    pub train_mae: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub package: String,
    pub version: String,
    pub master_seed: u64,
    pub config: Vec<(String, String)>,
}

impl Provenance {
    pub fn of(cfg: &ExperimentConfig) -> Self {
        Provenance {
            package: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed: cfg.master_seed,
            config: cfg.result_entries().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenarios: Vec<ScenarioKind>,
    pub observers: Vec<ObserverMethod>,
    pub physicists: Vec<PhysicistMethod>,
    pub med_table: Vec<MedEntry>,
    pub mapa_grid: Vec<MapaEntry>,
    pub r2_grid: Vec<R2Entry>,
    pub equations: Vec<EquationEntry>,
    pub cells: Vec<CellResult>,
    pub provenance: Provenance,
}

pub const REPORT_JSON: &str = "report.json";

impl Report {
    pub fn r2(&self, observer: ObserverMethod, physicist: PhysicistMethod) -> Option<&R2Entry> {
        self.r2_grid
            .iter()
            .find(|e| e.observer == observer && e.physicist == physicist)
    }

    pub fn mapa(&self, scenario: ScenarioKind, physicist: PhysicistMethod) -> Option<&MapaEntry> {
        self.mapa_grid
            .iter()
            .find(|e| e.scenario == scenario && e.physicist == physicist)
    }

    pub fn med(&self, method: ObserverMethod) -> Option<&MedEntry> {
        self.med_table.iter().find(|e| e.method == method)
    }

    pub fn cell(&self, scenario: ScenarioKind, observer: ObserverMethod, physicist: PhysicistMethod) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.scenario == scenario && c.observer == observer && c.physicist == physicist)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(Error::io(path))
    }

    pub fn load(path: &Path) -> Result<Report> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }
}

/// Runs every requested cell over every scenario.
pub fn run_ablation(cfg: &ExperimentConfig, ds: &Dataset) -> Result<Report> {
    let mut cells = Vec::new();
    let mut med_world: Vec<(ObserverMethod, Vec<f64>, usize)> = cfg
        .observer_methods
        .iter()
        .filter(|&&m| m != ObserverMethod::GroundTruth)
        .map(|&m| (m, Vec::new(), 0))
        .collect();
    for &scenario in &cfg.scenarios {
        let obs = observe_scenario(cfg, ds, scenario, &cfg.observer_methods);
        for (method, meds, failed) in med_world.iter_mut() {
            let ok = obs.med_world(ds, *method, Split::Test)?;
            let total = obs.videos.iter().filter(|v| v.split == Split::Test).count();
            *failed += total - ok.len();
            meds.extend(ok);
        }
        for &observer in &cfg.observer_methods {
            let train = split_data(cfg, ds, &obs, observer, Split::Train)?;
            let test = split_data(cfg, ds, &obs, observer, Split::Test)?;
            for &physicist in &cfg.physicist_methods {
                cells.push(run_cell(cfg, ds, scenario, observer, physicist, &train, &test));
            }
        }
    }

    let scale = cfg.world.extent / cfg.render.resolution as f64;
    let med_table = med_world
        .into_iter()
        .map(|(method, meds, failed)| {
            let world = (!meds.is_empty()).then(|| meds.iter().sum::<f64>() / meds.len() as f64);
            MedEntry {
                method,
                med_pixels: world.map(|w| w / scale),
                med_world: world,
                videos: meds.len(),
                failed_videos: failed,
            }
        })
        .collect();

    let mut mapa_grid = Vec::new();
    if cfg.observer_methods.contains(&ObserverMethod::GroundTruth) {
        for &scenario in &cfg.scenarios {
            for &physicist in &cfg.physicist_methods {
                let c = cells
                    .iter()
                    .find(|c| c.scenario == scenario && c.observer == ObserverMethod::GroundTruth && c.physicist == physicist)
                    .expect("cell was run");
                mapa_grid.push(MapaEntry {
                    scenario,
                    physicist,
                    mapa: c.mapa,
                    failure: c.failure.clone(),
                });
            }
        }
    }

    let mut r2_grid = Vec::new();
    for &observer in &cfg.observer_methods {
        for &physicist in &cfg.physicist_methods {
            let row: Vec<&CellResult> = cells
                .iter()
                .filter(|c| c.observer == observer && c.physicist == physicist)
                .collect();
            let values: Vec<f64> = row
                .iter()
                .flat_map(|c| c.components.iter())
                .filter(|k| !k.r2_excluded)
                .filter_map(|k| k.metrics.r2)
                .collect();
            let failures: Vec<String> = row
                .iter()
                .filter_map(|c| c.failure.as_ref().map(|f| format!("{}: {f}", c.scenario)))
                .collect();
            r2_grid.push(R2Entry {
                observer,
                physicist,
                r2: (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64),
                components: values.len(),
                failure: (!failures.is_empty()).then(|| failures.join("; ")),
            });
        }
    }

    let equations = cells
        .iter()
        .filter(|c| c.physicist == PhysicistMethod::SymbolicRegression)
        .flat_map(|c| {
            c.components.iter().filter_map(move |k| {
                k.equation.as_ref().map(|e| EquationEntry {
                    scenario: c.scenario,
                    component: k.component,
                    observer: c.observer,
                    infix: e.infix.clone(),
                    sexpr: e.sexpr.clone(),
                    train_mae: e.train_mae,
                })
            })
        })
        .collect();

    Ok(Report {
        scenarios: cfg.scenarios.clone(),
        observers: cfg.observer_methods.clone(),
        physicists: cfg.physicist_methods.clone(),
        med_table,
        mapa_grid,
        r2_grid,
        equations,
        cells,
        provenance: Provenance::of(cfg),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::dataset::generate_dataset;

    fn small() -> ExperimentConfig {
        ExperimentConfig::from_text(
            "scenarios=drift,freefall\nn_train_videos=3\nn_test_videos=2\nframes_per_video=12\nrender.resolution=256\n\
             gp.population_size=100\ngp.generations=4\nbaseline.forest_trees=4\n",
        )
        .unwrap()
    }

    #[test]
    fn grid_shape_and_reruns_are_identical() {
        let cfg = small();
        let ds = generate_dataset(&cfg).unwrap();
        let a = run_ablation(&cfg, &ds).unwrap();
        assert_eq!(a.r2_grid.len(), 4 * 6);
        assert_eq!(a.mapa_grid.len(), 2 * 6);
        assert_eq!(a.med_table.len(), 3);
        assert_eq!(a.cells.len(), 2 * 4 * 6);
        let gt = a.r2(ObserverMethod::GroundTruth, PhysicistMethod::GroundTruthEquation).unwrap();
        assert_eq!(gt.r2, Some(1.0));
        let b = run_ablation(&cfg, &ds).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }

    #[test]
    fn json_round_trip() {
        let cfg = small();
        let ds = generate_dataset(&cfg).unwrap();
        let a = run_ablation(&cfg, &ds).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(REPORT_JSON);
        a.save(&path).unwrap();
        assert_eq!(Report::load(&path).unwrap(), a);
    }
}

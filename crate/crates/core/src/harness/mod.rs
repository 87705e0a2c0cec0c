//! Experiment orchestration: configuration, datasets, the observer × physicist grid and reports.

pub mod ablation;
pub mod config;
pub mod dataset;
pub mod pipeline;
pub mod report;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::BaselineKind;
use crate::error::{Error, Result};

pub use ablation::{run_ablation, Report};
pub use config::{parse_key_values, ExperimentConfig};
pub use dataset::{generate_dataset, Dataset, Split, VideoId};
pub use pipeline::{run_pipeline, CellResult};
pub use report::{emit_report, Format};

/// A method that maps observed samples to a predictor of `dd`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PhysicistMethod {
    Linear,
    Ridge,
    DecisionTree,
    RandomForest,
    SymbolicRegression,
    /// The true law evaluated on observed states.
    GroundTruthEquation,
}

impl PhysicistMethod {
    pub const ALL: [PhysicistMethod; 6] = [
        PhysicistMethod::Linear,
        PhysicistMethod::Ridge,
        PhysicistMethod::DecisionTree,
        PhysicistMethod::RandomForest,
        PhysicistMethod::SymbolicRegression,
        PhysicistMethod::GroundTruthEquation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PhysicistMethod::Linear => "lr",
            PhysicistMethod::Ridge => "ridge",
            PhysicistMethod::DecisionTree => "dt",
            PhysicistMethod::RandomForest => "rf",
            PhysicistMethod::SymbolicRegression => "sr",
            PhysicistMethod::GroundTruthEquation => "gt",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PhysicistMethod::Linear => "Linear",
            PhysicistMethod::Ridge => "Ridge",
            PhysicistMethod::DecisionTree => "Decision tree",
            PhysicistMethod::RandomForest => "Random forest",
            PhysicistMethod::SymbolicRegression => "Symbolic regression",
            PhysicistMethod::GroundTruthEquation => "Ground-truth equation",
        }
    }

    pub fn baseline(self) -> Option<BaselineKind> {
        match self {
            PhysicistMethod::Linear => Some(BaselineKind::Linear),
            PhysicistMethod::Ridge => Some(BaselineKind::Ridge),
            PhysicistMethod::DecisionTree => Some(BaselineKind::DecisionTree),
            PhysicistMethod::RandomForest => Some(BaselineKind::RandomForest),
            _ => None,
        }
    }
}

impl fmt::Display for PhysicistMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PhysicistMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        PhysicistMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown physicist method `{s}`")))
    }
}

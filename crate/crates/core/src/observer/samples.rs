use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::{ScenarioKind, ScenarioParams, Vec2};

use super::ObservationSet;

/// Input variables available to equation discovery.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Feature {
    Dx,
    Dy,
    Vx,
    Vy,
    Mass,
    Dt,
    SinTheta,
    CosTheta,
}

impl Feature {
    pub const ALL: [Feature; 8] = [
        Feature::Dx,
        Feature::Dy,
        Feature::Vx,
        Feature::Vy,
        Feature::Mass,
        Feature::Dt,
        Feature::SinTheta,
        Feature::CosTheta,
    ];

    pub const BASE: [Feature; 6] = [
        Feature::Dx,
        Feature::Dy,
        Feature::Vx,
        Feature::Vy,
        Feature::Mass,
        Feature::Dt,
    ];

    /// Features recorded for a scenario.
    pub fn for_kind(kind: ScenarioKind) -> Vec<Feature> {
        let mut f = Feature::BASE.to_vec();
        if kind == ScenarioKind::Slope {
            f.extend([Feature::SinTheta, Feature::CosTheta]);
        }
        f
    }

    /// Variable name used in equations.
    pub fn name(self) -> &'static str {
        match self {
            Feature::Dx => "d_x",
            Feature::Dy => "d_y",
            Feature::Vx => "v_x",
            Feature::Vy => "v_y",
            Feature::Mass => "m",
            Feature::Dt => "dt",
            Feature::SinTheta => "sin_theta",
            Feature::CosTheta => "cos_theta",
        }
    }

    /// Column name used in sample tables.
    pub fn column(self) -> &'static str {
        match self {
            Feature::Dx => "dx",
            Feature::Dy => "dy",
            Feature::Vx => "vx",
            Feature::Vy => "vy",
            other => other.name(),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Feature::ALL
            .into_iter()
            .find(|f| f.name() == s || f.column() == s)
            .ok_or_else(|| Error::UnknownVariable(s.to_string()))
    }
}

/// Displacement component being modelled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Component {
    X,
    Y,
}

impl Component {
    pub const BOTH: [Component; 2] = [Component::X, Component::Y];

    pub fn name(self) -> &'static str {
        match self {
            Component::X => "dd_x",
            Component::Y => "dd_y",
        }
    }

    pub fn of(self, v: Vec2) -> f64 {
        match self {
            Component::X => v.x,
            Component::Y => v.y,
        }
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How velocities are obtained from an observation set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VelocityScheme {
    /// Use the recorded instantaneous velocities.
    Truth,
    /// `(d_i - d_{i-1}) / dt`.
    Backward,
    /// `(3 d_i - 4 d_{i-1} + d_{i-2}) / (2 dt)`, exact for constant acceleration.
    SecondOrder,
}

impl VelocityScheme {
    pub fn name(self) -> &'static str {
        match self {
            VelocityScheme::Truth => "truth",
            VelocityScheme::Backward => "backward",
            VelocityScheme::SecondOrder => "second_order",
        }
    }

    /// Number of leading frames without a velocity estimate.
    pub fn lag(self) -> usize {
        match self {
            VelocityScheme::SecondOrder => 2,
            _ => 1,
        }
    }
}

impl FromStr for VelocityScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [
            VelocityScheme::Truth,
            VelocityScheme::Backward,
            VelocityScheme::SecondOrder,
        ]
        .into_iter()
        .find(|v| v.name() == s)
        .ok_or_else(|| Error::Parse(format!("unknown velocity scheme `{s}`")))
    }
}

/// Backward differences; element `j` is the velocity at frame `j + 1`.
pub fn estimate_velocity(positions: &[Vec2], dt: f64) -> Result<Vec<Vec2>> {
    check_dt(dt)?;
    if positions.len() < 2 {
        return Err(Error::Degenerate("need at least 2 positions for velocity".into()));
    }
    Ok(positions.windows(2).map(|w| (w[1] - w[0]) * (1.0 / dt)).collect())
}

/// Second-order backward differences; element `j` is the velocity at frame `j + 2`.
pub fn estimate_velocity_second_order(positions: &[Vec2], dt: f64) -> Result<Vec<Vec2>> {
    check_dt(dt)?;
    if positions.len() < 3 {
        return Err(Error::Degenerate("need at least 3 positions for velocity".into()));
    }
    Ok(positions
        .windows(3)
        .map(|w| (w[2] * 3.0 - w[1] * 4.0 + w[0]) * (0.5 / dt))
        .collect())
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("dt must be positive, got {dt}")))
    }
}

/// Per-video constants attached to every row.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub m: f64,
    pub sin_theta: Option<f64>,
    pub cos_theta: Option<f64>,
}

impl SampleMeta {
    pub fn from_params(kind: ScenarioKind, params: &ScenarioParams) -> Result<Self> {
        let (sin_theta, cos_theta) = if kind == ScenarioKind::Slope {
            let (s, c) = params.theta.ok_or(Error::MissingParam("theta"))?.sin_cos();
            (Some(s), Some(c))
        } else {
            (None, None)
        };
        Ok(SampleMeta {
            m: params.m,
            sin_theta,
            cos_theta,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub d: Vec2,
    pub v: Vec2,
    pub dt: f64,
    pub meta: SampleMeta,
    /// Next-step displacement.
    pub dd: Vec2,
}

impl SampleRow {
    pub fn get(&self, f: Feature) -> Option<f64> {
        Some(match f {
            Feature::Dx => self.d.x,
            Feature::Dy => self.d.y,
            Feature::Vx => self.v.x,
            Feature::Vy => self.v.y,
            Feature::Mass => self.meta.m,
            Feature::Dt => self.dt,
            Feature::SinTheta => self.meta.sin_theta?,
            Feature::CosTheta => self.meta.cos_theta?,
        })
    }

    /// Feature value; NaN when the row does not carry it.
    pub fn feature(&self, f: Feature) -> f64 {
        self.get(f).unwrap_or(f64::NAN)
    }

    pub fn target(&self, c: Component) -> f64 {
        c.of(self.dd)
    }
}

/// Supervised rows `(features) -> (dd_x, dd_y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleTable {
    pub features: Vec<Feature>,
    pub rows: Vec<SampleRow>,
}

impl SampleTable {
    pub fn new(features: Vec<Feature>) -> Self {
        SampleTable {
            features,
            rows: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, f: Feature) -> Vec<f64> {
        self.rows.iter().map(|r| r.feature(f)).collect()
    }

    pub fn target(&self, c: Component) -> Vec<f64> {
        self.rows.iter().map(|r| r.target(c)).collect()
    }

    /// Row-major matrix of this table's features.
    pub fn matrix(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| self.features.iter().map(|&f| r.feature(f)).collect())
            .collect()
    }

    pub fn append(&mut self, other: &SampleTable) -> Result<()> {
        if other.features != self.features {
            return Err(Error::FeatureMismatch(format!(
                "cannot pool tables with features {:?} and {:?}",
                self.features, other.features
            )));
        }
        self.rows.extend_from_slice(&other.rows);
        Ok(())
    }

    pub fn subset(&self, idx: &[usize]) -> SampleTable {
        SampleTable {
            features: self.features.clone(),
            rows: idx.iter().map(|&i| self.rows[i]).collect(),
        }
    }
}

/// Turns an observation set into supervised rows.
///
/// Row `i` pairs the state at frame `i` with `d_{i+1} - d_i`. Rows start at
/// the first frame with a velocity estimate, so 100 positions give 98 rows
/// with backward or true velocities and 97 with second-order velocities.
pub fn build_samples(
    obs: &ObservationSet,
    kind: ScenarioKind,
    params: &ScenarioParams,
    scheme: VelocityScheme,
) -> Result<SampleTable> {
    let p = &obs.positions;
    let lag = scheme.lag();
    if p.len() < lag + 2 {
        return Err(Error::Degenerate(format!(
            "{} positions are too few for {} velocities",
            p.len(),
            scheme.name()
        )));
    }
    let velocities: Vec<Vec2> = match scheme {
        VelocityScheme::Truth => {
            let v = obs
                .velocities
                .as_ref()
                .ok_or_else(|| Error::Config("observation set has no recorded velocities".into()))?;
            if v.len() != p.len() {
                return Err(Error::Degenerate("velocity and position counts differ".into()));
            }
            v[1..].to_vec()
        }
        VelocityScheme::Backward => estimate_velocity(p, obs.dt)?,
        VelocityScheme::SecondOrder => estimate_velocity_second_order(p, obs.dt)?,
    };
    let meta = SampleMeta::from_params(kind, params)?;
    let rows = (lag..p.len() - 1)
        .map(|i| SampleRow {
            d: p[i],
            v: velocities[i - lag],
            dt: obs.dt,
            meta,
            dd: p[i + 1] - p[i],
        })
        .collect();
    Ok(SampleTable {
        features: Feature::for_kind(kind),
        rows,
    })
}

/// Writes `dx,dy,vx,vy,m,dt[,sin_theta,cos_theta],dd_x,dd_y`.
pub fn write_sample_table(table: &SampleTable, path: &Path) -> Result<()> {
    let mut header: Vec<&str> = table.features.iter().map(|f| f.column()).collect();
    header.extend(Component::BOTH.iter().map(|c| c.name()));
    let mut text = header.join(",");
    text.push('\n');
    for r in &table.rows {
        let mut cells: Vec<String> = table.features.iter().map(|&f| r.feature(f).to_string()).collect();
        cells.extend(Component::BOTH.iter().map(|&c| r.target(c).to_string()));
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    std::fs::write(path, text).map_err(Error::io(path))
}

pub fn read_sample_table(path: &Path) -> Result<SampleTable> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::Parse(format!("{}: empty file", path.display())))?
        .split(',')
        .collect();
    let n = header.len();
    if n < 3 || header[n - 2] != "dd_x" || header[n - 1] != "dd_y" {
        return Err(Error::Parse(format!(
            "{}: header must end with dd_x,dd_y",
            path.display()
        )));
    }
    let features = header[..n - 2]
        .iter()
        .map(|h| h.parse::<Feature>())
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (ln, line) in lines.enumerate() {
        let vals = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse(format!("{}:{}: {e}", path.display(), ln + 2)))?;
        if vals.len() != n {
            return Err(Error::Parse(format!(
                "{}:{}: expected {n} columns",
                path.display(),
                ln + 2
            )));
        }
        let get = |f: Feature| features.iter().position(|&g| g == f).map(|i| vals[i]);
        let req = |f: Feature| get(f).ok_or_else(|| Error::FeatureMismatch(format!("missing column {}", f.column())));
        rows.push(SampleRow {
            d: Vec2::new(req(Feature::Dx)?, req(Feature::Dy)?),
            v: Vec2::new(req(Feature::Vx)?, req(Feature::Vy)?),
            dt: req(Feature::Dt)?,
            meta: SampleMeta {
                m: req(Feature::Mass)?,
                sin_theta: get(Feature::SinTheta),
                cos_theta: get(Feature::CosTheta),
            },
            dd: Vec2::new(vals[n - 2], vals[n - 1]),
        });
    }
    Ok(SampleTable { features, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observer::ObserverMethod;
    use crate::world::{simulate, KinState};

    fn obs(positions: Vec<Vec2>, dt: f64) -> ObservationSet {
        let n = positions.len();
        ObservationSet {
            positions,
            velocities: None,
            dt,
            method: ObserverMethod::TwoStage,
            flagged: vec![false; n],
        }
    }

    #[test]
    fn backward_velocity_example() {
        let p = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 2.0), Vec2::new(3.0, 5.0)];
        let v = estimate_velocity(&p, 0.5).unwrap();
        assert_eq!(v, vec![Vec2::new(2.0, 4.0), Vec2::new(4.0, 6.0)]);
        assert!(estimate_velocity(&p, 0.0).is_err());
        assert!(estimate_velocity(&p[..1], 0.5).is_err());
    }

    #[test]
    fn backward_velocity_single_step() {
        let v = estimate_velocity(&[Vec2::new(9.0, 8.0), Vec2::new(10.0, 10.0)], 0.5).unwrap();
        assert_eq!(v, vec![Vec2::new(2.0, 4.0)]);
        let still = estimate_velocity(&[Vec2::new(1.0, 1.0); 4], 0.1).unwrap();
        assert!(still.iter().all(|v| *v == Vec2::ZERO));
    }

    #[test]
    fn second_order_velocity_is_exact_under_constant_acceleration() {
        let params = ScenarioParams::new(9.8, 1.0);
        let init = KinState {
            pos: Vec2::new(100.0, 3000.0),
            vel: Vec2::new(30.0, 20.0),
            t: 0.0,
        };
        let dt = 0.125;
        let traj = simulate(ScenarioKind::Parabola, &params, init, dt, 10).unwrap();
        let v = estimate_velocity_second_order(&traj.positions(), dt).unwrap();
        for (j, est) in v.iter().enumerate() {
            let truth = traj.states[j + 2].vel;
            assert!((*est - truth).norm() < 1e-9, "{est:?} vs {truth:?}");
        }
    }

    #[test]
    fn hundred_positions_give_ninety_eight_rows() {
        let p: Vec<Vec2> = (0..100).map(|i| Vec2::new(i as f64, 2.0 * i as f64)).collect();
        let t = build_samples(&obs(p.clone(), 0.1), ScenarioKind::Drift, &ScenarioParams::new(9.8, 2.0), VelocityScheme::Backward).unwrap();
        assert_eq!(t.len(), 98);
        assert_eq!(t.features, Feature::BASE.to_vec());
        assert_eq!(t.rows[0].d, p[1]);
        assert_eq!(t.rows[0].dd, p[2] - p[1]);
        let t2 = build_samples(&obs(p, 0.1), ScenarioKind::Drift, &ScenarioParams::new(9.8, 2.0), VelocityScheme::SecondOrder).unwrap();
        assert_eq!(t2.len(), 97);
    }

    #[test]
    fn truth_scheme_requires_velocities() {
        let p: Vec<Vec2> = (0..5).map(|i| Vec2::new(i as f64, 0.0)).collect();
        let err = build_samples(&obs(p, 0.1), ScenarioKind::Drift, &ScenarioParams::new(9.8, 1.0), VelocityScheme::Truth);
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn slope_rows_carry_angle_and_csv_round_trips() {
        let params = ScenarioParams::new(9.8, 3.0).with_theta(0.5);
        let init = KinState {
            pos: Vec2::new(500.0, 3000.0),
            vel: Vec2::new(40.0, -20.0),
            t: 0.0,
        };
        let traj = simulate(ScenarioKind::Slope, &params, init, 0.1, 20).unwrap();
        let set = ObservationSet::ground_truth(&traj);
        let t = build_samples(&set, ScenarioKind::Slope, &params, VelocityScheme::Truth).unwrap();
        assert_eq!(t.features.len(), 8);
        assert_eq!(t.rows[0].feature(Feature::SinTheta), 0.5f64.sin());
        assert_eq!(t.rows[0].v, traj.states[1].vel);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("samples.csv");
        write_sample_table(&t, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("dx,dy,vx,vy,m,dt,sin_theta,cos_theta,dd_x,dd_y\n"));
        assert_eq!(read_sample_table(&path).unwrap(), t);
    }

    #[test]
    fn pooling_requires_matching_features() {
        let mut a = SampleTable::new(Feature::for_kind(ScenarioKind::Drift));
        let b = SampleTable::new(Feature::for_kind(ScenarioKind::Slope));
        assert!(matches!(a.append(&b), Err(Error::FeatureMismatch(_))));
    }

    #[test]
    fn feature_names_parse() {
        for f in Feature::ALL {
            assert_eq!(f.name().parse::<Feature>().unwrap(), f);
            assert_eq!(f.column().parse::<Feature>().unwrap(), f);
        }
        assert!(matches!("q".parse::<Feature>(), Err(Error::UnknownVariable(_))));
    }
}

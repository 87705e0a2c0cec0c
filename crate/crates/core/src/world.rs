//! Scenario dynamics and trajectory simulation.
//!
//! Every scenario advances with the same discrete law
//!
//! ```text
//! pos' = pos + vel·dt + ½·a·dt²
//! vel' = vel + a·dt
//! ```
//!
//! where `a` is the scenario acceleration evaluated at the start of the step.
//! The integrator *is* this law rather than an approximation of an ODE, so
//! the displacement between any two consecutive frames is exactly the
//! expression symbolic regression is asked to recover.
//!
//! World coordinates have `y` pointing up; the renderer flips to image rows.

use std::fmt;
use std::fs;
use std::ops::{Add, Mul, Neg, Sub};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScenarioKind {
    Drift,
    FreeFall,
    Parabola,
    Slope,
    Spring,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [
        ScenarioKind::Drift,
        ScenarioKind::FreeFall,
        ScenarioKind::Parabola,
        ScenarioKind::Slope,
        ScenarioKind::Spring,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Drift => "drift",
            ScenarioKind::FreeFall => "freefall",
            ScenarioKind::Parabola => "parabola",
            ScenarioKind::Slope => "slope",
            ScenarioKind::Spring => "spring",
        }
    }

    /// Stable small integer used when deriving seeds.
    pub fn index(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "drift" => Ok(ScenarioKind::Drift),
            "freefall" | "free-fall" | "free_fall" => Ok(ScenarioKind::FreeFall),
            "parabola" => Ok(ScenarioKind::Parabola),
            "slope" => Ok(ScenarioKind::Slope),
            "spring" => Ok(ScenarioKind::Spring),
            other => Err(Error::Parse(format!("unknown scenario `{other}`"))),
        }
    }
}

/// Physical constants of one scenario instance.
///
/// Scenario-specific fields are optional; [`acceleration`] reports the first
/// missing one by name.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    /// Gravitational acceleration.
    pub g: f64,
    /// Slope inclination in radians.
    pub theta: Option<f64>,
    /// Hooke constant.
    pub k: Option<f64>,
    /// y-coordinate of the wall the spring is attached to.
    pub anchor_y: Option<f64>,
    /// Offset from the anchor to the spring's rest position.
    pub rest_offset: Option<f64>,
    pub m: f64,
}

impl ScenarioParams {
    pub fn new(g: f64, m: f64) -> Self {
        ScenarioParams {
            g,
            theta: None,
            k: None,
            anchor_y: None,
            rest_offset: None,
            m,
        }
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = Some(theta);
        self
    }

    pub fn with_spring(mut self, k: f64, anchor_y: f64, rest_offset: f64) -> Self {
        self.k = Some(k);
        self.anchor_y = Some(anchor_y);
        self.rest_offset = Some(rest_offset);
        self
    }

    /// Rest position of the spring, `D + X`.
    pub fn equilibrium_y(&self) -> Option<f64> {
        Some(self.anchor_y? + self.rest_offset?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KinState {
    pub pos: Vec2,
    pub vel: Vec2,
    pub t: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub states: Vec<KinState>,
    pub dt: f64,
    pub kind: ScenarioKind,
    pub params: ScenarioParams,
}

impl Trajectory {
    pub fn positions(&self) -> Vec<Vec2> {
        self.states.iter().map(|s| s.pos).collect()
    }

    pub fn velocities(&self) -> Vec<Vec2> {
        self.states.iter().map(|s| s.vel).collect()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

pub fn acceleration(kind: ScenarioKind, state: &KinState, params: &ScenarioParams) -> Result<Vec2> {
    match kind {
        ScenarioKind::Drift => Ok(Vec2::ZERO),
        ScenarioKind::FreeFall | ScenarioKind::Parabola => Ok(Vec2::new(0.0, -params.g)),
        ScenarioKind::Slope => {
            let theta = params.theta.ok_or(Error::MissingParam("theta"))?;
            let (s, c) = theta.sin_cos();
            Ok(Vec2::new(params.g * s * c, -params.g * s * s))
        }
        ScenarioKind::Spring => {
            let k = params.k.ok_or(Error::MissingParam("k"))?;
            let d = params.anchor_y.ok_or(Error::MissingParam("anchor_y"))?;
            let x = params.rest_offset.ok_or(Error::MissingParam("rest_offset"))?;
            Ok(Vec2::new(0.0, -k * (state.pos.y - d - x) / params.m))
        }
    }
}

/// Displacement over one step for a given start velocity and acceleration.
pub fn step_displacement(vel: Vec2, acc: Vec2, dt: f64) -> Vec2 {
    vel * dt + acc * (0.5 * dt * dt)
}

pub fn step(state: &KinState, kind: ScenarioKind, params: &ScenarioParams, dt: f64) -> Result<KinState> {
    if !(dt > 0.0) {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    let acc = acceleration(kind, state, params)?;
    let next = KinState {
        pos: state.pos + step_displacement(state.vel, acc, dt),
        vel: state.vel + acc * dt,
        t: state.t + dt,
    };
    if next.pos.is_finite() && next.vel.is_finite() && next.t.is_finite() {
        Ok(next)
    } else {
        Err(Error::NumericOverflow { t: state.t })
    }
}

pub fn simulate(
    kind: ScenarioKind,
    params: &ScenarioParams,
    init: KinState,
    dt: f64,
    n_frames: usize,
) -> Result<Trajectory> {
    if n_frames < 2 {
        return Err(Error::Config(format!("need at least 2 frames, got {n_frames}")));
    }
    let mut states = Vec::with_capacity(n_frames);
    states.push(init);
    for _ in 1..n_frames {
        let last = states.last().expect("nonempty");
        states.push(step(last, kind, params, dt)?);
    }
    Ok(Trajectory {
        states,
        dt,
        kind,
        params: *params,
    })
}

/// Sampling ranges and world geometry for [`sample_scenario`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    /// Side length of the square world `[0, extent]²`.
    pub extent: f64,
    /// Objects must stay at least this far from every world edge.
    pub margin: f64,
    pub n_frames: usize,
    pub g: f64,
    pub k: f64,
    pub anchor_y: f64,
    pub rest_offset: f64,
    pub dt_range: (f64, f64),
    pub speed_range: (f64, f64),
    pub mass_range: (f64, f64),
    pub theta_range: (f64, f64),
    /// Fraction of the world (centred) that initial positions are drawn from.
    pub spawn_fraction: f64,
    pub max_attempts: usize,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            extent: 4096.0,
            margin: 128.0,
            n_frames: 50,
            g: 9.8,
            k: 2.0,
            anchor_y: 2000.0,
            rest_offset: -1000.0,
            dt_range: (0.05, 0.2),
            speed_range: (50.0, 400.0),
            mass_range: (1.0, 5.0),
            theta_range: (0.1, 1.0),
            spawn_fraction: 0.6,
            max_attempts: 1000,
        }
    }
}

/// Time steps are snapped to this grid so that `t = i·dt` is exact in binary.
pub const DT_QUANTUM: f64 = 1.0 / 4096.0;

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if !(self.extent > 0.0) || !(self.margin >= 0.0) || 2.0 * self.margin >= self.extent {
            return bad("world extent must exceed twice the margin");
        }
        if self.n_frames < 2 {
            return bad("n_frames must be at least 2");
        }
        if !(self.g > 0.0 && self.k > 0.0) {
            return bad("g and k must be positive");
        }
        if !(self.dt_range.0 > 0.0 && self.dt_range.0 <= self.dt_range.1) {
            return bad("dt_range must be positive and ordered");
        }
        if !(self.mass_range.0 > 0.0 && self.mass_range.0 <= self.mass_range.1) {
            return bad("mass_range must be positive and ordered");
        }
        if !(self.speed_range.0 >= 0.0 && self.speed_range.0 <= self.speed_range.1) {
            return bad("speed_range must be non-negative and ordered");
        }
        let (lo, hi) = self.theta_range;
        if !(lo >= 0.05 && hi <= std::f64::consts::FRAC_PI_2 - 0.05 && lo <= hi) {
            return bad("theta_range must lie within [0.05, pi/2 - 0.05]");
        }
        if !(self.spawn_fraction > 0.0 && self.spawn_fraction <= 1.0) {
            return bad("spawn_fraction must be in (0, 1]");
        }
        Ok(())
    }

    fn contains(&self, kind: ScenarioKind, params: &ScenarioParams, p: Vec2) -> bool {
        let lo = self.margin;
        let hi = self.extent - self.margin;
        let inside = p.x >= lo && p.x <= hi && p.y >= lo && p.y <= hi;
        match (kind, params.anchor_y) {
            // a hanging object stays below the wall it hangs from
            (ScenarioKind::Spring, Some(wall)) => inside && p.y <= wall - self.margin,
            _ => inside,
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

fn signed_speed(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    let s = uniform(rng, range);
    if rng.random::<bool>() {
        s
    } else {
        -s
    }
}

/// Draws randomized initial conditions whose full trajectory stays in bounds.
///
/// Returns `(params, initial state, dt)`; deterministic in `seed`.
pub fn sample_scenario(
    kind: ScenarioKind,
    cfg: &WorldConfig,
    seed: u64,
) -> Result<(ScenarioParams, KinState, f64)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spawn_lo = cfg.extent * (1.0 - cfg.spawn_fraction) / 2.0;
    let spawn = (spawn_lo, cfg.extent - spawn_lo);

    for _ in 0..cfg.max_attempts {
        let dt_raw = uniform(&mut rng, cfg.dt_range);
        let dt = ((dt_raw / DT_QUANTUM).round() * DT_QUANTUM).max(DT_QUANTUM);
        let m = uniform(&mut rng, cfg.mass_range);
        let pos = Vec2::new(uniform(&mut rng, spawn), uniform(&mut rng, spawn));

        let mut params = ScenarioParams::new(cfg.g, m);
        let vel = match kind {
            ScenarioKind::Drift | ScenarioKind::Parabola => Vec2::new(
                signed_speed(&mut rng, cfg.speed_range),
                signed_speed(&mut rng, cfg.speed_range),
            ),
            ScenarioKind::FreeFall => Vec2::new(0.0, signed_speed(&mut rng, cfg.speed_range)),
            ScenarioKind::Slope => {
                let theta = uniform(&mut rng, cfg.theta_range);
                params = params.with_theta(theta);
                // along the incline; positive speed is downhill
                let speed = signed_speed(&mut rng, cfg.speed_range);
                Vec2::new(theta.cos(), -theta.sin()) * speed
            }
            ScenarioKind::Spring => {
                params = params.with_spring(cfg.k, cfg.anchor_y, cfg.rest_offset);
                Vec2::new(0.0, signed_speed(&mut rng, cfg.speed_range))
            }
        };

        let init = KinState { pos, vel, t: 0.0 };
        let Ok(traj) = simulate(kind, &params, init, dt, cfg.n_frames) else {
            continue;
        };
        if traj.states.iter().all(|s| cfg.contains(kind, &params, s.pos)) {
            return Ok((params, init, dt));
        }
    }
    Err(Error::Sampling {
        kind,
        attempts: cfg.max_attempts,
    })
}

/// Samples and simulates in one call.
pub fn sample_trajectory(kind: ScenarioKind, cfg: &WorldConfig, seed: u64) -> Result<Trajectory> {
    let (params, init, dt) = sample_scenario(kind, cfg, seed)?;
    simulate(kind, &params, init, dt, cfg.n_frames)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_else(|| "none".into())
}

/// Writes `frame,t,dx,dy,vx,vy` to `csv_path` and a `key=value` sidecar to `meta_path`.
pub fn export_trajectory(traj: &Trajectory, seed: u64, csv_path: &Path, meta_path: &Path) -> Result<()> {
    let mut out = String::from("frame,t,dx,dy,vx,vy\n");
    for (i, s) in traj.states.iter().enumerate() {
        out.push_str(&format!(
            "{i},{},{},{},{},{}\n",
            s.t, s.pos.x, s.pos.y, s.vel.x, s.vel.y
        ));
    }
    fs::write(csv_path, out).map_err(Error::io(csv_path))?;

    let p = &traj.params;
    let meta = format!(
        "kind={}\nm={}\ng={}\ntheta={}\nk={}\nanchor_y={}\nrest_offset={}\ndt={}\nseed={}\n",
        traj.kind,
        p.m,
        p.g,
        fmt_opt(p.theta),
        fmt_opt(p.k),
        fmt_opt(p.anchor_y),
        fmt_opt(p.rest_offset),
        traj.dt,
        seed
    );
    fs::write(meta_path, meta).map_err(Error::io(meta_path))
}

/// Reads back a trajectory written by [`export_trajectory`]; returns it with its seed.
pub fn import_trajectory(csv_path: &Path, meta_path: &Path) -> Result<(Trajectory, u64)> {
    let meta = fs::read_to_string(meta_path).map_err(Error::io(meta_path))?;
    let kv = crate::harness::config::parse_key_values(&meta)?;
    let get = |k: &str| {
        kv.get(k)
            .ok_or_else(|| Error::Parse(format!("{}: missing `{k}`", meta_path.display())))
    };
    let num = |k: &str| -> Result<f64> {
        get(k)?
            .parse::<f64>()
            .map_err(|e| Error::Parse(format!("{k}: {e}")))
    };
    let opt = |k: &str| -> Result<Option<f64>> {
        match get(k)?.as_str() {
            "none" => Ok(None),
            v => v.parse::<f64>().map(Some).map_err(|e| Error::Parse(format!("{k}: {e}"))),
        }
    };
    let params = ScenarioParams {
        g: num("g")?,
        theta: opt("theta")?,
        k: opt("k")?,
        anchor_y: opt("anchor_y")?,
        rest_offset: opt("rest_offset")?,
        m: num("m")?,
    };
    let kind: ScenarioKind = get("kind")?.parse()?;
    let dt = num("dt")?;
    let seed = get("seed")?
        .parse::<u64>()
        .map_err(|e| Error::Parse(format!("seed: {e}")))?;

    let text = fs::read_to_string(csv_path).map_err(Error::io(csv_path))?;
    let mut states = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        let cols: Vec<f64> = line
            .split(',')
            .skip(1)
            .map(|c| c.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("{}:{}: {e}", csv_path.display(), lineno + 1)))?;
        if cols.len() != 5 {
            return Err(Error::Parse(format!(
                "{}:{}: expected 6 columns",
                csv_path.display(),
                lineno + 1
            )));
        }
        states.push(KinState {
            t: cols[0],
            pos: Vec2::new(cols[1], cols[2]),
            vel: Vec2::new(cols[3], cols[4]),
        });
    }
    Ok((
        Trajectory {
            states,
            dt,
            kind,
            params,
        },
        seed,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn rest() -> KinState {
        KinState {
            pos: Vec2::new(100.0, 100.0),
            vel: Vec2::ZERO,
            t: 0.0,
        }
    }

    #[test]
    fn drift_has_no_acceleration() {
        let a = acceleration(ScenarioKind::Drift, &rest(), &ScenarioParams::new(9.8, 2.0)).unwrap();
        assert_eq!(a, Vec2::ZERO);
    }

    #[test]
    fn freefall_and_parabola_share_gravity() {
        let p = ScenarioParams::new(9.8, 1.0);
        for kind in [ScenarioKind::FreeFall, ScenarioKind::Parabola] {
            assert_eq!(acceleration(kind, &rest(), &p).unwrap(), Vec2::new(0.0, -9.8));
        }
    }

    #[test]
    fn slope_at_forty_five_degrees() {
        let p = ScenarioParams::new(9.8, 1.0).with_theta(FRAC_PI_4);
        let a = acceleration(ScenarioKind::Slope, &rest(), &p).unwrap();
        assert!((a.x - 4.9).abs() < 1e-12, "{a:?}");
        assert!((a.y + 4.9).abs() < 1e-12, "{a:?}");
    }

    #[test]
    fn spring_equilibrium_and_hand_value() {
        let p = ScenarioParams::new(9.8, 3.0).with_spring(2.0, -1500.0, 500.0);
        let mut s = rest();
        s.pos.y = -1000.0;
        assert_eq!(acceleration(ScenarioKind::Spring, &s, &p).unwrap(), Vec2::ZERO);

        let p = ScenarioParams::new(9.8, 1.0).with_spring(2.0, -1500.0, 500.0);
        s.pos.y = 0.0;
        assert_eq!(
            acceleration(ScenarioKind::Spring, &s, &p).unwrap(),
            Vec2::new(0.0, -2000.0)
        );
    }

    #[test]
    fn missing_parameters_are_named() {
        let p = ScenarioParams::new(9.8, 1.0);
        let err = acceleration(ScenarioKind::Slope, &rest(), &p).unwrap_err();
        assert!(matches!(err, Error::MissingParam("theta")));
        let err = acceleration(ScenarioKind::Spring, &rest(), &p).unwrap_err();
        assert!(matches!(err, Error::MissingParam("k")));
        let mut p = p;
        p.k = Some(2.0);
        p.anchor_y = Some(0.0);
        let err = acceleration(ScenarioKind::Spring, &rest(), &p).unwrap_err();
        assert!(err.to_string().contains("rest_offset"));
    }

    #[test]
    fn drift_step() {
        let s = KinState {
            pos: Vec2::new(10.0, 20.0),
            vel: Vec2::new(3.0, 4.0),
            t: 0.0,
        };
        let n = step(&s, ScenarioKind::Drift, &ScenarioParams::new(9.8, 1.0), 0.1).unwrap();
        let d = n.pos - s.pos;
        assert!((d.x - 0.3).abs() < 1e-12 && (d.y - 0.4).abs() < 1e-12);
        assert_eq!(n.vel, s.vel);
        assert_eq!(n.t, 0.1);
    }

    #[test]
    fn freefall_step_from_rest() {
        let s = KinState {
            pos: Vec2::new(0.0, 0.0),
            vel: Vec2::ZERO,
            t: 0.0,
        };
        let n = step(&s, ScenarioKind::FreeFall, &ScenarioParams::new(9.8, 1.0), 1.0).unwrap();
        assert_eq!(n.pos, Vec2::new(0.0, -4.9));
        assert_eq!(n.vel, Vec2::new(0.0, -9.8));
    }

    #[test]
    fn spring_at_rest_stays_put() {
        let p = ScenarioParams::new(9.8, 2.5).with_spring(2.0, 2000.0, -1000.0);
        let s = KinState {
            pos: Vec2::new(700.0, 1000.0),
            vel: Vec2::ZERO,
            t: 0.0,
        };
        let traj = simulate(ScenarioKind::Spring, &p, s, 0.125, 20).unwrap();
        for st in &traj.states {
            assert_eq!(st.pos, s.pos);
            assert_eq!(st.vel, Vec2::ZERO);
        }
        assert_eq!(traj.states[19].t, 19.0 * 0.125);
    }

    #[test]
    fn step_rejects_bad_dt_and_overflow() {
        let p = ScenarioParams::new(9.8, 1.0);
        assert!(matches!(
            step(&rest(), ScenarioKind::Drift, &p, 0.0),
            Err(Error::Config(_))
        ));
        let fast = KinState {
            pos: Vec2::ZERO,
            vel: Vec2::new(f64::MAX, 0.0),
            t: 0.0,
        };
        assert!(matches!(
            step(&fast, ScenarioKind::Drift, &p, 10.0),
            Err(Error::NumericOverflow { .. })
        ));
    }

    #[test]
    fn simulate_lengths() {
        let p = ScenarioParams::new(9.8, 1.0);
        let t = simulate(ScenarioKind::Drift, &p, rest(), 0.1, 100).unwrap();
        assert_eq!(t.len(), 100);
        let t = simulate(ScenarioKind::Drift, &p, rest(), 0.1, 2).unwrap();
        assert_eq!(t.len(), 2);
        assert!(simulate(ScenarioKind::Drift, &p, rest(), 0.1, 1).is_err());
    }

    #[test]
    fn drift_closed_form() {
        let init = KinState {
            pos: Vec2::new(512.0, 1024.0),
            vel: Vec2::new(37.25, -120.5),
            t: 0.0,
        };
        let dt = 0.125;
        let traj = simulate(ScenarioKind::Drift, &ScenarioParams::new(9.8, 1.0), init, dt, 60).unwrap();
        for (i, s) in traj.states.iter().enumerate() {
            let want = init.pos + init.vel * (i as f64 * dt);
            assert!((s.pos - want).norm() < 1e-9, "frame {i}");
        }
    }

    #[test]
    fn sampling_is_deterministic_and_in_bounds() {
        let cfg = WorldConfig::default();
        for kind in ScenarioKind::ALL {
            let a = sample_scenario(kind, &cfg, 42).unwrap();
            let b = sample_scenario(kind, &cfg, 42).unwrap();
            assert_eq!(a, b);
            let traj = sample_trajectory(kind, &cfg, 42).unwrap();
            for s in &traj.states {
                assert!(cfg.contains(kind, &traj.params, s.pos), "{kind}: {s:?}");
            }
            assert!(traj.dt >= 0.05 - DT_QUANTUM && traj.dt <= 0.2 + DT_QUANTUM);
            assert_eq!((traj.dt / DT_QUANTUM).fract(), 0.0);
        }
    }

    #[test]
    fn slope_theta_range_over_many_seeds() {
        let cfg = WorldConfig::default();
        for seed in 0..1000 {
            let (p, init, _) = sample_scenario(ScenarioKind::Slope, &cfg, seed).unwrap();
            let th = p.theta.unwrap();
            assert!((0.1..=1.0).contains(&th), "seed {seed}: {th}");
            // initial velocity runs along the incline
            let along = Vec2::new(th.cos(), -th.sin());
            let cross = init.vel.x * along.y - init.vel.y * along.x;
            assert!(cross.abs() < 1e-9 * init.vel.norm());
        }
    }

    #[test]
    fn trajectory_export_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let traj = sample_trajectory(ScenarioKind::Slope, &WorldConfig::default(), 9).unwrap();
        let csv = dir.path().join("t.csv");
        let meta = dir.path().join("t.meta");
        export_trajectory(&traj, 9, &csv, &meta).unwrap();
        let text = std::fs::read_to_string(&csv).unwrap();
        assert!(text.starts_with("frame,t,dx,dy,vx,vy\n"));
        let (back, seed) = import_trajectory(&csv, &meta).unwrap();
        assert_eq!(seed, 9);
        assert_eq!(back, traj);
    }
}

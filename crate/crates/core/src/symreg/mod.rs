//! Genetic-programming symbolic regression.
//!
//! [`evolve`] searches for a tree predicting one displacement component from
//! a [`SampleTable`]. Each generation is bred by tournament selection and one
//! genetic operator per child; every child draws from its own random stream
//! derived from `(seed, generation, index)`, so results do not depend on the
//! number of threads. The constants of the most promising trees are refined
//! in place by Nelder–Mead on a row subsample, and the final winner is tuned
//! on all rows and simplified into a canonical polynomial.

pub mod expr;
pub mod ops;
pub mod simplify;
pub mod tune;

pub use expr::{BinOp, Columns, Expr};
pub use ops::TreeSpace;
pub use simplify::{match_form, simplify, simplify_checked, FormMatch, Poly};
pub use tune::{nelder_mead, tune_constants};

use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::mae;
use crate::observer::{Component, SampleTable};
use crate::seed::derive;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpConfig {
    pub population_size: usize,
    pub generations: usize,
    pub tournament_size: usize,
    pub p_crossover: f64,
    pub p_subtree_mut: f64,
    pub p_hoist_mut: f64,
    pub p_point_mut: f64,
    /// Per-node replacement probability inside point mutation.
    pub p_point_replace: f64,
    pub init_depth: (usize, usize),
    pub max_depth: usize,
    pub const_range: (f64, f64),
    /// Per-node fitness penalty; `None` derives it from the table.
    pub parsimony_coeff: Option<f64>,
    /// Early-stop threshold on raw MAE; `None` derives it from the table.
    pub stop_mae: Option<f64>,
    pub seed: u64,
    /// Best individuals whose constants are refined each generation.
    pub tune_top: usize,
    /// Fraction of the remaining population refined each generation.
    pub tune_fraction: f64,
    pub tune_iterations: usize,
    /// Rows used for in-loop refinement.
    pub tune_rows: usize,
    pub final_tune_iterations: usize,
}

impl Default for GpConfig {
    fn default() -> Self {
        GpConfig {
            population_size: 2000,
            generations: 60,
            tournament_size: 7,
            p_crossover: 0.5,
            p_subtree_mut: 0.15,
            p_hoist_mut: 0.15,
            p_point_mut: 0.15,
            p_point_replace: 0.05,
            init_depth: (2, 6),
            max_depth: 10,
            const_range: (-1.0, 1.0),
            parsimony_coeff: None,
            stop_mae: None,
            seed: 0,
            tune_top: 20,
            tune_fraction: 0.2,
            tune_iterations: 60,
            tune_rows: 128,
            final_tune_iterations: 200,
        }
    }
}

impl GpConfig {
    pub fn p_reproduce(&self) -> f64 {
        1.0 - self.p_crossover - self.p_subtree_mut - self.p_hoist_mut - self.p_point_mut
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let probs = [
            ("p_crossover", self.p_crossover),
            ("p_subtree_mut", self.p_subtree_mut),
            ("p_hoist_mut", self.p_hoist_mut),
            ("p_point_mut", self.p_point_mut),
            ("p_point_replace", self.p_point_replace),
            ("tune_fraction", self.tune_fraction),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        if self.p_reproduce() < -1e-12 {
            return bad("operator probabilities sum above 1".into());
        }
        if self.tournament_size == 0 || self.population_size < 2 * self.tournament_size {
            return bad("population_size must be at least twice tournament_size".into());
        }
        let (lo, hi) = self.init_depth;
        if lo > hi || hi > self.max_depth {
            return bad("init_depth must be ordered and within max_depth".into());
        }
        let (clo, chi) = self.const_range;
        if !(clo.is_finite() && chi.is_finite() && clo <= chi) {
            return bad("const_range must be finite and ordered".into());
        }
        if matches!(self.parsimony_coeff, Some(p) if !(p >= 0.0)) {
            return bad("parsimony_coeff must be non-negative".into());
        }
        Ok(())
    }

    fn space(&self, table: &SampleTable) -> TreeSpace {
        TreeSpace {
            features: table.features.clone(),
            const_range: self.const_range,
            max_depth: self.max_depth,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub expr: Expr,
    pub raw_mae: f64,
    pub fitness: f64,
}

impl Individual {
    fn score(expr: Expr, data: &Columns, target: &[f64], parsimony: f64) -> Individual {
        let raw_mae = expr
            .eval_columns(data)
            .ok()
            .and_then(|p| mae(&p, target).ok())
            .filter(|m| m.is_finite())
            .unwrap_or(f64::INFINITY);
        let fitness = raw_mae + parsimony * expr.size() as f64;
        Individual { expr, raw_mae, fitness }
    }
}

/// Raw MAE and fitness of `e` on a table.
pub fn fitness(e: &Expr, table: &SampleTable, target: Component, parsimony: f64) -> Result<(f64, f64)> {
    if table.is_empty() {
        return Err(Error::Degenerate("empty sample table".into()));
    }
    let data = Columns::from_table(table);
    let pred = e.eval_columns(&data)?;
    let raw = mae(&pred, &table.target(target))?;
    Ok((raw, raw + parsimony * e.size() as f64))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Best evolved tree before final tuning.
    pub raw: Expr,
    /// Best tree after final constant tuning, scored on the training table.
    pub best: Individual,
    pub simplified: Expr,
    pub infix: String,
    pub sexpr: String,
    pub generations_run: usize,
    /// Best-ever raw MAE after initialization and after each generation.
    pub mae_history: Vec<f64>,
    pub parsimony_coeff: f64,
}

impl FitResult {
    pub fn predict(&self, table: &SampleTable) -> Result<Vec<f64>> {
        self.simplified.eval_columns(&Columns::from_table(table))
    }

    /// Plain-text report plus a `generation,best_mae` history CSV.
    pub fn write_report(&self, report: &Path, history_csv: &Path) -> Result<()> {
        let text = format!(
            "infix: {}\nsexpr: {}\nraw: {}\ntrain_mae: {}\nsize: {}\ngenerations: {}\nparsimony: {}\n",
            self.infix,
            self.sexpr,
            self.raw.to_sexpr(),
            self.best.raw_mae,
            self.best.expr.size(),
            self.generations_run,
            self.parsimony_coeff
        );
        std::fs::write(report, text).map_err(Error::io(report))?;
        let mut csv = String::from("generation,best_mae\n");
        for (g, m) in self.mae_history.iter().enumerate() {
            csv.push_str(&format!("{g},{m}\n"));
        }
        std::fs::write(history_csv, csv).map_err(Error::io(history_csv))
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Default parsimony: 1e-6 times the MAE of the best constant predictor.
pub fn default_parsimony(target: &[f64]) -> f64 {
    let m = median(target);
    1e-6 * target.iter().map(|t| (t - m).abs()).sum::<f64>() / target.len() as f64
}

fn tournament<'a>(pop: &'a [Individual], k: usize, rng: &mut impl Rng) -> &'a Individual {
    let mut best = rng.random_range(0..pop.len());
    for _ in 1..k {
        let i = rng.random_range(0..pop.len());
        if pop[i].fitness < pop[best].fitness || (pop[i].fitness == pop[best].fitness && i < best) {
            best = i;
        }
    }
    &pop[best]
}

fn best_index(pop: &[Individual]) -> usize {
    (0..pop.len())
        .min_by(|&a, &b| pop[a].fitness.total_cmp(&pop[b].fitness).then(a.cmp(&b)))
        .expect("nonempty population")
}

/// Stream tags separating the uses of the master seed.
const STREAM_INIT: u64 = 0;
const STREAM_BREED: u64 = 1;
const STREAM_TUNE: u64 = 2;

pub fn evolve(table: &SampleTable, target: Component, cfg: &GpConfig) -> Result<FitResult> {
    cfg.validate()?;
    if table.len() < 10 {
        return Err(Error::Degenerate(format!(
            "symbolic regression needs at least 10 rows, got {}",
            table.len()
        )));
    }
    let y = table.target(target);
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("non-finite target".into()));
    }
    let data = Columns::from_table(table);
    if table
        .features
        .iter()
        .any(|&f| data.column(f).is_some_and(|c| c.iter().any(|v| !v.is_finite())))
    {
        return Err(Error::Degenerate("non-finite feature value".into()));
    }
    let space = cfg.space(table);
    let parsimony = cfg.parsimony_coeff.unwrap_or_else(|| default_parsimony(&y));
    let mean_abs = y.iter().map(|v| v.abs()).sum::<f64>() / y.len() as f64;
    let stop = cfg.stop_mae.unwrap_or(1e-10 * mean_abs);

    let mut pop: Vec<Individual> = (0..cfg.population_size)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive(cfg.seed, &[STREAM_INIT, i as u64]));
            let e = ops::random_tree(&space, cfg.init_depth, &mut rng);
            Individual::score(e, &data, &y, parsimony)
        })
        .collect();

    let mut champion = pop[best_index(&pop)].clone();
    let mut best_raw = pop.iter().map(|p| p.raw_mae).fold(f64::INFINITY, f64::min);
    let mut history = vec![best_raw];
    let mut generations_run = 0;

    for gen in 1..=cfg.generations {
        if best_raw <= stop {
            break;
        }
        refine_population(&mut pop, &data, &y, parsimony, cfg, gen);
        let elite = pop[best_index(&pop)].clone();
        let parents = &pop;
        let mut next: Vec<Individual> = (1..cfg.population_size)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive(cfg.seed, &[STREAM_BREED, gen as u64, i as u64]));
                breed(parents, &space, cfg, &data, &y, parsimony, &mut rng)
            })
            .collect();
        next.insert(0, elite);
        pop = next;
        generations_run = gen;

        let gen_best = &pop[best_index(&pop)];
        if gen_best.fitness < champion.fitness {
            champion = gen_best.clone();
        }
        best_raw = pop.iter().map(|p| p.raw_mae).fold(best_raw, f64::min);
        history.push(best_raw);
    }

    let raw = champion.expr.clone();
    let tuned = tune_constants(&raw, &data, &y, cfg.final_tune_iterations);
    let tuned = Individual::score(tuned, &data, &y, parsimony);
    let best = if tuned.raw_mae <= champion.raw_mae { tuned } else { champion };
    let simplified = simplify_checked(&best.expr, &data);
    Ok(FitResult {
        raw,
        infix: simplified.to_infix(),
        sexpr: simplified.to_sexpr(),
        simplified,
        best,
        generations_run,
        mae_history: history,
        parsimony_coeff: parsimony,
    })
}

fn breed(
    pop: &[Individual],
    space: &TreeSpace,
    cfg: &GpConfig,
    data: &Columns,
    y: &[f64],
    parsimony: f64,
    rng: &mut ChaCha8Rng,
) -> Individual {
    let parent = tournament(pop, cfg.tournament_size, rng);
    let r: f64 = rng.random();
    let cumulative = [
        cfg.p_crossover,
        cfg.p_crossover + cfg.p_subtree_mut,
        cfg.p_crossover + cfg.p_subtree_mut + cfg.p_hoist_mut,
        cfg.p_crossover + cfg.p_subtree_mut + cfg.p_hoist_mut + cfg.p_point_mut,
    ];
    let child = match cumulative.iter().position(|&c| r < c) {
        Some(0) => {
            let donor = tournament(pop, cfg.tournament_size, rng);
            ops::crossover(&parent.expr, &donor.expr, cfg.max_depth, rng)
        }
        Some(1) => ops::subtree_mutation(&parent.expr, space, rng),
        Some(2) => ops::hoist_mutation(&parent.expr, rng),
        Some(_) => ops::point_mutation(&parent.expr, space, cfg.p_point_replace, rng),
        None => return parent.clone(),
    };
    Individual::score(child, data, y, parsimony)
}

/// Lamarckian constant refinement of the best and a random sample of the rest.
fn refine_population(pop: &mut [Individual], data: &Columns, y: &[f64], parsimony: f64, cfg: &GpConfig, gen: usize) {
    if cfg.tune_iterations == 0 || (cfg.tune_top == 0 && cfg.tune_fraction == 0.0) {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive(cfg.seed, &[STREAM_TUNE, gen as u64]));
    let mut order: Vec<usize> = (0..pop.len()).collect();
    order.sort_by(|&a, &b| pop[a].fitness.total_cmp(&pop[b].fitness).then(a.cmp(&b)));
    let top = cfg.tune_top.min(pop.len());
    let mut chosen: Vec<usize> = order[..top].to_vec();
    let rest = &order[top..];
    let extra = ((rest.len() as f64) * cfg.tune_fraction).round() as usize;
    if extra > 0 {
        chosen.extend(sample(&mut rng, rest.len(), extra).into_iter().map(|j| rest[j]));
    }
    chosen.retain(|&i| !pop[i].expr.constants().is_empty() && pop[i].raw_mae.is_finite());

    let rows: Vec<usize> = if data.len() > cfg.tune_rows && cfg.tune_rows > 0 {
        let mut idx = sample(&mut rng, data.len(), cfg.tune_rows).into_vec();
        idx.sort_unstable();
        idx
    } else {
        (0..data.len()).collect()
    };
    let sub = data.subset(&rows);
    let sub_y: Vec<f64> = rows.iter().map(|&i| y[i]).collect();

    let refined: Vec<(usize, Individual)> = chosen
        .par_iter()
        .map(|&i| {
            let e = tune_constants(&pop[i].expr, &sub, &sub_y, cfg.tune_iterations);
            (i, Individual::score(e, data, y, parsimony))
        })
        .collect();
    for (i, ind) in refined {
        if ind.fitness < pop[i].fitness {
            pop[i] = ind;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observer::{build_samples, ObservationSet, VelocityScheme};
    use crate::world::{sample_trajectory, ScenarioKind, WorldConfig};

    fn gt_table(kind: ScenarioKind, videos: u64) -> SampleTable {
        let cfg = WorldConfig::default();
        let mut table = SampleTable::new(crate::observer::Feature::for_kind(kind));
        for s in 0..videos {
            let traj = sample_trajectory(kind, &cfg, 1000 + s).unwrap();
            let obs = ObservationSet::ground_truth(&traj);
            table
                .append(&build_samples(&obs, kind, &traj.params, VelocityScheme::Truth).unwrap())
                .unwrap();
        }
        table
    }

    fn small() -> GpConfig {
        GpConfig {
            population_size: 300,
            generations: 15,
            ..GpConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(GpConfig::default().validate().is_ok());
        assert!((GpConfig::default().p_reproduce() - 0.05).abs() < 1e-12);
        let bad = GpConfig {
            p_crossover: 0.9,
            ..GpConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = GpConfig {
            population_size: 13,
            ..GpConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn fitness_examples() {
        let table = gt_table(ScenarioKind::Drift, 2);
        let exact = Expr::mul(Expr::Var(crate::observer::Feature::Vx), Expr::Var(crate::observer::Feature::Dt));
        let (raw, fit) = fitness(&exact, &table, Component::X, 0.0).unwrap();
        assert!(raw <= 1e-9);
        assert_eq!(raw, fit);
        let y = table.target(Component::X);
        let (raw, fit) = fitness(&Expr::Const(2.5), &table, Component::X, 0.1).unwrap();
        let expected = y.iter().map(|t| (2.5 - t).abs()).sum::<f64>() / y.len() as f64;
        assert!((raw - expected).abs() < 1e-12);
        assert!((fit - raw - 0.1).abs() < 1e-12);
    }

    #[test]
    fn too_few_rows_is_an_error() {
        let mut table = gt_table(ScenarioKind::Drift, 1);
        table.rows.truncate(5);
        assert!(matches!(evolve(&table, Component::X, &small()), Err(Error::Degenerate(_))));
    }

    #[test]
    fn drift_is_recovered_and_deterministic() {
        let table = gt_table(ScenarioKind::Drift, 5);
        let a = evolve(&table, Component::X, &small()).unwrap();
        assert_eq!(a.infix, "v_x*dt", "{a:?}");
        assert!(a.mae_history.windows(2).all(|w| w[1] <= w[0]));
        let b = evolve(&table, Component::X, &small()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn free_fall_constant_is_half_g() {
        let table = gt_table(ScenarioKind::FreeFall, 5);
        let cfg = GpConfig {
            population_size: 500,
            generations: 20,
            seed: 3,
            ..GpConfig::default()
        };
        let r = evolve(&table, Component::Y, &cfg).unwrap();
        use crate::observer::Feature::*;
        let y = table.target(Component::Y);
        let scale = y.iter().map(|v| v.abs()).sum::<f64>() / y.len() as f64;
        let fm = match_form(&r.simplified, &[&[(Vy, 1), (Dt, 1)], &[(Dt, 2)]], &Columns::from_table(&table), scale).unwrap();
        assert!(fm.holds(1e-9), "{}", r.infix);
        assert!((fm.coefficients[0] - 1.0).abs() < 1e-6, "{}", r.infix);
        assert!((fm.coefficients[1] + 4.9).abs() < 0.049, "{}", r.infix);
    }
}

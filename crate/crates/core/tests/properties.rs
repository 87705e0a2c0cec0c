//! Seed-independent invariants checked over random inputs.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use physlaw::metrics::{mapa, med, r2};
use physlaw::observer::Feature;
use physlaw::symreg::ops::{crossover, hoist_mutation, point_mutation, random_tree, shape, subtree_mutation};
use physlaw::symreg::simplify::equivalent_on;
use physlaw::symreg::{simplify, simplify_checked, Columns, Expr, TreeSpace};
use physlaw::world::{
    acceleration, sample_trajectory, simulate, step_displacement, KinState, ScenarioKind, ScenarioParams, Vec2,
    WorldConfig,
};

fn ulps(a: f64, b: f64) -> u64 {
    let key = |x: f64| {
        let bits = x.to_bits() as i64;
        if bits < 0 {
            i64::MIN - bits
        } else {
            bits
        }
    };
    key(a).abs_diff(key(b))
}

fn kind() -> impl Strategy<Value = ScenarioKind> {
    prop::sample::select(ScenarioKind::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn step_law_holds_to_four_ulps(kind in kind(), seed in any::<u64>()) {
        let traj = sample_trajectory(kind, &WorldConfig::default(), seed).unwrap();
        for w in traj.states.windows(2) {
            let acc = acceleration(kind, &w[0], &traj.params).unwrap();
            let expected = w[0].pos + step_displacement(w[0].vel, acc, traj.dt);
            prop_assert!(ulps(w[1].pos.x, expected.x) <= 4, "x {} vs {}", w[1].pos.x, expected.x);
            prop_assert!(ulps(w[1].pos.y, expected.y) <= 4, "y {} vs {}", w[1].pos.y, expected.y);
        }
    }

    #[test]
    fn conserved_velocities(kind in kind(), seed in any::<u64>()) {
        let traj = sample_trajectory(kind, &WorldConfig::default(), seed).unwrap();
        let v0 = traj.states[0].vel;
        for s in &traj.states {
            match kind {
                ScenarioKind::Drift => prop_assert_eq!(s.vel, v0),
                ScenarioKind::FreeFall | ScenarioKind::Parabola => prop_assert_eq!(s.vel.x, v0.x),
                _ => {}
            }
        }
    }

    #[test]
    fn slope_acceleration_ratio_is_minus_cotangent(theta in 0.1f64..1.0, m in 1.0f64..5.0) {
        let p = ScenarioParams::new(9.8, m).with_theta(theta);
        let s = KinState { pos: Vec2::new(100.0, 100.0), vel: Vec2::ZERO, t: 0.0 };
        let a = acceleration(ScenarioKind::Slope, &s, &p).unwrap();
        let want = -theta.cos() / theta.sin();
        prop_assert!((a.x / a.y - want).abs() <= 1e-12 * want.abs());
    }

    #[test]
    fn spring_at_equilibrium_never_moves(m in 1.0f64..5.0, dt in 0.05f64..0.2, x in 200.0f64..3000.0) {
        let p = ScenarioParams::new(9.8, m).with_spring(2.0, 2000.0, -1000.0);
        let y = p.equilibrium_y().unwrap();
        let init = KinState { pos: Vec2::new(x, y), vel: Vec2::ZERO, t: 0.0 };
        let traj = simulate(ScenarioKind::Spring, &p, init, dt, 30).unwrap();
        prop_assert!(traj.states.iter().all(|s| s.pos == init.pos));
    }

    #[test]
    fn sampling_is_bitwise_deterministic(kind in kind(), seed in any::<u64>()) {
        let cfg = WorldConfig::default();
        prop_assert_eq!(sample_trajectory(kind, &cfg, seed).unwrap(), sample_trajectory(kind, &cfg, seed).unwrap());
    }
}

fn space() -> TreeSpace {
    TreeSpace {
        features: Feature::for_kind(ScenarioKind::Slope),
        const_range: (-1.0, 1.0),
        max_depth: 8,
    }
}

fn valid(e: &Expr, s: &TreeSpace) -> bool {
    e.is_valid(&s.features, s.max_depth)
}

proptest! {
    // Four operators per case: 10 000 applications in total.
    #![proptest_config(ProptestConfig::with_cases(2500))]

    #[test]
    fn genetic_operators_preserve_validity(seed in any::<u64>()) {
        let s = space();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_tree(&s, (0, 6), &mut rng);
        let b = random_tree(&s, (0, 6), &mut rng);
        prop_assert!(valid(&a, &s) && valid(&b, &s));

        let child = crossover(&a, &b, s.max_depth, &mut rng);
        prop_assert!(valid(&child, &s));

        let mutant = subtree_mutation(&a, &s, &mut rng);
        prop_assert!(valid(&mutant, &s));

        let hoisted = hoist_mutation(&a, &mut rng);
        prop_assert!(valid(&hoisted, &s));
        prop_assert!(hoisted.size() <= a.size());

        let pointed = point_mutation(&a, &s, 0.3, &mut rng);
        prop_assert!(valid(&pointed, &s));
        prop_assert_eq!(shape(&pointed), shape(&a));
    }
}

fn random_columns(features: &[Feature], rows: usize, rng: &mut impl Rng) -> Columns {
    Columns::from_columns(
        features
            .iter()
            .map(|&f| (f, (0..rows).map(|_| rng.random_range(0.5..2.0)).collect()))
            .collect(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn evaluation_is_always_finite(seed in any::<u64>(), x in -1e6f64..1e6, y in -1e6f64..1e6) {
        let s = space();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = random_tree(&s, (0, 8), &mut rng);
        let v = e.eval_with(&|f| Some(if f.index() % 2 == 0 { x } else { y })).unwrap();
        prop_assert!(v.is_finite());
    }

    #[test]
    fn sexpr_round_trips(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = random_tree(&space(), (0, 8), &mut rng);
        prop_assert_eq!(Expr::parse_sexpr(&e.to_sexpr()).unwrap(), e);
    }

    #[test]
    fn simplify_is_numerically_equivalent_without_division(seed in any::<u64>()) {
        let s = space();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut e = random_tree(&s, (0, 4), &mut rng);
        while e.to_sexpr().contains('/') {
            e = random_tree(&s, (0, 4), &mut rng);
        }
        let data = random_columns(&s.features, 32, &mut rng);
        prop_assert!(equivalent_on(&simplify(&e), &e, &data, 1e-9), "{}", e.to_sexpr());
    }

    #[test]
    fn checked_simplify_is_numerically_equivalent(seed in any::<u64>()) {
        let s = space();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = random_tree(&s, (0, 6), &mut rng);
        let data = random_columns(&s.features, 32, &mut rng);
        prop_assert!(equivalent_on(&simplify_checked(&e, &data), &e, &data, 1e-9), "{}", e.to_sexpr());
    }
}

fn nonzero() -> impl Strategy<Value = f64> {
    prop_oneof![1e-3f64..1e4, -1e4f64..-1e-3]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn self_scores_are_exactly_one(x in prop::collection::vec(nonzero(), 2..64)) {
        prop_assert_eq!(mapa(&x, &x).unwrap(), 1.0);
        if x.iter().any(|v| *v != x[0]) {
            prop_assert_eq!(r2(&x, &x).unwrap(), 1.0);
        }
    }

    #[test]
    fn metrics_ignore_sample_order(
        pairs in prop::collection::vec((nonzero(), nonzero()), 2..64),
        shuffle in any::<u64>(),
    ) {
        let (e, t): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
        let mut idx: Vec<usize> = (0..e.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(shuffle);
        for i in (1..idx.len()).rev() {
            idx.swap(i, rng.random_range(0..=i));
        }
        let ep: Vec<f64> = idx.iter().map(|&i| e[i]).collect();
        let tp: Vec<f64> = idx.iter().map(|&i| t[i]).collect();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()));
        prop_assert!(close(mapa(&e, &t).unwrap(), mapa(&ep, &tp).unwrap()));
        if let (Ok(a), Ok(b)) = (r2(&e, &t), r2(&ep, &tp)) {
            prop_assert!(close(a, b));
        }
        let pe: Vec<Vec2> = e.iter().zip(&t).map(|(a, b)| Vec2::new(*a, *b)).collect();
        let pt: Vec<Vec2> = t.iter().zip(&e).map(|(a, b)| Vec2::new(*a, *b)).collect();
        let pep: Vec<Vec2> = idx.iter().map(|&i| pe[i]).collect();
        let ptp: Vec<Vec2> = idx.iter().map(|&i| pt[i]).collect();
        prop_assert!(close(med(&pe, &pt).unwrap(), med(&pep, &ptp).unwrap()));
    }

    #[test]
    fn med_is_translation_invariant(
        pairs in prop::collection::vec(((-1e3f64..1e3, -1e3f64..1e3), (-1e3f64..1e3, -1e3f64..1e3)), 1..32),
        dx in -1e3f64..1e3,
        dy in -1e3f64..1e3,
    ) {
        let e: Vec<Vec2> = pairs.iter().map(|p| Vec2::new(p.0 .0, p.0 .1)).collect();
        let t: Vec<Vec2> = pairs.iter().map(|p| Vec2::new(p.1 .0, p.1 .1)).collect();
        let shift = Vec2::new(dx, dy);
        let es: Vec<Vec2> = e.iter().map(|&p| p + shift).collect();
        let ts: Vec<Vec2> = t.iter().map(|&p| p + shift).collect();
        let (a, b) = (med(&e, &t).unwrap(), med(&es, &ts).unwrap());
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a));
    }
}

#[test]
fn med_three_four_five() {
    assert_eq!(med(&[Vec2::new(3.0, 4.0)], &[Vec2::ZERO]).unwrap(), 5.0);
}

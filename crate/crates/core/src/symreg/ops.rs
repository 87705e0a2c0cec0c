//! Random tree generation and the four genetic operators.

use rand::Rng;

use super::expr::{BinOp, Expr};
use crate::observer::Feature;

/// Probability that a fresh leaf is a variable rather than a constant.
pub const P_VARIABLE_LEAF: f64 = 0.8;

/// Everything the operators need to know about the search space.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeSpace {
    pub features: Vec<Feature>,
    pub const_range: (f64, f64),
    pub max_depth: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitMethod {
    Full,
    Grow,
}

pub fn random_leaf(space: &TreeSpace, rng: &mut impl Rng) -> Expr {
    if space.features.is_empty() || !rng.random_bool(P_VARIABLE_LEAF) {
        let (lo, hi) = space.const_range;
        Expr::Const(if lo < hi { rng.random_range(lo..hi) } else { lo })
    } else {
        Expr::Var(space.features[rng.random_range(0..space.features.len())])
    }
}

pub fn random_op(rng: &mut impl Rng) -> BinOp {
    BinOp::ALL[rng.random_range(0..BinOp::ALL.len())]
}

/// A tree of the given depth bound built by `method`. Full trees have every
/// leaf at `depth`; grown trees have an operator root and stop early at random.
pub fn build_tree(space: &TreeSpace, method: InitMethod, depth: usize, rng: &mut impl Rng) -> Expr {
    // chance of an operator among all primitives (constants count once)
    let n_ops = BinOp::ALL.len() as f64;
    let p_op = n_ops / (n_ops + space.features.len() as f64 + 1.0);
    fn go(space: &TreeSpace, method: InitMethod, depth: usize, root: bool, p_op: f64, rng: &mut impl Rng) -> Expr {
        let op_here = depth > 0 && (method == InitMethod::Full || root || rng.random_bool(p_op));
        if !op_here {
            return random_leaf(space, rng);
        }
        let op = random_op(rng);
        let l = go(space, method, depth - 1, false, p_op, rng);
        let r = go(space, method, depth - 1, false, p_op, rng);
        Expr::bin(op, l, r)
    }
    go(space, method, depth, true, p_op, rng)
}

/// Ramped half-and-half: depth uniform in `init_depth`, full or grow with equal odds.
pub fn random_tree(space: &TreeSpace, init_depth: (usize, usize), rng: &mut impl Rng) -> Expr {
    let depth = rng.random_range(init_depth.0..=init_depth.1);
    let method = if rng.random_bool(0.5) {
        InitMethod::Full
    } else {
        InitMethod::Grow
    };
    build_tree(space, method, depth, rng)
}

/// Shrinks the subtree at `at` by repeated hoisting until the tree fits `max_depth`.
fn repair(mut e: Expr, at: usize, max_depth: usize, rng: &mut impl Rng) -> Expr {
    while e.depth() > max_depth {
        let s = e.subtree(at);
        debug_assert!(!s.is_leaf(), "insertion point itself exceeds the depth bound");
        let j = rng.random_range(1..s.size());
        let t = s.subtree(j).clone();
        *e.subtree_mut(at) = t;
    }
    e
}

/// Replaces a random subtree of `parent` with a random subtree of `donor`.
pub fn crossover(parent: &Expr, donor: &Expr, max_depth: usize, rng: &mut impl Rng) -> Expr {
    let i = rng.random_range(0..parent.size());
    let j = rng.random_range(0..donor.size());
    let child = parent.replace_subtree(i, donor.subtree(j).clone());
    repair(child, i, max_depth, rng)
}

/// Deepest fresh subtree inserted by [`subtree_mutation`].
pub const MUTATION_DEPTH: usize = 3;

/// Replaces a random subtree with a freshly grown one.
pub fn subtree_mutation(e: &Expr, space: &TreeSpace, rng: &mut impl Rng) -> Expr {
    let i = rng.random_range(0..e.size());
    let depth = rng.random_range(0..=MUTATION_DEPTH);
    let fresh = build_tree(space, InitMethod::Grow, depth, rng);
    repair(e.replace_subtree(i, fresh), i, space.max_depth, rng)
}

/// Replaces a random subtree `S` with a random subtree of `S`.
pub fn hoist_mutation(e: &Expr, rng: &mut impl Rng) -> Expr {
    let i = rng.random_range(0..e.size());
    let s = e.subtree(i);
    let j = rng.random_range(0..s.size());
    if j == 0 {
        return e.clone();
    }
    e.replace_subtree(i, s.subtree(j).clone())
}

/// Each node independently, with probability `p`, becomes a random primitive of the same arity.
pub fn point_mutation(e: &Expr, space: &TreeSpace, p: f64, rng: &mut impl Rng) -> Expr {
    match e {
        Expr::Bin(op, l, r) => {
            let op = if rng.random_bool(p) { random_op(rng) } else { *op };
            let l = point_mutation(l, space, p, rng);
            let r = point_mutation(r, space, p, rng);
            Expr::bin(op, l, r)
        }
        leaf => {
            if rng.random_bool(p) {
                random_leaf(space, rng)
            } else {
                leaf.clone()
            }
        }
    }
}

/// Shape signature: preorder arity sequence.
pub fn shape(e: &Expr) -> Vec<bool> {
    e.nodes().into_iter().map(|n| !n.is_leaf()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use Feature::*;

    fn space() -> TreeSpace {
        TreeSpace {
            features: Feature::BASE.to_vec(),
            const_range: (-1.0, 1.0),
            max_depth: 10,
        }
    }

    fn leaf_depths(e: &Expr) -> Vec<usize> {
        (0..e.size())
            .filter(|&i| e.subtree(i).is_leaf())
            .map(|i| e.node_depth(i))
            .collect()
    }

    #[test]
    fn full_trees_have_all_leaves_at_depth() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let t = build_tree(&space(), InitMethod::Full, 2, &mut rng);
            assert!(leaf_depths(&t).iter().all(|&d| d == 2));
            assert_eq!(t.size(), 7);
        }
    }

    #[test]
    fn random_trees_respect_depth_and_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let t = random_tree(&space(), (2, 6), &mut rng);
            assert!(t.is_valid(&space().features, 10));
            assert!(t.depth() >= 1 && t.depth() <= 6);
        }
        let a = random_tree(&space(), (2, 6), &mut ChaCha8Rng::seed_from_u64(9));
        let b = random_tree(&space(), (2, 6), &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn leaf_mix_favours_variables() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let vars = (0..10_000)
            .filter(|_| matches!(random_leaf(&space(), &mut rng), Expr::Var(_)))
            .count();
        assert!((7_700..8_300).contains(&vars), "{vars}");
    }

    #[test]
    fn crossover_of_leaves_yields_donor() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let child = crossover(&Expr::Var(Dx), &Expr::Var(Dy), 10, &mut rng);
        assert_eq!(child, Expr::Var(Dy));
    }

    #[test]
    fn crossover_repairs_depth() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let deep = build_tree(&space(), InitMethod::Full, 6, &mut rng);
        for _ in 0..200 {
            let child = crossover(&deep, &deep, 6, &mut rng);
            assert!(child.depth() <= 6);
        }
    }

    #[test]
    fn subtree_mutation_of_leaf_replaces_everything() {
        let e = Expr::Var(Vx);
        let a = subtree_mutation(&e, &space(), &mut ChaCha8Rng::seed_from_u64(6));
        let b = subtree_mutation(&e, &space(), &mut ChaCha8Rng::seed_from_u64(6));
        assert_eq!(a, b);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let _ = rng.random_range(0..1usize);
        let depth = rng.random_range(0..=MUTATION_DEPTH);
        assert_eq!(a, build_tree(&space(), InitMethod::Grow, depth, &mut rng));
    }

    #[test]
    fn hoist_of_leaf_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        assert_eq!(hoist_mutation(&Expr::Const(0.5), &mut rng), Expr::Const(0.5));
    }

    #[test]
    fn point_mutation_zero_probability_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let t = random_tree(&space(), (3, 5), &mut rng);
        assert_eq!(point_mutation(&t, &space(), 0.0, &mut rng), t);
        let m = point_mutation(&t, &space(), 0.5, &mut rng);
        assert_eq!(shape(&m), shape(&t));
    }
}

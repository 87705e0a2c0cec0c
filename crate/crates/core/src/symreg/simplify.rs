//! Algebraic simplification into a canonical sum of monomials.
//!
//! A tree is expanded into a polynomial over features with integer (possibly
//! negative) exponents. Division by a sum that does not reduce to a monomial
//! turns the denominator into an opaque atom. Because expansion ignores the
//! protected-division guard and the clamp, [`simplify_checked`] verifies the
//! result numerically and falls back to plain constant folding.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::expr::{BinOp, Columns, Expr, DIV_GUARD};
use crate::observer::Feature;

/// Expansions with more terms than this are abandoned.
const MAX_TERMS: usize = 128;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Atom {
    Var(Feature),
    /// A non-monomial denominator, keyed by its s-expression.
    Opaque(String),
}

/// Sorted `(atom, exponent)` pairs with nonzero exponents.
pub type Monomial = Vec<(Atom, i32)>;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Poly {
    terms: BTreeMap<Monomial, f64>,
    opaque: BTreeMap<String, Expr>,
}

fn mul_monomials(a: &Monomial, b: &Monomial) -> Monomial {
    let mut out: BTreeMap<Atom, i32> = a.iter().cloned().collect();
    for (atom, e) in b {
        *out.entry(atom.clone()).or_insert(0) += e;
    }
    out.into_iter().filter(|(_, e)| *e != 0).collect()
}

/// Monomials without denominators first, then descending lexicographic order
/// on exponents, so `v_y*dt` precedes `dt^2`; the constant term comes last.
fn term_order(a: &Monomial, b: &Monomial) -> Ordering {
    match (a.is_empty(), b.is_empty()) {
        (true, false) => return Ordering::Greater,
        (false, true) => return Ordering::Less,
        _ => {}
    }
    let has_den = |m: &Monomial| m.iter().any(|p| p.1 < 0);
    match (has_den(a), has_den(b)) {
        (true, false) => return Ordering::Greater,
        (false, true) => return Ordering::Less,
        _ => {}
    }
    let mut atoms: Vec<&Atom> = a.iter().chain(b.iter()).map(|(x, _)| x).collect();
    atoms.sort();
    atoms.dedup();
    let exp = |m: &Monomial, x: &Atom| m.iter().find(|(y, _)| y == x).map_or(0, |p| p.1);
    for x in atoms {
        let (ea, eb) = (exp(a, x), exp(b, x));
        if ea != eb {
            return eb.cmp(&ea);
        }
    }
    Ordering::Equal
}

impl Poly {
    pub fn constant(c: f64) -> Poly {
        let mut p = Poly::default();
        if c != 0.0 {
            p.terms.insert(Vec::new(), c);
        }
        p
    }

    pub fn var(f: Feature) -> Poly {
        let mut p = Poly::default();
        p.terms.insert(vec![(Atom::Var(f), 1)], 1.0);
        p
    }

    fn monomial(m: Monomial, coef: f64, opaque: BTreeMap<String, Expr>) -> Poly {
        let mut p = Poly {
            terms: BTreeMap::new(),
            opaque,
        };
        if coef != 0.0 {
            p.terms.insert(m, coef);
        }
        p
    }

    /// Expands `e`; `None` when the expansion grows too large.
    pub fn from_expr(e: &Expr) -> Option<Poly> {
        match e {
            Expr::Var(f) => Some(Poly::var(*f)),
            Expr::Const(c) => Some(Poly::constant(*c)),
            Expr::Bin(op, l, r) => {
                let a = Poly::from_expr(l)?;
                let b = Poly::from_expr(r)?;
                match op {
                    BinOp::Add => Some(a.plus(&b, 1.0)),
                    BinOp::Sub => Some(a.plus(&b, -1.0)),
                    BinOp::Mul => a.times(&b),
                    BinOp::Div => a.over(b),
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// The constant value, if this polynomial has no variable terms.
    pub fn as_constant(&self) -> Option<f64> {
        match self.terms.len() {
            0 => Some(0.0),
            1 => self.terms.get(&Vec::new()).copied(),
            _ => None,
        }
    }

    /// Terms in canonical order.
    pub fn terms(&self) -> Vec<(&Monomial, f64)> {
        let mut t: Vec<(&Monomial, f64)> = self.terms.iter().map(|(m, c)| (m, *c)).collect();
        t.sort_by(|a, b| term_order(a.0, b.0));
        t
    }

    /// Coefficient of a monomial over features; 0 when absent.
    pub fn coefficient(&self, m: &[(Feature, i32)]) -> f64 {
        self.terms.get(&feature_monomial(m)).copied().unwrap_or(0.0)
    }

    fn merge_opaque(&mut self, other: &Poly) {
        for (k, v) in &other.opaque {
            self.opaque.entry(k.clone()).or_insert_with(|| v.clone());
        }
    }

    fn plus(mut self, other: &Poly, sign: f64) -> Poly {
        self.merge_opaque(other);
        for (m, c) in &other.terms {
            let entry = self.terms.entry(m.clone()).or_insert(0.0);
            *entry += sign * c;
            if *entry == 0.0 {
                self.terms.remove(m);
            }
        }
        self
    }

    fn times(&self, other: &Poly) -> Option<Poly> {
        if self.terms.len() * other.terms.len() > MAX_TERMS * 4 {
            return None;
        }
        let mut out = Poly {
            terms: BTreeMap::new(),
            opaque: self.opaque.clone(),
        };
        out.merge_opaque(other);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let m = mul_monomials(ma, mb);
                let entry = out.terms.entry(m.clone()).or_insert(0.0);
                *entry += ca * cb;
                if *entry == 0.0 {
                    out.terms.remove(&m);
                }
            }
        }
        (out.terms.len() <= MAX_TERMS).then_some(out)
    }

    fn over(self, den: Poly) -> Option<Poly> {
        if let Some(c) = den.as_constant() {
            if c.abs() < DIV_GUARD {
                return Some(Poly::constant(1.0));
            }
            return self.times(&Poly::constant(1.0 / c));
        }
        if den.terms.len() == 1 {
            let (m, c) = den.terms.iter().next().expect("one term");
            let inv: Monomial = m.iter().map(|(a, e)| (a.clone(), -e)).collect();
            return self.times(&Poly::monomial(inv, 1.0 / c, den.opaque.clone()));
        }
        let d = den.to_expr();
        let key = d.to_sexpr();
        let mut opaque = den.opaque.clone();
        opaque.insert(key.clone(), d);
        self.times(&Poly::monomial(vec![(Atom::Opaque(key), -1)], 1.0, opaque))
    }

    fn atom_expr(&self, a: &Atom) -> Expr {
        match a {
            Atom::Var(f) => Expr::Var(*f),
            Atom::Opaque(k) => self.opaque[k].clone(),
        }
    }

    /// `|coef| * monomial`, as a tree.
    fn term_expr(&self, m: &Monomial, coef: f64) -> Expr {
        let mut num: Vec<Expr> = Vec::new();
        let mut den: Vec<Expr> = Vec::new();
        let product = |v: Vec<Expr>| v.into_iter().reduce(Expr::mul).expect("nonempty");
        for (a, e) in m {
            let power = product(vec![self.atom_expr(a); e.unsigned_abs() as usize]);
            if *e > 0 {
                num.push(power);
            } else {
                den.push(power);
            }
        }
        if coef != 1.0 || num.is_empty() {
            num.insert(0, Expr::Const(coef));
        }
        let n = product(num);
        if den.is_empty() {
            n
        } else {
            Expr::div(n, product(den))
        }
    }

    /// Rebuilds a tree: terms in canonical order, negatives via subtraction.
    /// Drops the smallest terms while their summed contribution stays within
    /// `rel` of `reference` on every row.
    fn prune(&self, data: &Columns, reference: &[f64], rel: f64) -> Poly {
        let n = reference.len();
        if n == 0 {
            return self.clone();
        }
        let scale = reference.iter().map(|v| v.abs()).sum::<f64>() / n as f64;
        let mut terms: Vec<(f64, &Monomial, Vec<f64>)> = Vec::new();
        for (m, c) in self.terms() {
            let Some(vals) = self.eval_term(m, c, data) else {
                return self.clone();
            };
            let peak = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            terms.push((peak, m, vals));
        }
        terms.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| term_order(a.1, b.1)));
        let mut removed = vec![0.0; n];
        let mut out = self.clone();
        for (_, m, vals) in terms {
            let fits = (0..n).all(|i| (removed[i] + vals[i]).abs() <= rel * (reference[i].abs() + scale));
            if fits {
                for (r, v) in removed.iter_mut().zip(&vals) {
                    *r += v;
                }
                out.terms.remove(m);
            }
        }
        out
    }

    pub fn to_expr(&self) -> Expr {
        let mut out: Option<Expr> = None;
        for (m, c) in self.terms() {
            out = Some(match out {
                None => self.term_expr(m, c),
                Some(acc) if c < 0.0 => Expr::sub(acc, self.term_expr(m, -c)),
                Some(acc) => Expr::add(acc, self.term_expr(m, c)),
            });
        }
        out.unwrap_or(Expr::Const(0.0))
    }

    /// Values of one term over all rows.
    pub fn eval_term(&self, m: &Monomial, coef: f64, data: &Columns) -> Option<Vec<f64>> {
        let mut out = vec![coef; data.len()];
        for (a, e) in m {
            let vals = match a {
                Atom::Var(f) => data.column(*f)?.to_vec(),
                Atom::Opaque(k) => self.opaque[k].eval_columns(data).ok()?,
            };
            for (o, v) in out.iter_mut().zip(vals) {
                *o *= v.powi(*e);
            }
        }
        Some(out)
    }
}

pub fn feature_monomial(m: &[(Feature, i32)]) -> Monomial {
    let mut v: Monomial = m.iter().filter(|p| p.1 != 0).map(|(f, e)| (Atom::Var(*f), *e)).collect();
    v.sort();
    v
}

/// Constant folding and neutral-element removal only.
pub fn fold(e: &Expr) -> Expr {
    match e {
        Expr::Bin(op, l, r) => {
            let (l, r) = (fold(l), fold(r));
            match (op, &l, &r) {
                (_, Expr::Const(a), Expr::Const(b)) => Expr::Const(op.apply(*a, *b)),
                (BinOp::Mul, Expr::Const(c), _) | (BinOp::Mul, _, Expr::Const(c)) if *c == 0.0 => Expr::Const(0.0),
                (BinOp::Mul, Expr::Const(c), x) | (BinOp::Mul, x, Expr::Const(c)) if *c == 1.0 => x.clone(),
                (BinOp::Add, Expr::Const(c), x) | (BinOp::Add, x, Expr::Const(c)) if *c == 0.0 => x.clone(),
                (BinOp::Sub, x, Expr::Const(c)) if *c == 0.0 => x.clone(),
                (BinOp::Div, x, Expr::Const(c)) if *c == 1.0 => x.clone(),
                (BinOp::Div, _, Expr::Const(c)) if c.abs() < DIV_GUARD => Expr::Const(1.0),
                (BinOp::Sub, a, b) if a == b => Expr::Const(0.0),
                _ => Expr::bin(*op, l, r),
            }
        }
        leaf => leaf.clone(),
    }
}

/// Canonical polynomial form, or constant folding if expansion is too large.
pub fn simplify(e: &Expr) -> Expr {
    match Poly::from_expr(e) {
        Some(p) => p.to_expr(),
        None => fold(e),
    }
}

/// Whether `a` and `b` agree on every row within `rel` of the row magnitude.
pub fn equivalent_on(a: &Expr, b: &Expr, data: &Columns, rel: f64) -> bool {
    let (Ok(x), Ok(y)) = (a.eval_columns(data), b.eval_columns(data)) else {
        return false;
    };
    if x.is_empty() {
        return true;
    }
    let scale = y.iter().map(|v| v.abs()).sum::<f64>() / y.len() as f64;
    x.iter()
        .zip(&y)
        .all(|(p, q)| (p - q).abs() <= rel * (q.abs() + scale) + f64::MIN_POSITIVE)
}

/// Simplifies and checks the result against `e` on `data`, falling back to
/// folding and finally to `e` itself.
pub fn simplify_checked(e: &Expr, data: &Columns) -> Expr {
    const REL: f64 = 1e-9;
    let full = simplify(e);
    if let (Some(p), Ok(reference)) = (Poly::from_expr(&full), e.eval_columns(data)) {
        let pruned = p.prune(data, &reference, REL / 2.0).to_expr();
        if equivalent_on(&pruned, e, data, REL) {
            return pruned;
        }
    }
    if equivalent_on(&full, e, data, REL) {
        return full;
    }
    let folded = fold(e);
    if equivalent_on(&folded, e, data, REL) {
        return folded;
    }
    e.clone()
}

/// Result of comparing an expression with an expected set of monomials.
#[derive(Clone, Debug, PartialEq)]
pub struct FormMatch {
    /// Least-squares coefficient of each expected monomial, in the order given.
    pub coefficients: Vec<f64>,
    /// Mean |residual| of the projection, relative to `scale`.
    pub stray: f64,
}

impl FormMatch {
    pub fn holds(&self, tolerance: f64) -> bool {
        self.stray <= tolerance
    }
}

fn monomial_values(m: &[(Feature, i32)], data: &Columns) -> Option<Vec<f64>> {
    let mut out = vec![1.0; data.len()];
    for &(f, e) in m {
        for (o, v) in out.iter_mut().zip(data.column(f)?) {
            *o *= v.powi(e);
        }
    }
    Some(out)
}

/// Projects the predictions of `e` onto the span of the `expected` monomials.
///
/// Working on values rather than symbols recognizes forms that agree only on
/// the data, such as `cos²θ - 1` for `-sin²θ`. `None` when something cannot
/// be evaluated.
pub fn match_form(e: &Expr, expected: &[&[(Feature, i32)]], data: &Columns, scale: f64) -> Option<FormMatch> {
    let n = data.len();
    if n == 0 {
        return None;
    }
    let pred = e.eval_columns(data).ok()?;
    let cols = expected
        .iter()
        .map(|m| monomial_values(m, data))
        .collect::<Option<Vec<_>>>()?;
    let norms: Vec<f64> = cols.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let k = cols.len();
    let a = DMatrix::from_fn(n, k, |i, j| if norms[j] > 0.0 { cols[j][i] / norms[j] } else { 0.0 });
    let b = DVector::from_column_slice(&pred);
    let w = if k == 0 {
        DVector::zeros(0)
    } else {
        let svd = a.clone().svd(true, true);
        let eps = 1e-12 * svd.singular_values.max();
        svd.solve(&b, eps).ok()?
    };
    let coefficients: Vec<f64> = (0..k)
        .map(|j| if norms[j] > 0.0 { w[j] / norms[j] } else { 0.0 })
        .collect();
    let fitted = &a * &w;
    let residual = (0..n).map(|i| (pred[i] - fitted[i]).abs()).sum::<f64>() / n as f64;
    Some(FormMatch {
        coefficients,
        stray: residual / scale.max(f64::MIN_POSITIVE),
    })
}

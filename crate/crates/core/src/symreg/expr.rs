use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observer::{Feature, SampleRow, SampleTable};

/// Denominators smaller than this make division return 1.
pub const DIV_GUARD: f64 = 1e-3;
/// Every node's output is clamped to `±CLAMP`.
pub const CLAMP: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub const ALL: [BinOp; 4] = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div];

    #[inline]
    pub fn apply(self, a: f64, b: f64) -> f64 {
        let r = match self {
            BinOp::Add => a + b,
            BinOp::Sub => a - b,
            BinOp::Mul => a * b,
            BinOp::Div => {
                if b.abs() < DIV_GUARD {
                    1.0
                } else {
                    a / b
                }
            }
        };
        r.clamp(-CLAMP, CLAMP)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    fn from_symbol(s: &str) -> Option<BinOp> {
        BinOp::ALL.into_iter().find(|op| op.symbol() == s)
    }
}

/// A syntax tree over features, constants and protected arithmetic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Var(Feature),
    Const(f64),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(f: Feature) -> Expr {
        Expr::Var(f)
    }

    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Bin(op, Box::new(l), Box::new(r))
    }

    pub fn add(l: Expr, r: Expr) -> Expr {
        Expr::bin(BinOp::Add, l, r)
    }

    pub fn sub(l: Expr, r: Expr) -> Expr {
        Expr::bin(BinOp::Sub, l, r)
    }

    pub fn mul(l: Expr, r: Expr) -> Expr {
        Expr::bin(BinOp::Mul, l, r)
    }

    pub fn div(l: Expr, r: Expr) -> Expr {
        Expr::bin(BinOp::Div, l, r)
    }

    pub fn is_leaf(&self) -> bool {
        !matches!(self, Expr::Bin(..))
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        match self {
            Expr::Bin(_, l, r) => 1 + l.size() + r.size(),
            _ => 1,
        }
    }

    /// Longest root-to-leaf edge count; a leaf has depth 0.
    pub fn depth(&self) -> usize {
        match self {
            Expr::Bin(_, l, r) => 1 + l.depth().max(r.depth()),
            _ => 0,
        }
    }

    /// Preorder node `i`.
    pub fn subtree(&self, i: usize) -> &Expr {
        fn walk(e: &Expr, i: usize) -> std::result::Result<&Expr, usize> {
            if i == 0 {
                return Ok(e);
            }
            match e {
                Expr::Bin(_, l, r) => match walk(l, i - 1) {
                    Ok(found) => Ok(found),
                    Err(used) => walk(r, i - 1 - used).map_err(|u| u + used + 1),
                },
                _ => Err(1),
            }
        }
        walk(self, i).unwrap_or_else(|_| panic!("subtree index {i} out of range"))
    }

    pub fn subtree_mut(&mut self, i: usize) -> &mut Expr {
        if i == 0 {
            return self;
        }
        match self {
            Expr::Bin(_, l, r) => {
                let ls = l.size();
                if i <= ls {
                    l.subtree_mut(i - 1)
                } else {
                    r.subtree_mut(i - 1 - ls)
                }
            }
            _ => panic!("subtree index {i} out of range"),
        }
    }

    /// Depth at which preorder node `i` sits.
    pub fn node_depth(&self, i: usize) -> usize {
        let mut e = self;
        let mut i = i;
        let mut d = 0;
        while i > 0 {
            match e {
                Expr::Bin(_, l, r) => {
                    let ls = l.size();
                    d += 1;
                    if i <= ls {
                        e = l;
                        i -= 1;
                    } else {
                        e = r;
                        i -= 1 + ls;
                    }
                }
                _ => panic!("node index out of range"),
            }
        }
        d
    }

    pub fn replace_subtree(&self, i: usize, with: Expr) -> Expr {
        let mut out = self.clone();
        *out.subtree_mut(i) = with;
        out
    }

    /// Preorder list of nodes.
    pub fn nodes(&self) -> Vec<&Expr> {
        let mut out = Vec::with_capacity(self.size());
        let mut stack = vec![self];
        while let Some(e) = stack.pop() {
            out.push(e);
            if let Expr::Bin(_, l, r) = e {
                stack.push(r);
                stack.push(l);
            }
        }
        out
    }

    pub fn variables(&self) -> Vec<Feature> {
        let mut v: Vec<Feature> = self
            .nodes()
            .into_iter()
            .filter_map(|e| match e {
                Expr::Var(f) => Some(*f),
                _ => None,
            })
            .collect();
        v.sort();
        v.dedup();
        v
    }

    /// Constants in preorder.
    pub fn constants(&self) -> Vec<f64> {
        self.nodes()
            .into_iter()
            .filter_map(|e| match e {
                Expr::Const(c) => Some(*c),
                _ => None,
            })
            .collect()
    }

    /// Replaces constants in preorder.
    pub fn with_constants(&self, values: &[f64]) -> Expr {
        fn walk(e: &Expr, it: &mut std::slice::Iter<'_, f64>) -> Expr {
            match e {
                Expr::Const(c) => Expr::Const(*it.next().unwrap_or(c)),
                Expr::Var(f) => Expr::Var(*f),
                Expr::Bin(op, l, r) => {
                    let l = walk(l, it);
                    Expr::bin(*op, l, walk(r, it))
                }
            }
        }
        walk(self, &mut values.iter())
    }

    /// Arity, depth bound, variable set and finite constants.
    pub fn is_valid(&self, features: &[Feature], max_depth: usize) -> bool {
        self.depth() <= max_depth
            && self.nodes().into_iter().all(|e| match e {
                Expr::Var(f) => features.contains(f),
                Expr::Const(c) => c.is_finite(),
                Expr::Bin(..) => true,
            })
    }

    /// Evaluates with variable values supplied by `lookup`.
    pub fn eval_with(&self, lookup: &impl Fn(Feature) -> Option<f64>) -> Result<f64> {
        Ok(match self {
            Expr::Var(f) => lookup(*f).ok_or_else(|| Error::UnknownVariable(f.name().into()))?,
            Expr::Const(c) => *c,
            Expr::Bin(op, l, r) => op.apply(l.eval_with(lookup)?, r.eval_with(lookup)?),
        })
    }

    pub fn eval(&self, row: &SampleRow) -> Result<f64> {
        self.eval_with(&|f| row.get(f))
    }

    /// Vectorized evaluation over all rows of `data`.
    pub fn eval_columns(&self, data: &Columns) -> Result<Vec<f64>> {
        for f in self.variables() {
            if data.column(f).is_none() {
                return Err(Error::UnknownVariable(f.name().into()));
            }
        }
        Ok(self.eval_substituted(data, &[]))
    }

    /// Same as `eval_columns` on `self.with_constants(consts)`, without
    /// rebuilding the tree. Every variable must be present in `data`.
    pub(crate) fn eval_substituted(&self, data: &Columns, consts: &[f64]) -> Vec<f64> {
        match self.eval_unchecked(data, &mut consts.iter()) {
            Col::Scalar(c) => vec![c; data.len()],
            Col::Borrowed(s) => s.to_vec(),
            Col::Owned(v) => v,
        }
    }

    fn eval_unchecked<'a>(&self, data: &'a Columns, consts: &mut std::slice::Iter<'_, f64>) -> Col<'a> {
        match self {
            Expr::Var(f) => Col::Borrowed(data.column(*f).expect("variables checked")),
            Expr::Const(c) => Col::Scalar(*consts.next().unwrap_or(c)),
            Expr::Bin(op, l, r) => {
                let a = l.eval_unchecked(data, consts);
                let b = r.eval_unchecked(data, consts);
                // One monomorphized loop per operator keeps the dispatch out of the row loop.
                match op {
                    BinOp::Add => combine(|x, y| BinOp::Add.apply(x, y), a, b),
                    BinOp::Sub => combine(|x, y| BinOp::Sub.apply(x, y), a, b),
                    BinOp::Mul => combine(|x, y| BinOp::Mul.apply(x, y), a, b),
                    BinOp::Div => combine(|x, y| BinOp::Div.apply(x, y), a, b),
                }
            }
        }
    }

    /// Infix rendering with three-decimal constants.
    pub fn to_infix(&self) -> String {
        infix(self, Prec::Sum)
    }

    /// Prefix rendering with full-precision constants, e.g. `(* v_x dt)`.
    pub fn to_sexpr(&self) -> String {
        match self {
            Expr::Var(f) => f.name().to_string(),
            Expr::Const(c) => format!("{c:?}"),
            Expr::Bin(op, l, r) => format!("({} {} {})", op.symbol(), l.to_sexpr(), r.to_sexpr()),
        }
    }

    pub fn parse_sexpr(text: &str) -> Result<Expr> {
        let tokens = tokenize(text);
        let mut pos = 0;
        let e = parse_tokens(&tokens, &mut pos)?;
        if pos != tokens.len() {
            return Err(Error::Parse(format!("trailing input after expression: `{}`", tokens[pos..].join(" "))));
        }
        Ok(e)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_infix())
    }
}

enum Col<'a> {
    Scalar(f64),
    Borrowed(&'a [f64]),
    Owned(Vec<f64>),
}

fn combine<'a>(f: impl Fn(f64, f64) -> f64, a: Col<'a>, b: Col<'a>) -> Col<'a> {
    match (a, b) {
        (Col::Scalar(x), Col::Scalar(y)) => Col::Scalar(f(x, y)),
        (Col::Owned(mut v), b) => {
            match b {
                Col::Scalar(y) => v.iter_mut().for_each(|x| *x = f(*x, y)),
                Col::Borrowed(s) => v.iter_mut().zip(s).for_each(|(x, &y)| *x = f(*x, y)),
                Col::Owned(w) => v.iter_mut().zip(&w).for_each(|(x, &y)| *x = f(*x, y)),
            }
            Col::Owned(v)
        }
        (a, Col::Owned(mut w)) => {
            match a {
                Col::Scalar(x) => w.iter_mut().for_each(|y| *y = f(x, *y)),
                Col::Borrowed(s) => w.iter_mut().zip(s).for_each(|(y, &x)| *y = f(x, *y)),
                Col::Owned(_) => unreachable!(),
            }
            Col::Owned(w)
        }
        (Col::Scalar(x), Col::Borrowed(s)) => Col::Owned(s.iter().map(|&y| f(x, y)).collect()),
        (Col::Borrowed(s), Col::Scalar(y)) => Col::Owned(s.iter().map(|&x| f(x, y)).collect()),
        (Col::Borrowed(a), Col::Borrowed(b)) => Col::Owned(a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()),
    }
}

/// Column-major view of a sample table's features.
#[derive(Clone, Debug, PartialEq)]
pub struct Columns {
    cols: Vec<Option<Vec<f64>>>,
    n: usize,
}

impl Columns {
    pub fn from_table(table: &SampleTable) -> Columns {
        let mut cols = vec![None; Feature::ALL.len()];
        for &f in &table.features {
            cols[f.index()] = Some(table.column(f));
        }
        Columns { cols, n: table.len() }
    }

    pub fn from_columns(columns: Vec<(Feature, Vec<f64>)>) -> Result<Columns> {
        let n = columns.first().map_or(0, |c| c.1.len());
        let mut cols = vec![None; Feature::ALL.len()];
        for (f, v) in columns {
            if v.len() != n {
                return Err(Error::Degenerate("columns differ in length".into()));
            }
            cols[f.index()] = Some(v);
        }
        Ok(Columns { cols, n })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn column(&self, f: Feature) -> Option<&[f64]> {
        self.cols[f.index()].as_deref()
    }

    pub fn features(&self) -> Vec<Feature> {
        Feature::ALL.into_iter().filter(|f| self.cols[f.index()].is_some()).collect()
    }

    pub fn subset(&self, idx: &[usize]) -> Columns {
        Columns {
            cols: self
                .cols
                .iter()
                .map(|c| c.as_ref().map(|v| idx.iter().map(|&i| v[i]).collect()))
                .collect(),
            n: idx.len(),
        }
    }
}

#[derive(Clone, Copy, PartialEq, PartialOrd)]
enum Prec {
    Sum,
    Product,
    Atom,
}

fn fmt_const(c: f64) -> String {
    format!("{c:.3}")
}

fn prec(e: &Expr) -> Prec {
    match e {
        Expr::Bin(BinOp::Add | BinOp::Sub, ..) => Prec::Sum,
        Expr::Bin(..) => Prec::Product,
        Expr::Const(c) if *c < 0.0 => Prec::Sum,
        _ => Prec::Atom,
    }
}

fn infix(e: &Expr, ctx: Prec) -> String {
    let body = match e {
        Expr::Var(f) => return f.name().to_string(),
        Expr::Const(c) => fmt_const(*c),
        Expr::Bin(BinOp::Add, l, r) => format!("{} + {}", infix(l, Prec::Sum), infix(r, Prec::Product)),
        Expr::Bin(BinOp::Sub, l, r) => format!("{} - {}", infix(l, Prec::Sum), infix(r, Prec::Product)),
        Expr::Bin(BinOp::Mul, ..) => product(e),
        Expr::Bin(BinOp::Div, l, r) => format!("{}/{}", infix(l, Prec::Product), infix(r, Prec::Atom)),
    };
    if prec(e) < ctx {
        format!("({body})")
    } else {
        body
    }
}

/// Renders a chain of products, merging runs of one variable into powers.
fn product(e: &Expr) -> String {
    fn flatten<'a>(e: &'a Expr, out: &mut Vec<&'a Expr>) {
        match e {
            Expr::Bin(BinOp::Mul, l, r) => {
                flatten(l, out);
                flatten(r, out);
            }
            other => out.push(other),
        }
    }
    let mut factors = Vec::new();
    flatten(e, &mut factors);
    let mut parts: Vec<String> = Vec::new();
    let mut i = 0;
    while i < factors.len() {
        if let Expr::Var(f) = factors[i] {
            let run = factors[i..].iter().take_while(|g| matches!(g, Expr::Var(h) if h == f)).count();
            parts.push(if run > 1 { format!("{f}^{run}") } else { f.to_string() });
            i += run;
        } else {
            // a quotient after another factor is parenthesized
            let ctx = match factors[i] {
                Expr::Bin(BinOp::Div, ..) if i > 0 => Prec::Atom,
                _ => Prec::Product,
            };
            parts.push(infix(factors[i], ctx));
            i += 1;
        }
    }
    parts.join("*")
}

fn tokenize(text: &str) -> Vec<String> {
    text.replace('(', " ( ")
        .replace(')', " ) ")
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

fn parse_tokens(tokens: &[String], pos: &mut usize) -> Result<Expr> {
    let tok = tokens
        .get(*pos)
        .ok_or_else(|| Error::Parse("unexpected end of expression".into()))?;
    *pos += 1;
    if tok == "(" {
        let op_tok = tokens
            .get(*pos)
            .ok_or_else(|| Error::Parse("missing operator".into()))?;
        let op = BinOp::from_symbol(op_tok).ok_or_else(|| Error::Parse(format!("unknown operator `{op_tok}`")))?;
        *pos += 1;
        let l = parse_tokens(tokens, pos)?;
        let r = parse_tokens(tokens, pos)?;
        match tokens.get(*pos) {
            Some(t) if t == ")" => *pos += 1,
            _ => return Err(Error::Parse("expected `)`".into())),
        }
        return Ok(Expr::bin(op, l, r));
    }
    if tok == ")" {
        return Err(Error::Parse("unexpected `)`".into()));
    }
    if let Ok(c) = tok.parse::<f64>() {
        if !c.is_finite() {
            return Err(Error::Parse(format!("non-finite constant `{tok}`")));
        }
        return Ok(Expr::Const(c));
    }
    tok.parse::<Feature>().map(Expr::Var)
}

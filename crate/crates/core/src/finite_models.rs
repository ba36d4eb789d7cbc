//! Finite quantitative algebras: full type structures over finite metric
//! bases, interval-grid algebras, term interpretation and satisfaction.
//!
//! Elements are [`Value`]s. Ground elements are indices into the ground
//! carrier; an element of `i → j` is its graph, tabulated over the
//! enumerated carrier of `i`. Arrow carriers are enumerated only when asked
//! for; distances and membership of other arrow values are computed from
//! their tables.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::rc::Rc;
use std::sync::{Arc, RwLock};

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::metric_core::{
    classify_space, enumerate_nonexpansive_bounded, format_rational, grid_values, hom_space, ExtReal,
    FiniteMetricSpace, HomKind,
};
use crate::quant_deduction::{check_derivation, AxiomKind, Derivation, Inference, QuantEquation, Theory};
use crate::term_syntax::{
    combinator_indices, is_combinator, print_term, sort_of, sort_of_in, ConstTable, Signature, Sort, Term,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("sort {0} has no enumerated carrier")]
    MissingSort(String),
    #[error("carrier budget exceeded: {0}")]
    Budget(String),
    #[error("interpretation error: {0}")]
    Interpretation(String),
    #[error("structural error: {0}")]
    Structural(String),
    #[error("rejected: {0}")]
    Rejected(String),
}

/// A carrier element.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Pt(usize),
    Fun(Arc<[Value]>),
}

impl Value {
    pub fn fun(table: Vec<Value>) -> Value {
        Value::Fun(table.into())
    }

    pub fn to_json(&self) -> Json {
        match self {
            Value::Pt(i) => json!(i),
            Value::Fun(t) => Json::Array(t.iter().map(|v| v.to_json()).collect()),
        }
    }

    pub fn from_json(v: &Json) -> Result<Value, ModelError> {
        match v {
            Json::Number(n) => n
                .as_u64()
                .map(|i| Value::Pt(i as usize))
                .ok_or_else(|| ModelError::Structural(format!("bad element {n}"))),
            Json::Array(a) => Ok(Value::fun(a.iter().map(Value::from_json).collect::<Result<_, _>>()?)),
            other => Err(ModelError::Structural(format!("bad element {other}"))),
        }
    }
}

/// An enumerated carrier with its distance matrix.
#[derive(Debug, Clone)]
pub struct Carrier {
    pub elems: Vec<Value>,
    pub space: FiniteMetricSpace,
    /// Whether the distance matrix classifies as a metric.
    pub metric: bool,
    index: HashMap<Value, usize>,
}

impl Carrier {
    fn new(elems: Vec<Value>, space: FiniteMetricSpace) -> Result<Self, ModelError> {
        let metric = classify_space(&space).map_err(|e| ModelError::Structural(e.to_string()))?.metric;
        let index = elems.iter().cloned().enumerate().map(|(i, v)| (v, i)).collect();
        Ok(Carrier { elems, space, metric, index })
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn index_of(&self, v: &Value) -> Option<usize> {
        self.index.get(v).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgebraKind {
    FullTypeStructure,
    Grid,
}

type LamKey = (Term, Vec<Value>, Vec<Value>);

/// A finite quantitative algebra.
#[derive(Debug)]
pub struct FiniteQuantAlgebra {
    pub name: String,
    pub kind: AlgebraKind,
    pub signature: Signature,
    /// Ground carriers by sort. In a full type structure every base sort
    /// shares `base`.
    ground: BTreeMap<Sort, FiniteMetricSpace>,
    base: Option<FiniteMetricSpace>,
    carriers: BTreeMap<Sort, Carrier>,
    sym: BTreeMap<String, Value>,
    /// Tabulated λ-closures, keyed by the abstraction and the values of its
    /// bound context and free variables.
    lam: RwLock<HashMap<LamKey, Value>>,
}

impl FiniteQuantAlgebra {
    fn empty(name: &str, kind: AlgebraKind, signature: Signature) -> Self {
        FiniteQuantAlgebra {
            name: name.to_string(),
            kind,
            signature,
            ground: BTreeMap::new(),
            base: None,
            carriers: BTreeMap::new(),
            sym: BTreeMap::new(),
            lam: RwLock::new(HashMap::new()),
        }
    }

    fn ground_space(&self, s: &Sort) -> Option<&FiniteMetricSpace> {
        match s {
            Sort::Base(_) => self.ground.get(s).or(self.base.as_ref()),
            Sort::Interval(..) => self.ground.get(s),
            _ => None,
        }
    }

    /// The enumerated carrier at `s`.
    pub fn carrier(&self, s: &Sort) -> Result<&Carrier, ModelError> {
        self.carriers.get(s).ok_or_else(|| ModelError::MissingSort(s.to_string()))
    }

    /// Sorts with an enumerated carrier.
    pub fn sorts(&self) -> Vec<&Sort> {
        self.carriers.keys().collect()
    }

    /// Per enumerated sort: does the distance classify as a metric.
    pub fn metric_flags(&self) -> BTreeMap<Sort, bool> {
        self.carriers.iter().map(|(s, c)| (s.clone(), c.metric)).collect()
    }

    pub fn is_metric(&self) -> bool {
        self.carriers.values().all(|c| c.metric)
    }

    pub fn symbol_value(&self, name: &str) -> Option<&Value> {
        self.sym.get(name)
    }

    /// Enumerates the carrier at `s` (and everything it depends on).
    pub fn enumerate(&mut self, s: &Sort, budget: usize) -> Result<(), ModelError> {
        if self.carriers.contains_key(s) {
            return Ok(());
        }
        let carrier = match s {
            Sort::Arrow(i, j) => {
                self.enumerate(i, budget)?;
                self.enumerate(j, budget)?;
                let (ci, cj) = (&self.carriers[&**i], &self.carriers[&**j]);
                let maps = enumerate_nonexpansive_bounded(&ci.space, &cj.space, budget)
                    .map_err(|_| ModelError::Budget(format!("more than {budget} elements at {s}")))?;
                if maps.len() > budget {
                    return Err(ModelError::Budget(format!("{} elements at {s}", maps.len())));
                }
                let labels = (0..maps.len()).map(|k| format!("f{k}")).collect();
                let space = hom_space(HomKind::Xi, &ci.space, &cj.space, &maps, labels);
                let elems = maps
                    .iter()
                    .map(|m| Value::fun(m.table.iter().map(|&y| cj.elems[y].clone()).collect()))
                    .collect();
                Carrier::new(elems, space)?
            }
            Sort::Star => return Err(ModelError::MissingSort("★ (untyped terms have no finite model here)".into())),
            ground => {
                let space = self.ground_space(ground).ok_or_else(|| ModelError::MissingSort(ground.to_string()))?.clone();
                if space.len() > budget {
                    return Err(ModelError::Budget(format!("{} elements at {s}", space.len())));
                }
                Carrier::new((0..space.len()).map(Value::Pt).collect(), space)?
            }
        };
        self.carriers.insert(s.clone(), carrier);
        Ok(())
    }

    /// Distance between two elements of sort `s`.
    pub fn distance(&self, s: &Sort, a: &Value, b: &Value) -> Result<ExtReal, ModelError> {
        if let Some(c) = self.carriers.get(s) {
            if let (Some(i), Some(j)) = (c.index_of(a), c.index_of(b)) {
                return Ok(c.space.d(i, j).clone());
            }
        }
        match (s, a, b) {
            (Sort::Arrow(i, j), Value::Fun(f), Value::Fun(g)) => {
                let ci = self.carrier(i)?;
                if f.len() != ci.len() || g.len() != ci.len() {
                    return Err(ModelError::Structural(format!("table size mismatch at {s}")));
                }
                let mut best = ExtReal::zero();
                for x in 0..ci.len() {
                    for y in 0..ci.len() {
                        let v = self.distance(j, &f[x], &g[y])?;
                        if &v > ci.space.d(x, y) && v > best {
                            best = v;
                        }
                    }
                }
                Ok(best)
            }
            (_, Value::Pt(x), Value::Pt(y)) => {
                let sp = self.ground_space(s).ok_or_else(|| ModelError::MissingSort(s.to_string()))?;
                if *x >= sp.len() || *y >= sp.len() {
                    return Err(ModelError::Structural(format!("element out of range at {s}")));
                }
                Ok(sp.d(*x, *y).clone())
            }
            _ => Err(ModelError::Structural(format!("element shape does not match {s}"))),
        }
    }

    /// Whether `v` is an element of sort `s` (for arrows: a non-expansive
    /// map into elements of the codomain).
    pub fn is_element(&self, s: &Sort, v: &Value) -> Result<bool, ModelError> {
        if let Some(c) = self.carriers.get(s) {
            return Ok(c.index_of(v).is_some());
        }
        match (s, v) {
            (Sort::Arrow(i, j), Value::Fun(f)) => {
                let ci = self.carrier(i)?;
                if f.len() != ci.len() {
                    return Ok(false);
                }
                for y in f.iter() {
                    if !self.is_element(j, y)? {
                        return Ok(false);
                    }
                }
                for x in 0..ci.len() {
                    for y in 0..x {
                        if &self.distance(j, &f[x], &f[y])? > ci.space.d(x, y) {
                            return Ok(false);
                        }
                    }
                }
                Ok(true)
            }
            (_, Value::Pt(x)) => Ok(self.ground_space(s).is_some_and(|sp| *x < sp.len())),
            _ => Ok(false),
        }
    }

    /// JSON view: carriers with their matrices, symbol tables and flags.
    pub fn to_json(&self) -> Json {
        let carriers: serde_json::Map<String, Json> = self
            .carriers
            .iter()
            .map(|(s, c)| {
                (
                    s.to_string(),
                    json!({
                        "elements": c.elems.iter().map(|v| v.to_json()).collect::<Vec<_>>(),
                        "dist": c.space.matrix().iter().map(|r| r.iter().map(|d| d.to_string()).collect::<Vec<_>>()).collect::<Vec<_>>(),
                        "metric": c.metric,
                    }),
                )
            })
            .collect();
        let sym: serde_json::Map<String, Json> = self.sym.iter().map(|(k, v)| (k.clone(), v.to_json())).collect();
        json!({
            "name": self.name,
            "kind": self.kind,
            "carriers": carriers,
            "symbols": sym,
        })
    }
}

/// The full type structure over `base`, with carriers enumerated at
/// `sorts`. Every base sort is interpreted by `base`; arrows carry all
/// non-expansive maps with the Ξ distance.
pub fn build_full_type_structure(
    base: &FiniteMetricSpace,
    sorts: &[Sort],
    budget: usize,
) -> Result<FiniteQuantAlgebra, ModelError> {
    let class = classify_space(base).map_err(|e| ModelError::Structural(e.to_string()))?;
    if !class.metric {
        return Err(ModelError::Structural("the base must be a metric space".into()));
    }
    if base.is_empty() {
        return Err(ModelError::Structural("the base must be non-empty".into()));
    }
    let name = format!("fts{}", base.len());
    let mut alg = FiniteQuantAlgebra::empty(&name, AlgebraKind::FullTypeStructure, Signature::typed_lambda());
    alg.base = Some(base.clone());
    alg.enumerate(&Sort::o(), budget)?;
    for s in sorts {
        if s.contains_star() || contains_interval(s) {
            return Err(ModelError::MissingSort(s.to_string()));
        }
        alg.enumerate(s, budget)?;
    }
    Ok(alg)
}

fn contains_interval(s: &Sort) -> bool {
    match s {
        Sort::Interval(..) => true,
        Sort::Arrow(a, b) => contains_interval(a) || contains_interval(b),
        _ => false,
    }
}

/// A declared constant of a grid algebra.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridConstant {
    pub name: String,
    pub args: Vec<Sort>,
    pub result: Sort,
    pub table: ConstTable,
}

/// The algebra with grid carriers (step `step`) at each interval, Ξ at
/// arrows, a constant `r̄` per grid point and the declared tables. Arrow
/// carriers listed in `sorts` are enumerated; others stay lazy.
pub fn build_grid_algebra(
    intervals: &[(BigRational, BigRational)],
    step: &BigRational,
    constants: &[GridConstant],
    sorts: &[Sort],
    budget: usize,
) -> Result<FiniteQuantAlgebra, ModelError> {
    if !step.is_positive() {
        return Err(ModelError::Structural("the grid step must be positive".into()));
    }
    let mut sig = Signature::typed_lambda();
    let mut grids: BTreeMap<Sort, Vec<BigRational>> = BTreeMap::new();
    for (lo, hi) in intervals {
        let sort = Sort::interval(lo.clone(), hi.clone()).map_err(|e| ModelError::Structural(e.to_string()))?;
        sig = sig.with_grid_constants(lo, hi, step);
        grids.insert(sort, grid_values(lo, hi, step));
    }
    let mut alg = FiniteQuantAlgebra::empty("grid", AlgebraKind::Grid, Signature::typed_lambda());
    for (s, vals) in &grids {
        alg.ground.insert(s.clone(), FiniteMetricSpace::euclidean(vals));
        alg.enumerate(s, budget)?;
    }
    let pos = |s: &Sort, r: &BigRational| -> Result<usize, ModelError> {
        grids
            .get(s)
            .ok_or_else(|| ModelError::MissingSort(s.to_string()))?
            .iter()
            .position(|v| v == r)
            .ok_or_else(|| ModelError::Structural(format!("{} is not a grid point of {s}", format_rational(r))))
    };
    for (name, decl) in &sig.symbols {
        if let Some(ConstTable::Value(r)) = &decl.table {
            if let Ok(i) = pos(&decl.result, r) {
                alg.sym.entry(name.clone()).or_insert(Value::Pt(i));
            }
        }
    }
    for c in constants {
        let value = match &c.table {
            ConstTable::Value(r) => {
                if !c.args.is_empty() {
                    return Err(ModelError::Structural(format!("{}: a value table needs arity 0", c.name)));
                }
                Value::Pt(pos(&c.result, r)?)
            }
            ConstTable::Function(rows) => grid_table_value(c, rows, &grids, &pos)?,
        };
        sig = sig.with_table(&c.name, c.args.clone(), c.result.clone(), c.table.clone());
        alg.sym.insert(c.name.clone(), value);
    }
    alg.signature = sig;
    for s in sorts {
        alg.enumerate(s, budget)?;
    }
    Ok(alg)
}

fn grid_table_value(
    c: &GridConstant,
    rows: &[crate::term_syntax::TableRow],
    grids: &BTreeMap<Sort, Vec<BigRational>>,
    pos: &dyn Fn(&Sort, &BigRational) -> Result<usize, ModelError>,
) -> Result<Value, ModelError> {
    let k = c.args.len();
    let dims: Vec<usize> = c
        .args
        .iter()
        .map(|s| grids.get(s).map(|g| g.len()).ok_or_else(|| ModelError::MissingSort(s.to_string())))
        .collect::<Result<_, _>>()?;
    let total: usize = dims.iter().product();
    let mut flat: Vec<Option<(Vec<BigRational>, BigRational)>> = vec![None; total];
    for row in rows {
        if row.args.len() != k {
            return Err(ModelError::Structural(format!("{}: row arity mismatch", c.name)));
        }
        let mut idx = 0;
        for (s, r) in c.args.iter().zip(&row.args) {
            idx = idx * grids[s].len() + pos(s, r)?;
        }
        pos(&c.result, &row.value)?;
        if flat[idx].replace((row.args.clone(), row.value.clone())).is_some() {
            return Err(ModelError::Structural(format!("{}: duplicate row", c.name)));
        }
    }
    if flat.iter().any(|r| r.is_none()) {
        return Err(ModelError::Structural(format!("{}: table is not total on the grid", c.name)));
    }
    let rows: Vec<(Vec<BigRational>, BigRational)> = flat.into_iter().flatten().collect();
    // non-expansive for the max metric on the product
    for (a, va) in &rows {
        for (b, vb) in &rows {
            let din = a.iter().zip(b).map(|(x, y)| (x - y).abs()).max().unwrap_or_else(BigRational::zero);
            if (va - vb).abs() > din {
                let show = |v: &[BigRational]| v.iter().map(format_rational).collect::<Vec<_>>().join(",");
                return Err(ModelError::Rejected(format!(
                    "{} is expansive: ({}) and ({}) are {} apart but their images {}",
                    c.name,
                    show(a),
                    show(b),
                    format_rational(&din),
                    format_rational(&(va - vb).abs())
                )));
            }
        }
    }
    fn curry(rows: &[(Vec<BigRational>, BigRational)], dims: &[usize], res: &dyn Fn(&BigRational) -> usize) -> Value {
        if dims.is_empty() {
            return Value::Pt(res(&rows[0].1));
        }
        let chunk = rows.len() / dims[0];
        Value::fun((0..dims[0]).map(|i| curry(&rows[i * chunk..(i + 1) * chunk], &dims[1..], res)).collect())
    }
    let res = |r: &BigRational| pos(&c.result, r).expect("checked above");
    Ok(curry(&rows, &dims, &res))
}

/// The grid algebra with `f(x) = x` and `g(x) = min(x + ε, b + ε)` from
/// `[0,b]` to `[0,b+ε]`.
pub fn shift_pair_algebra(b: &BigRational, eps: &BigRational, step: &BigRational) -> Result<FiniteQuantAlgebra, ModelError> {
    let zero = BigRational::zero();
    let top = b + eps;
    let dom = Sort::interval(zero.clone(), b.clone()).map_err(|e| ModelError::Structural(e.to_string()))?;
    let cod = Sort::interval(zero.clone(), top.clone()).map_err(|e| ModelError::Structural(e.to_string()))?;
    let row = |x: &BigRational, v: BigRational| crate::term_syntax::TableRow { args: vec![x.clone()], value: v };
    let xs = grid_values(&zero, b, step);
    let f_rows = xs.iter().map(|x| row(x, x.clone())).collect();
    let g_rows = xs.iter().map(|x| row(x, std::cmp::min(x + eps, top.clone()))).collect();
    let consts = [
        GridConstant { name: "f".into(), args: vec![dom.clone()], result: cod.clone(), table: ConstTable::Function(f_rows) },
        GridConstant { name: "g".into(), args: vec![dom.clone()], result: cod.clone(), table: ConstTable::Function(g_rows) },
    ];
    let mut alg = build_grid_algebra(&[(zero.clone(), b.clone()), (zero, top)], step, &consts, &[], usize::MAX)?;
    alg.name = "shift_pair".into();
    Ok(alg)
}

// ---------------------------------------------------------------------------
// Interpretation

/// Semantic values during evaluation: elements, or closures not yet
/// tabulated.
#[derive(Clone)]
enum Sem<'t> {
    Val(Value),
    Clo(Rc<Closure<'t>>),
}

enum Closure<'t> {
    Comb { name: &'static str, ix: Vec<Sort>, args: Vec<Sem<'t>> },
    Lam { term: &'t Term, sort: Sort, body: &'t Term, ctx: Vec<Sem<'t>>, ctx_sorts: Vec<Sort> },
    Bot,
}

type Env = BTreeMap<String, Value>;

struct Interp<'a> {
    alg: &'a FiniteQuantAlgebra,
    env: &'a Env,
}

impl<'a> Interp<'a> {
    fn eval<'t>(&self, t: &'t Term, ctx: &[Sem<'t>], ctx_sorts: &mut Vec<Sort>) -> Result<Sem<'t>, ModelError> {
        match t {
            Term::Var { name, .. } => self
                .env
                .get(name)
                .cloned()
                .map(Sem::Val)
                .ok_or_else(|| ModelError::Interpretation(format!("variable {name} is unassigned"))),
            Term::Bound { index } => ctx
                .len()
                .checked_sub(index + 1)
                .map(|i| ctx[i].clone())
                .ok_or_else(|| ModelError::Interpretation("dangling bound index".into())),
            Term::Const { name, sort } => {
                if is_combinator(name) {
                    let ix = combinator_indices(name, sort)
                        .ok_or_else(|| ModelError::Interpretation(format!("combinator {name} at {sort}")))?;
                    let name = match name.as_str() {
                        "I" => "I",
                        "K" => "K",
                        _ => "S",
                    };
                    return Ok(Sem::Clo(Rc::new(Closure::Comb { name, ix, args: Vec::new() })));
                }
                self.alg
                    .sym
                    .get(name)
                    .cloned()
                    .map(Sem::Val)
                    .ok_or_else(|| ModelError::Interpretation(format!("no interpretation for symbol {name}")))
            }
            Term::Bot { sort } => self.bot(sort),
            Term::App { fun, arg } => {
                let f = self.eval(fun, ctx, ctx_sorts)?;
                let a = self.eval(arg, ctx, ctx_sorts)?;
                let fs = sort_of_in(fun, ctx_sorts).map_err(|e| ModelError::Interpretation(e.to_string()))?;
                self.apply(f, &fs, a)
            }
            Term::Lam { sort, body, .. } => Ok(Sem::Clo(Rc::new(Closure::Lam {
                term: t,
                sort: sort.clone(),
                body,
                ctx: ctx.to_vec(),
                ctx_sorts: ctx_sorts.clone(),
            }))),
        }
    }

    fn bot<'t>(&self, sort: &Sort) -> Result<Sem<'t>, ModelError> {
        match sort {
            Sort::Arrow(..) => Ok(Sem::Clo(Rc::new(Closure::Bot))),
            s => {
                let sp = self.alg.ground_space(s).ok_or_else(|| ModelError::MissingSort(s.to_string()))?;
                if sp.is_empty() {
                    return Err(ModelError::Interpretation(format!("empty carrier at {s}")));
                }
                Ok(Sem::Val(Value::Pt(0)))
            }
        }
    }

    fn apply<'t>(&self, f: Sem<'t>, fsort: &Sort, a: Sem<'t>) -> Result<Sem<'t>, ModelError> {
        let (dom, cod) = fsort
            .split_arrow()
            .ok_or_else(|| ModelError::Interpretation(format!("applying an element of {fsort}")))?;
        match f {
            Sem::Val(Value::Fun(table)) => {
                let v = self.tabulate(a, dom)?;
                let i = self
                    .alg
                    .carrier(dom)?
                    .index_of(&v)
                    .ok_or_else(|| ModelError::Interpretation(format!("argument is not an element of {dom}")))?;
                Ok(Sem::Val(table[i].clone()))
            }
            Sem::Val(Value::Pt(_)) => Err(ModelError::Interpretation(format!("a point used as a map at {fsort}"))),
            Sem::Clo(c) => match c.as_ref() {
                Closure::Bot => self.bot(cod),
                Closure::Lam { sort, body, ctx, ctx_sorts, .. } => {
                    let mut ctx = ctx.clone();
                    ctx.push(a);
                    let mut cs = ctx_sorts.clone();
                    cs.push(sort.clone());
                    self.eval(body, &ctx, &mut cs)
                }
                Closure::Comb { name, ix, args } => {
                    let mut args = args.clone();
                    args.push(a);
                    let arity = match *name {
                        "I" => 1,
                        "K" => 2,
                        _ => 3,
                    };
                    if args.len() < arity {
                        return Ok(Sem::Clo(Rc::new(Closure::Comb { name, ix: ix.clone(), args })));
                    }
                    match *name {
                        "I" | "K" => Ok(args.swap_remove(0)),
                        _ => {
                            let (i, j, k) = (&ix[0], &ix[1], &ix[2]);
                            let z = args.pop().expect("three args");
                            let y = args.pop().expect("three args");
                            let x = args.pop().expect("three args");
                            let xs = Sort::arrow(i.clone(), Sort::arrow(j.clone(), k.clone()));
                            let xz = self.apply(x, &xs, z.clone())?;
                            let yz = self.apply(y, &Sort::arrow(i.clone(), j.clone()), z)?;
                            self.apply(xz, &Sort::arrow(j.clone(), k.clone()), yz)
                        }
                    }
                }
            },
        }
    }

    fn lam_key(&self, term: &Term, ctx: &[Sem<'_>]) -> Option<LamKey> {
        let mut cv = Vec::with_capacity(ctx.len());
        for s in ctx {
            match s {
                Sem::Val(v) => cv.push(v.clone()),
                Sem::Clo(_) => return None,
            }
        }
        let fv: Option<Vec<Value>> = term.free_names().iter().map(|n| self.env.get(n).cloned()).collect();
        Some((term.clone(), cv, fv?))
    }

    /// Turns a semantic value into an element of `sort`.
    fn tabulate(&self, s: Sem<'_>, sort: &Sort) -> Result<Value, ModelError> {
        let c = match s {
            Sem::Val(v) => return Ok(v),
            Sem::Clo(c) => c,
        };
        let key = match c.as_ref() {
            Closure::Lam { term, ctx, .. } => self.lam_key(term, ctx),
            _ => None,
        };
        if let Some(k) = &key {
            if let Some(v) = self.alg.lam.read().expect("lam memo").get(k) {
                return Ok(v.clone());
            }
        }
        let (dom, cod) = sort
            .split_arrow()
            .ok_or_else(|| ModelError::Interpretation(format!("a map used at ground sort {sort}")))?;
        let dom_c = self.alg.carrier(dom)?;
        let mut table = Vec::with_capacity(dom_c.len());
        for e in &dom_c.elems {
            let r = self.apply(Sem::Clo(c.clone()), sort, Sem::Val(e.clone()))?;
            table.push(self.tabulate(r, cod)?);
        }
        let v = Value::fun(table);
        if !self.alg.is_element(sort, &v)? {
            let what = match c.as_ref() {
                Closure::Lam { term, .. } => print_term(term),
                Closure::Comb { name, .. } => name.to_string(),
                Closure::Bot => "⊥".to_string(),
            };
            return Err(ModelError::Interpretation(format!("closure {what} does not denote an element of {sort}")));
        }
        if let Some(k) = key {
            self.alg.lam.write().expect("lam memo").insert(k, v.clone());
        }
        Ok(v)
    }
}

/// `ρ♮(t)` under `env`.
pub fn interpret(t: &Term, alg: &FiniteQuantAlgebra, env: &Env) -> Result<Value, ModelError> {
    let sort = sort_of(t).map_err(|e| ModelError::Interpretation(e.to_string()))?;
    let it = Interp { alg, env };
    let s = it.eval(t, &[], &mut Vec::new())?;
    it.tabulate(s, &sort)
}

// ---------------------------------------------------------------------------
// Satisfaction

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SatMode {
    Sat,
    SatStar,
}

impl std::str::FromStr for SatMode {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, ModelError> {
        match s {
            "sat" => Ok(SatMode::Sat),
            "sat_star" | "sat-star" | "sat*" => Ok(SatMode::SatStar),
            _ => Err(ModelError::Structural(format!("unknown mode {s:?}"))),
        }
    }
}

/// A refuting assignment. In sat* mode `left` and `right` hold the two
/// tuples for the quantified variables and `delta` their distance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counter {
    pub assignment: Env,
    pub left: Option<Env>,
    pub right: Option<Env>,
    pub delta: Option<ExtReal>,
    /// Distance between the two sides of the conclusion.
    pub distance: ExtReal,
    /// The bound it exceeds.
    pub bound: ExtReal,
}

impl Counter {
    pub fn to_json(&self) -> Json {
        let env = |e: &Env| Json::Object(e.iter().map(|(k, v)| (k.clone(), v.to_json())).collect());
        let mut m = serde_json::Map::new();
        m.insert("assignment".into(), env(&self.assignment));
        if let Some(l) = &self.left {
            m.insert("left".into(), env(l));
        }
        if let Some(r) = &self.right {
            m.insert("right".into(), env(r));
        }
        if let Some(d) = &self.delta {
            m.insert("delta".into(), json!(d.to_string()));
        }
        m.insert("distance".into(), json!(self.distance.to_string()));
        m.insert("bound".into(), json!(self.bound.to_string()));
        Json::Object(m)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SatReport {
    pub satisfied: bool,
    pub counter: Option<Counter>,
}

impl SatReport {
    pub fn to_json(&self) -> Json {
        json!({
            "satisfied": self.satisfied,
            "counter_assignment": self.counter.as_ref().map(|c| c.to_json()),
        })
    }
}

/// Calls `f` on every assignment of the given variables to carrier
/// elements; stops early when `f` returns `Some`.
fn for_assignments<T>(
    alg: &FiniteQuantAlgebra,
    vars: &[(String, Sort)],
    mut f: impl FnMut(&Env) -> Result<Option<T>, ModelError>,
) -> Result<Option<T>, ModelError> {
    let carriers: Vec<&Carrier> = vars.iter().map(|(_, s)| alg.carrier(s)).collect::<Result<_, _>>()?;
    if carriers.iter().any(|c| c.is_empty()) {
        return Ok(None);
    }
    let mut idx = vec![0usize; vars.len()];
    loop {
        let env: Env = vars.iter().zip(&idx).zip(&carriers).map(|(((n, _), &i), c)| (n.clone(), c.elems[i].clone())).collect();
        if let Some(r) = f(&env)? {
            return Ok(Some(r));
        }
        let mut k = 0;
        loop {
            if k == idx.len() {
                return Ok(None);
            }
            idx[k] += 1;
            if idx[k] < carriers[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

fn eq_distance(alg: &FiniteQuantAlgebra, e: &QuantEquation, el: &Env, er: &Env) -> Result<ExtReal, ModelError> {
    let l = interpret(&e.left, alg, el)?;
    let r = interpret(&e.right, alg, er)?;
    alg.distance(&e.sort, &l, &r)
}

/// Checks `alg ⊨ inf` in the given mode.
pub fn satisfies_inference(alg: &FiniteQuantAlgebra, inf: &Inference, mode: SatMode) -> Result<SatReport, ModelError> {
    let all_vars: Vec<(String, Sort)> = inf.vars().into_iter().collect();
    let names: BTreeSet<&str> = all_vars.iter().map(|(n, _)| n.as_str()).collect();
    if names.len() != all_vars.len() {
        return Err(ModelError::Structural("a variable occurs at two sorts".into()));
    }
    let fin = |e: &BigRational| ExtReal::Finite(e.clone());
    let counter = match mode {
        SatMode::Sat => for_assignments(alg, &all_vars, |env| {
            for h in &inf.hyps {
                if eq_distance(alg, h, env, env)? > fin(&h.eps) {
                    return Ok(None);
                }
            }
            let c = &inf.conclusion;
            let d = eq_distance(alg, c, env, env)?;
            Ok((d > fin(&c.eps)).then(|| Counter {
                assignment: env.clone(),
                left: None,
                right: None,
                delta: None,
                distance: d,
                bound: fin(&c.eps),
            }))
        })?,
        SatMode::SatStar => {
            let y = &inf.conclusion.quantified;
            if inf.hyps.iter().any(|h| h.quantified != *y) {
                return Err(ModelError::Structural(
                    "sat* needs every hypothesis to quantify the same variables as the conclusion".into(),
                ));
            }
            let ys: Vec<(String, Sort)> = y.iter().cloned().collect();
            let zs: Vec<(String, Sort)> = all_vars.iter().filter(|(n, _)| !y.iter().any(|(m, _)| m == n)).cloned().collect();
            for_assignments(alg, &zs, |f| {
                for_assignments(alg, &ys, |a| {
                    for_assignments(alg, &ys, |b| {
                        let mut delta = ExtReal::zero();
                        for (n, s) in &ys {
                            delta = delta.max(alg.distance(s, &a[n], &b[n])?);
                        }
                        let mut ea = f.clone();
                        ea.extend(a.iter().map(|(k, v)| (k.clone(), v.clone())));
                        let mut eb = f.clone();
                        eb.extend(b.iter().map(|(k, v)| (k.clone(), v.clone())));
                        for h in &inf.hyps {
                            if eq_distance(alg, h, &ea, &eb)? > delta.clone().max(fin(&h.eps)) {
                                return Ok(None);
                            }
                        }
                        let c = &inf.conclusion;
                        let bound = delta.clone().max(fin(&c.eps));
                        let d = eq_distance(alg, c, &ea, &eb)?;
                        Ok((d > bound).then(|| Counter {
                            assignment: f.clone(),
                            left: Some(a.clone()),
                            right: Some(b.clone()),
                            delta: Some(delta),
                            distance: d,
                            bound,
                        }))
                    })
                })
            })?
        }
    };
    Ok(SatReport { satisfied: counter.is_none(), counter })
}

// ---------------------------------------------------------------------------
// Soundness harness

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HarnessStatus {
    Satisfied,
    Violated,
    Precondition,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarnessRecord {
    pub derivation: String,
    pub algebra: String,
    pub status: HarnessStatus,
    pub mode: SatMode,
    pub detail: Option<String>,
    pub counter: Option<Counter>,
}

impl HarnessRecord {
    pub fn to_json(&self) -> Json {
        json!({
            "derivation": self.derivation,
            "algebra": self.algebra,
            "status": self.status,
            "mode": self.mode,
            "detail": self.detail,
            "counter": self.counter.as_ref().map(|c| c.to_json()),
        })
    }
}

/// Checks that `alg` validates the axioms of `th` on its enumerated
/// sorts. λ-theories additionally need every enumerated carrier to be a
/// metric.
pub fn screen_theory(th: &Theory, alg: &FiniteQuantAlgebra) -> Result<(), String> {
    if th.is_lambda() {
        if let Some((s, _)) = alg.metric_flags().into_iter().find(|(_, m)| !m) {
            return Err(format!("Ξ is not a metric at {s}"));
        }
    }
    let sorts: Vec<Sort> = alg.sorts().into_iter().cloned().collect();
    let small: Vec<&Sort> = sorts.iter().filter(|s| alg.carriers[*s].len() <= 64).collect();
    let var = |n: &str, s: &Sort| Term::var(n, s.clone());
    let check = |inf: Inference, what: &str| -> Result<(), String> {
        match satisfies_inference(alg, &inf, SatMode::Sat) {
            Ok(r) if r.satisfied => Ok(()),
            Ok(_) => Err(format!("axiom {what} fails: {inf}")),
            Err(ModelError::MissingSort(_)) => Ok(()),
            Err(e) => Err(format!("axiom {what}: {e}")),
        }
    };
    for ax in &th.axioms {
        match &ax.kind {
            AxiomKind::CombI => {
                for i in &small {
                    let t = Term::app(Term::comb_i(i), var("x", i));
                    check(Inference::closed(eq0(t, var("x", i))), &ax.name)?;
                }
            }
            AxiomKind::CombK => {
                for i in &small {
                    for j in &small {
                        let t = Term::apps(Term::comb_k(i, j), [var("x", i), var("y", j)]);
                        check(Inference::closed(eq0(t, var("x", i))), &ax.name)?;
                    }
                }
            }
            AxiomKind::CombS => {
                let ground: Vec<&&Sort> = small.iter().filter(|s| s.is_ground()).collect();
                for i in &ground {
                    for j in &ground {
                        for k in &ground {
                            let (x, y, z) = (
                                var("x", &Sort::arrows([(**i).clone(), (**j).clone()], (**k).clone())),
                                var("y", &Sort::arrow((**i).clone(), (**j).clone())),
                                var("z", i),
                            );
                            let t = Term::apps(Term::comb_s(i, j, k), [x.clone(), y.clone(), z.clone()]);
                            let r = Term::app(Term::app(x, z.clone()), Term::app(y, z));
                            check(Inference::closed(eq0(t, r)), &ax.name)?;
                        }
                    }
                }
            }
            AxiomKind::GridDistance => {
                for (n1, v1) in &alg.sym {
                    for (n2, v2) in &alg.sym {
                        let (Some((r, s1)), Some((q, s2))) = (th.signature.grid_value(n1), th.signature.grid_value(n2)) else {
                            continue;
                        };
                        if s1 != s2 {
                            continue;
                        }
                        let d = alg.distance(s1, v1, v2).map_err(|e| e.to_string())?;
                        if d > ExtReal::Finite((r - q).abs()) {
                            return Err(format!("grid constants {n1}, {n2} are too far apart"));
                        }
                    }
                }
            }
            AxiomKind::Basic(inf) => check(inf.clone(), &ax.name)?,
            AxiomKind::Alpha | AxiomKind::Beta | AxiomKind::Eta => {}
        }
    }
    Ok(())
}

fn eq0(l: Term, r: Term) -> QuantEquation {
    QuantEquation::new(l, r, BigRational::zero()).expect("well sorted")
}

/// Checks every derivation conclusion in every algebra. Derivations are
/// checked against `th` first; algebras are screened against its axioms.
/// Runs on at most `jobs` threads; records come back in input order.
pub fn soundness_harness(
    th: &Theory,
    derivations: &[(String, Derivation)],
    algebras: &[&FiniteQuantAlgebra],
    jobs: usize,
) -> Vec<HarnessRecord> {
    let mode = if th.is_lambda() { SatMode::SatStar } else { SatMode::Sat };
    let screens: Vec<Result<(), String>> = algebras.iter().map(|a| screen_theory(th, a)).collect();
    let checks: Vec<Result<(), String>> =
        derivations.iter().map(|(_, d)| check_derivation(d, th).map_err(|e| e.to_string())).collect();
    let pairs: Vec<(usize, usize)> = (0..derivations.len()).flat_map(|i| (0..algebras.len()).map(move |j| (i, j))).collect();
    let run = |&(i, j): &(usize, usize)| {
        let (name, d) = &derivations[i];
        let alg = &algebras[j];
        let rec = |status, detail: Option<String>, counter| HarnessRecord {
            derivation: name.clone(),
            algebra: alg.name.clone(),
            status,
            mode,
            detail,
            counter,
        };
        if let Err(e) = &checks[i] {
            return rec(HarnessStatus::Precondition, Some(format!("derivation rejected: {e}")), None);
        }
        if let Err(e) = &screens[j] {
            return rec(HarnessStatus::Precondition, Some(format!("algebra excluded: {e}")), None);
        }
        match satisfies_inference(alg, &d.conclusion, mode) {
            Ok(r) if r.satisfied => rec(HarnessStatus::Satisfied, None, None),
            Ok(r) => rec(HarnessStatus::Violated, Some(d.conclusion.to_string()), r.counter),
            Err(e) => rec(HarnessStatus::Precondition, Some(e.to_string()), None),
        }
    };
    match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
        Ok(pool) => pool.install(|| pairs.par_iter().map(run).collect()),
        Err(_) => pairs.iter().map(run).collect(),
    }
}

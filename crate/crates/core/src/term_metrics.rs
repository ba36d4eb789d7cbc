//! Distances on normal forms: projections, the ultrametric `e`, the partial
//! ultrametric `d^NF` with witness-bounded certificates, the Böhm-order
//! distance, the full-type-hierarchy distance, and approximate application.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::metric_core::ExtReal;
use crate::rewrite_engine::{normalize, NormalForm, RewriteError};
use crate::term_syntax::{sort_of, sort_of_in, Sort, Term};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("sort mismatch: {left} vs {right}")]
    SortMismatch { left: String, right: String },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("structure too large: {0}")]
    Overflow(String),
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
}

impl From<crate::term_syntax::SyntaxError> for MetricsError {
    fn from(e: crate::term_syntax::SyntaxError) -> Self {
        MetricsError::Rewrite(RewriteError::IllTyped(e))
    }
}

/// `0` or `1/2^m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dyadic {
    Zero,
    /// `1/2^m`
    Inv(u32),
}

impl Dyadic {
    pub const ONE: Dyadic = Dyadic::Inv(0);

    pub fn to_ext_real(self) -> ExtReal {
        match self {
            Dyadic::Zero => ExtReal::zero(),
            Dyadic::Inv(m) => ExtReal::dyadic(m),
        }
    }

    /// Whether the value is at most `1/2^n`.
    pub fn le_pow(self, n: u32) -> bool {
        match self {
            Dyadic::Zero => true,
            Dyadic::Inv(m) => m >= n,
        }
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Dyadic::Zero, Dyadic::Zero) => Ordering::Equal,
            (Dyadic::Zero, _) => Ordering::Less,
            (_, Dyadic::Zero) => Ordering::Greater,
            (Dyadic::Inv(a), Dyadic::Inv(b)) => b.cmp(a),
        }
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.to_ext_real().fmt(f)
    }
}

impl Serialize for Dyadic {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertStatus {
    Exact,
    LowerBound,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DistCertificate {
    pub value: Dyadic,
    pub status: CertStatus,
    pub witness_budget: usize,
    #[serde(skip_serializing_if = "Option::is_none", serialize_with = "ser_pair")]
    pub failing_witness: Option<(Term, Term)>,
}

fn ser_pair<S: Serializer>(p: &Option<(Term, Term)>, s: S) -> Result<S::Ok, S::Error> {
    match p {
        Some((a, b)) => s.collect_seq([a.to_string(), b.to_string()]),
        None => s.serialize_none(),
    }
}

fn same_sort(t: &Term, s: &Term) -> Result<Sort, MetricsError> {
    let a = sort_of(t)?;
    let b = sort_of(s)?;
    if a != b {
        return Err(MetricsError::SortMismatch { left: a.to_string(), right: b.to_string() });
    }
    Ok(a)
}

// ---------------------------------------------------------------------------
// Projections

/// Sort of a head symbol under binders `ctx` (innermost last).
fn head_sort(h: &Term, ctx: &[Sort]) -> Option<Sort> {
    match h {
        Term::Var { sort, .. } | Term::Const { sort, .. } | Term::Bot { sort } => Some(sort.clone()),
        Term::Bound { index } => ctx.get(ctx.len().checked_sub(index + 1)?).cloned(),
        _ => None,
    }
}

fn project_in(t: &Term, n: usize, ctx: &mut Vec<Sort>) -> Term {
    match t {
        Term::Lam { name, sort, body } => {
            ctx.push(sort.clone());
            let b = project_in(body, n, ctx);
            ctx.pop();
            Term::lam_raw(name, sort.clone(), b)
        }
        Term::Bot { .. } => t.clone(),
        _ => {
            if n == 0 {
                let s = sort_of_in(t, ctx).expect("normal forms are well sorted");
                return Term::bot(s);
            }
            let (head, args) = t.spine();
            let args: Vec<Term> = args.into_iter().map(|a| project_in(a, n - 1, ctx)).collect();
            Term::apps(head.clone(), args)
        }
    }
}

/// `π^n`: cuts the Böhm tree at depth `n`, putting `⊥` under the binders of
/// each cut leaf. Free variables and constants count as heads; `⊥`-bodied
/// forms are fixed points.
pub fn project(t: &NormalForm, n: usize) -> NormalForm {
    let p = project_in(t.term(), n, &mut Vec::new());
    NormalForm::certify(p).expect("projection of a normal form is normal")
}

/// Least `n` with `π^n(t) = t`.
pub fn bohm_depth(t: &Term) -> usize {
    let (_, body) = t.binders();
    match body {
        Term::Bot { .. } => 0,
        _ => {
            let (_, args) = body.spine();
            1 + args.into_iter().map(bohm_depth).max().unwrap_or(0)
        }
    }
}

// ---------------------------------------------------------------------------
// e

/// The projection ultrametric: `1/2^m` for the largest `m` with equal
/// projections; the discrete 0/1 distance at ground sort.
pub fn e_distance(t: &NormalForm, s: &NormalForm) -> Result<Dyadic, MetricsError> {
    let sort = same_sort(t.term(), s.term())?;
    if t == s {
        return Ok(Dyadic::Zero);
    }
    if !matches!(sort, Sort::Arrow(..)) {
        return Ok(Dyadic::ONE);
    }
    let limit = bohm_depth(t.term()).max(bohm_depth(s.term())) + 1;
    let mut m = 0;
    for n in 0..=limit {
        if project(t, n) == project(s, n) {
            m = n;
        } else {
            break;
        }
    }
    Ok(Dyadic::Inv(m as u32))
}

// ---------------------------------------------------------------------------
// Witness enumeration

/// Deterministic enumeration of η-long normal forms by size (number of head
/// symbols, ⊥ included), then by printed form.
#[derive(Debug, Clone)]
pub struct WitnessGen {
    pool: Vec<Term>,
    exact: HashMap<(Sort, Vec<Sort>, usize), Rc<Vec<Term>>>,
    cap: usize,
}

impl WitnessGen {
    /// `pool` holds free variables and constants usable as heads.
    pub fn new(pool: Vec<Term>, cap: usize) -> Self {
        WitnessGen { pool, exact: HashMap::new(), cap }
    }

    /// All normal forms of `sort` with size at most `budget`, at most `cap`
    /// of them.
    pub fn upto(&mut self, sort: &Sort, budget: usize) -> Vec<Term> {
        let mut out = Vec::new();
        for size in 1..=budget {
            let mut layer: Vec<Term> = self.exact_size(sort, &[], size).as_ref().clone();
            layer.sort_by_cached_key(|t| t.to_string());
            out.extend(layer);
            if out.len() >= self.cap {
                out.truncate(self.cap);
                break;
            }
        }
        out
    }

    fn exact_size(&mut self, sort: &Sort, ctx: &[Sort], size: usize) -> Rc<Vec<Term>> {
        let key = (sort.clone(), ctx.to_vec(), size);
        if let Some(v) = self.exact.get(&key) {
            return v.clone();
        }
        let (args, res) = sort.uncurry();
        let mut inner: Vec<Sort> = ctx.to_vec();
        inner.extend(args.iter().map(|s| (*s).clone()));
        let bodies = self.bodies(res, &inner, size);
        let wrapped: Vec<Term> = bodies
            .iter()
            .map(|b| {
                args.iter()
                    .enumerate()
                    .rev()
                    .fold(b.clone(), |acc, (i, s)| Term::lam_raw(&binder(ctx.len() + i), (*s).clone(), acc))
            })
            .collect();
        let rc = Rc::new(wrapped);
        self.exact.insert(key, rc.clone());
        rc
    }

    fn bodies(&mut self, res: &Sort, ctx: &[Sort], size: usize) -> Vec<Term> {
        let mut out = Vec::new();
        if size == 0 {
            return out;
        }
        if size == 1 {
            out.push(Term::bot(res.clone()));
        }
        let mut heads: Vec<(Term, Sort)> = Vec::new();
        for (p, s) in ctx.iter().enumerate() {
            heads.push((Term::bound(ctx.len() - 1 - p), s.clone()));
        }
        for h in &self.pool {
            if let Some(s) = head_sort(h, &[]) {
                heads.push((h.clone(), s));
            }
        }
        for (h, hs) in heads {
            let (hargs, hres) = hs.uncurry();
            if hres != res {
                continue;
            }
            let k = hargs.len();
            if k == 0 {
                if size == 1 {
                    out.push(h.clone());
                }
                continue;
            }
            if size - 1 < k {
                continue;
            }
            let hargs: Vec<Sort> = hargs.into_iter().cloned().collect();
            for parts in compositions(size - 1, k) {
                let choices: Vec<Rc<Vec<Term>>> = hargs
                    .iter()
                    .zip(&parts)
                    .map(|(s, &p)| self.exact_size(s, ctx, p))
                    .collect();
                if choices.iter().any(|c| c.is_empty()) {
                    continue;
                }
                let mut idx = vec![0usize; k];
                loop {
                    let args = (0..k).map(|i| choices[i][idx[i]].clone());
                    out.push(Term::apps(h.clone(), args));
                    if out.len() > self.cap * 4 {
                        return out;
                    }
                    let mut pos = k;
                    loop {
                        if pos == 0 {
                            break;
                        }
                        pos -= 1;
                        idx[pos] += 1;
                        if idx[pos] < choices[pos].len() {
                            break;
                        }
                        idx[pos] = 0;
                        if pos == 0 {
                            pos = usize::MAX;
                            break;
                        }
                    }
                    if pos == usize::MAX {
                        break;
                    }
                }
            }
        }
        out
    }
}

fn binder(i: usize) -> String {
    const NAMES: [&str; 6] = ["x", "y", "z", "v", "w", "q"];
    if i < NAMES.len() {
        NAMES[i].to_string()
    } else {
        format!("x{i}")
    }
}

/// Ordered ways to write `n` as a sum of `k` positive parts.
fn compositions(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return if n == 0 { vec![vec![]] } else { vec![] };
    }
    if k == 1 {
        return if n >= 1 { vec![vec![n]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in 1..=n.saturating_sub(k - 1) {
        for mut rest in compositions(n - first, k - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// d^NF

pub const DEFAULT_WITNESS_BUDGET: usize = 4;
const WITNESS_CAP: usize = 400;

/// Memoizing evaluator for `d^NF`. Witnesses range over normal forms of
/// the argument sort up to `budget`, built from ⊥, bound variables and the
/// free variables and constants of the terms it was seeded with.
pub struct DnfEngine {
    budget: usize,
    gen: WitnessGen,
    memo: HashMap<(Term, Term), DistCertificate>,
}

struct PairResult {
    v: Term,
    w: Term,
    dvw: DistCertificate,
    dapp: DistCertificate,
}

impl DnfEngine {
    pub fn new(budget: usize, seeds: &[&Term]) -> Self {
        let mut pool: Vec<Term> = Vec::new();
        for t in seeds {
            collect_heads(t, &mut pool);
        }
        pool.sort_by_cached_key(|t| t.to_string());
        pool.dedup();
        DnfEngine { budget, gen: WitnessGen::new(pool, WITNESS_CAP), memo: HashMap::new() }
    }

    pub fn witnesses(&mut self, sort: &Sort) -> Vec<Term> {
        self.gen.upto(sort, self.budget)
    }

    pub fn distance(&mut self, t: &NormalForm, s: &NormalForm) -> Result<DistCertificate, MetricsError> {
        let sort = same_sort(t.term(), s.term())?;
        let key = (t.term().clone(), s.term().clone());
        if let Some(c) = self.memo.get(&key) {
            return Ok(c.clone());
        }
        let cert = self.compute(t, s, &sort)?;
        self.memo.insert(key, cert.clone());
        Ok(cert)
    }

    fn compute(&mut self, t: &NormalForm, s: &NormalForm, sort: &Sort) -> Result<DistCertificate, MetricsError> {
        let budget = self.budget;
        let (arg_sort, _) = match sort.split_arrow() {
            Some(p) => p,
            None => {
                let value = if t == s { Dyadic::Zero } else { Dyadic::ONE };
                return Ok(DistCertificate { value, status: CertStatus::Exact, witness_budget: budget, failing_witness: None });
            }
        };
        let ws: Vec<NormalForm> = self
            .witnesses(arg_sort)
            .into_iter()
            .map(|w| NormalForm::certify(w).expect("witnesses are normal"))
            .collect();
        let mut pairs = Vec::with_capacity(ws.len() * ws.len());
        for v in &ws {
            let tv = normalize(&Term::app(t.term().clone(), v.term().clone()), None)?;
            for w in &ws {
                let dvw = self.distance(v, w)?;
                let sw = normalize(&Term::app(s.term().clone(), w.term().clone()), None)?;
                let dapp = self.distance(&tv, &sw)?;
                pairs.push(PairResult { v: v.term().clone(), w: w.term().clone(), dvw, dapp });
            }
        }
        let equal = t == s;
        let depth = bohm_depth(t.term()).max(bohm_depth(s.term()));
        let limit = if equal { depth + 1 } else { depth };
        // per level: passes, certified failure, failing pair
        let mut levels: Vec<(bool, bool, Option<usize>)> = Vec::with_capacity(limit + 1);
        for n in 0..=limit {
            let cond1 = project(t, n) == project(s, n);
            let n32 = n as u32;
            let bad = pairs
                .iter()
                .enumerate()
                .filter(|(_, p)| p.dvw.value.le_pow(n32) && !p.dapp.value.le_pow(n32));
            let mut first = None;
            let mut certified = !cond1;
            for (i, p) in bad {
                if first.is_none() {
                    first = Some(i);
                }
                if p.dvw.status == CertStatus::Exact && p.dapp.status == CertStatus::Exact {
                    certified = true;
                    first = Some(i);
                    break;
                }
            }
            levels.push((cond1 && first.is_none(), certified, first));
        }
        let m = levels.iter().rposition(|l| l.0).unwrap_or(0);
        if equal && m == limit {
            return Ok(DistCertificate { value: Dyadic::Zero, status: CertStatus::Exact, witness_budget: budget, failing_witness: None });
        }
        let exact = levels[m + 1..].iter().all(|l| l.1);
        let failing_witness = levels
            .get(m + 1)
            .and_then(|l| l.2)
            .map(|i| (pairs[i].v.clone(), pairs[i].w.clone()));
        Ok(DistCertificate {
            value: Dyadic::Inv(m as u32),
            status: if exact { CertStatus::Exact } else { CertStatus::LowerBound },
            witness_budget: budget,
            failing_witness,
        })
    }
}

fn collect_heads(t: &Term, out: &mut Vec<Term>) {
    match t {
        Term::Var { .. } | Term::Const { .. } => out.push(t.clone()),
        Term::App { fun, arg } => {
            collect_heads(fun, out);
            collect_heads(arg, out);
        }
        Term::Lam { body, .. } => collect_heads(body, out),
        _ => {}
    }
}

/// `d^NF(t, s)` with witnesses up to `witness_budget`.
pub fn dnf_distance(t: &NormalForm, s: &NormalForm, witness_budget: usize) -> Result<DistCertificate, MetricsError> {
    let mut eng = DnfEngine::new(witness_budget, &[t.term(), s.term()]);
    eng.distance(t, s)
}

// ---------------------------------------------------------------------------
// Böhm order

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OrderResult {
    pub comparable: bool,
    #[serde(skip_serializing_if = "Option::is_none", serialize_with = "ser_opt_term")]
    pub join: Option<NormalForm>,
}

fn ser_opt_term<S: Serializer>(t: &Option<NormalForm>, s: S) -> Result<S::Ok, S::Error> {
    match t {
        Some(t) => s.serialize_str(&t.to_string()),
        None => s.serialize_none(),
    }
}

fn join_terms(t: &Term, s: &Term) -> Option<Term> {
    if t == s {
        return Some(t.clone());
    }
    match (t, s) {
        (Term::Lam { name, sort, body }, Term::Lam { body: b2, .. }) => {
            Some(Term::lam_raw(name, sort.clone(), join_terms(body, b2)?))
        }
        (Term::Bot { .. }, x) | (x, Term::Bot { .. }) => Some(x.clone()),
        _ => {
            let (h1, a1) = t.spine();
            let (h2, a2) = s.spine();
            if h1 != h2 || a1.len() != a2.len() || matches!(h1, Term::Lam { .. }) {
                return None;
            }
            let mut args = Vec::with_capacity(a1.len());
            for (x, y) in a1.into_iter().zip(a2) {
                args.push(join_terms(x, y)?);
            }
            Some(Term::apps(h1.clone(), args))
        }
    }
}

/// `t ⊑ s` in the Böhm order (⊥ below everything at its sort).
pub fn below(t: &Term, s: &Term) -> bool {
    match (t, s) {
        (Term::Bot { .. }, _) => true,
        (Term::Lam { body, .. }, Term::Lam { body: b2, .. }) => below(body, b2),
        _ => {
            let (h1, a1) = t.spine();
            let (h2, a2) = s.spine();
            h1 == h2 && a1.len() == a2.len() && a1.into_iter().zip(a2).all(|(x, y)| below(x, y))
        }
    }
}

/// 0 when equal, 1/2 when an upper bound exists, 1 otherwise.
pub fn order_distance(t: &NormalForm, s: &NormalForm) -> Result<(Dyadic, OrderResult), MetricsError> {
    same_sort(t.term(), s.term())?;
    if t == s {
        return Ok((Dyadic::Zero, OrderResult { comparable: true, join: Some(t.clone()) }));
    }
    match join_terms(t.term(), s.term()) {
        Some(j) => {
            let j = NormalForm::certify(j).expect("join of normal forms is normal");
            Ok((Dyadic::Inv(1), OrderResult { comparable: true, join: Some(j) }))
        }
        None => Ok((Dyadic::ONE, OrderResult { comparable: false, join: None })),
    }
}

// ---------------------------------------------------------------------------
// Full type hierarchy

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FthStatus {
    Exact,
    BoundExhausted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FthResult {
    pub value: ExtReal,
    /// Largest base size at which the two terms agree (0 when equal).
    pub n: usize,
    pub status: FthStatus,
}

/// Cap on the number of elements enumerated for binder domains.
pub const FTH_ELEMENT_BUDGET: u64 = 2_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
enum FVal {
    Pt(usize),
    Fun(Rc<Vec<FVal>>),
}

struct Fts {
    n: usize,
    domains: HashMap<Sort, Rc<Vec<FVal>>>,
    spent: u64,
}

impl Fts {
    fn size(&self, s: &Sort) -> Result<u64, MetricsError> {
        match s {
            Sort::Arrow(a, b) => {
                let (da, db) = (self.size(a)?, self.size(b)?);
                let e = u32::try_from(da).map_err(|_| overflow(s))?;
                db.checked_pow(e).filter(|v| *v <= FTH_ELEMENT_BUDGET).ok_or_else(|| overflow(s))
            }
            Sort::Star => Err(MetricsError::Precondition("the full type hierarchy needs typed terms".into())),
            _ => Ok(self.n as u64),
        }
    }

    fn index(&self, v: &FVal, s: &Sort) -> Result<usize, MetricsError> {
        match (v, s) {
            (FVal::Pt(i), _) => Ok(*i),
            (FVal::Fun(tab), Sort::Arrow(_, b)) => {
                let base = self.size(b)? as usize;
                let mut acc = 0usize;
                for e in tab.iter().rev() {
                    acc = acc * base + self.index(e, b)?;
                }
                Ok(acc)
            }
            _ => Err(MetricsError::Precondition("value/sort mismatch".into())),
        }
    }

    fn domain(&mut self, s: &Sort) -> Result<Rc<Vec<FVal>>, MetricsError> {
        if let Some(d) = self.domains.get(s) {
            return Ok(d.clone());
        }
        let size = self.size(s)?;
        self.spent += size;
        if self.spent > FTH_ELEMENT_BUDGET {
            return Err(overflow(s));
        }
        let d: Vec<FVal> = match s {
            Sort::Arrow(a, b) => {
                let da = self.size(a)? as usize;
                let cod = self.domain(b)?;
                let base = cod.len();
                (0..size as usize)
                    .map(|mut k| {
                        let mut tab = Vec::with_capacity(da);
                        for _ in 0..da {
                            tab.push(cod[k % base].clone());
                            k /= base;
                        }
                        FVal::Fun(Rc::new(tab))
                    })
                    .collect()
            }
            _ => (0..self.n).map(FVal::Pt).collect(),
        };
        let rc = Rc::new(d);
        self.domains.insert(s.clone(), rc.clone());
        Ok(rc)
    }

    fn eval(&mut self, t: &Term, env: &mut Vec<FVal>, ctx: &mut Vec<Sort>) -> Result<FVal, MetricsError> {
        match t {
            Term::Bound { index } => Ok(env[env.len() - 1 - index].clone()),
            Term::Bot { .. } => Ok(FVal::Pt(0)),
            Term::App { fun, arg } => {
                let f = self.eval(fun, env, ctx)?;
                let a = self.eval(arg, env, ctx)?;
                let s = sort_of_in(arg, ctx)?;
                let i = self.index(&a, &s)?;
                match f {
                    FVal::Fun(tab) => Ok(tab[i].clone()),
                    FVal::Pt(_) => Err(MetricsError::Precondition("application of a point".into())),
                }
            }
            Term::Lam { sort, body, .. } => {
                let dom = self.domain(sort)?;
                let mut tab = Vec::with_capacity(dom.len());
                ctx.push(sort.clone());
                for d in dom.iter() {
                    env.push(d.clone());
                    let r = self.eval(body, env, ctx);
                    env.pop();
                    match r {
                        Ok(v) => tab.push(v),
                        Err(e) => {
                            ctx.pop();
                            return Err(e);
                        }
                    }
                }
                ctx.pop();
                Ok(FVal::Fun(Rc::new(tab)))
            }
            Term::Var { name, .. } => Err(MetricsError::Precondition(format!("free variable {name}"))),
            Term::Const { name, .. } => Err(MetricsError::Precondition(format!("constant {name} has no interpretation"))),
        }
    }
}

fn overflow(s: &Sort) -> MetricsError {
    MetricsError::Overflow(format!("carrier of {s} exceeds {FTH_ELEMENT_BUDGET} elements"))
}

/// Whether `t` and `s` evaluate to the same element of the full type
/// structure over `n` points (⊥ read as point 0).
pub fn fth_agree(t: &Term, s: &Term, n: usize) -> Result<bool, MetricsError> {
    let mut fts = Fts { n, domains: HashMap::new(), spent: 0 };
    let a = fts.eval(t, &mut Vec::new(), &mut Vec::new())?;
    let b = fts.eval(s, &mut Vec::new(), &mut Vec::new())?;
    Ok(a == b)
}

/// `1/N` with `N` the largest base size up to `n_max` where the closed
/// terms agree; 0 for βη-equal terms.
pub fn fth_distance(t: &NormalForm, s: &NormalForm, n_max: usize) -> Result<FthResult, MetricsError> {
    same_sort(t.term(), s.term())?;
    for x in [t, s] {
        if !x.term().free_vars().is_empty() {
            return Err(MetricsError::Precondition(format!("{x} is not closed")));
        }
    }
    if t == s {
        return Ok(FthResult { value: ExtReal::zero(), n: 0, status: FthStatus::Exact });
    }
    if n_max == 0 {
        return Err(MetricsError::Precondition("n_max must be at least 1".into()));
    }
    let mut best = 0;
    for n in 1..=n_max {
        if fth_agree(t.term(), s.term(), n)? {
            best = n;
        }
    }
    let status = if best == n_max { FthStatus::BoundExhausted } else { FthStatus::Exact };
    // over a one-point base everything agrees, so best >= 1
    let value = ExtReal::from_rational(BigRational::new(BigInt::from(1), BigInt::from(best.max(1))))
        .expect("positive");
    Ok(FthResult { value, n: best, status })
}

// ---------------------------------------------------------------------------
// Approximate application

/// `t ·^n s = [π^n(t) π^n(s)]`.
pub fn approx_apply(t: &NormalForm, s: &NormalForm, n: usize) -> Result<NormalForm, MetricsError> {
    let ts = sort_of(t.term())?;
    let ss = sort_of(s.term())?;
    match ts.split_arrow() {
        Some((d, _)) if *d == ss => {}
        _ => return Err(MetricsError::SortMismatch { left: ts.to_string(), right: ss.to_string() }),
    }
    let app = Term::app(project(t, n).into_term(), project(s, n).into_term());
    Ok(normalize(&app, None)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MonotonicityViolation {
    pub pair: usize,
    pub n: usize,
    pub at_n: Dyadic,
    pub at_next: Dyadic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Convergence {
    pub pair: usize,
    pub epsilon: Dyadic,
    /// Least `n` in range with `e(t·^n s, t·s) ≤ ε`.
    pub least_n: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NonExpansiveViolation {
    pub epsilon: Dyadic,
    /// Indices of the function pair and the argument pair.
    pub a: usize,
    pub b: usize,
    pub c: usize,
    pub d: usize,
    pub result: Dyadic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UniformBound {
    pub n: usize,
    /// Largest dyadic `ε ≤ 1/2^n` below which every scanned `ε` works.
    pub epsilon: Option<Dyadic>,
    pub violations: Vec<NonExpansiveViolation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ApproxReport {
    pub monotonicity: Vec<MonotonicityViolation>,
    pub convergence: Vec<Convergence>,
    pub uniform: Vec<UniformBound>,
}

/// Checks the three approximation conditions over `corpus` (function and
/// argument pairs) for `n` in `n_range` and the given `epsilons`.
pub fn check_approx_conditions(
    corpus: &[(NormalForm, NormalForm)],
    n_range: std::ops::RangeInclusive<usize>,
    epsilons: &[Dyadic],
) -> Result<ApproxReport, MetricsError> {
    let mut full = Vec::with_capacity(corpus.len());
    for (t, s) in corpus {
        full.push(normalize(&Term::app(t.term().clone(), s.term().clone()), None)?);
    }
    let mut gaps: Vec<Vec<Dyadic>> = Vec::new();
    let hi = *n_range.end();
    for (i, (t, s)) in corpus.iter().enumerate() {
        let mut row = Vec::new();
        for n in 0..=hi + 1 {
            row.push(e_distance(&approx_apply(t, s, n)?, &full[i])?);
        }
        gaps.push(row);
    }
    let mut monotonicity = Vec::new();
    for (i, row) in gaps.iter().enumerate() {
        for n in n_range.clone() {
            if row[n + 1] > row[n] {
                monotonicity.push(MonotonicityViolation { pair: i, n, at_n: row[n], at_next: row[n + 1] });
            }
        }
    }
    let mut convergence = Vec::new();
    for (i, row) in gaps.iter().enumerate() {
        for &eps in epsilons {
            let least_n = n_range.clone().find(|&n| row[n] <= eps);
            convergence.push(Convergence { pair: i, epsilon: eps, least_n });
        }
    }
    let max_depth = corpus
        .iter()
        .flat_map(|(t, s)| [bohm_depth(t.term()), bohm_depth(s.term())])
        .max()
        .unwrap_or(0);
    let mut uniform = Vec::new();
    for n in n_range.clone() {
        let floor = n + max_depth + 2;
        let mut violations = Vec::new();
        let mut epsilon = None;
        for k in (n..=floor).rev() {
            let eps = Dyadic::Inv(k as u32);
            let v = uniform_violations(corpus, n, eps)?;
            if v.is_empty() {
                epsilon = Some(eps);
            } else {
                violations.extend(v);
                break;
            }
        }
        uniform.push(UniformBound { n, epsilon, violations });
    }
    Ok(ApproxReport { monotonicity, convergence, uniform })
}

/// Splits corpus positions into classes of `e ≤ eps` per sort. Since `e`
/// is an ultrametric this relation is an equivalence, so comparing with
/// each class representative suffices.
fn eps_classes(items: &[(usize, &NormalForm)], eps: Dyadic) -> Result<Vec<Vec<usize>>, MetricsError> {
    let mut classes: Vec<(Sort, Vec<usize>)> = Vec::new();
    let mut seen: Vec<&Term> = Vec::new();
    for &(i, t) in items {
        if seen.contains(&t.term()) {
            continue;
        }
        seen.push(t.term());
        let st = sort_of(t.term())?;
        let mut placed = false;
        for (cs, members) in classes.iter_mut() {
            if *cs != st {
                continue;
            }
            let rep = items.iter().find(|(j, _)| *j == members[0]).map(|(_, r)| *r).expect("member");
            if e_distance(rep, t)? <= eps {
                members.push(i);
                placed = true;
                break;
            }
        }
        if !placed {
            classes.push((st, vec![i]));
        }
    }
    Ok(classes.into_iter().map(|(_, m)| m).collect())
}

/// Tuples `(a, b, c, d)` with `e(a,b) ≤ eps`, `e(c,d) ≤ eps` and
/// `e(a ·^n c, b ·^n d) > eps`. One witness per pair of classes: within
/// a class pair every result is compared with the first one.
fn uniform_violations(
    corpus: &[(NormalForm, NormalForm)],
    n: usize,
    eps: Dyadic,
) -> Result<Vec<NonExpansiveViolation>, MetricsError> {
    let funs: Vec<(usize, &NormalForm)> = corpus.iter().enumerate().map(|(i, (a, _))| (i, a)).collect();
    let args: Vec<(usize, &NormalForm)> = corpus.iter().enumerate().map(|(i, (_, c))| (i, c)).collect();
    let fcls = eps_classes(&funs, eps)?;
    let acls = eps_classes(&args, eps)?;
    let mut out = Vec::new();
    for fc in &fcls {
        let fsort = sort_of(corpus[fc[0]].0.term())?;
        let Some((dom, _)) = fsort.split_arrow() else { continue };
        for ac in &acls {
            if sort_of(corpus[ac[0]].1.term())? != *dom {
                continue;
            }
            let (a, c) = (fc[0], ac[0]);
            let base = approx_apply(&corpus[a].0, &corpus[c].1, n)?;
            'scan: for &b in fc {
                for &d in ac {
                    let r = e_distance(&base, &approx_apply(&corpus[b].0, &corpus[d].1, n)?)?;
                    if r > eps {
                        out.push(NonExpansiveViolation { epsilon: eps, a, b, c, d, result: r });
                        break 'scan;
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term_syntax::{parse_term, Signature};

    fn nf(src: &str) -> NormalForm {
        let t = parse_term(src, &Signature::typed_lambda()).unwrap();
        normalize(&t, None).unwrap()
    }

    #[test]
    fn projection_examples() {
        let t = nf("\\a:o->o. \\b:o->o. a (b (y : o))");
        assert_eq!(project(&t, 0), nf("\\a:o->o. \\b:o->o. bot"));
        assert_eq!(project(&t, 2), nf("\\a:o->o. \\b:o->o. a (b bot)"));
        assert_eq!(project(&t, 3), t);
        assert_eq!(bohm_depth(t.term()), 3);
    }

    #[test]
    fn dyadic_order() {
        assert!(Dyadic::Zero < Dyadic::Inv(5));
        assert!(Dyadic::Inv(2) < Dyadic::Inv(1));
        assert_eq!(Dyadic::Inv(2).to_string(), "1/4");
    }

    #[test]
    fn order_examples() {
        let (d, r) = order_distance(&nf("\\x:o. bot"), &nf("\\x:o. x")).unwrap();
        assert_eq!(d, Dyadic::Inv(1));
        assert_eq!(r.join.unwrap(), nf("\\x:o. x"));
        let (d, r) = order_distance(&nf("\\x:o. \\y:o. x"), &nf("\\x:o. \\y:o. y")).unwrap();
        assert_eq!((d, r.comparable), (Dyadic::ONE, false));
    }

    #[test]
    fn fth_examples() {
        let c2 = nf("\\f:o->o. \\x:o. f (f x)");
        let c4 = nf("\\f:o->o. \\x:o. f (f (f (f x)))");
        let r = fth_distance(&c2, &c4, 3).unwrap();
        assert_eq!((r.value.to_string(), r.n, r.status), ("1/2".to_string(), 2, FthStatus::Exact));
        let k = nf("\\x:o. \\y:o. x");
        let k2 = nf("\\x:o. \\y:o. y");
        assert_eq!(fth_distance(&k, &k2, 3).unwrap().value, ExtReal::one());
        assert_eq!(fth_distance(&c2, &c2, 3).unwrap().value, ExtReal::zero());
    }

    #[test]
    fn approx_apply_examples() {
        let i = nf("\\x:o. x");
        let r = approx_apply(&i, &nf("bot"), 0).unwrap();
        assert_eq!(r, nf("bot"));
    }

    #[test]
    fn base_dnf() {
        let c = dnf_distance(&nf("bot"), &nf("bot"), 3).unwrap();
        assert_eq!((c.value, c.status), (Dyadic::Zero, CertStatus::Exact));
    }

    #[test]
    fn compositions_count() {
        assert_eq!(compositions(4, 2).len(), 3);
        assert_eq!(compositions(2, 3).len(), 0);
    }
}

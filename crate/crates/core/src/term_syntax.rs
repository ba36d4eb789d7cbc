//! Sorts, signatures and terms for typed/untyped CL and λ-calculus with ⊥.
//!
//! Terms are locally nameless: bound occurrences are de Bruijn indices,
//! binders keep a surface name for printing only. Equality and hashing
//! ignore binder names, so `==` is α-equivalence.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use num_rational::BigRational;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::metric_core::{format_rational, parse_rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SyntaxError {
    #[error("syntax error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("unknown symbol or undeclared variable `{0}`")]
    UnknownSymbol(String),
    #[error("sort annotation mismatch: {0}")]
    Annotation(String),
    #[error("application of non-arrow term `{0}`")]
    NotArrow(String),
    #[error("argument sort mismatch in `{term}`: expected {expected}, found {found}")]
    ArgMismatch {
        term: String,
        expected: String,
        found: String,
    },
    #[error("bottom at non-base sort {0}")]
    BottomSort(String),
    #[error("substitution for `{0}` does not preserve its sort")]
    SubstSort(String),
    #[error("dangling bound index {0}")]
    Dangling(usize),
}

/// Simple types over named bases and rational intervals, plus the untyped
/// sort `*`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sort {
    Base(String),
    Interval(BigRational, BigRational),
    Arrow(Box<Sort>, Box<Sort>),
    Star,
}

impl Sort {
    pub fn base(name: &str) -> Sort {
        Sort::Base(name.to_string())
    }

    pub fn o() -> Sort {
        Sort::base("o")
    }

    /// `a -> b`, collapsing `* -> *` to `*`.
    pub fn arrow(a: Sort, b: Sort) -> Sort {
        if a == Sort::Star && b == Sort::Star {
            Sort::Star
        } else {
            Sort::Arrow(Box::new(a), Box::new(b))
        }
    }

    /// `args[0] -> ... -> args[n-1] -> result`.
    pub fn arrows(args: impl IntoIterator<Item = Sort>, result: Sort) -> Sort {
        let args: Vec<Sort> = args.into_iter().collect();
        args.into_iter().rev().fold(result, |acc, a| Sort::arrow(a, acc))
    }

    pub fn interval(lo: BigRational, hi: BigRational) -> Result<Sort, SyntaxError> {
        if lo > hi {
            return Err(SyntaxError::Annotation(format!(
                "interval [{},{}] has p > q",
                format_rational(&lo),
                format_rational(&hi)
            )));
        }
        Ok(Sort::Interval(lo, hi))
    }

    /// Base and interval sorts: the ones that may carry ⊥.
    pub fn is_ground(&self) -> bool {
        matches!(self, Sort::Base(_) | Sort::Interval(..))
    }

    pub fn split_arrow(&self) -> Option<(&Sort, &Sort)> {
        match self {
            Sort::Arrow(a, b) => Some((a, b)),
            _ => None,
        }
    }

    /// Argument sorts and final result of a curried sort.
    pub fn uncurry(&self) -> (Vec<&Sort>, &Sort) {
        let mut args = Vec::new();
        let mut cur = self;
        while let Sort::Arrow(a, b) = cur {
            args.push(a.as_ref());
            cur = b;
        }
        (args, cur)
    }

    /// Order of the sort: ground sorts have order 0.
    pub fn order(&self) -> usize {
        match self {
            Sort::Arrow(a, b) => (a.order() + 1).max(b.order()),
            _ => 0,
        }
    }

    pub fn contains_star(&self) -> bool {
        match self {
            Sort::Star => true,
            Sort::Arrow(a, b) => a.contains_star() || b.contains_star(),
            _ => false,
        }
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Base(n) => f.write_str(n),
            Sort::Interval(p, q) => write!(f, "[{},{}]", format_rational(p), format_rational(q)),
            Sort::Star => f.write_str("*"),
            Sort::Arrow(a, b) => {
                if matches!(**a, Sort::Arrow(..)) {
                    write!(f, "({a})->{b}")
                } else {
                    write!(f, "{a}->{b}")
                }
            }
        }
    }
}

impl FromStr for Sort {
    type Err = SyntaxError;
    fn from_str(s: &str) -> Result<Sort, SyntaxError> {
        parse_sort(s)
    }
}

impl Serialize for Sort {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Sort {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_sort(&s).map_err(serde::de::Error::custom)
    }
}

/// A λ/CL term. See the module docs for the binder representation.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Term {
    /// Free variable.
    Var { name: String, sort: Sort },
    /// Bound variable as a de Bruijn index.
    Bound { index: usize },
    Const { name: String, sort: Sort },
    Bot { sort: Sort },
    App { fun: Box<Term>, arg: Box<Term> },
    Lam { name: String, sort: Sort, body: Box<Term> },
}

impl PartialEq for Term {
    fn eq(&self, other: &Term) -> bool {
        match (self, other) {
            (Term::Var { name: a, sort: s }, Term::Var { name: b, sort: t }) => a == b && s == t,
            (Term::Bound { index: i }, Term::Bound { index: j }) => i == j,
            (Term::Const { name: a, sort: s }, Term::Const { name: b, sort: t }) => a == b && s == t,
            (Term::Bot { sort: s }, Term::Bot { sort: t }) => s == t,
            (Term::App { fun: f, arg: a }, Term::App { fun: g, arg: b }) => f == g && a == b,
            (Term::Lam { sort: s, body: b, .. }, Term::Lam { sort: t, body: c, .. }) => {
                s == t && b == c
            }
            _ => false,
        }
    }
}

impl Eq for Term {}

impl Hash for Term {
    fn hash<H: Hasher>(&self, h: &mut H) {
        std::mem::discriminant(self).hash(h);
        match self {
            Term::Var { name, sort } | Term::Const { name, sort } => {
                name.hash(h);
                sort.hash(h);
            }
            Term::Bound { index } => index.hash(h),
            Term::Bot { sort } => sort.hash(h),
            Term::App { fun, arg } => {
                fun.hash(h);
                arg.hash(h);
            }
            Term::Lam { sort, body, .. } => {
                sort.hash(h);
                body.hash(h);
            }
        }
    }
}

pub const COMBINATORS: [&str; 3] = ["I", "K", "S"];

pub fn is_combinator(name: &str) -> bool {
    COMBINATORS.contains(&name)
}

impl Term {
    pub fn var(name: &str, sort: Sort) -> Term {
        Term::Var { name: name.to_string(), sort }
    }

    pub fn bound(index: usize) -> Term {
        Term::Bound { index }
    }

    pub fn cnst(name: &str, sort: Sort) -> Term {
        Term::Const { name: name.to_string(), sort }
    }

    pub fn bot(sort: Sort) -> Term {
        Term::Bot { sort }
    }

    pub fn app(fun: Term, arg: Term) -> Term {
        Term::App { fun: Box::new(fun), arg: Box::new(arg) }
    }

    pub fn apps(head: Term, args: impl IntoIterator<Item = Term>) -> Term {
        args.into_iter().fold(head, Term::app)
    }

    /// `λname:sort. body`, binding the free variable `name` of `body`.
    pub fn lam(name: &str, sort: Sort, body: Term) -> Term {
        let closed = close(&body, name, &sort, 0);
        Term::Lam { name: name.to_string(), sort, body: Box::new(closed) }
    }

    /// Lambda node from an already de Bruijn-indexed body.
    pub fn lam_raw(name: &str, sort: Sort, body: Term) -> Term {
        Term::Lam { name: name.to_string(), sort, body: Box::new(body) }
    }

    /// Untyped combinator.
    pub fn comb(name: &str) -> Term {
        Term::cnst(name, Sort::Star)
    }

    /// `I_i : i -> i`.
    pub fn comb_i(i: &Sort) -> Term {
        Term::cnst("I", Sort::arrow(i.clone(), i.clone()))
    }

    /// `K_ij : i -> j -> i`.
    pub fn comb_k(i: &Sort, j: &Sort) -> Term {
        Term::cnst("K", Sort::arrows([i.clone(), j.clone()], i.clone()))
    }

    /// `S_ijk : (i -> j -> k) -> (i -> j) -> i -> k`.
    pub fn comb_s(i: &Sort, j: &Sort, k: &Sort) -> Term {
        let f = Sort::arrows([i.clone(), j.clone()], k.clone());
        let g = Sort::arrow(i.clone(), j.clone());
        Term::cnst("S", Sort::arrows([f, g, i.clone()], k.clone()))
    }

    pub fn is_lam(&self) -> bool {
        matches!(self, Term::Lam { .. })
    }

    /// Head and arguments of an application spine.
    pub fn spine(&self) -> (&Term, Vec<&Term>) {
        let mut args = Vec::new();
        let mut cur = self;
        while let Term::App { fun, arg } = cur {
            args.push(arg.as_ref());
            cur = fun;
        }
        args.reverse();
        (cur, args)
    }

    /// Binder spine: binder sorts/names and the body under them.
    pub fn binders(&self) -> (Vec<(&str, &Sort)>, &Term) {
        let mut bs = Vec::new();
        let mut cur = self;
        while let Term::Lam { name, sort, body } = cur {
            bs.push((name.as_str(), sort));
            cur = body;
        }
        (bs, cur)
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        match self {
            Term::App { fun, arg } => 1 + fun.size() + arg.size(),
            Term::Lam { body, .. } => 1 + body.size(),
            _ => 1,
        }
    }

    /// Nesting depth of application/abstraction nodes.
    pub fn depth(&self) -> usize {
        match self {
            Term::App { fun, arg } => 1 + fun.depth().max(arg.depth()),
            Term::Lam { body, .. } => 1 + body.depth(),
            _ => 0,
        }
    }

    pub fn has_lambda(&self) -> bool {
        match self {
            Term::Lam { .. } => true,
            Term::App { fun, arg } => fun.has_lambda() || arg.has_lambda(),
            _ => false,
        }
    }

    /// Whether every sort mentioned is `*`.
    pub fn is_untyped(&self) -> bool {
        match self {
            Term::Var { sort, .. } | Term::Const { sort, .. } | Term::Bot { sort } => {
                *sort == Sort::Star
            }
            Term::Bound { .. } => true,
            Term::App { fun, arg } => fun.is_untyped() && arg.is_untyped(),
            Term::Lam { sort, body, .. } => *sort == Sort::Star && body.is_untyped(),
        }
    }

    /// Free variables with their sorts.
    pub fn free_vars(&self) -> BTreeSet<(String, Sort)> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut out);
        out
    }

    fn collect_free(&self, out: &mut BTreeSet<(String, Sort)>) {
        match self {
            Term::Var { name, sort } => {
                out.insert((name.clone(), sort.clone()));
            }
            Term::App { fun, arg } => {
                fun.collect_free(out);
                arg.collect_free(out);
            }
            Term::Lam { body, .. } => body.collect_free(out),
            _ => {}
        }
    }

    pub fn free_names(&self) -> BTreeSet<String> {
        self.free_vars().into_iter().map(|(n, _)| n).collect()
    }

    pub fn has_free(&self, name: &str) -> bool {
        match self {
            Term::Var { name: n, .. } => n == name,
            Term::App { fun, arg } => fun.has_free(name) || arg.has_free(name),
            Term::Lam { body, .. } => body.has_free(name),
            _ => false,
        }
    }

    /// Surface names of all binders.
    pub fn bound_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        fn go(t: &Term, out: &mut BTreeSet<String>) {
            match t {
                Term::App { fun, arg } => {
                    go(fun, out);
                    go(arg, out);
                }
                Term::Lam { name, body, .. } => {
                    out.insert(name.clone());
                    go(body, out);
                }
                _ => {}
            }
        }
        go(self, &mut out);
        out
    }

    /// Whether no bound index escapes its binders.
    pub fn is_locally_closed(&self) -> bool {
        fn go(t: &Term, depth: usize) -> bool {
            match t {
                Term::Bound { index } => *index < depth,
                Term::App { fun, arg } => go(fun, depth) && go(arg, depth),
                Term::Lam { body, .. } => go(body, depth + 1),
                _ => true,
            }
        }
        go(self, 0)
    }

    /// Renames the free variable `from` to `to` (same sort).
    pub fn rename_free(&self, from: &str, to: &str) -> Term {
        match self {
            Term::Var { name, sort } if name == from => Term::var(to, sort.clone()),
            Term::App { fun, arg } => Term::app(fun.rename_free(from, to), arg.rename_free(from, to)),
            Term::Lam { name, sort, body } => {
                Term::lam_raw(name, sort.clone(), body.rename_free(from, to))
            }
            other => other.clone(),
        }
    }

    /// Renames binders (surface names only) with `f`.
    pub fn rename_binders(&self, f: &dyn Fn(&str) -> String) -> Term {
        match self {
            Term::App { fun, arg } => Term::app(fun.rename_binders(f), arg.rename_binders(f)),
            Term::Lam { name, sort, body } => Term::lam_raw(&f(name), sort.clone(), body.rename_binders(f)),
            other => other.clone(),
        }
    }
}

/// Replaces free `name:sort` with `Bound(depth)` under `depth` binders.
pub fn close(t: &Term, name: &str, sort: &Sort, depth: usize) -> Term {
    match t {
        Term::Var { name: n, sort: s } if n == name && s == sort => Term::bound(depth),
        Term::App { fun, arg } => Term::app(close(fun, name, sort, depth), close(arg, name, sort, depth)),
        Term::Lam { name: n, sort: s, body } => {
            Term::lam_raw(n, s.clone(), close(body, name, sort, depth + 1))
        }
        other => other.clone(),
    }
}

/// Shifts indices `>= cutoff` by `d`.
pub fn shift(t: &Term, d: isize, cutoff: usize) -> Term {
    if d == 0 {
        return t.clone();
    }
    match t {
        Term::Bound { index } if *index >= cutoff => {
            Term::bound((*index as isize + d).max(0) as usize)
        }
        Term::App { fun, arg } => Term::app(shift(fun, d, cutoff), shift(arg, d, cutoff)),
        Term::Lam { name, sort, body } => Term::lam_raw(name, sort.clone(), shift(body, d, cutoff + 1)),
        other => other.clone(),
    }
}

/// `body[0 := arg]` for the body of a binder, lowering the other indices.
pub fn instantiate(body: &Term, arg: &Term) -> Term {
    fn go(t: &Term, depth: usize, arg: &Term) -> Term {
        match t {
            Term::Bound { index } => match (*index).cmp(&depth) {
                std::cmp::Ordering::Equal => shift(arg, depth as isize, 0),
                std::cmp::Ordering::Greater => Term::bound(index - 1),
                std::cmp::Ordering::Less => t.clone(),
            },
            Term::App { fun, arg: a } => Term::app(go(fun, depth, arg), go(a, depth, arg)),
            Term::Lam { name, sort, body } => Term::lam_raw(name, sort.clone(), go(body, depth + 1, arg)),
            other => other.clone(),
        }
    }
    go(body, 0, arg)
}

/// Opens a binder with a fresh free variable.
pub fn open(body: &Term, name: &str, sort: &Sort) -> Term {
    instantiate(body, &Term::var(name, sort.clone()))
}

/// A name based on `base` not in `avoid`.
pub fn fresh_name(base: &str, avoid: &BTreeSet<String>) -> String {
    let mut cand = base.to_string();
    while avoid.contains(&cand) {
        cand.push('\'');
    }
    cand
}

/// Symbol declaration: argument sorts, result sort and an optional rational
/// interpretation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolDecl {
    pub args: Vec<Sort>,
    pub result: Sort,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<ConstTable>,
}

impl SymbolDecl {
    /// The curried sort of the symbol used as a constant.
    pub fn sort(&self) -> Sort {
        Sort::arrows(self.args.iter().cloned(), self.result.clone())
    }
}

/// Grid interpretation of a constant: a value, or a k-ary table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstTable {
    Value(#[serde(with = "rational_str")] BigRational),
    Function(Vec<TableRow>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRow {
    #[serde(with = "rational_vec_str")]
    pub args: Vec<BigRational>,
    #[serde(with = "rational_str")]
    pub value: BigRational,
}

pub mod rational_str {
    use super::*;
    pub fn serialize<S: Serializer>(r: &BigRational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(r))
    }
    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }
}

pub mod rational_vec_str {
    use super::*;
    pub fn serialize<S: Serializer>(r: &[BigRational], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(r.iter().map(format_rational))
    }
    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigRational>, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        v.iter()
            .map(|s| parse_rational(s).map_err(serde::de::Error::custom))
            .collect()
    }
}

/// A signature: which term formers are available plus named symbols.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    #[serde(default)]
    pub untyped: bool,
    #[serde(default)]
    pub combinators: bool,
    #[serde(default)]
    pub lambda: bool,
    #[serde(default)]
    pub bottom: bool,
    #[serde(default)]
    pub symbols: BTreeMap<String, SymbolDecl>,
}

impl Signature {
    /// Untyped combinatory logic.
    pub fn untyped_cl() -> Self {
        Signature { untyped: true, combinators: true, lambda: false, bottom: false, symbols: BTreeMap::new() }
    }

    /// Untyped λ-calculus (with combinators as constants).
    pub fn untyped_lambda() -> Self {
        Signature { untyped: true, combinators: true, lambda: true, bottom: true, symbols: BTreeMap::new() }
    }

    /// Typed combinatory logic.
    pub fn typed_cl() -> Self {
        Signature { untyped: false, combinators: true, lambda: false, bottom: true, symbols: BTreeMap::new() }
    }

    /// Simply typed λ-calculus with ⊥.
    pub fn typed_lambda() -> Self {
        Signature { untyped: false, combinators: true, lambda: true, bottom: true, symbols: BTreeMap::new() }
    }

    pub fn with_symbol(mut self, name: &str, args: Vec<Sort>, result: Sort) -> Self {
        self.symbols.insert(name.to_string(), SymbolDecl { args, result, table: None });
        self
    }

    pub fn with_table(mut self, name: &str, args: Vec<Sort>, result: Sort, table: ConstTable) -> Self {
        self.symbols.insert(name.to_string(), SymbolDecl { args, result, table: Some(table) });
        self
    }

    pub fn symbol(&self, name: &str) -> Option<&SymbolDecl> {
        self.symbols.get(name)
    }

    /// Adds a constant `r̄ : [lo,hi]` for every grid point `r`. A name
    /// already taken by another symbol gets primes appended (`r0'`).
    pub fn with_grid_constants(mut self, lo: &BigRational, hi: &BigRational, step: &BigRational) -> Self {
        let sort = Sort::Interval(lo.clone(), hi.clone());
        for r in crate::metric_core::grid_values(lo, hi, step) {
            if self.grid_constant(&r, &sort).is_some() {
                continue;
            }
            let mut name = grid_const_name(&r);
            while self.symbols.contains_key(&name) {
                name.push('\'');
            }
            let decl = SymbolDecl { args: vec![], result: sort.clone(), table: Some(ConstTable::Value(r.clone())) };
            self.symbols.insert(name, decl);
        }
        self
    }

    /// Value and sort of a 0-ary grid constant.
    pub fn grid_value(&self, name: &str) -> Option<(&BigRational, &Sort)> {
        let decl = self.symbols.get(name)?;
        match (&decl.table, decl.args.is_empty()) {
            (Some(ConstTable::Value(v)), true) => Some((v, &decl.result)),
            _ => None,
        }
    }

    /// The 0-ary grid constant with value `r` at `sort`, if declared.
    pub fn grid_constant(&self, r: &BigRational, sort: &Sort) -> Option<&str> {
        self.symbols.iter().find_map(|(n, d)| match &d.table {
            Some(ConstTable::Value(v)) if v == r && d.args.is_empty() && d.result == *sort => Some(n.as_str()),
            _ => None,
        })
    }
}

/// Surface name of the grid constant for `r`: `r0`, `r1_2`, `rn3_4`.
pub fn grid_const_name(r: &BigRational) -> String {
    let neg = r < &BigRational::from_integer(0.into());
    let a = if neg { -r.clone() } else { r.clone() };
    let body = if a.is_integer() { a.numer().to_string() } else { format!("{}_{}", a.numer(), a.denom()) };
    format!("r{}{}", if neg { "n" } else { "" }, body)
}

/// Whether `sort` is a legal sort for combinator `name`.
pub fn combinator_sort_ok(name: &str, sort: &Sort) -> bool {
    if *sort == Sort::Star {
        return true;
    }
    match (name, combinator_indices(name, sort)) {
        ("I", Some(ix)) => *sort == Term::comb_i(&ix[0]).sort_of_const(),
        ("K", Some(ix)) => *sort == Term::comb_k(&ix[0], &ix[1]).sort_of_const(),
        ("S", Some(ix)) => *sort == Term::comb_s(&ix[0], &ix[1], &ix[2]).sort_of_const(),
        _ => false,
    }
}

/// Sort indices of a typed combinator, read off its sort.
pub fn combinator_indices(name: &str, sort: &Sort) -> Option<Vec<Sort>> {
    let (a0, r0) = sort.split_arrow()?;
    match name {
        "I" => Some(vec![a0.clone()]),
        "K" => {
            let (a1, _) = r0.split_arrow()?;
            Some(vec![a0.clone(), a1.clone()])
        }
        "S" => {
            let (g, r1) = r0.split_arrow()?;
            let (i, k) = r1.split_arrow()?;
            let (_, j) = g.split_arrow()?;
            Some(vec![i.clone(), j.clone(), k.clone()])
        }
        _ => None,
    }
}

impl Term {
    fn sort_of_const(&self) -> Sort {
        match self {
            Term::Const { sort, .. } => sort.clone(),
            _ => unreachable!("only called on constants"),
        }
    }
}

/// Sort of `t` under `sig`, or the first sorting error.
pub fn typecheck(t: &Term, sig: &Signature) -> Result<Sort, SyntaxError> {
    let mut ctx = Vec::new();
    typecheck_in(t, sig, &mut ctx)
}

/// As [`typecheck`], with sorts for dangling indices (innermost last).
pub fn typecheck_in(t: &Term, sig: &Signature, ctx: &mut Vec<Sort>) -> Result<Sort, SyntaxError> {
    match t {
        Term::Var { sort, .. } => Ok(sort.clone()),
        Term::Bound { index } => {
            if *index < ctx.len() {
                Ok(ctx[ctx.len() - 1 - index].clone())
            } else {
                Err(SyntaxError::Dangling(*index))
            }
        }
        Term::Const { name, sort } => {
            if is_combinator(name) && sig.combinators && !sig.symbols.contains_key(name) {
                if combinator_sort_ok(name, sort) {
                    Ok(sort.clone())
                } else {
                    Err(SyntaxError::Annotation(format!("{name} cannot have sort {sort}")))
                }
            } else if let Some(decl) = sig.symbol(name) {
                let declared = if sig.untyped { Sort::Star } else { decl.sort() };
                if declared == *sort {
                    Ok(sort.clone())
                } else {
                    Err(SyntaxError::Annotation(format!(
                        "{name} is declared at {declared}, used at {sort}"
                    )))
                }
            } else {
                Err(SyntaxError::UnknownSymbol(name.clone()))
            }
        }
        Term::Bot { sort } => {
            if sort.is_ground() || *sort == Sort::Star {
                Ok(sort.clone())
            } else {
                Err(SyntaxError::BottomSort(sort.to_string()))
            }
        }
        Term::App { fun, arg } => {
            let fs = typecheck_in(fun, sig, ctx)?;
            let as_ = typecheck_in(arg, sig, ctx)?;
            match fs {
                Sort::Star if as_ == Sort::Star => Ok(Sort::Star),
                Sort::Arrow(d, c) => {
                    if *d == as_ {
                        Ok(*c)
                    } else {
                        Err(SyntaxError::ArgMismatch {
                            term: t.to_string(),
                            expected: d.to_string(),
                            found: as_.to_string(),
                        })
                    }
                }
                Sort::Star => Err(SyntaxError::ArgMismatch {
                    term: t.to_string(),
                    expected: "*".into(),
                    found: as_.to_string(),
                }),
                _ => Err(SyntaxError::NotArrow(fun.to_string())),
            }
        }
        Term::Lam { sort, body, .. } => {
            ctx.push(sort.clone());
            let r = typecheck_in(body, sig, ctx);
            ctx.pop();
            Ok(Sort::arrow(sort.clone(), r?))
        }
    }
}

/// Sort of a term without checking constants against a signature.
pub fn sort_of(t: &Term) -> Result<Sort, SyntaxError> {
    sort_of_in(t, &mut Vec::new())
}

/// As [`sort_of`], with sorts for dangling indices (innermost last).
pub fn sort_of_in(t: &Term, ctx: &mut Vec<Sort>) -> Result<Sort, SyntaxError> {
    let sig = Signature { untyped: false, combinators: false, lambda: true, bottom: true, symbols: BTreeMap::new() };
    fn go(t: &Term, sig: &Signature, ctx: &mut Vec<Sort>) -> Result<Sort, SyntaxError> {
        match t {
            Term::Const { sort, .. } => Ok(sort.clone()),
            Term::App { fun, arg } => {
                let fs = go(fun, sig, ctx)?;
                let as_ = go(arg, sig, ctx)?;
                match fs {
                    Sort::Star if as_ == Sort::Star => Ok(Sort::Star),
                    Sort::Arrow(d, c) if *d == as_ => Ok(*c),
                    Sort::Arrow(d, _) => Err(SyntaxError::ArgMismatch {
                        term: t.to_string(),
                        expected: d.to_string(),
                        found: as_.to_string(),
                    }),
                    _ => Err(SyntaxError::NotArrow(fun.to_string())),
                }
            }
            Term::Lam { sort, body, .. } => {
                ctx.push(sort.clone());
                let r = go(body, sig, ctx);
                ctx.pop();
                Ok(Sort::arrow(sort.clone(), r?))
            }
            other => typecheck_in(other, sig, ctx),
        }
    }
    go(t, &sig, ctx)
}

/// Substitution environment keyed by free-variable name.
pub type Environment = BTreeMap<String, Term>;

/// Capture-avoiding simultaneous substitution of free variables.
///
/// Binder indices already rule out capture; binders whose surface name
/// clashes with a free name of an inserted term are renamed so the printed
/// form stays faithful.
pub fn substitute(t: &Term, env: &Environment) -> Result<Term, SyntaxError> {
    for (name, (vname, vsort)) in env.iter().filter_map(|(k, v)| {
        t.free_vars().into_iter().find(|(n, _)| n == k).map(|fv| (k, (fv, v)))
    }) {
        let image_sort = sort_of(vsort).map_err(|_| SyntaxError::SubstSort(name.clone()))?;
        if image_sort != vname.1 {
            return Err(SyntaxError::SubstSort(name.clone()));
        }
    }
    let mut avoid: BTreeSet<String> = BTreeSet::new();
    for fv in t.free_names() {
        if let Some(img) = env.get(&fv) {
            avoid.extend(img.free_names());
        }
    }
    let all_free: BTreeSet<String> = {
        let mut s = t.free_names();
        s.extend(avoid.iter().cloned());
        s
    };
    Ok(subst_go(t, env, 0, &avoid, &all_free))
}

fn subst_go(
    t: &Term,
    env: &Environment,
    depth: usize,
    avoid: &BTreeSet<String>,
    all_free: &BTreeSet<String>,
) -> Term {
    match t {
        Term::Var { name, .. } => match env.get(name) {
            Some(img) => shift(img, depth as isize, 0),
            None => t.clone(),
        },
        Term::App { fun, arg } => Term::app(
            subst_go(fun, env, depth, avoid, all_free),
            subst_go(arg, env, depth, avoid, all_free),
        ),
        Term::Lam { name, sort, body } => {
            let new_body = subst_go(body, env, depth + 1, avoid, all_free);
            let new_name = if avoid.contains(name) {
                let mut taken = all_free.clone();
                taken.extend(new_body.bound_names());
                fresh_name(name, &taken)
            } else {
                name.clone()
            };
            Term::lam_raw(&new_name, sort.clone(), new_body)
        }
        other => other.clone(),
    }
}

/// α-equivalence: identity of the de Bruijn forms.
pub fn alpha_eq(t: &Term, s: &Term) -> bool {
    t == s
}

// ---------------------------------------------------------------------------
// Printing

struct Printer {
    annotate_free: bool,
    seen_free: BTreeSet<String>,
    reserved: BTreeSet<String>,
}

impl Printer {
    fn term(&mut self, t: &Term, scope: &mut Vec<String>, out: &mut String) {
        match t {
            Term::Lam { .. } => {
                out.push('\\');
                let mut cur = t;
                let mut first = true;
                let mut pushed = 0;
                while let Term::Lam { name, sort, body } = cur {
                    let mut avoid = self.reserved.clone();
                    avoid.extend(scope.iter().cloned());
                    let nm = fresh_name(name, &avoid);
                    if !first {
                        out.push(' ');
                    }
                    first = false;
                    out.push_str(&nm);
                    if *sort != Sort::Star {
                        out.push(':');
                        out.push_str(&sort.to_string());
                    }
                    scope.push(nm);
                    pushed += 1;
                    cur = body;
                    // a binder whose sort is an arrow prints ambiguously if
                    // another binder follows, so split the group
                    if matches!(sort, Sort::Arrow(..)) {
                        break;
                    }
                }
                out.push_str(". ");
                self.term(cur, scope, out);
                for _ in 0..pushed {
                    scope.pop();
                }
            }
            Term::App { .. } => {
                let (head, args) = t.spine();
                self.atom(head, scope, out, true);
                for a in args {
                    out.push(' ');
                    self.atom(a, scope, out, false);
                }
            }
            _ => self.atom(t, scope, out, true),
        }
    }

    fn atom(&mut self, t: &Term, scope: &mut Vec<String>, out: &mut String, head: bool) {
        match t {
            Term::Var { name, sort } => {
                if self.annotate_free && *sort != Sort::Star && self.seen_free.insert(name.clone()) {
                    out.push_str(&format!("({name} : {sort})"));
                } else {
                    out.push_str(name);
                }
            }
            Term::Bound { index } => {
                if *index < scope.len() {
                    out.push_str(&scope[scope.len() - 1 - index]);
                } else {
                    out.push_str(&format!("#{index}"));
                }
            }
            Term::Const { name, sort } => {
                out.push_str(name);
                if is_combinator(name) && *sort != Sort::Star {
                    if let Some(ix) = combinator_indices(name, sort) {
                        let parts: Vec<String> = ix.iter().map(|s| s.to_string()).collect();
                        out.push_str(&format!("[{}]", parts.join(",")));
                    }
                }
            }
            Term::Bot { sort } => {
                out.push_str("bot");
                if *sort != Sort::Star && *sort != Sort::o() {
                    out.push_str(&format!("[{sort}]"));
                }
            }
            Term::App { .. } if head => self.term(t, scope, out),
            _ => {
                out.push('(');
                self.term(t, scope, out);
                out.push(')');
            }
        }
    }
}

fn reserved_names(t: &Term) -> BTreeSet<String> {
    let mut r: BTreeSet<String> = t.free_names();
    fn consts(t: &Term, r: &mut BTreeSet<String>) {
        match t {
            Term::Const { name, .. } => {
                r.insert(name.clone());
            }
            Term::App { fun, arg } => {
                consts(fun, r);
                consts(arg, r);
            }
            Term::Lam { body, .. } => consts(body, r),
            _ => {}
        }
    }
    consts(t, &mut r);
    for c in COMBINATORS {
        r.insert(c.to_string());
    }
    r.insert("bot".into());
    r
}

/// Parseable surface form: `#star` prefix for untyped terms, and typed free
/// variables annotated at their first occurrence.
pub fn print_term(t: &Term) -> String {
    let untyped = t.is_untyped();
    let mut p = Printer { annotate_free: !untyped, seen_free: BTreeSet::new(), reserved: reserved_names(t) };
    let mut out = String::new();
    if untyped {
        out.push_str("#star ");
    }
    p.term(t, &mut Vec::new(), &mut out);
    out
}

/// Surface form without free-variable annotations; parse it back with a
/// variable context.
pub fn print_plain(t: &Term) -> String {
    t.to_string()
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut p = Printer { annotate_free: false, seen_free: BTreeSet::new(), reserved: reserved_names(self) };
        let mut out = String::new();
        p.term(self, &mut Vec::new(), &mut out);
        f.write_str(&out)
    }
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Lambda,
    Ident(String),
    Num(String),
    Colon,
    Dot,
    LParen,
    RParen,
    LBrack,
    RBrack,
    Comma,
    Arrow,
    Star,
    StarFlag,
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, SyntaxError> {
    let mut out = Vec::new();
    let bytes: Vec<(usize, char)> = src.char_indices().collect();
    let mut i = 0;
    let err = |off: usize, m: &str| SyntaxError::Parse { offset: off, message: m.to_string() };
    while i < bytes.len() {
        let (off, c) = bytes[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '\\' | 'λ' => {
                out.push((Tok::Lambda, off));
                i += 1;
            }
            ':' => {
                out.push((Tok::Colon, off));
                i += 1;
            }
            '.' => {
                out.push((Tok::Dot, off));
                i += 1;
            }
            '(' => {
                out.push((Tok::LParen, off));
                i += 1;
            }
            ')' => {
                out.push((Tok::RParen, off));
                i += 1;
            }
            '[' => {
                out.push((Tok::LBrack, off));
                i += 1;
            }
            ']' => {
                out.push((Tok::RBrack, off));
                i += 1;
            }
            ',' => {
                out.push((Tok::Comma, off));
                i += 1;
            }
            '*' | '★' => {
                out.push((Tok::Star, off));
                i += 1;
            }
            '→' => {
                out.push((Tok::Arrow, off));
                i += 1;
            }
            '-' if i + 1 < bytes.len() && bytes[i + 1].1 == '>' => {
                out.push((Tok::Arrow, off));
                i += 2;
            }
            '#' => {
                let start = i + 1;
                let mut j = start;
                while j < bytes.len() && bytes[j].1.is_alphanumeric() {
                    j += 1;
                }
                let word: String = bytes[start..j].iter().map(|(_, c)| *c).collect();
                if word == "star" {
                    out.push((Tok::StarFlag, off));
                    i = j;
                } else {
                    return Err(err(off, &format!("unknown directive #{word}")));
                }
            }
            c if c.is_ascii_digit() || c == '-' => {
                let mut j = i + 1;
                while j < bytes.len() && (bytes[j].1.is_ascii_digit() || bytes[j].1 == '/') {
                    j += 1;
                }
                let s: String = bytes[i..j].iter().map(|(_, c)| *c).collect();
                if s == "-" {
                    return Err(err(off, "stray '-'"));
                }
                out.push((Tok::Num(s), off));
                i = j;
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut j = i + 1;
                while j < bytes.len()
                    && (bytes[j].1.is_alphanumeric() || bytes[j].1 == '_' || bytes[j].1 == '\'')
                {
                    j += 1;
                }
                let s: String = bytes[i..j].iter().map(|(_, c)| *c).collect();
                out.push((Tok::Ident(s), off));
                i = j;
            }
            other => return Err(err(off, &format!("unexpected character {other:?}"))),
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
    sig: &'a Signature,
    untyped: bool,
    vars: BTreeMap<String, Sort>,
    scope: Vec<(String, Sort)>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(_, o)| *o).unwrap_or(self.end)
    }

    fn err<T>(&self, m: impl Into<String>) -> Result<T, SyntaxError> {
        Err(SyntaxError::Parse { offset: self.offset(), message: m.into() })
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), SyntaxError> {
        if self.peek() == Some(&t) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn sort(&mut self) -> Result<Sort, SyntaxError> {
        let lhs = self.sort_atom()?;
        if self.peek() == Some(&Tok::Arrow) {
            self.pos += 1;
            let rhs = self.sort()?;
            Ok(Sort::arrow(lhs, rhs))
        } else {
            Ok(lhs)
        }
    }

    fn sort_atom(&mut self) -> Result<Sort, SyntaxError> {
        match self.peek().cloned() {
            Some(Tok::Ident(n)) => {
                self.pos += 1;
                Ok(Sort::Base(n))
            }
            Some(Tok::Star) => {
                self.pos += 1;
                Ok(Sort::Star)
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let s = self.sort()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(s)
            }
            Some(Tok::LBrack) => {
                self.pos += 1;
                let lo = self.rational()?;
                self.expect(Tok::Comma, "','")?;
                let hi = self.rational()?;
                self.expect(Tok::RBrack, "']'")?;
                Sort::interval(lo, hi)
            }
            _ => self.err("expected a sort"),
        }
    }

    fn rational(&mut self) -> Result<BigRational, SyntaxError> {
        match self.peek().cloned() {
            Some(Tok::Num(s)) => {
                let off = self.offset();
                self.pos += 1;
                parse_rational(&s).map_err(|e| SyntaxError::Parse { offset: off, message: e.to_string() })
            }
            _ => self.err("expected a rational"),
        }
    }

    fn sort_list(&mut self) -> Result<Vec<Sort>, SyntaxError> {
        self.expect(Tok::LBrack, "'['")?;
        let mut v = vec![self.sort()?];
        while self.peek() == Some(&Tok::Comma) {
            self.pos += 1;
            v.push(self.sort()?);
        }
        self.expect(Tok::RBrack, "']'")?;
        Ok(v)
    }

    fn term(&mut self) -> Result<Term, SyntaxError> {
        if self.peek() == Some(&Tok::Lambda) {
            return self.lambda();
        }
        let mut t = self.atom()?;
        loop {
            match self.peek() {
                Some(Tok::Lambda) => {
                    let a = self.lambda()?;
                    t = Term::app(t, a);
                    return Ok(t);
                }
                Some(Tok::Ident(_)) | Some(Tok::LParen) => {
                    let a = self.atom()?;
                    t = Term::app(t, a);
                }
                _ => return Ok(t),
            }
        }
    }

    fn lambda(&mut self) -> Result<Term, SyntaxError> {
        if !self.sig.lambda {
            return self.err("λ is not part of this signature");
        }
        self.expect(Tok::Lambda, "'\\'")?;
        let mut binders = Vec::new();
        loop {
            let name = match self.peek().cloned() {
                Some(Tok::Ident(n)) => n,
                _ => return self.err("expected a binder name"),
            };
            self.pos += 1;
            let sort = if self.peek() == Some(&Tok::Colon) {
                self.pos += 1;
                let s = self.sort()?;
                if self.untyped && s != Sort::Star {
                    return Err(SyntaxError::Annotation(format!("binder {name} has sort {s} in the untyped regime")));
                }
                s
            } else if self.untyped {
                Sort::Star
            } else {
                return self.err(format!("binder {name} needs a sort"));
            };
            binders.push((name, sort));
            match self.peek() {
                Some(Tok::Dot) => {
                    self.pos += 1;
                    break;
                }
                Some(Tok::Ident(_)) => continue,
                _ => return self.err("expected '.' or another binder"),
            }
        }
        let n = binders.len();
        for b in &binders {
            self.scope.push(b.clone());
        }
        let body = self.term();
        for _ in 0..n {
            self.scope.pop();
        }
        let mut t = body?;
        for (name, sort) in binders.into_iter().rev() {
            t = Term::lam_raw(&name, sort, t);
        }
        Ok(t)
    }

    fn atom(&mut self) -> Result<Term, SyntaxError> {
        match self.peek().cloned() {
            Some(Tok::LParen) => {
                if let (Some(Tok::Ident(n)), Some(Tok::Colon)) = (self.peek_at(1).cloned(), self.peek_at(2)) {
                    self.pos += 3;
                    let s = self.sort()?;
                    self.expect(Tok::RParen, "')'")?;
                    return self.annotated_var(&n, s);
                }
                self.pos += 1;
                let t = self.term()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(t)
            }
            Some(Tok::Ident(n)) => {
                self.pos += 1;
                self.ident(&n)
            }
            Some(_) => self.err("unexpected token"),
            None => self.err("unexpected end of input"),
        }
    }

    fn annotated_var(&mut self, n: &str, s: Sort) -> Result<Term, SyntaxError> {
        if self.scope.iter().any(|(b, _)| b == n) {
            return Err(SyntaxError::Annotation(format!("{n} is bound here and cannot be annotated")));
        }
        if let Some(prev) = self.vars.get(n) {
            if *prev != s {
                return Err(SyntaxError::Annotation(format!("{n} declared at {prev}, annotated {s}")));
            }
        }
        self.vars.insert(n.to_string(), s.clone());
        Ok(Term::var(n, s))
    }

    fn ident(&mut self, n: &str) -> Result<Term, SyntaxError> {
        if let Some(pos) = self.scope.iter().rposition(|(b, _)| b == n) {
            return Ok(Term::bound(self.scope.len() - 1 - pos));
        }
        if n == "bot" {
            if !self.sig.bottom && !self.untyped {
                return self.err("⊥ is not part of this signature");
            }
            if self.peek() == Some(&Tok::LBrack) {
                let mut v = self.sort_list()?;
                if v.len() != 1 {
                    return self.err("bot takes one sort");
                }
                return Ok(Term::bot(v.remove(0)));
            }
            return Ok(Term::bot(if self.untyped { Sort::Star } else { Sort::o() }));
        }
        if is_combinator(n) && self.sig.combinators && !self.sig.symbols.contains_key(n) {
            if self.untyped {
                return Ok(Term::comb(n));
            }
            if self.peek() != Some(&Tok::LBrack) {
                return self.err(format!("typed combinator {n} needs sort indices, e.g. {n}[o]"));
            }
            let ix = self.sort_list()?;
            return match (n, ix.as_slice()) {
                ("I", [i]) => Ok(Term::comb_i(i)),
                ("K", [i, j]) => Ok(Term::comb_k(i, j)),
                ("S", [i, j, k]) => Ok(Term::comb_s(i, j, k)),
                _ => self.err(format!("wrong number of sort indices for {n}")),
            };
        }
        if let Some(decl) = self.sig.symbol(n) {
            let sort = if self.untyped { Sort::Star } else { decl.sort() };
            return Ok(Term::cnst(n, sort));
        }
        if let Some(s) = self.vars.get(n) {
            return Ok(Term::var(n, s.clone()));
        }
        if self.untyped {
            return Ok(Term::var(n, Sort::Star));
        }
        Err(SyntaxError::UnknownSymbol(n.to_string()))
    }
}

/// Parses a sort such as `o->o`, `(o->o)->o`, `[0,1]->[0,5/4]` or `*`.
pub fn parse_sort(text: &str) -> Result<Sort, SyntaxError> {
    let toks = lex(text)?;
    let sig = Signature::typed_lambda();
    let mut p = Parser { toks, pos: 0, end: text.len(), sig: &sig, untyped: false, vars: BTreeMap::new(), scope: Vec::new() };
    let s = p.sort()?;
    if p.pos != p.toks.len() {
        return p.err("trailing input after sort");
    }
    Ok(s)
}

/// Parses a term; see [`parse_term_with`].
pub fn parse_term(text: &str, sig: &Signature) -> Result<Term, SyntaxError> {
    parse_term_with(text, sig, &BTreeMap::new())
}

/// Parses a term with sorts for free variables given up front. Free
/// variables may also be annotated inline as `(x : SORT)`; the sort then
/// sticks for later occurrences. A leading `#star` selects the untyped
/// regime.
pub fn parse_term_with(
    text: &str,
    sig: &Signature,
    vars: &BTreeMap<String, Sort>,
) -> Result<Term, SyntaxError> {
    let mut toks = lex(text)?;
    let mut untyped = sig.untyped;
    if let Some((Tok::StarFlag, _)) = toks.first() {
        untyped = true;
        toks.remove(0);
    }
    let mut p = Parser { toks, pos: 0, end: text.len(), sig, untyped, vars: vars.clone(), scope: Vec::new() };
    if p.toks.is_empty() {
        return p.err("empty term");
    }
    let t = p.term()?;
    if p.pos != p.toks.len() {
        return p.err("trailing input after term");
    }
    Ok(t)
}

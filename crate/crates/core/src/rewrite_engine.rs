//! β-normalization with η-long canonical forms, weak CL reduction and
//! bracket abstraction.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::term_syntax::{
    combinator_indices, instantiate, shift, sort_of, sort_of_in, Sort, SyntaxError, Term,
};

pub const DEFAULT_FUEL: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RewriteError {
    #[error("out of fuel after {steps} steps")]
    OutOfFuel { steps: usize },
    #[error("ill-typed term: {0}")]
    IllTyped(#[from] SyntaxError),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// Untyped step budget: `QLAM_FUEL` if set, else [`DEFAULT_FUEL`].
pub fn default_fuel() -> usize {
    std::env::var("QLAM_FUEL")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_FUEL)
}

/// A term certified β-normal and η-long.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NormalForm(Term);

impl NormalForm {
    /// Re-checks the shape and wraps the term.
    pub fn certify(t: Term) -> Result<NormalForm, RewriteError> {
        if is_normal_form(&t) {
            Ok(NormalForm(t))
        } else {
            Err(RewriteError::Precondition(format!("{t} is not a β-normal η-long term")))
        }
    }

    pub fn term(&self) -> &Term {
        &self.0
    }

    pub fn into_term(self) -> Term {
        self.0
    }
}

impl std::fmt::Display for NormalForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Whether `t` has a β-redex anywhere.
pub fn has_beta_redex(t: &Term) -> bool {
    match t {
        Term::App { fun, arg } => fun.is_lam() || has_beta_redex(fun) || has_beta_redex(arg),
        Term::Lam { body, .. } => has_beta_redex(body),
        _ => false,
    }
}

/// Linear scan: no β-redex, no combinator constants, and every maximal
/// application (or leaf) not under a λ-spine of its own sits at ground sort.
/// Untyped terms only need to be β-normal.
pub fn is_normal_form(t: &Term) -> bool {
    fn go(t: &Term, ctx: &mut Vec<Sort>) -> bool {
        match t {
            Term::Lam { sort, body, .. } => {
                ctx.push(sort.clone());
                let ok = go(body, ctx);
                ctx.pop();
                ok
            }
            _ => {
                let (head, args) = t.spine();
                if head.is_lam() {
                    return false;
                }
                if let Term::Const { name, .. } = head {
                    if crate::term_syntax::is_combinator(name) {
                        return false;
                    }
                }
                match sort_of_in(t, ctx) {
                    Ok(Sort::Arrow(..)) => return false,
                    Ok(_) => {}
                    Err(_) => return false,
                }
                args.into_iter().all(|a| go(a, ctx))
            }
        }
    }
    go(t, &mut Vec::new())
}

/// The λ-definition of a combinator constant.
fn combinator_lambda(name: &str, sort: &Sort) -> Option<Term> {
    let b = Term::bound;
    let untyped = *sort == Sort::Star;
    let ix = if untyped { vec![Sort::Star; 3] } else { combinator_indices(name, sort)? };
    let arr = |a: &Sort, c: &Sort| Sort::arrow(a.clone(), c.clone());
    match name {
        "I" => Some(Term::lam_raw("x", ix[0].clone(), b(0))),
        "K" => Some(Term::lam_raw("x", ix[0].clone(), Term::lam_raw("y", ix[1].clone(), b(1)))),
        "S" => {
            let (i, j, k) = (&ix[0], &ix[1], &ix[2]);
            let f = Sort::arrows([i.clone(), j.clone()], k.clone());
            let body = Term::app(Term::app(b(2), b(0)), Term::app(b(1), b(0)));
            Some(Term::lam_raw(
                "f",
                f,
                Term::lam_raw("g", arr(i, j), Term::lam_raw("x", i.clone(), body)),
            ))
        }
        _ => None,
    }
}

/// Replaces I, K, S constants with their λ-definitions.
pub fn expand_combinators(t: &Term) -> Term {
    match t {
        Term::Const { name, sort } => combinator_lambda(name, sort).unwrap_or_else(|| t.clone()),
        Term::App { fun, arg } => Term::app(expand_combinators(fun), expand_combinators(arg)),
        Term::Lam { name, sort, body } => Term::lam_raw(name, sort.clone(), expand_combinators(body)),
        other => other.clone(),
    }
}

struct Fuel {
    left: usize,
    used: usize,
}

impl Fuel {
    fn new(limit: usize) -> Self {
        Fuel { left: limit, used: 0 }
    }

    fn tick(&mut self) -> Result<(), RewriteError> {
        if self.left == 0 {
            return Err(RewriteError::OutOfFuel { steps: self.used });
        }
        self.left -= 1;
        self.used += 1;
        Ok(())
    }
}

fn rebuild(head: Term, args: impl IntoIterator<Item = Term>) -> Term {
    Term::apps(head, args)
}

/// Weak head normal form by normal-order β.
fn whnf(t: Term, fuel: &mut Fuel) -> Result<Term, RewriteError> {
    let mut cur = t;
    loop {
        let (head, args) = {
            let (h, a) = cur.spine();
            (h.clone(), a.into_iter().cloned().collect::<Vec<_>>())
        };
        match head {
            Term::Lam { body, .. } if !args.is_empty() => {
                fuel.tick()?;
                let mut it = args.into_iter();
                let first = it.next().expect("non-empty");
                cur = rebuild(instantiate(&body, &first), it);
            }
            _ => return Ok(cur),
        }
    }
}

fn beta_nf(t: Term, fuel: &mut Fuel) -> Result<Term, RewriteError> {
    let w = whnf(t, fuel)?;
    match w {
        Term::Lam { name, sort, body } => Ok(Term::lam_raw(&name, sort, beta_nf(*body, fuel)?)),
        other => {
            let (head, args) = other.spine();
            let head = head.clone();
            let args: Vec<Term> = args.into_iter().cloned().collect();
            let mut out = Vec::with_capacity(args.len());
            for a in args {
                out.push(beta_nf(a, fuel)?);
            }
            Ok(rebuild(head, out))
        }
    }
}

/// β-normal form by normal order; returns the term and the step count.
pub fn beta_normalize(t: &Term, fuel: Option<usize>) -> Result<(Term, usize), RewriteError> {
    let limit = fuel.unwrap_or_else(|| if t.is_untyped() { default_fuel() } else { usize::MAX });
    let mut f = Fuel::new(limit);
    let r = beta_nf(t.clone(), &mut f)?;
    Ok((r, f.used))
}

/// β-normal form by rightmost-innermost reduction (arguments first).
pub fn beta_normalize_innermost(t: &Term, fuel: Option<usize>) -> Result<Term, RewriteError> {
    fn go(t: &Term, fuel: &mut Fuel) -> Result<Term, RewriteError> {
        match t {
            Term::App { fun, arg } => {
                let a = go(arg, fuel)?;
                let f = go(fun, fuel)?;
                match f {
                    Term::Lam { body, .. } => {
                        fuel.tick()?;
                        go(&instantiate(&body, &a), fuel)
                    }
                    f => Ok(Term::app(f, a)),
                }
            }
            Term::Lam { name, sort, body } => Ok(Term::lam_raw(name, sort.clone(), go(body, fuel)?)),
            other => Ok(other.clone()),
        }
    }
    let limit = fuel.unwrap_or_else(|| if t.is_untyped() { default_fuel() } else { usize::MAX });
    go(t, &mut Fuel::new(limit))
}

/// The β-normal η-long representative of `t`. Combinators are unfolded to
/// their λ-definitions first. Untyped terms get β-normal forms only.
pub fn normalize(t: &Term, fuel: Option<usize>) -> Result<NormalForm, RewriteError> {
    normalize_counted(t, fuel).map(|(n, _)| n)
}

/// As [`normalize`], also returning the number of β-steps.
pub fn normalize_counted(t: &Term, fuel: Option<usize>) -> Result<(NormalForm, usize), RewriteError> {
    sort_of(t)?;
    let expanded = expand_combinators(t);
    let (b, steps) = beta_normalize(&expanded, fuel)?;
    let long = eta_long(&b)?;
    Ok((long, steps))
}

/// η-long expansion of a β-normal term; idempotent.
pub fn eta_long(t: &Term) -> Result<NormalForm, RewriteError> {
    if has_beta_redex(t) {
        return Err(RewriteError::Precondition(format!("{t} has a β-redex")));
    }
    let mut ctx = Vec::new();
    let r = long(t, &mut ctx)?;
    Ok(NormalForm(r))
}

fn long(t: &Term, ctx: &mut Vec<Sort>) -> Result<Term, RewriteError> {
    match t {
        Term::Lam { name, sort, body } => {
            ctx.push(sort.clone());
            let b = long(body, ctx);
            ctx.pop();
            Ok(Term::lam_raw(name, sort.clone(), b?))
        }
        _ => {
            let sort = sort_of_in(t, ctx)?;
            let (head, args) = t.spine();
            let mut new_args = Vec::with_capacity(args.len());
            for a in args {
                new_args.push(long(a, ctx)?);
            }
            Ok(expand(rebuild(head.clone(), new_args), &sort))
        }
    }
}

/// η-expands a neutral term at `sort`.
fn expand(n: Term, sort: &Sort) -> Term {
    match sort {
        Sort::Arrow(a, b) => {
            let v = expand(Term::bound(0), a);
            let inner = Term::app(shift(&n, 1, 0), v);
            Term::lam_raw(binder_name(a), (**a).clone(), expand(inner, b))
        }
        _ => n,
    }
}

fn binder_name(sort: &Sort) -> &'static str {
    if matches!(sort, Sort::Arrow(..)) {
        "h"
    } else {
        "x"
    }
}

/// Result of weak CL reduction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClReduction {
    pub term: Term,
    pub steps: usize,
    pub out_of_fuel: bool,
}

/// Arity at which a combinator head fires.
fn comb_arity(t: &Term) -> Option<(&str, usize)> {
    match t {
        Term::Const { name, .. } => match name.as_str() {
            "I" => Some(("I", 1)),
            "K" => Some(("K", 2)),
            "S" => Some(("S", 3)),
            _ => None,
        },
        _ => None,
    }
}

/// Leftmost-outermost weak reduction with I, K, S. Reduces inside arguments
/// once the head is stuck, so the result is the weak normal form when fuel
/// suffices.
pub fn cl_reduce(t: &Term, fuel: usize) -> Result<ClReduction, RewriteError> {
    if t.has_lambda() {
        return Err(RewriteError::Precondition("cl_reduce needs a term without λ".into()));
    }
    let mut f = Fuel::new(fuel);
    match cl_nf(t.clone(), &mut f) {
        Ok(term) => Ok(ClReduction { term, steps: f.used, out_of_fuel: false }),
        Err(RewriteError::OutOfFuel { .. }) => {
            // rerun to recover the partial reduct at the cut-off
            let term = cl_partial(t.clone(), fuel);
            Ok(ClReduction { term, steps: fuel, out_of_fuel: true })
        }
        Err(e) => Err(e),
    }
}

fn cl_head_step(head: &Term, args: &mut Vec<Term>) -> Option<Term> {
    let (name, n) = comb_arity(head)?;
    if args.len() < n {
        return None;
    }
    let rest: Vec<Term> = args.drain(n..).collect();
    let mut a = std::mem::take(args).into_iter();
    let new_head = match name {
        "I" => a.next()?,
        "K" => a.next()?,
        _ => {
            let x = a.next()?;
            let y = a.next()?;
            let z = a.next()?;
            Term::app(Term::app(x, z.clone()), Term::app(y, z))
        }
    };
    Some(rebuild(new_head, rest))
}

fn cl_whnf(t: Term, fuel: &mut Fuel) -> Result<Term, RewriteError> {
    let mut cur = t;
    loop {
        let (head, mut args) = {
            let (h, a) = cur.spine();
            (h.clone(), a.into_iter().cloned().collect::<Vec<_>>())
        };
        match cl_head_step(&head, &mut args) {
            Some(next) => {
                fuel.tick()?;
                cur = next;
            }
            None => return Ok(cur),
        }
    }
}

fn cl_nf(t: Term, fuel: &mut Fuel) -> Result<Term, RewriteError> {
    let w = cl_whnf(t, fuel)?;
    let (head, args) = w.spine();
    let head = head.clone();
    let args: Vec<Term> = args.into_iter().cloned().collect();
    let mut out = Vec::with_capacity(args.len());
    for a in args {
        out.push(cl_nf(a, fuel)?);
    }
    Ok(rebuild(head, out))
}

/// One leftmost-outermost step, if any redex exists.
pub fn cl_step(t: &Term) -> Option<Term> {
    let (head, args) = t.spine();
    let mut owned: Vec<Term> = args.iter().map(|a| (*a).clone()).collect();
    if let Some(next) = cl_head_step(head, &mut owned) {
        return Some(next);
    }
    for (i, a) in args.iter().enumerate() {
        if let Some(r) = cl_step(a) {
            let mut new_args: Vec<Term> = args.iter().map(|a| (*a).clone()).collect();
            new_args[i] = r;
            return Some(rebuild(head.clone(), new_args));
        }
    }
    None
}

fn cl_partial(t: Term, fuel: usize) -> Term {
    let mut cur = t;
    for _ in 0..fuel {
        match cl_step(&cur) {
            Some(n) => cur = n,
            None => break,
        }
    }
    cur
}

/// Bracket abstraction Λx(t): `I` for x itself, `K t` when x is not free,
/// `S Λx(t1) Λx(t2)` for applications. Typed combinators get their indices
/// from the sorts of `x` and the subterms.
pub fn bracket_abstract(x: &str, x_sort: &Sort, t: &Term) -> Result<Term, RewriteError> {
    if t.has_lambda() {
        return Err(RewriteError::Precondition("bracket abstraction needs a term without λ".into()));
    }
    let untyped = *x_sort == Sort::Star;
    abstract_go(x, x_sort, t, untyped)
}

fn abstract_go(x: &str, xs: &Sort, t: &Term, untyped: bool) -> Result<Term, RewriteError> {
    if let Term::Var { name, sort } = t {
        if name == x && sort == xs {
            return Ok(if untyped { Term::comb("I") } else { Term::comb_i(xs) });
        }
    }
    let free = t.free_vars().contains(&(x.to_string(), xs.clone()));
    if !free {
        let k = if untyped { Term::comb("K") } else { Term::comb_k(&sort_of(t)?, xs) };
        return Ok(Term::app(k, t.clone()));
    }
    match t {
        Term::App { fun, arg } => {
            let f = abstract_go(x, xs, fun, untyped)?;
            let a = abstract_go(x, xs, arg, untyped)?;
            let s = if untyped {
                Term::comb("S")
            } else {
                let j = sort_of(arg)?;
                let k = sort_of(t)?;
                Term::comb_s(xs, &j, &k)
            };
            Ok(Term::apps(s, [f, a]))
        }
        _ => Err(RewriteError::Precondition(format!("cannot abstract {x} from {t}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term_syntax::{parse_sort, parse_term, typecheck, Signature};

    fn o() -> Sort {
        Sort::o()
    }

    #[test]
    fn normalize_examples() {
        let sig = Signature::typed_lambda();
        let t = parse_term("(\\x:o. x) bot", &sig).unwrap();
        assert_eq!(normalize(&t, None).unwrap().term(), &Term::bot(o()));

        let f = Term::var("f", Sort::arrow(o(), o()));
        let n = normalize(&f, None).unwrap();
        assert_eq!(n.term(), &Term::lam("x", o(), Term::app(f.clone(), Term::var("x", o()))));

        let omega = parse_term("#star (\\x. x x) (\\x. x x)", &sig).unwrap();
        assert_eq!(normalize(&omega, Some(1000)), Err(RewriteError::OutOfFuel { steps: 1000 }));
    }

    #[test]
    fn eta_long_examples() {
        let oo = Sort::arrow(o(), o());
        let g = Term::var("g", Sort::arrow(oo.clone(), o()));
        let n = eta_long(&g).unwrap();
        let h = Term::var("h", oo.clone());
        let expect = Term::lam(
            "h",
            oo.clone(),
            Term::app(g.clone(), Term::lam("x", o(), Term::app(h, Term::var("x", o())))),
        );
        assert_eq!(n.term(), &expect);
        assert!(is_normal_form(n.term()));
        assert_eq!(eta_long(n.term()).unwrap(), n);
        let id = Term::lam("x", o(), Term::var("x", o()));
        assert_eq!(eta_long(&id).unwrap().term(), &id);
        let redex = Term::app(id.clone(), Term::bot(o()));
        assert!(matches!(eta_long(&redex), Err(RewriteError::Precondition(_))));
    }

    #[test]
    fn cl_examples() {
        let sig = Signature::untyped_cl();
        let p = |s: &str| parse_term(s, &sig).unwrap();
        let x = Term::var("x", Sort::Star);
        let r = cl_reduce(&p("I x"), 100).unwrap();
        assert_eq!((r.term, r.steps), (x.clone(), 1));
        let r = cl_reduce(&p("K x y"), 100).unwrap();
        assert_eq!((r.term, r.steps), (x.clone(), 1));
        // S K K x -> K x (K x) -> x
        let r = cl_reduce(&p("S K K x"), 100).unwrap();
        assert_eq!((r.term, r.steps), (x, 2));
        let r = cl_reduce(&p("S I I (S I I)"), 50).unwrap();
        assert!(r.out_of_fuel);
    }

    #[test]
    fn bracket_examples() {
        let s = Sort::Star;
        let x = Term::var("x", s.clone());
        let y = Term::var("y", s.clone());
        assert_eq!(bracket_abstract("x", &s, &x).unwrap(), Term::comb("I"));
        assert_eq!(bracket_abstract("x", &s, &y).unwrap(), Term::app(Term::comb("K"), y));
        let sii = bracket_abstract("x", &s, &Term::app(x.clone(), x.clone())).unwrap();
        assert_eq!(sii, Term::apps(Term::comb("S"), [Term::comb("I"), Term::comb("I")]));
        let u = Term::var("u", s.clone());
        let r = cl_reduce(&Term::app(sii, u.clone()), 100).unwrap();
        assert_eq!(r.term, Term::app(u.clone(), u));
    }

    #[test]
    fn typed_bracket_is_well_sorted() {
        let sig = Signature::typed_cl();
        let oo = Sort::arrow(o(), o());
        let f = Term::var("f", oo.clone());
        let x = Term::var("x", o());
        let t = Term::app(f.clone(), Term::app(f, x));
        let a = bracket_abstract("x", &o(), &t).unwrap();
        assert_eq!(typecheck(&a, &sig).unwrap(), oo);
        let r = cl_reduce(&Term::app(a, Term::bot(o())), 100).unwrap();
        let f = Term::var("f", oo);
        assert_eq!(r.term, Term::app(f.clone(), Term::app(f, Term::bot(o()))));
    }

    #[test]
    fn combinators_normalize_to_lambdas() {
        let sig = Signature::typed_lambda();
        let t = parse_term("S[o,o->o,o] K[o,o->o] K[o,o]", &sig).unwrap();
        let n = normalize(&t, None).unwrap();
        assert_eq!(n.term(), &Term::lam("x", o(), Term::var("x", o())));
        assert_eq!(typecheck(n.term(), &sig).unwrap(), parse_sort("o->o").unwrap());
    }

    #[test]
    fn innermost_agrees() {
        let sig = Signature::typed_lambda();
        let t = parse_term(
            "(\\f:o->o. \\x:o. f (f x)) (\\y:o. (\\z:o. z) y)",
            &sig,
        )
        .unwrap();
        let (a, _) = beta_normalize(&t, None).unwrap();
        let b = beta_normalize_innermost(&t, None).unwrap();
        assert_eq!(a, b);
    }
}

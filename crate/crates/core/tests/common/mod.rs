//! Seeded generators shared by the property suites.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qlam_core::term_syntax::{Sort, Term};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn o() -> Sort {
    Sort::o()
}

pub fn oo() -> Sort {
    Sort::arrow(o(), o())
}

/// Free variables available to generated terms.
pub fn free_pool() -> Vec<(String, Sort)> {
    vec![
        ("y".into(), o()),
        ("f".into(), oo()),
        ("g".into(), Sort::arrows([o(), o()], o())),
        ("h".into(), Sort::arrow(oo(), o())),
    ]
}

/// Sorts generated terms are drawn at.
pub fn term_sorts() -> Vec<Sort> {
    vec![o(), oo(), Sort::arrow(oo(), o()), Sort::arrows([o(), o()], o())]
}

/// Random typed λ-terms. Binder sorts stay within `o` and `o->o`, so every
/// sort met during evaluation is one of [`term_sorts`].
pub struct TermGen {
    pub rng: ChaCha8Rng,
    pub pool: Vec<(String, Sort)>,
    pub redexes: bool,
    pub bottoms: bool,
    next: usize,
}

impl TermGen {
    pub fn new(seed: u64) -> Self {
        TermGen { rng: rng(seed), pool: free_pool(), redexes: true, bottoms: true, next: 0 }
    }

    pub fn closed(seed: u64) -> Self {
        TermGen { pool: Vec::new(), ..TermGen::new(seed) }
    }

    fn fresh(&mut self) -> String {
        self.next += 1;
        format!("v{}", self.next)
    }

    pub fn term(&mut self, sort: &Sort, depth: usize) -> Term {
        let mut ctx = Vec::new();
        self.go(sort, &mut ctx, depth)
    }

    fn go(&mut self, sort: &Sort, ctx: &mut Vec<(String, Sort)>, depth: usize) -> Term {
        let heads: Vec<(String, Sort)> = ctx
            .iter()
            .chain(self.pool.iter())
            .filter(|(_, s)| ends_in(s, sort))
            .cloned()
            .collect();
        let roll: u32 = self.rng.gen_range(0..10);
        if let Some((a, b)) = sort.split_arrow() {
            let binder_ok = *a == o() || *a == oo();
            if binder_ok && (heads.is_empty() || roll < 5 || depth == 0 && heads.is_empty()) {
                let (a, b) = (a.clone(), b.clone());
                let x = self.fresh();
                ctx.push((x.clone(), a.clone()));
                let body = self.go(&b, ctx, depth.saturating_sub(1));
                ctx.pop();
                return Term::lam(&x, a, body);
            }
        }
        if self.redexes && depth > 0 && roll == 9 {
            let a = if self.rng.gen_bool(0.5) { o() } else { oo() };
            let x = self.fresh();
            ctx.push((x.clone(), a.clone()));
            let body = self.go(sort, ctx, depth - 1);
            ctx.pop();
            let arg = self.go(&a, ctx, depth - 1);
            return Term::app(Term::lam(&x, a, body), arg);
        }
        let usable: Vec<&(String, Sort)> = heads.iter().filter(|(_, s)| depth > 0 || s == sort).collect();
        if usable.is_empty() || (self.bottoms && roll == 8) {
            return self.fallback(sort, ctx, depth);
        }
        let (name, hs) = (*usable.choose(&mut self.rng).expect("non-empty")).clone();
        let mut t = Term::var(&name, hs.clone());
        let mut cur = hs;
        while cur != *sort {
            let (a, b) = match cur.split_arrow() {
                Some((a, b)) => (a.clone(), b.clone()),
                None => unreachable!("head sort ends in the target"),
            };
            let arg = self.go(&a, ctx, depth.saturating_sub(1));
            t = Term::app(t, arg);
            cur = b;
        }
        t
    }

    fn fallback(&mut self, sort: &Sort, ctx: &mut Vec<(String, Sort)>, depth: usize) -> Term {
        match sort.split_arrow() {
            Some((a, b)) if self.bottoms || *a == o() || *a == oo() => {
                let (a, b) = (a.clone(), b.clone());
                let x = self.fresh();
                ctx.push((x.clone(), a.clone()));
                let body = self.go(&b, ctx, depth.saturating_sub(1));
                ctx.pop();
                Term::lam(&x, a, body)
            }
            _ => Term::bot(sort.clone()),
        }
    }
}

/// Whether some number of applications takes `s` to `target`.
fn ends_in(s: &Sort, target: &Sort) -> bool {
    if s == target {
        return true;
    }
    match s.split_arrow() {
        Some((_, b)) => ends_in(b, target),
        None => false,
    }
}

/// Random untyped CL terms over `atoms`.
pub fn random_cl(rng: &mut ChaCha8Rng, size: usize, atoms: &[Term]) -> Term {
    if size <= 1 {
        return atoms[rng.gen_range(0..atoms.len())].clone();
    }
    let left = rng.gen_range(1..size);
    Term::app(random_cl(rng, left, atoms), random_cl(rng, size - left, atoms))
}

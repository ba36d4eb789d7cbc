//! Shipped derivations, their single-node mutants, and the algebras the
//! soundness harness runs them against.

use std::collections::BTreeSet;

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::finite_models::{build_full_type_structure, shift_pair_algebra, FiniteQuantAlgebra, ModelError};
use crate::metric_core::{grid_values, ExtReal, FiniteMetricSpace};
use crate::quant_deduction::{
    beta_contract, build_bracket, build_skk, builtin_theory, comb_axiom, subst_node, triang, Derivation,
    Inference, Params, QuantEquation, Rule, Theory, TypedVar,
};
use crate::term_syntax::{Environment, Signature, Sort, Term};

/// Which theory an entry is checked in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Group {
    /// U_CL over the typed CL signature.
    Cl,
    /// U_CL in the partial regime.
    ClPartial,
    Lambda,
    LambdaEta,
    /// U_CL_interval over the shift-pair signature.
    Interval,
}

impl Group {
    pub const ALL: [Group; 5] = [Group::Cl, Group::ClPartial, Group::Lambda, Group::LambdaEta, Group::Interval];

    pub fn name(self) -> &'static str {
        match self {
            Group::Cl => "U_CL",
            Group::ClPartial => "U_CL_partial",
            Group::Lambda => "U_lambda",
            Group::LambdaEta => "U_lambda_eta",
            Group::Interval => "U_CL_interval",
        }
    }

    pub fn signature(self) -> Signature {
        match self {
            Group::Cl | Group::ClPartial => Signature::typed_cl(),
            Group::Lambda | Group::LambdaEta => Signature::typed_lambda(),
            Group::Interval => interval_signature(),
        }
    }

    pub fn theory(self) -> Theory {
        let sig = self.signature();
        let th = match self {
            Group::Cl => builtin_theory("U_CL", &sig),
            Group::ClPartial => builtin_theory("U_CL", &sig).map(|t| t.partial()),
            Group::Lambda => builtin_theory("U_lambda", &sig),
            Group::LambdaEta => builtin_theory("U_lambda_eta", &sig),
            Group::Interval => builtin_theory("U_CL_interval", &sig),
        };
        th.expect("shipped theories build")
    }
}

#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub name: String,
    pub group: Group,
    pub derivation: Derivation,
}

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn o() -> Sort {
    Sort::o()
}

fn oo() -> Sort {
    Sort::arrow(o(), o())
}

fn ooo() -> Sort {
    Sort::arrows([o(), o()], o())
}

fn v(n: &str, s: Sort) -> Term {
    Term::var(n, s)
}

fn eq(l: Term, r: Term, eps: BigRational, xs: &[TypedVar]) -> QuantEquation {
    QuantEquation::new(l, r, eps).expect("corpus terms are well sorted").with_quantified(xs.iter().cloned())
}

fn leaf(rule: Rule, hyps: &[QuantEquation], e: QuantEquation) -> Derivation {
    Derivation::node(rule, Params::default(), Inference::new(hyps.to_vec(), e), vec![])
}

fn refl(hyps: &[QuantEquation], t: Term, xs: &[TypedVar]) -> Derivation {
    leaf(Rule::Refl, hyps, eq(t.clone(), t, BigRational::zero(), xs))
}

fn assumpt(hyps: &[QuantEquation], i: usize) -> Derivation {
    leaf(Rule::Assumpt, hyps, hyps[i].clone())
}

/// Applies a one-premise rule whose conclusion is `f(premise equation)`.
fn step(rule: Rule, params: Params, d: Derivation, f: impl FnOnce(&QuantEquation) -> QuantEquation) -> Derivation {
    let e = f(&d.conclusion.conclusion);
    let hyps = d.conclusion.hyps.clone();
    Derivation::node(rule, params, Inference::new(hyps, e), vec![d])
}

fn max(d: Derivation, delta: BigRational) -> Derivation {
    let p = Params { delta: Some(delta.clone()), ..Params::default() };
    step(Rule::Max, p, d, |e| QuantEquation { eps: &e.eps + &delta, ..e.clone() })
}

fn symm(d: Derivation) -> Derivation {
    step(Rule::Symm, Params::default(), d, |e| QuantEquation { left: e.right.clone(), right: e.left.clone(), ..e.clone() })
}

fn requantify(rule: Rule, d: Derivation, xs: &[TypedVar]) -> Derivation {
    step(rule, Params::default(), d, |e| QuantEquation { quantified: xs.iter().cloned().collect(), ..e.clone() })
}

fn nexp(symbol: &str, head: Option<Term>, premises: Vec<Derivation>) -> Derivation {
    let c0 = &premises[0].conclusion;
    let hyps = c0.hyps.clone();
    let (eps, xs) = (c0.conclusion.eps.clone(), c0.conclusion.quantified.clone());
    let ls = premises.iter().map(|p| p.conclusion.conclusion.left.clone());
    let rs = premises.iter().map(|p| p.conclusion.conclusion.right.clone());
    let (l, r) = match head {
        Some(h) => (Term::apps(h.clone(), ls), Term::apps(h, rs)),
        None => {
            let (l, r): (Vec<Term>, Vec<Term>) = (ls.collect(), rs.collect());
            (Term::app(l[0].clone(), l[1].clone()), Term::app(r[0].clone(), r[1].clone()))
        }
    };
    let e = QuantEquation::new(l, r, eps).expect("well sorted").with_quantified(xs);
    let p = Params { symbol: Some(symbol.to_string()), ..Params::default() };
    Derivation::node(Rule::NExp, p, Inference::new(hyps, e), premises)
}

fn subst_h(d: Derivation, env: Environment) -> Derivation {
    let f = |e: &QuantEquation| QuantEquation {
        left: crate::term_syntax::substitute(&e.left, &env).expect("sorted"),
        right: crate::term_syntax::substitute(&e.right, &env).expect("sorted"),
        ..e.clone()
    };
    let hyps = d.conclusion.hyps.iter().map(f).collect();
    let c = f(&d.conclusion.conclusion);
    Derivation::node(Rule::Subst, Params { env: Some(env), ..Params::default() }, Inference::new(hyps, c), vec![d])
}

fn env(pairs: &[(&str, Term)]) -> Environment {
    pairs.iter().map(|(k, t)| (k.to_string(), t.clone())).collect()
}

fn beta(hyps: &[QuantEquation], redex: Term, xs: &[TypedVar]) -> Derivation {
    let r = beta_contract(&redex).expect("a redex");
    leaf(Rule::Beta, hyps, eq(redex, r, BigRational::zero(), xs))
}

fn cut(hyps: &[QuantEquation], sides: Vec<Derivation>, last: Derivation) -> Derivation {
    let e = last.conclusion.conclusion.clone();
    let mut ps = sides;
    ps.push(last);
    Derivation::node(Rule::Cut, Params::default(), Inference::new(hyps.to_vec(), e), ps)
}

fn axiom(name: &str, e: QuantEquation) -> Derivation {
    Derivation::node(Rule::Axiom, Params { name: Some(name.into()), ..Params::default() }, Inference::closed(e), vec![])
}

/// The signature of the shift-pair grid algebra: `[0,1]` and `[0,5/4]`
/// at step 1/8 with `f(x) = x` and `g(x) = x + 1/4`.
pub fn interval_signature() -> Signature {
    shift_pair_algebra(&q(1, 1), &q(1, 4), &q(1, 8)).expect("shift pair builds").signature
}

fn dom() -> Sort {
    Sort::Interval(q(0, 1), q(1, 1))
}

fn cod() -> Sort {
    Sort::Interval(q(0, 1), q(5, 4))
}

fn grid_c(sig: &Signature, r: BigRational, s: &Sort) -> Term {
    Term::cnst(sig.grid_constant(&r, s).expect("grid constant"), s.clone())
}

fn entry(group: Group, name: &str, d: Derivation) -> CorpusEntry {
    CorpusEntry { name: name.to_string(), group, derivation: d }
}

/// The valid-derivation corpus. Every rule except Arch occurs.
pub fn shipped_derivations() -> Vec<CorpusEntry> {
    let (x, y, z) = (v("x", o()), v("y", o()), v("z", o()));
    let (f, g) = (v("f", oo()), v("g", oo()));
    let h = v("h", ooo());
    let half = q(1, 2);
    let quarter = q(1, 4);
    let xo: TypedVar = ("x".into(), o());
    let zo: TypedVar = ("z".into(), o());
    let bot = Term::bot(o());
    let mut out = Vec::new();
    use Group::*;

    // combinatory logic
    let hxy = [eq(x.clone(), y.clone(), half.clone(), &[])];
    let hyz = [eq(x.clone(), y.clone(), half.clone(), &[]), eq(y.clone(), z.clone(), quarter.clone(), &[])];
    let hfx = [eq(f.clone(), g.clone(), half.clone(), &[]), eq(x.clone(), y.clone(), half.clone(), &[])];
    let hyx = [eq(y.clone(), x.clone(), half.clone(), &[])];
    let skk_x = build_skk(&x).expect("skk");
    out.push(entry(Cl, "cl_refl", refl(&[], x.clone(), &[])));
    out.push(entry(Cl, "cl_refl_max", max(refl(&[], x.clone(), &[]), half.clone())));
    out.push(entry(Cl, "cl_skk_point", skk_x.clone()));
    out.push(entry(Cl, "cl_skk_map", build_skk(&f).expect("skk")));
    out.push(entry(Cl, "cl_skk_symm", symm(skk_x.clone())));
    out.push(entry(Cl, "cl_skk_loop", triang(skk_x.clone(), symm(skk_x.clone()))));
    let ffx = Term::app(f.clone(), Term::app(f.clone(), x.clone()));
    out.push(entry(Cl, "cl_bracket_twice", build_bracket("x", &o(), &ffx, &y).expect("bracket")));
    let hxx = Term::apps(h.clone(), [x.clone(), x.clone()]);
    out.push(entry(Cl, "cl_bracket_diag", build_bracket("x", &o(), &hxx, &y).expect("bracket")));
    let fy = Term::app(f.clone(), y.clone());
    out.push(entry(Cl, "cl_bracket_vacuous", build_bracket("x", &o(), &fy, &z).expect("bracket")));
    out.push(entry(Cl, "cl_assumpt", assumpt(&hxy, 0)));
    out.push(entry(Cl, "cl_assumpt_symm", symm(assumpt(&hxy, 0))));
    out.push(entry(Cl, "cl_triang_hyps", triang(assumpt(&hyz, 0), assumpt(&hyz, 1))));
    out.push(entry(Cl, "cl_nexp_app", nexp("app", None, vec![assumpt(&hfx, 0), assumpt(&hfx, 1)])));
    let fx_fy = nexp("app", None, vec![max(refl(&hxy, f.clone(), &[]), half.clone()), assumpt(&hxy, 0)]);
    out.push(entry(Cl, "cl_nexp_refl", fx_fy.clone()));
    out.push(entry(Cl, "cl_cut", cut(&hyx, vec![symm(assumpt(&hyx, 0))], fx_fy)));
    let k_ax = comb_axiom("K", &[x.clone(), y.clone()]);
    let ix = Term::app(Term::comb_i(&o()), x.clone());
    out.push(entry(Cl, "cl_subst_k", subst_node(k_ax, env(&[("x", Term::app(f.clone(), z.clone())), ("y", ix)]))));
    let tri = triang(assumpt(&hyz, 0), assumpt(&hyz, 1));
    let fz = Term::app(f.clone(), z.clone());
    let fxv = Term::app(f.clone(), x.clone());
    out.push(entry(Cl, "cl_subst_hyps", subst_h(tri, env(&[("x", fxv.clone()), ("y", fy.clone()), ("z", fz.clone())]))));
    out.push(entry(Cl, "cl_axiom_i", comb_axiom("I", &[x.clone()])));
    out.push(entry(Cl, "cl_axiom_s", comb_axiom("S", &[h.clone(), f.clone(), x.clone()])));
    let skk_bot = build_skk(&bot).expect("skk");
    let abs = requantify(Rule::Abstraction, skk_bot, &[xo.clone()]);
    out.push(entry(Cl, "cl_abstraction", abs.clone()));
    out.push(entry(Cl, "cl_concretion", requantify(Rule::Concretion, abs, &[])));
    let hxy4 = [eq(x.clone(), y.clone(), quarter.clone(), &[])];
    out.push(entry(Cl, "cl_max_triang", triang(max(refl(&hxy4, x.clone(), &[]), half.clone()), assumpt(&hxy4, 0))));
    let prefl = |d: Derivation| step(Rule::PRefl, Params::default(), d, |e| QuantEquation { right: e.left.clone(), ..e.clone() });
    out.push(entry(ClPartial, "cl_partial_prefl", prefl(skk_x.clone())));
    out.push(entry(ClPartial, "cl_partial_prefl_hyp", prefl(assumpt(&hxy, 0))));

    // λ-calculus
    let lam_fx = Term::lam("x", o(), fxv.clone());
    let lam_fz = Term::lam("z", o(), fz.clone());
    out.push(entry(Lambda, "lam_beta", beta(&[], Term::app(lam_fx.clone(), y.clone()), &[])));
    let lam_ffx = Term::lam("x", o(), ffx.clone());
    out.push(entry(Lambda, "lam_beta_twice", beta(&[], Term::app(lam_ffx, Term::app(g.clone(), y.clone())), &[])));
    out.push(entry(Lambda, "lam_alpha", leaf(Rule::Alpha, &[], eq(lam_fx.clone(), lam_fz.clone(), BigRational::zero(), &[]))));
    let xi = |d: Derivation| {
        step(Rule::Xi, Params::default(), d, |e| QuantEquation {
            left: Term::lam("x", o(), e.left.clone()),
            right: Term::lam("x", o(), e.right.clone()),
            sort: Sort::arrow(o(), e.sort.clone()),
            ..e.clone()
        })
    };
    let xi_half = xi(max(refl(&[], fxv.clone(), &[xo.clone()]), half.clone()));
    out.push(entry(Lambda, "lam_xi_half", requantify(Rule::Concretion, xi_half, &[])));
    let lam_fy = Term::lam("y", o(), Term::app(f.clone(), y.clone()));
    let xi_beta = xi(beta(&[], Term::app(lam_fy.clone(), x.clone()), &[xo.clone()]));
    out.push(entry(Lambda, "lam_xi_beta", requantify(Rule::Concretion, xi_beta, &[])));
    let id = Term::lam("x", o(), x.clone());
    let nb = nexp("app", None, vec![refl(&[], f.clone(), &[]), beta(&[], Term::app(id.clone(), y.clone()), &[])]);
    out.push(entry(Lambda, "lam_nexp_beta", nb));
    let sb = subst_h(beta(&[], Term::app(lam_fx.clone(), y.clone()), &[]), env(&[("y", fz.clone())]));
    out.push(entry(Lambda, "lam_subst_beta", sb));
    let b1 = beta(&[], Term::app(lam_fx.clone(), y.clone()), &[]);
    out.push(entry(Lambda, "lam_symm_triang", triang(b1.clone(), symm(b1))));
    let alpha_id = leaf(Rule::Alpha, &[], eq(id.clone(), Term::lam("y", o(), y.clone()), BigRational::zero(), &[]));
    out.push(entry(Lambda, "lam_abstraction", requantify(Rule::Abstraction, alpha_id, &[zo.clone()])));
    let hxy_l = [eq(x.clone(), y.clone(), half.clone(), &[])];
    let last = triang(
        beta(&hxy_l, Term::app(lam_fz.clone(), x.clone()), &[]),
        nexp("app", None, vec![max(refl(&hxy_l, f.clone(), &[]), half.clone()), assumpt(&hxy_l, 0)]),
    );
    out.push(entry(Lambda, "lam_cut", cut(&hyx, vec![symm(assumpt(&hyx, 0))], last)));
    out.push(entry(Lambda, "lam_axiom_k", comb_axiom("K", &[x.clone(), f.clone()])));
    out.push(entry(Lambda, "lam_skk", build_skk(&fxv).expect("skk")));

    // η
    let eta_f = leaf(Rule::Eta, &[], eq(f.clone(), lam_fx.clone(), BigRational::zero(), &[]));
    out.push(entry(LambdaEta, "eta_basic", eta_f.clone()));
    out.push(entry(LambdaEta, "eta_round_trip", triang(symm(eta_f.clone()), eta_f.clone())));
    out.push(entry(LambdaEta, "eta_subst", subst_h(eta_f.clone(), env(&[("f", Term::lam("y", o(), y.clone()))]))));
    let xi_eta = xi(max(refl(&[], fxv.clone(), &[xo.clone()]), half.clone()));
    out.push(entry(LambdaEta, "eta_xi_half", triang(eta_f, requantify(Rule::Concretion, xi_eta, &[]))));

    // interval grid
    let sig = interval_signature();
    let (r0, r14, r12) = (grid_c(&sig, q(0, 1), &dom()), grid_c(&sig, q(1, 4), &dom()), grid_c(&sig, q(1, 2), &dom()));
    let fc = Term::cnst("f", Sort::arrow(dom(), cod()));
    let gc = Term::cnst("g", Sort::arrow(dom(), cod()));
    let grid = |a: &Term, b: &Term, e: BigRational| axiom("grid", eq(a.clone(), b.clone(), e, &[]));
    out.push(entry(Interval, "int_grid_symm", symm(grid(&r0, &r14, quarter.clone()))));
    let c0 = grid_c(&sig, q(0, 1), &cod());
    let c14 = grid_c(&sig, q(1, 4), &cod());
    let f0 = axiom("f(0)", eq(Term::app(fc.clone(), r0.clone()), c0.clone(), BigRational::zero(), &[]));
    out.push(entry(Interval, "int_table_triang", triang(f0, grid(&c0, &c14, quarter.clone()))));
    let (xd, yd) = (v("x", dom()), v("y", dom()));
    let hd = [eq(xd.clone(), yd.clone(), quarter.clone(), &[])];
    out.push(entry(Interval, "int_nexp_symbol", nexp("f", Some(fc.clone()), vec![assumpt(&hd, 0)])));
    out.push(entry(Interval, "int_nexp_grid", nexp("g", Some(gc.clone()), vec![grid(&r0, &r12, half.clone())])));
    out.push(entry(Interval, "int_skk", build_skk(&r12).expect("skk")));
    let g0 = axiom("g(0)", eq(Term::app(gc.clone(), r0.clone()), c14.clone(), BigRational::zero(), &[]));
    let f14 = axiom("f(1/4)", eq(Term::app(fc.clone(), r14.clone()), c14, BigRational::zero(), &[]));
    out.push(entry(Interval, "int_tables_meet", triang(g0, symm(f14))));
    out
}

/// Every shipped algebra, named.
pub fn shipped_algebras() -> Result<Vec<FiniteQuantAlgebra>, ModelError> {
    let with_name = |mut a: FiniteQuantAlgebra, n: &str| {
        a.name = n.to_string();
        a
    };
    let sorts_small = [oo(), ooo()];
    let sorts = [oo()];
    let grid3 = FiniteMetricSpace::grid(&q(0, 1), &q(1, 1), &q(1, 2));
    Ok(vec![
        with_name(build_full_type_structure(&FiniteMetricSpace::discrete(1, ExtReal::one()), &sorts_small, 4096)?, "fts1"),
        with_name(build_full_type_structure(&FiniteMetricSpace::discrete(2, ExtReal::one()), &sorts_small, 4096)?, "fts2"),
        with_name(build_full_type_structure(&FiniteMetricSpace::discrete(2, ExtReal::ratio(1, 2)), &sorts_small, 4096)?, "fts2_half"),
        with_name(build_full_type_structure(&FiniteMetricSpace::discrete(3, ExtReal::one()), &sorts, 4096)?, "fts3"),
        with_name(build_full_type_structure(&grid3, &sorts, 4096)?, "fts_grid3"),
        shift_pair_algebra(&q(1, 1), &q(1, 4), &q(1, 8))?,
    ])
}

/// Which algebras a group is run against.
pub fn algebras_for(group: Group, all: &[FiniteQuantAlgebra]) -> Vec<usize> {
    all.iter()
        .enumerate()
        .filter(|(_, a)| match group {
            Group::Interval => a.name == "shift_pair",
            _ => a.name != "shift_pair",
        })
        .map(|(i, _)| i)
        .collect()
}

/// How a mutant was made.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mutation {
    /// Adds 1 to the conclusion's ε.
    BumpEps,
    /// Swaps the two sides of the conclusion.
    SwapSides,
    /// Drops the last premise.
    DropPremise,
}

#[derive(Debug, Clone)]
pub struct Mutant {
    pub source: String,
    pub group: Group,
    pub path: Vec<usize>,
    pub mutation: Mutation,
    pub derivation: Derivation,
}

/// Single-node mutants of every entry: each operator at every node where
/// it changes something.
pub fn mutants(entries: &[CorpusEntry]) -> Vec<Mutant> {
    let mut out = Vec::new();
    for e in entries {
        for path in e.derivation.paths() {
            for m in [Mutation::BumpEps, Mutation::SwapSides, Mutation::DropPremise] {
                let mut d = e.derivation.clone();
                let node = d.at_mut(&path).expect("path exists");
                let c = &mut node.conclusion.conclusion;
                match m {
                    Mutation::BumpEps => c.eps += BigRational::one(),
                    Mutation::SwapSides => {
                        if c.left == c.right {
                            continue;
                        }
                        std::mem::swap(&mut c.left, &mut c.right);
                    }
                    Mutation::DropPremise => {
                        if node.premises.pop().is_none() {
                            continue;
                        }
                    }
                }
                out.push(Mutant { source: e.name.clone(), group: e.group, path: path.clone(), mutation: m, derivation: d });
            }
        }
    }
    out
}

/// Rules occurring anywhere in the corpus.
pub fn rules_used(entries: &[CorpusEntry]) -> BTreeSet<String> {
    entries.iter().flat_map(|e| e.derivation.rules()).collect()
}

/// Grid points of the shift-pair domain, for tests.
pub fn shift_domain_points() -> Vec<BigRational> {
    grid_values(&q(0, 1), &q(1, 1), &q(1, 8))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quant_deduction::check_derivation;

    #[test]
    fn corpus_checks() {
        let entries = shipped_derivations();
        assert!(entries.len() >= 30);
        for e in &entries {
            assert_eq!(check_derivation(&e.derivation, &e.group.theory()), Ok(()), "{}", e.name);
        }
        let rules = rules_used(&entries);
        for r in Rule::ALL {
            if r != Rule::Arch {
                assert!(rules.contains(r.tag()), "{} unused", r.tag());
            }
        }
    }

    #[test]
    fn mutants_rejected() {
        let entries = shipped_derivations();
        let ms = mutants(&entries);
        assert!(ms.len() >= 100);
        for m in &ms {
            let r = check_derivation(&m.derivation, &m.group.theory());
            assert!(r.is_err(), "{} {:?} at {:?} accepted", m.source, m.mutation, m.path);
        }
    }
}

#[cfg(test)]
mod harness_tests {
    use super::*;
    use crate::finite_models::{soundness_harness, HarnessStatus};

    #[test]
    fn shipped_harness_has_no_violations() {
        let entries = shipped_derivations();
        let algs = shipped_algebras().unwrap();
        let mut sat = 0;
        for g in Group::ALL {
            let ds: Vec<(String, Derivation)> =
                entries.iter().filter(|e| e.group == g).map(|e| (e.name.clone(), e.derivation.clone())).collect();
            let idx = algebras_for(g, &algs);
            let picked: Vec<&FiniteQuantAlgebra> = idx.iter().map(|&i| &algs[i]).collect();
            let recs = soundness_harness(&g.theory(), &ds, &picked, 4);
            for r in &recs {
                assert_ne!(r.status, HarnessStatus::Violated, "{r:?}");
                if r.status == HarnessStatus::Satisfied {
                    sat += 1;
                } else {
                    eprintln!("{} {} {:?}", r.derivation, r.algebra, r.detail);
                }
            }
        }
        eprintln!("satisfied pairs: {sat}");
    }
}

#[cfg(test)]
mod xi_hypothesis_tests {
    use super::*;
    use crate::finite_models::{satisfies_inference, SatMode};
    use crate::quant_deduction::check_derivation;

    // ξ under a non-empty context is derivable but refuted by the verbatim
    // sat* reading: the hypothesis only constrains pairs (a, b) one at a time.
    #[test]
    fn xi_with_hypothesis_is_refuted() {
        let xo: TypedVar = ("x".into(), o());
        let (f, g, x) = (v("f", oo()), v("g", oo()), v("x", o()));
        let h = [eq(Term::app(f.clone(), x.clone()), Term::app(g.clone(), x.clone()), q(1, 2), &[xo.clone()])];
        let d = step(Rule::Xi, Params::default(), assumpt(&h, 0), |e| QuantEquation {
            left: Term::lam("x", o(), e.left.clone()),
            right: Term::lam("x", o(), e.right.clone()),
            sort: oo(),
            ..e.clone()
        });
        assert_eq!(check_derivation(&d, &Group::Lambda.theory()), Ok(()));
        let grid3 = FiniteMetricSpace::grid(&q(0, 1), &q(1, 1), &q(1, 2));
        let alg = build_full_type_structure(&grid3, &[oo()], 4096).unwrap();
        let r = satisfies_inference(&alg, &d.conclusion, SatMode::SatStar).unwrap();
        assert!(!r.satisfied);
        let c = r.counter.unwrap();
        assert_eq!(c.distance, ExtReal::one());
    }
}

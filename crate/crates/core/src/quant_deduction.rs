//! Quantitative equations, theories and a checker for derivation trees.
//!
//! Derivations are read natural-deduction style: every node concludes a
//! whole inference `Γ ⊢ φ`. Rules with premises (Symm, Triang, Max, NExp,
//! ξ, PRefl, Abstraction, Concretion) keep `Γ` fixed; Refl, α, β, η and
//! axiom instances may be stated under any `Γ` (weakening); Cut takes one
//! premise `Γ ⊢ φ_k` per element of `Γ'` followed by `Γ' ⊢ ψ`; Subst maps
//! the whole inference.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::metric_core::{format_rational, parse_rational};
use crate::rewrite_engine::bracket_abstract;
use crate::term_syntax::{
    instantiate, open, parse_sort, parse_term_with, print_term, shift, sort_of, substitute, typecheck,
    ConstTable, Environment, Signature, Sort, SyntaxError, Term,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeductionError {
    #[error("malformed derivation: {0}")]
    Format(String),
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("theory error: {0}")]
    Theory(String),
}

/// A typed variable.
pub type TypedVar = (String, Sort);

/// `left ≃_eps^X right` at `sort`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QuantEquation {
    pub left: Term,
    pub right: Term,
    pub eps: BigRational,
    pub sort: Sort,
    pub quantified: BTreeSet<TypedVar>,
}

impl QuantEquation {
    /// Equation with no quantified variables; the sort is computed.
    pub fn new(left: Term, right: Term, eps: BigRational) -> Result<Self, SyntaxError> {
        let sort = sort_of(&left)?;
        Ok(QuantEquation { left, right, eps, sort, quantified: BTreeSet::new() })
    }

    pub fn with_quantified(mut self, xs: impl IntoIterator<Item = TypedVar>) -> Self {
        self.quantified = xs.into_iter().collect();
        self
    }

    pub fn free_vars(&self) -> BTreeSet<TypedVar> {
        let mut s = self.left.free_vars();
        s.extend(self.right.free_vars());
        s
    }

    fn subst(&self, env: &Environment) -> Result<QuantEquation, SyntaxError> {
        Ok(QuantEquation {
            left: substitute(&self.left, env)?,
            right: substitute(&self.right, env)?,
            eps: self.eps.clone(),
            sort: self.sort.clone(),
            quantified: self.quantified.clone(),
        })
    }
}

impl fmt::Display for QuantEquation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ≃_{}", self.left, format_rational(&self.eps))?;
        if !self.quantified.is_empty() {
            let xs: Vec<&str> = self.quantified.iter().map(|(n, _)| n.as_str()).collect();
            write!(f, "^{{{}}}", xs.join(","))?;
        }
        write!(f, " {}", self.right)
    }
}

/// `hyps ⊢ conclusion`; hypotheses are a set.
#[derive(Debug, Clone, Eq)]
pub struct Inference {
    pub hyps: Vec<QuantEquation>,
    pub conclusion: QuantEquation,
}

impl PartialEq for Inference {
    fn eq(&self, other: &Self) -> bool {
        self.conclusion == other.conclusion && same_set(&self.hyps, &other.hyps)
    }
}

impl Inference {
    pub fn new(hyps: Vec<QuantEquation>, conclusion: QuantEquation) -> Self {
        let mut h: Vec<QuantEquation> = Vec::new();
        for e in hyps {
            if !h.contains(&e) {
                h.push(e);
            }
        }
        Inference { hyps: h, conclusion }
    }

    pub fn closed(conclusion: QuantEquation) -> Self {
        Inference { hyps: Vec::new(), conclusion }
    }

    pub fn vars(&self) -> BTreeSet<TypedVar> {
        let mut s = self.conclusion.free_vars();
        for h in &self.hyps {
            s.extend(h.free_vars());
        }
        s
    }
}

impl fmt::Display for Inference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let hs: Vec<String> = self.hyps.iter().map(|h| h.to_string()).collect();
        write!(f, "{{{}}} ⊢ {}", hs.join(", "), self.conclusion)
    }
}

fn subset(a: &[QuantEquation], b: &[QuantEquation]) -> bool {
    a.iter().all(|x| b.contains(x))
}

fn same_set(a: &[QuantEquation], b: &[QuantEquation]) -> bool {
    subset(a, b) && subset(b, a)
}

// ---------------------------------------------------------------------------
// Theories

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TheoryBase {
    None,
    CombinatoryLogic,
    Lambda,
    LambdaEta,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AxiomKind {
    /// `I x ≃_0 x` at every sort.
    CombI,
    /// `K x y ≃_0 x`.
    CombK,
    /// `S x y z ≃_0 x z (y z)`.
    CombS,
    Alpha,
    Beta,
    Eta,
    /// `r̄ ≃_ε s̄` for every `ε ≥ |r − s|` on declared grid constants.
    GridDistance,
    /// A basic inference, instantiated by variable renaming.
    Basic(Inference),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Axiom {
    pub name: String,
    pub kind: AxiomKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Theory {
    pub name: String,
    pub signature: Signature,
    pub axioms: Vec<Axiom>,
    pub base: TheoryBase,
    /// Partial regime: PRefl replaces Refl.
    pub partial: bool,
}

impl Theory {
    pub fn axiom(&self, name: &str) -> Option<&Axiom> {
        self.axioms.iter().find(|a| a.name == name)
    }

    pub fn has_kind(&self, kind: &AxiomKind) -> bool {
        self.axioms.iter().any(|a| a.kind == *kind)
    }

    pub fn includes_eta(&self) -> bool {
        self.has_kind(&AxiomKind::Eta)
    }

    pub fn is_lambda(&self) -> bool {
        matches!(self.base, TheoryBase::Lambda | TheoryBase::LambdaEta)
    }

    pub fn with_axiom(mut self, name: &str, inf: Inference) -> Self {
        self.axioms.push(Axiom { name: name.to_string(), kind: AxiomKind::Basic(inf) });
        self
    }

    pub fn partial(mut self) -> Self {
        self.partial = true;
        self.name.push_str("_partial");
        self
    }

    /// Name of an axiom admitting `inf` as an instance, if any.
    pub fn admits(&self, inf: &Inference) -> Option<&str> {
        self.axioms
            .iter()
            .find(|a| axiom_instance(self, a, inf).is_ok())
            .map(|a| a.name.as_str())
    }
}

pub const THEORY_NAMES: [&str; 4] = ["U_CL", "U_lambda", "U_lambda_eta", "U_CL_interval"];

/// The built-in theories over `sig`. Combinator axioms are schematic in
/// their sort indices, so one schema covers every sort.
pub fn builtin_theory(name: &str, sig: &Signature) -> Result<Theory, DeductionError> {
    let comb = || {
        vec![
            Axiom { name: "I".into(), kind: AxiomKind::CombI },
            Axiom { name: "K".into(), kind: AxiomKind::CombK },
            Axiom { name: "S".into(), kind: AxiomKind::CombS },
        ]
    };
    let lam = |eta: bool| {
        let mut v = vec![
            Axiom { name: "alpha".into(), kind: AxiomKind::Alpha },
            Axiom { name: "beta".into(), kind: AxiomKind::Beta },
        ];
        if eta {
            v.push(Axiom { name: "eta".into(), kind: AxiomKind::Eta });
        }
        v
    };
    let need_comb = || {
        if sig.combinators {
            Ok(())
        } else {
            Err(DeductionError::Theory(format!("{name} needs the combinators I, K, S in the signature")))
        }
    };
    let need_lam = || {
        if sig.lambda {
            Ok(())
        } else {
            Err(DeductionError::Theory(format!("{name} needs λ in the signature")))
        }
    };
    let (axioms, base) = match name {
        "U_CL" => {
            need_comb()?;
            (comb(), TheoryBase::CombinatoryLogic)
        }
        "U_lambda" | "U_lambda_eta" => {
            need_lam()?;
            let eta = name == "U_lambda_eta";
            let mut ax = lam(eta);
            if sig.combinators {
                ax.extend(comb());
            }
            (ax, if eta { TheoryBase::LambdaEta } else { TheoryBase::Lambda })
        }
        "U_CL_interval" => {
            need_comb()?;
            let mut ax = comb();
            ax.push(Axiom { name: "grid".into(), kind: AxiomKind::GridDistance });
            ax.extend(table_axioms(sig)?);
            (ax, TheoryBase::CombinatoryLogic)
        }
        other => return Err(DeductionError::Theory(format!("unknown theory {other}"))),
    };
    Ok(Theory { name: name.to_string(), signature: sig.clone(), axioms, base, partial: false })
}

/// `f̄ r̄_1 … r̄_k ≃_0 s̄` for every table row.
fn table_axioms(sig: &Signature) -> Result<Vec<Axiom>, DeductionError> {
    let mut out = Vec::new();
    for (name, decl) in &sig.symbols {
        let Some(ConstTable::Function(rows)) = &decl.table else { continue };
        for row in rows {
            if row.args.len() != decl.args.len() {
                return Err(DeductionError::Theory(format!("{name}: table row arity mismatch")));
            }
            let mut args = Vec::new();
            for (r, s) in row.args.iter().zip(&decl.args) {
                let c = sig.grid_constant(r, s).ok_or_else(|| {
                    DeductionError::Theory(format!("{name}: no grid constant for {} at {s}", format_rational(r)))
                })?;
                args.push(Term::cnst(c, s.clone()));
            }
            let out_c = sig.grid_constant(&row.value, &decl.result).ok_or_else(|| {
                DeductionError::Theory(format!("{name}: no grid constant for {}", format_rational(&row.value)))
            })?;
            let left = Term::apps(Term::cnst(name, decl.sort()), args);
            let right = Term::cnst(out_c, decl.result.clone());
            let eq = QuantEquation { left, right, eps: BigRational::zero(), sort: decl.result.clone(), quantified: BTreeSet::new() };
            let label: Vec<String> = row.args.iter().map(format_rational).collect();
            out.push(Axiom { name: format!("{name}({})", label.join(",")), kind: AxiomKind::Basic(Inference::closed(eq)) });
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Derivations

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    Cut,
    Assumpt,
    Refl,
    PRefl,
    Symm,
    Triang,
    Max,
    Arch,
    NExp,
    Subst,
    Abstraction,
    Concretion,
    Alpha,
    Xi,
    Beta,
    Eta,
    Axiom,
}

impl Rule {
    pub const ALL: [Rule; 17] = [
        Rule::Cut,
        Rule::Assumpt,
        Rule::Refl,
        Rule::PRefl,
        Rule::Symm,
        Rule::Triang,
        Rule::Max,
        Rule::Arch,
        Rule::NExp,
        Rule::Subst,
        Rule::Abstraction,
        Rule::Concretion,
        Rule::Alpha,
        Rule::Xi,
        Rule::Beta,
        Rule::Eta,
        Rule::Axiom,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Rule::Cut => "Cut",
            Rule::Assumpt => "Assumpt",
            Rule::Refl => "Refl",
            Rule::PRefl => "PRefl",
            Rule::Symm => "Symm",
            Rule::Triang => "Triang",
            Rule::Max => "Max",
            Rule::Arch => "Arch",
            Rule::NExp => "NExp",
            Rule::Subst => "Subst",
            Rule::Abstraction => "Abstraction",
            Rule::Concretion => "Concretion",
            Rule::Alpha => "Alpha",
            Rule::Xi => "Xi",
            Rule::Beta => "Beta",
            Rule::Eta => "Eta",
            Rule::Axiom => "Axiom",
        }
    }

    pub fn from_tag(s: &str) -> Option<Rule> {
        Rule::ALL.into_iter().find(|r| r.tag() == s)
    }
}

/// Rule parameters; which ones are used depends on the rule.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Params {
    /// Subst: the substitution.
    pub env: Option<Environment>,
    /// Max: the added amount.
    pub delta: Option<BigRational>,
    /// NExp: `app` or a symbol name.
    pub symbol: Option<String>,
    /// Axiom: the axiom name.
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Derivation {
    /// The rule tag as written; unknown tags are rejected by the checker.
    pub rule: String,
    pub params: Params,
    pub conclusion: Inference,
    pub premises: Vec<Derivation>,
}

impl Derivation {
    pub fn node(rule: Rule, params: Params, conclusion: Inference, premises: Vec<Derivation>) -> Self {
        Derivation { rule: rule.tag().to_string(), params, conclusion, premises }
    }

    pub fn leaf(rule: Rule, conclusion: Inference) -> Self {
        Derivation::node(rule, Params::default(), conclusion, vec![])
    }

    pub fn size(&self) -> usize {
        1 + self.premises.iter().map(|p| p.size()).sum::<usize>()
    }

    /// Rules used anywhere in the tree.
    pub fn rules(&self) -> BTreeSet<String> {
        let mut s = BTreeSet::new();
        self.visit(&mut |d| {
            s.insert(d.rule.clone());
        });
        s
    }

    pub fn visit(&self, f: &mut dyn FnMut(&Derivation)) {
        f(self);
        for p in &self.premises {
            p.visit(f);
        }
    }

    /// The node at `path` (premise indices from the root).
    pub fn at_mut(&mut self, path: &[usize]) -> Option<&mut Derivation> {
        let mut cur = self;
        for &i in path {
            cur = cur.premises.get_mut(i)?;
        }
        Some(cur)
    }

    /// Paths of all nodes, pre-order.
    pub fn paths(&self) -> Vec<Vec<usize>> {
        fn go(d: &Derivation, p: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            out.push(p.clone());
            for (i, c) in d.premises.iter().enumerate() {
                p.push(i);
                go(c, p, out);
                p.pop();
            }
        }
        let mut out = Vec::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }

    /// Applies `f` to every term in the tree (conclusions and Subst images).
    pub fn map_terms(&self, f: &dyn Fn(&Term) -> Term) -> Derivation {
        let map_eq = |e: &QuantEquation| QuantEquation {
            left: f(&e.left),
            right: f(&e.right),
            eps: e.eps.clone(),
            sort: e.sort.clone(),
            quantified: e.quantified.clone(),
        };
        Derivation {
            rule: self.rule.clone(),
            params: Params {
                env: self.params.env.as_ref().map(|env| env.iter().map(|(k, v)| (k.clone(), f(v))).collect()),
                ..self.params.clone()
            },
            conclusion: Inference {
                hyps: self.conclusion.hyps.iter().map(map_eq).collect(),
                conclusion: map_eq(&self.conclusion.conclusion),
            },
            premises: self.premises.iter().map(|p| p.map_terms(f)).collect(),
        }
    }
}

/// A rejected node: where, which rule, which side condition.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("at {} ({rule}): {condition}{}", path_str(.path), if .detail.is_empty() { String::new() } else { format!(" [{}]", .detail) })]
pub struct CheckError {
    pub path: Vec<usize>,
    pub rule: String,
    pub condition: String,
    pub detail: String,
}

fn path_str(p: &[usize]) -> String {
    if p.is_empty() {
        "root".to_string()
    } else {
        let parts: Vec<String> = p.iter().map(|i| i.to_string()).collect();
        format!("root/{}", parts.join("/"))
    }
}

type NodeResult = Result<(), (String, String)>;

fn fail(condition: &str, detail: impl Into<String>) -> NodeResult {
    Err((condition.to_string(), detail.into()))
}

fn ensure(ok: bool, condition: &str, detail: impl FnOnce() -> String) -> NodeResult {
    if ok {
        Ok(())
    } else {
        Err((condition.to_string(), detail()))
    }
}

/// Checks every node of `d` against `th`.
pub fn check_derivation(d: &Derivation, th: &Theory) -> Result<(), CheckError> {
    let mut path = Vec::new();
    check_node(d, th, &mut path)
}

fn check_node(d: &Derivation, th: &Theory, path: &mut Vec<usize>) -> Result<(), CheckError> {
    for (i, p) in d.premises.iter().enumerate() {
        path.push(i);
        check_node(p, th, path)?;
        path.pop();
    }
    check_local(d, th).map_err(|(condition, detail)| CheckError {
        path: path.clone(),
        rule: d.rule.clone(),
        condition,
        detail,
    })
}

fn check_sorts(e: &QuantEquation, th: &Theory) -> NodeResult {
    let l = typecheck(&e.left, &th.signature).map_err(|x| ("equation must be well sorted".to_string(), x.to_string()))?;
    let r = typecheck(&e.right, &th.signature).map_err(|x| ("equation must be well sorted".to_string(), x.to_string()))?;
    ensure(l == e.sort && r == e.sort, "equation sides must have the declared sort", || {
        format!("{l} / {r} vs {}", e.sort)
    })?;
    ensure(!e.eps.is_negative(), "ε must be non-negative", || format_rational(&e.eps))
}

fn premise_count(d: &Derivation, n: usize) -> NodeResult {
    ensure(d.premises.len() == n, "wrong number of premises", || {
        format!("expected {n}, found {}", d.premises.len())
    })
}

fn same_context(d: &Derivation) -> NodeResult {
    for p in &d.premises {
        ensure(same_set(&p.conclusion.hyps, &d.conclusion.hyps), "premise hypotheses must equal the conclusion's", || {
            p.conclusion.to_string()
        })?;
    }
    Ok(())
}

fn check_local(d: &Derivation, th: &Theory) -> NodeResult {
    let rule = Rule::from_tag(&d.rule).ok_or_else(|| ("unknown rule".to_string(), d.rule.clone()))?;
    let c = &d.conclusion.conclusion;
    for e in d.conclusion.hyps.iter().chain(std::iter::once(c)) {
        check_sorts(e, th)?;
    }
    let prem = |i: usize| &d.premises[i].conclusion.conclusion;
    let zero = BigRational::zero();
    match rule {
        Rule::Arch => fail("Arch is excluded: it has infinitely many premises", ""),
        Rule::Assumpt => {
            premise_count(d, 0)?;
            ensure(d.conclusion.hyps.contains(c), "Assumpt requires φ ∈ Γ", || c.to_string())
        }
        Rule::Refl => {
            premise_count(d, 0)?;
            ensure(!th.partial, "Refl is replaced by PRefl in partial theories", String::new)?;
            ensure(c.eps == zero, "Refl requires ε = 0", || format_rational(&c.eps))?;
            ensure(c.left == c.right, "Refl requires identical sides", || c.to_string())
        }
        Rule::PRefl => {
            ensure(th.partial, "PRefl needs a partial theory", String::new)?;
            premise_count(d, 1)?;
            same_context(d)?;
            let p = prem(0);
            ensure(p.quantified == c.quantified && p.sort == c.sort, "PRefl keeps sort and quantified set", String::new)?;
            ensure(c.eps == p.eps, "PRefl keeps ε", String::new)?;
            ensure(c.left == p.left && c.right == p.left, "PRefl concludes t ≃ t from t ≃ u", || c.to_string())
        }
        Rule::Symm => {
            premise_count(d, 1)?;
            same_context(d)?;
            let p = prem(0);
            ensure(p.quantified == c.quantified && p.sort == c.sort, "Symm keeps sort and quantified set", String::new)?;
            ensure(c.eps == p.eps, "Symm keeps ε", String::new)?;
            ensure(c.left == p.right && c.right == p.left, "Symm swaps the sides", || c.to_string())
        }
        Rule::Triang => {
            premise_count(d, 2)?;
            same_context(d)?;
            let (p, q) = (prem(0), prem(1));
            ensure(p.quantified == c.quantified && q.quantified == c.quantified, "Triang keeps the quantified set", String::new)?;
            ensure(p.right == q.left, "Triang needs a shared middle term", || format!("{} vs {}", p.right, q.left))?;
            ensure(c.left == p.left && c.right == q.right, "Triang concludes t ≃ u from t ≃ s, s ≃ u", || c.to_string())?;
            ensure(c.eps == &p.eps + &q.eps, "Triang requires ε to be the sum of the premise ε's", || {
                format!("{} ≠ {} + {}", format_rational(&c.eps), format_rational(&p.eps), format_rational(&q.eps))
            })
        }
        Rule::Max => {
            premise_count(d, 1)?;
            same_context(d)?;
            let p = prem(0);
            let delta = d.params.delta.clone().ok_or_else(|| ("Max needs the parameter delta".to_string(), String::new()))?;
            ensure(!delta.is_negative(), "Max requires delta ≥ 0", || format_rational(&delta))?;
            ensure(p.quantified == c.quantified, "Max keeps the quantified set", String::new)?;
            ensure(c.left == p.left && c.right == p.right, "Max keeps both sides", || c.to_string())?;
            ensure(c.eps == &p.eps + &delta, "Max requires ε + δ", || {
                format!("{} ≠ {} + {}", format_rational(&c.eps), format_rational(&p.eps), format_rational(&delta))
            })
        }
        Rule::NExp => check_nexp(d, th),
        Rule::Subst => check_subst(d, th),
        Rule::Abstraction | Rule::Concretion => {
            premise_count(d, 1)?;
            same_context(d)?;
            let p = prem(0);
            ensure(c.left == p.left && c.right == p.right && c.eps == p.eps && c.sort == p.sort, "the equation must be unchanged apart from its quantified set", || c.to_string())?;
            if rule == Rule::Abstraction {
                ensure(p.quantified.is_subset(&c.quantified), "Abstraction requires X ⊆ X′", String::new)?;
                ensure(c.free_vars().is_disjoint(&c.quantified), "Abstraction requires fv(t,s) ∩ X′ = ∅", || c.to_string())
            } else {
                ensure(c.quantified.is_subset(&p.quantified), "Concretion requires X′ ⊆ X", String::new)
            }
        }
        Rule::Alpha => {
            premise_count(d, 0)?;
            ensure(th.has_kind(&AxiomKind::Alpha), "α is not part of this theory", String::new)?;
            ensure(c.eps == zero, "α requires ε = 0", || format_rational(&c.eps))?;
            match (&c.left, &c.right) {
                (Term::Lam { name: x, sort: s1, body: b1 }, Term::Lam { name: y, sort: s2, body: b2 }) => {
                    ensure(s1 == s2 && b1 == b2, "α requires λy.t[y/x] on the right", || c.to_string())?;
                    let mut var = c.left.free_names();
                    var.extend(c.left.bound_names());
                    var.insert(x.clone());
                    ensure(!var.contains(y), "α freshness: y ∉ var(λx.t)", || y.clone())
                }
                _ => fail("α relates two abstractions", c.to_string()),
            }
        }
        Rule::Xi => {
            premise_count(d, 1)?;
            same_context(d)?;
            let p = prem(0);
            let (x, s, b1, b2) = match (&c.left, &c.right) {
                (Term::Lam { name: x, sort: s, body: b1 }, Term::Lam { name: y, sort: s2, body: b2 }) if x == y && s == s2 => {
                    (x, s, b1, b2)
                }
                _ => return fail("ξ concludes λx.t ≃ λx.u", c.to_string()),
            };
            ensure(c.eps == p.eps && c.quantified == p.quantified, "ξ keeps ε and the quantified set", String::new)?;
            ensure(open(b1, x, s) == p.left && open(b2, x, s) == p.right, "ξ conclusion must abstract the premise sides", || {
                format!("{} / {}", p.left, p.right)
            })?;
            ensure(c.quantified.contains(&(x.clone(), s.clone())), "ξ requires x ∈ X", || x.clone())
        }
        Rule::Beta => {
            premise_count(d, 0)?;
            ensure(th.has_kind(&AxiomKind::Beta), "β is not part of this theory", String::new)?;
            ensure(c.eps == zero, "β requires ε = 0", || format_rational(&c.eps))?;
            let (body, u) = match &c.left {
                Term::App { fun, arg } => match fun.as_ref() {
                    Term::Lam { body, .. } => (body, arg),
                    _ => return fail("β needs a redex (λx.t)u on the left", c.left.to_string()),
                },
                _ => return fail("β needs a redex (λx.t)u on the left", c.left.to_string()),
            };
            ensure(instantiate(body, u) == c.right, "β requires t[u/x] on the right", || c.right.to_string())?;
            ensure(u.free_names().is_disjoint(&body.bound_names()), "β hygiene violated", || {
                format!("fv(u) meets bd(t) in {}", c.left)
            })
        }
        Rule::Eta => {
            premise_count(d, 0)?;
            ensure(th.includes_eta(), "η is not part of this theory", String::new)?;
            ensure(c.eps == zero, "η requires ε = 0", || format_rational(&c.eps))?;
            let expect_body = Term::app(shift(&c.left, 1, 0), Term::bound(0));
            match &c.right {
                Term::Lam { name, sort, body } if **body == expect_body => {
                    ensure(matches!(&c.sort, Sort::Arrow(a, _) if **a == *sort), "η needs t of sort i→j", String::new)?;
                    ensure(!c.left.free_names().contains(name), "η requires x ∉ fv(t)", || name.clone())
                }
                _ => fail("η concludes t ≃ λx.(t x)", c.to_string()),
            }
        }
        Rule::Axiom => {
            premise_count(d, 0)?;
            let name = d.params.name.as_deref().ok_or_else(|| ("Axiom needs the parameter name".to_string(), String::new()))?;
            let ax = th.axiom(name).ok_or_else(|| ("no such axiom in the theory".to_string(), name.to_string()))?;
            axiom_instance(th, ax, &d.conclusion)
        }
        Rule::Cut => {
            ensure(!d.premises.is_empty(), "Cut needs the premise Γ′ ⊢ ψ", String::new)?;
            let last = &d.premises[d.premises.len() - 1].conclusion;
            ensure(last.conclusion == *c, "Cut concludes the last premise's equation", || last.conclusion.to_string())?;
            let firsts = &d.premises[..d.premises.len() - 1];
            for p in firsts {
                ensure(same_set(&p.conclusion.hyps, &d.conclusion.hyps), "Cut side premises must be stated under Γ", || {
                    p.conclusion.to_string()
                })?;
            }
            for h in &last.hyps {
                ensure(firsts.iter().any(|p| p.conclusion.conclusion == *h), "Cut needs Γ ⊢ φ for every φ ∈ Γ′", || h.to_string())?;
            }
            Ok(())
        }
    }
}

fn check_nexp(d: &Derivation, th: &Theory) -> NodeResult {
    let c = &d.conclusion.conclusion;
    same_context(d)?;
    let sym = d.params.symbol.as_deref().ok_or_else(|| ("NExp needs the parameter symbol".to_string(), String::new()))?;
    let (head, arity) = if sym == "app" {
        (None, 2)
    } else if let Some(decl) = th.signature.symbol(sym) {
        let sort = if th.signature.untyped { Sort::Star } else { decl.sort() };
        (Some(Term::cnst(sym, sort)), decl.args.len())
    } else if crate::term_syntax::is_combinator(sym) && th.signature.combinators {
        match &c.left {
            Term::Const { name, .. } if name == sym => (Some(c.left.clone()), 0),
            _ => return fail("NExp symbol arity mismatch", sym.to_string()),
        }
    } else {
        return fail("NExp symbol not in the signature", sym.to_string());
    };
    ensure(d.premises.len() == arity, "NExp symbol arity mismatch", || {
        format!("{sym} takes {arity}, found {} premises", d.premises.len())
    })?;
    for p in &d.premises {
        let e = &p.conclusion.conclusion;
        ensure(e.eps == c.eps, "NExp needs a common ε across premises and conclusion", || {
            format!("{} vs {}", format_rational(&e.eps), format_rational(&c.eps))
        })?;
        ensure(e.quantified == c.quantified, "NExp keeps the quantified set", String::new)?;
    }
    let lefts = d.premises.iter().map(|p| p.conclusion.conclusion.left.clone());
    let rights = d.premises.iter().map(|p| p.conclusion.conclusion.right.clone());
    let (l, r) = match head {
        None => {
            let l: Vec<Term> = lefts.collect();
            let r: Vec<Term> = rights.collect();
            (Term::app(l[0].clone(), l[1].clone()), Term::app(r[0].clone(), r[1].clone()))
        }
        Some(h) => (Term::apps(h.clone(), lefts), Term::apps(h, rights)),
    };
    ensure(c.left == l && c.right == r, "NExp conclusion must apply the symbol to the premise sides", || c.to_string())
}

fn check_subst(d: &Derivation, th: &Theory) -> NodeResult {
    premise_count(d, 1)?;
    let env = d.params.env.as_ref().ok_or_else(|| ("Subst needs the parameter env".to_string(), String::new()))?;
    let p = &d.premises[0].conclusion;
    let c = &d.conclusion;
    let x = &p.conclusion.quantified;
    ensure(c.conclusion.quantified == *x, "Subst keeps the quantified set", String::new)?;
    for (v, img) in env {
        typecheck(img, &th.signature).map_err(|e| ("Subst images must be well sorted".to_string(), e.to_string()))?;
        let fixed = x.iter().any(|(n, _)| n == v);
        if fixed {
            ensure(matches!(img, Term::Var { name, .. } if name == v), "Subst must fix the locally quantified variables", || v.clone())?;
        }
    }
    if th.is_lambda() {
        let mut bd = p.conclusion.left.bound_names();
        bd.extend(p.conclusion.right.bound_names());
        for h in &p.hyps {
            bd.extend(h.left.bound_names());
            bd.extend(h.right.bound_names());
        }
        for (v, img) in env {
            if x.iter().any(|(n, _)| n == v) {
                continue;
            }
            ensure(img.free_names().is_disjoint(&bd), "Subst hygiene violated: fv(f(x)) ∩ bd(t,s,Γ) ≠ ∅", || v.clone())?;
        }
    }
    let apply = |e: &QuantEquation| e.subst(env).map_err(|err| ("Subst env must preserve sorts".to_string(), err.to_string()));
    let mut hyps = Vec::new();
    for h in &p.hyps {
        hyps.push(apply(h)?);
    }
    let concl = apply(&p.conclusion)?;
    ensure(concl == c.conclusion, "Subst conclusion must be f(t) ≃ f(s)", || concl.to_string())?;
    ensure(same_set(&hyps, &c.hyps), "Subst hypotheses must be f(Γ)", String::new)
}

fn as_var(t: &Term) -> Option<TypedVar> {
    match t {
        Term::Var { name, sort } => Some((name.clone(), sort.clone())),
        _ => None,
    }
}

fn axiom_instance(th: &Theory, ax: &Axiom, inf: &Inference) -> NodeResult {
    let c = &inf.conclusion;
    let zero = BigRational::zero();
    let spine = |t: &Term| {
        let (h, a) = t.spine();
        (h.clone(), a.into_iter().cloned().collect::<Vec<_>>())
    };
    let comb_head = |h: &Term, n: &str| matches!(h, Term::Const { name, .. } if name == n);
    match &ax.kind {
        AxiomKind::CombI | AxiomKind::CombK | AxiomKind::CombS => {
            ensure(c.eps == zero, "combinator axioms have ε = 0", || format_rational(&c.eps))?;
            let (h, args) = spine(&c.left);
            if args.iter().any(|a| as_var(a).is_none()) {
                return fail("axiom instances use variables only; use Subst for terms", c.left.to_string());
            }
            let (n, want) = match ax.kind {
                AxiomKind::CombI => ("I", 1),
                AxiomKind::CombK => ("K", 2),
                _ => ("S", 3),
            };
            ensure(comb_head(&h, n) && args.len() == want, "conclusion is not an instance of the axiom", || c.to_string())?;
            let expect = match ax.kind {
                AxiomKind::CombI | AxiomKind::CombK => args[0].clone(),
                _ => Term::app(Term::app(args[0].clone(), args[2].clone()), Term::app(args[1].clone(), args[2].clone())),
            };
            ensure(c.right == expect, "conclusion is not an instance of the axiom", || c.to_string())
        }
        AxiomKind::GridDistance => {
            let val = |t: &Term| match t {
                Term::Const { name, .. } => th.signature.grid_value(name).map(|(v, _)| v.clone()),
                _ => None,
            };
            match (val(&c.left), val(&c.right)) {
                (Some(r), Some(s)) => ensure(c.eps >= (r - s).abs(), "grid axiom requires ε ≥ |r − s|", || c.to_string()),
                _ => fail("grid axiom relates two grid constants", c.to_string()),
            }
        }
        AxiomKind::Alpha | AxiomKind::Beta | AxiomKind::Eta => {
            fail("α, β and η are checked by their own rule tags", ax.name.clone())
        }
        AxiomKind::Basic(schema) => {
            ensure(c.quantified == schema.conclusion.quantified, "axiom instances keep the quantified set", String::new)?;
            ensure(c.eps == schema.conclusion.eps, "conclusion is not an instance of the axiom", || c.to_string())?;
            let mut ren = BTreeMap::new();
            let ok = match_eq(&schema.conclusion, c, &mut ren)
                && match_hyps(&schema.hyps, &inf.hyps, &mut ren);
            ensure(ok, "conclusion is not an instance of the axiom", || c.to_string())
        }
    }
}

/// Matches a pattern term against a target, renaming pattern variables to
/// target variables of the same sort.
fn match_term(p: &Term, t: &Term, ren: &mut BTreeMap<TypedVar, TypedVar>) -> bool {
    match (p, t) {
        (Term::Var { name, sort }, Term::Var { name: n2, sort: s2 }) => {
            if sort != s2 {
                return false;
            }
            let key = (name.clone(), sort.clone());
            let val = (n2.clone(), s2.clone());
            match ren.get(&key) {
                Some(v) => *v == val,
                None => {
                    ren.insert(key, val);
                    true
                }
            }
        }
        (Term::App { fun: f1, arg: a1 }, Term::App { fun: f2, arg: a2 }) => match_term(f1, f2, ren) && match_term(a1, a2, ren),
        (Term::Lam { sort: s1, body: b1, .. }, Term::Lam { sort: s2, body: b2, .. }) => s1 == s2 && match_term(b1, b2, ren),
        _ => p == t,
    }
}

fn match_eq(p: &QuantEquation, t: &QuantEquation, ren: &mut BTreeMap<TypedVar, TypedVar>) -> bool {
    p.eps == t.eps && p.sort == t.sort && match_term(&p.left, &t.left, ren) && match_term(&p.right, &t.right, ren)
}

/// Every pattern hypothesis must map onto some target hypothesis.
fn match_hyps(ps: &[QuantEquation], ts: &[QuantEquation], ren: &mut BTreeMap<TypedVar, TypedVar>) -> bool {
    let Some((first, rest)) = ps.split_first() else { return true };
    for t in ts {
        let mut trial = ren.clone();
        if match_eq(first, t, &mut trial) && match_hyps(rest, ts, &mut trial) {
            *ren = trial;
            return true;
        }
    }
    false
}

// ---------------------------------------------------------------------------
// JSON

/// Free-variable sorts for parsing surface terms in derivation files.
pub type VarDecls = BTreeMap<String, Sort>;

fn fmt_err(m: impl Into<String>) -> DeductionError {
    DeductionError::Format(m.into())
}

pub fn term_from_json(v: &Value, sig: &Signature, vars: &VarDecls) -> Result<Term, DeductionError> {
    match v {
        Value::String(s) => Ok(parse_term_with(s, sig, vars)?),
        Value::Object(_) => serde_json::from_value(v.clone()).map_err(|e| fmt_err(format!("term tree: {e}"))),
        _ => Err(fmt_err("a term is a string or a JSON tree")),
    }
}

fn var_from_json(v: &Value, sig: &Signature, vars: &VarDecls) -> Result<TypedVar, DeductionError> {
    let s = v.as_str().ok_or_else(|| fmt_err("quantified variables are strings"))?;
    if let Some((n, srt)) = s.split_once(':') {
        return Ok((n.trim().to_string(), parse_sort(srt.trim())?));
    }
    let n = s.trim().to_string();
    match vars.get(&n) {
        Some(srt) => Ok((n, srt.clone())),
        None if sig.untyped => Ok((n, Sort::Star)),
        None => Err(fmt_err(format!("quantified variable {n} needs a sort"))),
    }
}

pub fn equation_from_json(v: &Value, sig: &Signature, vars: &VarDecls) -> Result<QuantEquation, DeductionError> {
    let o = v.as_object().ok_or_else(|| fmt_err("an equation is an object"))?;
    let get = |k: &str| o.get(k).ok_or_else(|| fmt_err(format!("equation lacks {k}")));
    let left = term_from_json(get("left")?, sig, vars)?;
    let right = term_from_json(get("right")?, sig, vars)?;
    let eps = match get("eps")? {
        Value::String(s) => parse_rational(s).map_err(|e| fmt_err(e.to_string()))?,
        Value::Number(n) if n.is_u64() => BigRational::from_integer(n.as_u64().unwrap_or(0).into()),
        _ => return Err(fmt_err("eps is a rational string")),
    };
    let sort = match o.get("sort") {
        Some(Value::String(s)) => parse_sort(s)?,
        Some(_) => return Err(fmt_err("sort is a string")),
        None => sort_of(&left)?,
    };
    let mut quantified = BTreeSet::new();
    if let Some(xs) = o.get("X") {
        let arr = xs.as_array().ok_or_else(|| fmt_err("X is a list"))?;
        for x in arr {
            quantified.insert(var_from_json(x, sig, vars)?);
        }
    }
    Ok(QuantEquation { left, right, eps, sort, quantified })
}

pub fn equation_to_json(e: &QuantEquation) -> Value {
    let xs: Vec<String> = e.quantified.iter().map(|(n, s)| format!("{n}:{s}")).collect();
    json!({
        "left": print_term(&e.left),
        "right": print_term(&e.right),
        "eps": format_rational(&e.eps),
        "sort": e.sort.to_string(),
        "X": xs,
    })
}

pub fn inference_from_json(v: &Value, sig: &Signature, vars: &VarDecls) -> Result<Inference, DeductionError> {
    let o = v.as_object().ok_or_else(|| fmt_err("an inference is an object"))?;
    let mut hyps = Vec::new();
    if let Some(h) = o.get("hyps") {
        for e in h.as_array().ok_or_else(|| fmt_err("hyps is a list"))? {
            hyps.push(equation_from_json(e, sig, vars)?);
        }
    }
    let eq = equation_from_json(o.get("eq").ok_or_else(|| fmt_err("inference lacks eq"))?, sig, vars)?;
    Ok(Inference::new(hyps, eq))
}

pub fn inference_to_json(i: &Inference) -> Value {
    json!({
        "hyps": i.hyps.iter().map(equation_to_json).collect::<Vec<_>>(),
        "eq": equation_to_json(&i.conclusion),
    })
}

fn params_from_json(v: Option<&Value>, sig: &Signature, vars: &VarDecls) -> Result<Params, DeductionError> {
    let mut p = Params::default();
    let Some(v) = v else { return Ok(p) };
    let o = v.as_object().ok_or_else(|| fmt_err("params is an object"))?;
    if let Some(env) = o.get("env") {
        let m = env.as_object().ok_or_else(|| fmt_err("env is an object"))?;
        let mut e = Environment::new();
        for (k, t) in m {
            e.insert(k.clone(), term_from_json(t, sig, vars)?);
        }
        p.env = Some(e);
    }
    if let Some(d) = o.get("delta") {
        let s = d.as_str().ok_or_else(|| fmt_err("delta is a rational string"))?;
        p.delta = Some(parse_rational(s).map_err(|e| fmt_err(e.to_string()))?);
    }
    if let Some(s) = o.get("symbol") {
        p.symbol = Some(s.as_str().ok_or_else(|| fmt_err("symbol is a string"))?.to_string());
    }
    if let Some(s) = o.get("name") {
        p.name = Some(s.as_str().ok_or_else(|| fmt_err("name is a string"))?.to_string());
    }
    Ok(p)
}

fn params_to_json(p: &Params) -> Value {
    let mut m = Map::new();
    if let Some(env) = &p.env {
        let e: Map<String, Value> = env.iter().map(|(k, t)| (k.clone(), Value::String(print_term(t)))).collect();
        m.insert("env".into(), Value::Object(e));
    }
    if let Some(d) = &p.delta {
        m.insert("delta".into(), Value::String(format_rational(d)));
    }
    if let Some(s) = &p.symbol {
        m.insert("symbol".into(), Value::String(s.clone()));
    }
    if let Some(s) = &p.name {
        m.insert("name".into(), Value::String(s.clone()));
    }
    Value::Object(m)
}

pub fn derivation_from_json(v: &Value, sig: &Signature, vars: &VarDecls) -> Result<Derivation, DeductionError> {
    let o = v.as_object().ok_or_else(|| fmt_err("a derivation node is an object"))?;
    let rule = o
        .get("rule")
        .and_then(|r| r.as_str())
        .ok_or_else(|| fmt_err("node lacks a string rule"))?
        .to_string();
    let params = params_from_json(o.get("params"), sig, vars)?;
    let conclusion = inference_from_json(o.get("conclusion").ok_or_else(|| fmt_err("node lacks conclusion"))?, sig, vars)?;
    let mut premises = Vec::new();
    if let Some(ps) = o.get("premises") {
        for p in ps.as_array().ok_or_else(|| fmt_err("premises is a list"))? {
            premises.push(derivation_from_json(p, sig, vars)?);
        }
    }
    Ok(Derivation { rule, params, conclusion, premises })
}

pub fn derivation_to_json(d: &Derivation) -> Value {
    json!({
        "rule": d.rule,
        "params": params_to_json(&d.params),
        "conclusion": inference_to_json(&d.conclusion),
        "premises": d.premises.iter().map(derivation_to_json).collect::<Vec<_>>(),
    })
}

/// Reads a derivation file: a bare node, or `{"vars": {...}, "derivation": node}`.
pub fn parse_derivation_file(text: &str, sig: &Signature) -> Result<Derivation, DeductionError> {
    let v: Value = serde_json::from_str(text).map_err(|e| fmt_err(e.to_string()))?;
    let (vars, node) = match v.get("derivation") {
        Some(node) => {
            let mut vars = VarDecls::new();
            if let Some(m) = v.get("vars").and_then(|x| x.as_object()) {
                for (k, s) in m {
                    let s = s.as_str().ok_or_else(|| fmt_err("var sorts are strings"))?;
                    vars.insert(k.clone(), parse_sort(s)?);
                }
            }
            (vars, node.clone())
        }
        None => (VarDecls::new(), v),
    };
    derivation_from_json(&node, sig, &vars)
}

// ---------------------------------------------------------------------------
// Builders

/// `left ≃_0 right`; panics on ill-sorted terms.
pub fn eq0(left: Term, right: Term) -> QuantEquation {
    QuantEquation::new(left, right, BigRational::zero()).expect("builder terms are well sorted")
}

/// `t[u/x]` for a redex `(λx.t) u`.
pub fn beta_contract(redex: &Term) -> Option<Term> {
    match redex {
        Term::App { fun, arg } => match fun.as_ref() {
            Term::Lam { body, .. } => Some(instantiate(body, arg)),
            _ => None,
        },
        _ => None,
    }
}

/// Axiom node for combinator `name` applied to the variables `vars`.
pub fn comb_axiom(name: &str, vars: &[Term]) -> Derivation {
    let sorts: Vec<Sort> = vars.iter().map(|v| sort_of(v).expect("variable")).collect();
    let untyped = sorts.iter().all(|s| *s == Sort::Star);
    let (head, right) = match name {
        "I" => (
            if untyped { Term::comb("I") } else { Term::comb_i(&sorts[0]) },
            vars[0].clone(),
        ),
        "K" => (
            if untyped { Term::comb("K") } else { Term::comb_k(&sorts[0], &sorts[1]) },
            vars[0].clone(),
        ),
        _ => {
            let head = if untyped {
                Term::comb("S")
            } else {
                // x : i→j→k, y : i→j, z : i
                let (i, rest) = sorts[0].split_arrow().expect("arrow");
                let (j, k) = rest.split_arrow().expect("arrow");
                Term::comb_s(i, j, k)
            };
            let r = Term::app(Term::app(vars[0].clone(), vars[2].clone()), Term::app(vars[1].clone(), vars[2].clone()));
            (head, r)
        }
    };
    let left = Term::apps(head, vars.iter().cloned());
    Derivation::node(
        Rule::Axiom,
        Params { name: Some(name.to_string()), ..Params::default() },
        Inference::closed(eq0(left, right)),
        vec![],
    )
}

/// Subst node over a premise without hypotheses.
pub fn subst_node(premise: Derivation, env: Environment) -> Derivation {
    let concl = premise.conclusion.conclusion.subst(&env).expect("builder substitution is sort preserving");
    Derivation::node(
        Rule::Subst,
        Params { env: Some(env), ..Params::default() },
        Inference::closed(concl),
        vec![premise],
    )
}

/// Triang node; the premises must share their hypotheses.
pub fn triang(a: Derivation, b: Derivation) -> Derivation {
    let (p, q) = (&a.conclusion.conclusion, &b.conclusion.conclusion);
    let eq = QuantEquation {
        left: p.left.clone(),
        right: q.right.clone(),
        eps: &p.eps + &q.eps,
        sort: p.sort.clone(),
        quantified: p.quantified.clone(),
    };
    Derivation::node(Rule::Triang, Params::default(), Inference::new(a.conclusion.hyps.clone(), eq), vec![a, b])
}

fn fresh_vars(avoid: &BTreeSet<String>, sorts: &[Sort]) -> Vec<Term> {
    let mut taken = avoid.clone();
    let mut out = Vec::new();
    for (i, s) in sorts.iter().enumerate() {
        let base = ["x", "y", "z"][i % 3];
        let n = crate::term_syntax::fresh_name(base, &taken);
        taken.insert(n.clone());
        out.push(Term::var(&n, s.clone()));
    }
    out
}

/// Instance of combinator axiom `name` at the given arguments, as
/// Axiom + Subst.
pub fn comb_instance(name: &str, args: &[Term]) -> Derivation {
    let sorts: Vec<Sort> = args.iter().map(|a| sort_of(a).expect("well sorted")).collect();
    let mut avoid = BTreeSet::new();
    for a in args {
        avoid.extend(a.free_names());
    }
    let vars = fresh_vars(&avoid, &sorts);
    let ax = comb_axiom(name, &vars);
    let env: Environment = vars
        .iter()
        .zip(args)
        .map(|(v, a)| (as_var(v).expect("var").0, a.clone()))
        .collect();
    subst_node(ax, env)
}

/// Derivation of `∅ ⊢ S K K t ≃_0 t` in U_CL.
pub fn build_skk(t: &Term) -> Result<Derivation, DeductionError> {
    let i = sort_of(t)?;
    let (k1, k2) = if i == Sort::Star {
        (Term::comb("K"), Term::comb("K"))
    } else {
        let ii = Sort::arrow(i.clone(), i.clone());
        (Term::comb_k(&i, &ii), Term::comb_k(&i, &i))
    };
    let s_step = comb_instance("S", &[k1, k2.clone(), t.clone()]);
    let kt = Term::app(k2, t.clone());
    let k_step = comb_instance("K", &[t.clone(), kt]);
    Ok(triang(s_step, k_step))
}

/// Derivation of `∅ ⊢ Λx(t)·u ≃_0 t[u/x]` in U_CL, following the clauses of
/// bracket abstraction.
pub fn build_bracket(x: &str, x_sort: &Sort, t: &Term, u: &Term) -> Result<Derivation, DeductionError> {
    bracket_go(x, x_sort, t, u)
}

fn bracket_go(x: &str, xs: &Sort, t: &Term, u: &Term) -> Result<Derivation, DeductionError> {
    if let Term::Var { name, sort } = t {
        if name == x && sort == xs {
            // I u ≃ u
            return Ok(comb_instance("I", &[u.clone()]));
        }
    }
    if !t.free_vars().contains(&(x.to_string(), xs.clone())) {
        // K t u ≃ t
        return Ok(comb_instance("K", &[t.clone(), u.clone()]));
    }
    match t {
        Term::App { fun, arg } => {
            let a = bracket_abstract(x, xs, fun).map_err(|e| DeductionError::Theory(e.to_string()))?;
            let b = bracket_abstract(x, xs, arg).map_err(|e| DeductionError::Theory(e.to_string()))?;
            // S A B u ≃ A u (B u)
            let s_step = comb_instance("S", &[a, b, u.clone()]);
            let left = bracket_go(x, xs, fun, u)?;
            let right = bracket_go(x, xs, arg, u)?;
            let (l, r) = (&left.conclusion.conclusion, &right.conclusion.conclusion);
            let eq = QuantEquation {
                left: Term::app(l.left.clone(), r.left.clone()),
                right: Term::app(l.right.clone(), r.right.clone()),
                eps: BigRational::zero(),
                sort: sort_of(t)?,
                quantified: BTreeSet::new(),
            };
            let nexp = Derivation::node(
                Rule::NExp,
                Params { symbol: Some("app".into()), ..Params::default() },
                Inference::closed(eq),
                vec![left, right],
            );
            Ok(triang(s_step, nexp))
        }
        _ => Err(DeductionError::Theory(format!("cannot abstract {x} from {t}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term_syntax::parse_term;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn refl_then_max() {
        let sig = Signature::typed_lambda();
        let th = builtin_theory("U_lambda", &sig).unwrap();
        let t = parse_term("\\x:o. x", &sig).unwrap();
        let refl = Derivation::leaf(Rule::Refl, Inference::closed(eq0(t.clone(), t.clone())));
        let eq = QuantEquation::new(t.clone(), t.clone(), r(1, 2)).unwrap();
        let max = Derivation::node(Rule::Max, Params { delta: Some(r(1, 2)), ..Params::default() }, Inference::closed(eq), vec![refl]);
        assert_eq!(check_derivation(&max, &th), Ok(()));
    }

    #[test]
    fn xi_requires_x_in_x() {
        let sig = Signature::typed_lambda();
        let th = builtin_theory("U_lambda", &sig).unwrap();
        let x = Term::var("x", Sort::o());
        let prem = Derivation::leaf(Rule::Refl, Inference::closed(eq0(x.clone(), x.clone())));
        let lam = Term::lam("x", Sort::o(), x.clone());
        let d = Derivation::node(Rule::Xi, Params::default(), Inference::closed(eq0(lam.clone(), lam)), vec![prem]);
        let e = check_derivation(&d, &th).unwrap_err();
        assert_eq!(e.condition, "ξ requires x ∈ X");
    }

    #[test]
    fn beta_hygiene() {
        let sig = Signature::typed_lambda();
        let th = builtin_theory("U_lambda", &sig).unwrap();
        // (λx. λy. x) y: the argument's free y meets the bound y
        let t = parse_term("(\\x:o. \\y:o. x) (y : o)", &sig).unwrap();
        let (body, u) = match &t {
            Term::App { fun, arg } => match fun.as_ref() {
                Term::Lam { body, .. } => (body.clone(), arg.clone()),
                _ => unreachable!(),
            },
            _ => unreachable!(),
        };
        let d = Derivation::leaf(Rule::Beta, Inference::closed(eq0(t.clone(), instantiate(&body, &u))));
        assert_eq!(check_derivation(&d, &th).unwrap_err().condition, "β hygiene violated");
    }

    #[test]
    fn builtin_counts() {
        let th = builtin_theory("U_CL", &Signature::untyped_cl()).unwrap();
        assert_eq!(th.axioms.len(), 3);
        let sig = Signature::typed_lambda();
        assert!(builtin_theory("U_lambda_eta", &sig).unwrap().includes_eta());
        assert!(!builtin_theory("U_lambda", &sig).unwrap().includes_eta());
        assert!(builtin_theory("U_lambda", &Signature::typed_cl()).is_err());
    }

    #[test]
    fn grid_axiom_present() {
        let lo = r(0, 1);
        let hi = r(1, 1);
        let step = r(1, 2);
        let sig = Signature::typed_cl().with_grid_constants(&lo, &hi, &step);
        let th = builtin_theory("U_CL_interval", &sig).unwrap();
        let s = Sort::Interval(lo, hi);
        let eq = QuantEquation::new(Term::cnst("r0", s.clone()), Term::cnst("r1_2", s), r(1, 2)).unwrap();
        assert_eq!(th.admits(&Inference::closed(eq.clone())), Some("grid"));
        let tight = QuantEquation { eps: r(1, 4), ..eq };
        assert_eq!(th.admits(&Inference::closed(tight)), None);
    }

    #[test]
    fn skk_and_bracket_derivations_check() {
        let sig = Signature::untyped_cl();
        let th = builtin_theory("U_CL", &sig).unwrap();
        let t = parse_term("K x y", &sig).unwrap();
        let d = build_skk(&t).unwrap();
        assert_eq!(check_derivation(&d, &th), Ok(()));
        let body = parse_term("x (y x)", &sig).unwrap();
        let u = parse_term("S K", &sig).unwrap();
        let d = build_bracket("x", &Sort::Star, &body, &u).unwrap();
        assert_eq!(check_derivation(&d, &th), Ok(()));
        let c = &d.conclusion.conclusion;
        let mut env = Environment::new();
        env.insert("x".into(), u.clone());
        assert_eq!(c.right, substitute(&body, &env).unwrap());

        let tsig = Signature::typed_cl();
        let tth = builtin_theory("U_CL", &tsig).unwrap();
        let f = Term::var("f", Sort::arrow(Sort::o(), Sort::o()));
        let xo = Term::var("x", Sort::o());
        let body = Term::app(f.clone(), Term::app(f, xo.clone()));
        let d = build_bracket("x", &Sort::o(), &body, &Term::bot(Sort::o())).unwrap();
        assert_eq!(check_derivation(&d, &tth), Ok(()));
        let d = build_skk(&xo).unwrap();
        assert_eq!(check_derivation(&d, &tth), Ok(()));
    }

    #[test]
    fn json_round_trip() {
        let sig = Signature::untyped_cl();
        let t = parse_term("x", &sig).unwrap();
        let d = build_skk(&t).unwrap();
        let j = derivation_to_json(&d);
        let back = derivation_from_json(&j, &sig, &VarDecls::new()).unwrap();
        assert_eq!(back, d);
    }
}

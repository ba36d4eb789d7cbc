//! `qlam`: batch front end for qlam-core.
//!
//! Output is JSON unless `-H` is given. Exit codes: 0 success, 1 domain
//! error, 2 usage error.

mod repro;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use serde_json::{json, Value};

use qlam_core::corpus::{algebras_for, shipped_algebras, shipped_derivations, Group};
use qlam_core::finite_models::{
    build_full_type_structure, build_grid_algebra, satisfies_inference, soundness_harness, FiniteQuantAlgebra,
    GridConstant, HarnessStatus, SatMode,
};
use qlam_core::metric_core::{
    check_exponentiable, classify_space, hom_distance, parse_rational, ExpMode, ExpOutcome, ExtReal,
    FiniteMetricSpace, HomKind, PointMap,
};
use qlam_core::quant_deduction::{builtin_theory, check_derivation, inference_from_json, parse_derivation_file, VarDecls};
use qlam_core::rewrite_engine::{bracket_abstract, cl_reduce, default_fuel, eta_long, normalize_counted, NormalForm};
use qlam_core::term_metrics::{dnf_distance, e_distance, fth_distance, order_distance, project, DEFAULT_WITNESS_BUDGET};
use qlam_core::term_syntax::{parse_sort, parse_term_with, print_term, typecheck, ConstTable, Signature, Sort, Term};

#[derive(Parser)]
#[command(name = "qlam", version, about = "Quantitative equational reasoning for CL and the typed λ-calculus")]
struct Cli {
    /// Human-readable output instead of JSON.
    #[arg(short = 'H', long = "human", global = true)]
    human: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SigKind {
    UntypedCl,
    UntypedLambda,
    TypedCl,
    TypedLambda,
}

#[derive(Args, Clone)]
struct TermOpts {
    /// Treat term arguments as inline expressions rather than file paths.
    #[arg(long)]
    expr: bool,
    /// Built-in signature.
    #[arg(long, value_enum, default_value = "typed-lambda")]
    sig: SigKind,
    /// Signature JSON file; overrides --sig.
    #[arg(long)]
    sig_file: Option<PathBuf>,
    /// Free-variable declaration NAME:SORT (repeatable).
    #[arg(long = "var", value_name = "NAME:SORT")]
    vars: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    E,
    Nf,
    Order,
    Fth,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Phi,
    Xi,
    XiPrime,
    Theta,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Full,
    ImageRestricted,
}

#[derive(Clone, Copy, ValueEnum)]
enum SatArg {
    Sat,
    SatStar,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a term and print it with its sort and tree.
    Parse {
        term: String,
        #[command(flatten)]
        opts: TermOpts,
    },
    /// Sort of a term.
    Typecheck {
        term: String,
        #[command(flatten)]
        opts: TermOpts,
    },
    /// βη-normal form (β-normal for untyped terms).
    Normalize {
        term: String,
        #[command(flatten)]
        opts: TermOpts,
        /// Reduction step limit (default: QLAM_FUEL or 10000).
        #[arg(long)]
        fuel: Option<usize>,
        /// Also η-expand to long normal form.
        #[arg(long)]
        eta_long: bool,
    },
    /// Weak CL reduction.
    ReduceCl {
        term: String,
        #[command(flatten)]
        opts: TermOpts,
        #[arg(long)]
        fuel: Option<usize>,
    },
    /// Bracket abstraction Λx(t); with --apply, also checks Λx(t)·u against t[u/x].
    Bracket {
        /// The variable, as NAME or NAME:SORT.
        var: String,
        term: String,
        #[command(flatten)]
        opts: TermOpts,
        /// An argument u (same input convention as TERM).
        #[arg(long)]
        apply: Option<String>,
    },
    /// Depth-n projection of the normal form.
    Project {
        term: String,
        #[arg(long)]
        depth: usize,
        #[command(flatten)]
        opts: TermOpts,
    },
    /// Distance between two terms.
    Dist {
        left: String,
        right: String,
        #[arg(long, value_enum, default_value = "e")]
        metric: Metric,
        #[command(flatten)]
        opts: TermOpts,
        /// Witness budget for --metric nf.
        #[arg(long, default_value_t = DEFAULT_WITNESS_BUDGET)]
        budget: usize,
        /// Largest base size for --metric fth.
        #[arg(long, default_value_t = 3)]
        n_max: usize,
    },
    /// Hom-distance of two maps; FILE holds {"domain", "codomain", "f", "g"}.
    HomDist {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "xi")]
        kind: KindArg,
    },
    /// Classify a finite space given as {"points", "dist"}.
    Classify { file: PathBuf },
    /// Exponentiability check for a finite metric space.
    ExpCheck {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "full")]
        mode: ModeArg,
    },
    /// Build a full type structure.
    BuildFts {
        /// Base space file; omit to use --discrete.
        #[arg(long)]
        base: Option<PathBuf>,
        /// Discrete base with N points at distance 1.
        #[arg(long)]
        discrete: Option<usize>,
        /// Sorts to enumerate (repeatable).
        #[arg(long = "sort")]
        sorts: Vec<String>,
        #[arg(long, default_value_t = 4096)]
        budget: usize,
    },
    /// Build a grid algebra from a spec file.
    BuildGrid { file: PathBuf },
    /// Check a derivation file against a theory.
    CheckProof {
        file: PathBuf,
        /// U_CL, U_lambda, U_lambda_eta or U_CL_interval (append _partial for PRefl).
        #[arg(long)]
        theory: String,
        #[command(flatten)]
        opts: TermOpts,
    },
    /// Check an inference in an algebra.
    ModelCheck {
        /// Algebra spec file.
        #[arg(long)]
        algebra: PathBuf,
        /// Inference file: an inference, or {"vars", "inference"}.
        inference: PathBuf,
        #[arg(long, value_enum, default_value = "sat")]
        mode: SatArg,
    },
    /// Run the shipped soundness corpus; one JSON line per pair.
    Harness {
        /// Worker threads.
        #[arg(long, default_value_t = 4)]
        jobs: usize,
    },
    /// Run a named scenario and compare it with its golden file.
    Repro {
        /// remark25, remark27, example15, remark-theta-xi, fth-church,
        /// nat-not-exponentiable, or `list`.
        name: String,
        /// Directory of golden files.
        #[arg(long)]
        golden_dir: Option<PathBuf>,
        /// Rewrite the golden file instead of comparing.
        #[arg(long)]
        update: bool,
    },
}

/// A domain error, reported with exit code 1.
#[derive(Debug)]
pub struct Failure(pub String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

pub type Res<T> = Result<T, Failure>;

/// What a verb produced: JSON, a human rendering, and whether it counts as
/// success.
pub struct Output {
    pub json: Value,
    pub human: String,
    pub ok: bool,
}

impl Output {
    fn ok(json: Value, human: impl Into<String>) -> Self {
        Output { json, human: human.into(), ok: true }
    }
}

fn read(path: &Path) -> Res<String> {
    fs::read_to_string(path).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn signature(opts: &TermOpts) -> Res<Signature> {
    if let Some(p) = &opts.sig_file {
        return Ok(serde_json::from_str(&read(p)?)?);
    }
    Ok(match opts.sig {
        SigKind::UntypedCl => Signature::untyped_cl(),
        SigKind::UntypedLambda => Signature::untyped_lambda(),
        SigKind::TypedCl => Signature::typed_cl(),
        SigKind::TypedLambda => Signature::typed_lambda(),
    })
}

fn var_decls(opts: &TermOpts) -> Res<VarDecls> {
    let mut out = VarDecls::new();
    for v in &opts.vars {
        let (n, s) = v.split_once(':').ok_or_else(|| Failure(format!("--var expects NAME:SORT, got {v:?}")))?;
        out.insert(n.trim().to_string(), parse_sort(s.trim())?);
    }
    Ok(out)
}

fn load_term(arg: &str, opts: &TermOpts, sig: &Signature) -> Res<Term> {
    let text = if opts.expr { arg.to_string() } else { read(Path::new(arg))? };
    let trimmed = text.trim();
    if trimmed.starts_with('{') {
        let t: Term = serde_json::from_str(trimmed)?;
        typecheck(&t, sig)?;
        return Ok(t);
    }
    let t = parse_term_with(trimmed, sig, &var_decls(opts)?)?;
    typecheck(&t, sig)?;
    Ok(t)
}

fn fuel_for(t: &Term, fuel: Option<usize>) -> Option<usize> {
    match fuel {
        Some(f) => Some(f),
        None if t.is_untyped() => Some(default_fuel()),
        None => std::env::var("QLAM_FUEL").ok().and_then(|v| v.parse().ok()),
    }
}

fn nf_of(t: &Term) -> Res<NormalForm> {
    Ok(normalize_counted(t, fuel_for(t, None))?.0)
}

fn load_space(path: &Path) -> Res<FiniteMetricSpace> {
    Ok(FiniteMetricSpace::from_json(&read(path)?)?)
}

fn rational(v: &Value) -> Res<BigRational> {
    match v {
        Value::String(s) => Ok(parse_rational(s)?),
        Value::Number(n) if n.is_i64() => Ok(BigRational::from_integer(n.as_i64().unwrap_or(0).into())),
        other => Err(Failure(format!("expected a rational, got {other}"))),
    }
}

/// An algebra spec: `{"shipped": name}`, `{"fts": {...}}` or `{"grid": {...}}`.
fn load_algebra(path: &Path) -> Res<FiniteQuantAlgebra> {
    let v: Value = serde_json::from_str(&read(path)?)?;
    algebra_from_json(&v)
}

fn sorts_of(v: Option<&Value>) -> Res<Vec<Sort>> {
    let mut out = Vec::new();
    if let Some(a) = v {
        for s in a.as_array().ok_or_else(|| Failure("sorts is a list".into()))? {
            out.push(parse_sort(s.as_str().ok_or_else(|| Failure("sorts are strings".into()))?)?);
        }
    }
    Ok(out)
}

fn budget_of(v: &Value) -> usize {
    v.get("budget").and_then(|b| b.as_u64()).map(|b| b as usize).unwrap_or(4096)
}

fn algebra_from_json(v: &Value) -> Res<FiniteQuantAlgebra> {
    if let Some(name) = v.get("shipped").and_then(|n| n.as_str()) {
        return shipped_algebras()?
            .into_iter()
            .find(|a| a.name == name)
            .ok_or_else(|| Failure(format!("no shipped algebra {name}")));
    }
    if let Some(f) = v.get("fts") {
        let base = match (f.get("base"), f.get("discrete")) {
            (Some(b), _) => serde_json::from_value::<FiniteMetricSpace>(b.clone())?,
            (None, Some(n)) => FiniteMetricSpace::discrete(n.as_u64().unwrap_or(0) as usize, ExtReal::one()),
            _ => return Err(Failure("fts needs base or discrete".into())),
        };
        return Ok(build_full_type_structure(&base, &sorts_of(f.get("sorts"))?, budget_of(f))?);
    }
    if let Some(g) = v.get("grid") {
        return grid_from_json(g);
    }
    Err(Failure("algebra spec needs one of shipped, fts, grid".into()))
}

/// `{"intervals": [["0","1"]], "step": "1/8", "constants": [...], "sorts": [...]}`.
fn grid_from_json(g: &Value) -> Res<FiniteQuantAlgebra> {
    let mut intervals = Vec::new();
    for iv in g.get("intervals").and_then(|i| i.as_array()).ok_or_else(|| Failure("grid needs intervals".into()))? {
        let pair = iv.as_array().filter(|p| p.len() == 2).ok_or_else(|| Failure("an interval is [lo, hi]".into()))?;
        intervals.push((rational(&pair[0])?, rational(&pair[1])?));
    }
    let step = rational(g.get("step").ok_or_else(|| Failure("grid needs step".into()))?)?;
    let mut consts = Vec::new();
    if let Some(cs) = g.get("constants") {
        for c in cs.as_array().ok_or_else(|| Failure("constants is a list".into()))? {
            let name = c.get("name").and_then(|n| n.as_str()).ok_or_else(|| Failure("constant needs a name".into()))?;
            let args = sorts_of(c.get("args"))?;
            let result = parse_sort(c.get("result").and_then(|r| r.as_str()).ok_or_else(|| Failure("constant needs result".into()))?)?;
            let table: ConstTable = serde_json::from_value(c.get("table").cloned().unwrap_or(Value::Null))?;
            consts.push(GridConstant { name: name.to_string(), args, result, table });
        }
    }
    Ok(build_grid_algebra(&intervals, &step, &consts, &sorts_of(g.get("sorts"))?, budget_of(g))?)
}

fn theory_for(name: &str, sig: &Signature) -> Res<qlam_core::quant_deduction::Theory> {
    let (base, partial) = match name.strip_suffix("_partial") {
        Some(b) => (b, true),
        None => (name, false),
    };
    let th = builtin_theory(base, sig)?;
    Ok(if partial { th.partial() } else { th })
}

fn default_sig_for(theory: &str) -> Signature {
    if theory.starts_with("U_CL_interval") {
        qlam_core::corpus::interval_signature()
    } else if theory.starts_with("U_CL") {
        Signature::typed_cl()
    } else {
        Signature::typed_lambda()
    }
}

fn run(cli: Cli) -> Res<Output> {
    match cli.command {
        Command::Parse { term, opts } => {
            let sig = signature(&opts)?;
            let t = load_term(&term, &opts, &sig)?;
            let sort = typecheck(&t, &sig)?;
            let printed = print_term(&t);
            let human = format!("{printed} : {sort}");
            Ok(Output::ok(json!({"term": printed, "sort": sort.to_string(), "tree": serde_json::to_value(&t)?}), human))
        }
        Command::Typecheck { term, opts } => {
            let sig = signature(&opts)?;
            let t = load_term(&term, &opts, &sig)?;
            let sort = typecheck(&t, &sig)?;
            Ok(Output::ok(json!({"sort": sort.to_string()}), sort.to_string()))
        }
        Command::Normalize { term, opts, fuel, eta_long: long } => {
            let sig = signature(&opts)?;
            let t = load_term(&term, &opts, &sig)?;
            let (nf, steps) = normalize_counted(&t, fuel_for(&t, fuel))?;
            let nf = if long { eta_long(nf.term())? } else { nf };
            let printed = print_term(nf.term());
            Ok(Output::ok(json!({"normal_form": printed, "steps": steps}), printed))
        }
        Command::ReduceCl { term, opts, fuel } => {
            let sig = signature(&opts)?;
            let t = load_term(&term, &opts, &sig)?;
            let r = cl_reduce(&t, fuel.unwrap_or_else(default_fuel))?;
            let printed = print_term(&r.term);
            let human = format!("{printed}  ({} steps{})", r.steps, if r.out_of_fuel { ", out of fuel" } else { "" });
            Ok(Output::ok(json!({"term": printed, "steps": r.steps, "out_of_fuel": r.out_of_fuel}), human))
        }
        Command::Bracket { var, term, opts, apply } => {
            let sig = signature(&opts)?;
            let t = load_term(&term, &opts, &sig)?;
            let (name, sort) = match var.split_once(':') {
                Some((n, s)) => (n.trim().to_string(), parse_sort(s.trim())?),
                None if sig.untyped => (var.clone(), Sort::Star),
                None => {
                    let fv = t.free_vars();
                    let s = fv.iter().find(|(n, _)| *n == var).map(|(_, s)| s.clone());
                    (var.clone(), s.ok_or_else(|| Failure(format!("give the sort of {var} as {var}:SORT")))?)
                }
            };
            let abs = bracket_abstract(&name, &sort, &t)?;
            let mut out = json!({"abstraction": print_term(&abs)});
            let mut human = print_term(&abs);
            if let Some(u) = apply {
                let u = load_term(&u, &opts, &sig)?;
                let fuel = default_fuel();
                let lhs = cl_reduce(&Term::app(abs.clone(), u.clone()), fuel)?;
                let env = [(name.clone(), u)].into_iter().collect();
                let rhs = cl_reduce(&qlam_core::term_syntax::substitute(&t, &env)?, fuel)?;
                let agree = lhs.term == rhs.term;
                out["applied"] = json!(print_term(&lhs.term));
                out["substituted"] = json!(print_term(&rhs.term));
                out["agree"] = json!(agree);
                human = format!("{human}\n  applied:     {}\n  substituted: {}\n  agree: {agree}", print_term(&lhs.term), print_term(&rhs.term));
            }
            Ok(Output::ok(out, human))
        }
        Command::Project { term, depth, opts } => {
            let sig = signature(&opts)?;
            let t = load_term(&term, &opts, &sig)?;
            let p = project(&nf_of(&t)?, depth);
            let printed = print_term(p.term());
            Ok(Output::ok(json!({"projection": printed, "depth": depth}), printed))
        }
        Command::Dist { left, right, metric, opts, budget, n_max } => {
            let sig = signature(&opts)?;
            let (t, s) = (nf_of(&load_term(&left, &opts, &sig)?)?, nf_of(&load_term(&right, &opts, &sig)?)?);
            match metric {
                Metric::E => {
                    let d = e_distance(&t, &s)?;
                    Ok(Output::ok(json!({"value": d.to_string()}), d.to_string()))
                }
                Metric::Nf => {
                    let c = dnf_distance(&t, &s, budget)?;
                    let human = format!("{} ({:?})", c.value, c.status);
                    Ok(Output::ok(serde_json::to_value(&c)?, human))
                }
                Metric::Order => {
                    let (d, r) = order_distance(&t, &s)?;
                    let mut j = serde_json::to_value(&r)?;
                    j["value"] = json!(d.to_string());
                    Ok(Output::ok(j, d.to_string()))
                }
                Metric::Fth => {
                    let r = fth_distance(&t, &s, n_max)?;
                    let human = format!("{} (n = {}, {:?})", r.value, r.n, r.status);
                    Ok(Output::ok(serde_json::to_value(&r)?, human))
                }
            }
        }
        Command::HomDist { file, kind } => {
            let v: Value = serde_json::from_str(&read(&file)?)?;
            let get = |k: &str| v.get(k).cloned().ok_or_else(|| Failure(format!("missing field {k}")));
            let a: FiniteMetricSpace = serde_json::from_value(get("domain")?)?;
            let b: FiniteMetricSpace = serde_json::from_value(get("codomain")?)?;
            let f = PointMap::new(serde_json::from_value(get("f")?)?);
            let g = PointMap::new(serde_json::from_value(get("g")?)?);
            let kind = match kind {
                KindArg::Phi => HomKind::Phi,
                KindArg::Xi => HomKind::Xi,
                KindArg::XiPrime => HomKind::XiPrime,
                KindArg::Theta => HomKind::Theta,
            };
            let d = hom_distance(kind, &a, &b, &f, &g)?;
            Ok(Output::ok(json!({"kind": kind.name(), "value": d.to_string()}), d.to_string()))
        }
        Command::Classify { file } => {
            let c = classify_space(&load_space(&file)?)?;
            let human = format!(
                "premetric {} metric {} ultrametric {} partial_ultrametric {}",
                c.premetric, c.metric, c.ultrametric, c.partial_ultrametric
            );
            Ok(Output::ok(serde_json::to_value(c)?, human))
        }
        Command::ExpCheck { file, mode } => {
            let mode = match mode {
                ModeArg::Full => ExpMode::Full,
                ModeArg::ImageRestricted => ExpMode::ImageRestricted,
            };
            let r = check_exponentiable(&load_space(&file)?, mode)?;
            let human = match &r {
                ExpOutcome::Ok => "ok".to_string(),
                ExpOutcome::Witness(w) => format!("fails at x0={} x2={} alpha={} beta={}", w.x0, w.x2, w.alpha, w.beta),
            };
            Ok(Output::ok(serde_json::to_value(&r)?, human))
        }
        Command::BuildFts { base, discrete, sorts, budget } => {
            let base = match (base, discrete) {
                (Some(p), _) => load_space(&p)?,
                (None, Some(n)) => FiniteMetricSpace::discrete(n, ExtReal::one()),
                (None, None) => return Err(Failure("give --base FILE or --discrete N".into())),
            };
            let sorts = sorts.iter().map(|s| parse_sort(s)).collect::<Result<Vec<_>, _>>()?;
            let alg = build_full_type_structure(&base, &sorts, budget)?;
            Ok(Output::ok(alg.to_json(), algebra_summary(&alg)))
        }
        Command::BuildGrid { file } => {
            let v: Value = serde_json::from_str(&read(&file)?)?;
            let alg = grid_from_json(&v)?;
            Ok(Output::ok(alg.to_json(), algebra_summary(&alg)))
        }
        Command::CheckProof { file, theory, opts } => {
            let sig = if opts.sig_file.is_some() { signature(&opts)? } else { default_sig_for(&theory) };
            let th = theory_for(&theory, &sig)?;
            let d = parse_derivation_file(&read(&file)?, &sig)?;
            match check_derivation(&d, &th) {
                Ok(()) => Ok(Output::ok(json!({"ok": true, "nodes": d.size()}), format!("ok ({} nodes)", d.size()))),
                Err(e) => Err(Failure(e.to_string())),
            }
        }
        Command::ModelCheck { algebra, inference, mode } => {
            let alg = load_algebra(&algebra)?;
            let v: Value = serde_json::from_str(&read(&inference)?)?;
            let (vars, node) = match v.get("inference") {
                Some(n) => {
                    let mut vars = VarDecls::new();
                    if let Some(m) = v.get("vars").and_then(|m| m.as_object()) {
                        for (k, s) in m {
                            vars.insert(k.clone(), parse_sort(s.as_str().unwrap_or_default())?);
                        }
                    }
                    (vars, n.clone())
                }
                None => (VarDecls::new(), v),
            };
            let inf = inference_from_json(&node, &alg.signature, &vars)?;
            let mode = match mode {
                SatArg::Sat => SatMode::Sat,
                SatArg::SatStar => SatMode::SatStar,
            };
            let r = satisfies_inference(&alg, &inf, mode)?;
            let human = match &r.counter {
                None => "satisfied".to_string(),
                Some(c) => format!("refuted: {}", c.to_json()),
            };
            Ok(Output::ok(r.to_json(), human))
        }
        Command::Harness { jobs } => harness(jobs),
        Command::Repro { name, golden_dir, update } => repro::run(&name, golden_dir, update),
    }
}

fn algebra_summary(alg: &FiniteQuantAlgebra) -> String {
    let mut lines = vec![format!("algebra {}", alg.name)];
    for s in alg.sorts() {
        let c = alg.carrier(s).expect("listed sort");
        lines.push(format!("  {s}: {} elements, metric {}", c.len(), c.metric));
    }
    lines.join("\n")
}

fn harness(jobs: usize) -> Res<Output> {
    let entries = shipped_derivations();
    let algs = shipped_algebras()?;
    let mut lines = Vec::new();
    let mut records = Vec::new();
    let mut violations = 0;
    for g in Group::ALL {
        let ds: Vec<_> = entries.iter().filter(|e| e.group == g).map(|e| (e.name.clone(), e.derivation.clone())).collect();
        let picked: Vec<&FiniteQuantAlgebra> = algebras_for(g, &algs).into_iter().map(|i| &algs[i]).collect();
        for r in soundness_harness(&g.theory(), &ds, &picked, jobs) {
            if r.status == HarnessStatus::Violated {
                violations += 1;
            }
            let mut j = r.to_json();
            j["theory"] = json!(g.name());
            lines.push(format!("{:<24} {:<12} {:?}", r.derivation, r.algebra, r.status));
            records.push(j);
        }
    }
    lines.push(format!("violations: {violations}"));
    Ok(Output { json: Value::Array(records), human: lines.join("\n"), ok: violations == 0 })
}

/// Writes the result; a closed stdout (e.g. `| head`) is not an error.
fn emit(out: &Output, human: bool, lines: bool) {
    let mut w = std::io::stdout().lock();
    let _ = if human {
        writeln!(w, "{}", out.human)
    } else if lines {
        match &out.json {
            Value::Array(items) => items.iter().try_for_each(|i| writeln!(w, "{i}")),
            _ => Ok(()),
        }
    } else {
        writeln!(w, "{}", out.json)
    };
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let human = cli.human;
    let lines = matches!(cli.command, Command::Harness { .. });
    let result = std::panic::catch_unwind(move || run(cli));
    match result {
        Ok(Ok(out)) => {
            emit(&out, human, lines);
            if out.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Ok(Err(Failure(msg))) => {
            if !human {
                println!("{}", json!({ "error": msg }));
            }
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(_) => {
            eprintln!("error: internal failure");
            ExitCode::from(1)
        }
    }
}

//! Scripted scenarios behind `qlam repro`. Each one computes its values,
//! lists the expected ones, and is compared with a golden JSON file.

use std::fs;
use std::path::PathBuf;

use num_rational::BigRational;
use num_traits::Zero;
use serde_json::{json, Value};

use qlam_core::finite_models::{satisfies_inference, shift_pair_algebra, SatMode};
use qlam_core::metric_core::{
    check_exponentiable, classify_space, grid_values, hom_distance, ExpMode, ExtReal, FiniteMetricSpace, HomKind,
    PointMap,
};
use qlam_core::quant_deduction::{Inference, QuantEquation};
use qlam_core::rewrite_engine::{normalize, NormalForm};
use qlam_core::term_metrics::{dnf_distance, e_distance, fth_distance, DnfEngine, DEFAULT_WITNESS_BUDGET};
use qlam_core::term_syntax::{parse_term, Signature, Sort, Term};

use crate::{Failure, Output, Res};

pub const SCENARIOS: [&str; 6] =
    ["remark25", "remark27", "example15", "remark-theta-xi", "fth-church", "nat-not-exponentiable"];

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn nf(src: &str) -> Res<NormalForm> {
    Ok(normalize(&parse_term(src, &Signature::typed_lambda())?, None)?)
}

fn app_nf(f: &NormalForm, a: &NormalForm) -> Res<NormalForm> {
    Ok(normalize(&Term::app(f.term().clone(), a.term().clone()), None)?)
}

/// One compared quantity.
fn check(name: &str, computed: impl ToString, expected: impl ToString) -> Value {
    let (c, e) = (computed.to_string(), expected.to_string());
    json!({"name": name, "computed": c, "expected": e, "matches": c == e})
}

fn report(name: &str, checks: Vec<Value>, extra: Value) -> Value {
    let all = checks.iter().all(|c| c["matches"] == json!(true));
    json!({"scenario": name, "checks": checks, "details": extra, "matches": all})
}

fn remark25() -> Res<Value> {
    let t = nf("\\x:o->o. x (x bot)")?;
    let s = nf("\\x:o->o. x (x (y : o))")?;
    let u = nf("\\x:(o->o)->o. x (\\z:o. z)")?;
    let budget = DEFAULT_WITNESS_BUDGET;
    let ts = dnf_distance(&t, &s, budget)?;
    let mut eng = DnfEngine::new(budget, &[t.term(), s.term(), u.term()]);
    let uu = eng.distance(&u, &u)?;
    let tt = eng.distance(&t, &t)?;
    let ss = eng.distance(&s, &s)?;
    let ut_us = eng.distance(&app_nf(&u, &t)?, &app_nf(&u, &s)?)?;
    // t and s share a sort and u has another; cross-sort entries are 1.
    let one = ExtReal::one();
    let d = |x: &qlam_core::term_metrics::DistCertificate| x.value.to_ext_real();
    let space = FiniteMetricSpace::new(
        vec!["t".into(), "s".into(), "u".into()],
        vec![
            vec![d(&tt), d(&ts), one.clone()],
            vec![d(&ts), d(&ss), one.clone()],
            vec![one.clone(), one.clone(), d(&uu)],
        ],
    )?;
    let class = classify_space(&space)?;
    let checks = vec![
        check("d(t,s)", ts.value, "1/2"),
        check("d(t,s) status", format!("{:?}", ts.status), "Exact"),
        check("d(u t, u s)", ut_us.value, "1"),
        check("d(u,u)", uu.value, "1"),
        check("partial_ultrametric", class.partial_ultrametric, true),
        check("metric", class.metric, false),
    ];
    let extra = json!({
        "witness_budget": budget,
        "d(t,s)": serde_json::to_value(&ts)?,
        "d(u,u)": serde_json::to_value(&uu)?,
        "class": serde_json::to_value(class)?,
    });
    Ok(report("remark25", checks, extra))
}

fn remark27() -> Res<Value> {
    let t = nf("\\x1:o->o. \\x2:o->o. x1 (x2 (t' : o))")?;
    let s = nf("\\x1:o->o. \\x2:o->o. x1 (x2 (s' : o))")?;
    let u = nf("\\x:(o->o)->(o->o)->o. x (\\z:o. z) (\\z:o. z)")?;
    let ts = e_distance(&t, &s)?;
    let uts = e_distance(&app_nf(&u, &t)?, &app_nf(&u, &s)?)?;
    let checks = vec![check("e(t,s)", ts, "1/4"), check("e(u t, u s)", uts, "1")];
    Ok(report("remark27", checks, json!({"t": t.to_string(), "s": s.to_string(), "u": u.to_string()})))
}

fn example15() -> Res<Value> {
    let (b, eps, h) = (q(1, 1), q(1, 4), q(1, 8));
    let alg = shift_pair_algebra(&b, &eps, &h)?;
    let dom = Sort::interval(BigRational::zero(), b.clone())?;
    let cod = Sort::interval(BigRational::zero(), &b + &eps)?;
    let fs = Sort::arrow(dom.clone(), cod.clone());
    let sym = |n: &str| alg.symbol_value(n).ok_or_else(|| Failure(format!("missing symbol {n}")));
    let arrow = alg.distance(&fs, sym("f")?, sym("g")?)?;
    let mut pointwise_max = ExtReal::zero();
    let f = Term::cnst("f", fs.clone());
    let g = Term::cnst("g", fs.clone());
    let x = Term::var("x", dom.clone());
    let fx = Term::app(f.clone(), x.clone());
    let gx = Term::app(g.clone(), x.clone());
    for p in grid_values(&BigRational::zero(), &b, &h) {
        let c = alg
            .signature
            .grid_constant(&p, &dom)
            .ok_or_else(|| Failure("missing grid constant".into()))?
            .to_string();
        let pt = Term::cnst(&c, dom.clone());
        let env = std::collections::BTreeMap::new();
        let vf = qlam_core::finite_models::interpret(&Term::app(f.clone(), pt.clone()), &alg, &env)?;
        let vg = qlam_core::finite_models::interpret(&Term::app(g.clone(), pt), &alg, &env)?;
        pointwise_max = pointwise_max.max(alg.distance(&cod, &vf, &vg)?);
    }
    let lam = |h: &Term| Term::lam("x", dom.clone(), Term::app(h.clone(), x.clone()));
    let xi = QuantEquation::new(lam(&f), lam(&g), eps.clone())?;
    let closed = satisfies_inference(&alg, &Inference::closed(xi), SatMode::Sat)?;
    let pointwise = QuantEquation::new(fx, gx, eps.clone())?.with_quantified([("x".to_string(), dom)]);
    let star = satisfies_inference(&alg, &Inference::closed(pointwise), SatMode::SatStar)?;
    let checks = vec![
        check("max |f(s) - g(s)| <= eps", pointwise_max <= ExtReal::from_rational(eps.clone())?, true),
        check("arrow distance", &arrow, ExtReal::from_rational(&b + &eps)?),
        check("sat refutes λx.f x ≃ λx.g x", !closed.satisfied, true),
        check("sat_star refutes f x ≃ g x", !star.satisfied, true),
    ];
    let extra = json!({
        "b": "1", "eps": "1/4", "step": "1/8",
        "pointwise_max": pointwise_max.to_string(),
        "sat": closed.to_json(),
        "sat_star": star.to_json(),
    });
    Ok(report("example15", checks, extra))
}

fn remark_theta_xi() -> Res<Value> {
    let dom_vals = grid_values(&q(-1, 1), &q(1, 1), &q(1, 8));
    let cod_vals = grid_values(&q(-1, 1), &q(1, 1), &q(1, 16));
    let a = FiniteMetricSpace::euclidean(&dom_vals);
    let b = FiniteMetricSpace::euclidean(&cod_vals);
    let idx = |r: &BigRational| cod_vals.iter().position(|c| c == r).ok_or_else(|| Failure("value off the grid".into()));
    let mut f = Vec::new();
    let mut g = Vec::new();
    for x in &dom_vals {
        f.push(idx(x)?);
        let gx = if x <= &BigRational::zero() { x.clone() } else { x / BigRational::from_integer(2.into()) };
        g.push(idx(&gx)?);
    }
    let (f, g) = (PointMap::new(f), PointMap::new(g));
    let theta = hom_distance(HomKind::Theta, &a, &b, &f, &g)?;
    let xi = hom_distance(HomKind::Xi, &a, &b, &f, &g)?;
    // √2/2 + 1/8 ≈ 0.8321; compare with exact squares: xi ≤ c iff (xi - 1/8)² ≤ 1/2 when xi ≥ 1/8.
    let within = match xi.as_rational() {
        Some(r) => {
            let m = r - q(1, 8);
            m <= BigRational::zero() || &m * &m <= q(1, 2)
        }
        None => false,
    };
    let checks = vec![check("theta", &theta, "2"), check("xi <= √2/2 + 1/8", within, true)];
    Ok(report("remark-theta-xi", checks, json!({"xi": xi.to_string(), "domain_step": "1/8", "codomain_step": "1/16"})))
}

fn fth_church() -> Res<Value> {
    let c2 = nf("\\f:o->o. \\x:o. f (f x)")?;
    let c4 = nf("\\f:o->o. \\x:o. f (f (f (f x)))")?;
    let k = nf("\\x:o. \\y:o. x")?;
    let k2 = nf("\\x:o. \\y:o. y")?;
    let r = fth_distance(&c2, &c4, 3)?;
    let rk = fth_distance(&k, &k2, 3)?;
    let checks = vec![check("fth(c2, c4)", &r.value, "1/2"), check("fth(K, K2)", &rk.value, "1")];
    Ok(report("fth-church", checks, json!({"c2_c4": serde_json::to_value(&r)?, "k_k2": serde_json::to_value(&rk)?})))
}

fn nat_not_exponentiable() -> Res<Value> {
    let two = FiniteMetricSpace::euclidean(&[q(0, 1), q(1, 1)]);
    let nat = FiniteMetricSpace::euclidean(&(0..4).map(|n| q(n, 1)).collect::<Vec<_>>());
    let full = check_exponentiable(&two, ExpMode::Full)?;
    let img = check_exponentiable(&two, ExpMode::ImageRestricted)?;
    let nat_full = check_exponentiable(&nat, ExpMode::Full)?;
    let show = |v: &qlam_core::metric_core::ExpOutcome| serde_json::to_value(v).map(|j| j.to_string());
    let checks = vec![
        check("{0,1} full", show(&full)?, r#"{"alpha":"1/2","beta":"1/2","result":"witness","x0":"0","x2":"1"}"#),
        check("{0,1} image_restricted", show(&img)?, r#"{"result":"ok"}"#),
        check("{0,1,2,3} full", show(&nat_full)?, r#"{"alpha":"1/2","beta":"1/2","result":"witness","x0":"0","x2":"1"}"#),
    ];
    Ok(report("nat-not-exponentiable", checks, json!({})))
}

/// Computes a scenario's report.
pub fn scenario(name: &str) -> Res<Value> {
    match name {
        "remark25" => remark25(),
        "remark27" => remark27(),
        "example15" => example15(),
        "remark-theta-xi" => remark_theta_xi(),
        "fth-church" => fth_church(),
        "nat-not-exponentiable" => nat_not_exponentiable(),
        _ => Err(Failure(format!("unknown scenario {name:?}; known: {}", SCENARIOS.join(", ")))),
    }
}

fn default_golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("golden")
}

fn human(v: &Value, golden: &str) -> String {
    let verdict = if v["matches"] == json!(true) { "PASS" } else { "FAIL" };
    let mut lines = vec![format!("{verdict} {}", v["scenario"].as_str().unwrap_or_default())];
    for c in v["checks"].as_array().into_iter().flatten() {
        let tag = if c["matches"] == json!(true) { "PASS" } else { "FAIL" };
        lines.push(format!(
            "  {tag} {}: computed {}, expected {}",
            c["name"].as_str().unwrap_or_default(),
            c["computed"].as_str().unwrap_or_default(),
            c["expected"].as_str().unwrap_or_default()
        ));
    }
    lines.push(format!("  golden: {golden}"));
    lines.join("\n")
}

pub fn run(name: &str, dir: Option<PathBuf>, update: bool) -> Res<Output> {
    if name == "list" {
        return Ok(Output { json: json!(SCENARIOS), human: SCENARIOS.join("\n"), ok: true });
    }
    let v = scenario(name)?;
    let text = serde_json::to_string_pretty(&v)? + "\n";
    let path = dir.unwrap_or_else(default_golden_dir).join(format!("{name}.json"));
    let golden = if update {
        fs::write(&path, &text).map_err(|e| Failure(format!("{}: {e}", path.display())))?;
        "updated"
    } else {
        match fs::read_to_string(&path) {
            Ok(g) if g == text => "match",
            Ok(_) => "differs",
            Err(_) => "missing",
        }
    };
    let ok = golden == "match" || golden == "updated";
    let verdict = if v["matches"] == json!(true) { "PASS" } else { "FAIL" };
    let out = json!({"verdict": verdict, "report": v, "golden": golden, "golden_file": path.file_name().map(|f| f.to_string_lossy().to_string())});
    Ok(Output { human: human(&v, golden), json: out, ok })
}

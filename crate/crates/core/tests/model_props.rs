mod common;

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;
use rand::Rng;

use qlam_core::finite_models::{build_full_type_structure, interpret, satisfies_inference, FiniteQuantAlgebra, SatMode, Value};
use qlam_core::metric_core::FiniteMetricSpace;
use qlam_core::quant_deduction::{Inference, QuantEquation};
use qlam_core::rewrite_engine::normalize;
use qlam_core::term_syntax::Sort;

use common::{free_pool, o, term_sorts, TermGen};

/// Small metric bases: subsets of the line and discrete spaces.
fn base() -> impl Strategy<Value = FiniteMetricSpace> {
    prop_oneof![
        proptest::collection::btree_set(0i64..6, 1..=2)
            .prop_map(|p| FiniteMetricSpace::euclidean(&p.into_iter().map(|x| BigRational::new(BigInt::from(x), BigInt::from(2))).collect::<Vec<_>>())),
        (1usize..=2).prop_map(|n| FiniteMetricSpace::discrete(n, qlam_core::ExtReal::one())),
    ]
}

fn fts(b: &FiniteMetricSpace) -> FiniteQuantAlgebra {
    build_full_type_structure(b, &term_sorts(), 1 << 16).unwrap()
}

fn random_env(alg: &FiniteQuantAlgebra, seed: u64) -> BTreeMap<String, Value> {
    let mut r = common::rng(seed);
    free_pool()
        .into_iter()
        .map(|(n, s)| {
            let c = alg.carrier(&s).unwrap();
            (n, c.elems[r.gen_range(0..c.len())].clone())
        })
        .collect()
}

fn apply(alg: &FiniteQuantAlgebra, dom: &Sort, f: &Value, a: &Value) -> Value {
    let i = alg.carrier(dom).unwrap().index_of(a).unwrap();
    match f {
        Value::Fun(t) => t[i].clone(),
        Value::Pt(_) => panic!("not a function"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn application_is_non_expansive(b in base()) {
        let alg = fts(&b);
        for s in term_sorts() {
            let Some((dom, cod)) = s.split_arrow() else { continue };
            let fc = alg.carrier(&s).unwrap();
            let ac = alg.carrier(dom).unwrap();
            for (i, f) in fc.elems.iter().enumerate() {
                for (j, g) in fc.elems.iter().enumerate() {
                    let dfg = fc.space.d(i, j);
                    for (x, a) in ac.elems.iter().enumerate() {
                        for (y, c) in ac.elems.iter().enumerate() {
                            let lhs = alg.distance(cod, &apply(&alg, dom, f, a), &apply(&alg, dom, g, c)).unwrap();
                            let rhs = dfg.clone().max(ac.space.d(x, y).clone());
                            prop_assert!(lhs <= rhs, "{} at {}: {} > {}", s, i, lhs, rhs);
                        }
                    }
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn interpretation_respects_normalization(b in base(), seed: u64, k in 0usize..4) {
        let alg = fts(&b);
        let t = TermGen::new(seed).term(&term_sorts()[k], 4);
        let env = random_env(&alg, seed ^ 0x5eed);
        let n = normalize(&t, None).unwrap();
        prop_assert_eq!(interpret(&t, &alg, &env).unwrap(), interpret(n.term(), &alg, &env).unwrap());
    }

    #[test]
    fn sat_is_monotone_in_eps(b in base(), seed: u64, num in 0i64..6, bump in 1i64..4) {
        let alg = fts(&b);
        let mut g = TermGen::new(seed);
        let (l, r) = (g.term(&o(), 3), g.term(&o(), 3));
        let eps = BigRational::new(BigInt::from(num), BigInt::from(2));
        let at = |e: BigRational| {
            let eq = QuantEquation::new(l.clone(), r.clone(), e).unwrap();
            satisfies_inference(&alg, &Inference::closed(eq), SatMode::Sat).unwrap().satisfied
        };
        if at(eps.clone()) {
            prop_assert!(at(eps + BigRational::new(BigInt::from(bump), BigInt::from(2))));
        }
    }

    #[test]
    fn sat_and_sat_star_agree_without_quantified_vars(b in base(), seed: u64, k in 0usize..2, num in 0i64..4) {
        let alg = fts(&b);
        let mut g = TermGen::new(seed);
        let s = &term_sorts()[k];
        let (l, r) = (g.term(s, 3), g.term(s, 3));
        let hl = g.term(&o(), 2);
        let hyp = QuantEquation::new(hl.clone(), hl, BigRational::from_integer(BigInt::from(0))).unwrap();
        let eq = QuantEquation::new(l, r, BigRational::new(BigInt::from(num), BigInt::from(2))).unwrap();
        let inf = Inference::new(vec![hyp], eq);
        let a = satisfies_inference(&alg, &inf, SatMode::Sat).unwrap().satisfied;
        let b2 = satisfies_inference(&alg, &inf, SatMode::SatStar).unwrap().satisfied;
        prop_assert_eq!(a, b2);
    }
}

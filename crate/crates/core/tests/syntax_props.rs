mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use qlam_core::term_syntax::{parse_term_with, print_term, substitute, typecheck, Environment, Signature, Sort, Term};

use common::{o, oo, term_sorts, TermGen};

fn sig() -> Signature {
    Signature::typed_lambda()
}

fn decls(t: &Term) -> BTreeMap<String, Sort> {
    t.free_vars().into_iter().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn identity_substitution(seed: u64, k in 0usize..4) {
        let t = TermGen::new(seed).term(&term_sorts()[k], 4);
        let env: Environment = t.free_vars().into_iter().map(|(n, s)| (n.clone(), Term::var(&n, s))).collect();
        prop_assert_eq!(substitute(&t, &env).unwrap(), t);
    }

    #[test]
    fn substitution_keeps_sorts(seed: u64, k in 0usize..4) {
        let mut g = TermGen::new(seed);
        let t = g.term(&term_sorts()[k], 4);
        let before = typecheck(&t, &sig()).unwrap();
        let env: Environment = [("y".to_string(), g.term(&o(), 2)), ("f".to_string(), g.term(&oo(), 2))].into();
        let after = typecheck(&substitute(&t, &env).unwrap(), &sig()).unwrap();
        prop_assert_eq!(before, after);
    }

    #[test]
    fn substitution_composes(seed: u64) {
        // t over {p, q}; e1 maps them into terms over {u, w}; e2 maps u, w
        // to closed terms. Name pools are disjoint.
        let mut g = TermGen::new(seed);
        g.pool = vec![("p".into(), o()), ("q".into(), oo())];
        let t = g.term(&o(), 4);
        g.pool = vec![("u".into(), o()), ("w".into(), oo())];
        let e1: Environment = [("p".to_string(), g.term(&o(), 3)), ("q".to_string(), g.term(&oo(), 3))].into();
        g.pool = vec![];
        let e2: Environment = [("u".to_string(), g.term(&o(), 2)), ("w".to_string(), g.term(&oo(), 2))].into();
        let mut composed: Environment = e1.iter().map(|(k, v)| (k.clone(), substitute(v, &e2).unwrap())).collect();
        composed.extend(e2.clone());
        let stepwise = substitute(&substitute(&t, &e1).unwrap(), &e2).unwrap();
        prop_assert_eq!(stepwise, substitute(&t, &composed).unwrap());
    }

    #[test]
    fn parse_print_round_trip(seed: u64, k in 0usize..4) {
        let t = TermGen::new(seed).term(&term_sorts()[k], 4);
        let text = print_term(&t);
        let once = parse_term_with(&text, &sig(), &decls(&t)).unwrap();
        prop_assert_eq!(&once, &t);
        let twice = parse_term_with(&print_term(&once), &sig(), &decls(&t)).unwrap();
        prop_assert_eq!(twice, once);
    }
}

mod common;

use proptest::prelude::*;
use qlam_core::rewrite_engine::{
    beta_normalize, beta_normalize_innermost, bracket_abstract, cl_reduce, eta_long, normalize,
};
use qlam_core::term_syntax::{substitute, typecheck, Environment, Signature, Sort, Term};

use common::{random_cl, rng, term_sorts, TermGen};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn normalize_is_idempotent(seed: u64, k in 0usize..4) {
        let t = TermGen::new(seed).term(&term_sorts()[k], 5);
        let n = normalize(&t, None).unwrap();
        prop_assert_eq!(normalize(n.term(), None).unwrap(), n);
    }

    #[test]
    fn strategies_agree(seed: u64, k in 0usize..4) {
        let t = TermGen::new(seed).term(&term_sorts()[k], 5);
        let (outer, _) = beta_normalize(&t, None).unwrap();
        let inner = beta_normalize_innermost(&t, None).unwrap();
        prop_assert_eq!(outer, inner);
    }

    #[test]
    fn sorts_survive_normalization(seed: u64, k in 0usize..4) {
        let sig = Signature::typed_lambda();
        let t = TermGen::new(seed).term(&term_sorts()[k], 5);
        let s = typecheck(&t, &sig).unwrap();
        let n = normalize(&t, None).unwrap();
        prop_assert_eq!(&typecheck(n.term(), &sig).unwrap(), &s);
        let l = eta_long(n.term()).unwrap();
        prop_assert_eq!(&typecheck(l.term(), &sig).unwrap(), &s);
    }

    #[test]
    fn bracket_simulates_substitution(seed: u64, tsize in 1usize..10, usize_ in 1usize..5) {
        let star = Sort::Star;
        let var = |n: &str| Term::var(n, star.clone());
        let atoms = [Term::comb("S"), Term::comb("K"), Term::comb("I"), var("x"), var("y"), var("z")];
        let arg_atoms = [Term::comb("S"), Term::comb("K"), Term::comb("I"), var("y"), var("w")];
        let mut r = rng(seed);
        let t = random_cl(&mut r, tsize, &atoms);
        let u = random_cl(&mut r, usize_, &arg_atoms);
        let env: Environment = [("x".to_string(), u.clone())].into();
        let direct = cl_reduce(&substitute(&t, &env).unwrap(), 2000).unwrap();
        prop_assume!(!direct.out_of_fuel);
        let via = cl_reduce(&Term::app(bracket_abstract("x", &star, &t).unwrap(), u), 2000).unwrap();
        prop_assert!(!via.out_of_fuel);
        prop_assert_eq!(via.term, direct.term);
    }
}

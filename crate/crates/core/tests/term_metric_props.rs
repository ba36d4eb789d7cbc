mod common;

use proptest::prelude::*;
use qlam_core::rewrite_engine::{normalize, NormalForm};
use qlam_core::term_metrics::{
    below, e_distance, fth_distance, order_distance, project, CertStatus, DistCertificate, DnfEngine, Dyadic,
};
use qlam_core::term_syntax::{Sort, Term};

use common::{o, oo, term_sorts, TermGen};

fn nf(t: &Term) -> NormalForm {
    normalize(t, None).unwrap()
}

fn triple(seed: u64, sort: &Sort) -> [NormalForm; 3] {
    let mut g = TermGen::new(seed);
    [nf(&g.term(sort, 4)), nf(&g.term(sort, 4)), nf(&g.term(sort, 4))]
}

fn exact(c: &DistCertificate) -> bool {
    c.status == CertStatus::Exact
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn e_is_an_ultrametric(seed: u64, k in 0usize..4) {
        let [a, b, c] = triple(seed, &term_sorts()[k]);
        let d = |x: &NormalForm, y: &NormalForm| e_distance(x, y).unwrap();
        prop_assert_eq!(d(&a, &a), Dyadic::Zero);
        prop_assert_eq!(d(&a, &b) == Dyadic::Zero, a == b);
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert!(d(&a, &c) <= d(&a, &b).max(d(&b, &c)));
    }

    #[test]
    fn projections_cohere(seed: u64, k in 0usize..4) {
        let [a, b, _] = triple(seed, &term_sorts()[k]);
        for n in 0..=8 {
            if project(&a, n + 1) == project(&b, n + 1) {
                prop_assert_eq!(project(&a, n), project(&b, n));
            }
        }
    }

    #[test]
    fn order_distance_shape(seed: u64, k in 0usize..4) {
        let [a, b, _] = triple(seed, &term_sorts()[k]);
        let (d, r) = order_distance(&a, &b).unwrap();
        let (d2, _) = order_distance(&b, &a).unwrap();
        prop_assert!(matches!(d, Dyadic::Zero | Dyadic::Inv(0) | Dyadic::Inv(1)));
        prop_assert_eq!(d, d2);
        if let Some(j) = r.join {
            prop_assert!(below(a.term(), j.term()) && below(b.term(), j.term()));
        }
    }

    #[test]
    fn fth_zero_iff_equal(seed: u64, k in 1usize..4) {
        let mut g = TermGen::closed(seed);
        let sort = &term_sorts()[k];
        let (a, b) = (nf(&g.term(sort, 3)), nf(&g.term(sort, 3)));
        prop_assert!(fth_distance(&a, &a, 2).unwrap().value.is_zero());
        prop_assert_eq!(fth_distance(&a, &b, 2).unwrap().value.is_zero(), a == b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dnf_bounds_e_and_is_a_partial_ultrametric(seed: u64, k in 1usize..3) {
        let [a, b, c] = triple(seed, &term_sorts()[k]);
        let mut eng = DnfEngine::new(2, &[a.term(), b.term(), c.term()]);
        let mut d = |x: &NormalForm, y: &NormalForm| eng.distance(x, y).unwrap();
        let (ab, ba, bc, ac, aa) = (d(&a, &b), d(&b, &a), d(&b, &c), d(&a, &c), d(&a, &a));
        prop_assert!(ab.value >= e_distance(&a, &b).unwrap());
        prop_assert_eq!(ab.value, ba.value);
        if [&ab, &bc, &ac, &aa].iter().all(|c| exact(c)) {
            prop_assert!(aa.value <= ab.value);
            prop_assert!(ac.value <= ab.value.max(bc.value));
        }
    }

    #[test]
    fn dnf_application_is_non_expansive(seed: u64) {
        let mut g = TermGen::new(seed);
        let fs = Sort::arrow(oo(), o());
        let (t, s) = (nf(&g.term(&fs, 3)), nf(&g.term(&fs, 3)));
        let (v, w) = (nf(&g.term(&oo(), 3)), nf(&g.term(&oo(), 3)));
        let app = |f: &NormalForm, a: &NormalForm| nf(&Term::app(f.term().clone(), a.term().clone()));
        let (tv, sw) = (app(&t, &v), app(&s, &w));
        let mut eng = DnfEngine::new(2, &[t.term(), s.term(), v.term(), w.term()]);
        let (ts, vw, out) = (eng.distance(&t, &s).unwrap(), eng.distance(&v, &w).unwrap(), eng.distance(&tv, &sw).unwrap());
        if exact(&ts) && exact(&vw) && exact(&out) {
            prop_assert!(out.value <= ts.value.max(vw.value), "{} > max({}, {})", out.value, ts.value, vw.value);
        }
    }
}

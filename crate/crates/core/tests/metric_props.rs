use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;

use qlam_core::metric_core::{
    check_exponentiable, classify_space, enumerate_nonexpansive, hom_distance, hom_space, star_completion, ExpMode,
    ExpOutcome, ExtReal, FiniteMetricSpace, HomKind, SpaceClass,
};

const KINDS: [HomKind; 4] = [HomKind::Phi, HomKind::Xi, HomKind::XiPrime, HomKind::Theta];

fn val(code: u8) -> ExtReal {
    match code {
        0 => ExtReal::zero(),
        1 => ExtReal::ratio(1, 2),
        2 => ExtReal::one(),
        3 => ExtReal::ratio(3, 2),
        4 => ExtReal::int(2),
        _ => ExtReal::inf(),
    }
}

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("p{i}")).collect()
}

/// Any square matrix over a small value set.
fn any_space() -> impl Strategy<Value = FiniteMetricSpace> {
    (1usize..=4).prop_flat_map(|n| {
        proptest::collection::vec(proptest::collection::vec(0u8..6, n), n).prop_map(move |m| {
            let dist = m.into_iter().map(|row| row.into_iter().map(val).collect()).collect();
            FiniteMetricSpace::new(names(n), dist).unwrap()
        })
    })
}

/// Symmetric matrices with positive off-diagonal entries and an arbitrary
/// diagonal.
fn symmetric_positive() -> impl Strategy<Value = FiniteMetricSpace> {
    (1usize..=4).prop_flat_map(move |n| {
        proptest::collection::vec(0u8..5, n * n).prop_map(move |codes| {
            FiniteMetricSpace::from_fn(names(n), |i, j| {
                let (a, b) = if i <= j { (i, j) } else { (j, i) };
                let c = codes[a * n + b];
                if a == b {
                    val(c)
                } else {
                    val(c.max(1))
                }
            })
        })
    })
}

/// Finite subsets of the rational line, which are metric spaces.
fn line_subset() -> impl Strategy<Value = FiniteMetricSpace> {
    proptest::collection::btree_set(0i64..12, 1..=4).prop_map(|pts| {
        let v: Vec<BigRational> = pts.into_iter().map(|p| BigRational::new(BigInt::from(p), BigInt::from(4))).collect();
        FiniteMetricSpace::euclidean(&v)
    })
}

/// Ultrametric from distinct bit strings: `2^-(common prefix length)`.
fn ultrametric() -> impl Strategy<Value = FiniteMetricSpace> {
    proptest::collection::btree_set(0u8..8, 1..=4).prop_map(|codes| {
        let c: Vec<u8> = codes.into_iter().collect();
        FiniteMetricSpace::from_fn(names(c.len()), |i, j| {
            if i == j {
                return ExtReal::zero();
            }
            let prefix = (0..3).take_while(|&b| (c[i] >> (2 - b)) & 1 == (c[j] >> (2 - b)) & 1).count();
            ExtReal::dyadic(prefix as u32)
        })
    })
}

fn oracle(s: &FiniteMetricSpace) -> SpaceClass {
    let n = s.len();
    let d = |i: usize, j: usize| s.d(i, j).clone();
    let all = |f: &dyn Fn(usize, usize, usize) -> bool| (0..n).all(|i| (0..n).all(|j| (0..n).all(|k| f(i, j, k))));
    let symm = all(&|i, j, _| d(i, j) == d(j, i));
    let refl0 = (0..n).all(|i| d(i, i).is_zero());
    let sep = all(&|i, j, _| i == j || !d(i, j).is_zero());
    let tri = all(&|i, j, k| d(i, k) <= d(i, j) + d(j, k));
    let ultra = all(&|i, j, k| d(i, k) <= d(i, j).max(d(j, k)));
    let small_self = all(&|i, j, _| d(i, i) <= d(i, j));
    let premetric = symm && refl0;
    let metric = premetric && sep && tri;
    SpaceClass {
        premetric,
        metric,
        ultrametric: metric && ultra,
        partial_ultrametric: symm && small_self && ultra,
    }
}

fn two_maps(a: &FiniteMetricSpace, b: &FiniteMetricSpace, i: usize, j: usize) -> Option<(qlam_core::metric_core::PointMap, qlam_core::metric_core::PointMap)> {
    let maps = enumerate_nonexpansive(a, b);
    if maps.is_empty() {
        return None;
    }
    Some((maps[i % maps.len()].clone(), maps[j % maps.len()].clone()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn classification_matches_oracle(s in any_space()) {
        prop_assert_eq!(classify_space(&s).unwrap(), oracle(&s));
    }

    #[test]
    fn kinds_are_ordered(a in line_subset(), b in line_subset(), i: usize, j: usize) {
        let Some((f, g)) = two_maps(&a, &b, i, j) else { return Ok(()) };
        let phi = hom_distance(HomKind::Phi, &a, &b, &f, &g).unwrap();
        let xi = hom_distance(HomKind::Xi, &a, &b, &f, &g).unwrap();
        let theta = hom_distance(HomKind::Theta, &a, &b, &f, &g).unwrap();
        prop_assert!(theta >= xi, "theta {} < xi {}", theta, xi);
        prop_assert!(xi >= phi, "xi {} < phi {}", xi, phi);
    }

    #[test]
    fn ultrametric_codomain_collapses_xi(a in line_subset(), b in ultrametric(), i: usize, j: usize) {
        let Some((f, g)) = two_maps(&a, &b, i, j) else { return Ok(()) };
        prop_assert_eq!(
            hom_distance(HomKind::Xi, &a, &b, &f, &g).unwrap(),
            hom_distance(HomKind::Phi, &a, &b, &f, &g).unwrap()
        );
    }

    #[test]
    fn kinds_are_symmetric(a in line_subset(), b in line_subset(), i: usize, j: usize) {
        let Some((f, g)) = two_maps(&a, &b, i, j) else { return Ok(()) };
        for k in KINDS {
            prop_assert_eq!(hom_distance(k, &a, &b, &f, &g).unwrap(), hom_distance(k, &a, &b, &g, &f).unwrap());
        }
    }

    #[test]
    fn star_completion_is_ultrametric_and_idempotent(s in symmetric_positive()) {
        prop_assume!(classify_space(&s).unwrap().partial_ultrametric);
        let c = star_completion(&s).unwrap();
        prop_assert!(classify_space(&c).unwrap().ultrametric);
        prop_assert_eq!(star_completion(&c).unwrap(), c);
    }

}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exponentiable_domains_give_metric_hom_spaces(n in 1usize..=3, b in line_subset()) {
        // points pairwise at infinite distance: every decomposition is vacuous
        let a = FiniteMetricSpace::from_fn(names(n), |i, j| if i == j { ExtReal::zero() } else { ExtReal::inf() });
        prop_assert_eq!(check_exponentiable(&a, ExpMode::Full).unwrap(), ExpOutcome::Ok);
        let maps = enumerate_nonexpansive(&a, &b);
        let labels = (0..maps.len()).map(|i| format!("m{i}")).collect();
        let h = hom_space(HomKind::Xi, &a, &b, &maps, labels);
        let m = h.len();
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    prop_assert!(h.d(i, k) <= &(h.d(i, j) + h.d(j, k)));
                }
            }
        }
    }

    #[test]
    fn line_subsets_with_gaps_are_not_exponentiable(a in line_subset()) {
        prop_assume!(a.len() >= 2);
        prop_assert!(matches!(check_exponentiable(&a, ExpMode::Full).unwrap(), ExpOutcome::Witness(_)));
    }
}

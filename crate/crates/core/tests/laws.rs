use loopsoup_core::lattice::LatticePoint;
use loopsoup_core::laws::{gumbel_cdf, ExactLaws};
use loopsoup_core::greens::KillingRate;
use proptest::prelude::*;

fn laws(kappa: f64) -> ExactLaws {
    ExactLaws::new(KillingRate::new(kappa).unwrap()).unwrap()
}

#[test]
fn pair_law_at_zero_and_association() {
    let l = laws(0.3);
    let x = LatticePoint::new(2, 1);
    assert_eq!(l.prob_pair_uncovered(x, 0.0).unwrap(), 1.0);
    assert_eq!(l.prob_no_shared_loop(x, 0.0).unwrap(), 1.0);
    for u in [0.1, 0.5, 1.0, 3.0] {
        let p1 = l.prob_point_uncovered(u).unwrap();
        let p2 = l.prob_pair_uncovered(x, u).unwrap();
        assert!(p1 * p1 <= p2 && p2 <= p1, "u={u}: {p1} {p2}");
    }
}

#[test]
fn gumbel_cdf_reference_values() {
    assert!((gumbel_cdf(0.0) - (-1.0f64).exp()).abs() < 1e-15);
    assert!((gumbel_cdf(0.366_512_920_581_664_3) - 0.5).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pair_laws_are_monotone_in_time(kappa in 0.05f64..2.0, x1 in 1i64..8, x2 in 0i64..8, u in 0.0f64..5.0, du in 0.01f64..2.0) {
        let l = laws(kappa);
        let x = LatticePoint::new(x1, x2);
        prop_assert!(l.prob_pair_uncovered(x, u + du).unwrap() <= l.prob_pair_uncovered(x, u).unwrap());
        prop_assert!(l.prob_no_shared_loop(x, u + du).unwrap() <= l.prob_no_shared_loop(x, u).unwrap());
        let (c0, c1) = (l.pair_cover_cdf(x, u).unwrap(), l.pair_cover_cdf(x, u + du).unwrap());
        prop_assert!(c0 <= c1 + 1e-15 && (0.0..=1.0).contains(&c1));
    }

    #[test]
    fn pair_cover_is_dominated_by_single_cover(kappa in 0.05f64..2.0, x1 in 1i64..8, u in 0.0f64..5.0) {
        let l = laws(kappa);
        let single = 1.0 - l.prob_point_uncovered(u).unwrap();
        let both = l.pair_cover_cdf(LatticePoint::new(x1, 0), u).unwrap();
        prop_assert!(both <= single + 1e-15);
        prop_assert!(both >= single * single - 1e-15);
    }

    #[test]
    fn shared_loop_probability_decreases_with_distance(kappa in 0.1f64..2.0, d in 1i64..10, u in 0.1f64..3.0) {
        let l = laws(kappa);
        let near = l.prob_no_shared_loop(LatticePoint::new(d, 0), u).unwrap();
        let far = l.prob_no_shared_loop(LatticePoint::new(d + 1, 0), u).unwrap();
        prop_assert!(far >= near);
    }
}

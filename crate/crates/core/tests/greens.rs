use loopsoup_core::greens::{greens_table, greens_value, mu_gamma_o, KillingRate};
use loopsoup_core::lattice::LatticePoint;
use proptest::prelude::*;

/// Σ_n (4+κ)^{-n} P_n(o, x) 4^n, with P_n propagated as a dense float grid.
fn series_oracle(kappa: f64, x: LatticePoint, steps: usize) -> f64 {
    let r = steps as i64 + 1;
    let side = (2 * r + 1) as usize;
    let idx = |a: i64, b: i64| ((a + r) as usize) * side + (b + r) as usize;
    let mut p = vec![0.0f64; side * side];
    p[idx(0, 0)] = 1.0;
    let step = 4.0 / (4.0 + kappa);
    let mut weight = 1.0;
    let mut sum = 0.0;
    for _ in 0..=steps {
        sum += weight * p[idx(x.x1, x.x2)];
        let mut next = vec![0.0f64; side * side];
        for a in -r + 1..r {
            for b in -r + 1..r {
                let v = p[idx(a, b)] / 4.0;
                if v != 0.0 {
                    next[idx(a + 1, b)] += v;
                    next[idx(a - 1, b)] += v;
                    next[idx(a, b + 1)] += v;
                    next[idx(a, b - 1)] += v;
                }
            }
        }
        p = next;
        weight *= step;
    }
    sum
}

#[test]
fn series_matches_independent_propagation() {
    for kappa in [2.0, 1.0, 0.5] {
        let k = KillingRate::new(kappa).unwrap();
        for x in [(0, 0), (1, 0), (1, 1), (3, 2), (0, 5)] {
            let x = LatticePoint::new(x.0, x.1);
            let oracle = series_oracle(kappa, x, 400);
            let v = greens_value(k, x, 1e-12).unwrap();
            assert!((v.value - oracle).abs() <= 1e-10 * oracle, "kappa={kappa} x={x}: {} vs {oracle}", v.value);
            assert!(v.certified_error <= 1e-11 * v.value);
        }
    }
}

#[test]
fn loop_measure_is_log_of_return_green() {
    for kappa in [1.0, 0.1, 0.01] {
        let k = KillingRate::new(kappa).unwrap();
        let mu = mu_gamma_o(k, 1e-12).unwrap();
        let g = greens_value(k, LatticePoint::new(0, 0), 1e-12).unwrap().value;
        assert!((mu.value - g.ln()).abs() < 1e-10);
    }
}

#[test]
fn table_entries_decrease_away_from_origin() {
    let table = greens_table(KillingRate::new(0.05).unwrap(), 15, 1e-10).unwrap();
    for (x, g) in table.octant_points() {
        if x.norm1() < 15 {
            let further = table.value(LatticePoint::new(x.x1 + 1, x.x2));
            assert!(further < g, "G not decreasing at {x}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn value_is_invariant_under_lattice_symmetries(x1 in -12i64..=12, x2 in -12i64..=12, kappa in 0.05f64..4.0) {
        let k = KillingRate::new(kappa).unwrap();
        let base = greens_value(k, LatticePoint::new(x1, x2), 1e-10).unwrap().value;
        for p in LatticePoint::new(x1, x2).symmetry_orbit() {
            let v = greens_value(k, p, 1e-10).unwrap().value;
            prop_assert!((v - base).abs() <= 1e-9 * base);
        }
    }

    #[test]
    fn value_decreases_in_kappa(x1 in 0i64..=6, x2 in 0i64..=6, kappa in 0.05f64..2.0) {
        let x = LatticePoint::new(x1, x2);
        let lo = greens_value(KillingRate::new(kappa).unwrap(), x, 1e-10).unwrap().value;
        let hi = greens_value(KillingRate::new(kappa * 1.5).unwrap(), x, 1e-10).unwrap().value;
        prop_assert!(hi < lo);
    }
}

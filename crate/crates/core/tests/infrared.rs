use std::f64::consts::PI;

use proptest::prelude::*;
use randloop::infrared::*;
use randloop::model::Spin;

/// `d, I_d, J_d, (½IJ)^{−½}, (¼IJ)^{−½}`.
const TABLE: [(usize, f64, f64, f64, f64); 5] = [
    (2, 0.646803, 1.39320, 1.48978, 2.10687),
    (3, 0.349882, 1.15672, 2.22301, 3.14381),
    (4, 0.253950, 1.09441, 2.68256, 3.79372),
    (5, 0.206878, 1.06754, 3.00931, 4.25581),
    (6, 0.177716, 1.05274, 3.26958, 4.62389),
];

#[test]
fn table_values() {
    for (d, i, j, t0, t_half) in TABLE {
        let p = integral_ij(d, false).unwrap();
        println!("d={d} I={:.7} (±{:.1e}) J={:.7} (±{:.1e})", p.i.value, p.i.error, p.j.value, p.j.error);
        assert!((p.i.value - i).abs() < 1e-4, "I_{d}");
        assert!((p.j.value - j).abs() < 1e-4, "J_{d}");
        assert!(p.i.value <= p.j.value);
        let c0 = sufficient_condition(Spin::HALF, 0.0, d).unwrap();
        let c_half = sufficient_condition(Spin::HALF, 0.5, d).unwrap();
        let ij = p.i.value * p.j.value;
        assert!((c0.threshold - (0.5 * ij).powf(-0.5)).abs() < 1e-12);
        assert!((c_half.threshold - (0.25 * ij).powf(-0.5)).abs() < 1e-12);
        // The tabulated d = 6 thresholds were computed from an I₆ about 8e-5
        // below the value found here; the acceptance suite reports that gap.
        if d <= 5 {
            assert!((c0.threshold - t0).abs() < 5e-4, "d={d}: {}", c0.threshold);
            assert!((c_half.threshold - t_half).abs() < 5e-4, "d={d}: {}", c_half.threshold);
        }
    }
}

#[test]
fn primed_values() {
    for (d, i, j) in [(2, 0.489, 1.286), (3, 0.278, 1.115)] {
        let p = integral_ij(d, true).unwrap();
        println!("d={d} I'={:.6} J'={:.6}", p.i.value, p.j.value);
        assert!((p.i.value - i).abs() < 2e-3, "I'_{d} = {}", p.i.value);
        assert!((p.j.value - j).abs() < 2e-3, "J'_{d} = {}", p.j.value);
    }
}

#[test]
fn density_route_matches_kspace_route() {
    for d in [2, 3] {
        for primed in [false, true] {
            let a = integral_ij(d, primed).unwrap();
            let b = integral_ij_kspace(d, primed, 1.0 / 8.0).unwrap();
            println!("d={d} primed={primed} density=({:.9}, {:.9}) kspace=({:.9}, {:.9})", a.i.value, a.j.value, b[0], b[1]);
            assert!((a.i.value - b[0]).abs() < 1e-7);
            assert!((a.j.value - b[1]).abs() < 1e-7);
        }
    }
}

#[test]
fn trends_in_dimension() {
    let pairs: Vec<_> = (2..=6).map(|d| integral_ij(d, false).unwrap()).collect();
    for w in pairs.windows(2) {
        assert!(w[1].i.value < w[0].i.value);
        assert!((w[1].j.value - 1.0).abs() < (w[0].j.value - 1.0).abs());
    }
}

#[test]
fn sufficient_condition_examples() {
    let c = sufficient_condition(Spin::HALF, 0.0, 3).unwrap();
    assert!(c.satisfied);
    assert!(!sufficient_condition(Spin::ONE, 0.0, 3).unwrap().satisfied);
    assert!(sufficient_condition(Spin::ONE, 0.5, 3).unwrap().satisfied);
    assert!(sufficient_condition(Spin::THREE_HALVES, 0.5, 5).unwrap().satisfied);
    assert!(sufficient_condition(Spin::HALF, 0.6, 3).is_err());
}

#[test]
fn bound_examples() {
    assert_eq!(theorem_bounds(Spin::HALF, 0.0, 3, 0.0, false).unwrap(), (1.0, 0.0));
    assert!(theorem_bounds(Spin::HALF, 1.0, 3, 0.5, false).is_err());
    assert!(theorem_bounds(Spin::HALF, 0.0, 3, 1.5, false).is_err());
    let (b1, _) = theorem_bounds(Spin::HALF, 0.5, 3, 1.0, false).unwrap();
    let j3 = integral_ij(3, false).unwrap().j.value;
    assert!((b1 - (1.0 - j3)).abs() < 1e-12);
    assert!((b1 + 0.15672).abs() < 1e-4);
    let mut prev = f64::INFINITY;
    for i in 0..=20 {
        let (b, _) = theorem_bounds(Spin::ONE, 0.2, 4, i as f64 / 20.0, false).unwrap();
        assert!(b < prev);
        prev = b;
    }
    let r = BoundReport::new(Spin::HALF, 0.0, 2, 0.3).unwrap();
    assert!(r.limit_order_caveat && r.primed_bounds.is_some());
}

#[test]
fn simplex_identities() {
    for twice in 1..=6 {
        let s = Spin::from_twice(twice).unwrap();
        let v = simplex_vectors(s);
        let n = s.multiplicity();
        assert_eq!(v.len(), n);
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let mut pair_sum = 0.0;
        for a in 0..n {
            assert_eq!(v[a].len(), n - 1);
            assert!((dot(&v[a], &v[a]) - s.value() / n as f64).abs() < 1e-12);
            let row: f64 = (0..n).map(|b| dot(&v[a], &v[b])).sum();
            assert!(row.abs() < 1e-12);
            for b in 0..n {
                let dist2: f64 = v[a].iter().zip(&v[b]).map(|(x, y)| (x - y).powi(2)).sum();
                pair_sum += dist2;
                if a != b {
                    assert!((dist2 - 1.0).abs() < 1e-12);
                    assert!((dot(&v[a], &v[b]) + 1.0 / (2.0 * n as f64)).abs() < 1e-12);
                }
            }
        }
        assert!((pair_sum - (n * (n - 1)) as f64).abs() < 1e-10);
    }
}

#[test]
fn quadrature_errors_within_targets() {
    for d in 2..=6 {
        let p = integral_ij(d, false).unwrap();
        assert!(p.i.error <= error_target(d) && p.j.error <= error_target(d));
    }
    assert!(integral_ij(1, false).is_err());
    assert!(integral_ij(9, false).is_err());
}

proptest! {
    #[test]
    fn dispersion_shift_identity(k in prop::collection::vec(-PI..PI, 1..6)) {
        let shifted: Vec<f64> = k.iter().map(|x| x + PI).collect();
        let e = dispersion(&k);
        prop_assert!(e >= 0.0);
        prop_assert!((e + dispersion(&shifted) - 4.0 * k.len() as f64).abs() < 1e-12);
    }
}

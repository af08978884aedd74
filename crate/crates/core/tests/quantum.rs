use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use randloop::graph::Graph;
use randloop::model::Spin;
use randloop::quantum::*;

const CAP: usize = DEFAULT_DIMENSION_CAP;

fn random_operator(dim: usize, rng: &mut ChaCha8Rng) -> DenseOperator {
    DenseOperator::from_fn(dim, dim, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
}

#[test]
fn double_commutator_identities() {
    for s in [Spin::HALF, Spin::ONE, Spin::THREE_HALVES] {
        let dc = double_commutators(s);
        for (name, r) in &dc.residuals {
            assert!(*r <= 1e-12, "S = {s}: {name} residual {r}");
        }
    }
    // S = 1/2: T³³ lives on the |↑↓⟩, |↓↑⟩ block with unit entries.
    let dc = double_commutators(Spin::HALF);
    let mut nonzero = Vec::new();
    for i in 0..4 {
        for j in 0..4 {
            if dc.t33[(i, j)].norm() > 0.0 {
                nonzero.push((i, j, dc.t33[(i, j)].re));
            }
        }
    }
    assert_eq!(nonzero, vec![(1, 2, 1.0), (2, 1, 1.0)]);
}

#[test]
fn double_commutator_expectation_on_four_cycle() {
    let g = Graph::periodic_cubic(4, 1).unwrap();
    for u in [0.0, 0.3, 0.5, 1.0] {
        for k in [0.0, PI / 2.0, PI, 3.0 * PI / 2.0] {
            let r = double_commutator_check(&g, u, Spin::HALF, 1.0, &[k], CAP).unwrap();
            assert!((r.lhs_re - r.rhs).abs() < 1e-10, "u={u} k={k}: {r:?}");
            assert!(r.lhs_im.abs() < 1e-10);
        }
    }
    let r = double_commutator_check(&g, 0.4, Spin::ONE, 0.7, &[PI / 2.0], CAP).unwrap();
    assert!((r.lhs_re - r.rhs).abs() < 1e-10, "{r:?}");
}

#[test]
fn rotation_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for s in [Spin::HALF, Spin::ONE, Spin::THREE_HALVES] {
        let ops = build_tpq(s);
        for _ in 0..5 {
            let a = [rng.random::<f64>() * 4.0 - 2.0, rng.random::<f64>() * 4.0 - 2.0, rng.random::<f64>() * 4.0 - 2.0];
            assert!(max_abs(&(rotate_pair(&ops.t, s, a) - &ops.t)) < 1e-10);
            assert!(max_abs(&(rotate_pair(&ops.p, s, a) - &ops.p)) < 1e-10);
            let phi = rng.random::<f64>() * 2.0 * PI;
            assert!(max_abs(&(rotate_pair(&ops.q, s, [0.0, phi, 0.0]) - &ops.q)) < 1e-10);
            assert!(max_abs(&(rotate_pair(&ops.q, s, [PI * phi.cos(), 0.0, PI * phi.sin()]) - &ops.q)) < 1e-10);
        }
        // A generic rotation about the first axis does move Q.
        assert!(max_abs(&(rotate_pair(&ops.q, s, [0.7, 0.0, 0.0]) - &ops.q)) > 1e-3);
    }
}

#[test]
fn spin_half_dictionary() {
    let g = Graph::periodic_cubic(2, 2).unwrap();
    let sys = SpinSystem::new(&g, Spin::HALF, CAP).unwrap();
    for u in [0.0, 0.25, 0.5, 1.0] {
        let h = sys.hamiltonian(u, Family::H).unwrap();
        let expect = bilinear_sum(&sys, &g, [1.0, 2.0 * u - 1.0, 1.0], -0.25) * Complex64::new(-2.0, 0.0);
        assert!(max_abs(&(h - expect)) < 1e-12, "u = {u}");
    }
}

#[test]
fn spin_one_nematic_form() {
    let g = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
    let sys = SpinSystem::new(&g, Spin::ONE, CAP).unwrap();
    let dot = pair_dot(Spin::ONE);
    let id = DenseOperator::identity(9, 9);
    for u in [0.0, 0.4, 1.0] {
        let local = -(&dot * Complex64::new(u, 0.0) + &dot * &dot - &id * Complex64::new(2.0, 0.0));
        let expect = g.edges().iter().fold(DenseOperator::zeros(27, 27), |acc, &(x, y)| acc + sys.pair(&local, x, y));
        let h = sys.hamiltonian(u, Family::HTilde).unwrap();
        assert!(max_abs(&(h - expect)) < 1e-12, "u = {u}");
    }
}

#[test]
fn hamiltonians_are_hermitian() {
    let g = Graph::periodic_cubic(2, 2).unwrap();
    for s in [Spin::HALF, Spin::ONE] {
        for fam in [Family::H, Family::HTilde] {
            let h = build_hamiltonian(&g, 0.37, s, fam, CAP).unwrap();
            assert!(hermiticity_residual(&h) <= 1e-12);
        }
    }
}

#[test]
fn susceptibility_finite_difference_converges() {
    let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
    for u in [0.0, 0.5, 1.0] {
        let r = susceptibility_second_derivative(&g, u, Spin::HALF, Family::H, 1.0, 1e-2, CAP).unwrap();
        let e1 = (r.finite_difference - r.exact).abs();
        let e2 = (r.finite_difference_half - r.exact).abs();
        assert!(e1 < 1e-4 && e2 < e1 / 3.0, "u={u}: {r:?}");
        assert!(r.first_derivative.abs() < 1e-12);
    }
    // At u = 1 the magnetization is conserved, so the derivative is β²⟨M²⟩.
    let r = susceptibility_second_derivative(&g, 1.0, Spin::HALF, Family::H, 1.0, 1e-2, CAP).unwrap();
    let z = 3.0 + (-2.0f64).exp();
    // Triplet states carry M ∈ {1, 0, −1}, the singlet M = 0.
    assert!((r.exact - 2.0 / z).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn duhamel_bounds(seed in any::<u64>(), beta in 0.1f64..3.0, u in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Graph::periodic_cubic(3, 1).unwrap();
        let h = build_hamiltonian(&g, u, Spin::HALF, Family::H, CAP).unwrap();
        let gibbs = Gibbs::new(&h, beta).unwrap();
        let a = random_operator(8, &mut rng);
        let duh = gibbs.duhamel(&a, &a);
        prop_assert!(duh.im.abs() < 1e-10);
        prop_assert!(duh.re >= -1e-12);
        let ad = a.adjoint();
        let sym = gibbs.expectation(&(&ad * &a + &a * &ad)).re / 2.0;
        prop_assert!(duh.re / beta <= sym + 1e-12);
    }
}

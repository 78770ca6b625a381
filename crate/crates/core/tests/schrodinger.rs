mod common;

use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use wavepot_core::schrodinger::{Potential, QuantumParams, QuantumSystem};
use wavepot_core::{ComplexField, Grid, Ops, ScalarField};

use common::{free, harmonic, rng, rough_field, smooth_field};

fn gaussian(sys: &QuantumSystem, centre: f64, width: f64, k0: f64) -> ComplexField {
    ComplexField::from_fn(sys.grid(), |[x, _, _]| {
        let d = x - centre;
        Complex64::from_polar((-d * d / (2.0 * width * width)).exp(), k0 * d)
    })
}

fn random_system(seed: u64, backend: Ops) -> (QuantumSystem, ScalarField, ScalarField) {
    let mut r = rng(seed);
    let g = Grid::new(&[16, 8], &[2.0, 1.5]).unwrap();
    let v = smooth_field(&g, &mut r);
    let sys = QuantumSystem::new(QuantumParams::new(0.8, 1.7).unwrap(), Potential::from_field(v), backend);
    let a = rough_field(&g, &mut r);
    let b = rough_field(&g, &mut r);
    (sys, a, b)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn hamiltonian_is_self_adjoint(seed in any::<u64>()) {
        for ops in [Ops::spectral(), Ops::central2()] {
            let (sys, f, g) = random_system(seed, ops);
            let hf = sys.hamiltonian_real(&f).unwrap();
            let hg = sys.hamiltonian_real(&g).unwrap();
            let left = f.dot(&hg).unwrap();
            let right = hf.dot(&g).unwrap();
            let scale = hf.norm_l2() * g.norm_l2();
            prop_assert!((left - right).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn canonical_rhs_reassembles_schrodinger(seed in any::<u64>()) {
        let (sys, varphi, p) = random_system(seed, Ops::spectral());
        let (vd, pd) = sys.canonical_rhs(&varphi, &p).unwrap();
        let psi = ComplexField::from_parts(&varphi, &p).unwrap();
        let hbar = sys.params().hbar();
        let want = sys.apply_hamiltonian(&psi).unwrap().scale(Complex64::new(0.0, -1.0 / hbar));
        let got = ComplexField::from_parts(&vd, &pd).unwrap();
        prop_assert!(got.sub(&want).unwrap().norm_max() <= 1e-13 * want.norm_max());
    }

    #[test]
    fn generalized_rhs_matches_canonical(seed in any::<u64>()) {
        let (sys, varphi, p) = random_system(seed, Ops::spectral());
        let (a1, b1) = sys.canonical_rhs(&varphi, &p).unwrap();
        let (a2, b2) = sys.generalized_rhs(&varphi, &p).unwrap();
        let scale = a1.norm_max().max(b1.norm_max());
        prop_assert!(a1.sub(&a2).unwrap().norm_max() <= 1e-13 * scale);
        prop_assert!(b1.sub(&b2).unwrap().norm_max() <= 1e-13 * scale);
    }

    #[test]
    fn canonical_hamiltonian_is_expectation_of_h(seed in any::<u64>()) {
        for ops in [Ops::spectral(), Ops::central2()] {
            let (sys, varphi, p) = random_system(seed, ops);
            let psi = ComplexField::from_parts(&varphi, &p).unwrap();
            let expectation = psi.inner(&sys.apply_hamiltonian(&psi).unwrap()).unwrap();
            let h = sys.hamiltonian_canonical(&varphi, &p).unwrap();
            let want = expectation.re / (2.0 * sys.params().hbar());
            let scale = sys.energy_bound() * psi.norm_l2().powi(2);
            prop_assert!((h - want).abs() <= 1e-12 * scale);
            prop_assert!(expectation.im.abs() <= 1e-12 * scale);
        }
    }
}

#[test]
fn harmonic_ground_state_gaussian() {
    let sys = harmonic(128, 20.0, 1.0, 1.0, 1.0);
    // oracle: dense diagonalization of the same discrete operator
    let e0 = sys.eigenpairs_small(1).unwrap()[0].0;
    assert!((e0 - 0.5).abs() < 1e-10, "E0 = {e0}");
    let psi = gaussian(&sys, 10.0, 1.0, 0.0);
    let h_psi = sys.apply_hamiltonian(&psi).unwrap();
    let err = h_psi.sub(&psi.scale(Complex64::new(e0, 0.0))).unwrap().norm_l2() / psi.norm_l2();
    assert!(err <= 1e-6, "relative error {err}");
}

#[test]
fn harmonic_level_spacing() {
    let sys = harmonic(128, 20.0, 1.0, 1.0, 1.0);
    let pairs = sys.eigenpairs_small(4).unwrap();
    for w in pairs.windows(2) {
        let gap = w[1].0 - w[0].0;
        assert!((gap - 1.0).abs() <= 1e-4, "gap {gap}");
    }
    // orthonormal under the discrete inner product
    for (i, (_, a)) in pairs.iter().enumerate() {
        for (j, (_, b)) in pairs.iter().enumerate() {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((a.dot(b).unwrap() - want).abs() < 1e-12);
        }
    }
}

#[test]
fn crank_nicolson_preserves_norm_and_energy() {
    let sys = harmonic(64, 16.0, 1.0, 1.0, 1.0);
    let mut psi = gaussian(&sys, 9.5, 1.2, 0.7);
    let n0 = sys.norm_functional(&psi);
    let e0 = sys.hamiltonian_canonical(&psi.re(), &psi.im()).unwrap();
    let mut worst_step = 0.0f64;
    for _ in 0..1000 {
        let before = sys.norm_functional(&psi);
        psi = sys.crank_nicolson_step(&psi, 0.01).unwrap();
        worst_step = worst_step.max((sys.norm_functional(&psi) - before).abs() / before);
    }
    let drift = (sys.norm_functional(&psi) - n0).abs() / n0;
    let e1 = sys.hamiltonian_canonical(&psi.re(), &psi.im()).unwrap();
    assert!(worst_step <= 1e-12, "per-step norm change {worst_step}");
    assert!(drift <= 1e-9, "norm drift {drift}");
    assert!(((e1 - e0) / e0).abs() <= 1e-8, "energy drift {}", (e1 - e0) / e0);
}

#[test]
fn crank_nicolson_rotates_eigenstates() {
    let sys = harmonic(64, 16.0, 1.0, 1.0, 1.0);
    let (_, psi2) = sys.eigenpairs_small(3).unwrap().pop().unwrap();
    let psi = ComplexField::from_real(&psi2);
    let next = sys.crank_nicolson_step(&psi, 0.05).unwrap();
    let overlap = next.inner(&psi).unwrap().norm() / psi.norm_l2().powi(2);
    assert!((overlap - 1.0).abs() <= 1e-10);
}

#[test]
fn crank_nicolson_first_order_term() {
    let sys = harmonic(64, 16.0, 1.0, 1.0, 1.0);
    let psi = gaussian(&sys, 8.0, 1.0, 0.5);
    let rate = sys.apply_hamiltonian(&psi).unwrap().scale(Complex64::new(0.0, -1.0));
    let remainder = |dt: f64| {
        let next = sys.crank_nicolson_step(&psi, dt).unwrap();
        next.sub(&psi).unwrap().lin_comb(Complex64::new(1.0, 0.0), &rate, Complex64::new(-dt, 0.0)).unwrap().norm_l2()
    };
    let (a, b) = (remainder(1e-2), remainder(5e-3));
    let order = (a / b).log2();
    assert!((order - 2.0).abs() < 0.1, "remainder order {order}");
}

#[test]
fn exact_propagator_basics() {
    let sys = harmonic(64, 16.0, 1.0, 1.0, 1.0);
    let psi = gaussian(&sys, 9.0, 1.0, 0.4);
    let same = sys.exact_propagate_small(&psi, 0.0).unwrap();
    assert!(same.sub(&psi).unwrap().norm_max() <= 1e-13);
    let n0 = psi.norm_l2();
    for t in [0.3, 7.0, 123.4] {
        let later = sys.exact_propagate_small(&psi, t).unwrap();
        assert!((later.norm_l2() - n0).abs() / n0 <= 1e-13);
    }
}

#[test]
fn crank_nicolson_converges_to_exact_propagator_at_second_order() {
    let sys = harmonic(64, 16.0, 1.0, 1.0, 1.0);
    let psi = gaussian(&sys, 9.0, 1.0, 0.4);
    let t_end = 1.0;
    let exact = sys.exact_propagate_small(&psi, t_end).unwrap();
    let errors: Vec<f64> = [40usize, 80, 160]
        .iter()
        .map(|&steps| {
            let dt = t_end / steps as f64;
            let mut s = psi.clone();
            for _ in 0..steps {
                s = sys.crank_nicolson_step(&s, dt).unwrap();
            }
            s.sub(&exact).unwrap().norm_l2()
        })
        .collect();
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((order - 2.0).abs() < 0.1, "observed order {order} from {errors:?}");
    }
}

#[test]
fn free_spectrum_matches_dispersion() {
    let (l, hbar, m) = (3.0, 0.6, 1.4);
    let g = Grid::line(24, l).unwrap();
    let sys = QuantumSystem::new(QuantumParams::new(hbar, m).unwrap(), Potential::zero(&g), Ops::spectral());
    let e = sys.dense_spectrum().unwrap();
    let mut want: Vec<f64> = (-11i32..=12)
        .map(|n| {
            let k = 2.0 * PI * n as f64 / l;
            hbar * hbar * k * k / (2.0 * m)
        })
        .collect();
    want.sort_by(f64::total_cmp);
    for (a, b) in e.energies().iter().zip(&want) {
        assert!((a - b).abs() <= 1e-10 * b.max(1.0), "{a} vs {b}");
    }
    let ground = e.eigenvector(0);
    assert!(ground.max() - ground.min() < 1e-12);
    let _ = free(8, 1.0);
}

mod common;

use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use wavepot_core::phi::{
    acceleration, energy_density, equation_residual, gauge_shift, lagrangian_density,
    probability_energy_residual, stable_dt, stationary_phi, to_wavefunction, verlet_step,
    PhiIntegrator, PhiState, DEFAULT_SAFETY,
};
use wavepot_core::schrodinger::{Potential, QuantumParams, QuantumSystem};
use wavepot_core::{ComplexField, Error, Grid, Ops, ScalarField};

use common::{free, harmonic, rng, rough_field, smooth_field};

fn random_state(sys: &QuantumSystem, seed: u64) -> PhiState {
    let mut r = rng(seed);
    PhiState::new(smooth_field(sys.grid(), &mut r), smooth_field(sys.grid(), &mut r)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn probability_equals_energy_pointwise(seed in any::<u64>()) {
        let sys = harmonic(32, 8.0, 0.7, 1.3, 1.1);
        let mut r = rng(seed);
        let s = PhiState::new(rough_field(sys.grid(), &mut r), rough_field(sys.grid(), &mut r)).unwrap();
        prop_assert!(probability_energy_residual(&sys, &s).unwrap() <= 1e-12);
        let e = energy_density(&sys, &s).unwrap();
        prop_assert!(e.kinetic.min() >= -1e-14 && e.potential.min() >= -1e-14);
        let lag = lagrangian_density(&sys, &s).unwrap();
        prop_assert!(lag.sub(&e.kinetic.sub(&e.potential).unwrap()).unwrap().norm_max() <= 1e-14 * e.total.norm_max());
    }

    #[test]
    fn verlet_is_time_reversible(seed in any::<u64>()) {
        let sys = harmonic(32, 8.0, 1.0, 1.0, 1.0);
        let s0 = random_state(&sys, seed);
        let dt = stable_dt(&sys, DEFAULT_SAFETY);
        let mut s = s0.clone();
        for _ in 0..5 {
            s = verlet_step(&sys, &s, dt).unwrap();
        }
        s.phi_dot = s.phi_dot.scale(-1.0);
        for _ in 0..5 {
            s = verlet_step(&sys, &s, dt).unwrap();
        }
        s.phi_dot = s.phi_dot.scale(-1.0);
        let scale = s0.phi.norm_max().max(s0.phi_dot.norm_max());
        prop_assert!(s.phi.sub(&s0.phi).unwrap().norm_max() <= 1e-12 * scale);
        prop_assert!(s.phi_dot.sub(&s0.phi_dot).unwrap().norm_max() <= 1e-12 * scale);
    }

    #[test]
    fn to_wavefunction_is_linear(seed in any::<u64>(), a in -2.0f64..2.0) {
        let sys = harmonic(32, 8.0, 1.0, 1.0, 1.0);
        let s = random_state(&sys, seed);
        let scaled = PhiState::new(s.phi.scale(a), s.phi_dot.scale(a)).unwrap();
        let lhs = to_wavefunction(&sys, &scaled).unwrap();
        let rhs = to_wavefunction(&sys, &s).unwrap().scale(Complex64::new(a, 0.0));
        prop_assert!(lhs.sub(&rhs).unwrap().norm_max() <= 1e-13 * rhs.norm_max().max(1e-300));
    }
}

#[test]
fn acceleration_of_eigenvector() {
    // roundoff in L^2 psi grows like eps (E_max / E_0)^2; this grid keeps
    // that floor well below the tolerance
    let sys = harmonic(64, 16.0, 1.0, 1.0, 1.0);
    let (e0, psi0) = sys.eigenpairs_small(1).unwrap().remove(0);
    let s = PhiState::new(psi0.clone(), ScalarField::zeros(sys.grid())).unwrap();
    let a = acceleration(&sys, &s).unwrap();
    let want = psi0.scale(-e0 * e0);
    let err = a.sub(&want).unwrap().norm_max() / want.norm_max();
    assert!(err <= 1e-10, "{err}");
}

#[test]
fn verlet_frequency_of_eigenmode() {
    let sys = harmonic(64, 16.0, 1.0, 1.0, 1.0);
    let (e3, psi3) = sys.eigenpairs_small(4).unwrap().remove(3);
    let dt = stable_dt(&sys, DEFAULT_SAFETY);
    // closed form of the Verlet map for a single oscillator
    let omega = 2.0 / dt * (dt * e3 / 2.0).asin();
    let mut integ = PhiIntegrator::new(
        &sys,
        PhiState::new(psi3.clone(), ScalarField::zeros(sys.grid())).unwrap(),
        dt,
    )
    .unwrap();
    for n in 1..=2000 {
        integ.step().unwrap();
        if n % 500 == 0 {
            let want = psi3.scale((omega * n as f64 * dt).cos());
            let err = integ.state().phi.sub(&want).unwrap().norm_max() / psi3.norm_max();
            assert!(err <= 1e-9, "step {n}: {err}");
        }
    }
    // the numerical frequency differs from E/hbar at second order in dt
    let shift = (omega - e3) / e3;
    assert!(shift > 0.0 && (shift - (dt * e3).powi(2) / 24.0).abs() <= 1e-3 * shift);
}

#[test]
fn stable_dt_rules() {
    let sys = free(64, 2.0 * PI);
    assert!((sys.energy_bound() - 512.0).abs() < 1e-9);
    assert!((stable_dt(&sys, DEFAULT_SAFETY) - 7.8125e-4).abs() < 1e-15);
    let finer = free(128, 2.0 * PI);
    assert!((stable_dt(&finer, DEFAULT_SAFETY) * 4.0 - 7.8125e-4).abs() < 1e-15);
    let g = Grid::line(64, 2.0 * PI).unwrap();
    let mut previous = stable_dt(&sys, DEFAULT_SAFETY);
    for v0 in [0.5, 5.0, 50.0] {
        let shifted = QuantumSystem::new(
            QuantumParams::natural(),
            Potential::from_field(ScalarField::constant(&g, v0)),
            Ops::spectral(),
        );
        let dt = stable_dt(&shifted, DEFAULT_SAFETY);
        assert!(dt < previous);
        previous = dt;
    }
    let s = PhiState::zeros(&sys);
    let too_big = 2.0 / 512.0 * 1.001;
    assert!(matches!(verlet_step(&sys, &s, too_big), Err(Error::Unstable { .. })));
}

#[test]
fn verlet_energy_oscillates_without_drift() {
    let sys = harmonic(256, 20.0, 1.0, 1.0, 1.0);
    let centre = 11.0;
    let psi = ComplexField::from_fn(sys.grid(), |[x, _, _]| {
        Complex64::new((-(x - centre).powi(2) / 2.0).exp(), 0.0)
    });
    // phi with -L phi = Re psi, found through the oracle spectrum
    let spectrum = sys.dense_spectrum().unwrap();
    let mut phi = ScalarField::zeros(sys.grid());
    for n in 0..sys.grid().len() {
        let v = spectrum.eigenvector(n);
        let c = v.dot(&psi.re()).unwrap();
        phi = phi.lin_comb(1.0, &v, c / spectrum.energies()[n]).unwrap();
    }
    let dt = stable_dt(&sys, DEFAULT_SAFETY);
    let mut integ = PhiIntegrator::new(&sys, PhiState::new(phi, ScalarField::zeros(sys.grid())).unwrap(), dt).unwrap();
    let norm = |s: &PhiState| to_wavefunction(&sys, s).unwrap().norm_l2().powi(2);
    let n0 = norm(integ.state());
    let mut series = Vec::with_capacity(10_001);
    series.push(0.0);
    for _ in 0..10_000 {
        integ.step().unwrap();
        series.push((norm(integ.state()) - n0) / n0);
    }
    let worst = series.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(worst <= 1e-6, "drift {worst}");
    // least-squares slope over the run, times the run length, stays within
    // the oscillation amplitude
    let n = series.len() as f64;
    let mean_i = (n - 1.0) / 2.0;
    let mean_v = series.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, v) in series.iter().enumerate() {
        sxy += (i as f64 - mean_i) * (v - mean_v);
        sxx += (i as f64 - mean_i).powi(2);
    }
    let trend = (sxy / sxx * n).abs();
    assert!(trend <= worst.max(1e-15), "secular trend {trend} vs amplitude {worst}");
}

#[test]
fn stationary_potential_examples() {
    let sys = harmonic(64, 16.0, 1.0, 1.0, 1.0);
    let hbar = sys.params().hbar();
    let (e1, psi1) = sys.eigenpairs_small(2).unwrap().remove(1);
    let s0 = stationary_phi(&sys, &psi1, e1, 0.0).unwrap();
    assert!(s0.phi.sub(&psi1.scale(1.0 / e1)).unwrap().norm_max() < 1e-15);
    assert_eq!(s0.phi_dot.norm_max(), 0.0);
    let psi_t0 = to_wavefunction(&sys, &s0).unwrap();
    assert!(psi_t0.sub(&ComplexField::from_real(&psi1)).unwrap().norm_max() <= 1e-10 * psi1.norm_max());

    let half = stationary_phi(&sys, &psi1, e1, PI * hbar / e1).unwrap();
    let psi_half = to_wavefunction(&sys, &half).unwrap();
    assert!(psi_half.sub(&ComplexField::from_real(&psi1.scale(-1.0))).unwrap().norm_max() <= 1e-10 * psi1.norm_max());

    let norm = psi1.norm_l2().powi(2) / (2.0 * hbar);
    for t in [0.0, 0.37, 2.0, 11.5] {
        let s = stationary_phi(&sys, &psi1, e1, t).unwrap();
        let total = energy_density(&sys, &s).unwrap().total.integral();
        assert!((total - norm).abs() <= 1e-10 * norm);
        // closed-form second derivative
        let phi_ddot = s.phi.scale(-(e1 / hbar).powi(2));
        let residual = equation_residual(&sys, &s.phi, &phi_ddot).unwrap();
        let scale = phi_ddot.norm_max() * hbar * hbar;
        assert!(residual.norm_max() <= 1e-12 * scale.max(1e-300) * 10.0);
    }
    let quarter = stationary_phi(&sys, &psi1, e1, PI * hbar / (4.0 * e1)).unwrap();
    let lag = lagrangian_density(&sys, &quarter).unwrap().integral();
    assert!(lag.abs() <= 1e-10 * norm);

    let free_sys = free(16, 1.0);
    let constant = ScalarField::constant(free_sys.grid(), 0.25);
    assert!(stationary_phi(&free_sys, &constant, 0.0, 0.0).is_err());
}

#[test]
fn gauge_shift_examples() {
    let sys = free(32, 2.0);
    let s = random_state(&sys, 7);
    let shifted = gauge_shift(&sys, &s, &ScalarField::constant(sys.grid(), -3.2)).unwrap();
    let a = to_wavefunction(&sys, &s).unwrap();
    let b = to_wavefunction(&sys, &shifted).unwrap();
    // relative to the wave function: adding alpha perturbs each sample by
    // one rounding of |phi + alpha|, which the Laplacian amplifies
    let diff = a.sub(&b).unwrap().norm_max();
    assert!(diff <= 1e-13 * a.norm_max(), "{diff} vs {}", a.norm_max());
    assert_eq!(gauge_shift(&sys, &s, &ScalarField::zeros(sys.grid())).unwrap(), s);
    // constant alpha kills the null direction: psi(alpha) = 0
    let pure = PhiState::new(ScalarField::constant(sys.grid(), 1.0), ScalarField::zeros(sys.grid())).unwrap();
    assert!(to_wavefunction(&sys, &pure).unwrap().norm_max() <= 1e-13);

    let ho = harmonic(32, 8.0, 1.0, 1.0, 1.0);
    let err = gauge_shift(&ho, &random_state(&ho, 3), &ScalarField::constant(ho.grid(), 1.0)).unwrap_err();
    match err {
        Error::NotInKernel { residual, tolerance } => assert!(residual > tolerance && residual > 0.1),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn lattice_mode_potential_maps_to_cosine() {
    let l = 3.0;
    let sys = free(32, l);
    let k = 2.0 * PI * 2.0 / l;
    let e_k = 0.5 * k * k;
    let phi = ScalarField::from_fn(sys.grid(), |[x, _, _]| (k * x).cos() / e_k);
    let psi = to_wavefunction(&sys, &PhiState::new(phi, ScalarField::zeros(sys.grid())).unwrap()).unwrap();
    let want = ComplexField::from_fn(sys.grid(), |[x, _, _]| Complex64::new((k * x).cos(), 0.0));
    assert!(psi.sub(&want).unwrap().norm_max() <= 1e-12);
    assert_eq!(to_wavefunction(&sys, &PhiState::zeros(&sys)).unwrap().norm_max(), 0.0);
}

/// Largest L2 error of `to_wavefunction` along a Verlet run against the
/// exact discrete propagator.
fn forward_error(sys: &QuantumSystem, s0: &PhiState, dt: f64, steps: usize) -> f64 {
    let spectrum = sys.dense_spectrum().unwrap();
    let psi0 = to_wavefunction(sys, s0).unwrap();
    let mut integ = PhiIntegrator::new(sys, s0.clone(), dt).unwrap();
    let mut worst = 0.0f64;
    for n in 1..=steps {
        integ.step().unwrap();
        let exact = spectrum.propagate(&psi0, n as f64 * dt).unwrap();
        let got = to_wavefunction(sys, integ.state()).unwrap();
        worst = worst.max(got.sub(&exact).unwrap().norm_l2());
    }
    worst
}

#[test]
fn forward_equivalence_converges_at_second_order() {
    let sys = harmonic(48, 12.0, 1.0, 1.0, 1.0);
    let s0 = random_state(&sys, 11);
    let t_end = 1.0;
    let base = stable_dt(&sys, DEFAULT_SAFETY);
    let steps = (t_end / base).ceil() as usize;
    let dt = t_end / steps as f64;
    let e1 = forward_error(&sys, &s0, dt, steps);
    let e2 = forward_error(&sys, &s0, dt / 2.0, 2 * steps);
    let order = (e1 / e2).log2();
    assert!((order - 2.0).abs() < 0.15, "order {order} ({e1} -> {e2})");
}

/// Runs the system `(1, m, V(hbar x'))` on the box `L / hbar` with step
/// `dt / hbar` from data mapped by `x = hbar x'`, `t = hbar t'`,
/// `phi = sqrt(hbar) phi'`, and returns the maximum relative residual of
/// `hbar^2 phi'' + L^2 phi = 0` in the original parameters, with `phi''`
/// from second differences of the mapped-back trajectory.
fn rescaled_residual(hbar: f64, potential_argument_scale: f64) -> f64 {
    let (n, l, m, omega) = (64usize, 16.0, 1.0, 1.0);
    let original = harmonic(n, l, hbar, m, omega);
    let centre = 0.5 * l;
    let grid_r = Grid::line(n, l / hbar).unwrap();
    let v_r = ScalarField::from_fn(&grid_r, |[xr, _, _]| {
        let x = potential_argument_scale * xr;
        0.5 * m * omega * omega * (x - centre).powi(2)
    });
    let rescaled = QuantumSystem::new(QuantumParams::new(1.0, m).unwrap(), Potential::from_field(v_r), Ops::spectral());

    let a = hbar.sqrt();
    let s0 = random_state(&original, 5);
    // same sample values: x_i = hbar x'_i
    let s0_r = PhiState::new(
        ScalarField::new(grid_r.clone(), s0.phi.scale(1.0 / a).into_data()).unwrap(),
        ScalarField::new(grid_r.clone(), s0.phi_dot.scale(hbar / a).into_data()).unwrap(),
    )
    .unwrap();
    let dt = 0.5 * stable_dt(&original, DEFAULT_SAFETY);
    let mut integ = PhiIntegrator::new(&rescaled, s0_r, dt / hbar).unwrap();
    let mut phis = vec![s0.phi.clone()];
    for _ in 0..200 {
        integ.step().unwrap();
        let back = integ.state().phi.scale(a).into_data();
        phis.push(ScalarField::new(original.grid().clone(), back).unwrap());
    }
    let mut worst = 0.0f64;
    for w in phis.windows(3) {
        let phi_ddot = w[2].lin_comb(1.0, &w[0], 1.0).unwrap().lin_comb(1.0, &w[1], -2.0).unwrap().scale(1.0 / (dt * dt));
        let residual = equation_residual(&original, &w[1], &phi_ddot).unwrap();
        let l2 = original.wave_operator(&original.wave_operator(&w[1]).unwrap()).unwrap();
        worst = worst.max(residual.norm_max() / l2.norm_max());
    }
    worst
}

#[test]
fn hbar_rescaling_maps_trajectories() {
    for hbar in [0.5, 2.0] {
        let r = rescaled_residual(hbar, hbar);
        assert!(r <= 1e-8, "hbar = {hbar}: residual {r}");
        // control: forgetting to rescale the potential argument breaks it
        let wrong = rescaled_residual(hbar, 1.0);
        assert!(wrong > 1e-3, "hbar = {hbar}: control residual {wrong}");
    }
}

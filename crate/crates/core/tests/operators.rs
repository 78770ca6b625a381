mod common;

use std::f64::consts::PI;

use proptest::prelude::*;
use wavepot_core::{Backend, Error, Grid, Ops, ScalarField, VectorField};

use common::{rng, rough_field, smooth_field, smooth_vector};

fn backends() -> [Ops; 2] {
    [Ops::spectral(), Ops::central2()]
}

fn relative(err: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        err
    } else {
        err / scale
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scalar_operators_are_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut r = rng(seed);
        let g = Grid::new(&[8, 6, 4], &[1.0, 1.5, 0.7]).unwrap();
        let f = rough_field(&g, &mut r);
        let h = rough_field(&g, &mut r);
        let combo = f.lin_comb(a, &h, b).unwrap();
        for ops in backends() {
            let lhs = ops.laplacian(&combo).unwrap();
            let rhs = ops.laplacian(&f).unwrap().lin_comb(a, &ops.laplacian(&h).unwrap(), b).unwrap();
            prop_assert!(relative(lhs.sub(&rhs).unwrap().norm_max(), rhs.norm_max() + lhs.norm_max()) < 1e-13);
            let lhs = ops.gradient(&combo).unwrap();
            let rhs = ops.gradient(&f).unwrap().lin_comb(a, &ops.gradient(&h).unwrap(), b).unwrap();
            prop_assert!(relative(lhs.sub(&rhs).unwrap().norm_max(), rhs.norm_max() + lhs.norm_max()) < 1e-13);
        }
    }

    #[test]
    fn vector_operators_are_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut r = rng(seed);
        let g = Grid::cube(6, 1.3).unwrap();
        let rough = |r: &mut _| VectorField::new(rough_field(&g, r), rough_field(&g, r), rough_field(&g, r)).unwrap();
        let v = rough(&mut r);
        let w = rough(&mut r);
        let combo = v.lin_comb(a, &w, b).unwrap();
        for ops in backends() {
            let lhs = ops.curl(&combo).unwrap();
            let rhs = ops.curl(&v).unwrap().lin_comb(a, &ops.curl(&w).unwrap(), b).unwrap();
            prop_assert!(relative(lhs.sub(&rhs).unwrap().norm_max(), rhs.norm_max() + lhs.norm_max()) < 1e-13);
            let lhs = ops.divergence(&combo).unwrap();
            let rhs = ops.divergence(&v).unwrap().lin_comb(a, &ops.divergence(&w).unwrap(), b).unwrap();
            prop_assert!(relative(lhs.sub(&rhs).unwrap().norm_max(), rhs.norm_max() + lhs.norm_max()) < 1e-13);
        }
    }

    #[test]
    fn laplacian_integrates_by_parts(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = Grid::new(&[16, 8], &[2.0, 1.0]).unwrap();
        let f = rough_field(&g, &mut r);
        let h = rough_field(&g, &mut r);
        for ops in backends() {
            let left = f.dot(&ops.laplacian(&h).unwrap()).unwrap();
            let right = ops.laplacian(&f).unwrap().dot(&h).unwrap();
            let scale = ops.laplacian(&f).unwrap().norm_l2() * h.norm_l2();
            prop_assert!((left - right).abs() <= 1e-13 * scale);
        }
    }

    #[test]
    fn structural_identities_hold_for_smooth_fields(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = Grid::new(&[8, 8, 8], &[1.0, 2.0, 1.5]).unwrap();
        let f = smooth_field(&g, &mut r);
        let v = smooth_vector(&g, &mut r);
        for ops in backends() {
            prop_assert!(ops.divergence(&ops.curl(&v).unwrap()).unwrap().norm_max() <= 1e-11);
            prop_assert!(ops.curl(&ops.gradient(&f).unwrap()).unwrap().norm_max() <= 1e-11);
            prop_assert!(ops.curl_curl_identity_residual(&v).unwrap() <= 1e-11);
        }
    }

    #[test]
    fn spectral_derivative_of_any_lattice_mode_is_exact(
        n in 0i32..4, m in -3i32..4, phase in 0.0f64..std::f64::consts::TAU
    ) {
        let (lx, ly) = (1.7, 0.9);
        let g = Grid::new(&[8, 8], &[lx, ly]).unwrap();
        let (kx, ky) = (2.0 * PI * n as f64 / lx, 2.0 * PI * m as f64 / ly);
        let f = ScalarField::from_fn(&g, |[x, y, _]| (kx * x + ky * y + phase).sin());
        let ops = Ops::spectral();
        let dx = ops.partial(&f, 0).unwrap();
        let expected = ScalarField::from_fn(&g, |[x, y, _]| kx * (kx * x + ky * y + phase).cos());
        let scale = kx.abs().max(1.0);
        prop_assert!(dx.sub(&expected).unwrap().norm_max() <= 1e-12 * scale);
        let lap = ops.laplacian(&f).unwrap();
        prop_assert!(lap.sub(&f.scale(-(kx * kx + ky * ky))).unwrap().norm_max() <= 1e-12 * (kx * kx + ky * ky).max(1.0));
    }
}

#[test]
fn spectral_laplacian_of_fundamental_mode_on_64_points() {
    let l = 3.0;
    let g = Grid::line(64, l).unwrap();
    let k = 2.0 * PI / l;
    let f = ScalarField::from_fn(&g, |[x, _, _]| (k * x).sin());
    let lap = Ops::spectral().laplacian(&f).unwrap();
    let err = lap.sub(&f.scale(-k * k)).unwrap().norm_max();
    // relative to the magnitude of the exact result
    assert!(err <= 1e-12 * k * k, "{err}");
}

#[test]
fn central2_converges_to_spectral_at_second_order() {
    let mut errors = Vec::new();
    for n in [16usize, 32, 64] {
        let g = Grid::new(&[n, n], &[1.0, 1.0]).unwrap();
        // fixed band-limited field, independent of resolution
        let f = ScalarField::from_fn(&g, |[x, y, _]| {
            (2.0 * PI * x).sin() * (4.0 * PI * y).cos() + 0.3 * (6.0 * PI * (x + y)).cos()
        });
        let exact = Ops::spectral().laplacian(&f).unwrap();
        let approx = Ops::central2().laplacian(&f).unwrap();
        errors.push(approx.sub(&exact).unwrap().norm_max());
    }
    for pair in errors.windows(2) {
        let order = (pair[0] / pair[1]).log2();
        assert!((order - 2.0).abs() < 0.1, "observed order {order}");
    }
}

#[test]
fn curl_of_shear_and_transverse_wave() {
    let l = 2.0;
    let g = Grid::cube(16, l).unwrap();
    let q = 2.0 * PI / l;
    let v = VectorField::from_fn(&g, |[_, y, _]| [(q * y).sin(), 0.0, 0.0]).unwrap();
    let curl = Ops::spectral().curl(&v).unwrap();
    let expected = VectorField::from_fn(&g, |[_, y, _]| [0.0, 0.0, -q * (q * y).cos()]).unwrap();
    assert!(curl.sub(&expected).unwrap().norm_max() <= 1e-12);

    let wave = VectorField::from_fn(&g, |[x, y, _]| {
        let s = (q * x + q * y).cos();
        [s, -s, 0.0]
    })
    .unwrap();
    assert!(Ops::spectral().curl_curl_identity_residual(&wave).unwrap() <= 1e-12);
}

#[test]
fn operators_reject_unsupported_shapes() {
    let g = Grid::line(8, 1.0).unwrap();
    let f = ScalarField::zeros(&g);
    assert!(matches!(
        Ops::spectral().gradient(&f),
        Err(Error::DimensionMismatch { expected: 3, found: 1 })
    ));
    assert!(Grid::line(5, 1.0).is_err());
    assert!(Grid::line(2, 1.0).is_err());
    assert!(Grid::line(8, -1.0).is_err());
    assert_eq!("central2".parse::<Backend>().unwrap(), Backend::Central2);
    assert!("yee".parse::<Backend>().is_err());
}

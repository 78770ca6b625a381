#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wavepot_core::schrodinger::{Potential, QuantumParams, QuantumSystem};
use wavepot_core::{Grid, Ops, ScalarField, VectorField};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random band-limited field: a few low Fourier modes with random
/// amplitudes and phases.
pub fn smooth_field(grid: &Grid, rng: &mut ChaCha8Rng) -> ScalarField {
    let l = grid.lengths();
    let dims = grid.dims();
    let modes: Vec<([f64; 3], f64, f64)> = (0..6)
        .map(|_| {
            let mut k = [0.0; 3];
            for d in 0..dims {
                k[d] = 2.0 * PI * rng.gen_range(-3i32..=3) as f64 / l[d];
            }
            (k, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..2.0 * PI))
        })
        .collect();
    ScalarField::from_fn(grid, |x| {
        modes
            .iter()
            .map(|(k, a, p)| a * (k[0] * x[0] + k[1] * x[1] + k[2] * x[2] + p).cos())
            .sum()
    })
}

/// Random field with independent values at every sample.
pub fn rough_field(grid: &Grid, rng: &mut ChaCha8Rng) -> ScalarField {
    let data = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    ScalarField::new(grid.clone(), data).unwrap()
}

pub fn smooth_vector(grid: &Grid, rng: &mut ChaCha8Rng) -> VectorField {
    VectorField::new(
        smooth_field(grid, rng),
        smooth_field(grid, rng),
        smooth_field(grid, rng),
    )
    .unwrap()
}

/// `V = m w^2 (x - L/2)^2 / 2` on a 1D box of width `length`.
pub fn harmonic(points: usize, length: f64, hbar: f64, mass: f64, omega: f64) -> QuantumSystem {
    let grid = Grid::line(points, length).unwrap();
    let centre = 0.5 * length;
    let v = ScalarField::from_fn(&grid, |[x, _, _]| 0.5 * mass * omega * omega * (x - centre).powi(2));
    QuantumSystem::new(QuantumParams::new(hbar, mass).unwrap(), Potential::from_field(v), Ops::spectral())
}

pub fn free(points: usize, length: f64) -> QuantumSystem {
    let grid = Grid::line(points, length).unwrap();
    QuantumSystem::new(QuantumParams::natural(), Potential::zero(&grid), Ops::spectral())
}

pub fn max_abs_diff(a: &ScalarField, b: &ScalarField) -> f64 {
    a.sub(b).unwrap().norm_max()
}

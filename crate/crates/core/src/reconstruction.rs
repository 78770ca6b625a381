//! Inverse maps: rebuild the wave-function potential `phi` from a recorded
//! Schrodinger trajectory, and the vector potential `A` from a recorded
//! `(E, B)` trajectory.
//!
//! `phi(t) = (1/hbar) int_0^t Im psi + C` with `L C = -Re psi(0)`, and
//! `A(t) = -c int_0^t E + K` with `curl K = B(0)`, `div K = 0`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{same_grid, ComplexField, Grid, ScalarField, VectorField};
use crate::linalg::{conjugate_gradient, minres, SolveStats};
use crate::maxwell::{EmState, MaxwellSystem, PotentialAState};
use crate::ops::{fft_nd, Ops};
use crate::phi::PhiState;
use crate::schrodinger::{DenseSpectrum, QuantumSystem, DENSE_LIMIT};

/// Relative residual guaranteed by [`solve_elliptic`].
pub const ELLIPTIC_TOLERANCE: f64 = 1e-10;
/// Eigenvalues with `|E| <= ZERO_MODE_TOLERANCE * E_max` count as zero modes.
pub const ZERO_MODE_TOLERANCE: f64 = 1e-10;
/// Largest admissible relative right-hand-side component along a zero mode.
pub const COMPATIBILITY_TOLERANCE: f64 = 1e-10;
/// Relative spacing tolerance for trajectory times.
pub const UNIFORM_SPACING_TOLERANCE: f64 = 1e-12;
/// Relative divergence tolerance for [`curl_inverse`] input.
pub const SOLENOIDAL_TOLERANCE: f64 = 1e-10;
/// Relative tolerance on the mean of [`curl_inverse`] input.
pub const MEAN_TOLERANCE: f64 = 1e-12;
/// Relative accuracy of each refinement round of the Krylov elliptic solve.
const REFINEMENT_TOLERANCE: f64 = 1e-6;
/// Refinement rounds before the residual check gives up.
const REFINEMENT_ROUNDS: usize = 6;

/// Snapshots at uniformly spaced times starting at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S> {
    times: Vec<f64>,
    snapshots: Vec<S>,
}

impl<S> Trajectory<S> {
    pub fn new(times: Vec<f64>, snapshots: Vec<S>) -> Result<Self> {
        if times.len() != snapshots.len() {
            return Err(Error::InvalidTrajectory(format!(
                "{} times but {} snapshots",
                times.len(),
                snapshots.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::InvalidTrajectory("need at least two samples".into()));
        }
        let dt = times[1] - times[0];
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidTrajectory(format!("non-increasing times: step {dt}")));
        }
        if times[0].abs() > UNIFORM_SPACING_TOLERANCE * dt {
            return Err(Error::InvalidTrajectory(format!(
                "times must start at 0, got {}",
                times[0]
            )));
        }
        for (n, &t) in times.iter().enumerate() {
            let expected = n as f64 * dt;
            if (t - expected).abs() > UNIFORM_SPACING_TOLERANCE * dt * (n.max(1) as f64) {
                return Err(Error::InvalidTrajectory(format!(
                    "non-uniform spacing at sample {n}: t = {t}, expected {expected}"
                )));
            }
        }
        Ok(Self { times, snapshots })
    }

    /// Builds times `n * dt` for the given snapshots.
    pub fn uniform(dt: f64, snapshots: Vec<S>) -> Result<Self> {
        let times = (0..snapshots.len()).map(|n| n as f64 * dt).collect();
        Self::new(times, snapshots)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn snapshots(&self) -> &[S] {
        &self.snapshots
    }

    pub fn into_snapshots(self) -> Vec<S> {
        self.snapshots
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }
}

/// Cumulative composite trapezoid integrals `int_0^{t_n}` of uniformly
/// sampled fields; the first entry is zero.
pub fn time_integrate(samples: &[ScalarField], dt: f64) -> Result<Vec<ScalarField>> {
    let first = samples
        .first()
        .ok_or_else(|| Error::InvalidTrajectory("no samples to integrate".into()))?;
    let mut out = Vec::with_capacity(samples.len());
    let mut acc = ScalarField::zeros(first.grid());
    out.push(acc.clone());
    for pair in samples.windows(2) {
        acc = acc.add(&pair[0].lin_comb(0.5 * dt, &pair[1], 0.5 * dt)?)?;
        out.push(acc.clone());
    }
    Ok(out)
}

/// Estimate of the trapezoid error at each even sample by Richardson
/// comparison with the step-`2 dt` rule: `(I_dt - I_2dt) / 3`.
fn quadrature_error_fields(samples: &[ScalarField], integrals: &[ScalarField], dt: f64) -> Result<Vec<(usize, ScalarField)>> {
    let coarse: Vec<ScalarField> = samples.iter().step_by(2).cloned().collect();
    if coarse.len() < 2 {
        return Ok(Vec::new());
    }
    let coarse_integrals = time_integrate(&coarse, 2.0 * dt)?;
    coarse_integrals
        .iter()
        .enumerate()
        .map(|(j, c)| Ok((2 * j, integrals[2 * j].sub(c)?.scale(1.0 / 3.0))))
        .collect()
}

/// How [`solve_elliptic`] found its answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EllipticMethod {
    /// Constant potential: exact division in Fourier space.
    Fourier,
    /// Non-negative potential: preconditioned conjugate gradient.
    ConjugateGradient,
    /// Sign-changing potential: preconditioned MINRES.
    Minres,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EllipticSolution {
    pub field: ScalarField,
    pub method: EllipticMethod,
    /// Iterations of the Krylov solver; zero for the Fourier path.
    pub iterations: usize,
    /// `||L C - rhs_proj|| / ||rhs_proj||`, where `rhs_proj` is the
    /// right-hand side with its zero-mode components removed.
    pub relative_residual: f64,
    /// Number of zero modes projected out.
    pub zero_modes: usize,
}

/// Minimum-norm solution `C` of `L C = rhs`, i.e. `-H C = rhs`.
pub fn solve_elliptic(system: &QuantumSystem, rhs: &ScalarField) -> Result<ScalarField> {
    solve_elliptic_detailed(system, rhs).map(|s| s.field)
}

pub fn solve_elliptic_detailed(system: &QuantumSystem, rhs: &ScalarField) -> Result<EllipticSolution> {
    same_grid(system.grid(), rhs.grid())?;
    let v = system.potential().sampled();
    let (v_min, v_max) = (v.min(), v.max());
    if v_min == v_max {
        return solve_constant_potential(system, rhs, v_min);
    }
    if v_min >= 0.0 {
        return solve_krylov(system, rhs, EllipticMethod::ConjugateGradient, Vec::new());
    }
    let kernel = if rhs.grid().len() <= DENSE_LIMIT {
        numerical_kernel(system)?
    } else {
        Vec::new()
    };
    solve_krylov(system, rhs, EllipticMethod::Minres, kernel)
}

/// Per-mode eigenvalues of the Laplacian in Fourier order.
fn laplacian_symbol(ops: Ops, grid: &Grid) -> Vec<f64> {
    let unit = |i: usize| {
        let mut f = ScalarField::zeros(grid);
        f.data_mut()[i] = 1.0;
        f
    };
    // The Laplacian is diagonal in Fourier space; read its symbol off the
    // transform of its action on a delta at the origin.
    let lap = ops.laplacian(&unit(0)).expect("grid already validated");
    let mut buf: Vec<Complex64> = lap.data().iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft_nd(grid, &mut buf, false);
    buf.iter().map(|z| z.re).collect()
}

fn solve_constant_potential(system: &QuantumSystem, rhs: &ScalarField, v0: f64) -> Result<EllipticSolution> {
    let grid = rhs.grid();
    let k = system.params().kinetic_coefficient();
    let e_max = system.energy_bound();
    let symbol = laplacian_symbol(system.ops(), grid);
    let mut buf: Vec<Complex64> = rhs.data().iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft_nd(grid, &mut buf, false);
    let rhs_norm_sq: f64 = buf.iter().map(|z| z.norm_sqr()).sum();
    let mut kernel_sq = 0.0;
    let mut zero_modes = 0;
    for (z, lap) in buf.iter_mut().zip(&symbol) {
        // eigenvalue of L on this mode
        let lambda = k * lap - v0;
        if lambda.abs() <= ZERO_MODE_TOLERANCE * e_max {
            kernel_sq += z.norm_sqr();
            zero_modes += 1;
            *z = Complex64::new(0.0, 0.0);
        } else {
            *z /= lambda;
        }
    }
    if rhs_norm_sq > 0.0 {
        let component = (kernel_sq / rhs_norm_sq).sqrt();
        if component > COMPATIBILITY_TOLERANCE {
            return Err(Error::IncompatibleRhs { component });
        }
    }
    fft_nd(grid, &mut buf, true);
    let field = ScalarField::new(grid.clone(), buf.into_iter().map(|z| z.re).collect())?;
    let projected = project_out_constant_modes(system, rhs, &symbol, v0)?;
    finish(system, field, &projected, EllipticMethod::Fourier, 0, zero_modes)
}

fn project_out_constant_modes(
    system: &QuantumSystem,
    rhs: &ScalarField,
    symbol: &[f64],
    v0: f64,
) -> Result<ScalarField> {
    let grid = rhs.grid();
    let k = system.params().kinetic_coefficient();
    let e_max = system.energy_bound();
    let mut buf: Vec<Complex64> = rhs.data().iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft_nd(grid, &mut buf, false);
    for (z, lap) in buf.iter_mut().zip(symbol) {
        if (k * lap - v0).abs() <= ZERO_MODE_TOLERANCE * e_max {
            *z = Complex64::new(0.0, 0.0);
        }
    }
    fft_nd(grid, &mut buf, true);
    ScalarField::new(grid.clone(), buf.into_iter().map(|z| z.re).collect())
}

/// Eigenvectors of `H` with `|E| <= ZERO_MODE_TOLERANCE * E_max`.
fn numerical_kernel(system: &QuantumSystem) -> Result<Vec<ScalarField>> {
    let spectrum = DenseSpectrum::new(system)?;
    let floor = ZERO_MODE_TOLERANCE * system.energy_bound();
    Ok(spectrum
        .energies()
        .iter()
        .enumerate()
        .filter(|(_, e)| e.abs() <= floor)
        .map(|(n, _)| spectrum.eigenvector(n))
        .collect())
}

fn project_out(f: &ScalarField, kernel: &[ScalarField]) -> Result<ScalarField> {
    let mut out = f.clone();
    for mode in kernel {
        let c = mode.dot(&out)?;
        out = out.lin_comb(1.0, mode, -c)?;
    }
    Ok(out)
}

fn solve_krylov(
    system: &QuantumSystem,
    rhs: &ScalarField,
    method: EllipticMethod,
    kernel: Vec<ScalarField>,
) -> Result<EllipticSolution> {
    let grid = rhs.grid().clone();
    let projected = project_out(rhs, &kernel)?;
    if rhs.norm_l2() > 0.0 {
        let component = projected.sub(rhs)?.norm_l2() / rhs.norm_l2();
        if component > COMPATIBILITY_TOLERANCE {
            return Err(Error::IncompatibleRhs { component });
        }
    }
    // Solve H C = -rhs.
    let b: Vec<f64> = projected.data().iter().map(|x| -x).collect();
    let apply = |x: &[f64]| -> Vec<f64> {
        let f = ScalarField::from_raw(grid.clone(), x.to_vec());
        system
            .hamiltonian_real(&f)
            .expect("finite iterate on the system grid")
            .into_data()
    };
    // Spectral preconditioner: inverse of the kinetic term plus the mean
    // potential magnitude, which keeps it positive definite.
    let k = system.params().kinetic_coefficient();
    let v = system.potential().sampled();
    let shift = v.data().iter().map(|x| x.abs()).sum::<f64>() / v.data().len() as f64;
    let symbol = laplacian_symbol(system.ops(), &grid);
    let precondition = |r: &[f64]| -> Vec<f64> {
        let mut buf: Vec<Complex64> = r.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        fft_nd(&grid, &mut buf, false);
        for (z, lap) in buf.iter_mut().zip(&symbol) {
            *z /= -k * lap + shift;
        }
        fft_nd(&grid, &mut buf, true);
        buf.into_iter().map(|z| z.re).collect()
    };
    let max_iterations = 20 * grid.len() + 1000;
    // Aim an order below the contract so the projected residual check has
    // headroom after the kernel projection. Long single runs stagnate near a
    // small eigenvalue as the Lanczos basis loses orthogonality, so solve in
    // refinement rounds of moderate accuracy on the current residual.
    let tolerance = 0.1 * ELLIPTIC_TOLERANCE;
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x = vec![0.0; b.len()];
    let mut residual = b.clone();
    let mut iterations = 0;
    for _ in 0..REFINEMENT_ROUNDS {
        let r_norm = residual.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r_norm <= tolerance * b_norm {
            break;
        }
        let inner = (tolerance * b_norm / r_norm).max(REFINEMENT_TOLERANCE);
        let (d, SolveStats { iterations: n, .. }) = match method {
            EllipticMethod::ConjugateGradient => {
                conjugate_gradient(&apply, &precondition, &residual, inner, max_iterations)?
            }
            _ => minres(&apply, &precondition, &residual, inner, max_iterations)?,
        };
        iterations += n;
        for (xi, di) in x.iter_mut().zip(&d) {
            *xi += di;
        }
        let ax = apply(&x);
        residual = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    }
    let field = project_out(&ScalarField::new(grid.clone(), x)?, &kernel)?;
    let zero_modes = kernel.len();
    finish(system, field, &projected, method, iterations, zero_modes)
}

fn finish(
    system: &QuantumSystem,
    field: ScalarField,
    projected_rhs: &ScalarField,
    method: EllipticMethod,
    iterations: usize,
    zero_modes: usize,
) -> Result<EllipticSolution> {
    let rhs_norm = projected_rhs.norm_l2();
    let residual = system.wave_operator(&field)?.sub(projected_rhs)?.norm_l2();
    let relative_residual = if rhs_norm > 0.0 { residual / rhs_norm } else { residual };
    if relative_residual > ELLIPTIC_TOLERANCE {
        return Err(Error::NoConvergence {
            iterations,
            residual: relative_residual,
        });
    }
    Ok(EllipticSolution {
        field,
        method,
        iterations,
        relative_residual,
        zero_modes,
    })
}

/// Reconstructed potential trajectory with its error budget.
#[derive(Debug, Clone)]
pub struct PhiReconstruction {
    pub states: Trajectory<PhiState>,
    /// Relative residual of the elliptic solve for `C`.
    pub elliptic_residual: f64,
    /// Absolute elliptic error carried into `Re psi`: `residual * ||Re psi(0)||`.
    pub elliptic_error: f64,
    /// Richardson estimate of the largest trapezoid error in `Re psi`
    /// (L2 norm), over the even samples.
    pub quadrature_error: f64,
}

/// `phi(t) = (1/hbar) int_0^t Im psi + C`, `phi'(t) = Im psi(t) / hbar`,
/// with `L C = -Re psi(0)`.
pub fn reconstruct_phi(system: &QuantumSystem, trajectory: &Trajectory<ComplexField>) -> Result<PhiReconstruction> {
    let hbar = system.params().hbar();
    let psi0 = &trajectory.snapshots()[0];
    same_grid(system.grid(), psi0.grid())?;
    let re0 = psi0.re();
    let solution = solve_elliptic_detailed(system, &re0.scale(-1.0))?;
    let c = solution.field;

    let p: Vec<ScalarField> = trajectory.snapshots().iter().map(ComplexField::im).collect();
    let dt = trajectory.dt();
    let integrals = time_integrate(&p, dt)?;
    let mut quadrature_error = 0.0f64;
    for (_, err) in quadrature_error_fields(&p, &integrals, dt)? {
        let mapped = system.wave_operator(&err)?.scale(1.0 / hbar);
        quadrature_error = quadrature_error.max(mapped.norm_l2());
    }
    let states = integrals
        .into_iter()
        .zip(&p)
        .map(|(integral, p_n)| {
            Ok(PhiState {
                phi: integral.lin_comb(1.0 / hbar, &c, 1.0)?,
                phi_dot: p_n.scale(1.0 / hbar),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PhiReconstruction {
        states: Trajectory::new(trajectory.times().to_vec(), states)?,
        elliptic_residual: solution.relative_residual,
        elliptic_error: solution.relative_residual * re0.norm_l2(),
        quadrature_error,
    })
}

/// Unique `K` with `curl K = B0`, `div K = 0` and zero mean:
/// `K(k) = i kappa x B0(k) / |kappa|^2`, where `kappa` is the backend's
/// first-derivative symbol.
pub fn curl_inverse(ops: Ops, b0: &VectorField) -> Result<VectorField> {
    let grid = b0.grid().clone();
    let scale = b0.norm_max();
    let mean = b0.mean();
    let mean_mag = (mean[0] * mean[0] + mean[1] * mean[1] + mean[2] * mean[2]).sqrt();
    if mean_mag > MEAN_TOLERANCE * scale {
        return Err(Error::NonzeroMean { mean: mean_mag });
    }
    let divergence = ops.divergence(b0)?.norm_l2();
    if divergence > SOLENOIDAL_TOLERANCE * ops.max_wavenumber(&grid) * b0.norm_l2() {
        return Err(Error::NonSolenoidal { divergence });
    }
    let kappa = ops.derivative_symbols(&grid);
    let spectra: Vec<Vec<Complex64>> = b0
        .components()
        .iter()
        .map(|c| {
            let mut buf: Vec<Complex64> = c.data().iter().map(|&x| Complex64::new(x, 0.0)).collect();
            fft_nd(&grid, &mut buf, false);
            buf
        })
        .collect();
    let mut out = vec![vec![Complex64::new(0.0, 0.0); grid.len()]; 3];
    let i = Complex64::new(0.0, 1.0);
    for idx in 0..grid.len() {
        let [a, b, c] = grid.unravel(idx);
        let q = [kappa[0][a], kappa[1][b], kappa[2][c]];
        let q2 = q[0] * q[0] + q[1] * q[1] + q[2] * q[2];
        if q2 == 0.0 {
            continue;
        }
        let bh = [spectra[0][idx], spectra[1][idx], spectra[2][idx]];
        let cross = [
            bh[2] * q[1] - bh[1] * q[2],
            bh[0] * q[2] - bh[2] * q[0],
            bh[1] * q[0] - bh[0] * q[1],
        ];
        for d in 0..3 {
            out[d][idx] = i * cross[d] / q2;
        }
    }
    let components: Vec<ScalarField> = out
        .into_iter()
        .map(|mut buf| {
            fft_nd(&grid, &mut buf, true);
            ScalarField::new(grid.clone(), buf.into_iter().map(|z| z.re).collect())
        })
        .collect::<Result<_>>()?;
    let [x, y, z]: [ScalarField; 3] = components.try_into().expect("three components");
    let k = VectorField::new(x, y, z)?;
    let residual = ops.curl(&k)?.sub(b0)?.norm_l2();
    let b_norm = b0.norm_l2();
    if residual > 1e-10 * b_norm {
        return Err(Error::InvalidArgument(format!(
            "magnetic field has modes the discrete curl cannot produce (residual {residual:e}, norm {b_norm:e})"
        )));
    }
    Ok(k)
}

/// Reconstructed vector-potential trajectory with its quadrature error.
#[derive(Debug, Clone)]
pub struct AReconstruction {
    pub states: Trajectory<PotentialAState>,
    /// Richardson estimate of the largest trapezoid error in `B` (L2 norm),
    /// over the even samples.
    pub quadrature_error: f64,
}

/// `A(t) = -c int_0^t E + K`, `A'(t) = -c E(t)`, with `K = curl_inverse(B(0))`.
pub fn reconstruct_a(system: &MaxwellSystem, trajectory: &Trajectory<EmState>) -> Result<AReconstruction> {
    let ops = system.ops();
    let c = system.c();
    let dt = trajectory.dt();
    let k = curl_inverse(ops, &trajectory.snapshots()[0].b)?;
    let mut integrated: Vec<Vec<ScalarField>> = Vec::with_capacity(3);
    let mut errors: Vec<Vec<(usize, ScalarField)>> = Vec::with_capacity(3);
    for d in 0..3 {
        let e_d: Vec<ScalarField> = trajectory
            .snapshots()
            .iter()
            .map(|s| s.e.component(d).clone())
            .collect();
        let integrals = time_integrate(&e_d, dt)?;
        errors.push(quadrature_error_fields(&e_d, &integrals, dt)?);
        integrated.push(integrals);
    }
    let mut quadrature_error = 0.0f64;
    for ((ex, ey), ez) in errors[0].iter().zip(&errors[1]).zip(&errors[2]) {
        let err = VectorField::new(ex.1.clone(), ey.1.clone(), ez.1.clone())?;
        quadrature_error = quadrature_error.max(ops.curl(&err)?.norm_l2() * c);
    }
    let states = (0..trajectory.len())
        .map(|n| {
            let int_e = VectorField::new(
                integrated[0][n].clone(),
                integrated[1][n].clone(),
                integrated[2][n].clone(),
            )?;
            Ok(PotentialAState {
                a: k.lin_comb(1.0, &int_e, -c)?,
                a_dot: trajectory.snapshots()[n].e.scale(-c),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AReconstruction {
        states: Trajectory::new(trajectory.times().to_vec(), states)?,
        quadrature_error,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::schrodinger::{Potential, QuantumParams};

    #[test]
    fn trajectory_validation() {
        let g = Grid::line(4, 1.0).unwrap();
        let f = || ScalarField::zeros(&g);
        assert!(Trajectory::new(vec![0.0], vec![f()]).is_err());
        assert!(Trajectory::new(vec![0.1, 0.2], vec![f(), f()]).is_err());
        assert!(Trajectory::new(vec![0.0, 0.1, 0.25], vec![f(), f(), f()]).is_err());
        assert!(Trajectory::new(vec![0.0, 0.1], vec![f()]).is_err());
        let t = Trajectory::uniform(0.1, vec![f(), f(), f()]).unwrap();
        assert_eq!(t.len(), 3);
        assert!((t.dt() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn integrate_constant_and_pair() {
        let g = Grid::line(4, 1.0).unwrap();
        let c = ScalarField::constant(&g, 2.5);
        let out = time_integrate(&[c.clone(), c.clone(), c.clone()], 0.3).unwrap();
        assert_eq!(out[0].norm_max(), 0.0);
        assert!((out[2].max() - 1.5).abs() < 1e-15);
        let a = ScalarField::constant(&g, 1.0);
        let b = ScalarField::constant(&g, 3.0);
        let pair = time_integrate(&[a, b], 0.5).unwrap();
        assert!((pair[1].max() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn free_single_mode_inversion() {
        let (l, hbar, m) = (2.0, 0.7, 1.3);
        let g = Grid::line(16, l).unwrap();
        let sys = QuantumSystem::new(QuantumParams::new(hbar, m).unwrap(), Potential::zero(&g), Ops::spectral());
        let q = 2.0 * PI / l;
        let rhs = ScalarField::from_fn(&g, |[x, _, _]| -(q * x).cos());
        let c = solve_elliptic(&sys, &rhs).unwrap();
        let expected = ScalarField::from_fn(&g, |[x, _, _]| 2.0 * m / (hbar * hbar) / (q * q) * (q * x).cos());
        assert!(c.sub(&expected).unwrap().norm_max() < 1e-12);
        assert!(matches!(
            solve_elliptic(&sys, &ScalarField::constant(&g, 1.0)),
            Err(Error::IncompatibleRhs { .. })
        ));
    }

    #[test]
    fn curl_inverse_shear_and_mean() {
        let l = 2.0;
        let g = Grid::cube(8, l).unwrap();
        let q = 2.0 * PI / l;
        let b = VectorField::from_fn(&g, |[x, _, _]| [0.0, 0.0, 0.6 * (q * x).cos()]).unwrap();
        for ops in [Ops::spectral(), Ops::central2()] {
            let k = curl_inverse(ops, &b).unwrap();
            assert!(ops.curl(&k).unwrap().sub(&b).unwrap().norm_max() < 1e-12);
            assert!(ops.divergence(&k).unwrap().norm_max() < 1e-12);
        }
        let k = curl_inverse(Ops::spectral(), &b).unwrap();
        let expected = VectorField::from_fn(&g, |[x, _, _]| [0.0, 0.6 / q * (q * x).sin(), 0.0]).unwrap();
        assert!(k.sub(&expected).unwrap().norm_max() < 1e-12);
        let uniform = VectorField::from_fn(&g, |_| [0.0, 0.0, 1.0]).unwrap();
        assert!(matches!(curl_inverse(Ops::spectral(), &uniform), Err(Error::NonzeroMean { .. })));
        let zero = VectorField::zeros(&g).unwrap();
        assert_eq!(curl_inverse(Ops::spectral(), &zero).unwrap().norm_max(), 0.0);
    }

    #[test]
    fn curl_inverse_rejects_divergence() {
        let g = Grid::cube(8, 1.0).unwrap();
        let b = VectorField::from_fn(&g, |[x, _, _]| [(2.0 * PI * x).sin(), 0.0, 0.0]).unwrap();
        assert!(matches!(curl_inverse(Ops::spectral(), &b), Err(Error::NonSolenoidal { .. })));
    }
}

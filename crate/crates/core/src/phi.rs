//! The real wave-function potential `phi`.
//!
//! `phi` obeys `hbar^2 phi'' + L^2 phi = 0` with `L = (hbar^2/2m) lap - V`,
//! and generates a Schrodinger solution through
//! `psi = -L phi + i hbar phi'`. The probability density `|psi|^2` equals
//! `2 hbar` times the field's energy density `(hbar/2) phi'^2 + (1/2hbar)(L phi)^2`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{same_grid, ComplexField, ScalarField};
use crate::schrodinger::QuantumSystem;

/// Default fraction of the Verlet stability limit used for automatic time steps.
pub const DEFAULT_SAFETY: f64 = 0.2;

/// Relative tolerance for accepting a gauge function as a kernel element.
pub const GAUGE_KERNEL_TOLERANCE: f64 = 1e-10;

/// `phi` and its time derivative. The conjugate momentum is `hbar * phi_dot`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiState {
    pub phi: ScalarField,
    pub phi_dot: ScalarField,
}

impl PhiState {
    pub fn new(phi: ScalarField, phi_dot: ScalarField) -> Result<Self> {
        same_grid(phi.grid(), phi_dot.grid())?;
        Ok(Self { phi, phi_dot })
    }

    pub fn zeros(system: &QuantumSystem) -> Self {
        let z = ScalarField::zeros(system.grid());
        Self {
            phi: z.clone(),
            phi_dot: z,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyDensity {
    pub kinetic: ScalarField,
    pub potential: ScalarField,
    pub total: ScalarField,
}

/// `phi'' = -(1/hbar^2) L(L phi)`.
pub fn acceleration(system: &QuantumSystem, state: &PhiState) -> Result<ScalarField> {
    let hbar = system.params().hbar();
    let l1 = system.wave_operator(&state.phi)?;
    let l2 = system.wave_operator(&l1)?;
    Ok(l2.scale(-1.0 / (hbar * hbar)))
}

/// Hard Verlet stability limit `2 hbar / E_max`.
pub fn stability_limit(system: &QuantumSystem) -> f64 {
    2.0 * system.params().hbar() / system.energy_bound()
}

/// `safety * 2 hbar / E_max`, with `E_max` bounding the spectrum of `H`.
pub fn stable_dt(system: &QuantumSystem, safety: f64) -> f64 {
    safety * stability_limit(system)
}

fn check_dt(system: &QuantumSystem, dt: f64) -> Result<()> {
    let bound = stability_limit(system);
    if !(dt.is_finite() && dt > 0.0) || dt > bound {
        return Err(Error::Unstable { dt, bound });
    }
    Ok(())
}

/// One kick-drift-kick velocity-Verlet step.
pub fn verlet_step(system: &QuantumSystem, state: &PhiState, dt: f64) -> Result<PhiState> {
    let mut integrator = PhiIntegrator::new(system, state.clone(), dt)?;
    integrator.step()?;
    Ok(integrator.into_state())
}

/// Velocity-Verlet integrator that carries the acceleration between steps,
/// so each step costs one application of `L^2`.
#[derive(Debug, Clone)]
pub struct PhiIntegrator<'a> {
    system: &'a QuantumSystem,
    state: PhiState,
    accel: ScalarField,
    dt: f64,
}

impl<'a> PhiIntegrator<'a> {
    pub fn new(system: &'a QuantumSystem, state: PhiState, dt: f64) -> Result<Self> {
        check_dt(system, dt)?;
        same_grid(system.grid(), state.phi.grid())?;
        let accel = acceleration(system, &state)?;
        Ok(Self {
            system,
            state,
            accel,
            dt,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn state(&self) -> &PhiState {
        &self.state
    }

    pub fn into_state(self) -> PhiState {
        self.state
    }

    pub fn step(&mut self) -> Result<()> {
        let h = 0.5 * self.dt;
        let dt = self.dt;
        let half_v = self.state.phi_dot.lin_comb(1.0, &self.accel, h)?;
        let phi = self.state.phi.lin_comb(1.0, &half_v, dt)?;
        let next = PhiState {
            phi,
            phi_dot: half_v,
        };
        let accel = acceleration(self.system, &next)?;
        let phi_dot = next.phi_dot.lin_comb(1.0, &accel, h)?;
        self.state = PhiState {
            phi: next.phi,
            phi_dot,
        };
        self.accel = accel;
        Ok(())
    }
}

/// `psi = -L phi + i hbar phi'`.
pub fn to_wavefunction(system: &QuantumSystem, state: &PhiState) -> Result<ComplexField> {
    let re = system.wave_operator(&state.phi)?.scale(-1.0);
    let im = state.phi_dot.scale(system.params().hbar());
    ComplexField::from_parts(&re, &im)
}

/// Closed-form potential of the stationary state `psi_n exp(-i E_n t / hbar)`:
/// `phi = (psi_n / E_n) cos(E_n t / hbar)`, `phi' = -(psi_n / hbar) sin(E_n t / hbar)`.
pub fn stationary_phi(
    system: &QuantumSystem,
    psi_n: &ScalarField,
    energy: f64,
    t: f64,
) -> Result<PhiState> {
    same_grid(system.grid(), psi_n.grid())?;
    let floor = 1e-12 * system.energy_bound();
    if energy.abs() <= floor {
        return Err(Error::InvalidArgument(format!(
            "stationary potential needs a nonzero energy; |E| = {:e} <= {floor:e} lies in the gauge sector",
            energy.abs()
        )));
    }
    let hbar = system.params().hbar();
    let w = energy * t / hbar;
    Ok(PhiState {
        phi: psi_n.scale(w.cos() / energy),
        phi_dot: psi_n.scale(-w.sin() / hbar),
    })
}

/// Kinetic `(hbar/2) phi'^2` and potential `(1/2hbar)(L phi)^2` densities.
pub fn energy_density(system: &QuantumSystem, state: &PhiState) -> Result<EnergyDensity> {
    let hbar = system.params().hbar();
    let lphi = system.wave_operator(&state.phi)?;
    let kinetic = state.phi_dot.map(|v| 0.5 * hbar * v * v);
    let potential = lphi.map(|v| 0.5 * v * v / hbar);
    let total = kinetic.add(&potential)?;
    Ok(EnergyDensity {
        kinetic,
        potential,
        total,
    })
}

/// `(hbar/2) phi'^2 - (1/2hbar)(L phi)^2`.
pub fn lagrangian_density(system: &QuantumSystem, state: &PhiState) -> Result<ScalarField> {
    let e = energy_density(system, state)?;
    e.kinetic.sub(&e.potential)
}

/// Shifts `phi` by `alpha`, which must satisfy `L alpha = 0` to within
/// `GAUGE_KERNEL_TOLERANCE * ||alpha|| * E_max`.
pub fn gauge_shift(system: &QuantumSystem, state: &PhiState, alpha: &ScalarField) -> Result<PhiState> {
    let residual = system.wave_operator(alpha)?.norm_l2();
    let tolerance = GAUGE_KERNEL_TOLERANCE * alpha.norm_l2() * system.energy_bound();
    if residual > tolerance {
        return Err(Error::NotInKernel {
            residual,
            tolerance,
        });
    }
    Ok(PhiState {
        phi: state.phi.add(alpha)?,
        phi_dot: state.phi_dot.clone(),
    })
}

/// Pointwise `max |psi^* psi - 2 hbar (T + U)| / max |psi|^2` for a state.
pub fn probability_energy_residual(system: &QuantumSystem, state: &PhiState) -> Result<f64> {
    let psi = to_wavefunction(system, state)?;
    let e = energy_density(system, state)?;
    let two_hbar = 2.0 * system.params().hbar();
    let scale = psi.norm_max().powi(2);
    let diff = psi
        .data()
        .iter()
        .zip(e.total.data())
        .fold(0.0f64, |m, (z, et)| m.max((z.norm_sqr() - two_hbar * et).abs()));
    Ok(if scale > 0.0 { diff / scale } else { diff })
}

/// `hbar^2 phi'' + L^2 phi` given a second time derivative estimate.
pub fn equation_residual(
    system: &QuantumSystem,
    phi: &ScalarField,
    phi_ddot: &ScalarField,
) -> Result<ScalarField> {
    let hbar = system.params().hbar();
    let l2 = system.wave_operator(&system.wave_operator(phi)?)?;
    phi_ddot.lin_comb(hbar * hbar, &l2, 1.0)
}

/// Reassembles a phase-rotated stationary wave function, for comparisons.
pub fn stationary_wavefunction(psi_n: &ScalarField, energy: f64, hbar: f64, t: f64) -> ComplexField {
    let phase = Complex64::from_polar(1.0, -energy * t / hbar);
    ComplexField::from_real(psi_n).scale(phase)
}

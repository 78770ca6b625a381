//! Electrodynamics in field form and in vector-potential form.
//!
//! The first-order system evolves `(E, B)` by
//! `dE/dt = c curl B - J`, `dB/dt = -c curl E`, with the divergence
//! equations imposed only on the initial data. The second-order system
//! evolves `A` by `d2A/dt2 = c^2 (lap A - grad div A) + c J` and maps back
//! through `B = curl A`, `E = -(1/c) dA/dt`.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::expr::{Compiled, Expression};
use crate::grid::{same_grid, Grid, ScalarField, VectorField};
use crate::ops::Ops;

/// RK4 stability interval on the imaginary axis (about 2.83), rounded down.
pub const RK4_STABILITY: f64 = 2.8;
/// Verlet stability interval for an undamped oscillator.
pub const VERLET_STABILITY: f64 = 2.0;
/// Default fraction of the stability limit used for automatic time steps.
pub const DEFAULT_SAFETY: f64 = 0.5;
/// Relative continuity tolerance for source specifications.
pub const CONTINUITY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct EmState {
    pub e: VectorField,
    pub b: VectorField,
}

impl EmState {
    pub fn new(e: VectorField, b: VectorField) -> Result<Self> {
        same_grid(e.grid(), b.grid())?;
        Ok(Self { e, b })
    }

    pub fn zeros(grid: &Grid) -> Result<Self> {
        Ok(Self {
            e: VectorField::zeros(grid)?,
            b: VectorField::zeros(grid)?,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.e.grid()
    }

    fn axpy(&self, a: f64, other: &Self) -> Result<Self> {
        Ok(Self {
            e: self.e.lin_comb(1.0, &other.e, a)?,
            b: self.b.lin_comb(1.0, &other.b, a)?,
        })
    }

    /// Root of the summed squared L2 norms of `E` and `B`.
    pub fn norm_l2(&self) -> f64 {
        (self.e.norm_l2().powi(2) + self.b.norm_l2().powi(2)).sqrt()
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(-1.0, other)
    }
}

/// `A` and its time derivative. `E = -(1/c) a_dot`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialAState {
    pub a: VectorField,
    pub a_dot: VectorField,
}

impl PotentialAState {
    pub fn new(a: VectorField, a_dot: VectorField) -> Result<Self> {
        same_grid(a.grid(), a_dot.grid())?;
        Ok(Self { a, a_dot })
    }

    pub fn grid(&self) -> &Grid {
        self.a.grid()
    }
}

/// Charge and current densities given as expressions of `(x, y, z, t)`.
#[derive(Debug, Clone)]
pub struct SourceSpec {
    inner: Option<CompiledSources>,
}

#[derive(Debug, Clone)]
struct CompiledSources {
    rho: Compiled,
    current: [Compiled; 3],
    sources: [String; 4],
}

impl SourceSpec {
    pub fn vacuum() -> Self {
        Self { inner: None }
    }

    pub fn new(
        rho: &Expression,
        current: [&Expression; 3],
        constants: &HashMap<String, f64>,
    ) -> Result<Self> {
        let slots = ["x", "y", "z", "t"];
        Ok(Self {
            inner: Some(CompiledSources {
                rho: rho.compile(constants, &slots)?,
                current: [
                    current[0].compile(constants, &slots)?,
                    current[1].compile(constants, &slots)?,
                    current[2].compile(constants, &slots)?,
                ],
                sources: [
                    rho.source().to_string(),
                    current[0].source().to_string(),
                    current[1].source().to_string(),
                    current[2].source().to_string(),
                ],
            }),
        })
    }

    pub fn is_vacuum(&self) -> bool {
        self.inner.is_none()
    }

    /// Source texts `[rho, Jx, Jy, Jz]`, or `None` for vacuum.
    pub fn sources(&self) -> Option<&[String; 4]> {
        self.inner.as_ref().map(|s| &s.sources)
    }

    pub fn rho(&self, grid: &Grid, t: f64) -> Result<ScalarField> {
        match &self.inner {
            None => Ok(ScalarField::zeros(grid)),
            Some(s) => s.rho.sample(grid, t),
        }
    }

    pub fn current(&self, grid: &Grid, t: f64) -> Result<VectorField> {
        match &self.inner {
            None => VectorField::zeros(grid),
            Some(s) => VectorField::new(
                s.current[0].sample(grid, t)?,
                s.current[1].sample(grid, t)?,
                s.current[2].sample(grid, t)?,
            ),
        }
    }

    /// `(||d_t rho + div J||_max, scale)` with `d_t rho` from a centered
    /// difference of step `h`. The scale is the larger of the two terms.
    pub fn continuity_residual(&self, grid: &Grid, ops: Ops, t: f64, h: f64) -> Result<(f64, f64)> {
        if self.is_vacuum() {
            return Ok((0.0, 0.0));
        }
        let drho = self
            .rho(grid, t + h)?
            .sub(&self.rho(grid, t - h)?)?
            .scale(0.5 / h);
        let div_j = ops.divergence(&self.current(grid, t)?)?;
        let residual = drho.add(&div_j)?.norm_max();
        Ok((residual, drho.norm_max().max(div_j.norm_max())))
    }

    /// Rejects sources that violate continuity at any of `times`, checking
    /// with a time difference of `dt / 100`.
    pub fn validate(&self, grid: &Grid, ops: Ops, times: &[f64], dt: f64) -> Result<()> {
        let h = dt / 100.0;
        for &t in times {
            let (residual, scale) = self.continuity_residual(grid, ops, t, h)?;
            if residual > CONTINUITY_TOLERANCE * scale {
                return Err(Error::ContinuityViolation { t, residual, scale });
            }
        }
        Ok(())
    }
}

/// Speed of light plus operator backend.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxwellSystem {
    c: f64,
    ops: Ops,
}

impl MaxwellSystem {
    pub fn new(c: f64, ops: Ops) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidArgument(format!("c must be positive, got {c}")));
        }
        Ok(Self { c, ops })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn ops(&self) -> Ops {
        self.ops
    }

    /// `safety * 2.8 / (c k_max)`.
    pub fn rk4_dt(&self, grid: &Grid, safety: f64) -> f64 {
        safety * RK4_STABILITY / (self.c * self.ops.max_wavenumber(grid))
    }

    /// `safety * 2 / (c k_max)`.
    pub fn verlet_dt(&self, grid: &Grid, safety: f64) -> f64 {
        safety * VERLET_STABILITY / (self.c * self.ops.max_wavenumber(grid))
    }

    fn check_dt(dt: f64, bound: f64) -> Result<()> {
        if !(dt.is_finite() && dt > 0.0) || dt > bound {
            return Err(Error::Unstable { dt, bound });
        }
        Ok(())
    }

    /// `(dE/dt, dB/dt) = (c curl B - J, -c curl E)`.
    pub fn em_rhs(&self, s: &EmState, current: &VectorField) -> Result<EmState> {
        same_grid(s.grid(), current.grid())?;
        let curl_b = self.ops.curl(&s.b)?;
        let curl_e = self.ops.curl(&s.e)?;
        Ok(EmState {
            e: curl_b.lin_comb(self.c, current, -1.0)?,
            b: curl_e.scale(-self.c),
        })
    }

    /// Classical RK4 with sources sampled at the stage times.
    pub fn rk4_step(&self, s: &EmState, sources: &SourceSpec, t: f64, dt: f64) -> Result<EmState> {
        let grid = s.grid();
        Self::check_dt(dt, self.rk4_dt(grid, 1.0))?;
        let j0 = sources.current(grid, t)?;
        let jh = sources.current(grid, t + 0.5 * dt)?;
        let j1 = sources.current(grid, t + dt)?;
        let k1 = self.em_rhs(s, &j0)?;
        let k2 = self.em_rhs(&s.axpy(0.5 * dt, &k1)?, &jh)?;
        let k3 = self.em_rhs(&s.axpy(0.5 * dt, &k2)?, &jh)?;
        let k4 = self.em_rhs(&s.axpy(dt, &k3)?, &j1)?;
        s.axpy(dt / 6.0, &k1)?
            .axpy(dt / 3.0, &k2)?
            .axpy(dt / 3.0, &k3)?
            .axpy(dt / 6.0, &k4)
    }

    /// `(||div E - rho||_max, ||div B||_max)`.
    pub fn constraint_residual(&self, s: &EmState, rho: &ScalarField) -> Result<(f64, f64)> {
        let div_e = self.ops.divergence(&s.e)?;
        let div_b = self.ops.divergence(&s.b)?;
        Ok((div_e.sub(rho)?.norm_max(), div_b.norm_max()))
    }

    /// Residual of `(i/c) dW/dt + curl W - J/c` for `W = B + iE`, with
    /// `dW/dt` taken from [`MaxwellSystem::em_rhs`]. Returns
    /// `(max-norm residual, scale)` where the scale is the largest term.
    pub fn w_residual(&self, s: &EmState, sources: &SourceSpec, t: f64) -> Result<(f64, f64)> {
        let current = sources.current(s.grid(), t)?;
        let rate = self.em_rhs(s, &current)?;
        let inv_c = 1.0 / self.c;
        // (i/c)(dB + i dE) = -dE/c + i dB/c
        let curl_w_re = self.ops.curl(&s.b)?;
        let curl_w_im = self.ops.curl(&s.e)?;
        let re = rate
            .e
            .scale(-inv_c)
            .add(&curl_w_re)?
            .lin_comb(1.0, &current, -inv_c)?;
        let im = rate.b.scale(inv_c).add(&curl_w_im)?;
        let mut residual = 0.0f64;
        for k in 0..3 {
            let (r, i) = (re.component(k).data(), im.component(k).data());
            for (a, b) in r.iter().zip(i) {
                residual = residual.max(a.hypot(*b));
            }
        }
        let scale = [
            rate.e.norm_max() * inv_c,
            rate.b.norm_max() * inv_c,
            curl_w_re.norm_max(),
            curl_w_im.norm_max(),
            current.norm_max() * inv_c,
        ]
        .into_iter()
        .fold(0.0, f64::max);
        Ok((residual, scale))
    }

    /// `c^2 (lap A - grad div A) + c J`.
    pub fn a_acceleration(&self, s: &PotentialAState, current: &VectorField) -> Result<VectorField> {
        let lap = self.ops.vector_laplacian(&s.a)?;
        let grad_div = self.ops.gradient(&self.ops.divergence(&s.a)?)?;
        lap.sub(&grad_div)?
            .lin_comb(self.c * self.c, current, self.c)
    }

    /// `-c^2 curl curl A + c J`, the same operator through the curl-curl identity.
    pub fn a_acceleration_curl_form(
        &self,
        s: &PotentialAState,
        current: &VectorField,
    ) -> Result<VectorField> {
        let cc = self.ops.curl(&self.ops.curl(&s.a)?)?;
        cc.lin_comb(-self.c * self.c, current, self.c)
    }

    /// One velocity-Verlet step of the potential equation.
    pub fn a_verlet_step(
        &self,
        s: &PotentialAState,
        sources: &SourceSpec,
        t: f64,
        dt: f64,
    ) -> Result<PotentialAState> {
        let mut integrator = PotentialIntegrator::new(*self, s.clone(), sources, t, dt)?;
        integrator.step()?;
        Ok(integrator.into_state())
    }

    /// `B = curl A`, `E = -(1/c) dA/dt`.
    pub fn a_to_fields(&self, s: &PotentialAState) -> Result<EmState> {
        Ok(EmState {
            e: s.a_dot.scale(-1.0 / self.c),
            b: self.ops.curl(&s.a)?,
        })
    }

    /// `||d/dt div A + c rho||_max`.
    pub fn a_constraint_residual(&self, s: &PotentialAState, rho: &ScalarField) -> Result<f64> {
        let div = self.ops.divergence(&s.a_dot)?;
        Ok(div.lin_comb(1.0, rho, self.c)?.norm_max())
    }

    /// `(H, H')` with
    /// `H = int (c/2) B.curl B + (c/2) E.curl E - B.J` and
    /// `H' = int (c/2)(E^2 + B^2)`.
    pub fn em_hamiltonians(&self, s: &EmState, current: Option<&VectorField>) -> Result<(f64, f64)> {
        let half_c = 0.5 * self.c;
        let mut h = half_c * (s.b.dot(&self.ops.curl(&s.b)?)? + s.e.dot(&self.ops.curl(&s.e)?)?);
        if let Some(j) = current {
            h -= s.b.dot(j)?;
        }
        let h_prime = half_c * (s.e.dot(&s.e)? + s.b.dot(&s.b)?);
        Ok((h, h_prime))
    }

    /// `A -> A + grad alpha` with static `alpha`.
    pub fn gauge_shift_a(&self, s: &PotentialAState, alpha: &ScalarField) -> Result<PotentialAState> {
        Ok(PotentialAState {
            a: s.a.add(&self.ops.gradient(alpha)?)?,
            a_dot: s.a_dot.clone(),
        })
    }
}

/// Velocity-Verlet integrator for the potential equation that carries the
/// acceleration and the clock between steps.
#[derive(Debug, Clone)]
pub struct PotentialIntegrator<'a> {
    system: MaxwellSystem,
    sources: &'a SourceSpec,
    state: PotentialAState,
    accel: VectorField,
    t: f64,
    dt: f64,
}

impl<'a> PotentialIntegrator<'a> {
    pub fn new(
        system: MaxwellSystem,
        state: PotentialAState,
        sources: &'a SourceSpec,
        t: f64,
        dt: f64,
    ) -> Result<Self> {
        MaxwellSystem::check_dt(dt, system.verlet_dt(state.grid(), 1.0))?;
        let j = sources.current(state.grid(), t)?;
        let accel = system.a_acceleration(&state, &j)?;
        Ok(Self {
            system,
            sources,
            state,
            accel,
            t,
            dt,
        })
    }

    pub fn state(&self) -> &PotentialAState {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn into_state(self) -> PotentialAState {
        self.state
    }

    pub fn step(&mut self) -> Result<()> {
        let h = 0.5 * self.dt;
        let half_v = self.state.a_dot.lin_comb(1.0, &self.accel, h)?;
        let a = self.state.a.lin_comb(1.0, &half_v, self.dt)?;
        let t_next = self.t + self.dt;
        let j = self.sources.current(a.grid(), t_next)?;
        let mid = PotentialAState { a, a_dot: half_v };
        let accel = self.system.a_acceleration(&mid, &j)?;
        let a_dot = mid.a_dot.lin_comb(1.0, &accel, h)?;
        self.state = PotentialAState { a: mid.a, a_dot };
        self.accel = accel;
        self.t = t_next;
        Ok(())
    }
}

/// Fields of the vacuum plane wave `B = b0 cos(k.x - c|k|t) n`,
/// `E = b0 cos(k.x - c|k|t) (n x khat)`, for a unit polarization `n`
/// orthogonal to `k`.
pub fn plane_wave(
    grid: &Grid,
    c: f64,
    k: [f64; 3],
    polarization: [f64; 3],
    amplitude: f64,
    t: f64,
) -> Result<EmState> {
    let kn = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
    let khat = [k[0] / kn, k[1] / kn, k[2] / kn];
    let n = polarization;
    let e_dir = [
        n[1] * khat[2] - n[2] * khat[1],
        n[2] * khat[0] - n[0] * khat[2],
        n[0] * khat[1] - n[1] * khat[0],
    ];
    let w = c * kn;
    let profile = |x: [f64; 3]| amplitude * (k[0] * x[0] + k[1] * x[1] + k[2] * x[2] - w * t).cos();
    let b = VectorField::from_fn(grid, |x| {
        let p = profile(x);
        [p * n[0], p * n[1], p * n[2]]
    })?;
    let e = VectorField::from_fn(grid, |x| {
        let p = profile(x);
        [p * e_dir[0], p * e_dir[1], p * e_dir[2]]
    })?;
    EmState::new(e, b)
}

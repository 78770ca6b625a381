//! Discrete differential operators on periodic grids.
//!
//! Two backends share one interface. `Spectral` differentiates in Fourier
//! space; `Central2` uses second-order central differences. First
//! derivatives set the Nyquist mode to zero so real fields stay real. The
//! spectral Laplacian keeps the Nyquist mode with eigenvalue `-k_nyq^2`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid, ScalarField, VectorField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum Backend {
    #[default]
    Spectral,
    Central2,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Spectral => "spectral",
            Backend::Central2 => "central2",
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral" => Ok(Backend::Spectral),
            "central2" => Ok(Backend::Central2),
            other => Err(Error::InvalidArgument(format!(
                "unknown operator backend `{other}` (expected spectral or central2)"
            ))),
        }
    }
}

/// Cached FFT plans keyed by length and direction.
type PlanCache = (FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>);

thread_local! {
    static PLANS: RefCell<PlanCache> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANS.with(|cell| {
        let mut guard = cell.borrow_mut();
        let (planner, cache) = &mut *guard;
        cache
            .entry((n, inverse))
            .or_insert_with(|| {
                if inverse {
                    planner.plan_fft_inverse(n)
                } else {
                    planner.plan_fft_forward(n)
                }
            })
            .clone()
    })
}

/// In-place multidimensional FFT. The inverse includes the 1/N factor.
pub(crate) fn fft_nd(grid: &Grid, data: &mut [Complex64], inverse: bool) {
    let [nx, ny, nz] = grid.points();
    let dims = grid.dims();

    // x lines are contiguous
    plan(nx, inverse).process(data);

    let mut line = Vec::new();
    if dims >= 2 {
        let fft = plan(ny, inverse);
        line.resize(ny, Complex64::new(0.0, 0.0));
        for iz in 0..nz {
            for ix in 0..nx {
                let base = ix + nx * ny * iz;
                for (iy, v) in line.iter_mut().enumerate() {
                    *v = data[base + nx * iy];
                }
                fft.process(&mut line);
                for (iy, v) in line.iter().enumerate() {
                    data[base + nx * iy] = *v;
                }
            }
        }
    }
    if dims == 3 {
        let fft = plan(nz, inverse);
        line.resize(nz, Complex64::new(0.0, 0.0));
        let stride = nx * ny;
        for base in 0..stride {
            for (iz, v) in line.iter_mut().enumerate() {
                *v = data[base + stride * iz];
            }
            fft.process(&mut line);
            for (iz, v) in line.iter().enumerate() {
                data[base + stride * iz] = *v;
            }
        }
    }
    if inverse {
        let s = 1.0 / grid.len() as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }
}

/// Signed integer mode number for FFT bin `j` of an `n`-point axis.
fn mode(j: usize, n: usize) -> isize {
    if j <= n / 2 {
        j as isize
    } else {
        j as isize - n as isize
    }
}

/// Angular wavenumbers of one axis for first derivatives (Nyquist zeroed).
fn derivative_wavenumbers(n: usize, length: f64) -> Vec<f64> {
    (0..n)
        .map(|j| {
            if j == n / 2 {
                0.0
            } else {
                2.0 * PI * mode(j, n) as f64 / length
            }
        })
        .collect()
}

/// Squared wavenumbers of one axis for the Laplacian (Nyquist kept).
fn laplacian_wavenumbers_sq(n: usize, length: f64) -> Vec<f64> {
    (0..n)
        .map(|j| {
            let k = 2.0 * PI * mode(j, n) as f64 / length;
            k * k
        })
        .collect()
}

/// Fourier-space tables for a grid.
pub(crate) struct Wavenumbers {
    /// Per-axis first-derivative wavenumbers (Nyquist zeroed).
    pub deriv: [Vec<f64>; 3],
    /// Per-axis squared wavenumbers with Nyquist kept.
    pub lap_sq: [Vec<f64>; 3],
}

impl Wavenumbers {
    pub fn new(grid: &Grid) -> Self {
        let p = grid.points();
        let l = grid.lengths();
        let mk = |d: usize| {
            if d < grid.dims() {
                (derivative_wavenumbers(p[d], l[d]), laplacian_wavenumbers_sq(p[d], l[d]))
            } else {
                (vec![0.0], vec![0.0])
            }
        };
        let (d0, s0) = mk(0);
        let (d1, s1) = mk(1);
        let (d2, s2) = mk(2);
        Self {
            deriv: [d0, d1, d2],
            lap_sq: [s0, s1, s2],
        }
    }
}

fn to_complex(f: &ScalarField) -> Vec<Complex64> {
    f.data().iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

fn real_part(grid: &Grid, data: Vec<Complex64>) -> ScalarField {
    ScalarField::from_raw(grid.clone(), data.into_iter().map(|z| z.re).collect())
}

/// Applies a diagonal Fourier multiplier to a real field.
fn spectral_multiply(f: &ScalarField, multiplier: impl Fn([usize; 3]) -> Complex64) -> ScalarField {
    let grid = f.grid();
    let mut buf = to_complex(f);
    fft_nd(grid, &mut buf, false);
    for (i, v) in buf.iter_mut().enumerate() {
        *v *= multiplier(grid.unravel(i));
    }
    fft_nd(grid, &mut buf, true);
    real_part(grid, buf)
}

/// Shifted neighbour index along an axis with periodic wrap.
fn neighbour(grid: &Grid, index: usize, axis: usize, offset: isize) -> usize {
    let mut ijk = grid.unravel(index);
    let n = grid.points()[axis] as isize;
    ijk[axis] = ((ijk[axis] as isize + offset).rem_euclid(n)) as usize;
    grid.index(ijk[0], ijk[1], ijk[2])
}

/// Differential operators for one backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Ops {
    backend: Backend,
}

impl Ops {
    pub fn new(backend: Backend) -> Self {
        Self { backend }
    }

    pub fn spectral() -> Self {
        Self::new(Backend::Spectral)
    }

    pub fn central2() -> Self {
        Self::new(Backend::Central2)
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    fn check_size(&self, grid: &Grid) -> Result<()> {
        let (method, min) = match self.backend {
            Backend::Spectral => ("spectral", 4),
            Backend::Central2 => ("central2", 3),
        };
        for axis in 0..grid.dims() {
            let points = grid.points()[axis];
            if points < min {
                return Err(Error::GridTooSmall {
                    method,
                    axis,
                    points,
                });
            }
        }
        Ok(())
    }

    /// Laplacian of a real field.
    pub fn laplacian(&self, f: &ScalarField) -> Result<ScalarField> {
        let grid = f.grid();
        self.check_size(grid)?;
        Ok(match self.backend {
            Backend::Spectral => {
                let k = Wavenumbers::new(grid);
                spectral_multiply(f, |[a, b, c]| {
                    Complex64::new(-(k.lap_sq[0][a] + k.lap_sq[1][b] + k.lap_sq[2][c]), 0.0)
                })
            }
            Backend::Central2 => {
                let data = f.data();
                let mut out = vec![0.0; data.len()];
                for axis in 0..grid.dims() {
                    let inv_h2 = 1.0 / grid.spacing(axis).powi(2);
                    for (i, o) in out.iter_mut().enumerate() {
                        let up = data[neighbour(grid, i, axis, 1)];
                        let down = data[neighbour(grid, i, axis, -1)];
                        *o += (up - 2.0 * data[i] + down) * inv_h2;
                    }
                }
                ScalarField::from_raw(grid.clone(), out)
            }
        })
    }

    /// Laplacian of a complex field (real and imaginary parts independently).
    pub fn laplacian_complex(&self, f: &ComplexField) -> Result<ComplexField> {
        let grid = f.grid();
        self.check_size(grid)?;
        match self.backend {
            Backend::Spectral => {
                let k = Wavenumbers::new(grid);
                let mut buf = f.data().to_vec();
                fft_nd(grid, &mut buf, false);
                for (i, v) in buf.iter_mut().enumerate() {
                    let [a, b, c] = grid.unravel(i);
                    *v *= -(k.lap_sq[0][a] + k.lap_sq[1][b] + k.lap_sq[2][c]);
                }
                fft_nd(grid, &mut buf, true);
                Ok(ComplexField::from_raw(grid.clone(), buf))
            }
            Backend::Central2 => {
                let re = self.laplacian(&f.re())?;
                let im = self.laplacian(&f.im())?;
                ComplexField::from_parts(&re, &im)
            }
        }
    }

    /// Partial derivative along `axis`.
    pub fn partial(&self, f: &ScalarField, axis: usize) -> Result<ScalarField> {
        let grid = f.grid();
        if axis >= grid.dims() {
            return Err(Error::DimensionMismatch {
                expected: axis + 1,
                found: grid.dims(),
            });
        }
        self.check_size(grid)?;
        Ok(match self.backend {
            Backend::Spectral => {
                let k = Wavenumbers::new(grid);
                spectral_multiply(f, |ijk| Complex64::new(0.0, k.deriv[axis][ijk[axis]]))
            }
            Backend::Central2 => {
                let data = f.data();
                let inv_2h = 0.5 / grid.spacing(axis);
                let out = (0..data.len())
                    .map(|i| {
                        (data[neighbour(grid, i, axis, 1)] - data[neighbour(grid, i, axis, -1)])
                            * inv_2h
                    })
                    .collect();
                ScalarField::from_raw(grid.clone(), out)
            }
        })
    }

    /// Gradient of a field on a 3D grid.
    pub fn gradient(&self, f: &ScalarField) -> Result<VectorField> {
        f.grid().ensure_dims(3)?;
        Ok(VectorField::from_raw([
            self.partial(f, 0)?,
            self.partial(f, 1)?,
            self.partial(f, 2)?,
        ]))
    }

    pub fn divergence(&self, v: &VectorField) -> Result<ScalarField> {
        let [x, y, z] = v.components();
        self.partial(x, 0)?
            .add(&self.partial(y, 1)?)?
            .add(&self.partial(z, 2)?)
    }

    pub fn curl(&self, v: &VectorField) -> Result<VectorField> {
        let [x, y, z] = v.components();
        let cx = self.partial(z, 1)?.sub(&self.partial(y, 2)?)?;
        let cy = self.partial(x, 2)?.sub(&self.partial(z, 0)?)?;
        let cz = self.partial(y, 0)?.sub(&self.partial(x, 1)?)?;
        Ok(VectorField::from_raw([cx, cy, cz]))
    }

    /// Divergence of the gradient, built from the first-derivative
    /// operators. Differs from [`Ops::laplacian`] only in the Nyquist modes
    /// (spectral) or by the wide stencil (central2), and commutes exactly
    /// with `curl`, `divergence` and `gradient`.
    pub fn div_grad(&self, f: &ScalarField) -> Result<ScalarField> {
        let grid = f.grid();
        let mut out = ScalarField::zeros(grid);
        for axis in 0..grid.dims() {
            let d = self.partial(&self.partial(f, axis)?, axis)?;
            out = out.add(&d)?;
        }
        Ok(out)
    }

    /// Componentwise `div_grad` of a vector field.
    pub fn vector_laplacian(&self, v: &VectorField) -> Result<VectorField> {
        let [x, y, z] = v.components();
        Ok(VectorField::from_raw([
            self.div_grad(x)?,
            self.div_grad(y)?,
            self.div_grad(z)?,
        ]))
    }

    /// Max-norm of `curl(curl v) - (-lap v + grad(div v))`.
    pub fn curl_curl_identity_residual(&self, v: &VectorField) -> Result<f64> {
        let lhs = self.curl(&self.curl(v)?)?;
        let rhs = self
            .gradient(&self.divergence(v)?)?
            .sub(&self.vector_laplacian(v)?)?;
        Ok(lhs.sub(&rhs)?.norm_max())
    }

    /// Discrete `sum |grad f|^2 * cell volume`, consistent with
    /// [`Ops::laplacian`]: equals `-<f, lap f>` exactly in exact arithmetic.
    pub fn dirichlet_energy(&self, f: &ScalarField) -> Result<f64> {
        let grid = f.grid();
        self.check_size(grid)?;
        Ok(match self.backend {
            Backend::Spectral => {
                let k = Wavenumbers::new(grid);
                let mut buf = to_complex(f);
                fft_nd(grid, &mut buf, false);
                let n = grid.len() as f64;
                let s: f64 = buf
                    .iter()
                    .enumerate()
                    .map(|(i, z)| {
                        let [a, b, c] = grid.unravel(i);
                        (k.lap_sq[0][a] + k.lap_sq[1][b] + k.lap_sq[2][c]) * z.norm_sqr()
                    })
                    .sum();
                // Parseval: sum |f|^2 = (1/N) sum |f_hat|^2
                s / n * grid.cell_volume()
            }
            Backend::Central2 => {
                let data = f.data();
                let mut s = 0.0;
                for axis in 0..grid.dims() {
                    let inv_h = 1.0 / grid.spacing(axis);
                    for (i, v) in data.iter().enumerate() {
                        let g = (data[neighbour(grid, i, axis, 1)] - v) * inv_h;
                        s += g * g;
                    }
                }
                s * grid.cell_volume()
            }
        })
    }

    /// Per-axis Fourier symbol `kappa` of the first-derivative operator:
    /// `partial` multiplies mode `k` by `i * kappa(k)`. Unused axes hold `[0]`.
    pub fn derivative_symbols(&self, grid: &Grid) -> [Vec<f64>; 3] {
        let p = grid.points();
        let l = grid.lengths();
        let axis = |d: usize| -> Vec<f64> {
            if d >= grid.dims() {
                return vec![0.0];
            }
            match self.backend {
                Backend::Spectral => derivative_wavenumbers(p[d], l[d]),
                Backend::Central2 => {
                    let h = grid.spacing(d);
                    (0..p[d])
                        .map(|j| {
                            if j == p[d] / 2 {
                                0.0
                            } else {
                                (2.0 * PI * mode(j, p[d]) as f64 / l[d] * h).sin() / h
                            }
                        })
                        .collect()
                }
            }
        };
        [axis(0), axis(1), axis(2)]
    }

    /// Largest eigenvalue magnitude of the discrete Laplacian.
    pub fn laplacian_spectral_radius(&self, grid: &Grid) -> f64 {
        (0..grid.dims())
            .map(|d| {
                let h = grid.spacing(d);
                match self.backend {
                    Backend::Spectral => (PI / h).powi(2),
                    Backend::Central2 => 4.0 / (h * h),
                }
            })
            .sum()
    }

    /// Largest wavevector magnitude resolved by the first-derivative
    /// operators, used for wave-equation time-step bounds.
    pub fn max_wavenumber(&self, grid: &Grid) -> f64 {
        (0..grid.dims())
            .map(|d| {
                let h = grid.spacing(d);
                match self.backend {
                    Backend::Spectral => (PI / h).powi(2),
                    Backend::Central2 => 1.0 / (h * h),
                }
            })
            .sum::<f64>()
            .sqrt()
    }
}

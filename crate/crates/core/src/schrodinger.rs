//! Direct Schrodinger evolution, used as ground truth for the
//! wave-function potential.
//!
//! `H = -(hbar^2/2m) lap + V` acts on complex fields; the real "wave
//! operator" `L = (hbar^2/2m) lap - V = -H` is what the potential theory is
//! built from. Crank-Nicolson gives a unitary propagator on any grid, and a
//! dense eigendecomposition gives a machine-precision one on small grids.

use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::grid::{same_grid, ComplexField, Grid, ScalarField};
use crate::linalg::{cg_normal, SolveStats};
use crate::ops::Ops;

/// Largest grid for which dense diagonalization is attempted.
pub const DENSE_LIMIT: usize = 4096;

/// Contractual relative residual of each Crank-Nicolson linear solve.
pub const CN_TOLERANCE: f64 = 1e-12;

const CN_MAX_ITERATIONS: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantumParams {
    hbar: f64,
    mass: f64,
}

impl QuantumParams {
    pub fn new(hbar: f64, mass: f64) -> Result<Self> {
        if !(hbar.is_finite() && hbar > 0.0 && mass.is_finite() && mass > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "hbar and mass must be positive, got hbar={hbar}, m={mass}"
            )));
        }
        Ok(Self { hbar, mass })
    }

    /// hbar = m = 1.
    pub fn natural() -> Self {
        Self {
            hbar: 1.0,
            mass: 1.0,
        }
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// hbar^2 / 2m, the coefficient of the Laplacian.
    pub fn kinetic_coefficient(&self) -> f64 {
        self.hbar * self.hbar / (2.0 * self.mass)
    }
}

/// A time-independent potential sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    expression: Option<Expression>,
    sampled: ScalarField,
}

impl Potential {
    /// Samples `expression`, which must not reference `t`.
    pub fn from_expression(
        expression: Expression,
        grid: &Grid,
        bindings: &HashMap<String, f64>,
    ) -> Result<Self> {
        if expression.depends_on("t") {
            return Err(Error::TimeDependentPotential(expression.source().to_string()));
        }
        let sampled = expression.sample(grid, bindings, 0.0)?;
        Ok(Self {
            expression: Some(expression),
            sampled,
        })
    }

    pub fn from_field(sampled: ScalarField) -> Self {
        Self {
            expression: None,
            sampled,
        }
    }

    pub fn zero(grid: &Grid) -> Self {
        Self::from_field(ScalarField::zeros(grid))
    }

    pub fn expression(&self) -> Option<&Expression> {
        self.expression.as_ref()
    }

    pub fn sampled(&self) -> &ScalarField {
        &self.sampled
    }

    pub fn grid(&self) -> &Grid {
        self.sampled.grid()
    }
}

/// Everything needed to apply `H`: parameters, potential and operator backend.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumSystem {
    params: QuantumParams,
    potential: Potential,
    ops: Ops,
}

impl QuantumSystem {
    pub fn new(params: QuantumParams, potential: Potential, ops: Ops) -> Self {
        Self {
            params,
            potential,
            ops,
        }
    }

    pub fn params(&self) -> QuantumParams {
        self.params
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn ops(&self) -> Ops {
        self.ops
    }

    pub fn grid(&self) -> &Grid {
        self.potential.grid()
    }

    fn check(&self, f: &Grid) -> Result<()> {
        same_grid(self.grid(), f)
    }

    /// `L f = (hbar^2/2m) lap f - V f`.
    pub fn wave_operator(&self, f: &ScalarField) -> Result<ScalarField> {
        self.check(f.grid())?;
        let lap = self.ops.laplacian(f)?;
        let k = self.params.kinetic_coefficient();
        let v = self.potential.sampled.data();
        let data = lap
            .data()
            .iter()
            .zip(f.data())
            .zip(v)
            .map(|((l, fi), vi)| k * l - vi * fi)
            .collect();
        ScalarField::new(f.grid().clone(), data)
    }

    /// `H f` for a real field.
    pub fn hamiltonian_real(&self, f: &ScalarField) -> Result<ScalarField> {
        Ok(self.wave_operator(f)?.scale(-1.0))
    }

    /// `H psi = -(hbar^2/2m) lap psi + V psi`.
    pub fn apply_hamiltonian(&self, psi: &ComplexField) -> Result<ComplexField> {
        self.check(psi.grid())?;
        let lap = self.ops.laplacian_complex(psi)?;
        let k = self.params.kinetic_coefficient();
        let v = self.potential.sampled.data();
        let data = lap
            .data()
            .iter()
            .zip(psi.data())
            .zip(v)
            .map(|((l, p), vi)| -k * l + vi * p)
            .collect();
        ComplexField::new(psi.grid().clone(), data)
    }

    /// Time derivatives of `(Re psi, Im psi)` from the canonical Hamiltonian,
    /// via its functional derivatives `dH/dp` and `dH/dvarphi`.
    pub fn canonical_rhs(
        &self,
        varphi: &ScalarField,
        p: &ScalarField,
    ) -> Result<(ScalarField, ScalarField)> {
        same_grid(varphi.grid(), p.grid())?;
        let dh_dp = self.hamiltonian_gradient(p)?;
        let dh_dvarphi = self.hamiltonian_gradient(varphi)?;
        Ok((dh_dp, dh_dvarphi.scale(-1.0)))
    }

    /// Functional derivative of the canonical Hamiltonian with respect to
    /// one of its two arguments: `(1/hbar)(-(hbar^2/2m) lap f + V f)`.
    fn hamiltonian_gradient(&self, f: &ScalarField) -> Result<ScalarField> {
        self.check(f.grid())?;
        let lap = self.ops.laplacian(f)?;
        let k = self.params.kinetic_coefficient();
        let inv_hbar = 1.0 / self.params.hbar;
        let v = self.potential.sampled.data();
        let data = lap
            .data()
            .iter()
            .zip(f.data())
            .zip(v)
            .map(|((l, fi), vi)| (-k * l + vi * fi) * inv_hbar)
            .collect();
        ScalarField::new(f.grid().clone(), data)
    }

    /// Time derivatives of `(Re psi, Im psi)` generated by
    /// `H' = int (p^2 + varphi^2) / 2 hbar` through the non-canonical
    /// bracket `{varphi(x), p(y)}' = -L delta(x - y)`.
    pub fn generalized_rhs(
        &self,
        varphi: &ScalarField,
        p: &ScalarField,
    ) -> Result<(ScalarField, ScalarField)> {
        same_grid(varphi.grid(), p.grid())?;
        let inv_hbar = 1.0 / self.params.hbar;
        // dH'/dp = p / hbar, dH'/dvarphi = varphi / hbar
        let dh_dp = p.scale(inv_hbar);
        let dh_dvarphi = varphi.scale(inv_hbar);
        // varphi' = int {varphi(x), p(y)}' dH'/dp(y) dy = -L (p/hbar)
        // p'      = int {p(x), varphi(y)}' dH'/dvarphi(y) dy = +L (varphi/hbar)
        let varphi_dot = self.wave_operator(&dh_dp)?.scale(-1.0);
        let p_dot = self.wave_operator(&dh_dvarphi)?;
        Ok((varphi_dot, p_dot))
    }

    /// `H = (1/2hbar) int [(hbar^2/2m)(|grad varphi|^2 + |grad p|^2) + V (varphi^2 + p^2)]`.
    pub fn hamiltonian_canonical(&self, varphi: &ScalarField, p: &ScalarField) -> Result<f64> {
        self.check(varphi.grid())?;
        self.check(p.grid())?;
        let k = self.params.kinetic_coefficient();
        let gradient_part = self.ops.dirichlet_energy(varphi)? + self.ops.dirichlet_energy(p)?;
        let v = self.potential.sampled.data();
        let potential_part: f64 = v
            .iter()
            .zip(varphi.data())
            .zip(p.data())
            .map(|((vi, a), b)| vi * (a * a + b * b))
            .sum::<f64>()
            * self.grid().cell_volume();
        Ok((k * gradient_part + potential_part) / (2.0 * self.params.hbar))
    }

    /// `H' = (1/2hbar) sum |psi|^2 * cell volume`.
    pub fn norm_functional(&self, psi: &ComplexField) -> f64 {
        psi.norm_l2().powi(2) / (2.0 * self.params.hbar)
    }

    /// Upper bound on `|E|` over the spectrum of the discrete `H`.
    pub fn energy_bound(&self) -> f64 {
        let v = &self.potential.sampled;
        self.params.kinetic_coefficient() * self.ops.laplacian_spectral_radius(self.grid())
            + v.max().max(0.0)
            - v.min().min(0.0)
    }

    /// One Crank-Nicolson (Cayley) step:
    /// `(1 + i dt H / 2hbar) psi' = (1 - i dt H / 2hbar) psi`.
    pub fn crank_nicolson_step(&self, psi: &ComplexField, dt: f64) -> Result<ComplexField> {
        self.crank_nicolson_step_with_stats(psi, dt).map(|(p, _)| p)
    }

    pub fn crank_nicolson_step_with_stats(
        &self,
        psi: &ComplexField,
        dt: f64,
    ) -> Result<(ComplexField, SolveStats)> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        self.check(psi.grid())?;
        let grid = psi.grid().clone();
        let half = Complex64::new(0.0, dt / (2.0 * self.params.hbar));
        let apply_h = |x: &[Complex64]| -> Vec<Complex64> {
            let f = ComplexField::from_raw(grid.clone(), x.to_vec());
            self.apply_hamiltonian(&f)
                .expect("finite iterate on the system grid")
                .data()
                .to_vec()
        };
        let shifted = |x: &[Complex64], sign: f64| -> Vec<Complex64> {
            let hx = apply_h(x);
            x.iter().zip(hx).map(|(xi, hi)| xi + sign * half * hi).collect()
        };
        let b = shifted(psi.data(), -1.0);
        let (x, stats) = cg_normal(
            |x| shifted(x, 1.0),
            |x| shifted(x, -1.0),
            &b,
            b.clone(),
            CN_TOLERANCE,
            CN_MAX_ITERATIONS,
        )?;
        Ok((ComplexField::new(grid.clone(), x)?, stats))
    }

    /// Dense diagonalization of the discrete `H`.
    pub fn dense_spectrum(&self) -> Result<DenseSpectrum> {
        DenseSpectrum::new(self)
    }

    /// Lowest `count` eigenpairs, ascending, orthonormal under the discrete
    /// inner product.
    pub fn eigenpairs_small(&self, count: usize) -> Result<Vec<(f64, ScalarField)>> {
        Ok(self.dense_spectrum()?.eigenpairs(count))
    }

    /// Exact propagation by the discrete spectrum of `H`.
    pub fn exact_propagate_small(&self, psi: &ComplexField, t: f64) -> Result<ComplexField> {
        self.dense_spectrum()?.propagate(psi, t)
    }
}

/// Full eigendecomposition of the discrete Hamiltonian on a small grid.
#[derive(Debug, Clone)]
pub struct DenseSpectrum {
    grid: Grid,
    hbar: f64,
    energies: Vec<f64>,
    /// Columns are eigenvectors with `sum psi^2 * cell volume = 1`.
    vectors: DMatrix<f64>,
}

impl DenseSpectrum {
    pub fn new(system: &QuantumSystem) -> Result<Self> {
        let grid = system.grid().clone();
        let n = grid.len();
        if n > DENSE_LIMIT {
            return Err(Error::GridTooLarge {
                size: n,
                limit: DENSE_LIMIT,
            });
        }
        let mut h = DMatrix::<f64>::zeros(n, n);
        let mut unit = ScalarField::zeros(&grid);
        for j in 0..n {
            unit.data_mut()[j] = 1.0;
            let col = system.hamiltonian_real(&unit)?;
            h.column_mut(j).copy_from_slice(col.data());
            unit.data_mut()[j] = 0.0;
        }
        let sym = (&h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let scale = 1.0 / grid.cell_volume().sqrt();
        let mut vectors = DMatrix::<f64>::zeros(n, n);
        let mut energies = Vec::with_capacity(n);
        for (k, &src) in order.iter().enumerate() {
            energies.push(eig.eigenvalues[src]);
            let mut col = eig.eigenvectors.column(src).clone_owned() * scale;
            if sign_reference(col.as_slice()) < 0.0 {
                col = -col;
            }
            vectors.set_column(k, &col);
        }
        Ok(Self {
            grid,
            hbar: system.params().hbar(),
            energies,
            vectors,
        })
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn eigenvector(&self, n: usize) -> ScalarField {
        ScalarField::from_raw(self.grid.clone(), self.vectors.column(n).iter().copied().collect())
    }

    pub fn eigenpairs(&self, count: usize) -> Vec<(f64, ScalarField)> {
        (0..count.min(self.energies.len()))
            .map(|n| (self.energies[n], self.eigenvector(n)))
            .collect()
    }

    /// `psi(t) = sum_n <psi_n|psi> exp(-i E_n t / hbar) psi_n`.
    pub fn propagate(&self, psi: &ComplexField, t: f64) -> Result<ComplexField> {
        same_grid(&self.grid, psi.grid())?;
        let n = self.energies.len();
        let vol = self.grid.cell_volume();
        let re: Vec<f64> = psi.data().iter().map(|z| z.re).collect();
        let im: Vec<f64> = psi.data().iter().map(|z| z.im).collect();
        let re = nalgebra::DVector::from_vec(re);
        let im = nalgebra::DVector::from_vec(im);
        let c_re = self.vectors.tr_mul(&re) * vol;
        let c_im = self.vectors.tr_mul(&im) * vol;
        let mut rot_re = nalgebra::DVector::zeros(n);
        let mut rot_im = nalgebra::DVector::zeros(n);
        for k in 0..n {
            let phase = Complex64::from_polar(1.0, -self.energies[k] * t / self.hbar);
            let c = Complex64::new(c_re[k], c_im[k]) * phase;
            rot_re[k] = c.re;
            rot_im[k] = c.im;
        }
        let out_re = &self.vectors * rot_re;
        let out_im = &self.vectors * rot_im;
        let data = out_re
            .iter()
            .zip(out_im.iter())
            .map(|(&a, &b)| Complex64::new(a, b))
            .collect();
        ComplexField::new(self.grid.clone(), data)
    }
}

/// Deterministic sign convention: the sum of the vector, or its first
/// clearly nonzero entry when the sum vanishes.
fn sign_reference(v: &[f64]) -> f64 {
    let sum: f64 = v.iter().sum();
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if sum.abs() > 1e-8 * scale * (v.len() as f64).sqrt() {
        return sum;
    }
    v.iter()
        .copied()
        .find(|x| x.abs() > 1e-3 * scale)
        .unwrap_or(0.0)
}

//! Uniform periodic grids and the sample fields that live on them.
//!
//! Samples are stored row-major with the x index varying fastest:
//! `index = ix + nx * (iy + ny * iz)`. Axis `d` has sample coordinates
//! `i * spacing[d]` for `i in 0..points[d]`, so the origin is the first sample.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// A uniform periodic box in one, two or three dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dims: usize,
    points: [usize; 3],
    lengths: [f64; 3],
}

impl Grid {
    /// Builds a grid from per-axis point counts and physical lengths.
    ///
    /// Every used axis needs an even count of at least 4 and a positive
    /// finite length.
    pub fn new(points: &[usize], lengths: &[f64]) -> Result<Self> {
        let dims = points.len();
        if !(1..=3).contains(&dims) {
            return Err(Error::InvalidGrid(format!("{dims} axes; expected 1, 2 or 3")));
        }
        if lengths.len() != dims {
            return Err(Error::InvalidGrid(format!(
                "{} lengths given for {dims} axes",
                lengths.len()
            )));
        }
        let mut p = [1usize; 3];
        let mut l = [1.0f64; 3];
        for d in 0..dims {
            if points[d] < 4 || !points[d].is_multiple_of(2) {
                return Err(Error::InvalidGrid(format!(
                    "axis {d} has {} points; need an even count >= 4",
                    points[d]
                )));
            }
            if !(lengths[d].is_finite() && lengths[d] > 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "axis {d} has length {}; need a positive finite length",
                    lengths[d]
                )));
            }
            p[d] = points[d];
            l[d] = lengths[d];
        }
        Ok(Self {
            dims,
            points: p,
            lengths: l,
        })
    }

    pub fn line(points: usize, length: f64) -> Result<Self> {
        Self::new(&[points], &[length])
    }

    pub fn cube(points: usize, length: f64) -> Result<Self> {
        Self::new(&[points; 3], &[length; 3])
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Points per axis; unused axes report 1.
    pub fn points(&self) -> [usize; 3] {
        self.points
    }

    pub fn lengths(&self) -> [f64; 3] {
        self.lengths
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / self.points[axis] as f64
    }

    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dims).map(|d| self.spacing(d)).product()
    }

    pub fn volume(&self) -> f64 {
        self.lengths[..self.dims].iter().product()
    }

    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        ix + self.points[0] * (iy + self.points[1] * iz)
    }

    /// Splits a flat index into per-axis indices.
    pub fn unravel(&self, index: usize) -> [usize; 3] {
        let nx = self.points[0];
        let ny = self.points[1];
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    /// Physical coordinates of a flat sample index. Unused axes give 0.
    pub fn coordinates(&self, index: usize) -> [f64; 3] {
        let ijk = self.unravel(index);
        let mut x = [0.0; 3];
        for d in 0..self.dims {
            x[d] = ijk[d] as f64 * self.spacing(d);
        }
        x
    }

    pub(crate) fn ensure_dims(&self, expected: usize) -> Result<()> {
        if self.dims != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: self.dims,
            });
        }
        Ok(())
    }
}

fn first_non_finite<I: IntoIterator<Item = bool>>(flags: I) -> Option<usize> {
    flags.into_iter().position(|finite| !finite)
}

/// Real samples on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "{} samples for a grid of {} points",
                data.len(),
                grid.len()
            )));
        }
        if let Some(index) = first_non_finite(data.iter().map(|v| v.is_finite())) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { grid, data })
    }

    /// Skips the finiteness scan; callers guarantee the invariant.
    pub(crate) fn from_raw(grid: Grid, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), grid.len());
        Self { grid, data }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self {
            data: vec![0.0; grid.len()],
            grid: grid.clone(),
        }
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        Self {
            data: vec![value; grid.len()],
            grid: grid.clone(),
        }
    }

    pub fn from_fn(grid: &Grid, mut f: impl FnMut([f64; 3]) -> f64) -> Self {
        let data = (0..grid.len()).map(|i| f(grid.coordinates(i))).collect();
        Self {
            grid: grid.clone(),
            data,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(self.grid.clone(), self.data.iter().map(|&v| f(v)).collect())
    }

    /// `a * self + b * other`.
    pub fn lin_comb(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        same_grid(&self.grid, &other.grid)?;
        Ok(Self::from_raw(
            self.grid.clone(),
            self.data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        ))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.lin_comb(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.lin_comb(1.0, other, -1.0)
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|v| a * v)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        same_grid(&self.grid, &other.grid)?;
        Ok(Self::from_raw(
            self.grid.clone(),
            self.data.iter().zip(&other.data).map(|(x, y)| x * y).collect(),
        ))
    }

    /// Discrete inner product: plain sum times cell volume.
    pub fn dot(&self, other: &Self) -> Result<f64> {
        same_grid(&self.grid, &other.grid)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| x * y)
            .sum::<f64>()
            * self.grid.cell_volume())
    }

    pub fn norm_l2(&self) -> f64 {
        (self.data.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    pub fn norm_max(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn integral(&self) -> f64 {
        self.data.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Complex samples on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: Grid,
    data: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: Grid, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "{} samples for a grid of {} points",
                data.len(),
                grid.len()
            )));
        }
        if let Some(index) = first_non_finite(data.iter().map(|v| v.is_finite())) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { grid, data })
    }

    pub(crate) fn from_raw(grid: Grid, data: Vec<Complex64>) -> Self {
        debug_assert_eq!(data.len(), grid.len());
        Self { grid, data }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::from_raw(grid.clone(), vec![Complex64::new(0.0, 0.0); grid.len()])
    }

    /// Assembles `re + i im`.
    pub fn from_parts(re: &ScalarField, im: &ScalarField) -> Result<Self> {
        same_grid(&re.grid, &im.grid)?;
        Ok(Self::from_raw(
            re.grid.clone(),
            re.data
                .iter()
                .zip(&im.data)
                .map(|(&a, &b)| Complex64::new(a, b))
                .collect(),
        ))
    }

    pub fn from_real(re: &ScalarField) -> Self {
        Self::from_raw(
            re.grid.clone(),
            re.data.iter().map(|&a| Complex64::new(a, 0.0)).collect(),
        )
    }

    pub fn from_fn(grid: &Grid, mut f: impl FnMut([f64; 3]) -> Complex64) -> Self {
        let data = (0..grid.len()).map(|i| f(grid.coordinates(i))).collect();
        Self::from_raw(grid.clone(), data)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn re(&self) -> ScalarField {
        ScalarField::from_raw(self.grid.clone(), self.data.iter().map(|z| z.re).collect())
    }

    pub fn im(&self) -> ScalarField {
        ScalarField::from_raw(self.grid.clone(), self.data.iter().map(|z| z.im).collect())
    }

    pub fn scale(&self, a: Complex64) -> Self {
        Self::from_raw(self.grid.clone(), self.data.iter().map(|&z| a * z).collect())
    }

    pub fn lin_comb(&self, a: Complex64, other: &Self, b: Complex64) -> Result<Self> {
        same_grid(&self.grid, &other.grid)?;
        Ok(Self::from_raw(
            self.grid.clone(),
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&x, &y)| a * x + b * y)
                .collect(),
        ))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.lin_comb(Complex64::new(1.0, 0.0), other, Complex64::new(-1.0, 0.0))
    }

    /// `<self|other>` = sum of conj(self) * other times cell volume.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        same_grid(&self.grid, &other.grid)?;
        let s: Complex64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| x.conj() * y)
            .sum();
        Ok(s * self.grid.cell_volume())
    }

    /// Pointwise |z|^2.
    pub fn modulus_squared(&self) -> ScalarField {
        ScalarField::from_raw(self.grid.clone(), self.data.iter().map(|z| z.norm_sqr()).collect())
    }

    pub fn norm_l2(&self) -> f64 {
        (self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    pub fn norm_max(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }
}

/// Three real components on a shared 3D grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    components: [ScalarField; 3],
}

impl VectorField {
    pub fn new(x: ScalarField, y: ScalarField, z: ScalarField) -> Result<Self> {
        x.grid().ensure_dims(3)?;
        same_grid(x.grid(), y.grid())?;
        same_grid(x.grid(), z.grid())?;
        Ok(Self {
            components: [x, y, z],
        })
    }

    pub(crate) fn from_raw(components: [ScalarField; 3]) -> Self {
        Self { components }
    }

    pub fn zeros(grid: &Grid) -> Result<Self> {
        grid.ensure_dims(3)?;
        let z = ScalarField::zeros(grid);
        Ok(Self::from_raw([z.clone(), z.clone(), z]))
    }

    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 3]) -> [f64; 3]) -> Result<Self> {
        grid.ensure_dims(3)?;
        let c = |k: usize| ScalarField::from_fn(grid, |x| f(x)[k]);
        Ok(Self::from_raw([c(0), c(1), c(2)]))
    }

    pub fn grid(&self) -> &Grid {
        self.components[0].grid()
    }

    pub fn component(&self, axis: usize) -> &ScalarField {
        &self.components[axis]
    }

    pub fn components(&self) -> &[ScalarField; 3] {
        &self.components
    }

    pub fn into_components(self) -> [ScalarField; 3] {
        self.components
    }

    pub fn lin_comb(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        let c = |k: usize| self.components[k].lin_comb(a, &other.components[k], b);
        Ok(Self::from_raw([c(0)?, c(1)?, c(2)?]))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.lin_comb(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.lin_comb(1.0, other, -1.0)
    }

    pub fn scale(&self, a: f64) -> Self {
        Self::from_raw(self.components.clone().map(|c| c.scale(a)))
    }

    pub fn dot(&self, other: &Self) -> Result<f64> {
        let mut s = 0.0;
        for k in 0..3 {
            s += self.components[k].dot(&other.components[k])?;
        }
        Ok(s)
    }

    pub fn norm_l2(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.norm_l2().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Largest component magnitude over all samples.
    pub fn norm_max(&self) -> f64 {
        self.components.iter().fold(0.0, |m, c| m.max(c.norm_max()))
    }

    /// Spatial mean of each component.
    pub fn mean(&self) -> [f64; 3] {
        [
            self.components[0].mean(),
            self.components[1].mean(),
            self.components[2].mean(),
        ]
    }
}

pub(crate) fn same_grid(a: &Grid, b: &Grid) -> Result<()> {
    if a != b {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

//! Importance fields on a square grid.
//!
//! A [`ValueField`] holds one real value per cell of an `r × r` grid and is
//! drawn from a zero-mean Gaussian process with a squared-exponential kernel
//! over cell coordinates. Visited or rewarded places are reshaped with
//! unnormalized Gaussian bumps, the field can be contaminated with i.i.d.
//! noise, and navigation reads either finite-difference gradients or the
//! best Moore neighbour.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use thiserror::Error;

/// Largest grid for which exact sampling is supported; the covariance is
/// `r² × r²`.
pub const MAX_RESOLUTION: usize = 128;

const MAX_JITTER: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("invalid field config: {0}")]
    Config(String),
    #[error("covariance not positive definite even with jitter {jitter:e}")]
    Degenerate { jitter: f64 },
    #[error("cell ({i}, {j}) outside a {resolution}x{resolution} grid")]
    OutOfBounds { i: usize, j: usize, resolution: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    pub amplitude: f64,
    /// Correlation length in cell units.
    pub lengthscale: f64,
    pub jitter: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            lengthscale: 2.0,
            jitter: 1e-8,
        }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<(), FieldError> {
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(FieldError::Config(format!("amplitude must be > 0, got {}", self.amplitude)));
        }
        if !(self.lengthscale > 0.0 && self.lengthscale.is_finite()) {
            return Err(FieldError::Config(format!(
                "lengthscale must be > 0, got {}",
                self.lengthscale
            )));
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(FieldError::Config(format!("jitter must be >= 0, got {}", self.jitter)));
        }
        Ok(())
    }

    /// Noise-free covariance between two cells.
    pub fn covariance(&self, a: GridCell, b: GridCell) -> f64 {
        let di = a.i as f64 - b.i as f64;
        let dj = a.j as f64 - b.j as f64;
        self.amplitude * (-(di * di + dj * dj) / (2.0 * self.lengthscale * self.lengthscale)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridCell {
    pub i: usize,
    pub j: usize,
}

impl GridCell {
    pub const fn new(i: usize, j: usize) -> Self {
        Self { i, j }
    }

    pub fn distance(&self, other: GridCell) -> f64 {
        let di = self.i as f64 - other.i as f64;
        let dj = self.j as f64 - other.j as f64;
        (di * di + dj * dj).sqrt()
    }

    /// Moore neighbourhood clipped to the grid, in ascending `(i, j)` order.
    pub fn neighbors(&self, resolution: usize) -> impl Iterator<Item = GridCell> + '_ {
        let (i, j) = (self.i as isize, self.j as isize);
        let r = resolution as isize;
        (-1..=1isize)
            .flat_map(move |di| (-1..=1isize).map(move |dj| (di, dj)))
            .filter(|&(di, dj)| di != 0 || dj != 0)
            .map(move |(di, dj)| (i + di, j + dj))
            .filter(move |&(ni, nj)| ni >= 0 && nj >= 0 && ni < r && nj < r)
            .map(|(ni, nj)| GridCell::new(ni as usize, nj as usize))
    }
}

impl std::fmt::Display for GridCell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.i, self.j)
    }
}

/// Row-major importance values over an `r × r` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueField {
    resolution: usize,
    values: Vec<f64>,
}

impl ValueField {
    pub fn from_values(resolution: usize, values: Vec<f64>) -> Result<Self, FieldError> {
        check_resolution(resolution)?;
        if values.len() != resolution * resolution {
            return Err(FieldError::Config(format!(
                "expected {} values for resolution {resolution}, got {}",
                resolution * resolution,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FieldError::Config("field values must be finite".into()));
        }
        Ok(Self { resolution, values })
    }

    pub fn from_fn(resolution: usize, f: impl Fn(GridCell) -> f64) -> Result<Self, FieldError> {
        check_resolution(resolution)?;
        let values = (0..resolution * resolution)
            .map(|k| f(GridCell::new(k / resolution, k % resolution)))
            .collect();
        Self::from_values(resolution, values)
    }

    pub fn constant(resolution: usize, value: f64) -> Result<Self, FieldError> {
        Self::from_fn(resolution, |_| value)
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn contains(&self, cell: GridCell) -> bool {
        cell.i < self.resolution && cell.j < self.resolution
    }

    pub fn check(&self, cell: GridCell) -> Result<(), FieldError> {
        if self.contains(cell) {
            Ok(())
        } else {
            Err(FieldError::OutOfBounds {
                i: cell.i,
                j: cell.j,
                resolution: self.resolution,
            })
        }
    }

    /// Value at `cell`. Panics if the cell is out of bounds.
    pub fn get(&self, cell: GridCell) -> f64 {
        assert!(self.contains(cell), "cell {cell} outside grid of {}", self.resolution);
        self.values[cell.i * self.resolution + cell.j]
    }

    pub fn cells(&self) -> impl Iterator<Item = GridCell> {
        let r = self.resolution;
        (0..r * r).map(move |k| GridCell::new(k / r, k % r))
    }

    /// Adds `peak · exp(−d²/(2·width²))` to every cell, `d` being the
    /// Euclidean distance to `center` in cell units. Negative peaks penalize.
    pub fn local_bump(&mut self, center: GridCell, peak: f64, width: f64) -> Result<(), FieldError> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(FieldError::Config(format!("bump width must be > 0, got {width}")));
        }
        if !peak.is_finite() {
            return Err(FieldError::Config(format!("bump peak must be finite, got {peak}")));
        }
        self.check(center)?;
        let r = self.resolution;
        let denom = 2.0 * width * width;
        for (k, v) in self.values.iter_mut().enumerate() {
            let d = GridCell::new(k / r, k % r).distance(center);
            *v += peak * (-(d * d) / denom).exp();
        }
        Ok(())
    }

    /// Adds independent `N(0, sigma²)` noise to every cell, in row-major order.
    pub fn contaminate<R: Rng + ?Sized>(&mut self, sigma: f64, rng: &mut R) -> Result<(), FieldError> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(FieldError::Config(format!("noise sigma must be >= 0, got {sigma}")));
        }
        if sigma == 0.0 {
            return Ok(());
        }
        let noise = Normal::new(0.0, sigma).expect("validated sigma");
        for v in &mut self.values {
            *v += noise.sample(rng);
        }
        Ok(())
    }

    /// Finite-difference gradient `(∂/∂i, ∂/∂j)` in value per cell. Central
    /// differences in the interior, one-sided on the boundary.
    pub fn gradient_at(&self, cell: GridCell) -> [f64; 2] {
        let r = self.resolution;
        let di = axis_difference(cell.i, r, |i| self.get(GridCell::new(i, cell.j)));
        let dj = axis_difference(cell.j, r, |j| self.get(GridCell::new(cell.i, j)));
        [di, dj]
    }

    /// Best Moore neighbour, or `cell` itself if no neighbour is strictly
    /// higher. Ties go to the lowest `(i, j)`.
    pub fn steepest_neighbor(&self, cell: GridCell) -> GridCell {
        let mut best = cell;
        let mut best_value = self.get(cell);
        for n in cell.neighbors(self.resolution) {
            let v = self.get(n);
            if v > best_value {
                best = n;
                best_value = v;
            }
        }
        best
    }
}

fn axis_difference(x: usize, r: usize, at: impl Fn(usize) -> f64) -> f64 {
    if x == 0 {
        at(1) - at(0)
    } else if x == r - 1 {
        at(r - 1) - at(r - 2)
    } else {
        (at(x + 1) - at(x - 1)) / 2.0
    }
}

fn check_resolution(resolution: usize) -> Result<(), FieldError> {
    if !(2..=MAX_RESOLUTION).contains(&resolution) {
        return Err(FieldError::Config(format!(
            "resolution must be in [2, {MAX_RESOLUTION}], got {resolution}"
        )));
    }
    Ok(())
}

/// Cholesky factor of the grid covariance, reusable across draws.
#[derive(Debug, Clone)]
pub struct FieldSampler {
    resolution: usize,
    lower: DMatrix<f64>,
    jitter: f64,
}

impl FieldSampler {
    /// Factorizes `K + jitter·I`, escalating the jitter tenfold (up to 1e-4)
    /// until the factorization succeeds.
    pub fn new(kernel: KernelConfig, resolution: usize) -> Result<Self, FieldError> {
        kernel.validate()?;
        check_resolution(resolution)?;
        let n = resolution * resolution;
        let cell = |k: usize| GridCell::new(k / resolution, k % resolution);
        let base = DMatrix::from_fn(n, n, |p, q| kernel.covariance(cell(p), cell(q)));

        let mut jitter = kernel.jitter;
        loop {
            let mut k = base.clone();
            for d in 0..n {
                k[(d, d)] += jitter;
            }
            if let Some(chol) = k.cholesky() {
                return Ok(Self {
                    resolution,
                    lower: chol.l(),
                    jitter,
                });
            }
            let next = if jitter == 0.0 { 1e-8 } else { jitter * 10.0 };
            if next > MAX_JITTER * (1.0 + 1e-9) {
                return Err(FieldError::Degenerate { jitter });
            }
            jitter = next;
        }
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Diagonal stabilizer that made the factorization succeed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// One exact draw `L·z` with `z` standard normal, consumed in row-major order.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ValueField {
        let n = self.resolution * self.resolution;
        let z = DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(rng)));
        let values = &self.lower * z;
        ValueField {
            resolution: self.resolution,
            values: values.iter().copied().collect(),
        }
    }
}

/// Draws one field from the zero-mean GP prior over an `r × r` grid.
pub fn sample_field<R: Rng + ?Sized>(
    kernel: KernelConfig,
    resolution: usize,
    rng: &mut R,
) -> Result<ValueField, FieldError> {
    Ok(FieldSampler::new(kernel, resolution)?.sample(rng))
}

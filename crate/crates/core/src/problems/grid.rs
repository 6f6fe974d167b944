//! Physical-space representation on the midpoint grid of (0,1) and the
//! quadrature that maps pointwise values back to sine coefficients.
//!
//! With `x_k = (k + 1/2) / N_x` the sampled modes `√2 sin(iπx)` are exactly
//! orthonormal under the discrete inner product `(1/N_x) Σ_k` for every
//! `i, j < N_x`, so analysis undoes synthesis below the Nyquist limit.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};
use crate::spectral::SpectralVector;

/// Minimum number of grid points used by the built-in problems.
pub const MIN_GRID_POINTS: usize = 128;

/// Default grid size for `n` Galerkin and `k` noise modes.
pub fn default_grid_points(n: usize, k: usize) -> usize {
    (2 * n.max(k)).max(MIN_GRID_POINTS)
}

/// Values of a function sampled at the midpoints `x_k = (k + 1/2) / N_x`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Tabulated sine basis on a midpoint grid.
#[derive(Debug, Clone)]
pub struct SineGrid {
    nx: usize,
    modes: usize,
    // row i holds √2 sin((i+1)π x_k)
    table: Vec<f64>,
}

impl SineGrid {
    pub fn new(nx: usize, modes: usize) -> Result<Self> {
        if modes == 0 || nx < 2 * modes {
            return Err(Error::Aliasing {
                grid: nx,
                modes,
                required: 2 * modes.max(1),
            });
        }
        let mut table = Vec::with_capacity(nx * modes);
        for i in 1..=modes {
            for k in 0..nx {
                let x = (k as f64 + 0.5) / nx as f64;
                table.push(SQRT_2 * (i as f64 * PI * x).sin());
            }
        }
        Ok(Self { nx, modes, table })
    }

    pub fn points(&self) -> usize {
        self.nx
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn x(&self, k: usize) -> f64 {
        (k as f64 + 0.5) / self.nx as f64
    }

    /// `√2 sin((i+1)π x_k)` for all `k`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.table[i * self.nx..(i + 1) * self.nx]
    }

    /// `out[k] = Σ_i coeffs[i] e_i(x_k)`.
    pub fn synthesize_into(&self, coeffs: &[f64], out: &mut [f64]) {
        debug_assert!(coeffs.len() <= self.modes && out.len() == self.nx);
        out.fill(0.0);
        for (i, &c) in coeffs.iter().enumerate() {
            if c != 0.0 {
                axpy(c, self.row(i), out);
            }
        }
    }

    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nx];
        self.synthesize_into(coeffs, &mut out);
        out
    }

    /// Midpoint-rule coefficients `(1/N_x) Σ_k g(x_k) e_i(x_k)` for `i < out.len()`.
    pub fn analyze_into(&self, values: &[f64], out: &mut [f64]) {
        debug_assert!(out.len() <= self.modes && values.len() == self.nx);
        let scale = 1.0 / self.nx as f64;
        for (i, o) in out.iter_mut().enumerate() {
            *o = scale * dot(values, self.row(i));
        }
    }

    pub fn analyze(&self, values: &[f64], n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        self.analyze_into(values, &mut out);
        out
    }
}

#[inline]
pub(crate) fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Dot product with independent partial sums so the loop vectorizes.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[4]) + (acc[1] + acc[5]) + (acc[2] + acc[6]) + (acc[3] + acc[7]) + tail
}

/// Evaluate the sine series of `v` on `nx` midpoints.
pub fn synthesize(v: &SpectralVector, nx: usize) -> Result<GridFunction> {
    let grid = SineGrid::new(nx, v.dim().max(1))?;
    Ok(GridFunction::new(grid.synthesize(v.coeffs())))
}

/// First `n` sine coefficients of `g` by the midpoint rule.
pub fn analyze(g: &GridFunction, n: usize) -> Result<SpectralVector> {
    let grid = SineGrid::new(g.len(), n)?;
    Ok(SpectralVector::new(grid.analyze(g.values(), n)))
}

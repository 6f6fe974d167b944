use std::fmt;
use std::sync::Arc;

use super::grid::{default_grid_points, SineGrid};
use super::Coefficients;
use crate::error::{Error, Result};
use crate::spectral::SpectralVector;

/// Scalar coefficient `(x, v) ↦ value` of a pointwise operator.
pub type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Pointwise coefficients `(F(v))(x) = f(x, v(x))` and
/// `(B(v)u)(x) = b(x, v(x)) u(x)` on `H = U = L²(0,1)` with the shared sine
/// basis, realized by synthesis on a midpoint grid, pointwise evaluation and
/// midpoint-rule analysis.
#[derive(Clone)]
pub struct NemytskijModel {
    grid: SineGrid,
    n: usize,
    k: usize,
    f: ScalarFn,
    b: ScalarFn,
    b_v: Option<ScalarFn>,
}

impl fmt::Debug for NemytskijModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NemytskijModel")
            .field("n", &self.n)
            .field("k", &self.k)
            .field("grid_points", &self.grid.points())
            .field("analytic_derivative", &self.b_v.is_some())
            .finish()
    }
}

fn evaluate(quantity: &'static str, func: &ScalarFn, grid: &SineGrid, values: &[f64], out: &mut [f64]) -> Result<()> {
    for (k, (o, &v)) in out.iter_mut().zip(values).enumerate() {
        let y = func(grid.x(k), v);
        if !y.is_finite() {
            return Err(Error::NonFinite { quantity, index: k });
        }
        *o = y;
    }
    Ok(())
}

impl NemytskijModel {
    /// `b_v` is `∂b/∂v`; without it `B'B` falls back to finite differences.
    pub fn new(
        n: usize,
        k: usize,
        grid_points: Option<usize>,
        f: ScalarFn,
        b: ScalarFn,
        b_v: Option<ScalarFn>,
    ) -> Result<Self> {
        let nx = grid_points.unwrap_or_else(|| default_grid_points(n, k));
        let grid = SineGrid::new(nx, n.max(k))?;
        Ok(Self { grid, n, k, f, b, b_v })
    }

    pub fn grid(&self) -> &SineGrid {
        &self.grid
    }

    pub fn has_derivative(&self) -> bool {
        self.b_v.is_some()
    }

    fn to_grid(&self, v: &[f64]) -> Vec<f64> {
        self.grid.synthesize(v)
    }

    fn b_on(&self, vg: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; vg.len()];
        evaluate("diffusion b(x, v(x))", &self.b, &self.grid, vg, &mut out)?;
        Ok(out)
    }

    fn b_v_on(&self, vg: &[f64]) -> Result<Vec<f64>> {
        let b_v = self.b_v.as_ref().ok_or(Error::Unsupported {
            scheme: "analytic B'B",
            requirement: "the derivative ∂b/∂v",
        })?;
        let mut out = vec![0.0; vg.len()];
        evaluate("derivative ∂b/∂v(x, v(x))", b_v, &self.grid, vg, &mut out)?;
        Ok(out)
    }

    /// `P_N` of the pointwise product `b(·, v) · u` with `u` given on the grid.
    fn product(&self, bg: &[f64], ug: &[f64]) -> Vec<f64> {
        let prod: Vec<f64> = bg.iter().zip(ug).map(|(a, b)| a * b).collect();
        self.grid.analyze(&prod, self.n)
    }

    fn columns_on(&self, bg: &[f64], k: usize) -> Vec<Vec<f64>> {
        let mut prod = vec![0.0; bg.len()];
        (0..k)
            .map(|j| {
                for ((p, b), e) in prod.iter_mut().zip(bg).zip(self.grid.row(j)) {
                    *p = b * e;
                }
                self.grid.analyze(&prod, self.n)
            })
            .collect()
    }

    /// `½ B'(v)(P_N B(v) ΔW) ΔW − (h/2) Σ_j η_j B'(v)(P_N B(v) ẽ_j) ẽ_j`,
    /// collapsed into one pointwise product and one analysis.
    pub(crate) fn milstein_correction(&self, v: &[f64], dw: &[f64], etas: &[f64], h: f64) -> Result<Vec<f64>> {
        let vg = self.to_grid(v);
        let bg = self.b_on(&vg)?;
        let bvg = self.b_v_on(&vg)?;
        let dwg = self.grid.synthesize(dw);
        let g = self.grid.synthesize(&self.product(&bg, &dwg));
        let mut acc: Vec<f64> = g.iter().zip(&dwg).map(|(a, b)| 0.5 * a * b).collect();
        let mut prod = vec![0.0; bg.len()];
        let mut col_grid = vec![0.0; bg.len()];
        for (j, &eta) in etas.iter().enumerate() {
            if eta == 0.0 {
                continue;
            }
            let e = self.grid.row(j);
            for ((p, b), ej) in prod.iter_mut().zip(&bg).zip(e) {
                *p = b * ej;
            }
            let col = self.grid.analyze(&prod, self.n);
            self.grid.synthesize_into(&col, &mut col_grid);
            let scale = -0.5 * h * eta;
            for ((a, c), ej) in acc.iter_mut().zip(&col_grid).zip(e) {
                *a += scale * c * ej;
            }
        }
        for (a, d) in acc.iter_mut().zip(&bvg) {
            *a *= d;
        }
        Ok(self.grid.analyze(&acc, self.n))
    }

    /// `Σ_j √η_j P_N[(b(·, v − h/2 √η_j C_j) − b(·, v)) ẽ_j]` with
    /// `C_j = P_N B(v) ẽ_j`, summed on the grid before one analysis.
    pub(crate) fn derivative_free_correction(
        &self,
        v: &[f64],
        columns: &[SpectralVector],
        etas: &[f64],
        h: f64,
    ) -> Result<Vec<f64>> {
        let vg = self.to_grid(v);
        let bg = self.b_on(&vg)?;
        let mut acc = vec![0.0; vg.len()];
        let mut stage = vec![0.0; vg.len()];
        let mut col_grid = vec![0.0; vg.len()];
        for (j, &eta) in etas.iter().enumerate() {
            if eta == 0.0 {
                continue;
            }
            let sqrt_eta = eta.sqrt();
            self.grid.synthesize_into(columns[j].coeffs(), &mut col_grid);
            let shift = -0.5 * h * sqrt_eta;
            for ((s, x), c) in stage.iter_mut().zip(&vg).zip(&col_grid) {
                *s = x + shift * c;
            }
            let e = self.grid.row(j);
            for (k, (a, &s)) in acc.iter_mut().zip(&stage).enumerate() {
                let y = (self.b)(self.grid.x(k), s);
                if !y.is_finite() {
                    return Err(Error::NonFinite {
                        quantity: "diffusion b(x, v(x))",
                        index: k,
                    });
                }
                *a += sqrt_eta * (y - bg[k]) * e[k];
            }
        }
        Ok(self.grid.analyze(&acc, self.n))
    }

    /// `P_N[(b(·, v − h/2 P_N b(·, v)) − b(·, v)) · weight]`.
    pub(crate) fn single_difference_correction(&self, v: &[f64], h: f64, weight: &[f64]) -> Result<Vec<f64>> {
        let vg = self.to_grid(v);
        let bg = self.b_on(&vg)?;
        let pb = self.grid.synthesize(&self.grid.analyze(&bg, self.n));
        let stage: Vec<f64> = vg.iter().zip(&pb).map(|(x, p)| x - 0.5 * h * p).collect();
        let bs = self.b_on(&stage)?;
        let diff: Vec<f64> = bs.iter().zip(&bg).zip(weight).map(|((a, b), w)| (a - b) * w).collect();
        Ok(self.grid.analyze(&diff, self.n))
    }
}

impl Coefficients for NemytskijModel {
    fn dims(&self) -> (usize, usize) {
        (self.n, self.k)
    }

    fn drift(&self, v: &[f64]) -> Result<Vec<f64>> {
        let vg = self.to_grid(v);
        let mut fg = vec![0.0; vg.len()];
        evaluate("drift f(x, v(x))", &self.f, &self.grid, &vg, &mut fg)?;
        Ok(self.grid.analyze(&fg, self.n))
    }

    fn diffusion(&self, v: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let vg = self.to_grid(v);
        let bg = self.b_on(&vg)?;
        let ug = self.grid.synthesize(u);
        Ok(self.product(&bg, &ug))
    }

    fn diffusion_columns(&self, v: &[f64], k: usize) -> Result<Vec<Vec<f64>>> {
        let vg = self.to_grid(v);
        let bg = self.b_on(&vg)?;
        Ok(self.columns_on(&bg, k))
    }

    fn bprime_b(&self, v: &[f64], i: usize, j: usize, galerkin: bool) -> Option<Result<Vec<f64>>> {
        self.b_v.as_ref()?;
        Some((|| {
            let vg = self.to_grid(v);
            let bg = self.b_on(&vg)?;
            let bvg = self.b_v_on(&vg)?;
            let mut prod: Vec<f64> = bg.iter().zip(self.grid.row(i)).map(|(b, e)| b * e).collect();
            let col_grid = if galerkin {
                self.grid.synthesize(&self.grid.analyze(&prod, self.n))
            } else {
                prod.clone()
            };
            for (((p, d), c), e) in prod.iter_mut().zip(&bvg).zip(&col_grid).zip(self.grid.row(j)) {
                *p = d * c * e;
            }
            Ok(self.grid.analyze(&prod, self.n))
        })())
    }

    fn nemytskij(&self) -> Option<&NemytskijModel> {
        Some(self)
    }
}

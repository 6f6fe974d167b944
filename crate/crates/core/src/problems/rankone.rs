use super::grid::{default_grid_points, SineGrid};
use super::Coefficients;
use crate::error::{Error, Result};

/// Rank-one diffusion `B(v)u = ⟨u, ψ⟩ G(v)` with `ψ = Σ_j 2^{-j} ẽ_j` and
/// `G(v) = P_N g(v(·))`, `g(s) = σ (1 + ½ sin s)`.
///
/// Every `B(v)` has range `span{G(v)}`, so `B'B(i, j) = ψ_i ψ_j P_N[g'(v) G(v)]`
/// is symmetric in `(i, j)` although `B` is not a multiplication operator.
/// The drift is the pointwise `f(v) = 1 − v / (1 + v²)`.
#[derive(Debug, Clone)]
pub struct RankOneModel {
    grid: SineGrid,
    n: usize,
    k: usize,
    sigma: f64,
    psi: Vec<f64>,
}

impl RankOneModel {
    pub fn new(n: usize, k: usize, sigma: f64, grid_points: Option<usize>) -> Result<Self> {
        let nx = grid_points.unwrap_or_else(|| default_grid_points(n, k));
        let grid = SineGrid::new(nx, n)?;
        let psi = (0..k).map(|j| 0.5f64.powi(j as i32 + 1)).collect();
        Ok(Self { grid, n, k, sigma, psi })
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    fn g(&self, s: f64) -> f64 {
        self.sigma * (1.0 + 0.5 * s.sin())
    }

    fn g_prime(&self, s: f64) -> f64 {
        0.5 * self.sigma * s.cos()
    }

    /// `G(v)` in coefficients.
    pub fn profile(&self, v: &[f64]) -> Vec<f64> {
        let vg = self.grid.synthesize(v);
        let gg: Vec<f64> = vg.iter().map(|&s| self.g(s)).collect();
        self.grid.analyze(&gg, self.n)
    }

    fn finite(out: Vec<f64>, quantity: &'static str) -> Result<Vec<f64>> {
        match out.iter().position(|x| !x.is_finite()) {
            Some(index) => Err(Error::NonFinite { quantity, index }),
            None => Ok(out),
        }
    }
}

impl Coefficients for RankOneModel {
    fn dims(&self) -> (usize, usize) {
        (self.n, self.k)
    }

    fn drift(&self, v: &[f64]) -> Result<Vec<f64>> {
        let vg = self.grid.synthesize(v);
        let fg: Vec<f64> = vg.iter().map(|&s| 1.0 - s / (1.0 + s * s)).collect();
        Self::finite(self.grid.analyze(&fg, self.n), "drift")
    }

    fn diffusion(&self, v: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let weight: f64 = u.iter().zip(&self.psi).map(|(a, b)| a * b).sum();
        let out = self.profile(v).into_iter().map(|c| weight * c).collect();
        Self::finite(out, "diffusion")
    }

    fn diffusion_columns(&self, v: &[f64], k: usize) -> Result<Vec<Vec<f64>>> {
        let g = Self::finite(self.profile(v), "diffusion")?;
        Ok(self.psi[..k]
            .iter()
            .map(|&p| g.iter().map(|c| p * c).collect())
            .collect())
    }

    fn bprime_b(&self, v: &[f64], i: usize, j: usize, _galerkin: bool) -> Option<Result<Vec<f64>>> {
        let vg = self.grid.synthesize(v);
        let gv = self.grid.synthesize(&self.profile(v));
        let prod: Vec<f64> = vg.iter().zip(&gv).map(|(&s, g)| self.g_prime(s) * g).collect();
        let scale = self.psi[i] * self.psi[j];
        let out = self
            .grid
            .analyze(&prod, self.n)
            .into_iter()
            .map(|c| scale * c)
            .collect();
        Some(Self::finite(out, "B'B"))
    }
}

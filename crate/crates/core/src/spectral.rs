//! Coefficient representation of the Galerkin space `H_N` and the diagonal
//! operator calculus of the generator `A`.
//!
//! Every state is stored as its coefficients against the eigenbasis
//! `(e_i)` of `-A`, ordered by ascending eigenvalue. Because `A` is diagonal
//! in that basis, the semigroup, the resolvent and fractional powers all act
//! coefficient by coefficient and no dense operator type is needed.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// An element of `H_N`: `coeffs[i] = <v, e_{i+1}>_H`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpectralVector {
    coeffs: Vec<f64>,
}

impl SpectralVector {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { coeffs: vec![0.0; dim] }
    }

    /// The `i`-th basis vector `e_{i+1}` of `H_N`.
    pub fn unit(dim: usize, i: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.coeffs[i] = 1.0;
        v
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// `H`-norm, by Parseval the Euclidean norm of the coefficients.
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    /// In-place `self += scale * other`; dimensions must agree.
    pub fn axpy(&mut self, scale: f64, other: &SpectralVector) -> Result<()> {
        check_dim("axpy", self.dim(), other.dim())?;
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += scale * b;
        }
        Ok(())
    }

    pub fn scaled(&self, scale: f64) -> SpectralVector {
        SpectralVector::new(self.coeffs.iter().map(|c| scale * c).collect())
    }

    /// `H`-distance after embedding both vectors in the larger space.
    pub fn distance(&self, other: &SpectralVector) -> f64 {
        let n = self.dim().max(other.dim());
        (0..n)
            .map(|i| {
                let a = self.coeffs.get(i).copied().unwrap_or(0.0);
                let b = other.coeffs.get(i).copied().unwrap_or(0.0);
                (a - b) * (a - b)
            })
            .sum::<f64>()
            .sqrt()
    }
}

impl From<Vec<f64>> for SpectralVector {
    fn from(coeffs: Vec<f64>) -> Self {
        Self::new(coeffs)
    }
}

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        });
    }
    Ok(())
}

/// Galerkin projection `P_N`: keep the first `n` coefficients, zero-padding
/// when `n` exceeds the current dimension.
pub fn project(v: &SpectralVector, n: usize) -> SpectralVector {
    let mut coeffs = vec![0.0; n];
    let keep = n.min(v.dim());
    coeffs[..keep].copy_from_slice(&v.coeffs[..keep]);
    SpectralVector::new(coeffs)
}

/// Eigenvalues `0 < λ_1 ≤ λ_2 ≤ …` of `-A`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpectrum {
    lambdas: Vec<f64>,
    label: String,
}

impl OperatorSpectrum {
    pub fn new(lambdas: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(invalid("lambdas", "spectrum must contain at least one eigenvalue"));
        }
        if let Some((i, l)) = lambdas.iter().enumerate().find(|(_, l)| !(l.is_finite() && **l > 0.0)) {
            return Err(invalid("lambdas", format!("inf λ > 0 violated: λ_{} = {l}", i + 1)));
        }
        if lambdas.windows(2).any(|w| w[1] < w[0]) {
            return Err(invalid("lambdas", "eigenvalues must be nondecreasing"));
        }
        Ok(Self {
            lambdas,
            label: label.into(),
        })
    }

    /// Dirichlet Laplacian on (0,1): `λ_i = π² i²`.
    pub fn dirichlet_laplacian(n: usize) -> Self {
        let lambdas = (1..=n).map(|i| std::f64::consts::PI.powi(2) * (i * i) as f64).collect();
        Self {
            lambdas,
            label: "dirichlet-laplacian".into(),
        }
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    fn check(&self, v: &SpectralVector) -> Result<()> {
        if v.dim() > self.lambdas.len() {
            return Err(Error::DimensionMismatch {
                context: "operator spectrum",
                expected: self.lambdas.len(),
                found: v.dim(),
            });
        }
        Ok(())
    }

    fn diagonal(&self, v: &SpectralVector, factor: impl Fn(f64) -> f64) -> Result<SpectralVector> {
        self.check(v)?;
        Ok(SpectralVector::new(
            v.coeffs
                .iter()
                .zip(&self.lambdas)
                .map(|(c, &l)| factor(l) * c)
                .collect(),
        ))
    }

    /// `e^{At} v`.
    pub fn apply_semigroup(&self, v: &SpectralVector, t: f64) -> Result<SpectralVector> {
        if !(t >= 0.0) {
            return Err(invalid("t", format!("time must be nonnegative, got {t}")));
        }
        self.diagonal(v, |l| (-l * t).exp())
    }

    /// `(I - At)^{-1} v`.
    pub fn apply_resolvent(&self, v: &SpectralVector, t: f64) -> Result<SpectralVector> {
        if !(t >= 0.0) {
            return Err(invalid("t", format!("time must be nonnegative, got {t}")));
        }
        self.diagonal(v, |l| 1.0 / (1.0 + l * t))
    }

    /// `(-A)^ρ v`; negative `ρ` smooths.
    pub fn apply_fractional_power(&self, v: &SpectralVector, rho: f64) -> Result<SpectralVector> {
        self.diagonal(v, |l| l.powf(rho))
    }

    /// `||v||_{H_ρ} = ||(-A)^ρ v||_H`.
    pub fn sobolev_norm(&self, v: &SpectralVector, rho: f64) -> Result<f64> {
        self.check(v)?;
        Ok(v.coeffs
            .iter()
            .zip(&self.lambdas)
            .map(|(c, &l)| l.powf(2.0 * rho) * c * c)
            .sum::<f64>()
            .sqrt())
    }
}

/// Regularity exponents of a problem together with the spectral growth rates
/// `inf_{i>N} λ_i = O(N^{ρ_A})` and `sup_{j>K} η_j = O(K^{-ρ_Q})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularityParams {
    pub gamma: f64,
    pub beta: f64,
    pub alpha: f64,
    pub delta: f64,
    pub theta: f64,
    pub rho_a: f64,
    pub rho_q: f64,
}

impl Default for RegularityParams {
    fn default() -> Self {
        Self {
            gamma: 0.5,
            beta: 0.0,
            alpha: 0.5,
            delta: 0.25,
            theta: 0.25,
            rho_a: 2.0,
            rho_q: 2.0,
        }
    }
}

impl RegularityParams {
    /// Temporal order `q = min(2(γ − β), γ)`.
    pub fn q(&self) -> f64 {
        (2.0 * (self.gamma - self.beta)).min(self.gamma)
    }

    pub fn validate(&self) -> Result<()> {
        let in_range = |name: &'static str, x: f64, lo: f64, hi: f64, lo_open: bool| {
            let ok = x.is_finite() && (if lo_open { x > lo } else { x >= lo }) && x < hi;
            if ok {
                Ok(())
            } else {
                let open = if lo_open { "(" } else { "[" };
                Err(invalid(name, format!("{x} not in {open}{lo}, {hi})")))
            }
        };
        in_range("gamma", self.gamma, 0.0, 1.0, false)?;
        in_range("beta", self.beta, 0.0, 1.0, false)?;
        in_range("alpha", self.alpha, 0.0, f64::INFINITY, true)?;
        in_range("delta", self.delta, 0.0, 0.5, true)?;
        in_range("theta", self.theta, 0.0, 0.5, true)?;
        in_range("rho_a", self.rho_a, 0.0, f64::INFINITY, true)?;
        in_range("rho_q", self.rho_q, 0.0, f64::INFINITY, true)?;
        if self.beta > self.gamma {
            return Err(invalid("beta", format!("β = {} exceeds γ = {}", self.beta, self.gamma)));
        }
        if self.gamma >= self.delta + 0.5 {
            return Err(invalid(
                "gamma",
                format!("γ = {} must be below δ + 1/2 = {}", self.gamma, self.delta + 0.5),
            ));
        }
        if self.gamma < self.delta {
            return Err(invalid(
                "gamma",
                format!("γ = {} must be at least δ = {}", self.gamma, self.delta),
            ));
        }
        let q = self.q();
        if !(q > 0.0 && q <= 1.0) {
            return Err(invalid("gamma", format!("q = min(2(γ−β), γ) = {q} not in (0, 1]")));
        }
        Ok(())
    }
}

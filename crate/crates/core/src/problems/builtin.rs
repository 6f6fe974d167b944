//! Built-in problem families on `(0,1)` with `A = Δ` (Dirichlet),
//! `λ_i = π² i²`, `e_i = ẽ_i = √2 sin(iπx)` and `η_j = j^{-ρ_Q}`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Coefficients, NemytskijModel, NonCommutativeModel, ProblemSpec, RankOneModel, ScalarFn};
use crate::error::{invalid, Error, Result};
use crate::qwiener::QSpectrum;
use crate::spectral::{OperatorSpectrum, RegularityParams, SpectralVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BuiltinProblem {
    /// Pointwise `f(v) = 1 − v/(1+v²)`, `b(v) = σ √(1+v²)`.
    #[default]
    HeatMul,
    /// Rank-one diffusion `⟨u, ψ⟩ G(v)`, same drift.
    RankOne,
    /// Non-commutative counterexample; only meaningful for validation.
    Adversarial,
}

impl BuiltinProblem {
    pub const ALL: [BuiltinProblem; 3] = [Self::HeatMul, Self::RankOne, Self::Adversarial];

    pub fn name(self) -> &'static str {
        match self {
            Self::HeatMul => "heatmul",
            Self::RankOne => "rankone",
            Self::Adversarial => "adversarial",
        }
    }
}

impl fmt::Display for BuiltinProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BuiltinProblem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                invalid(
                    "problem",
                    format!("unknown problem `{s}` (expected heatmul, rankone or adversarial)"),
                )
            })
    }
}

/// Parameters shared by all `(N, K)` instances of a built-in family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSettings {
    pub id: BuiltinProblem,
    pub sigma: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub params: RegularityParams,
    /// Initial value `amplitude · sin(πx)`.
    pub initial_amplitude: f64,
    /// Quadrature grid size; `None` picks `max(2 max(N, K), 128)`.
    pub grid_points: Option<usize>,
    pub fd_fallback: bool,
    /// Eigenvalues replacing `λ_i = π² i²`; needs at least `N` entries.
    pub lambdas: Option<Vec<f64>>,
}

impl Default for ProblemSettings {
    fn default() -> Self {
        Self {
            id: BuiltinProblem::HeatMul,
            sigma: 0.1,
            horizon: 1.0,
            params: RegularityParams::default(),
            initial_amplitude: 0.5,
            grid_points: None,
            fd_fallback: true,
            lambdas: None,
        }
    }
}

impl ProblemSettings {
    pub fn new(id: BuiltinProblem) -> Self {
        Self { id, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(invalid(
                "sigma",
                format!("must be finite and nonnegative, got {}", self.sigma),
            ));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid("T", format!("must be positive, got {}", self.horizon)));
        }
        if !self.initial_amplitude.is_finite() {
            return Err(invalid("initial_amplitude", "must be finite"));
        }
        Ok(())
    }

    /// `amplitude · sin(πx)` in the sine basis.
    pub fn initial(&self, n: usize) -> SpectralVector {
        let mut v = SpectralVector::zeros(n);
        v.coeffs_mut()[0] = self.initial_amplitude / std::f64::consts::SQRT_2;
        v
    }

    /// The family member with `n` Galerkin and `k` noise modes.
    pub fn instantiate(&self, n: usize, k: usize) -> Result<ProblemSpec> {
        self.validate()?;
        if n == 0 || k == 0 {
            return Err(invalid("N, K", "need at least one mode"));
        }
        let sigma = self.sigma;
        let model: Arc<dyn Coefficients> = match self.id {
            BuiltinProblem::HeatMul => Arc::new(NemytskijModel::new(
                n,
                k,
                self.grid_points,
                Arc::new(|_, v| 1.0 - v / (1.0 + v * v)),
                Arc::new(move |_, v| sigma * (1.0 + v * v).sqrt()),
                Some(Arc::new(move |_, v| sigma * v / (1.0 + v * v).sqrt())),
            )?),
            BuiltinProblem::RankOne => Arc::new(RankOneModel::new(n, k, sigma, self.grid_points)?),
            BuiltinProblem::Adversarial => Arc::new(NonCommutativeModel::new(n, k)?),
        };
        self.assemble(self.id.name(), n, k, model)
    }

    /// A pointwise problem with user-supplied `f`, `b` and optional `∂b/∂v`
    /// on the same operator, noise and initial value as the built-ins.
    pub fn pointwise(
        &self,
        label: &str,
        n: usize,
        k: usize,
        f: ScalarFn,
        b: ScalarFn,
        b_v: Option<ScalarFn>,
    ) -> Result<ProblemSpec> {
        self.validate()?;
        let model = Arc::new(NemytskijModel::new(n, k, self.grid_points, f, b, b_v)?);
        self.assemble(label, n, k, model)
    }

    /// Pointwise problem with affine coefficients `f = f0 + f1 v`, `b = b0 + b1 v`.
    pub fn affine(&self, n: usize, k: usize, f: (f64, f64), b: (f64, f64)) -> Result<ProblemSpec> {
        self.pointwise(
            "affine",
            n,
            k,
            Arc::new(move |_, v| f.0 + f.1 * v),
            Arc::new(move |_, v| b.0 + b.1 * v),
            Some(Arc::new(move |_, _| b.1)),
        )
    }

    /// The first `n` eigenvalues of `A`.
    pub fn spectrum(&self, n: usize) -> Result<OperatorSpectrum> {
        match &self.lambdas {
            None => Ok(OperatorSpectrum::dirichlet_laplacian(n)),
            Some(l) if l.len() < n => Err(invalid(
                "lambdas",
                format!("{} eigenvalues given, N = {n} needed", l.len()),
            )),
            Some(l) => OperatorSpectrum::new(l[..n].to_vec(), "custom"),
        }
    }

    fn assemble(&self, label: &str, n: usize, k: usize, model: Arc<dyn Coefficients>) -> Result<ProblemSpec> {
        Ok(ProblemSpec::new(
            label,
            self.spectrum(n)?,
            QSpectrum::power_law(k, self.params.rho_q)?,
            self.params,
            self.horizon,
            self.initial(n),
            model,
        )?
        .with_fd_fallback(self.fd_fallback))
    }
}

//! The problem contract `dX = (AX + F(X)) dt + B(X) dW` and its built-in
//! instances.
//!
//! A [`ProblemSpec`] fixes one discretization level: `N` Galerkin modes
//! (the length of the operator spectrum) and `K` noise modes (the length of
//! the `Q` spectrum). Families of problems that can be instantiated at any
//! `(N, K)` live in [`builtin`].

mod adversarial;
pub mod builtin;
pub mod grid;
mod nemytskij;
mod rankone;

use std::fmt;
use std::sync::Arc;

pub use adversarial::NonCommutativeModel;
pub use builtin::{BuiltinProblem, ProblemSettings};
pub use grid::{analyze, synthesize, GridFunction, SineGrid};
pub use nemytskij::{NemytskijModel, ScalarFn};
pub use rankone::RankOneModel;

use crate::cost::CostLedger;
use crate::error::{invalid, Error, Result};
use crate::qwiener::{NoiseIncrement, QSpectrum};
use crate::spectral::{check_dim, OperatorSpectrum, RegularityParams, SpectralVector};

/// Evaluators of the drift and diffusion of one problem at fixed `(N, K)`.
///
/// States are coefficient slices of length `N`, noise directions coefficient
/// slices of length `K`; results are always projected onto `H_N`.
pub trait Coefficients: Send + Sync + fmt::Debug {
    /// `(N, K)`.
    fn dims(&self) -> (usize, usize);

    /// `P_N F(v)`.
    fn drift(&self, v: &[f64]) -> Result<Vec<f64>>;

    /// `P_N (B(v) u)` for `u = Σ_j u_j ẽ_j`.
    fn diffusion(&self, v: &[f64], u: &[f64]) -> Result<Vec<f64>>;

    /// Columns `P_N B(v) ẽ_j` for `j < k`.
    fn diffusion_columns(&self, v: &[f64], k: usize) -> Result<Vec<Vec<f64>>> {
        let (_, kk) = self.dims();
        let mut unit = vec![0.0; kk];
        (0..k)
            .map(|j| {
                unit.fill(0.0);
                unit[j] = 1.0;
                self.diffusion(v, &unit)
            })
            .collect()
    }

    /// Analytic `P_N (B'(v)(B(v) ẽ_i)) ẽ_j`, when known. With `galerkin` the
    /// direction is the projected column `P_N B(v) ẽ_i`, which is the
    /// derivative of the Galerkin system `v ↦ P_N B(v)` on `H_N`.
    fn bprime_b(&self, _v: &[f64], _i: usize, _j: usize, _galerkin: bool) -> Option<Result<Vec<f64>>> {
        None
    }

    /// Pointwise structure, when `B(v)u = b(·, v)·u` and `F(v) = f(·, v)`.
    fn nemytskij(&self) -> Option<&NemytskijModel> {
        None
    }
}

/// Argument of `B(v)`: a sampled increment or the scaled basis direction
/// `√η_j ẽ_j`.
#[derive(Debug, Clone, Copy)]
pub enum Direction<'a> {
    Increment(&'a NoiseIncrement),
    Mode(usize),
}

/// B̄ variant of the pointwise scheme.
///
/// `Plain` (alias `paper`) multiplies the single difference `b(·, Y − h/2 P_N b(·, Y)) − b(·, Y)`
/// by `Σ_j η_j ẽ_j`; `Aligned` by `Σ_j η_j ẽ_j²`, which is the weight whose
/// first-order Taylor term reproduces the Milstein correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BbarConvention {
    #[serde(alias = "paper")]
    Plain,
    #[default]
    Aligned,
}

impl std::str::FromStr for BbarConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "plain" | "paper" => Ok(Self::Plain),
            "aligned" => Ok(Self::Aligned),
            other => Err(invalid("dfmm_bbar_convention", format!("unknown convention `{other}`"))),
        }
    }
}

/// One SPDE instance at fixed `(N, K)`.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    label: String,
    spectrum: OperatorSpectrum,
    noise: QSpectrum,
    params: RegularityParams,
    horizon: f64,
    initial: SpectralVector,
    model: Arc<dyn Coefficients>,
    fd_fallback: bool,
    // Σ_j η_j ẽ_j and Σ_j η_j ẽ_j² on the grid, pointwise problems only
    dfmm_weights: Option<[Vec<f64>; 2]>,
}

impl ProblemSpec {
    pub fn new(
        label: impl Into<String>,
        spectrum: OperatorSpectrum,
        noise: QSpectrum,
        params: RegularityParams,
        horizon: f64,
        initial: SpectralVector,
        model: Arc<dyn Coefficients>,
    ) -> Result<Self> {
        let (n, k) = model.dims();
        check_dim("operator spectrum vs model", n, spectrum.len())?;
        check_dim("initial value vs model", n, initial.dim())?;
        check_dim("noise spectrum vs model", k, noise.len())?;
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid("T", format!("horizon must be positive, got {horizon}")));
        }
        if !initial.is_finite() {
            return Err(invalid("initial", "initial value must be finite"));
        }
        let dfmm_weights = model.nemytskij().map(|nm| {
            let grid = nm.grid();
            let mut linear = vec![0.0; grid.points()];
            let mut squared = vec![0.0; grid.points()];
            for j in noise.active_modes() {
                let eta = noise.etas()[j];
                for ((l, s), e) in linear.iter_mut().zip(squared.iter_mut()).zip(grid.row(j)) {
                    *l += eta * e;
                    *s += eta * e * e;
                }
            }
            [linear, squared]
        });
        Ok(Self {
            label: label.into(),
            spectrum,
            noise,
            params,
            horizon,
            initial,
            model,
            fd_fallback: true,
            dfmm_weights,
        })
    }

    /// Allow or forbid the finite-difference `B'B` fallback.
    pub fn with_fd_fallback(mut self, enabled: bool) -> Self {
        self.fd_fallback = enabled;
        self
    }

    pub fn with_initial(mut self, initial: SpectralVector) -> Result<Self> {
        check_dim("initial value vs model", self.n(), initial.dim())?;
        self.initial = initial;
        Ok(self)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn spectrum(&self) -> &OperatorSpectrum {
        &self.spectrum
    }

    pub fn noise(&self) -> &QSpectrum {
        &self.noise
    }

    pub fn params(&self) -> &RegularityParams {
        &self.params
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn initial(&self) -> &SpectralVector {
        &self.initial
    }

    pub fn model(&self) -> &dyn Coefficients {
        self.model.as_ref()
    }

    pub fn n(&self) -> usize {
        self.spectrum.len()
    }

    pub fn k(&self) -> usize {
        self.noise.len()
    }

    pub fn is_nemytskij(&self) -> bool {
        self.model.nemytskij().is_some()
    }

    /// Whether `B'B` is available analytically or through the fallback.
    pub fn has_bprime_b(&self) -> bool {
        self.fd_fallback || self.has_analytic_bprime_b()
    }

    pub fn has_analytic_bprime_b(&self) -> bool {
        let n = self.n();
        self.model.bprime_b(&vec![0.0; n], 0, 0, false).is_some()
    }

    fn check_state(&self, v: &SpectralVector) -> Result<()> {
        check_dim("state", self.n(), v.dim())
    }

    /// `P_N F(v)`; charges `N` drift evaluations.
    pub fn apply_f(&self, v: &SpectralVector, ledger: &mut CostLedger) -> Result<SpectralVector> {
        self.check_state(v)?;
        ledger.f_evals += self.n() as u64;
        self.model.drift(v.coeffs()).map(SpectralVector::new)
    }

    /// `P_N (B(v) u)`. A full increment charges `K N` diffusion evaluations
    /// (the whole matrix of `B(v)`), a single mode charges one column, `N`.
    pub fn apply_b(&self, v: &SpectralVector, dir: Direction<'_>, ledger: &mut CostLedger) -> Result<SpectralVector> {
        self.check_state(v)?;
        let n = self.n() as u64;
        match dir {
            Direction::Increment(w) => {
                check_dim("noise increment", self.k(), w.len())?;
                ledger.b_evals += self.noise.active() as u64 * n;
                self.model.diffusion(v.coeffs(), w.coeffs()).map(SpectralVector::new)
            }
            Direction::Mode(j) => {
                if j >= self.k() {
                    return Err(invalid("j", format!("mode {j} outside K = {}", self.k())));
                }
                ledger.b_evals += n;
                let mut u = vec![0.0; self.k()];
                u[j] = self.noise.etas()[j].sqrt();
                self.model.diffusion(v.coeffs(), &u).map(SpectralVector::new)
            }
        }
    }

    /// `P_N (b(·, v) ΔW)` for pointwise problems, where one evaluation of `b`
    /// on the grid serves every noise mode; charges `N`.
    pub fn apply_b_pointwise(
        &self,
        v: &SpectralVector,
        w: &NoiseIncrement,
        ledger: &mut CostLedger,
    ) -> Result<SpectralVector> {
        self.check_state(v)?;
        check_dim("noise increment", self.k(), w.len())?;
        if !self.is_nemytskij() {
            return Err(Error::Unsupported {
                scheme: "DFMM",
                requirement: "Nemytskij problem",
            });
        }
        ledger.b_evals += self.n() as u64;
        self.model.diffusion(v.coeffs(), w.coeffs()).map(SpectralVector::new)
    }

    /// Columns `P_N B(v) ẽ_j` of an already evaluated diffusion matrix; free.
    pub fn diffusion_columns(&self, v: &SpectralVector) -> Result<Vec<SpectralVector>> {
        self.check_state(v)?;
        Ok(self
            .model
            .diffusion_columns(v.coeffs(), self.k())?
            .into_iter()
            .map(SpectralVector::new)
            .collect())
    }

    /// `P_N (B'(v)(B(v) ẽ_i)) ẽ_j`, analytic when the model provides it,
    /// otherwise a forward difference with step `1e-6 (1 + ||v||)` along the
    /// projected column `P_N B(v) ẽ_i`.
    pub fn apply_bprime_b(&self, v: &SpectralVector, i: usize, j: usize) -> Result<SpectralVector> {
        self.bprime_b_impl(v, i, j, false)
    }

    /// `P_N (B'(v)(P_N B(v) ẽ_i)) ẽ_j`: the same with the projected direction,
    /// as used by the Milstein step (only `B'` restricted to `H_N` enters the
    /// `K N²` count). For pointwise problems it differs from
    /// [`Self::apply_bprime_b`] by the truncation of `b(v) ẽ_i`.
    pub fn galerkin_bprime_b(&self, v: &SpectralVector, i: usize, j: usize) -> Result<SpectralVector> {
        self.bprime_b_impl(v, i, j, true)
    }

    fn bprime_b_impl(&self, v: &SpectralVector, i: usize, j: usize, galerkin: bool) -> Result<SpectralVector> {
        self.check_state(v)?;
        if i >= self.k() || j >= self.k() {
            return Err(invalid("i, j", format!("modes ({i}, {j}) outside K = {}", self.k())));
        }
        if let Some(exact) = self.model.bprime_b(v.coeffs(), i, j, galerkin) {
            return exact.map(SpectralVector::new);
        }
        if !self.fd_fallback {
            return Err(Error::Unsupported {
                scheme: "B'B evaluation",
                requirement: "an analytic derivative or the finite-difference fallback",
            });
        }
        self.fd_bprime_b(v, i, j)
    }

    fn fd_bprime_b(&self, v: &SpectralVector, i: usize, j: usize) -> Result<SpectralVector> {
        let eps = 1e-6 * (1.0 + v.norm());
        let mut unit = vec![0.0; self.k()];
        unit[i] = 1.0;
        let col = self.model.diffusion(v.coeffs(), &unit)?;
        unit[i] = 0.0;
        unit[j] = 1.0;
        let shifted: Vec<f64> = v.coeffs().iter().zip(&col).map(|(a, c)| a + eps * c).collect();
        let up = self.model.diffusion(&shifted, &unit)?;
        let base = self.model.diffusion(v.coeffs(), &unit)?;
        Ok(SpectralVector::new(
            up.iter().zip(&base).map(|(a, b)| (a - b) / eps).collect(),
        ))
    }

    /// `||B'B(i,j) − B'B(j,i)|| / (1 + ||B'B(i,j)||)`.
    pub fn check_commutativity(&self, v: &SpectralVector, i: usize, j: usize) -> Result<f64> {
        if i == j {
            self.apply_bprime_b(v, i, j)?;
            return Ok(0.0);
        }
        let ij = self.apply_bprime_b(v, i, j)?;
        let ji = self.apply_bprime_b(v, j, i)?;
        Ok(ij.distance(&ji) / (1.0 + ij.norm()))
    }

    /// Milstein correction `Σ_{i,j} w_ij B'B(i, j)` with the second-order
    /// weights of `dw`; charges `K N²` derivative evaluations.
    pub fn milstein_correction(
        &self,
        v: &SpectralVector,
        dw: &NoiseIncrement,
        ledger: &mut CostLedger,
    ) -> Result<SpectralVector> {
        self.check_state(v)?;
        check_dim("noise increment", self.k(), dw.len())?;
        let n = self.n() as u64;
        ledger.bprime_evals += self.noise.active() as u64 * n * n;
        if let Some(nm) = self.model.nemytskij() {
            if nm.has_derivative() {
                return nm
                    .milstein_correction(v.coeffs(), dw.coeffs(), self.noise.etas(), dw.h())
                    .map(SpectralVector::new);
            }
        }
        self.milstein_correction_by_pairs(v, dw)
    }

    /// Reference evaluation of the Milstein correction as an explicit sum
    /// over mode pairs.
    pub fn milstein_correction_by_pairs(&self, v: &SpectralVector, dw: &NoiseIncrement) -> Result<SpectralVector> {
        let weights = crate::qwiener::second_order_weights(dw, &self.noise)?;
        let active: Vec<usize> = self.noise.active_modes().collect();
        let mut out = SpectralVector::zeros(self.n());
        for &i in &active {
            for &j in &active {
                let w = weights.get(i, j);
                if w != 0.0 {
                    out.axpy(w, &self.galerkin_bprime_b(v, i, j)?)?;
                }
            }
        }
        Ok(out)
    }

    /// Derivative-free correction `Σ_j B̄(v, h, j)` with
    /// `B̄ = B(v − h/2 √η_j P_N B(v) ẽ_j) √η_j ẽ_j − B(v) √η_j ẽ_j`.
    /// `columns` are the already evaluated `P_N B(v) ẽ_j`; charges `K N`.
    pub fn derivative_free_correction(
        &self,
        v: &SpectralVector,
        columns: &[SpectralVector],
        h: f64,
        ledger: &mut CostLedger,
    ) -> Result<SpectralVector> {
        self.check_state(v)?;
        check_dim("diffusion columns", self.k(), columns.len())?;
        if let Some(nm) = self.model.nemytskij() {
            ledger.b_evals += self.noise.active() as u64 * self.n() as u64;
            return nm
                .derivative_free_correction(v.coeffs(), columns, self.noise.etas(), h)
                .map(SpectralVector::new);
        }
        self.derivative_free_correction_by_modes(v, columns, h, ledger)
    }

    /// Mode-by-mode evaluation of [`Self::derivative_free_correction`].
    pub fn derivative_free_correction_by_modes(
        &self,
        v: &SpectralVector,
        columns: &[SpectralVector],
        h: f64,
        ledger: &mut CostLedger,
    ) -> Result<SpectralVector> {
        let mut out = SpectralVector::zeros(self.n());
        for j in self.noise.active_modes() {
            let sqrt_eta = self.noise.etas()[j].sqrt();
            let mut stage = v.clone();
            stage.axpy(-0.5 * h * sqrt_eta, &columns[j])?;
            let perturbed = self.apply_b(&stage, Direction::Mode(j), ledger)?;
            out.axpy(1.0, &perturbed)?;
            out.axpy(-sqrt_eta, &columns[j])?;
        }
        Ok(out)
    }

    /// Single-difference correction of the pointwise scheme; charges `N`.
    pub fn dfmm_correction(
        &self,
        v: &SpectralVector,
        h: f64,
        convention: BbarConvention,
        ledger: &mut CostLedger,
    ) -> Result<SpectralVector> {
        self.check_state(v)?;
        let (nm, weights) = match (self.model.nemytskij(), &self.dfmm_weights) {
            (Some(nm), Some(w)) => (nm, w),
            _ => {
                return Err(Error::Unsupported {
                    scheme: "DFMM",
                    requirement: "Nemytskij problem",
                })
            }
        };
        ledger.b_evals += self.n() as u64;
        let weight = match convention {
            BbarConvention::Plain => &weights[0],
            BbarConvention::Aligned => &weights[1],
        };
        nm.single_difference_correction(v.coeffs(), h, weight)
            .map(SpectralVector::new)
    }

    /// Largest commutativity residual over `states` and all ordered pairs of
    /// distinct active modes below `max_mode`.
    pub fn commutativity_sweep(&self, states: &[SpectralVector], max_mode: usize) -> Result<f64> {
        let modes: Vec<usize> = self.noise.active_modes().filter(|&j| j < max_mode).collect();
        let mut worst = 0.0f64;
        for v in states {
            for &i in &modes {
                for &j in modes.iter().filter(|&&j| j != i) {
                    worst = worst.max(self.check_commutativity(v, i, j)?);
                }
            }
        }
        Ok(worst)
    }
}

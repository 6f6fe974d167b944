//! Truncated `Q`-Wiener noise: spectra, sampled increments, coarsening by
//! exact summation and the second-order weights of the commutative Milstein
//! correction.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};

/// Eigenvalues `η_1 ≥ η_2 ≥ … ≥ η_K ≥ 0` of the covariance operator `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct QSpectrum {
    etas: Vec<f64>,
    trace: f64,
}

impl QSpectrum {
    pub fn new(etas: Vec<f64>) -> Result<Self> {
        if etas.is_empty() {
            return Err(invalid("etas", "noise spectrum must contain at least one mode"));
        }
        if etas.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(invalid("etas", "eigenvalues of Q must be finite and nonnegative"));
        }
        if etas.windows(2).any(|w| w[1] > w[0]) {
            return Err(invalid("etas", "eigenvalues of Q must be nonincreasing"));
        }
        let trace = etas.iter().sum();
        Ok(Self { etas, trace })
    }

    /// `η_j = j^{-ρ_Q}` for `j = 1..=k`.
    pub fn power_law(k: usize, rho_q: f64) -> Result<Self> {
        if !(rho_q > 0.0) {
            return Err(invalid("rho_q", "decay rate must be positive"));
        }
        Self::new((1..=k).map(|j| (j as f64).powf(-rho_q)).collect())
    }

    pub fn etas(&self) -> &[f64] {
        &self.etas
    }

    pub fn trace(&self) -> f64 {
        self.trace
    }

    pub fn len(&self) -> usize {
        self.etas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.etas.is_empty()
    }

    /// Number of modes with `η_j ≠ 0`.
    pub fn active(&self) -> usize {
        self.etas.iter().filter(|&&e| e != 0.0).count()
    }

    /// Indices of the modes with `η_j ≠ 0`.
    pub fn active_modes(&self) -> impl Iterator<Item = usize> + '_ {
        self.etas.iter().enumerate().filter(|(_, &e)| e != 0.0).map(|(j, _)| j)
    }

    /// The first `k` modes of the spectrum.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.len() {
            return Err(invalid("K", format!("cannot truncate {} modes to {k}", self.len())));
        }
        Self::new(self.etas[..k].to_vec())
    }
}

/// One increment `ΔW = Σ_j sqrt(η_j) Δβ^j ẽ_j` of the truncated process over
/// a step of length `h`, stored by its coefficients against `ẽ_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseIncrement {
    coeffs: Vec<f64>,
    h: f64,
}

impl NoiseIncrement {
    pub fn new(coeffs: Vec<f64>, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(invalid("h", format!("step must be positive, got {h}")));
        }
        Ok(Self { coeffs, h })
    }

    pub fn zero(k: usize, h: f64) -> Result<Self> {
        Self::new(vec![0.0; k], h)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }
}

/// Reproducible Gaussian source for one Monte-Carlo path.
///
/// Each `(seed, path_id)` pair selects an independent ChaCha8 stream, so a
/// path draws the same numbers regardless of which worker thread runs it.
/// `counter` is the number of standard normals consumed so far.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    path_id: u64,
    counter: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, path_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path_id);
        Self {
            seed,
            path_id,
            counter: 0,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path_id(&self) -> u64 {
        self.path_id
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.counter += 1;
        StandardNormal.sample(&mut self.rng)
    }
}

/// Draw `ΔW` over a step `h`: one standard normal per active mode; dead modes
/// stay exactly zero and consume nothing.
pub fn sample_increment(q: &QSpectrum, h: f64, rng: &mut RngStream) -> Result<NoiseIncrement> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid("h", format!("step must be positive, got {h}")));
    }
    let sqrt_h = h.sqrt();
    let coeffs = q
        .etas
        .iter()
        .map(|&eta| {
            if eta == 0.0 {
                0.0
            } else {
                eta.sqrt() * sqrt_h * rng.standard_normal()
            }
        })
        .collect();
    NoiseIncrement::new(coeffs, h)
}

/// Sum consecutive increments into one spanning their combined interval.
pub fn aggregate_increments(parts: &[NoiseIncrement]) -> Result<NoiseIncrement> {
    let first = parts
        .first()
        .ok_or_else(|| invalid("parts", "cannot aggregate an empty list"))?;
    let k = first.len();
    let mut coeffs = vec![0.0; k];
    let mut h = 0.0;
    for part in parts {
        if part.len() != k {
            return Err(Error::DimensionMismatch {
                context: "aggregate_increments",
                expected: k,
                found: part.len(),
            });
        }
        for (c, p) in coeffs.iter_mut().zip(&part.coeffs) {
            *c += p;
        }
        h += part.h;
    }
    NoiseIncrement::new(coeffs, h)
}

/// Keep the first `k` noise coefficients.
pub fn truncate_noise(w: &NoiseIncrement, k: usize) -> Result<NoiseIncrement> {
    if k == 0 || k > w.len() {
        return Err(invalid(
            "K",
            format!("cannot truncate an increment of {} modes to {k}", w.len()),
        ));
    }
    NoiseIncrement::new(w.coeffs[..k].to_vec(), w.h)
}

/// Coarsen `fine` (all of equal length) into `coarse_steps` increments by
/// summing consecutive blocks and truncating to `k` modes.
pub fn coarsen(fine: &[NoiseIncrement], coarse_steps: usize, k: usize) -> Result<Vec<NoiseIncrement>> {
    if coarse_steps == 0 || !fine.len().is_multiple_of(coarse_steps) {
        return Err(invalid(
            "M",
            format!("{} fine steps are not divisible into {coarse_steps}", fine.len()),
        ));
    }
    let ratio = fine.len() / coarse_steps;
    fine.chunks(ratio)
        .map(|block| truncate_noise(&aggregate_increments(block)?, k))
        .collect()
}

/// Symmetric `K × K` array of second-order weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    k: usize,
    data: Vec<f64>,
}

impl WeightMatrix {
    pub fn size(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.k + j]
    }
}

/// Weights `(ΔW_i ΔW_j − h η_i δ_ij) / 2` multiplying `B'(B ẽ_i) ẽ_j` in the
/// commutative Milstein correction.
pub fn second_order_weights(w: &NoiseIncrement, q: &QSpectrum) -> Result<WeightMatrix> {
    if w.len() != q.len() {
        return Err(Error::DimensionMismatch {
            context: "second_order_weights",
            expected: q.len(),
            found: w.len(),
        });
    }
    let k = w.len();
    let c = &w.coeffs;
    let mut data = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            let mut value = c[i] * c[j];
            if i == j {
                value -= w.h * q.etas[i];
            }
            data[i * k + j] = 0.5 * value;
        }
    }
    Ok(WeightMatrix { k, data })
}
